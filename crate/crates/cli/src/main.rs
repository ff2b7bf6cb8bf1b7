fn main() {
    std::process::exit(eklab_cli::run(std::env::args_os()));
}
