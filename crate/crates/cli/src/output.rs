//! File emission with content digests, and the run manifest.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Writer that hashes everything passing through it.
pub struct HashingWriter<W: Write> {
    inner: W,
    hasher: Sha256,
    bytes: u64,
}

impl<W: Write> HashingWriter<W> {
    pub fn new(inner: W) -> Self {
        HashingWriter {
            inner,
            hasher: Sha256::new(),
            bytes: 0,
        }
    }

    pub fn finish(mut self) -> io::Result<(String, u64)> {
        self.inner.flush()?;
        Ok((hex(&self.hasher.finalize()), self.bytes))
    }
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        self.bytes += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Where a primary output goes.
#[derive(Debug, Clone)]
pub enum Target {
    Stdout,
    File(PathBuf),
}

impl Target {
    pub fn from_option(path: Option<&Path>) -> Self {
        match path {
            Some(p) if p.as_os_str() != "-" => Target::File(p.to_path_buf()),
            _ => Target::Stdout,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Target::Stdout => "-".to_string(),
            Target::File(p) => p.display().to_string(),
        }
    }
}

/// Streams into `target` through `body`, returning the digest.
pub fn emit_with(target: &Target, body: impl FnOnce(&mut dyn Write) -> CliResult<()>) -> CliResult<OutputDigest> {
    let label = target.label();
    let err = |e| CliError::io(label.clone(), e);
    let (sha256, bytes) = match target {
        Target::Stdout => {
            let stdout = io::stdout();
            let mut w = HashingWriter::new(BufWriter::new(stdout.lock()));
            body(&mut w)?;
            w.finish().map_err(err)?
        }
        Target::File(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            }
            let file = File::create(path).map_err(err)?;
            let mut w = HashingWriter::new(BufWriter::new(file));
            body(&mut w)?;
            w.finish().map_err(err)?
        }
    };
    Ok(OutputDigest {
        path: label,
        sha256,
        bytes,
    })
}

pub fn emit_bytes(target: &Target, bytes: &[u8]) -> CliResult<OutputDigest> {
    let label = target.label();
    emit_with(target, |w| w.write_all(bytes).map_err(|e| CliError::io(label.clone(), e)))
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable output");
    v.push(b'\n');
    v
}

/// Formats a float for CSV; the shortest round-trip form, `inf`/`-inf` for
/// the overflow edges.
pub fn csv_float(v: f64) -> String {
    format!("{v}")
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    /// Command line that reproduces the primary outputs.
    pub argv: Vec<String>,
    pub params: serde_json::Value,
    pub threads: usize,
    pub segment_size: u64,
    pub wall_time_secs: f64,
    pub outputs: Vec<OutputDigest>,
}

impl RunManifest {
    pub fn new(subcommand: &str, argv: &[String], params: serde_json::Value, segment_size: u64, started: Instant) -> Self {
        RunManifest {
            tool: "eklab",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            argv: argv.to_vec(),
            params,
            threads: rayon::current_num_threads(),
            segment_size,
            wall_time_secs: started.elapsed().as_secs_f64(),
            outputs: Vec::new(),
        }
    }

    /// Writes to `path`, or to stderr when there is no file to sit beside.
    pub fn write(&self, path: Option<&Path>) -> CliResult<()> {
        let bytes = json_bytes(self);
        match path {
            Some(p) => {
                if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
                }
                std::fs::write(p, bytes).map_err(|e| CliError::io(p, e))
            }
            None => io::stderr().write_all(&bytes).map_err(|e| CliError::io("<stderr>", e)),
        }
    }
}

/// `<out>.manifest.json` next to a file output.
pub fn manifest_beside(target: &Target) -> Option<PathBuf> {
    match target {
        Target::Stdout => None,
        Target::File(p) => {
            let mut s = p.clone().into_os_string();
            s.push(".manifest.json");
            Some(PathBuf::from(s))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashing_writer_matches_direct_digest() {
        let mut w = HashingWriter::new(Vec::new());
        w.write_all(b"abc").unwrap();
        let (digest, bytes) = w.finish().unwrap();
        assert_eq!(bytes, 3);
        assert_eq!(digest, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(digest, sha256_hex(b"abc"));
    }

    #[test]
    fn manifest_path() {
        let t = Target::File(PathBuf::from("out/h.csv"));
        assert_eq!(manifest_beside(&t), Some(PathBuf::from("out/h.csv.manifest.json")));
        assert!(manifest_beside(&Target::from_option(Some(Path::new("-")))).is_none());
    }

    #[test]
    fn float_format() {
        assert_eq!(csv_float(f64::NEG_INFINITY), "-inf");
        assert_eq!(csv_float(0.1), "0.1");
        assert_eq!(csv_float(-4.0), "-4");
    }
}
