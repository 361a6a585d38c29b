//! Report files: atomic writes into the output directory.

use std::io::Write;
use std::path::{Path, PathBuf};

use betahankel::{Error, Result};
use serde::Serialize;

pub struct OutDir {
    dir: Option<PathBuf>,
}

impl OutDir {
    pub fn new(dir: Option<PathBuf>) -> Result<Self> {
        if let Some(d) = &dir {
            std::fs::create_dir_all(d).map_err(|e| Error::Io(format!("{}: {e}", d.display())))?;
        }
        Ok(OutDir { dir })
    }

    pub fn is_set(&self) -> bool {
        self.dir.is_some()
    }

    /// Writes `bytes` to `name` via a temporary file and a rename; no-op without a directory.
    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        write_atomic(&dir.join(name), bytes)
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<()> {
        self.write(name, &to_json(value)?)
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut buf = serde_json::to_vec_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    buf.push(b'\n');
    Ok(buf)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        io(e)
    })
}

/// CSV rows built by hand so every float uses the same 17-digit format.
pub struct Csv {
    buf: Vec<u8>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut c = Csv { buf: Vec::new() };
        c.row(header.iter().map(|s| s.to_string()));
        c
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) {
        let line: Vec<String> = cells.into_iter().collect();
        self.buf.extend_from_slice(line.join(",").as_bytes());
        self.buf.push(b'\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

/// Exponents print as "inf" or a short decimal.
pub fn exp_label(v: f64) -> String {
    if v.is_infinite() { "inf".into() } else { format!("{v}") }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutDir::new(Some(dir.path().join("nested"))).unwrap();
        out.write("a.txt", b"one").unwrap();
        out.write("a.txt", b"two").unwrap();
        assert_eq!(std::fs::read(dir.path().join("nested/a.txt")).unwrap(), b"two");
        let leftovers: Vec<_> = std::fs::read_dir(dir.path().join("nested")).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }

    #[test]
    fn number_formats() {
        assert_eq!(num(1.0), "1.0000000000000000e0");
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(exp_label(2.5), "2.5");
    }
}
