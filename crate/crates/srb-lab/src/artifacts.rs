//! Artifact plumbing: config hashing, byte-stable CSV, atomic file writes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// FNV-1a, 64-bit. Used only to derive stable artifact file names.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Hex hash of a config's canonical JSON encoding.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let json = serde_json::to_string(config)
        .map_err(|e| Error::Config(format!("config not serializable: {e}")))?;
    Ok(format!("{:016x}", fnv1a64(json.as_bytes())))
}

/// Write-to-temp plus rename, so failures never leave partial artifacts.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("bad artifact path {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// CSV with a fixed header; floats use Rust's shortest round-trip encoding,
/// so identical values always give identical bytes.
pub struct Csv {
    columns: usize,
    buf: String,
}

#[derive(Clone, Debug)]
pub enum Field {
    Int(i64),
    UInt(u64),
    Float(f64),
    Str(String),
    Empty,
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Float(v)
    }
}

impl From<u64> for Field {
    fn from(v: u64) -> Self {
        Field::UInt(v)
    }
}

impl From<usize> for Field {
    fn from(v: usize) -> Self {
        Field::UInt(v as u64)
    }
}

impl From<i64> for Field {
    fn from(v: i64) -> Self {
        Field::Int(v)
    }
}

impl From<&str> for Field {
    fn from(v: &str) -> Self {
        Field::Str(v.to_string())
    }
}

impl<T: Into<Field>> From<Option<T>> for Field {
    fn from(v: Option<T>) -> Self {
        match v {
            Some(x) => x.into(),
            None => Field::Empty,
        }
    }
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = header.join(",");
        buf.push('\n');
        Self {
            columns: header.len(),
            buf,
        }
    }

    pub fn row(&mut self, fields: &[Field]) {
        assert_eq!(fields.len(), self.columns, "csv row width mismatch");
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            match f {
                Field::Int(v) => self.buf.push_str(&v.to_string()),
                Field::UInt(v) => self.buf.push_str(&v.to_string()),
                Field::Float(v) => self.buf.push_str(&format_float(*v)),
                Field::Str(s) => {
                    // Quote when the cell needs escaping.
                    if s.contains([',', '"', '\n']) {
                        self.buf.push('"');
                        self.buf.push_str(&s.replace('"', "\"\""));
                        self.buf.push('"');
                    } else {
                        self.buf.push_str(s);
                    }
                }
                Field::Empty => {}
            }
        }
        self.buf.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf.into_bytes()
    }
}

fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        // `{}` on f64 is the shortest decimal that round-trips: stable bytes.
        format!("{v}")
    }
}

/// Paths for one experiment run: `<out_dir>/<kind>-<hash>.{csv,json}`.
pub struct ArtifactPaths {
    pub csv: PathBuf,
    pub json: PathBuf,
}

pub fn artifact_paths(out_dir: &Path, kind: &str, hash: &str) -> ArtifactPaths {
    ArtifactPaths {
        csv: out_dir.join(format!("{kind}-{hash}.csv")),
        json: out_dir.join(format!("{kind}-{hash}.json")),
    }
}

/// Pretty-printed JSON summary with a trailing newline.
pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("summary not serializable: {e}")))?;
    s.push('\n');
    Ok(s.into_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_known_vectors() {
        // Standard FNV-1a test vectors.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn csv_bytes_stable_and_escaped() {
        let build = || {
            let mut c = Csv::new(&["delta", "l1", "note"]);
            c.row(&[0.001.into(), Field::Empty, "a,b".into()]);
            c.row(&[(1.0 / 3.0).into(), 7u64.into(), "plain".into()]);
            c.into_bytes()
        };
        assert_eq!(build(), build());
        let text = String::from_utf8(build()).unwrap();
        assert_eq!(
            text,
            "delta,l1,note\n0.001,,\"a,b\"\n0.3333333333333333,7,plain\n"
        );
    }

    #[test]
    fn atomic_write_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, b"x\n").unwrap();
        write_atomic(&path, b"y\n").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"y\n");
        // No stray temp files left behind.
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn hash_depends_on_config() {
        #[derive(Serialize)]
        struct C {
            a: u32,
        }
        let h1 = config_hash(&C { a: 1 }).unwrap();
        let h2 = config_hash(&C { a: 2 }).unwrap();
        assert_ne!(h1, h2);
        assert_eq!(h1.len(), 16);
    }
}
