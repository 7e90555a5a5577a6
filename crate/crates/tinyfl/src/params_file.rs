//! Model parameter files.
//!
//! A file ending in `.f32` or `.bin` holds raw little-endian binary32 values.
//! Anything else is text with one decimal number per line; blank lines and
//! lines starting with `#` are ignored.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ParamsFileError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: length {len} is not a multiple of 4")]
    RawLength { path: PathBuf, len: usize },
    #[error("{path}:{line}: not a number: {text:?}")]
    Number {
        path: PathBuf,
        line: usize,
        text: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamsFormat {
    Text,
    RawF32,
}

impl ParamsFormat {
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("f32") || ext.eq_ignore_ascii_case("bin") => {
                ParamsFormat::RawF32
            }
            _ => ParamsFormat::Text,
        }
    }
}

pub fn parse_text(text: &str) -> Result<Vec<f64>, (usize, String)> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let x = match t {
            "NaN" => f64::NAN,
            "Infinity" => f64::INFINITY,
            "-Infinity" => f64::NEG_INFINITY,
            _ => t.parse::<f64>().map_err(|_| (i + 1, t.to_string()))?,
        };
        out.push(x);
    }
    Ok(out)
}

pub fn parse_raw_f32(bytes: &[u8]) -> Option<Vec<f64>> {
    if !bytes.len().is_multiple_of(4) {
        return None;
    }
    Some(
        bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
    )
}

pub fn read_params(path: &Path) -> Result<Vec<f64>, ParamsFileError> {
    let io_err = |source| ParamsFileError::Io {
        path: path.to_path_buf(),
        source,
    };
    match ParamsFormat::for_path(path) {
        ParamsFormat::RawF32 => {
            let bytes = fs::read(path).map_err(io_err)?;
            parse_raw_f32(&bytes).ok_or(ParamsFileError::RawLength {
                path: path.to_path_buf(),
                len: bytes.len(),
            })
        }
        ParamsFormat::Text => {
            let text = fs::read_to_string(path).map_err(io_err)?;
            parse_text(&text).map_err(|(line, text)| ParamsFileError::Number {
                path: path.to_path_buf(),
                line,
                text,
            })
        }
    }
}

/// Writes `values` in the format selected by the extension of `path`.
/// Raw files store binary32, so wider values are rounded.
pub fn write_params(path: &Path, values: &[f64]) -> io::Result<()> {
    match ParamsFormat::for_path(path) {
        ParamsFormat::RawF32 => {
            let bytes: Vec<u8> = values
                .iter()
                .flat_map(|x| (*x as f32).to_le_bytes())
                .collect();
            fs::write(path, bytes)
        }
        ParamsFormat::Text => {
            let mut s = String::new();
            for x in values {
                s.push_str(&format!("{x:?}\n"));
            }
            fs::write(path, s)
        }
    }
}
