//! Diagnostic notation (RFC 8949 section 8) with encoding indicators on floats.

use core::fmt::{self, Write};

use super::CborValue;

pub(crate) fn write_f64(f: &mut impl Write, x: f64) -> fmt::Result {
    if x.is_nan() {
        f.write_str("NaN")
    } else if x.is_infinite() {
        f.write_str(if x > 0.0 { "Infinity" } else { "-Infinity" })
    } else {
        write!(f, "{x:?}")
    }
}

fn write_text(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_char('"')?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            c if (c as u32) < 0x20 || c == '\u{7F}' => write!(f, "\\u{:04x}", c as u32)?,
            c => f.write_char(c)?,
        }
    }
    f.write_char('"')
}

impl fmt::Display for CborValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CborValue::Uint(n) => write!(f, "{n}"),
            CborValue::Float(x, w) => {
                write_f64(f, *x)?;
                f.write_str(w.indicator())
            }
            CborValue::Bool(b) => write!(f, "{b}"),
            CborValue::Bytes(b) => {
                f.write_str("h'")?;
                for byte in b {
                    write!(f, "{byte:02x}")?;
                }
                f.write_char('\'')
            }
            CborValue::Text(s) => write_text(f, s),
            CborValue::Array(items) => {
                f.write_char('[')?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_char(']')
            }
            CborValue::Tagged(tag, item) => write!(f, "{tag}({item})"),
        }
    }
}
