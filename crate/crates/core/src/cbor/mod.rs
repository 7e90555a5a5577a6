//! Minimal deterministic CBOR (RFC 8949) codec.
//!
//! Only the subset used by the message schemas is supported: unsigned
//! integers, floats of the three IEEE 754 widths, booleans, byte strings,
//! text strings, definite-length arrays and tags. Maps, indefinite-length
//! items, negative integers and simple values other than `true`/`false`
//! are rejected by the decoder and cannot be represented.
//!
//! Encoding is driven by an [`EncodingProfile`]:
//!
//! - [`EncodingProfile::Compact`] emits minimal integer heads and the
//!   narrowest float width that round-trips each value.
//! - [`EncodingProfile::Verbose`] emits every unsigned integer data item with
//!   an 8-octet argument and every float as binary64. Length and tag heads
//!   stay minimal in both profiles.

mod decode;
pub(crate) mod diag;
mod encode;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use decode::{decode_value, decode_value_exact, MAX_NESTING};
pub use encode::{encode_into, encode_value, encoded_len, head_len};

pub(crate) const MAJOR_UINT: u8 = 0;
pub(crate) const MAJOR_NEGINT: u8 = 1;
pub(crate) const MAJOR_BYTES: u8 = 2;
pub(crate) const MAJOR_TEXT: u8 = 3;
pub(crate) const MAJOR_ARRAY: u8 = 4;
pub(crate) const MAJOR_MAP: u8 = 5;
pub(crate) const MAJOR_TAG: u8 = 6;
pub(crate) const MAJOR_SIMPLE: u8 = 7;

/// Tag for a binary UUID carried in a 16-octet byte string.
pub const TAG_UUID: u64 = 37;
/// Typed array of little-endian binary16 floats.
pub const TAG_F16LE: u64 = 84;
/// Typed array of little-endian binary32 floats.
pub const TAG_F32LE: u64 = 85;
/// Typed array of little-endian binary64 floats.
pub const TAG_F64LE: u64 = 86;

/// IEEE 754 width of an encoded float.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FloatWidth {
    /// binary16, 2 octets.
    Half,
    /// binary32, 4 octets.
    Single,
    /// binary64, 8 octets.
    Double,
}

impl FloatWidth {
    pub const fn octets(self) -> usize {
        match self {
            FloatWidth::Half => 2,
            FloatWidth::Single => 4,
            FloatWidth::Double => 8,
        }
    }

    /// CBOR initial byte of a float item of this width.
    pub const fn initial_byte(self) -> u8 {
        match self {
            FloatWidth::Half => 0xF9,
            FloatWidth::Single => 0xFA,
            FloatWidth::Double => 0xFB,
        }
    }

    /// Typed array tag for little-endian elements of this width.
    pub const fn typed_array_tag(self) -> u64 {
        match self {
            FloatWidth::Half => TAG_F16LE,
            FloatWidth::Single => TAG_F32LE,
            FloatWidth::Double => TAG_F64LE,
        }
    }

    pub const fn from_typed_array_tag(tag: u64) -> Option<FloatWidth> {
        match tag {
            TAG_F16LE => Some(FloatWidth::Half),
            TAG_F32LE => Some(FloatWidth::Single),
            TAG_F64LE => Some(FloatWidth::Double),
            _ => None,
        }
    }

    /// Diagnostic-notation encoding indicator (`_1`, `_2`, `_3`).
    pub(crate) const fn indicator(self) -> &'static str {
        match self {
            FloatWidth::Half => "_1",
            FloatWidth::Single => "_2",
            FloatWidth::Double => "_3",
        }
    }

    /// Rounds `x` to this width and widens it back to binary64.
    pub fn quantize(self, x: f64) -> f64 {
        match self {
            FloatWidth::Half => half::f16::from_f64(x).to_f64(),
            FloatWidth::Single => x as f32 as f64,
            FloatWidth::Double => x,
        }
    }

    /// Whether `x` survives a round trip through this width unchanged
    /// (sign of zero included). NaN is representable at every width.
    pub fn represents(self, x: f64) -> bool {
        x.is_nan() || self.quantize(x).to_bits() == x.to_bits()
    }

    /// Little-endian bytes of `x` at this width.
    pub fn to_le_bytes(self, x: f64, out: &mut Vec<u8>) {
        match self {
            FloatWidth::Half => out.extend_from_slice(&half::f16::from_f64(x).to_le_bytes()),
            FloatWidth::Single => out.extend_from_slice(&(x as f32).to_le_bytes()),
            FloatWidth::Double => out.extend_from_slice(&x.to_le_bytes()),
        }
    }

    /// Reads one element from a little-endian chunk of exactly `self.octets()`.
    pub fn from_le_chunk(self, chunk: &[u8]) -> f64 {
        match self {
            FloatWidth::Half => half::f16::from_le_bytes([chunk[0], chunk[1]]).to_f64(),
            FloatWidth::Single => {
                f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64
            }
            FloatWidth::Double => {
                let mut b = [0u8; 8];
                b.copy_from_slice(&chunk[..8]);
                f64::from_le_bytes(b)
            }
        }
    }
}

/// Smallest width whose IEEE 754 encoding of `x` decodes back to exactly `x`.
///
/// Any NaN maps to [`FloatWidth::Half`].
pub fn min_float_width(x: f64) -> FloatWidth {
    if FloatWidth::Half.represents(x) {
        FloatWidth::Half
    } else if FloatWidth::Single.represents(x) {
        FloatWidth::Single
    } else {
        FloatWidth::Double
    }
}

/// Serialization policy for integer and float widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum EncodingProfile {
    /// Minimal integer heads and minimal lossless float widths.
    #[default]
    Compact,
    /// 9-octet unsigned integers and 9-octet floats.
    Verbose,
}

impl EncodingProfile {
    pub const fn name(self) -> &'static str {
        match self {
            EncodingProfile::Compact => "compact",
            EncodingProfile::Verbose => "verbose",
        }
    }
}

impl core::str::FromStr for EncodingProfile {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "compact" | "best" => Ok(EncodingProfile::Compact),
            "verbose" | "worst" => Ok(EncodingProfile::Verbose),
            _ => Err(()),
        }
    }
}

/// A CBOR data item restricted to the supported subset.
#[derive(Debug, Clone, PartialEq)]
pub enum CborValue {
    Uint(u64),
    Float(f64, FloatWidth),
    Bool(bool),
    Bytes(Vec<u8>),
    Text(String),
    Array(Vec<CborValue>),
    Tagged(u64, alloc::boxed::Box<CborValue>),
}

impl CborValue {
    pub fn tagged(tag: u64, item: CborValue) -> CborValue {
        CborValue::Tagged(tag, alloc::boxed::Box::new(item))
    }

    /// A float at the narrowest lossless width.
    pub fn float(x: f64) -> CborValue {
        CborValue::Float(x, min_float_width(x))
    }

    /// Value equality ignoring float widths; NaN equals NaN.
    pub fn value_eq(&self, other: &CborValue) -> bool {
        match (self, other) {
            (CborValue::Float(a, _), CborValue::Float(b, _)) => {
                (a.is_nan() && b.is_nan()) || a.to_bits() == b.to_bits()
            }
            (CborValue::Array(a), CborValue::Array(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.value_eq(y))
            }
            (CborValue::Tagged(t, a), CborValue::Tagged(u, b)) => t == u && a.value_eq(b),
            _ => self == other,
        }
    }
}

/// Errors raised while decoding CBOR.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CborError {
    /// Input ended inside a data item.
    Truncated { offset: usize },
    /// Major type the codec does not support (negative integers, maps).
    UnsupportedMajorType { offset: usize, major: u8 },
    /// Indefinite-length item (additional information 31).
    IndefiniteLength { offset: usize },
    /// Reserved additional information values 28..=30.
    ReservedAdditionalInfo { offset: usize, info: u8 },
    /// Simple value other than `true` or `false` (null, undefined, ...).
    UnsupportedSimpleValue { offset: usize, value: u8 },
    /// Text string that is not valid UTF-8.
    InvalidUtf8 { offset: usize },
    /// Arrays or tags nested deeper than [`MAX_NESTING`].
    NestingTooDeep { offset: usize },
    /// A complete item was followed by extra octets.
    TrailingBytes { offset: usize },
}

impl CborError {
    /// Stable kebab-case name of the error class.
    pub const fn kind(&self) -> &'static str {
        match self {
            CborError::Truncated { .. } => "truncated-input",
            CborError::UnsupportedMajorType { .. } => "unsupported-major-type",
            CborError::IndefiniteLength { .. } => "indefinite-length",
            CborError::ReservedAdditionalInfo { .. } => "reserved-additional-info",
            CborError::UnsupportedSimpleValue { .. } => "unsupported-simple-value",
            CborError::InvalidUtf8 { .. } => "invalid-utf8",
            CborError::NestingTooDeep { .. } => "nesting-too-deep",
            CborError::TrailingBytes { .. } => "trailing-bytes",
        }
    }

    pub const fn offset(&self) -> usize {
        match *self {
            CborError::Truncated { offset }
            | CborError::UnsupportedMajorType { offset, .. }
            | CborError::IndefiniteLength { offset }
            | CborError::ReservedAdditionalInfo { offset, .. }
            | CborError::UnsupportedSimpleValue { offset, .. }
            | CborError::InvalidUtf8 { offset }
            | CborError::NestingTooDeep { offset }
            | CborError::TrailingBytes { offset } => offset,
        }
    }
}

impl fmt::Display for CborError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at offset {}", self.kind(), self.offset())?;
        match self {
            CborError::UnsupportedMajorType { major, .. } => write!(f, " (major type {major})"),
            CborError::ReservedAdditionalInfo { info, .. } => write!(f, " (info {info})"),
            CborError::UnsupportedSimpleValue { value, .. } => write!(f, " (simple {value})"),
            _ => Ok(()),
        }
    }
}

impl core::error::Error for CborError {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_width_examples() {
        assert_eq!(min_float_width(1.0), FloatWidth::Half);
        assert_eq!(min_float_width(0.5), FloatWidth::Half);
        assert_eq!(min_float_width(0.1), FloatWidth::Double);
        assert_eq!(min_float_width(f64::NAN), FloatWidth::Half);
        assert_eq!(min_float_width(f64::INFINITY), FloatWidth::Half);
        assert_eq!(min_float_width(-0.0), FloatWidth::Half);
        // 65504 is the largest finite binary16
        assert_eq!(min_float_width(65504.0), FloatWidth::Half);
        assert_eq!(min_float_width(65505.0), FloatWidth::Single);
        assert_eq!(min_float_width(0.1f32 as f64), FloatWidth::Single);
        // smallest binary16 subnormal
        assert_eq!(min_float_width(2f64.powi(-24)), FloatWidth::Half);
        assert_eq!(min_float_width(2f64.powi(-25)), FloatWidth::Single);
        assert_eq!(min_float_width(1e300), FloatWidth::Double);
    }

    #[test]
    fn typed_array_tags() {
        for w in [FloatWidth::Half, FloatWidth::Single, FloatWidth::Double] {
            assert_eq!(
                FloatWidth::from_typed_array_tag(w.typed_array_tag()),
                Some(w)
            );
        }
        assert_eq!(FloatWidth::Half.typed_array_tag(), 84);
        assert_eq!(FloatWidth::Single.typed_array_tag(), 85);
        assert_eq!(FloatWidth::Double.typed_array_tag(), 86);
        // big-endian typed arrays are not accepted
        assert_eq!(FloatWidth::from_typed_array_tag(80), None);
    }
}
