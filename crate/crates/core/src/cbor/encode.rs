use alloc::vec::Vec;

use super::{
    min_float_width, CborValue, EncodingProfile, FloatWidth, MAJOR_ARRAY, MAJOR_BYTES, MAJOR_TAG,
    MAJOR_TEXT, MAJOR_UINT,
};

/// Octets taken by a minimal head carrying `arg`.
pub const fn head_len(arg: u64) -> usize {
    if arg < 24 {
        1
    } else if arg <= 0xFF {
        2
    } else if arg <= 0xFFFF {
        3
    } else if arg <= 0xFFFF_FFFF {
        5
    } else {
        9
    }
}

pub(crate) fn write_head(out: &mut Vec<u8>, major: u8, arg: u64) {
    let mt = major << 5;
    match head_len(arg) {
        1 => out.push(mt | arg as u8),
        2 => out.extend_from_slice(&[mt | 24, arg as u8]),
        3 => {
            out.push(mt | 25);
            out.extend_from_slice(&(arg as u16).to_be_bytes());
        }
        5 => {
            out.push(mt | 26);
            out.extend_from_slice(&(arg as u32).to_be_bytes());
        }
        _ => write_head_u64(out, major, arg),
    }
}

fn write_head_u64(out: &mut Vec<u8>, major: u8, arg: u64) {
    out.push((major << 5) | 27);
    out.extend_from_slice(&arg.to_be_bytes());
}

pub(crate) fn write_float(out: &mut Vec<u8>, x: f64, width: FloatWidth) {
    out.push(width.initial_byte());
    match width {
        FloatWidth::Half => {
            let bits = if x.is_nan() {
                0x7E00
            } else {
                half::f16::from_f64(x).to_bits()
            };
            out.extend_from_slice(&bits.to_be_bytes());
        }
        FloatWidth::Single => out.extend_from_slice(&(x as f32).to_bits().to_be_bytes()),
        FloatWidth::Double => out.extend_from_slice(&x.to_bits().to_be_bytes()),
    }
}

fn float_width(x: f64, profile: EncodingProfile) -> FloatWidth {
    match profile {
        EncodingProfile::Compact => min_float_width(x),
        EncodingProfile::Verbose => FloatWidth::Double,
    }
}

/// Appends the encoding of `v` under `profile` to `out`.
pub fn encode_into(out: &mut Vec<u8>, v: &CborValue, profile: EncodingProfile) {
    match v {
        CborValue::Uint(n) => match profile {
            EncodingProfile::Compact => write_head(out, MAJOR_UINT, *n),
            EncodingProfile::Verbose => write_head_u64(out, MAJOR_UINT, *n),
        },
        CborValue::Float(x, _) => write_float(out, *x, float_width(*x, profile)),
        CborValue::Bool(b) => out.push(if *b { 0xF5 } else { 0xF4 }),
        CborValue::Bytes(b) => {
            write_head(out, MAJOR_BYTES, b.len() as u64);
            out.extend_from_slice(b);
        }
        CborValue::Text(s) => {
            write_head(out, MAJOR_TEXT, s.len() as u64);
            out.extend_from_slice(s.as_bytes());
        }
        CborValue::Array(items) => {
            write_head(out, MAJOR_ARRAY, items.len() as u64);
            for item in items {
                encode_into(out, item, profile);
            }
        }
        CborValue::Tagged(tag, item) => {
            write_head(out, MAJOR_TAG, *tag);
            encode_into(out, item, profile);
        }
    }
}

/// RFC 8949 encoding of `v` under `profile`.
pub fn encode_value(v: &CborValue, profile: EncodingProfile) -> Vec<u8> {
    let mut out = Vec::with_capacity(encoded_len(v, profile));
    encode_into(&mut out, v, profile);
    out
}

/// Length of `encode_value(v, profile)` without allocating.
pub fn encoded_len(v: &CborValue, profile: EncodingProfile) -> usize {
    match v {
        CborValue::Uint(n) => match profile {
            EncodingProfile::Compact => head_len(*n),
            EncodingProfile::Verbose => 9,
        },
        CborValue::Float(x, _) => 1 + float_width(*x, profile).octets(),
        CborValue::Bool(_) => 1,
        CborValue::Bytes(b) => head_len(b.len() as u64) + b.len(),
        CborValue::Text(s) => head_len(s.len() as u64) + s.len(),
        CborValue::Array(items) => {
            head_len(items.len() as u64)
                + items.iter().map(|i| encoded_len(i, profile)).sum::<usize>()
        }
        CborValue::Tagged(tag, item) => head_len(*tag) + encoded_len(item, profile),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use EncodingProfile::*;

    #[test]
    fn uint_examples() {
        assert_eq!(encode_value(&CborValue::Uint(0), Compact), [0x00]);
        assert_eq!(encode_value(&CborValue::Uint(23), Compact), [0x17]);
        assert_eq!(encode_value(&CborValue::Uint(24), Compact), [0x18, 24]);
        assert_eq!(
            encode_value(&CborValue::Uint(500), Compact),
            [0x19, 0x01, 0xF4]
        );
        assert_eq!(
            encode_value(&CborValue::Uint(1), Verbose),
            [0x1B, 0, 0, 0, 0, 0, 0, 0, 1]
        );
        assert_eq!(
            encode_value(&CborValue::Uint(u64::MAX), Compact),
            [0x1B, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF]
        );
    }

    #[test]
    fn float_examples() {
        // binary16 1.0: sign 0, exponent 01111, mantissa 0 -> 0x3C00
        assert_eq!(
            encode_value(&CborValue::Float(1.0, FloatWidth::Half), Compact),
            [0xF9, 0x3C, 0x00]
        );
        // declared width is widened when it cannot hold the value
        assert_eq!(
            encode_value(&CborValue::Float(0.1, FloatWidth::Half), Compact).len(),
            9
        );
        assert_eq!(
            encode_value(&CborValue::Float(1.0, FloatWidth::Half), Verbose),
            [0xFB, 0x3F, 0xF0, 0, 0, 0, 0, 0, 0]
        );
        assert_eq!(
            encode_value(&CborValue::Float(f64::NAN, FloatWidth::Double), Compact),
            [0xF9, 0x7E, 0x00]
        );
        assert_eq!(
            encode_value(&CborValue::float(100000.0), Compact),
            [0xFA, 0x47, 0xC3, 0x50, 0x00]
        );
    }

    #[test]
    fn tagged_uuid() {
        let v = CborValue::tagged(37, CborValue::Bytes(vec![0; 16]));
        let bytes = encode_value(&v, Compact);
        assert_eq!(&bytes[..3], &[0xD8, 0x25, 0x50]);
        assert_eq!(bytes.len(), 19);
        assert_eq!(encode_value(&v, Verbose), bytes);
    }

    #[test]
    fn verbose_keeps_minimal_length_heads() {
        let v = CborValue::Array(vec![CborValue::Uint(1), CborValue::Bool(true)]);
        assert_eq!(
            encode_value(&v, Verbose),
            [0x82, 0x1B, 0, 0, 0, 0, 0, 0, 0, 1, 0xF5]
        );
    }

    #[test]
    fn head_bands() {
        for (arg, len) in [
            (0u64, 1),
            (23, 1),
            (24, 2),
            (255, 2),
            (256, 3),
            (65535, 3),
            (65536, 5),
            (u32::MAX as u64, 5),
            (u32::MAX as u64 + 1, 9),
        ] {
            assert_eq!(head_len(arg), len, "arg {arg}");
            let mut out = Vec::new();
            write_head(&mut out, 0, arg);
            assert_eq!(out.len(), len);
        }
    }
}
