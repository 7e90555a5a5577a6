use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use super::{
    CborError, CborValue, FloatWidth, MAJOR_ARRAY, MAJOR_BYTES, MAJOR_MAP, MAJOR_NEGINT,
    MAJOR_SIMPLE, MAJOR_TAG, MAJOR_TEXT, MAJOR_UINT,
};

/// Maximum depth of nested arrays and tags accepted by the decoder.
pub const MAX_NESTING: usize = 64;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CborError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or(CborError::Truncated {
                offset: self.buf.len(),
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn byte(&mut self) -> Result<u8, CborError> {
        Ok(self.take(1)?[0])
    }

    /// Reads the argument following an initial byte; any legal head width
    /// is accepted.
    fn argument(&mut self, start: usize, info: u8) -> Result<u64, CborError> {
        Ok(match info {
            0..=23 => info as u64,
            24 => self.byte()? as u64,
            25 => u16::from_be_bytes(self.take(2)?.try_into().unwrap()) as u64,
            26 => u32::from_be_bytes(self.take(4)?.try_into().unwrap()) as u64,
            27 => u64::from_be_bytes(self.take(8)?.try_into().unwrap()),
            31 => return Err(CborError::IndefiniteLength { offset: start }),
            _ => {
                return Err(CborError::ReservedAdditionalInfo {
                    offset: start,
                    info,
                })
            }
        })
    }

    fn length(&mut self, start: usize, info: u8) -> Result<usize, CborError> {
        let n = self.argument(start, info)?;
        // a length beyond the remaining input can never be satisfied
        if n > (self.buf.len() - self.pos) as u64 {
            return Err(CborError::Truncated {
                offset: self.buf.len(),
            });
        }
        Ok(n as usize)
    }

    fn value(&mut self, depth: usize) -> Result<CborValue, CborError> {
        let start = self.pos;
        let ib = self.byte()?;
        let major = ib >> 5;
        let info = ib & 0x1F;
        match major {
            MAJOR_UINT => Ok(CborValue::Uint(self.argument(start, info)?)),
            MAJOR_BYTES => {
                let n = self.length(start, info)?;
                Ok(CborValue::Bytes(self.take(n)?.to_vec()))
            }
            MAJOR_TEXT => {
                let n = self.length(start, info)?;
                let raw = self.take(n)?;
                let s = core::str::from_utf8(raw)
                    .map_err(|_| CborError::InvalidUtf8 { offset: start })?;
                Ok(CborValue::Text(String::from(s)))
            }
            MAJOR_ARRAY => {
                if depth >= MAX_NESTING {
                    return Err(CborError::NestingTooDeep { offset: start });
                }
                // every item takes at least one octet
                let n = self.length(start, info)?;
                let mut items = Vec::with_capacity(n);
                for _ in 0..n {
                    items.push(self.value(depth + 1)?);
                }
                Ok(CborValue::Array(items))
            }
            MAJOR_TAG => {
                if depth >= MAX_NESTING {
                    return Err(CborError::NestingTooDeep { offset: start });
                }
                let tag = self.argument(start, info)?;
                Ok(CborValue::Tagged(tag, Box::new(self.value(depth + 1)?)))
            }
            MAJOR_SIMPLE => match info {
                20 => Ok(CborValue::Bool(false)),
                21 => Ok(CborValue::Bool(true)),
                25 => {
                    let bits = u16::from_be_bytes(self.take(2)?.try_into().unwrap());
                    Ok(CborValue::Float(
                        half::f16::from_bits(bits).to_f64(),
                        FloatWidth::Half,
                    ))
                }
                26 => {
                    let bits = u32::from_be_bytes(self.take(4)?.try_into().unwrap());
                    Ok(CborValue::Float(
                        f32::from_bits(bits) as f64,
                        FloatWidth::Single,
                    ))
                }
                27 => {
                    let bits = u64::from_be_bytes(self.take(8)?.try_into().unwrap());
                    Ok(CborValue::Float(f64::from_bits(bits), FloatWidth::Double))
                }
                24 => {
                    let value = self.byte()?;
                    Err(CborError::UnsupportedSimpleValue {
                        offset: start,
                        value,
                    })
                }
                28..=30 => Err(CborError::ReservedAdditionalInfo {
                    offset: start,
                    info,
                }),
                31 => Err(CborError::IndefiniteLength { offset: start }),
                value => Err(CborError::UnsupportedSimpleValue {
                    offset: start,
                    value,
                }),
            },
            MAJOR_NEGINT | MAJOR_MAP => Err(CborError::UnsupportedMajorType {
                offset: start,
                major,
            }),
            _ => unreachable!("major type is three bits"),
        }
    }
}

/// Decodes one data item from the front of `buf`, returning it together with
/// the number of octets consumed.
pub fn decode_value(buf: &[u8]) -> Result<(CborValue, usize), CborError> {
    let mut r = Reader { buf, pos: 0 };
    let v = r.value(0)?;
    Ok((v, r.pos))
}

/// Decodes `buf` as exactly one data item with nothing after it.
pub fn decode_value_exact(buf: &[u8]) -> Result<CborValue, CborError> {
    let (v, used) = decode_value(buf)?;
    if used != buf.len() {
        return Err(CborError::TrailingBytes { offset: used });
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn examples() {
        assert_eq!(
            decode_value(&[0xF9, 0x3C, 0x00]).unwrap(),
            (CborValue::Float(1.0, FloatWidth::Half), 3)
        );
        assert_eq!(
            decode_value(&[0x81, 0x01]).unwrap(),
            (CborValue::Array(vec![CborValue::Uint(1)]), 2)
        );
        assert_eq!(decode_value(&[]), Err(CborError::Truncated { offset: 0 }));
    }

    #[test]
    fn non_minimal_heads_are_accepted() {
        assert_eq!(
            decode_value(&[0x18, 0x05]).unwrap(),
            (CborValue::Uint(5), 2)
        );
        assert_eq!(
            decode_value(&[0x1B, 0, 0, 0, 0, 0, 0, 0, 1]).unwrap(),
            (CborValue::Uint(1), 9)
        );
        assert_eq!(
            decode_value(&[0x59, 0x00, 0x01, 0xAA]).unwrap(),
            (CborValue::Bytes(vec![0xAA]), 4)
        );
    }

    #[test]
    fn rejections() {
        assert_eq!(
            decode_value(&[0xA0]),
            Err(CborError::UnsupportedMajorType {
                offset: 0,
                major: 5
            })
        );
        assert_eq!(
            decode_value(&[0x20]),
            Err(CborError::UnsupportedMajorType {
                offset: 0,
                major: 1
            })
        );
        assert_eq!(
            decode_value(&[0x9F, 0xFF]),
            Err(CborError::IndefiniteLength { offset: 0 })
        );
        assert_eq!(
            decode_value(&[0x5F]),
            Err(CborError::IndefiniteLength { offset: 0 })
        );
        assert_eq!(
            decode_value(&[0xF6]),
            Err(CborError::UnsupportedSimpleValue {
                offset: 0,
                value: 22
            })
        );
        assert_eq!(
            decode_value(&[0xF8, 0x20]),
            Err(CborError::UnsupportedSimpleValue {
                offset: 0,
                value: 32
            })
        );
        assert_eq!(
            decode_value(&[0x1C]),
            Err(CborError::ReservedAdditionalInfo {
                offset: 0,
                info: 28
            })
        );
        assert_eq!(
            decode_value(&[0x62, 0xFF, 0xFE]),
            Err(CborError::InvalidUtf8 { offset: 0 })
        );
        assert_eq!(
            decode_value_exact(&[0x01, 0x02]),
            Err(CborError::TrailingBytes { offset: 1 })
        );
    }

    #[test]
    fn truncation_everywhere() {
        let full = [
            0x82, 0xD8, 0x25, 0x42, 0xAB, 0xCD, 0xFA, 0x3F, 0x80, 0x00, 0x00,
        ];
        assert!(decode_value_exact(&full).is_ok());
        for cut in 0..full.len() {
            assert!(
                matches!(decode_value(&full[..cut]), Err(CborError::Truncated { .. })),
                "cut at {cut}"
            );
        }
    }

    #[test]
    fn huge_declared_lengths_fail_fast() {
        let buf = [0x9B, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF];
        assert!(matches!(
            decode_value(&buf),
            Err(CborError::Truncated { .. })
        ));
    }

    #[test]
    fn nesting_limit() {
        let mut deep = vec![0x81; MAX_NESTING + 1];
        deep.push(0x00);
        assert!(matches!(
            decode_value(&deep),
            Err(CborError::NestingTooDeep { .. })
        ));
        let ok = {
            let mut v = vec![0x81; MAX_NESTING];
            v.push(0x00);
            v
        };
        assert!(decode_value(&ok).is_ok());
    }
}
