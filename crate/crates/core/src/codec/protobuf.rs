//! Protobuf wire format for the fixed message schema.
//!
//! ```text
//! message ModelMetadata      { double train_loss = 1; double val_loss = 2; }
//! message GlobalModelUpdate  { bytes model_identifier = 1; uint64 model_round = 2;
//!                              repeated float model_params = 3 [packed = true];
//!                              bool continue_training = 4; }
//! message LocalDataSetUpdate { uint64 local_dataset_size = 1; ModelMetadata metadata = 2; }
//! message LocalModelUpdate   { bytes model_identifier = 1; uint64 model_round = 2;
//!                              repeated float model_params = 3 [packed = true];
//!                              ModelMetadata metadata = 4; }
//! ```
//!
//! Fields are written in ascending field-number order and scalar fields are
//! written even when they hold their default value, so sizes only depend on
//! varint widths and the parameter count. Parameters are quantized to
//! binary32.

use alloc::vec::Vec;

use crate::cbor::FloatWidth;
use crate::error::DecodeError;
use crate::messages::{
    GlobalModelUpdate, LocalDataSetUpdate, LocalModelUpdate, Message, MessageKind, ModelIdentifier,
    ModelMetadata, ModelParams, ParamsEncoding, FIELD_IDENTIFIER,
};

const WIRE_VARINT: u8 = 0;
const WIRE_I64: u8 = 1;
const WIRE_LEN: u8 = 2;
const WIRE_I32: u8 = 5;

pub const fn varint_len(mut v: u64) -> usize {
    let mut n = 1;
    while v >= 0x80 {
        v >>= 7;
        n += 1;
    }
    n
}

pub fn put_varint(out: &mut Vec<u8>, mut v: u64) {
    while v >= 0x80 {
        out.push((v as u8 & 0x7F) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

fn put_key(out: &mut Vec<u8>, field: u32, wire: u8) {
    put_varint(out, ((field as u64) << 3) | wire as u64);
}

fn put_bytes(out: &mut Vec<u8>, field: u32, bytes: &[u8]) {
    put_key(out, field, WIRE_LEN);
    put_varint(out, bytes.len() as u64);
    out.extend_from_slice(bytes);
}

fn put_uint(out: &mut Vec<u8>, field: u32, v: u64) {
    put_key(out, field, WIRE_VARINT);
    put_varint(out, v);
}

fn put_params(out: &mut Vec<u8>, field: u32, p: &ModelParams) {
    put_key(out, field, WIRE_LEN);
    put_varint(out, 4 * p.values.len() as u64);
    for &x in &p.values {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
}

fn metadata_bytes(m: &ModelMetadata) -> [u8; 18] {
    let mut b = [0u8; 18];
    b[0] = (1 << 3) | WIRE_I64;
    b[1..9].copy_from_slice(&m.train_loss.to_le_bytes());
    b[9] = (2 << 3) | WIRE_I64;
    b[10..].copy_from_slice(&m.val_loss.to_le_bytes());
    b
}

pub fn pb_encode(m: &Message) -> Vec<u8> {
    let mut out = Vec::new();
    match m {
        Message::Global(g) => {
            put_bytes(&mut out, 1, g.model_identifier.as_bytes());
            put_uint(&mut out, 2, g.model_round);
            put_params(&mut out, 3, &g.model_params);
            put_uint(&mut out, 4, g.continue_training as u64);
        }
        Message::DataSet(d) => {
            put_uint(&mut out, 1, d.local_dataset_size);
            if let Some(meta) = &d.metadata {
                put_bytes(&mut out, 2, &metadata_bytes(meta));
            }
        }
        Message::Local(l) => {
            put_bytes(&mut out, 1, l.model_identifier.as_bytes());
            put_uint(&mut out, 2, l.model_round);
            put_params(&mut out, 3, &l.model_params);
            put_bytes(&mut out, 4, &metadata_bytes(&l.metadata));
        }
    }
    out
}

enum Value<'a> {
    Varint(u64),
    I64([u8; 8]),
    Len(&'a [u8]),
    I32([u8; 4]),
}

struct Field<'a> {
    number: u64,
    value: Value<'a>,
    offset: usize,
}

struct Fields<'a> {
    buf: &'a [u8],
    pos: usize,
    base: usize,
}

impl<'a> Fields<'a> {
    fn new(buf: &'a [u8], base: usize) -> Self {
        Fields { buf, pos: 0, base }
    }

    fn err(&self, reason: &'static str) -> DecodeError {
        DecodeError::Protobuf {
            offset: self.base + self.pos,
            reason,
        }
    }

    fn varint(&mut self) -> Result<u64, DecodeError> {
        let mut v = 0u64;
        for i in 0..10 {
            let b = *self
                .buf
                .get(self.pos)
                .ok_or_else(|| self.err("truncated varint"))?;
            self.pos += 1;
            if i == 9 && b > 1 {
                return Err(self.err("varint overflows 64 bits"));
            }
            v |= ((b & 0x7F) as u64) << (7 * i);
            if b & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(self.err("varint longer than 10 octets"))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.buf.len() - self.pos < n {
            return Err(self.err("truncated field"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn next_field(&mut self) -> Result<Option<Field<'a>>, DecodeError> {
        if self.pos == self.buf.len() {
            return Ok(None);
        }
        let offset = self.base + self.pos;
        let key = self.varint()?;
        let number = key >> 3;
        if number == 0 {
            return Err(DecodeError::Protobuf {
                offset,
                reason: "field number 0",
            });
        }
        let value = match (key & 7) as u8 {
            WIRE_VARINT => Value::Varint(self.varint()?),
            WIRE_I64 => Value::I64(self.take(8)?.try_into().unwrap()),
            WIRE_LEN => {
                let n = self.varint()?;
                let n = usize::try_from(n).map_err(|_| self.err("length overflow"))?;
                Value::Len(self.take(n)?)
            }
            WIRE_I32 => Value::I32(self.take(4)?.try_into().unwrap()),
            _ => {
                return Err(DecodeError::Protobuf {
                    offset,
                    reason: "unsupported wire type",
                })
            }
        };
        Ok(Some(Field {
            number,
            value,
            offset,
        }))
    }
}

fn wrong_type(f: &Field<'_>) -> DecodeError {
    DecodeError::Protobuf {
        offset: f.offset,
        reason: "unexpected wire type for field",
    }
}

fn identifier(v: Option<&[u8]>) -> Result<ModelIdentifier, DecodeError> {
    v.and_then(ModelIdentifier::from_slice)
        .ok_or(DecodeError::schema(
            FIELD_IDENTIFIER,
            "UUID must be 16 octets",
        ))
}

fn append_params(values: &mut Vec<f64>, f: &Field<'_>) -> Result<(), DecodeError> {
    match f.value {
        Value::Len(b) => {
            if b.len() % 4 != 0 {
                return Err(DecodeError::Protobuf {
                    offset: f.offset,
                    reason: "packed float length not a multiple of 4",
                });
            }
            values.extend(
                b.chunks_exact(4)
                    .map(|c| FloatWidth::Single.from_le_chunk(c)),
            );
        }
        // unpacked repeated floats are legal on the wire too
        Value::I32(b) => values.push(f32::from_le_bytes(b) as f64),
        _ => return Err(wrong_type(f)),
    }
    Ok(())
}

fn varint_of(f: &Field<'_>) -> Result<u64, DecodeError> {
    match f.value {
        Value::Varint(v) => Ok(v),
        _ => Err(wrong_type(f)),
    }
}

fn double_of(f: &Field<'_>) -> Result<f64, DecodeError> {
    match f.value {
        Value::I64(b) => Ok(f64::from_le_bytes(b)),
        _ => Err(wrong_type(f)),
    }
}

fn len_of<'a>(f: &Field<'a>) -> Result<&'a [u8], DecodeError> {
    match f.value {
        Value::Len(b) => Ok(b),
        _ => Err(wrong_type(f)),
    }
}

fn decode_metadata(buf: &[u8], base: usize) -> Result<ModelMetadata, DecodeError> {
    let mut meta = ModelMetadata::new(0.0, 0.0);
    let mut fields = Fields::new(buf, base);
    while let Some(f) = fields.next_field()? {
        match f.number {
            1 => meta.train_loss = double_of(&f)?,
            2 => meta.val_loss = double_of(&f)?,
            _ => {}
        }
    }
    Ok(meta)
}

/// Decodes a message of `kind`. Unknown fields are skipped; missing scalar
/// fields take their default value except the identifier, which is required.
pub fn pb_decode(kind: MessageKind, buf: &[u8]) -> Result<Message, DecodeError> {
    let mut fields = Fields::new(buf, 0);
    match kind {
        MessageKind::DataSet => {
            let mut size = 0;
            let mut metadata = None;
            while let Some(f) = fields.next_field()? {
                match f.number {
                    1 => size = varint_of(&f)?,
                    2 => metadata = Some(decode_metadata(len_of(&f)?, f.offset)?),
                    _ => {}
                }
            }
            Ok(Message::DataSet(LocalDataSetUpdate {
                local_dataset_size: size,
                metadata,
            }))
        }
        MessageKind::Global | MessageKind::Local => {
            let mut id = None;
            let mut round = 0;
            let mut values = Vec::new();
            let mut cont = false;
            let mut metadata = ModelMetadata::new(0.0, 0.0);
            while let Some(f) = fields.next_field()? {
                match (f.number, kind) {
                    (1, _) => id = Some(len_of(&f)?),
                    (2, _) => round = varint_of(&f)?,
                    (3, _) => append_params(&mut values, &f)?,
                    (4, MessageKind::Global) => cont = varint_of(&f)? != 0,
                    (4, _) => metadata = decode_metadata(len_of(&f)?, f.offset)?,
                    _ => {}
                }
            }
            let model_identifier = identifier(id)?;
            let model_params =
                ModelParams::new(values, ParamsEncoding::TypedArray(FloatWidth::Single));
            Ok(if kind == MessageKind::Global {
                Message::Global(GlobalModelUpdate {
                    model_identifier,
                    model_round: round,
                    model_params,
                    continue_training: cont,
                })
            } else {
                Message::Local(LocalModelUpdate {
                    model_identifier,
                    model_round: round,
                    model_params,
                    metadata,
                })
            })
        }
    }
}
