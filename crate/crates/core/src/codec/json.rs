//! Minified positional JSON.
//!
//! Each message is a JSON array laid out exactly like its CBOR array:
//!
//! ```text
//! global:  ["<uuid>",round,[p,...],true]
//! dataset: [size,train,val]  or  [size]
//! local:   ["<uuid>",round,[p,...],train,val]
//! ```
//!
//! Floats use the shortest decimal that reads back as the same binary64
//! value, with `.0` kept on integral values (`1.0`). Non-finite values are
//! written as the bare tokens `NaN`, `Infinity` and `-Infinity`, which the
//! decoder accepts as well.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::cbor::diag::write_f64;
use crate::error::DecodeError;
use crate::messages::{
    GlobalModelUpdate, LocalDataSetUpdate, LocalModelUpdate, Message, MessageKind, ModelIdentifier,
    ModelMetadata, ModelParams, ParamsEncoding, FIELD_IDENTIFIER,
};

fn push_params(out: &mut String, p: &ModelParams) {
    out.push('[');
    for (i, x) in p.values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write_f64(out, *x);
    }
    out.push(']');
}

fn push_metadata(out: &mut String, m: &ModelMetadata) {
    out.push(',');
    let _ = write_f64(out, m.train_loss);
    out.push(',');
    let _ = write_f64(out, m.val_loss);
}

pub fn json_encode(m: &Message) -> String {
    let mut out = String::new();
    match m {
        Message::Global(g) => {
            let _ = write!(out, "[\"{}\",{},", g.model_identifier, g.model_round);
            push_params(&mut out, &g.model_params);
            out.push_str(if g.continue_training {
                ",true]"
            } else {
                ",false]"
            });
        }
        Message::DataSet(d) => {
            let _ = write!(out, "[{}", d.local_dataset_size);
            if let Some(meta) = &d.metadata {
                push_metadata(&mut out, meta);
            }
            out.push(']');
        }
        Message::Local(l) => {
            let _ = write!(out, "[\"{}\",{},", l.model_identifier, l.model_round);
            push_params(&mut out, &l.model_params);
            push_metadata(&mut out, &l.metadata);
            out.push(']');
        }
    }
    out
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, reason: &'static str) -> DecodeError {
        DecodeError::Json {
            offset: self.pos,
            reason,
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.s.get(self.pos), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8, reason: &'static str) -> Result<(), DecodeError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(reason))
        }
    }

    fn scalar_token(&mut self) -> &'a str {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.s.get(self.pos) {
            if c.is_ascii_alphanumeric() || matches!(c, b'-' | b'+' | b'.') {
                self.pos += 1;
            } else {
                break;
            }
        }
        // only ASCII was consumed
        core::str::from_utf8(&self.s[start..self.pos]).unwrap_or("")
    }

    fn uint(&mut self) -> Result<u64, DecodeError> {
        self.skip_ws();
        let start = self.pos;
        let tok = self.scalar_token();
        if tok.is_empty() || !tok.bytes().all(|c| c.is_ascii_digit()) {
            self.pos = start;
            return Err(self.err("expected unsigned integer"));
        }
        tok.parse().map_err(|_| {
            self.pos = start;
            self.err("integer out of range")
        })
    }

    fn float(&mut self) -> Result<f64, DecodeError> {
        self.skip_ws();
        let start = self.pos;
        let tok = self.scalar_token();
        let valid = !tok.is_empty()
            && tok
                .bytes()
                .all(|c| c.is_ascii_digit() || matches!(c, b'-' | b'+' | b'.' | b'e' | b'E'));
        let value = match tok {
            "NaN" => Some(f64::NAN),
            "Infinity" => Some(f64::INFINITY),
            "-Infinity" => Some(f64::NEG_INFINITY),
            _ if valid => tok.parse().ok(),
            _ => None,
        };
        value.ok_or_else(|| {
            self.pos = start;
            self.err("expected number")
        })
    }

    fn boolean(&mut self) -> Result<bool, DecodeError> {
        let start = self.pos;
        match self.scalar_token() {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => {
                self.pos = start;
                Err(self.err("expected true or false"))
            }
        }
    }

    fn uuid(&mut self) -> Result<ModelIdentifier, DecodeError> {
        self.expect(b'"', "expected string")?;
        let start = self.pos;
        let len = self.s[start..]
            .iter()
            .position(|&c| c == b'"')
            .ok_or_else(|| self.err("unterminated string"))?;
        self.pos = start + len + 1;
        core::str::from_utf8(&self.s[start..start + len])
            .ok()
            .and_then(ModelIdentifier::parse)
            .ok_or(DecodeError::schema(FIELD_IDENTIFIER, "expected UUID text"))
    }

    fn params(&mut self) -> Result<ModelParams, DecodeError> {
        self.expect(b'[', "expected '['")?;
        let mut values = Vec::new();
        if self.peek() == Some(b']') {
            self.pos += 1;
        } else {
            loop {
                values.push(self.float()?);
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b']') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.err("expected ',' or ']'")),
                }
            }
        }
        Ok(ModelParams::new(values, ParamsEncoding::Heterogeneous))
    }

    fn comma(&mut self) -> Result<(), DecodeError> {
        self.expect(b',', "expected ','")
    }

    fn metadata(&mut self) -> Result<ModelMetadata, DecodeError> {
        let train_loss = self.float()?;
        self.comma()?;
        let val_loss = self.float()?;
        Ok(ModelMetadata {
            train_loss,
            val_loss,
        })
    }

    fn finish(&mut self) -> Result<(), DecodeError> {
        self.expect(b']', "expected ']'")?;
        if self.peek().is_some() {
            return Err(self.err("trailing characters"));
        }
        Ok(())
    }
}

/// Parses the positional JSON form of a message of `kind`.
pub fn json_decode(kind: MessageKind, text: &str) -> Result<Message, DecodeError> {
    let mut p = Parser {
        s: text.as_bytes(),
        pos: 0,
    };
    p.expect(b'[', "expected '['")?;
    let m = match kind {
        MessageKind::Global => {
            let model_identifier = p.uuid()?;
            p.comma()?;
            let model_round = p.uint()?;
            p.comma()?;
            let model_params = p.params()?;
            p.comma()?;
            let continue_training = p.boolean()?;
            Message::Global(GlobalModelUpdate {
                model_identifier,
                model_round,
                model_params,
                continue_training,
            })
        }
        MessageKind::DataSet => {
            let local_dataset_size = p.uint()?;
            let metadata = if p.peek() == Some(b',') {
                p.pos += 1;
                Some(p.metadata()?)
            } else {
                None
            };
            Message::DataSet(LocalDataSetUpdate {
                local_dataset_size,
                metadata,
            })
        }
        MessageKind::Local => {
            let model_identifier = p.uuid()?;
            p.comma()?;
            let model_round = p.uint()?;
            p.comma()?;
            let model_params = p.params()?;
            p.comma()?;
            let metadata = p.metadata()?;
            Message::Local(LocalModelUpdate {
                model_identifier,
                model_round,
                model_params,
                metadata,
            })
        }
    };
    p.finish()?;
    Ok(m)
}

/// Tries each message layout in turn; reports the error of the last one.
pub fn json_decode_any(text: &str) -> Result<Message, DecodeError> {
    json_decode(MessageKind::Global, text)
        .or_else(|_| json_decode(MessageKind::Local, text))
        .or_else(|_| json_decode(MessageKind::DataSet, text))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn global(n: usize) -> Message {
        Message::Global(GlobalModelUpdate {
            model_identifier: ModelIdentifier::default(),
            model_round: 1,
            model_params: ModelParams::new(vec![1.0; n], ParamsEncoding::Heterogeneous),
            continue_training: true,
        })
    }

    #[test]
    fn dataset_text() {
        let m = Message::DataSet(LocalDataSetUpdate {
            local_dataset_size: 1,
            metadata: Some(ModelMetadata::new(1.0, 1.0)),
        });
        assert_eq!(json_encode(&m), "[1,1.0,1.0]");
        assert_eq!(
            json_decode(MessageKind::DataSet, "[1]").unwrap(),
            Message::DataSet(LocalDataSetUpdate {
                local_dataset_size: 1,
                metadata: None
            })
        );
    }

    #[test]
    fn global_text() {
        assert_eq!(
            json_encode(&global(4)),
            r#"["00000000-0000-0000-0000-000000000000",1,[1.0,1.0,1.0,1.0],true]"#
        );
        assert_eq!(json_encode(&global(4)).len(), 65);
        assert_eq!(
            json_encode(&global(0)),
            r#"["00000000-0000-0000-0000-000000000000",1,[],true]"#
        );
    }

    #[test]
    fn float_rendering() {
        let m = Message::DataSet(LocalDataSetUpdate {
            local_dataset_size: 0,
            metadata: Some(ModelMetadata::new(0.1, -1e-7)),
        });
        let text = json_encode(&m);
        assert_eq!(text, "[0,0.1,-1e-7]");
        assert_eq!(json_decode(MessageKind::DataSet, &text).unwrap(), m);
    }

    #[test]
    fn round_trip_with_whitespace() {
        let text = " [ \"00000000-0000-0000-0000-000000000000\" , 1 , [ 1.0 , 1 ] , false ] ";
        let Message::Global(g) = json_decode(MessageKind::Global, text).unwrap() else {
            panic!()
        };
        assert_eq!(g.model_params.values, vec![1.0, 1.0]);
        assert!(!g.continue_training);
    }

    #[test]
    fn errors_carry_positions() {
        let err = json_decode(MessageKind::DataSet, "[1,2.0]").unwrap_err();
        assert_eq!(
            err,
            DecodeError::Json {
                offset: 6,
                reason: "expected ','"
            }
        );
        let err = json_decode(MessageKind::DataSet, "[x]").unwrap_err();
        assert_eq!(
            err,
            DecodeError::Json {
                offset: 1,
                reason: "expected unsigned integer"
            }
        );
        let err = json_decode(MessageKind::DataSet, "[1] x").unwrap_err();
        assert!(matches!(
            err,
            DecodeError::Json {
                reason: "trailing characters",
                ..
            }
        ));
        let err = json_decode(MessageKind::Global, r#"["nope",1,[],true]"#).unwrap_err();
        assert_eq!(err.field(), Some(FIELD_IDENTIFIER));
        assert!(json_decode(MessageKind::DataSet, "[18446744073709551616]").is_err());
    }

    #[test]
    fn decode_any_picks_layout() {
        let g = global(2);
        assert_eq!(json_decode_any(&json_encode(&g)).unwrap(), g);
        assert_eq!(json_decode_any("[3]").unwrap().kind(), MessageKind::DataSet);
    }
}
