//! Minified JSON and Protobuf encodings of the messages, used as size
//! baselines next to CBOR.

pub mod json;
pub mod protobuf;

use alloc::vec::Vec;
use core::fmt;

use crate::cbor::EncodingProfile;
use crate::error::DecodeError;
use crate::messages::{Message, MessageKind};

pub use json::{json_decode, json_decode_any, json_encode};
pub use protobuf::{pb_decode, pb_encode};

/// A wire format a message can be sized or carried in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Codec {
    Cbor(EncodingProfile),
    Protobuf,
    Json,
}

impl Codec {
    pub const ALL: [Codec; 4] = [
        Codec::Cbor(EncodingProfile::Compact),
        Codec::Cbor(EncodingProfile::Verbose),
        Codec::Protobuf,
        Codec::Json,
    ];

    pub fn encode(self, m: &Message) -> Vec<u8> {
        match self {
            Codec::Cbor(profile) => m.encode(profile),
            Codec::Protobuf => pb_encode(m),
            Codec::Json => json_encode(m).into_bytes(),
        }
    }

    pub fn decode(self, kind: MessageKind, buf: &[u8]) -> Result<Message, DecodeError> {
        match self {
            Codec::Cbor(_) => Message::decode(kind, buf),
            Codec::Protobuf => pb_decode(kind, buf),
            Codec::Json => {
                let text = core::str::from_utf8(buf).map_err(|e| DecodeError::Json {
                    offset: e.valid_up_to(),
                    reason: "invalid UTF-8",
                })?;
                json_decode(kind, text)
            }
        }
    }

    /// `(codec, profile)` column names as used in reports.
    pub const fn names(self) -> (&'static str, &'static str) {
        match self {
            Codec::Cbor(p) => ("cbor", p.name()),
            Codec::Protobuf => ("protobuf", "-"),
            Codec::Json => ("json", "-"),
        }
    }
}

impl fmt::Display for Codec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Codec::Cbor(EncodingProfile::Compact) => f.write_str("CBOR Best"),
            Codec::Cbor(EncodingProfile::Verbose) => f.write_str("CBOR Worst"),
            Codec::Protobuf => f.write_str("Protobuf"),
            Codec::Json => f.write_str("JSON"),
        }
    }
}
