use core::fmt;

use crate::cbor::CborError;

/// Failure to turn encoded octets back into a message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeError {
    /// The octets are not well-formed CBOR of the supported subset.
    Cbor(CborError),
    /// Well-formed input whose shape does not match the message schema.
    /// `field` is the schema name of the offending field.
    Schema {
        field: &'static str,
        reason: &'static str,
    },
    /// Malformed JSON text.
    Json { offset: usize, reason: &'static str },
    /// Malformed Protobuf wire data.
    Protobuf { offset: usize, reason: &'static str },
}

impl DecodeError {
    pub(crate) const fn schema(field: &'static str, reason: &'static str) -> Self {
        DecodeError::Schema { field, reason }
    }

    /// Stable kebab-case name of the error class.
    pub const fn kind(&self) -> &'static str {
        match self {
            DecodeError::Cbor(e) => e.kind(),
            DecodeError::Schema { .. } => "schema-mismatch",
            DecodeError::Json { .. } | DecodeError::Protobuf { .. } => "parse-error",
        }
    }

    /// Schema field responsible for a [`DecodeError::Schema`].
    pub const fn field(&self) -> Option<&'static str> {
        match self {
            DecodeError::Schema { field, .. } => Some(field),
            _ => None,
        }
    }
}

impl From<CborError> for DecodeError {
    fn from(e: CborError) -> Self {
        DecodeError::Cbor(e)
    }
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeError::Cbor(e) => e.fmt(f),
            DecodeError::Schema { field, reason } => {
                write!(f, "schema-mismatch in {field}: {reason}")
            }
            DecodeError::Json { offset, reason } => {
                write!(f, "parse-error in JSON at offset {offset}: {reason}")
            }
            DecodeError::Protobuf { offset, reason } => {
                write!(f, "parse-error in Protobuf at offset {offset}: {reason}")
            }
        }
    }
}

impl core::error::Error for DecodeError {}
