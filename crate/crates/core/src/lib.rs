//! Message framework for federated learning on constrained devices.
//!
//! The three protocol messages ([`GlobalModelUpdate`], [`LocalDataSetUpdate`]
//! and [`LocalModelUpdate`]) are serialized as CBOR arrays, with model
//! parameters carried either as a plain float array or as an RFC 8746 typed
//! array. Minified JSON and Protobuf encoders for the same messages live in
//! [`codec`] for size comparison, [`bench`] reproduces the message size
//! tables, and [`flsim`] runs a deterministic orchestration of training
//! rounds with every message passing through the codecs.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bench;
pub mod cbor;
pub mod codec;
mod error;
pub mod flsim;
pub mod messages;

pub use cbor::{
    decode_value, encode_value, min_float_width, CborError, CborValue, EncodingProfile, FloatWidth,
};
pub use error::DecodeError;
pub use messages::{
    GlobalModelUpdate, LocalDataSetUpdate, LocalModelUpdate, Message, MessageKind, ModelIdentifier,
    ModelMetadata, ModelParams, ParamsEncoding,
};
