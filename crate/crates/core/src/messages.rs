//! The three protocol messages and their CBOR array layouts.
//!
//! ```text
//! FL_Global_Model_Update  = [ identifier, round, params, continue-training ]
//! FL_Local_DataSet_Update = [ dataset-size, ? train-loss, val-loss ]
//! FL_Local_Model_Update   = [ identifier, round, params, train-loss, val-loss ]
//! ```
//!
//! The metadata group (train and validation loss) is spliced into the
//! enclosing array rather than nested. The identifier is a tag 37 byte
//! string. Parameters are either a plain array of floats or a typed array
//! (tags 84/85/86, little-endian binary16/32/64 elements in one byte string).

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::cbor::{
    decode_value_exact, diag::write_f64, encode_value, min_float_width, CborValue, EncodingProfile,
    FloatWidth, TAG_UUID,
};
use crate::error::DecodeError;

pub const FIELD_IDENTIFIER: &str = "fl-model-identifier";
pub const FIELD_ROUND: &str = "fl-model-round";
pub const FIELD_PARAMS: &str = "fl-model-params";
pub const FIELD_CONTINUE: &str = "fl-continue-training";
pub const FIELD_DATASET_SIZE: &str = "fl-local-dataset-size";
pub const FIELD_METADATA: &str = "fl-model-metadata";
pub const FIELD_TRAIN_LOSS: &str = "fl-local-model-train-loss";
pub const FIELD_VAL_LOSS: &str = "fl-local-model-val-loss";

/// 16-octet model UUID.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ModelIdentifier(pub [u8; 16]);

impl ModelIdentifier {
    pub const fn new(bytes: [u8; 16]) -> Self {
        ModelIdentifier(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        bytes.try_into().ok().map(ModelIdentifier)
    }

    pub const fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }

    /// Parses 32 hex digits, optionally in the 8-4-4-4-12 hyphenated layout.
    pub fn parse(s: &str) -> Option<Self> {
        let digits: &[u8] = s.as_bytes();
        let compact = match digits.len() {
            32 => digits.iter().all(u8::is_ascii_hexdigit),
            36 => digits.iter().enumerate().all(|(i, c)| match i {
                8 | 13 | 18 | 23 => *c == b'-',
                _ => c.is_ascii_hexdigit(),
            }),
            _ => false,
        };
        if !compact {
            return None;
        }
        let mut out = [0u8; 16];
        let mut nibbles = digits.iter().filter(|c| **c != b'-').map(|c| match c {
            b'0'..=b'9' => c - b'0',
            b'a'..=b'f' => c - b'a' + 10,
            _ => c - b'A' + 10,
        });
        for byte in &mut out {
            *byte = (nibbles.next()? << 4) | nibbles.next()?;
        }
        Some(ModelIdentifier(out))
    }

    fn to_cbor(self) -> CborValue {
        CborValue::tagged(TAG_UUID, CborValue::Bytes(self.0.to_vec()))
    }

    fn from_cbor(v: &CborValue) -> Result<Self, DecodeError> {
        match v {
            CborValue::Tagged(TAG_UUID, item) => match &**item {
                CborValue::Bytes(b) => ModelIdentifier::from_slice(b).ok_or(DecodeError::schema(
                    FIELD_IDENTIFIER,
                    "UUID must be 16 octets",
                )),
                _ => Err(DecodeError::schema(
                    FIELD_IDENTIFIER,
                    "tag 37 must wrap a byte string",
                )),
            },
            CborValue::Tagged(..) => Err(DecodeError::schema(FIELD_IDENTIFIER, "expected tag 37")),
            _ => Err(DecodeError::schema(
                FIELD_IDENTIFIER,
                "expected tagged byte string",
            )),
        }
    }
}

/// Lowercase hyphenated form, e.g. `00112233-4455-6677-8899-aabbccddeeff`.
impl fmt::Display for ModelIdentifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.0.iter().enumerate() {
            if matches!(i, 4 | 6 | 8 | 10) {
                f.write_str("-")?;
            }
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Wire representation of the parameter list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamsEncoding {
    /// CBOR array with one float item per parameter.
    Heterogeneous,
    /// Tagged byte string of little-endian elements of one width.
    TypedArray(FloatWidth),
}

impl ParamsEncoding {
    /// Name of the matching CDDL alternative.
    pub const fn cddl_name(self) -> &'static str {
        match self {
            ParamsEncoding::Heterogeneous => "[+ float]",
            ParamsEncoding::TypedArray(FloatWidth::Half) => "ta-float16le",
            ParamsEncoding::TypedArray(FloatWidth::Single) => "ta-float32le",
            ParamsEncoding::TypedArray(FloatWidth::Double) => "ta-float64le",
        }
    }
}

/// Picks the parameter encoding a profile calls for.
///
/// Compact packs all values into a typed array of the narrowest width that
/// holds every value exactly (binary16 for an empty list). Verbose uses a
/// plain array, where each element is then written as a binary64 float.
pub fn choose_params_encoding(values: &[f64], profile: EncodingProfile) -> ParamsEncoding {
    match profile {
        EncodingProfile::Compact => ParamsEncoding::TypedArray(
            values
                .iter()
                .map(|&x| min_float_width(x))
                .max()
                .unwrap_or(FloatWidth::Half),
        ),
        EncodingProfile::Verbose => ParamsEncoding::Heterogeneous,
    }
}

/// A parameter value cannot be written at the requested typed-array width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotRepresentable {
    pub index: usize,
    pub width: FloatWidth,
}

impl fmt::Display for NotRepresentable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "parameter {} does not fit a {:?} typed array",
            self.index, self.width
        )
    }
}

impl core::error::Error for NotRepresentable {}

/// Ordered model parameters plus the representation they were carried in.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub values: Vec<f64>,
    pub encoding: ParamsEncoding,
}

impl ModelParams {
    pub fn new(values: Vec<f64>, encoding: ParamsEncoding) -> Self {
        ModelParams { values, encoding }
    }

    /// Parameters tagged with the encoding `profile` would choose.
    pub fn for_profile(values: Vec<f64>, profile: EncodingProfile) -> Self {
        let encoding = choose_params_encoding(&values, profile);
        ModelParams { values, encoding }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Bitwise value equality, ignoring the encoding; NaN equals NaN.
    pub fn same_values(&self, other: &ModelParams) -> bool {
        self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()))
    }

    /// CBOR item for these values in an explicit representation.
    pub fn to_cbor(&self, encoding: ParamsEncoding) -> Result<CborValue, NotRepresentable> {
        match encoding {
            ParamsEncoding::Heterogeneous => Ok(CborValue::Array(
                self.values
                    .iter()
                    .map(|&x| CborValue::Float(x, FloatWidth::Double))
                    .collect(),
            )),
            ParamsEncoding::TypedArray(width) => {
                let mut bytes = Vec::with_capacity(self.values.len() * width.octets());
                for (index, &x) in self.values.iter().enumerate() {
                    if !width.represents(x) {
                        return Err(NotRepresentable { index, width });
                    }
                    width.to_le_bytes(x, &mut bytes);
                }
                Ok(CborValue::tagged(
                    width.typed_array_tag(),
                    CborValue::Bytes(bytes),
                ))
            }
        }
    }

    fn to_cbor_for(&self, profile: EncodingProfile) -> CborValue {
        self.to_cbor(choose_params_encoding(&self.values, profile))
            .expect("chosen width holds every value")
    }

    pub fn from_cbor(v: &CborValue) -> Result<Self, DecodeError> {
        match v {
            CborValue::Array(items) => {
                let values = items
                    .iter()
                    .map(|item| match item {
                        CborValue::Float(x, _) => Ok(*x),
                        _ => Err(DecodeError::schema(
                            FIELD_PARAMS,
                            "array element is not a float",
                        )),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(ModelParams::new(values, ParamsEncoding::Heterogeneous))
            }
            CborValue::Tagged(tag, item) => {
                let width = FloatWidth::from_typed_array_tag(*tag).ok_or(DecodeError::schema(
                    FIELD_PARAMS,
                    "unsupported typed-array tag",
                ))?;
                let CborValue::Bytes(bytes) = &**item else {
                    return Err(DecodeError::schema(
                        FIELD_PARAMS,
                        "typed array must wrap a byte string",
                    ));
                };
                if bytes.len() % width.octets() != 0 {
                    return Err(DecodeError::schema(
                        FIELD_PARAMS,
                        "typed-array length is not a multiple of the element width",
                    ));
                }
                let values = bytes
                    .chunks_exact(width.octets())
                    .map(|c| width.from_le_chunk(c))
                    .collect();
                Ok(ModelParams::new(values, ParamsEncoding::TypedArray(width)))
            }
            _ => Err(DecodeError::schema(
                FIELD_PARAMS,
                "expected float array or typed array",
            )),
        }
    }
}

/// Training and validation loss, spliced into the enclosing array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelMetadata {
    pub train_loss: f64,
    pub val_loss: f64,
}

impl ModelMetadata {
    pub const fn new(train_loss: f64, val_loss: f64) -> Self {
        ModelMetadata {
            train_loss,
            val_loss,
        }
    }

    fn push_cbor(&self, items: &mut Vec<CborValue>) {
        items.push(CborValue::Float(self.train_loss, FloatWidth::Double));
        items.push(CborValue::Float(self.val_loss, FloatWidth::Double));
    }

    fn from_items(train: &CborValue, val: &CborValue) -> Result<Self, DecodeError> {
        Ok(ModelMetadata {
            train_loss: float_field(train, FIELD_TRAIN_LOSS)?,
            val_loss: float_field(val, FIELD_VAL_LOSS)?,
        })
    }

    fn same_as(&self, other: &ModelMetadata) -> bool {
        same_f64(self.train_loss, other.train_loss) && same_f64(self.val_loss, other.val_loss)
    }
}

fn same_f64(a: f64, b: f64) -> bool {
    a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())
}

fn float_field(v: &CborValue, field: &'static str) -> Result<f64, DecodeError> {
    match v {
        CborValue::Float(x, _) => Ok(*x),
        _ => Err(DecodeError::schema(field, "expected float")),
    }
}

fn uint_field(v: &CborValue, field: &'static str) -> Result<u64, DecodeError> {
    match v {
        CborValue::Uint(n) => Ok(*n),
        _ => Err(DecodeError::schema(field, "expected unsigned integer")),
    }
}

/// Splits a decoded top-level item into its array elements, mapping a short
/// array to the first missing field and a long one to the message name.
fn array_items<'a>(
    v: &'a CborValue,
    kind: MessageKind,
    arities: &[usize],
    fields: &[&'static str],
) -> Result<&'a [CborValue], DecodeError> {
    let CborValue::Array(items) = v else {
        return Err(DecodeError::schema(kind.cddl_name(), "expected array"));
    };
    if arities.contains(&items.len()) {
        return Ok(items);
    }
    let max = arities.iter().copied().max().unwrap_or(0);
    if items.len() > max {
        Err(DecodeError::schema(kind.cddl_name(), "too many elements"))
    } else {
        Err(DecodeError::schema(fields[items.len()], "missing element"))
    }
}

/// Server to client: the current global model.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalModelUpdate {
    pub model_identifier: ModelIdentifier,
    pub model_round: u64,
    pub model_params: ModelParams,
    pub continue_training: bool,
}

impl GlobalModelUpdate {
    pub fn to_cbor(&self, profile: EncodingProfile) -> CborValue {
        CborValue::Array(vec![
            self.model_identifier.to_cbor(),
            CborValue::Uint(self.model_round),
            self.model_params.to_cbor_for(profile),
            CborValue::Bool(self.continue_training),
        ])
    }

    pub fn encode(&self, profile: EncodingProfile) -> Vec<u8> {
        encode_value(&self.to_cbor(profile), profile)
    }

    pub fn from_cbor(v: &CborValue) -> Result<Self, DecodeError> {
        let items = array_items(
            v,
            MessageKind::Global,
            &[4],
            &[FIELD_IDENTIFIER, FIELD_ROUND, FIELD_PARAMS, FIELD_CONTINUE],
        )?;
        Ok(GlobalModelUpdate {
            model_identifier: ModelIdentifier::from_cbor(&items[0])?,
            model_round: uint_field(&items[1], FIELD_ROUND)?,
            model_params: ModelParams::from_cbor(&items[2])?,
            continue_training: match items[3] {
                CborValue::Bool(b) => b,
                _ => return Err(DecodeError::schema(FIELD_CONTINUE, "expected bool")),
            },
        })
    }

    pub fn decode(buf: &[u8]) -> Result<Self, DecodeError> {
        Self::from_cbor(&decode_value_exact(buf)?)
    }

    /// Equality with bitwise float comparison, ignoring the params encoding.
    pub fn same_as(&self, other: &Self) -> bool {
        self.model_identifier == other.model_identifier
            && self.model_round == other.model_round
            && self.model_params.same_values(&other.model_params)
            && self.continue_training == other.continue_training
    }
}

/// Client to server: observe notification with training progress.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDataSetUpdate {
    pub local_dataset_size: u64,
    pub metadata: Option<ModelMetadata>,
}

impl LocalDataSetUpdate {
    pub fn to_cbor(&self, _profile: EncodingProfile) -> CborValue {
        let mut items = vec![CborValue::Uint(self.local_dataset_size)];
        if let Some(meta) = &self.metadata {
            meta.push_cbor(&mut items);
        }
        CborValue::Array(items)
    }

    pub fn encode(&self, profile: EncodingProfile) -> Vec<u8> {
        encode_value(&self.to_cbor(profile), profile)
    }

    pub fn from_cbor(v: &CborValue) -> Result<Self, DecodeError> {
        let items = array_items(
            v,
            MessageKind::DataSet,
            &[1, 3],
            &[FIELD_DATASET_SIZE, FIELD_METADATA, FIELD_METADATA],
        )?;
        Ok(LocalDataSetUpdate {
            local_dataset_size: uint_field(&items[0], FIELD_DATASET_SIZE)?,
            metadata: match items {
                [_, train, val] => Some(ModelMetadata::from_items(train, val)?),
                _ => None,
            },
        })
    }

    pub fn decode(buf: &[u8]) -> Result<Self, DecodeError> {
        Self::from_cbor(&decode_value_exact(buf)?)
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.local_dataset_size == other.local_dataset_size
            && match (&self.metadata, &other.metadata) {
                (Some(a), Some(b)) => a.same_as(b),
                (None, None) => true,
                _ => false,
            }
    }
}

/// Client to server: the locally trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalModelUpdate {
    pub model_identifier: ModelIdentifier,
    pub model_round: u64,
    pub model_params: ModelParams,
    pub metadata: ModelMetadata,
}

impl LocalModelUpdate {
    pub fn to_cbor(&self, profile: EncodingProfile) -> CborValue {
        let mut items = vec![
            self.model_identifier.to_cbor(),
            CborValue::Uint(self.model_round),
            self.model_params.to_cbor_for(profile),
        ];
        self.metadata.push_cbor(&mut items);
        CborValue::Array(items)
    }

    pub fn encode(&self, profile: EncodingProfile) -> Vec<u8> {
        encode_value(&self.to_cbor(profile), profile)
    }

    pub fn from_cbor(v: &CborValue) -> Result<Self, DecodeError> {
        let items = array_items(
            v,
            MessageKind::Local,
            &[5],
            &[
                FIELD_IDENTIFIER,
                FIELD_ROUND,
                FIELD_PARAMS,
                FIELD_METADATA,
                FIELD_METADATA,
            ],
        )?;
        Ok(LocalModelUpdate {
            model_identifier: ModelIdentifier::from_cbor(&items[0])?,
            model_round: uint_field(&items[1], FIELD_ROUND)?,
            model_params: ModelParams::from_cbor(&items[2])?,
            metadata: ModelMetadata::from_items(&items[3], &items[4])?,
        })
    }

    pub fn decode(buf: &[u8]) -> Result<Self, DecodeError> {
        Self::from_cbor(&decode_value_exact(buf)?)
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.model_identifier == other.model_identifier
            && self.model_round == other.model_round
            && self.model_params.same_values(&other.model_params)
            && self.metadata.same_as(&other.metadata)
    }
}

pub fn encode_global(m: &GlobalModelUpdate, profile: EncodingProfile) -> Vec<u8> {
    m.encode(profile)
}

pub fn encode_dataset_update(m: &LocalDataSetUpdate, profile: EncodingProfile) -> Vec<u8> {
    m.encode(profile)
}

pub fn encode_local_model(m: &LocalModelUpdate, profile: EncodingProfile) -> Vec<u8> {
    m.encode(profile)
}

pub fn decode_global(buf: &[u8]) -> Result<GlobalModelUpdate, DecodeError> {
    GlobalModelUpdate::decode(buf)
}

pub fn decode_dataset_update(buf: &[u8]) -> Result<LocalDataSetUpdate, DecodeError> {
    LocalDataSetUpdate::decode(buf)
}

pub fn decode_local_model(buf: &[u8]) -> Result<LocalModelUpdate, DecodeError> {
    LocalModelUpdate::decode(buf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MessageKind {
    Global,
    DataSet,
    Local,
}

impl MessageKind {
    pub const ALL: [MessageKind; 3] = [
        MessageKind::DataSet,
        MessageKind::Global,
        MessageKind::Local,
    ];

    pub const fn cddl_name(self) -> &'static str {
        match self {
            MessageKind::Global => "FL_Global_Model_Update",
            MessageKind::DataSet => "FL_Local_DataSet_Update",
            MessageKind::Local => "FL_Local_Model_Update",
        }
    }

    /// Short command-line name: `global`, `dataset` or `local`.
    pub const fn short_name(self) -> &'static str {
        match self {
            MessageKind::Global => "global",
            MessageKind::DataSet => "dataset",
            MessageKind::Local => "local",
        }
    }
}

impl core::str::FromStr for MessageKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        MessageKind::ALL
            .into_iter()
            .find(|k| k.short_name() == s || k.cddl_name() == s)
            .ok_or(())
    }
}

/// Any of the three messages.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Global(GlobalModelUpdate),
    DataSet(LocalDataSetUpdate),
    Local(LocalModelUpdate),
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::Global(_) => MessageKind::Global,
            Message::DataSet(_) => MessageKind::DataSet,
            Message::Local(_) => MessageKind::Local,
        }
    }

    pub fn encode(&self, profile: EncodingProfile) -> Vec<u8> {
        match self {
            Message::Global(m) => m.encode(profile),
            Message::DataSet(m) => m.encode(profile),
            Message::Local(m) => m.encode(profile),
        }
    }

    pub fn decode(kind: MessageKind, buf: &[u8]) -> Result<Message, DecodeError> {
        Self::from_cbor(kind, &decode_value_exact(buf)?)
    }

    pub fn from_cbor(kind: MessageKind, v: &CborValue) -> Result<Message, DecodeError> {
        Ok(match kind {
            MessageKind::Global => Message::Global(GlobalModelUpdate::from_cbor(v)?),
            MessageKind::DataSet => Message::DataSet(LocalDataSetUpdate::from_cbor(v)?),
            MessageKind::Local => Message::Local(LocalModelUpdate::from_cbor(v)?),
        })
    }

    /// Decodes without knowing the kind, telling messages apart by arity
    /// (4: global, 5: local, 1 or 3: dataset update).
    pub fn decode_any(buf: &[u8]) -> Result<Message, DecodeError> {
        let v = decode_value_exact(buf)?;
        let kind = match &v {
            CborValue::Array(items) => match items.len() {
                4 => MessageKind::Global,
                5 => MessageKind::Local,
                1 | 3 => MessageKind::DataSet,
                _ => return Err(DecodeError::schema("message", "arity matches no message")),
            },
            _ => return Err(DecodeError::schema("message", "expected array")),
        };
        Self::from_cbor(kind, &v)
    }

    pub fn same_as(&self, other: &Message) -> bool {
        match (self, other) {
            (Message::Global(a), Message::Global(b)) => a.same_as(b),
            (Message::DataSet(a), Message::DataSet(b)) => a.same_as(b),
            (Message::Local(a), Message::Local(b)) => a.same_as(b),
            _ => false,
        }
    }
}

struct Floats<'a>(&'a [f64]);

impl fmt::Display for Floats<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write_f64(f, *x)?;
        }
        f.write_str("]")
    }
}

struct Real(f64);

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_f64(f, self.0)
    }
}

fn write_params(f: &mut fmt::Formatter<'_>, p: &ModelParams) -> fmt::Result {
    writeln!(
        f,
        "{FIELD_PARAMS}: {} ({} values) {}",
        p.encoding.cddl_name(),
        p.len(),
        Floats(&p.values)
    )
}

fn write_metadata(f: &mut fmt::Formatter<'_>, m: &ModelMetadata) -> fmt::Result {
    writeln!(f, "{FIELD_TRAIN_LOSS}: {}", Real(m.train_loss))?;
    writeln!(f, "{FIELD_VAL_LOSS}: {}", Real(m.val_loss))
}

/// One `<field>: <value>` line per schema field.
impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "message: {}", self.kind().cddl_name())?;
        match self {
            Message::Global(m) => {
                writeln!(f, "{FIELD_IDENTIFIER}: {}", m.model_identifier)?;
                writeln!(f, "{FIELD_ROUND}: {}", m.model_round)?;
                write_params(f, &m.model_params)?;
                writeln!(f, "{FIELD_CONTINUE}: {}", m.continue_training)
            }
            Message::DataSet(m) => {
                writeln!(f, "{FIELD_DATASET_SIZE}: {}", m.local_dataset_size)?;
                match &m.metadata {
                    Some(meta) => write_metadata(f, meta),
                    None => Ok(()),
                }
            }
            Message::Local(m) => {
                writeln!(f, "{FIELD_IDENTIFIER}: {}", m.model_identifier)?;
                writeln!(f, "{FIELD_ROUND}: {}", m.model_round)?;
                write_params(f, &m.model_params)?;
                write_metadata(f, &m.metadata)
            }
        }
    }
}
