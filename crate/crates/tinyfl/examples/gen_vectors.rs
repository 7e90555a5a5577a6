//! Writes the golden CBOR conformance vectors.
//!
//! Each line is `<hex> <diagnostic>`. Items are drawn at random from the
//! supported subset and written with randomly chosen, often non-minimal,
//! head widths and float widths, so decoding exercises every accepted form.
//! The diagnostic text of random items is rendered from the generated value,
//! not from a decode of the bytes.
//!
//! ```text
//! cargo run -p tinyfl --example gen_vectors -- crates/tinyfl/tests/data/cbor_vectors.txt
//! ```

use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tinyfl_core::cbor::{CborValue, FloatWidth};
use tinyfl_core::messages::{
    GlobalModelUpdate, LocalDataSetUpdate, LocalModelUpdate, Message, ModelIdentifier,
    ModelMetadata, ModelParams,
};
use tinyfl_core::{decode_value, EncodingProfile};

const COUNT: usize = 1000;
const SEED: u64 = 0x7f1_c0de;

/// Tags outside the ranges an independent decoder gives special meaning,
/// plus the typed-array and UUID tags of the message schema.
const PLAIN_TAGS: &[u64] = &[
    6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 24, 65535,
];

struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    /// Head with a random legal width for `arg`.
    fn head(&mut self, out: &mut Vec<u8>, major: u8, arg: u64) {
        let minimal = match arg {
            0..=23 => 0,
            24..=0xFF => 1,
            0x100..=0xFFFF => 2,
            0x1_0000..=0xFFFF_FFFF => 3,
            _ => 4,
        };
        let width = if self.rng.random_bool(0.5) {
            minimal
        } else {
            self.rng.random_range(minimal..=4)
        };
        let mt = major << 5;
        match width {
            0 => out.push(mt | arg as u8),
            1 => out.extend([mt | 24, arg as u8]),
            2 => {
                out.push(mt | 25);
                out.extend((arg as u16).to_be_bytes());
            }
            3 => {
                out.push(mt | 26);
                out.extend((arg as u32).to_be_bytes());
            }
            _ => {
                out.push(mt | 27);
                out.extend(arg.to_be_bytes());
            }
        }
    }

    fn uint(&mut self) -> u64 {
        match self.rng.random_range(0..5) {
            0 => self.rng.random_range(0..24),
            1 => self.rng.random_range(24..256),
            2 => self.rng.random_range(256..65536),
            3 => self.rng.random_range(65536..=u32::MAX as u64),
            _ => self.rng.random(),
        }
    }

    fn float(&mut self, out: &mut Vec<u8>) -> CborValue {
        let special = [
            0.0,
            -0.0,
            1.0,
            -1.5,
            65504.0,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NAN,
        ];
        let w = *[FloatWidth::Half, FloatWidth::Single, FloatWidth::Double]
            .choose(&mut self.rng)
            .unwrap();
        let x = if self.rng.random_bool(0.2) {
            *special.choose(&mut self.rng).unwrap()
        } else {
            match w {
                FloatWidth::Half => half::f16::from_bits(self.rng.random()).to_f64(),
                FloatWidth::Single => f32::from_bits(self.rng.random()) as f64,
                FloatWidth::Double => f64::from_bits(self.rng.random()),
            }
        };
        // NaN payloads are not preserved; write the canonical quiet NaN
        match w {
            FloatWidth::Half => {
                out.push(0xF9);
                let h = if x.is_nan() {
                    0x7E00
                } else {
                    half::f16::from_f64(x).to_bits()
                };
                out.extend(h.to_be_bytes());
            }
            FloatWidth::Single => {
                out.push(0xFA);
                let s = if x.is_nan() {
                    0x7FC0_0000
                } else {
                    (x as f32).to_bits()
                };
                out.extend(s.to_be_bytes());
            }
            FloatWidth::Double => {
                out.push(0xFB);
                let d = if x.is_nan() {
                    0x7FF8_0000_0000_0000
                } else {
                    x.to_bits()
                };
                out.extend(d.to_be_bytes());
            }
        }
        CborValue::Float(x, w)
    }

    fn bytes(&mut self, n: usize) -> Vec<u8> {
        (0..n).map(|_| self.rng.random()).collect()
    }

    fn text(&mut self) -> String {
        let pool = [
            'a', 'Z', '0', ' ', '"', '\\', '\n', '\t', '\u{1}', '\u{7f}', 'é', 'ß', '€', '水', '🦀',
        ];
        let n = self.rng.random_range(0..12);
        (0..n)
            .map(|_| *pool.choose(&mut self.rng).unwrap())
            .collect()
    }

    fn value(&mut self, out: &mut Vec<u8>, depth: u32) -> CborValue {
        let choice = if depth >= 3 {
            self.rng.random_range(0..5)
        } else {
            self.rng.random_range(0..8)
        };
        match choice {
            0 => {
                let n = self.uint();
                self.head(out, 0, n);
                CborValue::Uint(n)
            }
            1 => self.float(out),
            2 => {
                let b = self.rng.random_bool(0.5);
                out.push(if b { 0xF5 } else { 0xF4 });
                CborValue::Bool(b)
            }
            3 => {
                let n = self.rng.random_range(0..20);
                let b = self.bytes(n);
                self.head(out, 2, n as u64);
                out.extend(&b);
                CborValue::Bytes(b)
            }
            4 => {
                let s = self.text();
                self.head(out, 3, s.len() as u64);
                out.extend(s.as_bytes());
                CborValue::Text(s)
            }
            5 | 6 => {
                let n = self.rng.random_range(0..6);
                self.head(out, 4, n as u64);
                CborValue::Array((0..n).map(|_| self.value(out, depth + 1)).collect())
            }
            _ => self.tagged(out, depth),
        }
    }

    fn tagged(&mut self, out: &mut Vec<u8>, depth: u32) -> CborValue {
        match self.rng.random_range(0..4) {
            0 => {
                self.head(out, 6, 37);
                let b = self.bytes(16);
                self.head(out, 2, 16);
                out.extend(&b);
                CborValue::tagged(37, CborValue::Bytes(b))
            }
            1 => {
                let tag = self.rng.random_range(84..=86);
                let w = [2, 4, 8][(tag - 84) as usize];
                let n = w * self.rng.random_range(0..5);
                let b = self.bytes(n);
                self.head(out, 6, tag);
                self.head(out, 2, n as u64);
                out.extend(&b);
                CborValue::tagged(tag, CborValue::Bytes(b))
            }
            _ => {
                let tag = *PLAIN_TAGS.choose(&mut self.rng).unwrap();
                self.head(out, 6, tag);
                let inner = self.value(out, depth + 1);
                CborValue::tagged(tag, inner)
            }
        }
    }

    /// A well-formed message in one of the two profiles.
    fn message(&mut self) -> Vec<u8> {
        let profile = if self.rng.random_bool(0.5) {
            EncodingProfile::Compact
        } else {
            EncodingProfile::Verbose
        };
        let n = self.rng.random_range(0..6);
        let params: Vec<f64> = (0..n)
            .map(|_| match self.rng.random_range(0..3) {
                0 => self.rng.random_range(-8i32..8) as f64 / 4.0,
                1 => self.rng.random_range(-1.0f32..1.0) as f64,
                _ => self.rng.random_range(-1.0..1.0),
            })
            .collect();
        let id = ModelIdentifier::new(self.rng.random());
        let round = self.uint();
        let meta = ModelMetadata::new(0.5, self.rng.random_range(0.0..1.0));
        let m = match self.rng.random_range(0..3) {
            0 => Message::Global(GlobalModelUpdate {
                model_identifier: id,
                model_round: round,
                model_params: ModelParams::for_profile(params, profile),
                continue_training: self.rng.random_bool(0.5),
            }),
            1 => Message::DataSet(LocalDataSetUpdate {
                local_dataset_size: round,
                metadata: self.rng.random_bool(0.7).then_some(meta),
            }),
            _ => Message::Local(LocalModelUpdate {
                model_identifier: id,
                model_round: round,
                model_params: ModelParams::for_profile(params, profile),
                metadata: meta,
            }),
        };
        m.encode(profile)
    }
}

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "cbor_vectors.txt".into());
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(SEED),
    };
    let mut text = String::new();
    for i in 0..COUNT {
        let mut bytes = Vec::new();
        let diag = if i % 10 == 9 {
            // the compact encoder narrows floats on its own, so message
            // vectors take their diagnostic from a decode; the cbor2
            // cross-check is what vouches for them
            bytes = g.message();
            decode_value(&bytes).expect("message decodes").0.to_string()
        } else {
            g.value(&mut bytes, 0).to_string()
        };
        writeln!(text, "{} {diag}", hex::encode(&bytes)).unwrap();
    }
    std::fs::write(&path, text).expect("write vectors");
    eprintln!("wrote {COUNT} vectors to {path}");
}
