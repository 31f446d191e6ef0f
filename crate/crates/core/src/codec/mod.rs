//! Wire formats and bit accounting.
//!
//! Every message starts with one tag byte: the top three bits name the format,
//! the low five bits hold `b - 1` for quantized formats (zero otherwise). The
//! tag and the final byte's padding are framing; they are not counted.
//!
//! Counted payload sizes:
//!
//! | format                 | counted bits                      |
//! |------------------------|-----------------------------------|
//! | full precision         | `32 d`                            |
//! | quantized dense        | `32 + b d`                        |
//! | quantized sparse       | `32 + nnz (ceil(log2 d) + b)`     |
//! | snapshot flag          | `1`                               |
//!
//! The sparse format physically carries a 32-bit entry count after `delta`;
//! it is folded into the 32-bit header for accounting.

mod bits;
mod ledger;

pub use bits::{BitReader, BitWriter};
pub use ledger::{BitLedger, Direction, LedgerKind, LedgerRow};

use serde::{Deserialize, Serialize};

use crate::quantizer::{LowPrecisionVector, QuantGrid, SparseLowPrecisionVector};
use crate::{Error, Result};

const TAG_FULL32: u8 = 1;
const TAG_FULL64: u8 = 2;
const TAG_DENSE: u8 = 3;
const TAG_SPARSE: u8 = 4;
const TAG_FLAG: u8 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    FullPrecisionVector,
    QuantizedDense,
    QuantizedSparse,
    SnapshotFlag,
}

impl MessageKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MessageKind::FullPrecisionVector => "full_precision_vector",
            MessageKind::QuantizedDense => "quantized_dense",
            MessageKind::QuantizedSparse => "quantized_sparse",
            MessageKind::SnapshotFlag => "snapshot_flag",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WireMessage {
    kind: MessageKind,
    bytes: Vec<u8>,
    bits: u64,
}

impl WireMessage {
    pub fn kind(&self) -> MessageKind {
        self.kind
    }

    /// Information bits, excluding the tag byte and padding.
    pub fn bits(&self) -> u64 {
        self.bits
    }

    /// The physical encoding, tag byte first.
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Re-parses a byte stream produced by [`WireMessage::as_bytes`].
    pub fn from_bytes(bytes: Vec<u8>, dim: usize) -> Result<Self> {
        let decoded = decode_bytes(&bytes, dim)?;
        let (kind, bits) = match &decoded {
            Decoded::Full(_) => (MessageKind::FullPrecisionVector, 32 * dim as u64),
            Decoded::Dense(q) => (MessageKind::QuantizedDense, dense_bits(q.grid.bits(), dim)),
            Decoded::Sparse(q) => (MessageKind::QuantizedSparse, sparse_bits(q.grid.bits(), dim, q.nnz())),
            Decoded::SnapshotFlag => (MessageKind::SnapshotFlag, 1),
        };
        Ok(Self { kind, bytes, bits })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Decoded {
    Full(Vec<f64>),
    Dense(LowPrecisionVector),
    Sparse(SparseLowPrecisionVector),
    SnapshotFlag,
}

impl Decoded {
    /// Dense real vector; the snapshot flag resolves to `snapshot`.
    pub fn into_vector(self, snapshot: &[f64]) -> Vec<f64> {
        match self {
            Decoded::Full(v) => v,
            Decoded::Dense(q) => crate::quantizer::dequantize(&q),
            Decoded::Sparse(q) => q.to_dense(),
            Decoded::SnapshotFlag => snapshot.to_vec(),
        }
    }
}

pub fn dense_bits(bits: u32, dim: usize) -> u64 {
    32 + bits as u64 * dim as u64
}

pub fn sparse_bits(bits: u32, dim: usize, nnz: usize) -> u64 {
    32 + nnz as u64 * (index_width(dim) as u64 + bits as u64)
}

/// `ceil(log2 d)`, the number of bits needed to address `d` positions.
pub fn index_width(dim: usize) -> u32 {
    if dim <= 1 {
        0
    } else {
        usize::BITS - (dim - 1).leading_zeros()
    }
}

fn tag(format: u8, bits: u32) -> u8 {
    (format << 5) | (bits.saturating_sub(1) as u8 & 0x1f)
}

fn delta_bits(grid: &QuantGrid) -> Result<u64> {
    if !grid.is_binary32() {
        return Err(Error::Codec(format!("delta {} is not representable in binary32", grid.delta())));
    }
    Ok((grid.delta() as f32).to_bits() as u64)
}

fn check_code(code: i32, grid: &QuantGrid) -> Result<()> {
    let c = code as i64;
    if c < grid.min_code() || c > grid.max_code() {
        return Err(Error::Codec(format!("code {code} out of range for {} bits", grid.bits())));
    }
    Ok(())
}

/// `delta` as binary32, then each code in `b`-bit two's complement.
pub fn encode_dense(q: &LowPrecisionVector) -> Result<WireMessage> {
    let b = q.grid.bits();
    if b > 32 {
        return Err(Error::InvalidBits(b));
    }
    let mut w = BitWriter::with_prefix(&[tag(TAG_DENSE, b)]);
    w.write(delta_bits(&q.grid)?, 32);
    for &c in &q.codes {
        check_code(c, &q.grid)?;
        w.write(c as u32 as u64, b);
    }
    let bits = w.bits_written();
    debug_assert_eq!(bits, dense_bits(b, q.codes.len()));
    Ok(WireMessage { kind: MessageKind::QuantizedDense, bytes: w.finish(), bits })
}

/// `delta` as binary32, a 32-bit entry count, then per entry a
/// `ceil(log2 d)`-bit index followed by a `b`-bit code.
pub fn encode_sparse(q: &SparseLowPrecisionVector) -> Result<WireMessage> {
    let b = q.grid.bits();
    let width = index_width(q.dim);
    let mut w = BitWriter::with_prefix(&[tag(TAG_SPARSE, b)]);
    w.write(delta_bits(&q.grid)?, 32);
    w.write(q.entries.len() as u64, 32);
    let mut prev: Option<u32> = None;
    for &(i, c) in &q.entries {
        if i as usize >= q.dim {
            return Err(Error::IndexOutOfRange { index: i as usize, dim: q.dim });
        }
        if prev.is_some_and(|p| p >= i) {
            return Err(Error::Codec("sparse indices must be strictly increasing".into()));
        }
        prev = Some(i);
        check_code(c, &q.grid)?;
        w.write(i as u64, width);
        w.write(c as u32 as u64, b);
    }
    let bits = w.bits_written() - 32;
    debug_assert_eq!(bits, sparse_bits(b, q.dim, q.nnz()));
    Ok(WireMessage { kind: MessageKind::QuantizedSparse, bytes: w.finish(), bits })
}

/// IEEE-754 binary32 per coordinate.
pub fn encode_full(v: &[f64]) -> WireMessage {
    let mut bytes = Vec::with_capacity(1 + 4 * v.len());
    bytes.push(tag(TAG_FULL32, 0));
    for &x in v {
        bytes.extend_from_slice(&(x as f32).to_be_bytes());
    }
    WireMessage { kind: MessageKind::FullPrecisionVector, bytes, bits: 32 * v.len() as u64 }
}

/// Full-precision vector carried as binary64 so the simulated run loses
/// nothing; accounting still charges 32 bits per coordinate.
pub fn encode_full_lossless(v: &[f64]) -> WireMessage {
    let mut bytes = Vec::with_capacity(1 + 8 * v.len());
    bytes.push(tag(TAG_FULL64, 0));
    for &x in v {
        bytes.extend_from_slice(&x.to_be_bytes());
    }
    WireMessage { kind: MessageKind::FullPrecisionVector, bytes, bits: 32 * v.len() as u64 }
}

pub fn encode_flag() -> WireMessage {
    WireMessage { kind: MessageKind::SnapshotFlag, bytes: vec![tag(TAG_FLAG, 0), 0x80], bits: 1 }
}

pub fn decode(msg: &WireMessage, dim: usize) -> Result<Decoded> {
    decode_bytes(&msg.bytes, dim)
}

fn decode_bytes(bytes: &[u8], dim: usize) -> Result<Decoded> {
    let (&head, payload) = bytes.split_first().ok_or_else(|| Error::Codec("empty message".into()))?;
    let format = head >> 5;
    let b = (head & 0x1f) as u32 + 1;
    let truncated = || Error::Codec("truncated payload".into());
    match format {
        TAG_FULL32 => {
            if payload.len() != 4 * dim {
                return Err(Error::DimensionMismatch { expected: dim, got: payload.len() / 4 });
            }
            let v = payload
                .chunks_exact(4)
                .map(|c| f32::from_be_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            Ok(Decoded::Full(v))
        }
        TAG_FULL64 => {
            if payload.len() != 8 * dim {
                return Err(Error::DimensionMismatch { expected: dim, got: payload.len() / 8 });
            }
            let v = payload
                .chunks_exact(8)
                .map(|c| f64::from_be_bytes(c.try_into().expect("chunk of 8")))
                .collect();
            Ok(Decoded::Full(v))
        }
        TAG_DENSE => {
            let mut r = BitReader::new(payload);
            let grid = read_grid(&mut r, b)?;
            let codes = (0..dim)
                .map(|_| r.read(b).map(|u| sign_extend(u, b)).ok_or_else(truncated))
                .collect::<Result<Vec<_>>>()?;
            if r.remaining() >= 8 {
                return Err(Error::DimensionMismatch { expected: dim, got: dim + (r.remaining() / b as u64) as usize });
            }
            Ok(Decoded::Dense(LowPrecisionVector { grid, codes }))
        }
        TAG_SPARSE => {
            let mut r = BitReader::new(payload);
            let grid = read_grid(&mut r, b)?;
            let nnz = r.read(32).ok_or_else(truncated)? as usize;
            let width = index_width(dim);
            let mut entries = Vec::with_capacity(nnz.min(dim));
            for _ in 0..nnz {
                let i = r.read(width).ok_or_else(truncated)?;
                if i as usize >= dim {
                    return Err(Error::IndexOutOfRange { index: i as usize, dim });
                }
                let c = sign_extend(r.read(b).ok_or_else(truncated)?, b);
                entries.push((i as u32, c));
            }
            Ok(Decoded::Sparse(SparseLowPrecisionVector { grid, dim, entries }))
        }
        TAG_FLAG => match payload {
            [0x80] => Ok(Decoded::SnapshotFlag),
            _ => Err(Error::Codec("malformed flag message".into())),
        },
        other => Err(Error::Codec(format!("unknown format tag {other}"))),
    }
}

fn read_grid(r: &mut BitReader<'_>, b: u32) -> Result<QuantGrid> {
    let raw = r.read(32).ok_or_else(|| Error::Codec("truncated delta".into()))?;
    let delta = f32::from_bits(raw as u32) as f64;
    QuantGrid::new(delta, b).map_err(|e| Error::Codec(e.to_string()))
}

fn sign_extend(u: u64, b: u32) -> i32 {
    let shift = 64 - b;
    (((u << shift) as i64) >> shift) as i32
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::quantize_for_wire;
    use crate::rng::{stream, StreamId};
    use proptest::prelude::*;

    fn grid(delta: f64, b: u32) -> QuantGrid {
        QuantGrid::new(delta, b).unwrap()
    }

    #[test]
    fn dense_bit_counts() {
        let q = LowPrecisionVector { grid: grid(0.5, 8), codes: vec![3; 1000] };
        assert_eq!(encode_dense(&q).unwrap().bits(), 8032);
        let q = LowPrecisionVector { grid: grid(1.0, 2), codes: vec![-2] };
        let msg = encode_dense(&q).unwrap();
        assert_eq!(msg.bits(), 34);
        assert_eq!(decode(&msg, 1).unwrap().into_vector(&[]), vec![-2.0]);
    }

    #[test]
    fn sparse_bit_counts() {
        let entries: Vec<(u32, i32)> = (0..10).map(|i| (i * 100, (i as i32) - 5)).collect();
        let q = SparseLowPrecisionVector { grid: grid(0.25, 4), dim: 1024, entries };
        assert_eq!(encode_sparse(&q).unwrap().bits(), 172);
        let empty = SparseLowPrecisionVector { grid: grid(0.0, 4), dim: 7, entries: vec![] };
        let msg = encode_sparse(&empty).unwrap();
        assert_eq!(msg.bits(), 32);
        assert_eq!(decode(&msg, 7).unwrap().into_vector(&[]), vec![0.0; 7]);
    }

    #[test]
    fn sparse_rejects_bad_indices() {
        let q = SparseLowPrecisionVector { grid: grid(1.0, 4), dim: 4, entries: vec![(4, 1)] };
        assert!(matches!(encode_sparse(&q), Err(Error::IndexOutOfRange { index: 4, dim: 4 })));
        let q = SparseLowPrecisionVector { grid: grid(1.0, 4), dim: 4, entries: vec![(2, 1), (1, 1)] };
        assert!(encode_sparse(&q).is_err());
    }

    #[test]
    fn full_and_flag() {
        let v = vec![0.25; 1000];
        let full = encode_full(&v);
        assert_eq!(full.bits(), 32000);
        let dense = LowPrecisionVector { grid: grid(0.5, 8), codes: vec![1; 1000] };
        let ratio = full.bits() as f64 / encode_dense(&dense).unwrap().bits() as f64;
        assert!((ratio - 32000.0 / 8032.0).abs() < 1e-12);
        assert_eq!(decode(&full, 1000).unwrap().into_vector(&[]), v);
        let flag = encode_flag();
        assert_eq!(flag.bits(), 1);
        assert_eq!(decode(&flag, 5).unwrap(), Decoded::SnapshotFlag);
        let lossless = encode_full_lossless(&[0.1, -1e-300]);
        assert_eq!(lossless.bits(), 64);
        assert_eq!(decode(&lossless, 2).unwrap().into_vector(&[]), vec![0.1, -1e-300]);
    }

    #[test]
    fn rejects_non_binary32_delta_and_bad_codes() {
        let q = LowPrecisionVector { grid: grid(0.1, 8), codes: vec![1] };
        assert!(encode_dense(&q).is_err());
        let q = LowPrecisionVector { grid: grid(0.5, 2), codes: vec![2] };
        assert!(encode_dense(&q).is_err());
    }

    #[test]
    fn decode_rejects_wrong_dimension() {
        let msg = encode_full(&[1.0, 2.0]);
        assert!(decode(&msg, 3).is_err());
        let q = LowPrecisionVector { grid: grid(0.5, 8), codes: vec![1; 4] };
        let msg = encode_dense(&q).unwrap();
        assert!(decode(&msg, 8).is_err());
        assert!(decode(&msg, 2).is_err());
    }

    proptest! {
        #[test]
        fn dense_roundtrip(v in prop::collection::vec(-1e3f64..1e3, 1..64), b in 2u32..=32, seed in any::<u64>()) {
            let q = quantize_for_wire(&v, b, &mut stream(seed, StreamId::Data)).unwrap();
            let msg = encode_dense(&q).unwrap();
            prop_assert_eq!(msg.bits(), 32 + b as u64 * v.len() as u64);
            prop_assert_eq!(decode(&msg, v.len()).unwrap(), Decoded::Dense(q));
            let again = WireMessage::from_bytes(msg.as_bytes().to_vec(), v.len()).unwrap();
            prop_assert_eq!(again, msg);
        }

        #[test]
        fn sparse_roundtrip(dim in 1usize..5000, picks in prop::collection::btree_map(0usize..5000, -8i32..=7, 0..40), b in 4u32..=16) {
            let entries: Vec<(u32, i32)> = picks.into_iter().filter(|(i, _)| *i < dim).map(|(i, c)| (i as u32, c)).collect();
            let q = SparseLowPrecisionVector { grid: grid(0.375, b), dim, entries };
            let msg = encode_sparse(&q).unwrap();
            prop_assert_eq!(msg.bits(), sparse_bits(b, dim, q.nnz()));
            prop_assert_eq!(decode(&msg, dim).unwrap(), Decoded::Sparse(q));
        }
    }
}
