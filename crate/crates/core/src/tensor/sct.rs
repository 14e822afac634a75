//! `.sct` tensor container.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! magic   4 bytes  "SCT1"
//! rank    u32      0..=4
//! dims    rank × u64
//! payload prod(dims) × f32, row-major
//! ```
//!
//! Frames are stored as rank 2 `[n_x, n_y]`. Cubes are stored as rank 3
//! `[B, n_x, n_y]` so that the row-major payload is exactly the in-memory
//! slice-major layout of [`DataCube`].

use alloc::format;
use alloc::vec::Vec;

use super::{DataCube, Frame2D};
use crate::error::{Result, SciError};

pub const MAGIC: [u8; 4] = *b"SCT1";
pub const MAX_RANK: usize = 4;

/// Raw decoded tensor with its on-disk shape.
#[derive(Debug, Clone, PartialEq)]
pub struct SctTensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

/// A decoded tensor classified by rank.
#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    Frame(Frame2D),
    Cube(DataCube),
    /// Rank 0, 1 or 4.
    Other(SctTensor),
}

impl SctTensor {
    pub fn from_frame(f: &Frame2D) -> Self {
        Self { dims: alloc::vec![f.nx(), f.ny()], data: f.as_slice().iter().map(|&v| v as f32).collect() }
    }

    pub fn from_cube(c: &DataCube) -> Self {
        Self {
            dims: alloc::vec![c.bands(), c.nx(), c.ny()],
            data: c.as_slice().iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn classify(self) -> Result<Tensor> {
        let data64 = || self.data.iter().map(|&v| v as f64).collect::<Vec<_>>();
        match *self.dims.as_slice() {
            [nx, ny] => Ok(Tensor::Frame(Frame2D::from_vec(nx, ny, data64())?)),
            [nb, nx, ny] => Ok(Tensor::Cube(DataCube::from_vec(nx, ny, nb, data64())?)),
            _ => Ok(Tensor::Other(self)),
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        if self.rank() > MAX_RANK {
            return Err(SciError::UnsupportedRank(self.rank()));
        }
        let count: usize = self.dims.iter().product();
        if count != self.data.len() {
            return Err(SciError::ShapeMismatch(format!(
                "dims {:?} describe {} values, payload has {}",
                self.dims,
                count,
                self.data.len()
            )));
        }
        let mut out = Vec::with_capacity(8 + 8 * self.rank() + 4 * count);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&(self.rank() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.array::<4>()?;
        if magic != MAGIC {
            return Err(SciError::BadMagic { expected: MAGIC, found: magic });
        }
        let rank = u32::from_le_bytes(cur.array()?) as usize;
        if rank > MAX_RANK {
            return Err(SciError::UnsupportedRank(rank));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(u64::from_le_bytes(cur.array()?) as usize);
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or(SciError::TruncatedPayload { needed: usize::MAX, found: bytes.len() })?;
        let needed = count
            .checked_mul(4)
            .and_then(|p| p.checked_add(cur.pos))
            .ok_or(SciError::TruncatedPayload { needed: usize::MAX, found: bytes.len() })?;
        if bytes.len() < needed {
            return Err(SciError::TruncatedPayload { needed, found: bytes.len() });
        }
        let data = (0..count).map(|_| cur.array().map(f32::from_le_bytes)).collect::<Result<Vec<_>>>()?;
        Ok(Self { dims, data })
    }
}

pub fn encode_frame(f: &Frame2D) -> Result<Vec<u8>> {
    SctTensor::from_frame(f).encode()
}

pub fn encode_cube(c: &DataCube) -> Result<Vec<u8>> {
    SctTensor::from_cube(c).encode()
}

pub fn decode(bytes: &[u8]) -> Result<Tensor> {
    SctTensor::decode(bytes)?.classify()
}

pub(crate) struct Cursor<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl Cursor<'_> {
    pub fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        if end > self.bytes.len() {
            return Err(SciError::TruncatedPayload { needed: end, found: self.bytes.len() });
        }
        let mut out = [0u8; N];
        out.copy_from_slice(&self.bytes[self.pos..end]);
        self.pos = end;
        Ok(out)
    }

    pub fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(SciError::TruncatedPayload { needed: end, found: self.bytes.len() });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn zero_frame_round_trips() {
        let f = Frame2D::zeros(2, 2);
        let back = decode(&encode_frame(&f).unwrap()).unwrap();
        assert_eq!(back, Tensor::Frame(f));
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let mut bytes = encode_frame(&Frame2D::zeros(2, 2)).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        assert_eq!(
            SctTensor::decode(&bytes),
            Err(SciError::BadMagic { expected: MAGIC, found: *b"XXXX" })
        );
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let bytes = encode_frame(&Frame2D::filled(3, 3, 1.0)).unwrap();
        let cut = &bytes[..bytes.len() - 1];
        assert!(matches!(SctTensor::decode(cut), Err(SciError::TruncatedPayload { .. })));
        assert!(matches!(SctTensor::decode(&bytes[..6]), Err(SciError::TruncatedPayload { .. })));
    }

    #[test]
    fn rank_above_four_is_rejected() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"SCT1");
        bytes.extend_from_slice(&5u32.to_le_bytes());
        assert_eq!(SctTensor::decode(&bytes), Err(SciError::UnsupportedRank(5)));
        let t = SctTensor { dims: vec![1; 5], data: vec![0.0] };
        assert_eq!(t.encode(), Err(SciError::UnsupportedRank(5)));
    }

    #[test]
    fn header_layout_is_fixed() {
        let f = Frame2D::from_vec(1, 2, vec![1.0, -0.0]).unwrap();
        let bytes = encode_frame(&f).unwrap();
        let mut expected = Vec::new();
        expected.extend_from_slice(b"SCT1");
        expected.extend_from_slice(&[2, 0, 0, 0]);
        expected.extend_from_slice(&[1, 0, 0, 0, 0, 0, 0, 0]);
        expected.extend_from_slice(&[2, 0, 0, 0, 0, 0, 0, 0]);
        expected.extend_from_slice(&[0x00, 0x00, 0x80, 0x3f]);
        expected.extend_from_slice(&[0x00, 0x00, 0x00, 0x80]);
        assert_eq!(bytes, expected);
    }

    #[test]
    fn cube_dims_are_band_major_on_disk() {
        let c = DataCube::from_fn(2, 3, 4, |i, j, b| (100 * b + 10 * i + j) as f64);
        let t = SctTensor::from_cube(&c);
        assert_eq!(t.dims, vec![4, 2, 3]);
        // band 1, row 1, column 2
        assert_eq!(t.data[6 + 3 + 2], 112.0);
    }

    proptest! {
        #[test]
        fn raw_round_trip_is_bit_exact(bits in proptest::collection::vec(any::<u32>(), 0..64)) {
            let data: Vec<f32> = bits.iter().map(|&b| f32::from_bits(b)).collect();
            let t = SctTensor { dims: vec![data.len()], data };
            let back = SctTensor::decode(&t.encode().unwrap()).unwrap();
            let a: Vec<u32> = t.data.iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.data.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
            prop_assert_eq!(back.dims, t.dims);
        }
    }
}
