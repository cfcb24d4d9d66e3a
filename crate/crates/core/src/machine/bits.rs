use bitvec::prelude::*;
use num_bigint::BigUint;

use super::code::Codeword;
use crate::error::{Error, Result};

/// Packed bits, MSB-first within bytes, with an explicit bit length.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Bitstream {
    bits: BitVec<u8, Msb0>,
}

impl Bitstream {
    pub fn new() -> Self {
        Bitstream::default()
    }

    pub fn from_bytes(bytes: &[u8], bit_len: usize) -> Result<Self> {
        if bit_len > bytes.len() * 8 {
            return Err(Error::InvalidParameter(format!(
                "bit length {bit_len} exceeds {} bytes",
                bytes.len()
            )));
        }
        let mut bits = BitVec::<u8, Msb0>::from_slice(bytes);
        bits.truncate(bit_len);
        Ok(Bitstream { bits })
    }

    /// Bytes with the tail of the last byte zero-filled.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bits = self.bits.clone();
        bits.set_uninitialized(false);
        bits.into_vec()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn push_bit(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    pub fn push_codeword(&mut self, w: Codeword) {
        for i in 0..w.len {
            self.bits.push(w.bit(i));
        }
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub fn push_uint(&mut self, value: u64, width: u32) {
        for i in (0..width).rev() {
            self.bits.push(i < 64 && (value >> i) & 1 == 1);
        }
    }

    pub fn push_biguint(&mut self, value: &BigUint, width: u64) {
        for i in (0..width).rev() {
            self.bits.push(value.bit(i));
        }
    }

    pub fn extend(&mut self, other: &Bitstream) {
        self.bits.extend_from_bitslice(&other.bits);
    }

    pub fn reader(&self) -> BitReader<'_> {
        BitReader {
            stream: self,
            pos: 0,
        }
    }

    pub fn to_bit_string(&self) -> String {
        self.bits
            .iter()
            .map(|b| if *b { '1' } else { '0' })
            .collect()
    }
}

pub struct BitReader<'a> {
    stream: &'a Bitstream,
    pos: usize,
}

impl BitReader<'_> {
    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.stream.len() - self.pos
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        if self.pos >= self.stream.len() {
            return Err(Error::ParseFailure {
                bit: self.pos,
                reason: "stream exhausted".into(),
            });
        }
        let b = self.stream.get(self.pos);
        self.pos += 1;
        Ok(b)
    }

    pub fn read_uint(&mut self, width: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | u64::from(self.read_bit()?);
        }
        Ok(v)
    }

    pub fn read_biguint(&mut self, width: u64) -> Result<BigUint> {
        let mut v = BigUint::default();
        for i in (0..width).rev() {
            if self.read_bit()? {
                v.set_bit(i, true);
            }
        }
        Ok(v)
    }

    /// Reads one codeword of `words`, bit by bit.
    pub fn read_codeword(&mut self, words: &[Codeword]) -> Result<usize> {
        let start = self.pos;
        let max = words.iter().map(|w| w.len).max().unwrap_or(0);
        let mut cur = Codeword::EMPTY;
        loop {
            if let Some(i) = words.iter().position(|w| *w == cur) {
                return Ok(i);
            }
            if cur.len >= max {
                return Err(Error::ParseFailure {
                    bit: start,
                    reason: format!("no codeword of the active code matches {cur}"),
                });
            }
            let b = self.read_bit().map_err(|_| Error::ParseFailure {
                bit: start,
                reason: "stream exhausted mid-codeword".into(),
            })?;
            cur = Codeword {
                len: cur.len + 1,
                bits: (cur.bits << 1) | u64::from(b),
            };
        }
    }
}
