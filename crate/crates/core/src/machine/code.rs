use std::fmt;

use crate::error::{Error, Result};

/// A binary string of at most 64 bits, stored in the low `len` bits of `bits`
/// with the first transmitted bit most significant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Codeword {
    pub len: u8,
    pub bits: u64,
}

impl Codeword {
    pub const EMPTY: Codeword = Codeword { len: 0, bits: 0 };

    pub fn new(len: u8, bits: u64) -> Result<Self> {
        if len > 64 || (len < 64 && bits >> len != 0) {
            return Err(Error::InvalidCode(format!(
                "{bits:#b} does not fit in {len} bits"
            )));
        }
        Ok(Codeword { len, bits })
    }

    /// Parses `"0110"`; `"."` or `""` is the empty codeword.
    pub fn parse(text: &str) -> Result<Self> {
        if text == "." {
            return Ok(Codeword::EMPTY);
        }
        if text.len() > 64 {
            return Err(Error::InvalidCode(format!(
                "codeword {text:?} longer than 64 bits"
            )));
        }
        let mut bits = 0u64;
        for c in text.chars() {
            bits = (bits << 1)
                | match c {
                    '0' => 0,
                    '1' => 1,
                    _ => return Err(Error::InvalidCode(format!("bad bit {c:?} in {text:?}"))),
                };
        }
        Ok(Codeword {
            len: text.len() as u8,
            bits,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bit(&self, i: u8) -> bool {
        (self.bits >> (self.len - 1 - i)) & 1 == 1
    }

    /// True if `self` is a prefix of `other` (including equality).
    pub fn is_prefix_of(&self, other: &Codeword) -> bool {
        self.len <= other.len
            && (self.len == 0 || other.bits >> (other.len - self.len) == self.bits)
    }
}

impl fmt::Display for Codeword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len == 0 {
            return f.write_str(".");
        }
        for i in 0..self.len {
            f.write_str(if self.bit(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KraftReport {
    pub sum: f64,
    pub prefix_free: bool,
    pub pass: bool,
}

/// Kraft sum and prefix-freeness of a list of codewords.
///
/// Duplicates count as prefix violations. An empty codeword passes only
/// when it is the sole entry.
pub fn kraft_check(words: &[Codeword]) -> KraftReport {
    let sum: f64 = words.iter().map(|w| (-(w.len as f64)).exp2()).sum();
    let prefix_free = words.iter().enumerate().all(|(i, a)| {
        words
            .iter()
            .enumerate()
            .all(|(j, b)| i == j || !a.is_prefix_of(b))
    });
    KraftReport {
        sum,
        prefix_free,
        pass: prefix_free && sum <= 1.0,
    }
}

/// A prefix code; codeword `i` is the symbol with index `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PrefixCode {
    words: Vec<Codeword>,
}

impl PrefixCode {
    pub fn new(words: Vec<Codeword>) -> Result<Self> {
        let report = kraft_check(&words);
        if !report.prefix_free {
            return Err(Error::InvalidCode(format!(
                "not prefix-free: {}",
                fmt_words(&words)
            )));
        }
        if !report.pass {
            return Err(Error::InvalidCode(format!(
                "Kraft sum {} exceeds 1",
                report.sum
            )));
        }
        Ok(PrefixCode { words })
    }

    /// The singleton empty code: nothing is transmitted.
    pub fn idle() -> Self {
        PrefixCode {
            words: vec![Codeword::EMPTY],
        }
    }

    /// Canonical code for the given lengths. Codewords are handed out in
    /// order of (length, position), so the result keeps the input order.
    pub fn canonical(lengths: &[u8]) -> Result<Self> {
        if lengths.is_empty() {
            return PrefixCode::new(Vec::new());
        }
        if lengths.iter().any(|&l| l > 63) {
            return Err(Error::InvalidCode("codeword length above 63".into()));
        }
        let mut order: Vec<usize> = (0..lengths.len()).collect();
        order.sort_by_key(|&i| (lengths[i], i));
        let mut words = vec![Codeword::EMPTY; lengths.len()];
        let mut next: u128 = 0;
        let mut prev_len = 0u8;
        for &i in &order {
            let len = lengths[i];
            next <<= len - prev_len;
            if next >> len != 0 {
                return Err(Error::InvalidCode(format!(
                    "lengths {lengths:?} violate Kraft"
                )));
            }
            words[i] = Codeword {
                len,
                bits: next as u64,
            };
            next += 1;
            prev_len = len;
        }
        PrefixCode::new(words)
    }

    pub fn words(&self) -> &[Codeword] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn is_idle(&self) -> bool {
        self.words.len() == 1 && self.words[0].is_empty()
    }

    pub fn word(&self, i: usize) -> Codeword {
        self.words[i]
    }

    pub fn lengths(&self) -> Vec<u8> {
        self.words.iter().map(|w| w.len).collect()
    }

    pub fn max_len(&self) -> u8 {
        self.words.iter().map(|w| w.len).max().unwrap_or(0)
    }

    pub fn index_of(&self, w: &Codeword) -> Option<usize> {
        self.words.iter().position(|c| c == w)
    }

    pub fn kraft_sum(&self) -> f64 {
        kraft_check(&self.words).sum
    }

    /// Kraft sum exactly one, checked in integer arithmetic.
    pub fn is_complete(&self) -> bool {
        let top = self.max_len();
        let total: u128 = self.words.iter().map(|w| 1u128 << (top - w.len)).sum();
        !self.words.is_empty() && total == 1u128 << top
    }
}

impl fmt::Display for PrefixCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&fmt_words(&self.words))
    }
}

fn fmt_words(words: &[Codeword]) -> String {
    words
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}
