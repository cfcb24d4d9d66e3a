use super::bits::Bitstream;
use super::code::{Codeword, PrefixCode};
use crate::error::{Error, Result};
use crate::model::Sequence;

/// `u_i = f(s_i, x_i)`, `s_{i+1} = g(s_i, x_i)`, starting in state 0.
///
/// `output[s][x]` is an index into `codes[s]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FsmEncoder {
    alpha: usize,
    codes: Vec<PrefixCode>,
    output: Vec<Vec<usize>>,
    next: Vec<Vec<usize>>,
}

impl FsmEncoder {
    pub fn new(
        alpha: usize,
        codes: Vec<PrefixCode>,
        output: Vec<Vec<usize>>,
        next: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let m = codes.len();
        if m == 0 || alpha == 0 {
            return Err(Error::InvalidMachine(
                "encoder needs a state and an input symbol".into(),
            ));
        }
        if output.len() != m || next.len() != m {
            return Err(Error::InvalidMachine(
                "table sizes disagree with the state count".into(),
            ));
        }
        for s in 0..m {
            if codes[s].is_empty() {
                return Err(Error::InvalidMachine(format!(
                    "state {s} has an empty code"
                )));
            }
            if output[s].len() != alpha || next[s].len() != alpha {
                return Err(Error::InvalidMachine(format!(
                    "state {s}: rows must have {alpha} entries"
                )));
            }
            if output[s].iter().any(|&u| u >= codes[s].len()) {
                return Err(Error::InvalidMachine(format!(
                    "state {s}: output outside its code"
                )));
            }
            if next[s].iter().any(|&t| t >= m) {
                return Err(Error::InvalidMachine(format!(
                    "state {s}: next state out of range"
                )));
            }
        }
        Ok(FsmEncoder {
            alpha,
            codes,
            output,
            next,
        })
    }

    /// Single state, codeword `x` of a fixed-length code for every symbol.
    pub fn verbatim(alpha: usize) -> Result<Self> {
        let width = usize::BITS - (alpha - 1).leading_zeros();
        let code = PrefixCode::canonical(&vec![width as u8; alpha])?;
        FsmEncoder::new(
            alpha,
            vec![code],
            vec![(0..alpha).collect()],
            vec![vec![0; alpha]],
        )
    }

    /// Single state, nothing transmitted.
    pub fn idle(alpha: usize) -> Self {
        FsmEncoder::new(
            alpha,
            vec![PrefixCode::idle()],
            vec![vec![0; alpha]],
            vec![vec![0; alpha]],
        )
        .expect("idle encoder is valid")
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn states(&self) -> usize {
        self.codes.len()
    }

    pub fn code(&self, s: usize) -> &PrefixCode {
        &self.codes[s]
    }

    pub fn codes(&self) -> &[PrefixCode] {
        &self.codes
    }

    pub fn output(&self, s: usize, x: usize) -> usize {
        self.output[s][x]
    }

    pub fn next(&self, s: usize, x: usize) -> usize {
        self.next[s][x]
    }

    pub fn output_table(&self) -> &[Vec<usize>] {
        &self.output
    }

    pub fn next_table(&self) -> &[Vec<usize>] {
        &self.next
    }
}

/// The result of running an encoder over a sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Encoding {
    pub codewords: Vec<Codeword>,
    /// Index of each codeword within the code of the state that emitted it.
    pub indices: Vec<usize>,
    /// `states[i]` is the state in which `x_i` was read.
    pub states: Vec<usize>,
    pub bits: u64,
}

impl Encoding {
    pub fn to_bitstream(&self) -> Bitstream {
        let mut b = Bitstream::new();
        for &w in &self.codewords {
            b.push_codeword(w);
        }
        b
    }
}

pub fn fsm_encode(x: &Sequence, enc: &FsmEncoder) -> Result<Encoding> {
    let mut s = 0;
    let mut out = Encoding {
        codewords: Vec::with_capacity(x.len()),
        indices: Vec::with_capacity(x.len()),
        states: Vec::with_capacity(x.len()),
        bits: 0,
    };
    for &xi in x.symbols() {
        if xi >= enc.alpha {
            return Err(Error::SymbolOutOfRange {
                symbol: xi,
                size: enc.alpha,
            });
        }
        let idx = enc.output[s][xi];
        let w = enc.codes[s].word(idx);
        out.states.push(s);
        out.indices.push(idx);
        out.codewords.push(w);
        out.bits += u64::from(w.len);
        s = enc.next[s][xi];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verbatim_binary() {
        let enc = FsmEncoder::verbatim(2).unwrap();
        let x = Sequence::from_digits(2, "0110").unwrap();
        let e = fsm_encode(&x, &enc).unwrap();
        assert_eq!(e.indices, vec![0, 1, 1, 0]);
        assert_eq!(e.bits, 4);
        assert_eq!(e.to_bitstream().to_bit_string(), "0110");
    }

    #[test]
    fn idle_costs_nothing() {
        let x = Sequence::from_digits(2, "0110101").unwrap();
        let e = fsm_encode(&x, &FsmEncoder::idle(2)).unwrap();
        assert_eq!(e.bits, 0);
        assert!(e.codewords.iter().all(Codeword::is_empty));
        assert_eq!(e.codewords.len(), 7);
    }

    #[test]
    fn parity_driven_encoder() {
        // State 0 sends one bit, state 1 idles; the state alternates.
        let enc = FsmEncoder::new(
            2,
            vec![PrefixCode::canonical(&[1, 1]).unwrap(), PrefixCode::idle()],
            vec![vec![0, 1], vec![0, 0]],
            vec![vec![1, 1], vec![0, 0]],
        )
        .unwrap();
        let x = Sequence::from_digits(2, "0101").unwrap();
        let e = fsm_encode(&x, &enc).unwrap();
        assert_eq!(e.states, vec![0, 1, 0, 1]);
        assert_eq!(e.bits, 2);
        assert_eq!(e.to_bitstream().to_bit_string(), "00");
    }

    #[test]
    fn malformed_tables_rejected() {
        let code = PrefixCode::canonical(&[1, 1]).unwrap();
        assert!(
            FsmEncoder::new(2, vec![code.clone()], vec![vec![0, 2]], vec![vec![0, 0]]).is_err()
        );
        assert!(FsmEncoder::new(2, vec![code], vec![vec![0, 1]], vec![vec![0, 1]]).is_err());
        assert!(FsmEncoder::new(
            2,
            vec![PrefixCode::new(vec![]).unwrap()],
            vec![vec![0, 0]],
            vec![vec![0, 0]]
        )
        .is_err());
    }
}
