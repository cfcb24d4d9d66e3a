use std::collections::HashMap;

use super::bits::Bitstream;
use super::code::{Codeword, PrefixCode};
use crate::error::{Error, Result};
use crate::model::Sequence;

/// The side-information-free part of a decoder state: it selects the code
/// and is updated by the codeword alone.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ParseMachine {
    /// Parse class of every full decoder state.
    pub class_of: Vec<usize>,
    /// `next[q][u]`.
    pub next: Vec<Vec<usize>>,
    pub codes: Vec<PrefixCode>,
}

/// `xhat_{i-d} = f'(s'_i, u_i, y_i)`, `s'_{i+1} = g'(s'_i, u_i, y_i)`,
/// starting in state 0. Tables are indexed `[state][codeword index][y]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FsmDecoder {
    beta: usize,
    gamma: usize,
    delay: usize,
    codes: Vec<PrefixCode>,
    next: Vec<Vec<Vec<usize>>>,
    recon: Vec<Vec<Vec<usize>>>,
    parse: ParseMachine,
}

impl FsmDecoder {
    /// Validates the tables and derives the parse machine. Fails unless
    /// the code and the parse-state update are independent of `y`.
    pub fn new(
        beta: usize,
        gamma: usize,
        delay: usize,
        codes: Vec<PrefixCode>,
        next: Vec<Vec<Vec<usize>>>,
        recon: Vec<Vec<Vec<usize>>>,
    ) -> Result<Self> {
        let m = codes.len();
        if m == 0 || beta == 0 || gamma == 0 {
            return Err(Error::InvalidMachine(
                "decoder needs a state and nonempty alphabets".into(),
            ));
        }
        if next.len() != m || recon.len() != m {
            return Err(Error::InvalidMachine(
                "table sizes disagree with the state count".into(),
            ));
        }
        for s in 0..m {
            let k = codes[s].len();
            if k == 0 {
                return Err(Error::InvalidMachine(format!(
                    "state {s} has an empty code"
                )));
            }
            if next[s].len() != k || recon[s].len() != k {
                return Err(Error::InvalidMachine(format!(
                    "state {s}: one row per codeword required"
                )));
            }
            for u in 0..k {
                if next[s][u].len() != beta || recon[s][u].len() != beta {
                    return Err(Error::InvalidMachine(format!(
                        "state {s}: rows need {beta} entries"
                    )));
                }
                if next[s][u].iter().any(|&t| t >= m) {
                    return Err(Error::InvalidMachine(format!(
                        "state {s}: next state out of range"
                    )));
                }
                if recon[s][u].iter().any(|&c| c >= gamma) {
                    return Err(Error::InvalidMachine(format!(
                        "state {s}: reconstruction out of range"
                    )));
                }
            }
        }
        let parse = derive_parse(&codes, &next)?;
        Ok(FsmDecoder {
            beta,
            gamma,
            delay,
            codes,
            next,
            recon,
            parse,
        })
    }

    /// One state, idle code, `xhat = map[y]`.
    pub fn memoryless_side(gamma: usize, map: &[usize]) -> Result<Self> {
        FsmDecoder::new(
            map.len(),
            gamma,
            0,
            vec![PrefixCode::idle()],
            vec![vec![vec![0; map.len()]]],
            vec![vec![map.to_vec()]],
        )
    }

    pub fn beta(&self) -> usize {
        self.beta
    }

    pub fn gamma(&self) -> usize {
        self.gamma
    }

    pub fn delay(&self) -> usize {
        self.delay
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

    pub fn next(&self, s: usize, u: usize, y: usize) -> usize {
        self.next[s][u][y]
    }

    pub fn recon(&self, s: usize, u: usize, y: usize) -> usize {
        self.recon[s][u][y]
    }

    pub fn next_table(&self) -> &[Vec<Vec<usize>>] {
        &self.next
    }

    pub fn recon_table(&self) -> &[Vec<Vec<usize>>] {
        &self.recon
    }

    pub fn parse_machine(&self) -> &ParseMachine {
        &self.parse
    }

    /// Same tables with a different delay.
    pub fn with_delay(&self, delay: usize) -> Self {
        FsmDecoder {
            delay,
            ..self.clone()
        }
    }
}

/// Coarsest partition of the states that refines "same code" and is a
/// congruence for the (u, y) transitions; factorizable iff the successor
/// class does not depend on y.
fn derive_parse(codes: &[PrefixCode], next: &[Vec<Vec<usize>>]) -> Result<ParseMachine> {
    let m = codes.len();
    let mut class = vec![0usize; m];
    {
        let mut ids: HashMap<&PrefixCode, usize> = HashMap::new();
        for s in 0..m {
            let n = ids.len();
            class[s] = *ids.entry(&codes[s]).or_insert(n);
        }
    }
    loop {
        let mut ids: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
        let mut refined = vec![0usize; m];
        for s in 0..m {
            let sig: Vec<usize> = next[s].iter().flatten().map(|&t| class[t]).collect();
            let n = ids.len();
            refined[s] = *ids.entry((class[s], sig)).or_insert(n);
        }
        let stable = ids.len() == class.iter().max().map_or(0, |c| c + 1);
        class = refined;
        if stable {
            break;
        }
    }
    // Renumber by first appearance so that state 0 has class 0.
    let mut order: Vec<Option<usize>> = vec![None; m];
    let mut count = 0;
    for c in class.iter_mut() {
        let id = *order[*c].get_or_insert_with(|| {
            count += 1;
            count - 1
        });
        *c = id;
    }
    let mut pnext: Vec<Vec<usize>> = vec![Vec::new(); count];
    let mut pcodes: Vec<Option<PrefixCode>> = vec![None; count];
    for s in 0..m {
        let q = class[s];
        let row: Vec<usize> = next[s]
            .iter()
            .enumerate()
            .map(|(u, ys)| {
                let t = class[ys[0]];
                if ys.iter().any(|&y| class[y] != t) {
                    Err(Error::InvalidMachine(format!(
                        "parse state of state {s} after codeword {u} depends on side information"
                    )))
                } else {
                    Ok(t)
                }
            })
            .collect::<Result<_>>()?;
        if pcodes[q].is_none() {
            pcodes[q] = Some(codes[s].clone());
            pnext[q] = row;
        }
    }
    Ok(ParseMachine {
        class_of: class,
        next: pnext,
        codes: pcodes
            .into_iter()
            .map(|c| c.expect("every class has a state"))
            .collect(),
    })
}

/// Recovers the codeword list from a bitstream; `y` only fixes the count.
pub fn parse_bitstream(b: &Bitstream, y: &Sequence, dec: &FsmDecoder) -> Result<Vec<Codeword>> {
    let parse = &dec.parse;
    let mut r = b.reader();
    let mut q = 0;
    let mut out = Vec::with_capacity(y.len());
    for _ in 0..y.len() {
        let code = &parse.codes[q];
        let idx = r.read_codeword(code.words())?;
        out.push(code.word(idx));
        q = parse.next[q][idx];
    }
    Ok(out)
}

/// Runs the decoder. The last `d` positions have no output and are filled
/// with symbol 0.
pub fn fsm_decode(u: &[Codeword], y: &Sequence, dec: &FsmDecoder) -> Result<Sequence> {
    if u.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: y.len(),
        });
    }
    let n = y.len();
    let d = dec.delay;
    let mut xhat = vec![0usize; n];
    let mut s = 0;
    for (i, (w, &yi)) in u.iter().zip(y.symbols()).enumerate() {
        if yi >= dec.beta {
            return Err(Error::SymbolOutOfRange {
                symbol: yi,
                size: dec.beta,
            });
        }
        let idx = dec.codes[s]
            .index_of(w)
            .ok_or(Error::UnknownCodeword { position: i })?;
        if i >= d {
            xhat[i - d] = dec.recon[s][idx][yi];
        }
        s = dec.next[s][idx][yi];
    }
    Sequence::new(dec.gamma, xhat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::encoder::{fsm_encode, FsmEncoder};

    fn binary_identity(delay: usize) -> FsmDecoder {
        FsmDecoder::new(
            2,
            2,
            delay,
            vec![PrefixCode::canonical(&[1, 1]).unwrap()],
            vec![vec![vec![0, 0], vec![0, 0]]],
            vec![vec![vec![0, 0], vec![1, 1]]],
        )
        .unwrap()
    }

    fn words(s: &str) -> Vec<Codeword> {
        s.chars()
            .map(|c| Codeword::parse(&c.to_string()).unwrap())
            .collect()
    }

    #[test]
    fn pass_through_codeword() {
        let y = Sequence::from_digits(2, "0000").unwrap();
        let xh = fsm_decode(&words("0110"), &y, &binary_identity(0)).unwrap();
        assert_eq!(xh.to_digits(), "0110");
    }

    #[test]
    fn pass_through_side_info() {
        let dec = FsmDecoder::memoryless_side(2, &[0, 1]).unwrap();
        let y = Sequence::from_digits(2, "111").unwrap();
        let xh = fsm_decode(&[Codeword::EMPTY; 3], &y, &dec).unwrap();
        assert_eq!(xh.to_digits(), "111");
    }

    #[test]
    fn delay_one_pads_tail() {
        let y = Sequence::from_digits(2, "101").unwrap();
        let xh = fsm_decode(&words("011"), &y, &binary_identity(1)).unwrap();
        assert_eq!(xh.to_digits(), "110");
    }

    #[test]
    fn unknown_codeword_reported() {
        let y = Sequence::from_digits(2, "00").unwrap();
        let u = vec![
            Codeword::parse("0").unwrap(),
            Codeword::parse("00").unwrap(),
        ];
        assert_eq!(
            fsm_decode(&u, &y, &binary_identity(0)),
            Err(Error::UnknownCodeword { position: 1 })
        );
    }

    #[test]
    fn parse_verbatim_and_idle() {
        let y = Sequence::from_digits(2, "0000").unwrap();
        let b = Bitstream::from_bytes(&[0b0110_0000], 4).unwrap();
        assert_eq!(
            parse_bitstream(&b, &y, &binary_identity(0)).unwrap(),
            words("0110")
        );
        let idle = FsmDecoder::memoryless_side(2, &[0, 1]).unwrap();
        assert_eq!(
            parse_bitstream(&Bitstream::new(), &y, &idle).unwrap(),
            vec![Codeword::EMPTY; 4]
        );
        let short = Bitstream::from_bytes(&[0], 3).unwrap();
        assert!(matches!(
            parse_bitstream(&short, &y, &binary_identity(0)),
            Err(Error::ParseFailure { .. })
        ));
    }

    #[test]
    fn parse_failure_on_prefix_mismatch() {
        let code = PrefixCode::canonical(&[1, 2]).unwrap(); // "0", "10"
        let dec = FsmDecoder::new(
            2,
            2,
            0,
            vec![code],
            vec![vec![vec![0, 0], vec![0, 0]]],
            vec![vec![vec![0, 0], vec![1, 1]]],
        )
        .unwrap();
        let y = Sequence::from_digits(2, "0").unwrap();
        let b = Bitstream::from_bytes(&[0b1100_0000], 2).unwrap();
        assert!(matches!(
            parse_bitstream(&b, &y, &dec),
            Err(Error::ParseFailure { bit: 0, .. })
        ));
    }

    #[test]
    fn side_dependent_code_is_rejected() {
        // State 0 moves to an idle state on y = 1 only.
        let err = FsmDecoder::new(
            2,
            2,
            0,
            vec![PrefixCode::canonical(&[1, 1]).unwrap(), PrefixCode::idle()],
            vec![vec![vec![0, 1], vec![0, 1]], vec![vec![0, 0]]],
            vec![vec![vec![0, 0], vec![0, 0]], vec![vec![0, 0]]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidMachine(_)));
    }

    #[test]
    fn side_dependent_state_with_shared_code_is_fine() {
        let code = PrefixCode::canonical(&[1, 1]).unwrap();
        let dec = FsmDecoder::new(
            2,
            2,
            0,
            vec![code.clone(), code],
            vec![vec![vec![0, 1], vec![1, 0]], vec![vec![1, 0], vec![0, 1]]],
            vec![vec![vec![0, 1], vec![1, 0]], vec![vec![1, 1], vec![0, 0]]],
        )
        .unwrap();
        let p = dec.parse_machine();
        assert_eq!(p.class_of, vec![0, 0]);
        assert_eq!(p.next, vec![vec![0, 0]]);
    }

    #[test]
    fn parse_states_follow_codewords() {
        // Two parse states: a 1-bit code, then idle, alternating.
        let enc = FsmEncoder::new(
            2,
            vec![PrefixCode::canonical(&[1, 1]).unwrap(), PrefixCode::idle()],
            vec![vec![0, 1], vec![0, 0]],
            vec![vec![1, 1], vec![0, 0]],
        )
        .unwrap();
        let dec = FsmDecoder::new(
            2,
            2,
            0,
            vec![PrefixCode::canonical(&[1, 1]).unwrap(), PrefixCode::idle()],
            vec![vec![vec![1, 1], vec![1, 1]], vec![vec![0, 0]]],
            vec![vec![vec![0, 0], vec![1, 1]], vec![vec![0, 1]]],
        )
        .unwrap();
        let x = Sequence::from_digits(2, "0110").unwrap();
        let e = fsm_encode(&x, &enc).unwrap();
        let y = Sequence::from_digits(2, "0110").unwrap();
        let u = parse_bitstream(&e.to_bitstream(), &y, &dec).unwrap();
        assert_eq!(u, e.codewords);
        assert_eq!(fsm_decode(&u, &y, &dec).unwrap().to_digits(), "0110");
    }
}
