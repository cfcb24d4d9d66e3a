//! Header accounting for the enumerate-and-describe wrapper, the
//! normalized header cost as the state count grows with `n`, and the
//! ingredients of the converse construction.

use num_bigint::BigUint;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::machine::{
    fsm_decode, fsm_encode, parse_bitstream, BitReader, Bitstream, FsmDecoder, PrefixCode,
};
use crate::model::{entropy, Channel, DistortionMatrix, Sequence};
use crate::rng::{sample_index, Seed};
use crate::search::{OperationalResult, SearchGrid, SearchIndex};

/// Upper end of the multiplier bracket for the maximum-entropy bisection.
pub const MU_MAX: f64 = 1e3;
/// Largest `m R` accepted by the converse generator.
pub const CONVERSE_MAX_BITS: f64 = 20.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaxEntSolution {
    pub distribution: Vec<f64>,
    /// Entropy of `distribution`, bits.
    pub phi: f64,
    /// `P(z)` is proportional to `2^(-mu rho0(z))`; infinite when the
    /// constraint forces the minimizers of `rho0`.
    pub mu: f64,
}

fn tilted(rho0: &[f64], mu: f64) -> Vec<f64> {
    let min = rho0.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = rho0.iter().map(|&r| (-mu * (r - min)).exp2()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

fn mean_cost(p: &[f64], rho0: &[f64]) -> f64 {
    p.iter().zip(rho0).map(|(a, b)| a * b).sum()
}

/// Maximum entropy over distributions with `E rho0(Z) <= delta`.
pub fn maxent_distribution(rho0: &[f64], delta: f64) -> Result<MaxEntSolution> {
    if rho0.is_empty() || rho0.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidParameter(
            "cost vector must be nonempty and finite".into(),
        ));
    }
    let min = rho0.iter().copied().fold(f64::INFINITY, f64::min);
    if delta.is_nan() || delta < min {
        return Err(Error::InfeasibleDelta { delta, min });
    }
    let uniform = tilted(rho0, 0.0);
    if mean_cost(&uniform, rho0) <= delta {
        return Ok(MaxEntSolution {
            phi: entropy(&uniform),
            distribution: uniform,
            mu: 0.0,
        });
    }
    let at_max = tilted(rho0, MU_MAX);
    if mean_cost(&at_max, rho0) > delta {
        // Only the minimizers of rho0 fit.
        let k = rho0.iter().filter(|&&r| r == min).count() as f64;
        let p: Vec<f64> = rho0
            .iter()
            .map(|&r| if r == min { 1.0 / k } else { 0.0 })
            .collect();
        return Ok(MaxEntSolution {
            phi: entropy(&p),
            distribution: p,
            mu: f64::INFINITY,
        });
    }
    // Mean cost decreases in mu; keep `hi` feasible.
    let (mut lo, mut hi) = (0.0f64, MU_MAX);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_cost(&tilted(rho0, mid), rho0) <= delta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let p = tilted(rho0, hi);
    Ok(MaxEntSolution {
        phi: entropy(&p),
        distribution: p,
        mu: hi,
    })
}

/// `K = sum_{k=1}^{alpha} (k-1)!`.
pub fn tree_count(alpha: usize) -> BigUint {
    let mut fact = BigUint::from(1u32);
    let mut total = BigUint::default();
    for k in 1..=alpha {
        if k > 1 {
            fact *= BigUint::from(k - 1);
        }
        total += &fact;
    }
    total
}

/// `ceil(log2 v)` for `v >= 1`.
fn ceil_log2(v: &BigUint) -> u64 {
    if *v <= BigUint::from(1u32) {
        0
    } else {
        (v - 1u32).bits()
    }
}

/// Exact `ceil(cells * log2 base)` when the power is small enough to form.
fn table_bits(cells: u128, base: u128) -> u128 {
    if base <= 1 || cells == 0 {
        return 0;
    }
    if cells <= 1 << 16 {
        let power = BigUint::from(base).pow(cells as u32);
        u128::from(ceil_log2(&power))
    } else {
        (cells as f64 * (base as f64).log2()).ceil() as u128
    }
}

/// Header length `M ceil(log2 K) + ceil(M a b log2 g) + ceil(M a b log2 M)`.
pub fn decoder_description_bits(states: u128, alpha: usize, beta: usize, gamma: usize) -> u128 {
    let cells = states * alpha as u128 * beta as u128;
    states * u128::from(ceil_log2(&tree_count(alpha)))
        + table_bits(cells, gamma as u128)
        + table_bits(cells, states)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThetaRow {
    pub n: u64,
    pub states: u128,
    pub header_bits: u128,
    pub per_letter: f64,
}

/// Normalized header cost with `M = floor(n^theta)`.
pub fn theta_sweep(
    theta: f64,
    ns: &[u64],
    alpha: usize,
    beta: usize,
    gamma: usize,
) -> Result<Vec<ThetaRow>> {
    if theta.is_nan() || theta <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "theta {theta} must be positive"
        )));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "n grid must be strictly increasing".into(),
        ));
    }
    Ok(ns
        .iter()
        .map(|&n| {
            let states = (((n as f64).powf(theta)) * (1.0 + 1e-12)).floor().max(1.0) as u128;
            let header_bits = decoder_description_bits(states, alpha, beta, gamma);
            ThetaRow {
                n,
                states,
                header_bits,
                per_letter: header_bits as f64 / n as f64,
            }
        })
        .collect())
}

/// Complete length multisets with at most `alpha` leaves, ordered by leaf
/// count and then lexicographically. The single leaf is the empty codeword.
pub fn complete_trees(alpha: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    if alpha >= 1 {
        out.push(vec![0]);
    }
    fn rec(
        prefix: &mut Vec<u8>,
        k: usize,
        min: u8,
        used: u128,
        full: u128,
        depth: u8,
        out: &mut Vec<Vec<u8>>,
    ) {
        if prefix.len() == k {
            if used == full {
                out.push(prefix.clone());
            }
            return;
        }
        for l in min..=depth {
            let w = full >> l;
            // The remaining leaves must still fit at the deepest level.
            let left = (k - prefix.len() - 1) as u128;
            if used + w <= full && used + w + left * (full >> depth) <= full {
                prefix.push(l);
                rec(prefix, k, l, used + w, full, depth, out);
                prefix.pop();
            }
        }
    }
    for k in 2..=alpha {
        let depth = (k - 1) as u8;
        rec(&mut Vec::new(), k, 1, 0, 1u128 << depth, depth, &mut out);
    }
    out
}

fn tree_index(code: &PrefixCode, trees: &[Vec<u8>]) -> Result<usize> {
    let mut lengths = code.lengths();
    lengths.sort_unstable();
    trees
        .iter()
        .position(|t| *t == lengths)
        .ok_or_else(|| Error::InvalidCode(format!("lengths {lengths:?} are not a complete tree")))
}

fn tree_field_bits(alpha: usize) -> Result<u64> {
    let k = tree_count(alpha);
    if BigUint::from(complete_trees(alpha).len()) > k {
        return Err(Error::CapExceeded(format!(
            "more complete trees than K for alpha = {alpha}"
        )));
    }
    Ok(ceil_log2(&k))
}

/// Decoder description, padded to `states` states: tree index per state,
/// then the reconstruction table and the next-state table as base-`gamma`
/// and base-`states` numbers over `(state, u < alpha, y)`, MSB first.
pub fn describe_decoder(dec: &FsmDecoder, states: usize, alpha: usize) -> Result<Bitstream> {
    if dec.states() > states {
        return Err(Error::InvalidParameter(format!(
            "decoder has more than {states} states"
        )));
    }
    let (beta, gamma) = (dec.beta(), dec.gamma());
    let trees = complete_trees(alpha);
    let width = tree_field_bits(alpha)?;
    let mut b = Bitstream::new();
    for s in 0..states {
        let idx = if s < dec.states() {
            tree_index(dec.code(s), &trees)?
        } else {
            0
        };
        b.push_uint(idx as u64, width as u32);
    }
    let mut recon = BigUint::default();
    let mut next = BigUint::default();
    for s in 0..states {
        for u in 0..alpha {
            for y in 0..beta {
                let (r, t) = if s < dec.states() && u < dec.code(s).len() {
                    (dec.recon(s, u, y), dec.next(s, u, y))
                } else {
                    (0, 0)
                };
                recon = recon * BigUint::from(gamma) + BigUint::from(r);
                next = next * BigUint::from(states) + BigUint::from(t);
            }
        }
    }
    let cells = (states * alpha * beta) as u128;
    b.push_biguint(&recon, table_bits(cells, gamma as u128) as u64);
    b.push_biguint(&next, table_bits(cells, states as u128) as u64);
    Ok(b)
}

fn digits(mut v: BigUint, base: usize, count: usize) -> Vec<usize> {
    let mut out = vec![0usize; count];
    let base_big = BigUint::from(base);
    for slot in out.iter_mut().rev() {
        let r = &v % &base_big;
        *slot = r.to_u64_digits().first().copied().unwrap_or(0) as usize;
        v /= &base_big;
    }
    out
}

/// Reads a description written by [`describe_decoder`].
pub fn read_decoder(
    r: &mut BitReader<'_>,
    states: usize,
    alpha: usize,
    beta: usize,
    gamma: usize,
    delay: usize,
) -> Result<FsmDecoder> {
    let trees = complete_trees(alpha);
    let width = tree_field_bits(alpha)?;
    let mut codes = Vec::with_capacity(states);
    for _ in 0..states {
        let idx = r.read_uint(width as u32)? as usize;
        let tree = trees
            .get(idx)
            .ok_or_else(|| Error::HeaderMismatch(format!("tree index {idx} out of range")))?;
        codes.push(PrefixCode::canonical(tree)?);
    }
    let cells = states * alpha * beta;
    let recon = digits(
        r.read_biguint(table_bits(cells as u128, gamma as u128) as u64)?,
        gamma,
        cells,
    );
    let next = digits(
        r.read_biguint(table_bits(cells as u128, states as u128) as u64)?,
        states,
        cells,
    );
    let at = |s: usize, u: usize, y: usize| (s * alpha + u) * beta + y;
    let table = |v: &[usize]| -> Vec<Vec<Vec<usize>>> {
        (0..states)
            .map(|s| {
                (0..codes[s].len())
                    .map(|u| (0..beta).map(|y| v[at(s, u, y)]).collect())
                    .collect()
            })
            .collect()
    };
    FsmDecoder::new(
        beta,
        gamma,
        delay,
        codes.clone(),
        table(&next),
        table(&recon),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum WrapperOutcome {
    Encoded {
        #[serde(skip)]
        stream: Bitstream,
        header_bits: u64,
        payload_bits: u64,
        result: OperationalResult,
    },
    /// No pair of the grid meets `(R, delta)`.
    NotAchievable { best_distortion: f64 },
}

/// Searches the grid for a pair within `floor(nR)` bits and distortion
/// `delta` at exactly the grid's delay, and sends the decoder's
/// description followed by the encoder's bits. The grid must use complete
/// codes only, so that every state's code is a tree.
pub fn wrapper_encode(
    x: &Sequence,
    rate: f64,
    delta: f64,
    grid: &SearchGrid,
    ch: &Channel,
    rho: &DistortionMatrix,
) -> Result<WrapperOutcome> {
    if !grid.complete_codes_only {
        return Err(Error::InvalidParameter(
            "the wrapper needs a complete-codes grid".into(),
        ));
    }
    let index = SearchIndex::new(grid)?;
    let keys = index.keys(x)?;
    let profile = keys.profile(ch, rho)?;
    let result = profile.query_exact_delay(rate, grid.states, grid.delay)?;
    if !result.feasible || result.distortion > delta + 1e-12 {
        return Ok(WrapperOutcome::NotAchievable {
            best_distortion: result.distortion,
        });
    }
    let (enc, dec) = (
        result.encoder.as_ref().expect("feasible"),
        result.decoder.as_ref().expect("feasible"),
    );
    let mut stream = describe_decoder(dec, grid.states, grid.alpha)?;
    let header_bits = stream.len() as u64;
    let payload = fsm_encode(x, enc)?;
    stream.extend(&payload.to_bitstream());
    Ok(WrapperOutcome::Encoded {
        stream,
        header_bits,
        payload_bits: payload.bits,
        result,
    })
}

/// Reads the decoder description and runs the decoder on the payload.
pub fn wrapper_decode(
    stream: &Bitstream,
    y: &Sequence,
    grid: &SearchGrid,
) -> Result<(FsmDecoder, Sequence)> {
    let mut r = stream.reader();
    let dec = read_decoder(
        &mut r,
        grid.states,
        grid.alpha,
        grid.beta,
        grid.gamma,
        grid.delay,
    )?;
    let mut payload = Bitstream::new();
    while r.remaining() > 0 {
        payload.push_bit(r.read_bit()?);
    }
    let u = parse_bitstream(&payload, y, &dec)?;
    let xhat = fsm_decode(&u, y, &dec)?;
    Ok((dec, xhat))
}

/// The decoder padded with idle states to `states` states, as it comes
/// back from its description.
pub fn pad_decoder(dec: &FsmDecoder, states: usize) -> Result<FsmDecoder> {
    let mut codes = dec.codes().to_vec();
    let mut next = dec.next_table().to_vec();
    let mut recon = dec.recon_table().to_vec();
    while codes.len() < states {
        codes.push(PrefixCode::idle());
        next.push(vec![vec![0; dec.beta()]]);
        recon.push(vec![vec![0; dec.beta()]]);
    }
    FsmDecoder::new(dec.beta(), dec.gamma(), dec.delay(), codes, next, recon)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConverseSample {
    pub x: Vec<usize>,
    pub alpha: usize,
    pub codebook: Vec<Vec<usize>>,
    /// Codebook member used by every block.
    pub choices: Vec<usize>,
    pub noise: Vec<usize>,
}

impl ConverseSample {
    pub fn sequence(&self) -> Sequence {
        Sequence::new(self.alpha, self.x.clone()).expect("symbols are reduced mod alpha")
    }
}

/// Blocks `u + z (mod alpha)` with `u` drawn uniformly from a random
/// codebook of `floor(2^(mR))` words of length `m` and `z` i.i.d. from the
/// maximum-entropy noise for `(rho0, delta)`.
pub fn converse_process_generate(
    m: usize,
    blocks: usize,
    rate: f64,
    delta: f64,
    rho0: &[f64],
    seed: Seed,
) -> Result<ConverseSample> {
    if m == 0 {
        return Err(Error::InvalidParameter(
            "block length must be positive".into(),
        ));
    }
    if rate.is_nan() || rate < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "rate {rate} must be nonnegative"
        )));
    }
    let bits = m as f64 * rate;
    if bits > CONVERSE_MAX_BITS {
        return Err(Error::CodebookTooLarge { bits });
    }
    let alpha = rho0.len();
    let noise_law = maxent_distribution(rho0, delta)?.distribution;
    let size = (bits.exp2() * (1.0 + 1e-12)).floor().max(1.0) as usize;
    let mut rng = seed.derive("codebook", 0).generator();
    let codebook: Vec<Vec<usize>> = (0..size)
        .map(|_| (0..m).map(|_| rng.random_range(0..alpha)).collect())
        .collect();
    let mut rng = seed.derive("blocks", 0).generator();
    let mut x = Vec::with_capacity(m * blocks);
    let mut choices = Vec::with_capacity(blocks);
    let mut noise = Vec::with_capacity(m * blocks);
    for _ in 0..blocks {
        let c = rng.random_range(0..size);
        choices.push(c);
        for &u in &codebook[c] {
            let z = sample_index(&mut rng, &noise_law);
            noise.push(z);
            x.push((u + z) % alpha);
        }
    }
    Ok(ConverseSample {
        x,
        alpha,
        codebook,
        choices,
        noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::expected_distortion_exact;
    use crate::model::h2;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn header_examples() {
        assert_eq!(decoder_description_bits(2, 2, 2, 2), 18);
        assert_eq!(decoder_description_bits(1, 2, 2, 2), 5);
        for m in 1..5u128 {
            let full = decoder_description_bits(m, 3, 2, 4);
            let no_recon = decoder_description_bits(m, 3, 2, 1);
            assert_eq!(full - no_recon, m * 6 * 2);
        }
    }

    #[test]
    fn header_formula_against_floats() {
        // Independent evaluation of the three terms in floating point, at
        // sizes where no term sits on an integer boundary.
        for (m, a, b, g) in [
            (3u128, 2usize, 2usize, 3usize),
            (5, 3, 2, 3),
            (7, 2, 3, 5),
            (6, 4, 2, 3),
        ] {
            let k: f64 = (1..=a).map(|k| (1..k).product::<usize>() as f64).sum();
            let c = (m as usize * a * b) as f64;
            let expect = m as f64 * k.log2().ceil()
                + (c * (g as f64).log2()).ceil()
                + (c * (m as f64).log2()).ceil();
            assert_eq!(
                decoder_description_bits(m, a, b, g),
                expect as u128,
                "{m} {a} {b} {g}"
            );
        }
    }

    #[test]
    fn tree_counts() {
        assert_eq!(tree_count(1), BigUint::from(1u32));
        assert_eq!(tree_count(2), BigUint::from(2u32));
        assert_eq!(tree_count(4), BigUint::from(1u32 + 1 + 2 + 6));
        assert_eq!(complete_trees(2), vec![vec![0], vec![1, 1]]);
        assert_eq!(
            complete_trees(4),
            vec![
                vec![0],
                vec![1, 1],
                vec![1, 2, 2],
                vec![1, 2, 3, 3],
                vec![2, 2, 2, 2]
            ]
        );
        for alpha in 1..=7 {
            for t in complete_trees(alpha) {
                assert!(PrefixCode::canonical(&t).unwrap().is_complete());
            }
        }
    }

    #[test]
    fn maxent_examples() {
        let ham = [0.0, 1.0];
        let s = maxent_distribution(&ham, 0.5).unwrap();
        assert_eq!(s.mu, 0.0);
        assert!((s.phi - 1.0).abs() < 1e-15);
        let s = maxent_distribution(&ham, 0.0).unwrap();
        assert_eq!(s.distribution, vec![1.0, 0.0]);
        assert_eq!(s.phi, 0.0);
        for d in [0.05, 0.11, 0.25, 0.5] {
            let s = maxent_distribution(&ham, d).unwrap();
            assert!((s.phi - h2(d)).abs() < 1e-9, "{d}");
            assert!(mean_cost(&s.distribution, &ham) <= d + 1e-9);
        }
        assert!(matches!(
            maxent_distribution(&ham, -0.1),
            Err(Error::InfeasibleDelta { .. })
        ));
    }

    #[test]
    fn maxent_ternary_closed_form() {
        // rho0 = (0, 1, 1): P* = (1 - D, D/2, D/2), phi = h2(D) + D.
        for d in [0.1, 0.3, 0.6] {
            let s = maxent_distribution(&[0.0, 1.0, 1.0], d).unwrap();
            assert!((s.phi - (h2(d) + d)).abs() < 1e-9);
        }
    }

    #[test]
    fn theta_sweep_monotone() {
        let ns = [1_000, 10_000, 100_000, 1_000_000, 10_000_000];
        let low = theta_sweep(0.5, &ns, 2, 2, 2).unwrap();
        assert!(low.windows(2).all(|w| w[1].per_letter < w[0].per_letter));
        let high = theta_sweep(1.5, &ns, 2, 2, 2).unwrap();
        assert!(high.windows(2).all(|w| w[1].per_letter > w[0].per_letter));
        let one = theta_sweep(1.0, &ns, 2, 2, 2).unwrap();
        assert!(one.windows(2).all(|w| w[1].per_letter > w[0].per_letter));
        assert_eq!(low[3].states, 1000);
    }

    #[test]
    fn wrapper_identity_channel_is_header_only() {
        let grid = SearchGrid::binary(1, 0, 1).unwrap().complete_only();
        let x = Sequence::from_digits(2, "0110100").unwrap();
        let out = wrapper_encode(
            &x,
            0.0,
            0.0,
            &grid,
            &Channel::identity(2),
            &DistortionMatrix::hamming(2),
        )
        .unwrap();
        let WrapperOutcome::Encoded {
            stream,
            header_bits,
            payload_bits,
            ..
        } = out
        else {
            panic!("not achieved")
        };
        assert_eq!(header_bits, 5);
        assert_eq!(payload_bits, 0);
        assert_eq!(stream.len(), 5);
        let (_, xh) = wrapper_decode(&stream, &x, &grid).unwrap();
        assert_eq!(xh, x);
    }

    #[test]
    fn wrapper_useless_channel_not_achievable() {
        let grid = SearchGrid::binary(2, 0, 1).unwrap().complete_only();
        let x = Sequence::from_digits(2, "0110").unwrap();
        let out = wrapper_encode(
            &x,
            0.0,
            0.0,
            &grid,
            &Channel::uniform(2, 2),
            &DistortionMatrix::hamming(2),
        )
        .unwrap();
        assert!(matches!(out, WrapperOutcome::NotAchievable { .. }));
    }

    #[test]
    fn wrapper_accounting_and_round_trip() {
        let rho = DistortionMatrix::hamming(2);
        let ch = Channel::bsc(0.2).unwrap();
        for (states, delay) in [(1, 0), (2, 0), (2, 1)] {
            let grid = SearchGrid::binary(states, delay, 2)
                .unwrap()
                .complete_only();
            let index = SearchIndex::new(&grid).unwrap();
            for seed in 0..6u64 {
                let mut rng = Seed(seed).generator();
                let x =
                    Sequence::new(2, (0..10).map(|_| rng.random_range(0..2)).collect()).unwrap();
                let keys = index.keys(&x).unwrap();
                let profile = keys.profile(&ch, &rho).unwrap();
                for (rate, delta) in [(0.5, 0.15), (1.0, 0.0), (0.3, 0.2), (0.0, 0.1)] {
                    let best = profile.query_exact_delay(rate, states, delay).unwrap();
                    let feasible = best.feasible && best.distortion <= delta + 1e-12;
                    let out = wrapper_encode(&x, rate, delta, &grid, &ch, &rho).unwrap();
                    match out {
                        WrapperOutcome::Encoded {
                            stream,
                            header_bits,
                            payload_bits,
                            result,
                        } => {
                            assert!(feasible);
                            assert_eq!(
                                u128::from(header_bits),
                                decoder_description_bits(states as u128, 2, 2, 2)
                            );
                            assert_eq!(stream.len() as u64, header_bits + payload_bits);
                            let y = crate::model::sample_side_info(&x, &ch, Seed(seed)).unwrap();
                            let (dec, _) = wrapper_decode(&stream, &y, &grid).unwrap();
                            let witness = result.decoder.unwrap();
                            assert_eq!(dec, pad_decoder(&witness, states).unwrap());
                            let enc = result.encoder.unwrap();
                            let exact =
                                expected_distortion_exact(&x, &enc, &dec, &ch, &rho).unwrap();
                            assert!(exact <= delta + 1e-12);
                        }
                        WrapperOutcome::NotAchievable { .. } => assert!(!feasible),
                    }
                }
            }
        }
    }

    #[test]
    fn wrapper_requires_complete_codes() {
        let grid = SearchGrid::binary(1, 0, 1).unwrap();
        let x = Sequence::from_digits(2, "01").unwrap();
        assert!(wrapper_encode(
            &x,
            0.0,
            0.0,
            &grid,
            &Channel::identity(2),
            &DistortionMatrix::hamming(2)
        )
        .is_err());
    }

    #[test]
    fn converse_examples() {
        let ham = [0.0, 1.0];
        let s = converse_process_generate(6, 10, 0.5, 0.0, &ham, Seed(1)).unwrap();
        assert_eq!(s.codebook.len(), 8);
        for (i, &c) in s.choices.iter().enumerate() {
            assert_eq!(&s.x[i * 6..(i + 1) * 6], s.codebook[c].as_slice());
        }
        let s = converse_process_generate(5, 7, 0.0, 0.2, &ham, Seed(2)).unwrap();
        assert_eq!(s.codebook.len(), 1);
        assert!(s.choices.iter().all(|&c| c == 0));
        assert!(matches!(
            converse_process_generate(41, 1, 0.5, 0.1, &ham, Seed(0)),
            Err(Error::CodebookTooLarge { .. })
        ));
    }

    #[test]
    fn converse_noise_weight_concentrates() {
        // Per-block noise weight of 8 Bernoulli(0.11) letters, averaged over
        // 32 blocks: mean 0.11, standard deviation sqrt(0.11*0.89/256) ~ 0.02,
        // so [0.06, 0.16] is about 2.5 standard deviations each side.
        let mut inside = 0;
        for seed in 0..100 {
            let s = converse_process_generate(8, 32, 0.5, 0.11, &[0.0, 1.0], Seed(seed)).unwrap();
            let w = s.noise.iter().sum::<usize>() as f64 / s.noise.len() as f64;
            inside += usize::from((0.06..=0.16).contains(&w));
        }
        assert!(inside >= 97, "{inside}");
    }

    proptest! {
        #[test]
        fn phi_concave_nondecreasing(costs in proptest::collection::vec(0.0f64..3.0, 2..5)) {
            let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
            let grid: Vec<f64> = (0..=20).map(|i| min + i as f64 * 0.1).collect();
            let phi: Vec<f64> = grid.iter().map(|&d| maxent_distribution(&costs, d).unwrap().phi).collect();
            for w in phi.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-9);
            }
            for w in phi.windows(3) {
                prop_assert!(w[1] >= 0.5 * (w[0] + w[2]) - 1e-7);
            }
        }

        #[test]
        fn description_round_trips(seed in 0u64..500) {
            let mut rng = Seed(seed).generator();
            let states = rng.random_range(1..=3usize);
            let (alpha, beta, gamma) = (3usize, 2usize, 3usize);
            let trees = complete_trees(alpha);
            let codes: Vec<PrefixCode> =
                (0..states).map(|_| PrefixCode::canonical(&trees[rng.random_range(0..trees.len())]).unwrap()).collect();
            let table = |rng: &mut crate::rng::Generator, base: usize| -> Vec<Vec<Vec<usize>>> {
                codes.iter().map(|c| (0..c.len()).map(|_| (0..beta).map(|_| rng.random_range(0..base)).collect()).collect()).collect()
            };
            let next = table(&mut rng, states);
            let recon = table(&mut rng, gamma);
            let Ok(dec) = FsmDecoder::new(beta, gamma, 0, codes.clone(), next, recon) else {
                return Ok(());
            };
            let b = describe_decoder(&dec, states, alpha).unwrap();
            prop_assert_eq!(b.len() as u128, decoder_description_bits(states as u128, alpha, beta, gamma));
            let back = read_decoder(&mut b.reader(), states, alpha, beta, gamma, 0).unwrap();
            prop_assert_eq!(back, dec);
        }
    }
}
