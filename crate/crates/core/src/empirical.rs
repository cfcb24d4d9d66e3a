//! Block empirical distributions, their join with the channel, and the
//! type header.
//!
//! Blocks are non-overlapping. A block `a_1..a_l` is indexed as the base-alpha
//! number with `a_1` most significant.
//!
//! The type header is a flag bit followed by either
//! * flag 0: the lexicographic rank of the count vector among all
//!   compositions of `N = n/l` into `K = alpha^l` parts, in exactly
//!   `ceil(log2 C(N+K-1, K-1))` bits, or
//! * flag 1 (rank does not fit in 64 bits): the first `K-1` counts in fixed
//!   fields of `ceil(log2(N+1))` bits; the last count is implied.

use crate::error::{Error, Result};
use crate::machine::{BitReader, Bitstream};
use crate::model::{Channel, Sequence, STOCHASTIC_TOL};

/// Cap on dense table entries.
pub const TABLE_CAP: u128 = 1 << 24;

/// `base^exp`, or `TableTooLarge` above the cap.
pub fn checked_table_size(base: usize, exp: usize) -> Result<usize> {
    let mut v: u128 = 1;
    for _ in 0..exp {
        v = v.saturating_mul(base as u128);
        if v > TABLE_CAP {
            return Err(Error::TableTooLarge {
                entries: v,
                cap: TABLE_CAP,
            });
        }
    }
    Ok(v as usize)
}

pub fn block_index(symbols: &[usize], alpha: usize) -> usize {
    symbols.iter().fold(0, |acc, &s| acc * alpha + s)
}

pub fn block_symbols(mut index: usize, block: usize, alpha: usize) -> Vec<usize> {
    let mut out = vec![0; block];
    for slot in out.iter_mut().rev() {
        *slot = index % alpha;
        index /= alpha;
    }
    out
}

/// Counts of the `n/l` non-overlapping blocks.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BlockDistribution {
    block: usize,
    alpha: usize,
    counts: Vec<u64>,
    total: u64,
}

impl BlockDistribution {
    pub fn from_counts(block: usize, alpha: usize, counts: Vec<u64>) -> Result<Self> {
        let size = checked_table_size(alpha, block)?;
        if block == 0 || counts.len() != size {
            return Err(Error::Shape(format!(
                "need {size} counts for blocks of length {block}"
            )));
        }
        let total = counts.iter().sum();
        Ok(BlockDistribution {
            block,
            alpha,
            counts,
            total,
        })
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Number of blocks `n/l`.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn prob(&self, a: usize) -> f64 {
        self.counts[a] as f64 / self.total as f64
    }

    pub fn probs(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|a| self.prob(a)).collect()
    }
}

pub fn block_empirical(x: &Sequence, block: usize) -> Result<BlockDistribution> {
    if block == 0 {
        return Err(Error::InvalidParameter(
            "block length must be at least 1".into(),
        ));
    }
    if !x.len().is_multiple_of(block) {
        return Err(Error::LengthNotDivisible {
            len: x.len(),
            block,
        });
    }
    let alpha = x.alphabet().size();
    let mut counts = vec![0u64; checked_table_size(alpha, block)?];
    for chunk in x.symbols().chunks(block) {
        counts[block_index(chunk, alpha)] += 1;
    }
    BlockDistribution::from_counts(block, alpha, counts)
}

/// `P(a^l, b^l) = P(a^l) prod P(b_i | a_i)`, dense.
#[derive(Clone, Debug, PartialEq)]
pub struct JointBlockDistribution {
    block: usize,
    alpha: usize,
    beta: usize,
    marginal: Vec<f64>,
    /// `cond[a * beta^l + b] = P(b^l | a^l)`.
    cond: Vec<f64>,
    channel: Channel,
}

impl JointBlockDistribution {
    /// Joins an arbitrary block marginal (e.g. a product source) with the channel.
    pub fn from_marginal(block: usize, marginal: Vec<f64>, ch: &Channel) -> Result<Self> {
        let alpha = ch.inputs();
        let beta = ch.outputs();
        let ka = checked_table_size(alpha, block)?;
        let kb = checked_table_size(beta, block)?;
        let entries = ka as u128 * kb as u128;
        if entries > TABLE_CAP {
            return Err(Error::TableTooLarge {
                entries,
                cap: TABLE_CAP,
            });
        }
        if marginal.len() != ka {
            return Err(Error::Shape(format!("marginal needs {ka} entries")));
        }
        if let Some(i) = marginal.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::NegativeEntry {
                row: 0,
                col: i,
                value: marginal[i],
            });
        }
        let sum: f64 = marginal.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::NonStochasticRow { row: 0, sum });
        }
        let mut cond = vec![0.0; ka * kb];
        for a in 0..ka {
            let xa = block_symbols(a, block, alpha);
            for b in 0..kb {
                let yb = block_symbols(b, block, beta);
                cond[a * kb + b] = xa.iter().zip(&yb).map(|(&x, &y)| ch.prob(x, y)).product();
            }
        }
        Ok(JointBlockDistribution {
            block,
            alpha,
            beta,
            marginal,
            cond,
            channel: ch.clone(),
        })
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn beta(&self) -> usize {
        self.beta
    }

    pub fn source_blocks(&self) -> usize {
        self.marginal.len()
    }

    pub fn side_blocks(&self) -> usize {
        self.cond.len() / self.marginal.len()
    }

    pub fn marginal(&self) -> &[f64] {
        &self.marginal
    }

    pub fn channel(&self) -> &Channel {
        &self.channel
    }

    pub fn cond(&self, a: usize, b: usize) -> f64 {
        self.cond[a * self.side_blocks() + b]
    }

    pub fn cond_row(&self, a: usize) -> &[f64] {
        let kb = self.side_blocks();
        &self.cond[a * kb..(a + 1) * kb]
    }

    pub fn joint(&self, a: usize, b: usize) -> f64 {
        self.marginal[a] * self.cond(a, b)
    }

    /// Blocks with positive probability, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.marginal.len())
            .filter(|&a| self.marginal[a] > 0.0)
            .collect()
    }

    /// `sum_b P(a, b)` for each `a`.
    pub fn source_marginal_check(&self) -> f64 {
        (0..self.source_blocks())
            .map(|a| {
                let row: f64 = (0..self.side_blocks()).map(|b| self.joint(a, b)).sum();
                (row - self.marginal[a]).abs()
            })
            .fold(0.0, f64::max)
    }
}

pub fn join_with_channel(p: &BlockDistribution, ch: &Channel) -> Result<JointBlockDistribution> {
    if p.alpha() > ch.inputs() {
        return Err(Error::InvalidParameter(format!(
            "source alphabet {} exceeds channel inputs {}",
            p.alpha(),
            ch.inputs()
        )));
    }
    if p.alpha() != ch.inputs() {
        // Re-express the counts over the channel's input alphabet.
        let size = checked_table_size(ch.inputs(), p.block())?;
        let mut counts = vec![0u64; size];
        for (a, &c) in p.counts().iter().enumerate() {
            counts[block_index(&block_symbols(a, p.block(), p.alpha()), ch.inputs())] += c;
        }
        let p = BlockDistribution::from_counts(p.block(), ch.inputs(), counts)?;
        return JointBlockDistribution::from_marginal(p.block(), p.probs(), ch);
    }
    JointBlockDistribution::from_marginal(p.block(), p.probs(), ch)
}

/// Block marginal of a memoryless source with letter probabilities `p`.
pub fn dms_block_marginal(p: &[f64], block: usize) -> Result<Vec<f64>> {
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL || p.iter().any(|&v| v < 0.0) {
        return Err(Error::NonStochasticRow { row: 0, sum });
    }
    let size = checked_table_size(p.len(), block)?;
    Ok((0..size)
        .map(|a| {
            block_symbols(a, block, p.len())
                .iter()
                .map(|&s| p[s])
                .product()
        })
        .collect())
}

fn binomial(n: u128, k: u128) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c.checked_mul(n - i)? / (i + 1);
    }
    Some(c)
}

/// Number of compositions of `total` into `parts` nonnegative parts, if it
/// fits in 64 bits.
pub fn composition_count(total: u64, parts: u64) -> Option<u64> {
    if parts == 0 {
        return Some(u64::from(total == 0));
    }
    binomial(total as u128 + parts as u128 - 1, parts as u128 - 1)
        .and_then(|c| u64::try_from(c).ok())
}

fn bit_width(count: u64) -> u32 {
    // Bits needed to write any of `count` values.
    if count <= 1 {
        0
    } else {
        64 - (count - 1).leading_zeros()
    }
}

/// Lexicographic rank of a composition.
pub fn composition_rank(counts: &[u64]) -> Result<u64> {
    let k = counts.len() as u64;
    let mut remaining: u64 = counts.iter().sum();
    composition_count(remaining, k).ok_or(Error::RankOverflow)?;
    let mut rank: u64 = 0;
    for (i, &c) in counts
        .iter()
        .enumerate()
        .take(counts.len().saturating_sub(1))
    {
        let rest = k - i as u64 - 1;
        for v in 0..c {
            rank += composition_count(remaining - v, rest).ok_or(Error::RankOverflow)?;
        }
        remaining -= c;
    }
    Ok(rank)
}

pub fn composition_unrank(mut rank: u64, total: u64, parts: usize) -> Result<Vec<u64>> {
    let all = composition_count(total, parts as u64).ok_or(Error::RankOverflow)?;
    if rank >= all {
        return Err(Error::HeaderMismatch(format!(
            "rank {rank} out of range {all}"
        )));
    }
    let mut out = vec![0u64; parts];
    let mut remaining = total;
    for i in 0..parts.saturating_sub(1) {
        let rest = (parts - i - 1) as u64;
        let mut v = 0;
        loop {
            let block = composition_count(remaining - v, rest).ok_or(Error::RankOverflow)?;
            if rank < block {
                break;
            }
            rank -= block;
            v += 1;
        }
        out[i] = v;
        remaining -= v;
    }
    if parts > 0 {
        out[parts - 1] = remaining;
    }
    Ok(out)
}

/// Exact header length in bits for the given parameters.
pub fn type_header_bits(n: u64, block: usize, alpha: usize) -> Result<u64> {
    let parts = checked_table_size(alpha, block)? as u64;
    let total = n / block as u64;
    Ok(1 + match composition_count(total, parts) {
        Some(c) => u64::from(bit_width(c)),
        None => (parts - 1) * u64::from(bit_width(total + 1)),
    })
}

pub fn encode_type(p: &BlockDistribution, n: u64) -> Result<Bitstream> {
    if n != p.total() * p.block() as u64 {
        return Err(Error::HeaderMismatch(format!(
            "{} blocks of length {} do not make n = {n}",
            p.total(),
            p.block()
        )));
    }
    let parts = p.counts().len() as u64;
    let mut b = Bitstream::new();
    match composition_count(p.total(), parts) {
        Some(all) => {
            b.push_bit(false);
            b.push_uint(composition_rank(p.counts())?, bit_width(all));
        }
        None => {
            b.push_bit(true);
            let w = bit_width(p.total() + 1);
            for &c in &p.counts()[..p.counts().len() - 1] {
                b.push_uint(c, w);
            }
        }
    }
    Ok(b)
}

pub fn decode_type(b: &Bitstream, n: u64, block: usize, alpha: usize) -> Result<BlockDistribution> {
    read_type(&mut b.reader(), n, block, alpha)
}

/// Reads a type header from the front of a stream.
pub fn read_type(
    r: &mut BitReader<'_>,
    n: u64,
    block: usize,
    alpha: usize,
) -> Result<BlockDistribution> {
    if block == 0 || !n.is_multiple_of(block as u64) {
        return Err(Error::LengthNotDivisible {
            len: n as usize,
            block,
        });
    }
    let parts = checked_table_size(alpha, block)?;
    let total = n / block as u64;
    let fallback = r.read_bit()?;
    let counts = match (fallback, composition_count(total, parts as u64)) {
        (false, Some(all)) => composition_unrank(r.read_uint(bit_width(all))?, total, parts)?,
        (true, None) => {
            let w = bit_width(total + 1);
            let mut counts = Vec::with_capacity(parts);
            let mut sum = 0u64;
            for _ in 0..parts - 1 {
                let c = r.read_uint(w)?;
                sum = sum.saturating_add(c);
                counts.push(c);
            }
            if sum > total {
                return Err(Error::HeaderMismatch(format!(
                    "counts sum to {sum} > {total}"
                )));
            }
            counts.push(total - sum);
            counts
        }
        (flag, _) => {
            return Err(Error::HeaderMismatch(format!(
                "format flag {} does not match parameters",
                u8::from(flag)
            )))
        }
    };
    BlockDistribution::from_counts(block, alpha, counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(s: &str) -> Sequence {
        Sequence::from_digits(2, s).unwrap()
    }

    #[test]
    fn block_examples() {
        let p = block_empirical(&seq("01010101"), 2).unwrap();
        assert_eq!(p.probs(), vec![0.0, 1.0, 0.0, 0.0]);
        let p = block_empirical(&seq("0011"), 2).unwrap();
        assert_eq!(p.probs(), vec![0.5, 0.0, 0.0, 0.5]);
        let p = block_empirical(&seq("00011011"), 2).unwrap();
        assert_eq!(p.probs(), vec![0.25; 4]);
        assert_eq!(
            block_empirical(&seq("001"), 2),
            Err(Error::LengthNotDivisible { len: 3, block: 2 })
        );
    }

    #[test]
    fn block_indexing() {
        assert_eq!(block_index(&[1, 0, 1], 2), 5);
        assert_eq!(block_symbols(5, 3, 2), vec![1, 0, 1]);
        assert_eq!(block_symbols(7, 2, 3), vec![2, 1]);
    }

    #[test]
    fn join_examples() {
        let p = block_empirical(&seq("0110"), 2).unwrap();
        let j = join_with_channel(&p, &Channel::identity(2)).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let expect = if a == b { p.prob(a) } else { 0.0 };
                assert_eq!(j.joint(a, b), expect);
            }
        }
        let j = join_with_channel(&p, &Channel::uniform(2, 2)).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                assert!((j.joint(a, b) - p.prob(a) / 4.0).abs() < 1e-15);
            }
        }
        let p = block_empirical(&seq("000"), 1).unwrap();
        let j = join_with_channel(&p, &Channel::bsc(0.1).unwrap()).unwrap();
        assert_eq!(j.joint(0, 0), 0.9);
        assert_eq!(j.joint(0, 1), 0.1);
    }

    #[test]
    fn table_cap() {
        let ch = Channel::uniform(4, 4);
        let err = JointBlockDistribution::from_marginal(13, vec![], &ch).unwrap_err();
        assert!(matches!(err, Error::TableTooLarge { .. }));
    }

    #[test]
    fn header_length_example() {
        let x = seq("0001101100011011");
        let p = block_empirical(&x, 2).unwrap();
        let h = encode_type(&p, 16).unwrap();
        // flag + ceil(log2 C(11, 3)) = 1 + 8; the budget is ceil(4 log2 9) = 13.
        assert_eq!(composition_count(8, 4), Some(165));
        assert_eq!(h.len(), 9);
        assert_eq!(type_header_bits(16, 2, 2).unwrap(), 9);
        assert_eq!(decode_type(&h, 16, 2, 2).unwrap(), p);
    }

    #[test]
    fn single_block_round_trip() {
        let p = block_empirical(&seq("101"), 3).unwrap();
        let h = encode_type(&p, 3).unwrap();
        assert_eq!(decode_type(&h, 3, 3, 2).unwrap(), p);
    }

    #[test]
    fn exhaustive_small_round_trip() {
        let mut seen = 0;
        for a in 0..=4u64 {
            for b in 0..=4 - a {
                for c in 0..=4 - a - b {
                    let counts = vec![a, b, c, 4 - a - b - c];
                    let p = BlockDistribution::from_counts(2, 2, counts).unwrap();
                    let h = encode_type(&p, 8).unwrap();
                    assert_eq!(decode_type(&h, 8, 2, 2).unwrap(), p);
                    assert_eq!(composition_rank(p.counts()).unwrap(), seen);
                    seen += 1;
                }
            }
        }
        assert_eq!(seen, 35);
    }

    #[test]
    fn fallback_format() {
        // C(10^6 + 255, 255) does not fit in 64 bits.
        let mut counts = vec![0u64; 256];
        counts[3] = 999_999;
        counts[255] = 1;
        let p = BlockDistribution::from_counts(8, 2, counts).unwrap();
        assert!(composition_rank(p.counts()).is_err());
        let h = encode_type(&p, 8_000_000).unwrap();
        assert!(h.get(0));
        assert_eq!(h.len() as u64, type_header_bits(8_000_000, 8, 2).unwrap());
        assert!(h.len() as f64 <= (256.0 * (1e6f64 + 1.0).log2()).ceil() + 1.0);
        assert_eq!(decode_type(&h, 8_000_000, 8, 2).unwrap(), p);
    }

    #[test]
    fn out_of_range_rank_rejected() {
        let mut b = Bitstream::new();
        b.push_bit(false);
        b.push_uint(200, 8);
        assert!(matches!(
            decode_type(&b, 16, 2, 2),
            Err(Error::HeaderMismatch(_))
        ));
    }

    proptest! {
        #[test]
        fn header_round_trip(bits in proptest::collection::vec(0usize..3, 1..40), block in 1usize..4) {
            let n = bits.len() - bits.len() % block;
            prop_assume!(n > 0);
            let x = Sequence::new(3, bits[..n].to_vec()).unwrap();
            let p = block_empirical(&x, block).unwrap();
            let h = encode_type(&p, n as u64).unwrap();
            let k = 3f64.powi(block as i32);
            let budget = (k * ((n / block) as f64 + 1.0).log2()).ceil() + 1.0;
            prop_assert!(h.len() as f64 <= budget);
            prop_assert_eq!(decode_type(&h, n as u64, block, 3).unwrap(), p);
        }

        #[test]
        fn joint_marginals_match(bits in proptest::collection::vec(0usize..2, 2..30), q in 0.0f64..1.0) {
            let n = bits.len() - bits.len() % 2;
            let x = Sequence::new(2, bits[..n].to_vec()).unwrap();
            let p = block_empirical(&x, 2).unwrap();
            let j = join_with_channel(&p, &Channel::bsc(q).unwrap()).unwrap();
            prop_assert!(j.source_marginal_check() < 1e-12);
            let total: f64 = p.probs().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
