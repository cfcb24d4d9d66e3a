//! Universal block codec: the type of `x` is sent as a header, both ends
//! derive the same block code from it, and every block's label goes out
//! as a Shannon-length canonical codeword.
//!
//! Stream layout: `[type header][codeword per block]`, MSB first.

use rand::Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::empirical::{
    block_empirical, block_index, encode_type, join_with_channel, read_type, BlockDistribution,
};
use crate::error::{Error, Result};
use crate::machine::{Bitstream, PrefixCode};
use crate::model::{entropy, Channel, DistortionMatrix, Sequence};
use crate::rng::{sample_index, Seed};
use crate::solver::{drf_curve, log_spaced, OperatingPoint, WzCode};

/// Largest codebook index, in bits, the typicality demo will draw.
pub const TYPICALITY_MAX_BITS: f64 = 24.0;

#[derive(Clone, Debug, PartialEq)]
pub struct CodecConfig {
    pub block: usize,
    /// Target rate in bits per source letter.
    pub rate: f64,
    /// `|U|`; defaults to `alpha^block + 1`.
    pub usize_: usize,
    pub lambdas: Vec<f64>,
    pub restarts: usize,
    /// Solver seed, shared by both ends.
    pub seed: Seed,
    pub channel: Channel,
    pub distortion: DistortionMatrix,
    /// Mix the two hull vertices around `rate` block by block.
    pub time_sharing: bool,
}

impl CodecConfig {
    pub fn new(
        block: usize,
        rate: f64,
        channel: Channel,
        distortion: DistortionMatrix,
    ) -> Result<Self> {
        if block == 0 {
            return Err(Error::InvalidParameter(
                "block length must be positive".into(),
            ));
        }
        if rate.is_nan() || rate < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "rate {rate} must be nonnegative"
            )));
        }
        if channel.inputs() != distortion.source_size() {
            return Err(Error::InvalidParameter(
                "channel and distortion disagree on the source alphabet".into(),
            ));
        }
        let usize_ = crate::empirical::checked_table_size(channel.inputs(), block)? + 1;
        Ok(CodecConfig {
            block,
            rate,
            usize_,
            lambdas: log_spaced(64, 1e-3, 1e2),
            restarts: 64,
            seed: Seed(0),
            channel,
            distortion,
            time_sharing: false,
        })
    }

    pub fn alpha(&self) -> usize {
        self.channel.inputs()
    }
}

/// A block code with the prefix code for its labels.
#[derive(Clone, Debug, Serialize)]
pub struct BlockCode {
    pub point: OperatingPoint,
    /// Number of blocks of the type carrying each label.
    pub counts: Vec<u64>,
    pub lengths: Vec<u8>,
    /// Codeword index of each label; `None` for labels that never occur.
    #[serde(skip)]
    pub slots: Vec<Option<usize>>,
    #[serde(skip)]
    pub prefix: PrefixCode,
}

impl BlockCode {
    fn new(point: OperatingPoint, ty: &BlockDistribution) -> Result<Self> {
        let code = &point.code;
        let mut counts = vec![0u64; code.labels()];
        for (a, &c) in ty.counts().iter().enumerate() {
            counts[code.map[a]] += c;
        }
        let total = ty.total();
        let mut lengths = Vec::new();
        let mut slots = vec![None; counts.len()];
        for (u, &c) in counts.iter().enumerate() {
            if c > 0 {
                slots[u] = Some(lengths.len());
                lengths.push(shannon_length(c, total));
            }
        }
        let prefix = PrefixCode::canonical(&lengths)?;
        Ok(BlockCode {
            point,
            counts,
            lengths,
            slots,
            prefix,
        })
    }

    pub fn wz(&self) -> &WzCode {
        &self.point.code
    }

    /// SHA-256 over the solver code and the codeword lengths.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.point.code.fingerprint());
        h.update(&self.lengths);
        h.finalize().into()
    }
}

/// Smallest `L` with `count * 2^L >= total`, i.e. `ceil(log2(total / count))`.
pub fn shannon_length(count: u64, total: u64) -> u8 {
    let mut l = 0u8;
    while (count as u128) << l < total as u128 {
        l += 1;
    }
    l
}

/// The code both ends derive from a type.
#[derive(Clone, Debug, Serialize)]
pub struct CodecDesign {
    /// Hull vertex with the largest rate not above the target.
    pub primary: BlockCode,
    /// With time sharing: the next vertex and the probability of using
    /// `primary` on a block.
    pub mix: Option<(BlockCode, f64)>,
}

impl CodecDesign {
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.primary.fingerprint());
        if let Some((c, p)) = &self.mix {
            h.update(c.fingerprint());
            h.update(p.to_bits().to_le_bytes());
        }
        h.finalize().into()
    }

    /// Expected per-letter distortion of the design on its own type.
    pub fn distortion(&self) -> f64 {
        match &self.mix {
            None => self.primary.point.distortion,
            Some((other, p)) => {
                p * self.primary.point.distortion + (1.0 - p) * other.point.distortion
            }
        }
    }

    /// Code used on every block, drawn from the shared seed.
    fn choices(&self, blocks: usize, seed: Seed) -> Vec<bool> {
        match &self.mix {
            None => vec![true; blocks],
            Some((_, p)) => {
                let mut rng = seed.derive("time-share", 0).generator();
                (0..blocks).map(|_| rng.random::<f64>() < *p).collect()
            }
        }
    }
}

pub fn design_code(ty: &BlockDistribution, cfg: &CodecConfig) -> Result<CodecDesign> {
    if ty.block() != cfg.block || ty.alpha() != cfg.alpha() {
        return Err(Error::InvalidParameter(
            "type does not match the codec configuration".into(),
        ));
    }
    let joint = join_with_channel(ty, &cfg.channel)?;
    let curve = drf_curve(
        &joint,
        &cfg.distortion,
        &cfg.lambdas,
        cfg.usize_,
        cfg.seed,
        cfg.restarts,
    )?;
    let (left, right) = curve.bracket(cfg.rate).ok_or(Error::EmptyGrid)?;
    let primary = BlockCode::new(left.clone(), ty)?;
    let mix = if cfg.time_sharing && right.rate > left.rate {
        let p = (right.rate - cfg.rate) / (right.rate - left.rate);
        Some((BlockCode::new(right.clone(), ty)?, p))
    } else {
        None
    };
    Ok(CodecDesign { primary, mix })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedStream {
    pub bits: Bitstream,
    pub header_bits: u64,
}

impl EncodedStream {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

fn check_length(n: usize, block: usize) -> Result<()> {
    if !n.is_multiple_of(block) {
        return Err(Error::LengthNotDivisible { len: n, block });
    }
    Ok(())
}

pub fn uc_encode(x: &Sequence, cfg: &CodecConfig, seed: Seed) -> Result<EncodedStream> {
    Ok(uc_encode_traced(x, cfg, seed)?.0)
}

/// Encodes and also returns the design used.
pub fn uc_encode_traced(
    x: &Sequence,
    cfg: &CodecConfig,
    seed: Seed,
) -> Result<(EncodedStream, CodecDesign)> {
    check_length(x.len(), cfg.block)?;
    if x.alphabet().size() > cfg.alpha() {
        return Err(Error::InvalidParameter(
            "sequence alphabet exceeds the codec's".into(),
        ));
    }
    let ty = block_empirical(
        &Sequence::new(cfg.alpha(), x.symbols().to_vec())?,
        cfg.block,
    )?;
    let design = design_code(&ty, cfg)?;
    let mut bits = encode_type(&ty, x.len() as u64)?;
    let header_bits = bits.len() as u64;
    let blocks = x.len() / cfg.block;
    let choices = design.choices(blocks, cfg.seed);
    let mut rng = seed.generator();
    for (j, chunk) in x.symbols().chunks(cfg.block).enumerate() {
        let code = pick(&design, choices[j]);
        let a = block_index(chunk, cfg.alpha());
        let u = sample_index(&mut rng, &code.wz().test_channel_row(a));
        let slot = code.slots[u]
            .ok_or_else(|| Error::InvalidCode(format!("label {u} has no codeword")))?;
        bits.push_codeword(code.prefix.word(slot));
    }
    Ok((EncodedStream { bits, header_bits }, design))
}

fn pick(design: &CodecDesign, primary: bool) -> &BlockCode {
    match (&design.mix, primary) {
        (Some((other, _)), false) => other,
        _ => &design.primary,
    }
}

/// Rebuilds the design from the header and reconstructs `x`.
pub fn uc_decode(stream: &Bitstream, y: &Sequence, cfg: &CodecConfig) -> Result<Sequence> {
    Ok(uc_decode_traced(stream, y, cfg)?.0)
}

pub fn uc_decode_traced(
    stream: &Bitstream,
    y: &Sequence,
    cfg: &CodecConfig,
) -> Result<(Sequence, CodecDesign)> {
    let n = y.len();
    check_length(n, cfg.block)?;
    let mut r = stream.reader();
    let ty = read_type(&mut r, n as u64, cfg.block, cfg.alpha())?;
    let design = design_code(&ty, cfg)?;
    let mut labels = Vec::with_capacity(n / cfg.block);
    let choices = design.choices(n / cfg.block, cfg.seed);
    for &choice in &choices {
        let code = pick(&design, choice);
        let idx = r.read_codeword(code.prefix.words())?;
        let u = code
            .slots
            .iter()
            .position(|&s| s == Some(idx))
            .expect("every codeword has a label");
        labels.push(u);
    }
    let xhat = reconstruct(&design, &choices, &labels, y, cfg)?;
    Ok((xhat, design))
}

/// `xhat` block by block from labels and side information.
pub fn reconstruct(
    design: &CodecDesign,
    choices: &[bool],
    labels: &[usize],
    y: &Sequence,
    cfg: &CodecConfig,
) -> Result<Sequence> {
    let beta = cfg.channel.outputs();
    if y.alphabet().size() > beta {
        return Err(Error::InvalidParameter(
            "side information alphabet exceeds the channel's".into(),
        ));
    }
    let mut out = Vec::with_capacity(y.len());
    for (j, chunk) in y.symbols().chunks(cfg.block).enumerate() {
        let b = block_index(chunk, beta);
        out.extend(pick(design, choices[j]).wz().reconstruct(labels[j], b));
    }
    Sequence::new(cfg.distortion.recon_size(), out)
}

/// Decodes many side-information draws against one stream, deriving the
/// design once.
pub fn uc_decode_many(
    stream: &Bitstream,
    ys: &[Sequence],
    cfg: &CodecConfig,
) -> Result<Vec<Sequence>> {
    let Some(first) = ys.first() else {
        return Ok(Vec::new());
    };
    let (_, design) = uc_decode_traced(stream, first, cfg)?;
    let n = first.len();
    let mut r = stream.reader();
    read_type(&mut r, n as u64, cfg.block, cfg.alpha())?;
    let choices = design.choices(n / cfg.block, cfg.seed);
    let mut labels = Vec::with_capacity(choices.len());
    for &choice in &choices {
        let code = pick(&design, choice);
        let idx = r.read_codeword(code.prefix.words())?;
        labels.push(
            code.slots
                .iter()
                .position(|&s| s == Some(idx))
                .expect("every codeword has a label"),
        );
    }
    ys.iter()
        .map(|y| {
            if y.len() != n {
                return Err(Error::LengthMismatch {
                    left: y.len(),
                    right: n,
                });
            }
            reconstruct(&design, &choices, &labels, y, cfg)
        })
        .collect()
}

/// Right-hand side of the rate bound, in bits per letter:
/// `R + 1/l + (alpha^l / n) log2(n/l + 1) + 1/n`.
pub fn rate_bound(n: usize, block: usize, alpha: usize, rate: f64) -> f64 {
    let k = (alpha as f64).powi(block as i32);
    let n_f = n as f64;
    rate + 1.0 / block as f64 + k / n_f * (n_f / block as f64 + 1.0).log2() + 1.0 / n_f
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TypicalityDiagnostics {
    pub matched: bool,
    /// Index of the first typical codebook entry.
    pub index: Option<u64>,
    /// `ceil((n/l)(I(X^l; U) + eps))`.
    pub codebook_bits: u32,
    /// Total variation of the transmitted entry's joint type.
    pub distance: Option<f64>,
}

fn codebook_entry(rng: &mut impl Rng, q: &[f64], blocks: usize) -> Vec<usize> {
    (0..blocks).map(|_| sample_index(rng, q)).collect()
}

/// Total variation between the joint type of (source blocks, labels) and
/// `P(a) P(u|a)`.
fn joint_distance(
    blocks: &[usize],
    labels: &[usize],
    ty: &BlockDistribution,
    code: &WzCode,
) -> f64 {
    let k = code.labels();
    let mut joint = vec![0.0; ty.counts().len() * k];
    let w = 1.0 / blocks.len() as f64;
    for (&a, &u) in blocks.iter().zip(labels) {
        joint[a * k + u] += w;
    }
    let mut tv = 0.0;
    for a in 0..ty.counts().len() {
        let row = code.test_channel_row(a);
        for u in 0..k {
            tv += (joint[a * k + u] - ty.prob(a) * row[u]).abs();
        }
    }
    tv / 2.0
}

/// Deterministic random-codebook encoder: draws `2^bits` label sequences
/// i.i.d. from `q` with `seed` and sends the index of the first one jointly
/// typical with `x`. Stream: `[1][type header][index]`, or `[0]` followed
/// by the ordinary stream when nothing matches.
pub fn typicality_encoder_demo(
    x: &Sequence,
    cfg: &CodecConfig,
    eps: f64,
    seed: Seed,
) -> Result<(EncodedStream, TypicalityDiagnostics)> {
    check_length(x.len(), cfg.block)?;
    let x = Sequence::new(cfg.alpha(), x.symbols().to_vec())?;
    let ty = block_empirical(&x, cfg.block)?;
    let design = design_code(&ty, cfg)?;
    let code = design.primary.wz();
    let blocks: Vec<usize> = x
        .symbols()
        .chunks(cfg.block)
        .map(|c| block_index(c, cfg.alpha()))
        .collect();
    // Deterministic test channel: I(X^l; U) = H(U).
    let info = entropy(&code.q);
    let raw = blocks.len() as f64 * (info + eps);
    if raw > TYPICALITY_MAX_BITS {
        return Err(Error::CodebookTooLarge { bits: raw });
    }
    let codebook_bits = raw.ceil().max(0.0) as u32;
    let mut rng = seed.derive("codebook", 0).generator();
    let mut found = None;
    for i in 0..(1u64 << codebook_bits) {
        let labels = codebook_entry(&mut rng, &code.q, blocks.len());
        let tv = joint_distance(&blocks, &labels, &ty, code);
        if tv <= eps {
            found = Some((i, tv));
            break;
        }
    }
    let mut bits = Bitstream::new();
    let diag = match found {
        Some((i, tv)) => {
            bits.push_bit(true);
            bits.extend(&encode_type(&ty, x.len() as u64)?);
            bits.push_uint(i, codebook_bits);
            TypicalityDiagnostics {
                matched: true,
                index: Some(i),
                codebook_bits,
                distance: Some(tv),
            }
        }
        None => {
            bits.push_bit(false);
            bits.extend(&uc_encode(&x, cfg, seed)?.bits);
            TypicalityDiagnostics {
                matched: false,
                index: None,
                codebook_bits,
                distance: None,
            }
        }
    };
    let header_bits =
        1 + crate::empirical::type_header_bits(x.len() as u64, cfg.block, cfg.alpha())?;
    Ok((EncodedStream { bits, header_bits }, diag))
}

/// Inverse of [`typicality_encoder_demo`]; regenerates the codebook from
/// `seed`.
pub fn typicality_decode(
    stream: &Bitstream,
    y: &Sequence,
    cfg: &CodecConfig,
    eps: f64,
    seed: Seed,
) -> Result<Sequence> {
    let n = y.len();
    check_length(n, cfg.block)?;
    let mut r = stream.reader();
    if !r.read_bit()? {
        let mut rest = Bitstream::new();
        while r.remaining() > 0 {
            rest.push_bit(r.read_bit()?);
        }
        return uc_decode(&rest, y, cfg);
    }
    let ty = read_type(&mut r, n as u64, cfg.block, cfg.alpha())?;
    let design = design_code(&ty, cfg)?;
    let code = design.primary.wz();
    let blocks = n / cfg.block;
    let raw = blocks as f64 * (entropy(&code.q) + eps);
    let codebook_bits = raw.ceil().max(0.0) as u32;
    let index = r.read_uint(codebook_bits)?;
    let mut rng = seed.derive("codebook", 0).generator();
    let mut labels = Vec::new();
    for _ in 0..=index {
        labels = codebook_entry(&mut rng, &code.q, blocks);
    }
    reconstruct(&design, &vec![true; blocks], &labels, y, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::type_header_bits;
    use crate::model::{average_distortion, h2, sample_side_info};

    fn ham() -> DistortionMatrix {
        DistortionMatrix::hamming(2)
    }

    fn random_x(seed: u64, n: usize, p1: f64) -> Sequence {
        let mut rng = Seed(seed).generator();
        Sequence::new(
            2,
            (0..n)
                .map(|_| usize::from(rng.random::<f64>() < p1))
                .collect(),
        )
        .unwrap()
    }

    fn quick(block: usize, rate: f64, ch: Channel) -> CodecConfig {
        let mut cfg = CodecConfig::new(block, rate, ch, ham()).unwrap();
        cfg.lambdas = log_spaced(24, 1e-3, 1e2);
        cfg.restarts = 16;
        cfg
    }

    #[test]
    fn shannon_lengths() {
        assert_eq!(shannon_length(4, 4), 0);
        assert_eq!(shannon_length(2, 4), 1);
        assert_eq!(shannon_length(1, 4), 2);
        assert_eq!(shannon_length(3, 10), 2);
        assert_eq!(shannon_length(1, 1000), 10);
        for total in 1..200u64 {
            for c in 1..=total {
                let l = shannon_length(c, total) as i32;
                let exact = (total as f64 / c as f64).log2();
                assert!(l as f64 >= exact - 1e-12 && (l as f64) < exact + 1.0);
            }
        }
    }

    #[test]
    fn lossless_regime_round_trips() {
        let x = random_x(3, 64, 0.4);
        let cfg = quick(2, 1.0, Channel::bsc(0.2).unwrap());
        let s = uc_encode(&x, &cfg, Seed(1)).unwrap();
        let y = sample_side_info(&x, &cfg.channel, Seed(2)).unwrap();
        assert_eq!(uc_decode(&s.bits, &y, &cfg).unwrap(), x);
        let ty = block_empirical(&x, 2).unwrap();
        let design = design_code(&ty, &cfg).unwrap();
        let payload: u64 = ty
            .counts()
            .iter()
            .enumerate()
            .map(|(a, &c)| {
                c * u64::from(
                    design.primary.lengths
                        [design.primary.slots[design.primary.wz().map[a]].unwrap()],
                )
            })
            .sum();
        assert_eq!(
            s.len() as u64,
            type_header_bits(64, 2, 2).unwrap() + payload
        );
    }

    #[test]
    fn zero_rate_sends_only_the_header() {
        let x = random_x(5, 40, 0.3);
        let cfg = quick(2, 0.0, Channel::identity(2));
        let s = uc_encode(&x, &cfg, Seed(0)).unwrap();
        assert_eq!(s.len() as u64, s.header_bits);
        assert_eq!(uc_decode(&s.bits, &x, &cfg).unwrap(), x);
    }

    #[test]
    fn rate_bound_holds_and_designs_match() {
        for (seed, block) in [(1u64, 1usize), (2, 2), (3, 3), (4, 2)] {
            let n = 240;
            let x = random_x(seed, n, 0.3);
            let cfg = quick(block, 0.5, Channel::bsc(0.2).unwrap());
            let (s, enc_design) = uc_encode_traced(&x, &cfg, Seed(seed)).unwrap();
            assert!(s.len() as f64 / n as f64 <= rate_bound(n, block, 2, 0.5) + 1e-12);
            let y = sample_side_info(&x, &cfg.channel, Seed(seed)).unwrap();
            let (_, dec_design) = uc_decode_traced(&s.bits, &y, &cfg).unwrap();
            assert_eq!(enc_design.fingerprint(), dec_design.fingerprint());
            assert!(enc_design.primary.point.rate <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn bad_length() {
        let cfg = quick(3, 0.5, Channel::bsc(0.2).unwrap());
        assert!(matches!(
            uc_encode(&random_x(0, 10, 0.5), &cfg, Seed(0)),
            Err(Error::LengthNotDivisible { .. })
        ));
    }

    #[test]
    fn design_is_deterministic() {
        let ty = block_empirical(&random_x(8, 120, 0.35), 2).unwrap();
        let cfg = quick(2, 0.4, Channel::bsc(0.1).unwrap());
        let a = design_code(&ty, &cfg).unwrap();
        let b = design_code(&ty, &cfg).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn monte_carlo_matches_design() {
        let x = random_x(11, 256, 0.3);
        let cfg = quick(2, 0.5, Channel::bsc(0.15).unwrap());
        let (s, design) = uc_encode_traced(&x, &cfg, Seed(0)).unwrap();
        let ys: Vec<Sequence> = (0..100)
            .map(|i| sample_side_info(&x, &cfg.channel, Seed(1000 + i)).unwrap())
            .collect();
        let d: Vec<f64> = uc_decode_many(&s.bits, &ys, &cfg)
            .unwrap()
            .iter()
            .map(|xh| average_distortion(&x, xh, &ham()).unwrap())
            .collect();
        let mean = d.iter().sum::<f64>() / 100.0;
        let se = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 99.0 / 100.0).sqrt();
        assert!(
            (mean - design.distortion()).abs() <= 3.0 * se,
            "{mean} vs {}",
            design.distortion()
        );
    }

    #[test]
    fn time_sharing_mixes_between_vertices() {
        let x = random_x(21, 400, 0.5);
        let mut cfg = quick(1, 0.5, Channel::bsc(0.25).unwrap());
        cfg.time_sharing = true;
        let (s, design) = uc_encode_traced(&x, &cfg, Seed(0)).unwrap();
        let (_, p) = design
            .mix
            .as_ref()
            .expect("0.5 lies strictly inside the hull");
        assert!(*p > 0.0 && *p < 1.0);
        let y = sample_side_info(&x, &cfg.channel, Seed(4)).unwrap();
        let (xh, back) = uc_decode_traced(&s.bits, &y, &cfg).unwrap();
        assert_eq!(back.fingerprint(), design.fingerprint());
        assert_eq!(xh.len(), x.len());
        // Uniform source at l = 1: the upper vertex is rate ~1 (identity).
        let right = &design.mix.as_ref().unwrap().0;
        assert!((right.point.rate - h2(0.5)).abs() < 0.05);
    }

    #[test]
    fn typicality_large_eps_matches_first_entry() {
        let x = random_x(2, 8, 0.5);
        let cfg = quick(1, 1.0, Channel::bsc(0.1).unwrap());
        let (s, diag) = typicality_encoder_demo(&x, &cfg, 1.0, Seed(3)).unwrap();
        assert!(diag.matched);
        assert_eq!(diag.index, Some(0));
        let y = sample_side_info(&x, &cfg.channel, Seed(9)).unwrap();
        assert_eq!(
            typicality_decode(&s.bits, &y, &cfg, 1.0, Seed(3))
                .unwrap()
                .len(),
            8
        );
    }

    #[test]
    fn typicality_identity_channel_exact_match() {
        // With eps below 1/(n/l) only a label sequence equal to x is typical.
        let x = Sequence::from_digits(2, "01101001").unwrap();
        let cfg = quick(1, 1.0, Channel::bsc(0.1).unwrap());
        let (s, diag) = typicality_encoder_demo(&x, &cfg, 0.1, Seed(5)).unwrap();
        let code = design_code(&block_empirical(&x, 1).unwrap(), &cfg)
            .unwrap()
            .primary
            .point
            .code;
        assert_eq!(code.map, vec![0, 1]);
        let mut rng = Seed(5).derive("codebook", 0).generator();
        let contains = (0..1u64 << diag.codebook_bits)
            .any(|_| codebook_entry(&mut rng, &code.q, 8) == x.symbols());
        assert_eq!(diag.matched, contains);
        let y = sample_side_info(&x, &cfg.channel, Seed(6)).unwrap();
        let xh = typicality_decode(&s.bits, &y, &cfg, 0.1, Seed(5)).unwrap();
        assert_eq!(xh, x);
        assert_eq!(
            uc_decode(&uc_encode(&x, &cfg, Seed(0)).unwrap().bits, &y, &cfg).unwrap(),
            x
        );
    }

    #[test]
    fn typicality_match_frequency() {
        let cfg = quick(1, 0.5, Channel::bsc(0.2).unwrap());
        let mut hits = 0;
        for seed in 0..200 {
            let x = random_x(10_000 + seed, 48, 0.5);
            let (_, diag) = typicality_encoder_demo(&x, &cfg, 0.05, Seed(seed)).unwrap();
            hits += usize::from(diag.matched);
        }
        assert!(hits as f64 / 200.0 >= 0.9, "{hits}");
    }

    #[test]
    fn typicality_codebook_cap() {
        let x = random_x(2, 64, 0.5);
        let cfg = quick(1, 1.0, Channel::bsc(0.1).unwrap());
        assert!(matches!(
            typicality_encoder_demo(&x, &cfg, 0.1, Seed(0)),
            Err(Error::CodebookTooLarge { .. })
        ));
    }
}
