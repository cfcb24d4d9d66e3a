//! Sweep of the operational optimum against the block distortion-rate
//! curve shifted by the state and delay redundancies:
//! `Delta_{M,d}(x, R) >= D_l(R + 2 log2(M) / l) - rho_max d / l` for every
//! state count `M <= 2` and delay `d <= 1`, on binary sequences with
//! Hamming distortion. The same sweep checks that at `l = 1` and `R = 0`
//! the curve equals the one-state, zero-delay optimum.

use std::collections::HashMap;

use rand::seq::index::sample;
use serde::Serialize;
use wzfsm::empirical::{block_empirical, join_with_channel};
use wzfsm::model::{Channel, DistortionMatrix, Sequence};
use wzfsm::rng::Seed;
use wzfsm::search::{SearchGrid, SearchIndex};
use wzfsm::solver::{drf_curve, log_spaced, RdCurve};

use crate::{labels, CliError};

pub const MAX_STATES: usize = 2;
pub const MAX_DELAY: usize = 1;
pub const MAX_LEN: u8 = 2;
pub const TOL: f64 = 1e-9;
/// Longest sequence the exhaustive mode accepts.
pub const MAX_EXHAUSTIVE_N: usize = 20;

#[derive(Clone, Debug)]
pub struct Theorem1Options {
    pub n: usize,
    /// `None`: every sequence of length `n`.
    pub samples: Option<usize>,
    pub rates: Vec<f64>,
    pub blocks: Vec<usize>,
    pub lambdas: usize,
    pub restarts: usize,
    pub seed: Seed,
    pub budget: u128,
}

#[derive(Clone, Debug, Serialize)]
pub struct Theorem1Row {
    pub sequence: String,
    pub channel: &'static str,
    pub block: usize,
    pub rate: f64,
    pub states: usize,
    pub delay: usize,
    pub operational: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Theorem1Summary {
    pub sequences: usize,
    pub instances: usize,
    pub violations: usize,
    /// Largest `bound - operational`.
    pub worst_margin: f64,
    pub zero_rate_checks: usize,
    pub zero_rate_violations: usize,
    pub max_zero_rate_gap: f64,
    pub pass: bool,
}

pub fn channels() -> Vec<(&'static str, Channel)> {
    vec![
        ("identity", Channel::identity(2)),
        ("bsc(0.1)", Channel::bsc(0.1).expect("valid crossover")),
        ("bsc(0.3)", Channel::bsc(0.3).expect("valid crossover")),
    ]
}

fn sequences(opts: &Theorem1Options) -> Result<Vec<Sequence>, CliError> {
    if opts.n == 0 || opts.n > MAX_EXHAUSTIVE_N {
        return Err(CliError::Config(format!(
            "n must be in 1..={MAX_EXHAUSTIVE_N}"
        )));
    }
    let total = 1usize << opts.n;
    let mut indices: Vec<usize> = match opts.samples {
        Some(k) if k < total => {
            let mut rng = opts.seed.derive(labels::THEOREM1_SAMPLE, 0).generator();
            sample(&mut rng, total, k).into_vec()
        }
        _ => (0..total).collect(),
    };
    indices.sort_unstable();
    indices
        .into_iter()
        .map(|i| {
            Sequence::new(
                2,
                (0..opts.n).map(|b| (i >> (opts.n - 1 - b)) & 1).collect(),
            )
            .map_err(CliError::from)
        })
        .collect()
}

pub fn theorem1_sweep(
    opts: &Theorem1Options,
) -> Result<(Vec<Theorem1Row>, Theorem1Summary), CliError> {
    if let Some(&b) = opts
        .blocks
        .iter()
        .find(|&&b| b == 0 || !opts.n.is_multiple_of(b))
    {
        return Err(CliError::Config(format!(
            "block {b} does not divide n = {}",
            opts.n
        )));
    }
    let xs = sequences(opts)?;
    let rho = DistortionMatrix::hamming(2);
    let grid = SearchGrid::binary(MAX_STATES, MAX_DELAY, MAX_LEN)?.with_budget(opts.budget);
    let index = SearchIndex::new(&grid)?;
    let chans = channels();
    let lambdas = log_spaced(opts.lambdas, 1e-3, 1e2);
    // Curves depend on x only through its block type.
    let mut cache: HashMap<(usize, usize, Vec<u64>), RdCurve> = HashMap::new();
    let mut curve = |ci: usize, block: usize, x: &Sequence| -> Result<RdCurve, CliError> {
        let ty = block_empirical(x, block)?;
        let key = (ci, block, ty.counts().to_vec());
        if let Some(c) = cache.get(&key) {
            return Ok(c.clone());
        }
        let joint = join_with_channel(&ty, &chans[ci].1)?;
        let seed = opts
            .seed
            .derive(labels::THEOREM1_DRF, (ci * 64 + block) as u64);
        let c = drf_curve(
            &joint,
            &rho,
            &lambdas,
            joint.source_blocks() + 1,
            seed,
            opts.restarts,
        )?;
        cache.insert(key, c.clone());
        Ok(c)
    };

    let mut rows = Vec::new();
    let mut summary = Theorem1Summary {
        sequences: xs.len(),
        worst_margin: f64::NEG_INFINITY,
        ..Default::default()
    };
    for x in &xs {
        let keys = index.keys(x)?;
        let digits = x.to_digits();
        for (ci, (name, ch)) in chans.iter().enumerate() {
            let profile = keys.profile(ch, &rho)?;
            let single = curve(ci, 1, x)?;
            let op0 = profile.query(0.0, 1, 0)?.distortion;
            let gap = (single.query(0.0) - op0).abs();
            summary.zero_rate_checks += 1;
            summary.max_zero_rate_gap = summary.max_zero_rate_gap.max(gap);
            if gap > TOL {
                summary.zero_rate_violations += 1;
            }
            for &block in &opts.blocks {
                let c = curve(ci, block, x)?;
                let l = block as f64;
                for &rate in &opts.rates {
                    for states in 1..=MAX_STATES {
                        for delay in 0..=MAX_DELAY {
                            let operational = profile.query(rate, states, delay)?.distortion;
                            let bound = c.query(rate + 2.0 * (states as f64).log2() / l)
                                - rho.max() * delay as f64 / l;
                            let pass = operational >= bound - TOL;
                            summary.instances += 1;
                            summary.worst_margin = summary.worst_margin.max(bound - operational);
                            if !pass {
                                summary.violations += 1;
                            }
                            rows.push(Theorem1Row {
                                sequence: digits.clone(),
                                channel: name,
                                block,
                                rate,
                                states,
                                delay,
                                operational,
                                bound,
                                pass,
                            });
                        }
                    }
                }
            }
        }
    }
    summary.pass = summary.violations == 0 && summary.zero_rate_violations == 0;
    Ok((rows, summary))
}
