//! Two-stage (successive refinement) region at desk scale.
//!
//! The first stage sends `U = u(X^l)` and is decoded with `Y^l`; the second
//! sends `V = v(X^l)` on top and is decoded with `Z^l` and `U`. Only the
//! marginals `P(y|x)` and `P(z|x)` enter the distortions, so the joint law of
//! `(Y, Z)` given `X` is arbitrary.

use std::collections::HashSet;

use rand::Rng;
use serde::Serialize;

use crate::empirical::{
    block_index, block_symbols, checked_table_size, BlockDistribution, JointBlockDistribution,
};
use crate::error::{Error, Result};
use crate::model::{entropy, validate_dmc, Channel, DistortionMatrix};
use crate::rng::Seed;
use crate::solver::{
    canonical_labels, lower_hull, set_partitions, WzCode, DESCENT_TOL, MAX_ITERATIONS,
};

/// Largest `alpha^l` accepted by the enumeration.
pub const SR_MAX_BLOCKS: usize = 4;
/// Slack on the entropy constraints.
pub const RATE_TOL: f64 = 1e-9;

/// `P(y, z | x)`, stored as `table[x][y * |Z| + z]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoSidedChannel {
    y_size: usize,
    z_size: usize,
    table: Channel,
}

impl TwoSidedChannel {
    pub fn new(rows: &[Vec<f64>], y_size: usize, z_size: usize) -> Result<Self> {
        if rows.iter().any(|r| r.len() != y_size * z_size) {
            return Err(Error::Shape(format!(
                "rows need {} entries",
                y_size * z_size
            )));
        }
        Ok(TwoSidedChannel {
            y_size,
            z_size,
            table: validate_dmc(rows)?,
        })
    }

    /// `Y` and `Z` conditionally independent given `X`.
    pub fn product(y: &Channel, z: &Channel) -> Result<Self> {
        if y.inputs() != z.inputs() {
            return Err(Error::Shape(
                "both channels need the same input alphabet".into(),
            ));
        }
        let rows: Vec<Vec<f64>> = (0..y.inputs())
            .map(|x| {
                y.row(x)
                    .iter()
                    .flat_map(|&py| z.row(x).iter().map(move |&pz| py * pz))
                    .collect()
            })
            .collect();
        Self::new(&rows, y.outputs(), z.outputs())
    }

    /// `Z = Y`.
    pub fn duplicated(ch: &Channel) -> Result<Self> {
        let b = ch.outputs();
        let rows: Vec<Vec<f64>> = (0..ch.inputs())
            .map(|x| {
                (0..b * b)
                    .map(|c| {
                        if c / b == c % b {
                            ch.prob(x, c / b)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        Self::new(&rows, b, b)
    }

    pub fn inputs(&self) -> usize {
        self.table.inputs()
    }

    pub fn prob(&self, x: usize, y: usize, z: usize) -> f64 {
        self.table.prob(x, y * self.z_size + z)
    }

    fn marginal(&self, keep_y: bool) -> Result<Channel> {
        let size = if keep_y { self.y_size } else { self.z_size };
        let rows: Vec<Vec<f64>> = (0..self.inputs())
            .map(|x| {
                let mut row = vec![0.0; size];
                for y in 0..self.y_size {
                    for z in 0..self.z_size {
                        row[if keep_y { y } else { z }] += self.prob(x, y, z);
                    }
                }
                row
            })
            .collect();
        validate_dmc(&rows)
    }

    pub fn y_channel(&self) -> Result<Channel> {
        self.marginal(true)
    }

    pub fn z_channel(&self) -> Result<Channel> {
        self.marginal(false)
    }
}

/// A block marginal joined with both side channels.
#[derive(Clone, Debug)]
pub struct SrJoint {
    pub first: JointBlockDistribution,
    pub second: JointBlockDistribution,
}

impl SrJoint {
    pub fn new(block: usize, marginal: Vec<f64>, ch: &TwoSidedChannel) -> Result<Self> {
        Ok(SrJoint {
            first: JointBlockDistribution::from_marginal(
                block,
                marginal.clone(),
                &ch.y_channel()?,
            )?,
            second: JointBlockDistribution::from_marginal(block, marginal, &ch.z_channel()?)?,
        })
    }

    pub fn from_empirical(p: &BlockDistribution, ch: &TwoSidedChannel) -> Result<Self> {
        Self::new(p.block(), p.probs(), ch)
    }

    pub fn block(&self) -> usize {
        self.first.block()
    }

    pub fn source_blocks(&self) -> usize {
        self.first.source_blocks()
    }
}

/// Label caps: `|U| <= alpha^l + 3`, `|V| <= alpha^l |U| + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SrCaps {
    pub u_labels: usize,
    pub v_labels: usize,
}

impl SrCaps {
    pub fn full(source_blocks: usize) -> Self {
        let u = source_blocks + 3;
        SrCaps {
            u_labels: u,
            v_labels: source_blocks * u + 1,
        }
    }

    fn validate(&self, source_blocks: usize) -> Result<()> {
        let full = Self::full(source_blocks);
        if self.u_labels == 0
            || self.v_labels == 0
            || self.u_labels > full.u_labels
            || self.v_labels > full.v_labels
        {
            return Err(Error::CapExceeded(format!(
                "label caps ({}, {}) outside 1..={} and 1..={}",
                self.u_labels, self.v_labels, full.u_labels, full.v_labels
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SrPoint {
    pub d1: f64,
    pub d2: f64,
    /// `H(U)/l`.
    pub rate: f64,
    /// `H(V|U)/l`.
    pub delta_rate: f64,
    /// Labels per source block; blocks off the support map to 0.
    pub u_map: Vec<usize>,
    pub v_map: Vec<usize>,
    /// `h[u][y-block]`, reconstruction block index under `rho`.
    pub h: Vec<Vec<usize>>,
    /// `h_prime[u][v][z-block]`, reconstruction block index under `rho'`.
    pub h_prime: Vec<Vec<Vec<usize>>>,
    pub converged: bool,
    pub iterations: usize,
}

/// Bayes reconstruction tables over one side channel.
struct Evaluator<'a> {
    joint: &'a JointBlockDistribution,
    rho: &'a DistortionMatrix,
    support: Vec<usize>,
    symbols: Vec<Vec<usize>>,
}

impl<'a> Evaluator<'a> {
    fn new(joint: &'a JointBlockDistribution, rho: &'a DistortionMatrix) -> Result<Self> {
        if rho.source_size() != joint.alpha() {
            return Err(Error::InvalidParameter(
                "distortion rows must match the source alphabet".into(),
            ));
        }
        checked_table_size(rho.recon_size(), joint.block())?;
        let support = joint.support();
        let symbols = support
            .iter()
            .map(|&a| block_symbols(a, joint.block(), joint.alpha()))
            .collect();
        Ok(Evaluator {
            joint,
            rho,
            support,
            symbols,
        })
    }

    /// Per-group, per-side-block reconstruction and the total expected block
    /// distortion. `labels[i]` is the group of support cell `i`.
    fn reconstruct(&self, labels: &[usize], groups: usize) -> (Vec<Vec<usize>>, f64) {
        let block = self.joint.block();
        let gamma = self.rho.recon_size();
        let mut total = 0.0;
        let mut cost = vec![0.0; gamma];
        let h = (0..groups)
            .map(|g| {
                (0..self.joint.side_blocks())
                    .map(|b| {
                        let mut out = vec![0usize; block];
                        for (pos, slot) in out.iter_mut().enumerate() {
                            cost.iter_mut().for_each(|c| *c = 0.0);
                            for (i, &a) in self.support.iter().enumerate() {
                                if labels[i] != g {
                                    continue;
                                }
                                let w = self.joint.joint(a, b);
                                for (xh, c) in cost.iter_mut().enumerate() {
                                    *c += w * self.rho.get(self.symbols[i][pos], xh);
                                }
                            }
                            let mut best = 0;
                            for (xh, &c) in cost.iter().enumerate() {
                                if c < cost[best] {
                                    best = xh;
                                }
                            }
                            *slot = best;
                            total += cost[best];
                        }
                        block_index(&out, gamma)
                    })
                    .collect()
            })
            .collect();
        (h, total)
    }

    /// Expected block distortion of support cell `i` against a row of `h`.
    fn cell_cost(&self, i: usize, row: &[usize]) -> f64 {
        let a = self.support[i];
        let block = self.joint.block();
        let gamma = self.rho.recon_size();
        self.joint
            .cond_row(a)
            .iter()
            .zip(row)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, &c)| {
                let xh = block_symbols(c, block, gamma);
                p * self.symbols[i]
                    .iter()
                    .zip(&xh)
                    .map(|(&x, &r)| self.rho.get(x, r))
                    .sum::<f64>()
            })
            .sum()
    }

    fn mass(&self, labels: &[usize], groups: usize) -> Vec<f64> {
        let mut q = vec![0.0; groups];
        for (i, &a) in self.support.iter().enumerate() {
            q[labels[i]] += self.joint.marginal()[a];
        }
        q
    }

    fn full_map(&self, labels: &[usize]) -> Vec<usize> {
        let mut map = vec![0; self.joint.source_blocks()];
        for (i, &a) in self.support.iter().enumerate() {
            map[a] = labels[i];
        }
        map
    }
}

fn label_count(labels: &[usize]) -> usize {
    labels.iter().max().map_or(1, |m| m + 1)
}

/// Builds the point for first-stage labels `u` and second-stage labels `v`
/// (both over support cells).
fn point(
    first: &Evaluator<'_>,
    second: &Evaluator<'_>,
    u: &[usize],
    v: &[usize],
    h: Option<Vec<Vec<usize>>>,
) -> SrPoint {
    let l = first.joint.block() as f64;
    let ku = label_count(u);
    let kv = label_count(v);
    let (h_first, d1_block) = first.reconstruct(u, ku);
    let (h, d1) = match h {
        Some(h) => {
            let d: f64 = first
                .support
                .iter()
                .enumerate()
                .map(|(i, &a)| first.joint.marginal()[a] * first.cell_cost(i, &h[u[i]]))
                .sum();
            (h, d)
        }
        None => (h_first, d1_block),
    };
    let w: Vec<usize> = u.iter().zip(v).map(|(&a, &b)| a * kv + b).collect();
    let (hw, d2) = second.reconstruct(&w, ku * kv);
    let hu = entropy(&first.mass(u, ku));
    let hw_ent = entropy(&first.mass(&w, ku * kv));
    let h_prime = hw.chunks(kv).map(<[Vec<usize>]>::to_vec).collect();
    SrPoint {
        d1: d1 / l,
        d2: d2 / l,
        rate: hu / l,
        delta_rate: (hw_ent - hu).max(0.0) / l,
        u_map: first.full_map(u),
        v_map: first.full_map(v),
        h,
        h_prime,
        converged: true,
        iterations: 0,
    }
}

/// Every pair of deterministic maps: a partition of the support into at most
/// `u_labels` blocks, refined inside each block into at most `v_labels`
/// parts. Only the partitions matter, since reconstructions are optimal.
pub fn enumerate_sr_points(
    joint: &SrJoint,
    rho: &DistortionMatrix,
    rho2: &DistortionMatrix,
    caps: SrCaps,
) -> Result<Vec<SrPoint>> {
    let ka = joint.source_blocks();
    if ka > SR_MAX_BLOCKS {
        return Err(Error::CapExceeded(format!(
            "{ka} source blocks > {SR_MAX_BLOCKS}"
        )));
    }
    caps.validate(ka)?;
    let first = Evaluator::new(&joint.first, rho)?;
    let second = Evaluator::new(&joint.second, rho2)?;
    let n = first.support.len();
    let mut out = Vec::new();
    for u in set_partitions(n, caps.u_labels) {
        let members: Vec<Vec<usize>> = (0..label_count(&u))
            .map(|g| (0..n).filter(|&i| u[i] == g).collect())
            .collect();
        let splits: Vec<Vec<Vec<usize>>> = members
            .iter()
            .map(|m| set_partitions(m.len(), caps.v_labels))
            .collect();
        let mut choice = vec![0usize; members.len()];
        loop {
            let mut v = vec![0usize; n];
            for (g, m) in members.iter().enumerate() {
                for (k, &i) in m.iter().enumerate() {
                    v[i] = splits[g][choice[g]][k];
                }
            }
            out.push(point(&first, &second, &u, &v, None));
            let mut g = 0;
            while g < choice.len() {
                choice[g] += 1;
                if choice[g] < splits[g].len() {
                    break;
                }
                choice[g] = 0;
                g += 1;
            }
            if g == choice.len() {
                break;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct SrRegion {
    pub rate: f64,
    pub delta_rate: f64,
    /// Points meeting both entropy constraints.
    pub points: Vec<SrPoint>,
    /// Pareto-minimal `(d1, d2)`, ascending in `d1`.
    pub frontier: Vec<usize>,
    /// Lower convex hull of the frontier in `(d1, d2)`.
    pub hull: Vec<usize>,
}

impl SrRegion {
    pub fn frontier_points(&self) -> impl Iterator<Item = &SrPoint> {
        self.frontier.iter().map(|&i| &self.points[i])
    }

    /// True when some frontier point is no worse than `(d1, d2)` in both
    /// coordinates, up to `tol`.
    pub fn covers(&self, d1: f64, d2: f64, tol: f64) -> bool {
        self.frontier_points()
            .any(|p| p.d1 <= d1 + tol && p.d2 <= d2 + tol)
    }
}

fn pareto(points: &[SrPoint]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        points[i]
            .d1
            .total_cmp(&points[j].d1)
            .then(points[i].d2.total_cmp(&points[j].d2))
            .then(i.cmp(&j))
    });
    let mut best = f64::INFINITY;
    let mut out = Vec::new();
    for i in order {
        if points[i].d2 < best - 1e-12 {
            best = points[i].d2;
            out.push(i);
        }
    }
    out
}

/// Exact two-stage region at rates `(R, dR)`: enumerated points with
/// `H(U) <= l R` and `H(V|U) <= l dR`, their Pareto frontier and its
/// convex hull (time sharing).
pub fn brute_force_sr_region(
    joint: &SrJoint,
    rho: &DistortionMatrix,
    rho2: &DistortionMatrix,
    rate: f64,
    delta_rate: f64,
    caps: SrCaps,
) -> Result<SrRegion> {
    if rate.is_nan() || rate < 0.0 || delta_rate.is_nan() || delta_rate < 0.0 {
        return Err(Error::InvalidParameter("rates must be nonnegative".into()));
    }
    let points: Vec<SrPoint> = enumerate_sr_points(joint, rho, rho2, caps)?
        .into_iter()
        .filter(|p| p.rate <= rate + RATE_TOL && p.delta_rate <= delta_rate + RATE_TOL)
        .collect();
    let frontier = pareto(&points);
    let xy: Vec<(f64, f64)> = frontier
        .iter()
        .map(|&i| (points[i].d1, points[i].d2))
        .collect();
    let hull = lower_hull(&xy).into_iter().map(|k| frontier[k]).collect();
    Ok(SrRegion {
        rate,
        delta_rate,
        points,
        frontier,
        hull,
    })
}

/// Second-stage design for a fixed first stage: alternating minimization of
/// `E rho'(X^l, h'(Z^l, U, V)) + lambda' H(V|U)` over the map to `V`, the
/// conditional marginal `q(v|u)` and `h'`. Best over an identity start and
/// `restarts` seeded random starts.
#[allow(clippy::too_many_arguments)]
pub fn conditional_second_stage(
    joint: &SrJoint,
    rho: &DistortionMatrix,
    rho2: &DistortionMatrix,
    first_stage: &WzCode,
    lambda: f64,
    v_labels: usize,
    seed: Seed,
    restarts: usize,
) -> Result<SrPoint> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    let ka = joint.source_blocks();
    if first_stage.map.len() != ka
        || first_stage
            .h
            .iter()
            .any(|r| r.len() != joint.first.side_blocks())
    {
        return Err(Error::Shape(
            "first-stage code does not match the joint".into(),
        ));
    }
    SrCaps {
        u_labels: 1,
        v_labels,
    }
    .validate(ka)?;
    let first = Evaluator::new(&joint.first, rho)?;
    let second = Evaluator::new(&joint.second, rho2)?;
    let u: Vec<usize> = first.support.iter().map(|&a| first_stage.map[a]).collect();
    let ku = first_stage.h.len().max(label_count(&u));
    let n = u.len();
    let l = joint.block() as f64;

    let objective = |v: &[usize]| -> (f64, Vec<Vec<usize>>, Vec<f64>) {
        let w: Vec<usize> = u.iter().zip(v).map(|(&a, &b)| a * v_labels + b).collect();
        let (h, d) = second.reconstruct(&w, ku * v_labels);
        let pw = second.mass(&w, ku * v_labels);
        let pu = second.mass(&u, ku);
        let cond = entropy(&pw) - entropy(&pu);
        ((d + lambda * cond.max(0.0)) / l, h, pw)
    };
    let canonical = |v: &[usize]| -> Vec<usize> {
        let mut out = vec![0; n];
        for g in 0..ku {
            let idx: Vec<usize> = (0..n).filter(|&i| u[i] == g).collect();
            let relabeled = canonical_labels(&idx.iter().map(|&i| v[i]).collect::<Vec<_>>());
            for (k, &i) in idx.iter().enumerate() {
                out[i] = relabeled[k];
            }
        }
        out
    };

    let mut rng = seed.generator();
    let mut starts: Vec<Vec<usize>> = Vec::with_capacity(restarts + 1);
    let mut rank = vec![0usize; ku];
    starts.push(
        u.iter()
            .map(|&g| {
                rank[g] += 1;
                (rank[g] - 1).min(v_labels - 1)
            })
            .collect(),
    );
    for _ in 0..restarts {
        starts.push((0..n).map(|_| rng.random_range(0..v_labels)).collect());
    }
    let mut seen = HashSet::new();
    let mut best: Option<(f64, Vec<usize>, usize, bool)> = None;
    for start in starts {
        let mut v = canonical(&start);
        if !seen.insert(v.clone()) {
            continue;
        }
        let (mut obj, mut h, mut pw) = objective(&v);
        let mut iterations = 0;
        let mut converged = false;
        while iterations < MAX_ITERATIONS {
            iterations += 1;
            let pu = second.mass(&u, ku);
            let next: Vec<usize> = (0..n)
                .map(|i| {
                    let g = u[i];
                    let mut pick = (f64::INFINITY, 0);
                    for b in 0..v_labels {
                        let p = pw[g * v_labels + b];
                        if p <= 0.0 {
                            continue;
                        }
                        let c =
                            second.cell_cost(i, &h[g * v_labels + b]) - lambda * (p / pu[g]).log2();
                        if c < pick.0 {
                            pick = (c, b);
                        }
                    }
                    pick.1
                })
                .collect();
            let next = canonical(&next);
            let (next_obj, next_h, next_pw) = objective(&next);
            let gain = obj - next_obj;
            if next_obj <= obj {
                v = next;
                obj = next_obj;
                h = next_h;
                pw = next_pw;
            }
            if gain < DESCENT_TOL {
                converged = true;
                break;
            }
        }
        let better = match &best {
            None => true,
            Some((b, bv, _, _)) => obj < b - 1e-12 || (obj <= b + 1e-12 && v < *bv),
        };
        if better {
            best = Some((obj, v, iterations, converged));
        }
    }
    let (_, v, iterations, converged) = best.expect("at least one start");
    let mut p = point(&first, &second, &u, &v, Some(first_stage.h.clone()));
    p.iterations = iterations;
    p.converged = converged;
    Ok(p)
}
