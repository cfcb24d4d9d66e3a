//! Block Wyner-Ziv distortion-rate function by Lagrangian descent.
//!
//! For a multiplier `lambda` the solver minimizes
//! `(1/l) (E rho(X^l, h(Y^l, U)) + lambda H(U))` over deterministic maps
//! `X^l -> U` and reconstructions `h`, alternating between assignment,
//! marginal and reconstruction updates. The lower convex hull over many
//! multipliers gives the convexified distortion-rate curve.

mod brute;
mod hull;

use std::collections::HashSet;

use rand::Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use brute::{brute_force_drf, set_partitions, BRUTE_FORCE_MAX_BLOCKS};
pub use hull::{lower_hull, RdCurve, COLLINEAR_TOL};

use crate::empirical::{block_index, block_symbols, checked_table_size, JointBlockDistribution};
use crate::error::{Error, Result};
use crate::model::{entropy, DistortionMatrix};
use crate::rng::Seed;

/// Stop when an iteration improves the objective by less than this.
pub const DESCENT_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 500;
/// The multipliers always added to a grid.
pub const LAMBDA_EXTREMES: [f64; 2] = [0.0, 1e6];
/// Upper bound on extra solves spent on hull refinement.
pub const REFINE_LIMIT: usize = 64;

/// A test channel with its marginal and reconstruction.
///
/// The channel is deterministic: `map[a]` is the label of source block `a`.
/// Blocks outside the support of the design distribution map to label 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WzCode {
    pub block: usize,
    pub alpha: usize,
    pub beta: usize,
    pub gamma: usize,
    pub map: Vec<usize>,
    pub q: Vec<f64>,
    /// `h[u][b]` is the reconstruction block index for label `u`, side block `b`.
    pub h: Vec<Vec<usize>>,
}

impl WzCode {
    pub fn labels(&self) -> usize {
        self.q.len()
    }

    /// Row `P(.|a)` of the test channel.
    pub fn test_channel_row(&self, a: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.labels()];
        row[self.map[a]] = 1.0;
        row
    }

    pub fn reconstruct(&self, u: usize, b: usize) -> Vec<usize> {
        block_symbols(self.h[u][b], self.block, self.gamma)
    }

    /// SHA-256 over every table, floats by bit pattern.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        for v in [
            self.block,
            self.alpha,
            self.beta,
            self.gamma,
            self.map.len(),
            self.q.len(),
        ] {
            hasher.update((v as u64).to_le_bytes());
        }
        for &m in &self.map {
            hasher.update((m as u64).to_le_bytes());
        }
        for &p in &self.q {
            hasher.update(p.to_bits().to_le_bytes());
        }
        for row in &self.h {
            for &c in row {
                hasher.update((c as u64).to_le_bytes());
            }
        }
        hasher.finalize().into()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OperatingPoint {
    /// `H(U)/l`, bits per source letter.
    pub rate: f64,
    /// `(1/l) E rho(X^l, h(Y^l, U))`.
    pub distortion: f64,
    /// The multiplier that produced the point; `None` for enumerated points.
    pub lambda: Option<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub code: WzCode,
}

/// Precomputed tables over the support of the block marginal.
pub(crate) struct Problem<'a> {
    joint: &'a JointBlockDistribution,
    rho: &'a DistortionMatrix,
    pub(crate) support: Vec<usize>,
    prob: Vec<f64>,
    symbols: Vec<Vec<usize>>,
    /// `dist[i][c]`: block distortion of support cell `i` against block `c`.
    dist: Vec<Vec<f64>>,
    gamma: usize,
}

pub(crate) struct Solution {
    pub labels: Vec<usize>,
    pub q: Vec<f64>,
    pub h: Vec<Vec<usize>>,
    pub distortion: f64,
    pub entropy: f64,
}

impl<'a> Problem<'a> {
    pub(crate) fn new(
        joint: &'a JointBlockDistribution,
        rho: &'a DistortionMatrix,
    ) -> Result<Self> {
        if rho.source_size() != joint.alpha() {
            return Err(Error::InvalidParameter(
                "distortion rows must match the source alphabet".into(),
            ));
        }
        let gamma = rho.recon_size();
        let block = joint.block();
        let recon_blocks = checked_table_size(gamma, block)?;
        let support = joint.support();
        let prob: Vec<f64> = support.iter().map(|&a| joint.marginal()[a]).collect();
        let symbols: Vec<Vec<usize>> = support
            .iter()
            .map(|&a| block_symbols(a, block, joint.alpha()))
            .collect();
        let dist = symbols
            .iter()
            .map(|xs| {
                (0..recon_blocks)
                    .map(|c| {
                        block_symbols(c, block, gamma)
                            .iter()
                            .zip(xs)
                            .map(|(&xh, &x)| rho.get(x, xh))
                            .sum()
                    })
                    .collect()
            })
            .collect();
        Ok(Problem {
            joint,
            rho,
            support,
            prob,
            symbols,
            dist,
            gamma,
        })
    }

    fn cells(&self) -> usize {
        self.support.len()
    }

    /// Coordinate-wise Bayes reconstruction for each label and side block,
    /// given the mass of every support cell under every label.
    fn reconstruct(&self, groups: &[Vec<(usize, f64)>]) -> Vec<Vec<usize>> {
        let kb = self.joint.side_blocks();
        let block = self.joint.block();
        let mut cost = vec![0.0; self.gamma];
        groups
            .iter()
            .map(|group| {
                (0..kb)
                    .map(|b| {
                        let mut symbols = vec![0usize; block];
                        for (pos, slot) in symbols.iter_mut().enumerate() {
                            cost.iter_mut().for_each(|c| *c = 0.0);
                            for &(i, mass) in group {
                                let w = mass * self.joint.cond(self.support[i], b);
                                if w == 0.0 {
                                    continue;
                                }
                                let x = self.symbols[i][pos];
                                for (xh, c) in cost.iter_mut().enumerate() {
                                    *c += w * self.rho.get(x, xh);
                                }
                            }
                            *slot = argmin(&cost);
                        }
                        block_index(&symbols, self.gamma)
                    })
                    .collect()
            })
            .collect()
    }

    /// Evaluates a labeling of the support cells (labels dense from 0).
    pub(crate) fn evaluate(&self, labels: &[usize]) -> Solution {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut groups: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
        let mut q = vec![0.0; k];
        for (i, &u) in labels.iter().enumerate() {
            groups[u].push((i, self.prob[i]));
            q[u] += self.prob[i];
        }
        let h = self.reconstruct(&groups);
        let distortion = self.expected_block_distortion(labels, &h);
        Solution {
            labels: labels.to_vec(),
            entropy: entropy(&q),
            q,
            h,
            distortion,
        }
    }

    fn cell_cost(&self, i: usize, h_row: &[usize]) -> f64 {
        let a = self.support[i];
        self.joint
            .cond_row(a)
            .iter()
            .zip(h_row)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, &c)| p * self.dist[i][c])
            .sum()
    }

    fn expected_block_distortion(&self, labels: &[usize], h: &[Vec<usize>]) -> f64 {
        labels
            .iter()
            .enumerate()
            .map(|(i, &u)| self.prob[i] * self.cell_cost(i, &h[u]))
            .sum()
    }

    pub(crate) fn objective(&self, s: &Solution, lambda: f64) -> f64 {
        (s.distortion + lambda * s.entropy) / self.joint.block() as f64
    }

    /// Assignment step: each cell to the label minimizing distortion plus
    /// `lambda` times the ideal code length; ties to the smallest label.
    fn assign(&self, s: &Solution, lambda: f64) -> Vec<usize> {
        (0..self.cells())
            .map(|i| {
                let mut best = (f64::INFINITY, 0);
                for (u, &qu) in s.q.iter().enumerate() {
                    if qu <= 0.0 {
                        continue;
                    }
                    let c = self.cell_cost(i, &s.h[u]) - lambda * qu.log2();
                    if c < best.0 {
                        best = (c, u);
                    }
                }
                best.1
            })
            .collect()
    }

    /// Alternating minimization from a starting labeling.
    pub(crate) fn descend(&self, start: &[usize], lambda: f64) -> Descent {
        let mut cur = self.evaluate(&canonical_labels(start));
        let mut obj = self.objective(&cur, lambda);
        let mut trace = vec![obj];
        let mut converged = false;
        let mut iterations = 0;
        while iterations < MAX_ITERATIONS {
            iterations += 1;
            let next = self.evaluate(&canonical_labels(&self.assign(&cur, lambda)));
            let next_obj = self.objective(&next, lambda);
            debug_assert!(
                next_obj <= obj + 1e-9 * (1.0 + obj.abs()),
                "objective increased: {obj} -> {next_obj}"
            );
            trace.push(next_obj);
            let gain = obj - next_obj;
            if next_obj <= obj {
                cur = next;
                obj = next_obj;
            }
            if gain < DESCENT_TOL {
                converged = true;
                break;
            }
        }
        Descent {
            solution: cur,
            objective: obj,
            trace,
            iterations,
            converged,
        }
    }

    pub(crate) fn to_code(&self, s: &Solution) -> WzCode {
        let mut map = vec![0; self.joint.source_blocks()];
        for (i, &a) in self.support.iter().enumerate() {
            map[a] = s.labels[i];
        }
        WzCode {
            block: self.joint.block(),
            alpha: self.joint.alpha(),
            beta: self.joint.beta(),
            gamma: self.gamma,
            map,
            q: s.q.clone(),
            h: s.h.clone(),
        }
    }
}

pub(crate) struct Descent {
    pub solution: Solution,
    pub objective: f64,
    /// Objective after every iteration.
    #[cfg_attr(not(test), allow(dead_code))]
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

/// Relabels by order of first appearance.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut ids: Vec<usize> = Vec::new();
    labels
        .iter()
        .map(|&l| match ids.iter().position(|&x| x == l) {
            Some(p) => p,
            None => {
                ids.push(l);
                ids.len() - 1
            }
        })
        .collect()
}

/// Coordinate-wise Bayes reconstruction for a general test channel
/// `rows[a][u] = P(u | a)` over all source blocks. Cells with zero posterior
/// mass get the all-zero block.
pub fn optimal_reconstruction(
    joint: &JointBlockDistribution,
    rho: &DistortionMatrix,
    rows: &[Vec<f64>],
) -> Result<Vec<Vec<usize>>> {
    let p = Problem::new(joint, rho)?;
    if rows.len() != joint.source_blocks() {
        return Err(Error::Shape(format!(
            "test channel needs {} rows",
            joint.source_blocks()
        )));
    }
    let k = rows.first().map_or(0, Vec::len);
    for (a, row) in rows.iter().enumerate() {
        let sum: f64 = row.iter().sum();
        if row.len() != k || (sum - 1.0).abs() > crate::model::STOCHASTIC_TOL {
            return Err(Error::NonStochasticRow { row: a, sum });
        }
    }
    let groups: Vec<Vec<(usize, f64)>> = (0..k)
        .map(|u| {
            p.support
                .iter()
                .enumerate()
                .map(|(i, &a)| (i, p.prob[i] * rows[a][u]))
                .filter(|&(_, m)| m > 0.0)
                .collect()
        })
        .collect();
    Ok(p.reconstruct(&groups))
}

/// Expected per-letter distortion of a deterministic code on a joint.
pub fn code_distortion(
    joint: &JointBlockDistribution,
    rho: &DistortionMatrix,
    code: &WzCode,
) -> Result<f64> {
    let p = Problem::new(joint, rho)?;
    let labels: Vec<usize> = p.support.iter().map(|&a| code.map[a]).collect();
    Ok(p.expected_block_distortion(&labels, &code.h) / joint.block() as f64)
}

fn check_usize(joint: &JointBlockDistribution, usize_: usize) -> Result<()> {
    let limit = joint.source_blocks() + 1;
    if usize_ == 0 || usize_ > limit {
        return Err(Error::InvalidParameter(format!(
            "|U| = {usize_} outside 1..={limit}"
        )));
    }
    Ok(())
}

/// Best local minimum over the identity start and `restarts` seeded random
/// starts. Starts that coincide up to relabeling are run once. Among equal
/// objectives (within 1e-12) the lexicographically least labeling wins.
pub fn solve_lagrangian(
    joint: &JointBlockDistribution,
    rho: &DistortionMatrix,
    lambda: f64,
    usize_: usize,
    seed: Seed,
    restarts: usize,
) -> Result<OperatingPoint> {
    check_usize(joint, usize_)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    let p = Problem::new(joint, rho)?;
    Ok(solve_with(&p, lambda, usize_, seed, restarts))
}

pub(crate) fn solve_with(
    p: &Problem<'_>,
    lambda: f64,
    usize_: usize,
    seed: Seed,
    restarts: usize,
) -> OperatingPoint {
    let cells = p.cells();
    let k = usize_.min(cells).max(1);
    let mut rng = seed.generator();
    let mut starts: Vec<Vec<usize>> = vec![(0..cells).map(|i| i.min(k - 1)).collect()];
    for _ in 0..restarts {
        starts.push((0..cells).map(|_| rng.random_range(0..k)).collect());
    }
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut best: Option<Descent> = None;
    for start in starts {
        if !seen.insert(canonical_labels(&start)) {
            continue;
        }
        let d = p.descend(&start, lambda);
        let better = match &best {
            None => true,
            Some(b) => {
                d.objective < b.objective - 1e-12
                    || (d.objective <= b.objective + 1e-12 && d.solution.labels < b.solution.labels)
            }
        };
        if better {
            best = Some(d);
        }
    }
    let best = best.expect("at least one start");
    let l = p.joint.block() as f64;
    OperatingPoint {
        rate: best.solution.entropy / l,
        distortion: best.solution.distortion / l,
        lambda: Some(lambda),
        objective: best.objective,
        iterations: best.iterations,
        converged: best.converged,
        code: p.to_code(&best.solution),
    }
}

/// `count` multipliers spaced evenly in log scale over `[min, max]`.
pub fn log_spaced(count: usize, min: f64, max: f64) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![min],
        _ => (0..count)
            .map(|i| (min.ln() + (max.ln() - min.ln()) * i as f64 / (count - 1) as f64).exp())
            .collect(),
    }
}

/// Solves at every multiplier of the grid plus the extremes, then refines:
/// at each hull edge it solves once more at the edge's slope and inserts
/// any point found strictly below the edge.
pub fn drf_curve(
    joint: &JointBlockDistribution,
    rho: &DistortionMatrix,
    lambdas: &[f64],
    usize_: usize,
    seed: Seed,
    restarts: usize,
) -> Result<RdCurve> {
    if lambdas.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if lambdas.windows(2).any(|w| w[1] < w[0])
        || lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite()))
    {
        return Err(Error::InvalidParameter(
            "lambda grid must be sorted, finite and nonnegative".into(),
        ));
    }
    check_usize(joint, usize_)?;
    let p = Problem::new(joint, rho)?;
    let mut points = Vec::with_capacity(lambdas.len() + 2);
    for (j, &lambda) in LAMBDA_EXTREMES.iter().enumerate() {
        points.push(solve_with(
            &p,
            lambda,
            usize_,
            seed.derive("lambda-extreme", j as u64),
            restarts,
        ));
    }
    for (j, &lambda) in lambdas.iter().enumerate() {
        points.push(solve_with(
            &p,
            lambda,
            usize_,
            seed.derive("lambda", j as u64),
            restarts,
        ));
    }
    let mut curve = RdCurve::new(points);
    let mut tried: HashSet<u64> = HashSet::new();
    let mut extra = 0;
    'refine: while extra < REFINE_LIMIT {
        let v = curve.vertices();
        for w in v.windows(2) {
            let ((ra, da), (rb, db)) = (w[0], w[1]);
            let slope = (da - db) / (rb - ra);
            if !slope.is_finite() || !tried.insert(slope.to_bits()) {
                continue;
            }
            let pt = solve_with(
                &p,
                slope,
                usize_,
                seed.derive("refine", extra as u64),
                restarts,
            );
            extra += 1;
            let chord = da + (pt.rate - ra) / (rb - ra) * (db - da);
            let below = pt.rate > ra && pt.rate < rb && pt.distortion < chord - COLLINEAR_TOL;
            let mut points = std::mem::take(&mut curve.points);
            points.push(pt);
            curve = RdCurve::new(points);
            if below {
                continue 'refine;
            }
            if extra >= REFINE_LIMIT {
                break 'refine;
            }
        }
        break;
    }
    Ok(curve)
}
