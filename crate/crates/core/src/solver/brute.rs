use super::{OperatingPoint, RdCurve, WzCode};
use crate::empirical::{block_index, block_symbols, checked_table_size, JointBlockDistribution};
use crate::error::{Error, Result};
use crate::model::{entropy, DistortionMatrix};

/// Largest `alpha^l` accepted by the exhaustive search.
pub const BRUTE_FORCE_MAX_BLOCKS: usize = 8;

/// All set partitions of `n` items into at most `max_blocks` blocks, as
/// restricted growth strings (item 0 in block 0, each new block numbered
/// next).
pub fn set_partitions(n: usize, max_blocks: usize) -> Vec<Vec<usize>> {
    fn rec(
        prefix: &mut Vec<usize>,
        used: usize,
        n: usize,
        max_blocks: usize,
        out: &mut Vec<Vec<usize>>,
    ) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let top = if used < max_blocks { used + 1 } else { used };
        for b in 0..top {
            prefix.push(b);
            rec(prefix, used.max(b + 1), n, max_blocks, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        out.push(Vec::new());
    } else if max_blocks > 0 {
        rec(&mut Vec::with_capacity(n), 0, n, max_blocks, &mut out);
    }
    out
}

/// Exact hull over every deterministic map from source blocks to at most
/// `usize_cap` labels. Maps that differ only by relabeling, or only off the
/// support, give the same point, so one map per partition of the support
/// is evaluated.
pub fn brute_force_drf(
    joint: &JointBlockDistribution,
    rho: &DistortionMatrix,
    usize_cap: usize,
) -> Result<RdCurve> {
    let ka = joint.source_blocks();
    if ka > BRUTE_FORCE_MAX_BLOCKS {
        return Err(Error::CapExceeded(format!(
            "{ka} source blocks > {BRUTE_FORCE_MAX_BLOCKS}"
        )));
    }
    if usize_cap == 0 || usize_cap > ka + 1 {
        return Err(Error::CapExceeded(format!(
            "|U| = {usize_cap} outside 1..={}",
            ka + 1
        )));
    }
    if rho.source_size() != joint.alpha() {
        return Err(Error::InvalidParameter(
            "distortion rows must match the source alphabet".into(),
        ));
    }
    let support = joint.support();
    let points = set_partitions(support.len(), usize_cap)
        .into_iter()
        .map(|labels| evaluate_map(joint, rho, &support, &labels))
        .collect::<Result<Vec<_>>>()?;
    Ok(RdCurve::new(points))
}

/// Direct evaluation: for every label and side block, each coordinate's
/// cost is minimized separately over the posterior mass.
fn evaluate_map(
    joint: &JointBlockDistribution,
    rho: &DistortionMatrix,
    support: &[usize],
    labels: &[usize],
) -> Result<OperatingPoint> {
    let block = joint.block();
    let gamma = rho.recon_size();
    checked_table_size(gamma, block)?;
    let k = labels.iter().max().map_or(1, |m| m + 1);
    let mut q = vec![0.0; k];
    for (i, &a) in support.iter().enumerate() {
        q[labels[i]] += joint.marginal()[a];
    }
    let kb = joint.side_blocks();
    let mut h = vec![vec![0usize; kb]; k];
    let mut total = 0.0;
    for (u, row) in h.iter_mut().enumerate() {
        for (b, slot) in row.iter_mut().enumerate() {
            let mut best_block = vec![0usize; block];
            for (pos, best_sym) in best_block.iter_mut().enumerate() {
                let costs: Vec<f64> = (0..gamma)
                    .map(|xh| {
                        support
                            .iter()
                            .zip(labels)
                            .filter(|(_, &l)| l == u)
                            .map(|(&a, _)| {
                                joint.joint(a, b)
                                    * rho.get(block_symbols(a, block, joint.alpha())[pos], xh)
                            })
                            .sum()
                    })
                    .collect();
                let (arg, min) =
                    costs
                        .iter()
                        .enumerate()
                        .fold(
                            (0, f64::INFINITY),
                            |acc, (i, &c)| if c < acc.1 { (i, c) } else { acc },
                        );
                *best_sym = arg;
                total += min;
            }
            *slot = block_index(&best_block, gamma);
        }
    }
    let mut map = vec![0; joint.source_blocks()];
    for (i, &a) in support.iter().enumerate() {
        map[a] = labels[i];
    }
    let l = block as f64;
    Ok(OperatingPoint {
        rate: entropy(&q) / l,
        distortion: total / l,
        lambda: None,
        objective: f64::NAN,
        iterations: 0,
        converged: true,
        code: WzCode {
            block,
            alpha: joint.alpha(),
            beta: joint.beta(),
            gamma,
            map,
            q,
            h,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_counts_are_bell_numbers() {
        let bell = [1, 1, 2, 5, 15, 52, 203, 877, 4140];
        for (n, &b) in bell.iter().enumerate() {
            assert_eq!(set_partitions(n, n.max(1)).len(), b, "n = {n}");
        }
        // Stirling numbers of the second kind: S(4,1) + S(4,2) = 1 + 7.
        assert_eq!(set_partitions(4, 2).len(), 8);
    }
}
