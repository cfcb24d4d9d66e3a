//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use sha2::{Digest, Sha256};
use wzfsm::codec::{rate_bound, uc_decode_many, uc_encode_traced, CodecConfig};
use wzfsm::empirical::{
    block_empirical, dms_block_marginal, join_with_channel, type_header_bits,
    JointBlockDistribution,
};
use wzfsm::growth::{decoder_description_bits, maxent_distribution, theta_sweep};
use wzfsm::model::{
    average_distortion, h2, sample_side_info, validate_dmc, Channel, DistortionMatrix, Sequence,
};
use wzfsm::refine::{
    brute_force_sr_region, conditional_second_stage, SrCaps, SrJoint, TwoSidedChannel,
};
use wzfsm::rng::Seed;
use wzfsm::search::{SearchGrid, SearchIndex};
use wzfsm::solver::{
    brute_force_drf, code_distortion, drf_curve, log_spaced, optimal_reconstruction,
    solve_lagrangian, RdCurve, WzCode,
};

const BOUND_TOL: f64 = 1e-9;
const ZERO_RATE_TOL: f64 = 1e-9;
const ORACLE_TOL: f64 = 1e-6;
const MC_STANDARD_ERRORS: f64 = 3.0;
const DMS_TOL: f64 = 1e-9;
const PHI_TOL: f64 = 1e-6;
const SR_TOL: f64 = 1e-6;

const LAMBDAS: usize = 64;
const RESTARTS: usize = 64;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn hamming() -> DistortionMatrix {
    DistortionMatrix::hamming(2)
}

fn curve(joint: &JointBlockDistribution, seed: Seed) -> RdCurve {
    let lambdas = log_spaced(LAMBDAS, 1e-3, 1e2);
    drf_curve(
        joint,
        &hamming(),
        &lambdas,
        joint.source_blocks() + 1,
        seed,
        RESTARTS,
    )
    .unwrap()
}

/// Criteria 1 and 4 over every binary sequence of length 12.
fn lower_bound_sweep() -> (Outcome, Outcome) {
    let n = 12;
    let channels = [
        Channel::identity(2),
        Channel::bsc(0.1).unwrap(),
        Channel::bsc(0.3).unwrap(),
    ];
    let rates = [0.0, 0.25, 0.5, 1.0];
    let blocks = [2usize, 4];
    let grid = SearchGrid::binary(2, 1, 2).unwrap();
    let index = SearchIndex::new(&grid).unwrap();
    let mut cache: HashMap<(usize, usize, Vec<u64>), RdCurve> = HashMap::new();
    let mut get = |ci: usize, block: usize, x: &Sequence| -> RdCurve {
        let ty = block_empirical(x, block).unwrap();
        cache
            .entry((ci, block, ty.counts().to_vec()))
            .or_insert_with(|| {
                curve(
                    &join_with_channel(&ty, &channels[ci]).unwrap(),
                    Seed(block as u64),
                )
            })
            .clone()
    };
    let (mut instances, mut violations, mut worst) = (0usize, 0usize, f64::NEG_INFINITY);
    let (mut zero_checks, mut zero_bad, mut zero_gap) = (0usize, 0usize, 0.0f64);
    for i in 0..1usize << n {
        let x = Sequence::new(2, (0..n).map(|b| (i >> (n - 1 - b)) & 1).collect()).unwrap();
        let keys = index.keys(&x).unwrap();
        for (ci, ch) in channels.iter().enumerate() {
            let profile = keys.profile(ch, &hamming()).unwrap();
            let gap =
                (get(ci, 1, &x).query(0.0) - profile.query(0.0, 1, 0).unwrap().distortion).abs();
            zero_checks += 1;
            zero_gap = zero_gap.max(gap);
            zero_bad += usize::from(gap > ZERO_RATE_TOL);
            for &block in &blocks {
                let c = get(ci, block, &x);
                let l = block as f64;
                for &rate in &rates {
                    for states in 1..=2usize {
                        for delay in 0..=1usize {
                            let op = profile.query(rate, states, delay).unwrap().distortion;
                            let bound = c.query(rate + 2.0 * (states as f64).log2() / l)
                                - hamming().max() * delay as f64 / l;
                            instances += 1;
                            worst = worst.max(bound - op);
                            violations += usize::from(op < bound - BOUND_TOL);
                        }
                    }
                }
            }
        }
    }
    (
        outcome(
            violations == 0,
            format!("{} sequences, {instances} instances, {violations} violations, worst margin {worst:.3e}", 1 << n),
        ),
        outcome(zero_bad == 0, format!("{zero_checks} instances, max gap {zero_gap:.3e}")),
    )
}

fn solver_oracle() -> Outcome {
    let mut mismatches = 0;
    let mut worst = 0.0f64;
    for i in 0..50u64 {
        let mut rng = Seed(i).generator();
        let block = 1 + (i % 2) as usize;
        let k = 1usize << block;
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let marginal: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let (a, b) = (rng.random_range(0.0..0.5), rng.random_range(0.0..0.5));
        let ch = validate_dmc(&[vec![1.0 - a, a], vec![b, 1.0 - b]]).unwrap();
        let joint = JointBlockDistribution::from_marginal(block, marginal, &ch).unwrap();
        let ours = curve(&joint, Seed(i)).vertices();
        let oracle = brute_force_drf(&joint, &hamming(), k + 1)
            .unwrap()
            .vertices();
        if ours.len() != oracle.len() {
            mismatches += 1;
            continue;
        }
        for (p, q) in ours.iter().zip(&oracle) {
            let d = (p.0 - q.0).abs().max((p.1 - q.1).abs());
            worst = worst.max(d);
            if d > ORACLE_TOL {
                mismatches += 1;
                break;
            }
        }
    }
    outcome(
        mismatches == 0,
        format!("50 instances, {mismatches} mismatches, max deviation {worst:.3e}"),
    )
}

fn codec_rate_bound() -> Outcome {
    let mut bound_bad = 0;
    let mut mc_bad = 0;
    let mut worst_slack = f64::INFINITY;
    let mut worst_z = 0.0f64;
    for i in 0..20u64 {
        let block = if i % 2 == 0 { 2 } else { 3 };
        let n = if block == 2 { 1024 } else { 1023 };
        let p = 0.1 + 0.02 * i as f64;
        let mut rng = Seed(i).derive("corpus", 0).generator();
        let x = Sequence::new(
            2,
            (0..n)
                .map(|_| usize::from(rng.random_range(0.0..1.0) < p))
                .collect(),
        )
        .unwrap();
        let ch = Channel::bsc(0.05 + 0.01 * i as f64).unwrap();
        let rate = [0.25, 0.5, 0.75][(i % 3) as usize];
        let mut cfg = CodecConfig::new(block, rate, ch.clone(), hamming()).unwrap();
        cfg.seed = Seed(i);
        let (stream, design) = uc_encode_traced(&x, &cfg, Seed(i).derive("encode", 0)).unwrap();
        let header = type_header_bits(n as u64, block, 2).unwrap();
        let bound = rate_bound(n, block, 2, rate);
        let per_letter = stream.len() as f64 / n as f64;
        worst_slack = worst_slack.min(bound - per_letter);
        if stream.header_bits != header || per_letter > bound {
            bound_bad += 1;
        }
        let ys: Vec<Sequence> = (0..100)
            .map(|s| sample_side_info(&x, &ch, Seed(i).derive("channel", s)).unwrap())
            .collect();
        let d: Vec<f64> = uc_decode_many(&stream.bits, &ys, &cfg)
            .unwrap()
            .iter()
            .map(|xh| average_distortion(&x, xh, &hamming()).unwrap())
            .collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
        let se = (var / d.len() as f64).sqrt();
        let dev = (mean - design.distortion()).abs();
        if se > 0.0 {
            worst_z = worst_z.max(dev / se);
        }
        if dev > (MC_STANDARD_ERRORS * se).max(1e-12) {
            mc_bad += 1;
        }
    }
    outcome(
        bound_bad == 0 && mc_bad == 0,
        format!(
            "20 corpora, {bound_bad} bound violations (min slack {worst_slack:.4} bits/letter), \
             {mc_bad} Monte Carlo misses (max |z| {worst_z:.2})"
        ),
    )
}

fn dms_monotone() -> Outcome {
    let mut bad = 0;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..10u64 {
        let mut rng = Seed(100 + i).generator();
        let p = rng.random_range(0.05..0.5);
        let ch = Channel::bsc(rng.random_range(0.05..0.4)).unwrap();
        let c1 = curve(
            &JointBlockDistribution::from_marginal(
                1,
                dms_block_marginal(&[1.0 - p, p], 1).unwrap(),
                &ch,
            )
            .unwrap(),
            Seed(i),
        );
        let c2 = curve(
            &JointBlockDistribution::from_marginal(
                2,
                dms_block_marginal(&[1.0 - p, p], 2).unwrap(),
                &ch,
            )
            .unwrap(),
            Seed(i),
        );
        for k in 0..=10 {
            let r = k as f64 / 10.0;
            let d = c2.query(r) - c1.query(r);
            worst = worst.max(d);
            bad += usize::from(d > DMS_TOL);
        }
    }
    outcome(
        bad == 0,
        format!("10 sources x 11 rates, {bad} violations, max increase {worst:.3e}"),
    )
}

fn header_accounting() -> Outcome {
    let a = decoder_description_bits(2, 2, 2, 2);
    let b = decoder_description_bits(1, 2, 2, 2);
    let ns = [1_000, 10_000, 100_000, 1_000_000, 10_000_000];
    let low = theta_sweep(0.5, &ns, 2, 2, 2).unwrap();
    let high = theta_sweep(1.5, &ns, 2, 2, 2).unwrap();
    let dec = low.windows(2).all(|w| w[1].per_letter < w[0].per_letter);
    let inc = high.windows(2).all(|w| w[1].per_letter > w[0].per_letter);
    outcome(
        a == 18 && b == 5 && dec && inc,
        format!("bits(2,2,2,2) = {a}, bits(1,2,2,2) = {b}, theta 0.5 decreasing: {dec}, theta 1.5 increasing: {inc}"),
    )
}

fn maxent_phi() -> Outcome {
    let mut worst = 0.0f64;
    for d in [0.05, 0.11, 0.25, 0.5] {
        let s = maxent_distribution(&[0.0, 1.0], d).unwrap();
        worst = worst.max((s.phi - h2(d)).abs());
    }
    outcome(
        worst <= PHI_TOL,
        format!("max |phi - h2| = {worst:.3e} over 4 points"),
    )
}

fn second_si_only(joint: &SrJoint, u_map: &[usize]) -> f64 {
    let k = u_map.iter().max().unwrap() + 1;
    let rows: Vec<Vec<f64>> = u_map
        .iter()
        .map(|&u| (0..k).map(|j| if j == u { 1.0 } else { 0.0 }).collect())
        .collect();
    let h = optimal_reconstruction(&joint.second, &hamming(), &rows).unwrap();
    let code = WzCode {
        block: joint.block(),
        alpha: 2,
        beta: 2,
        gamma: 2,
        map: u_map.to_vec(),
        q: vec![0.0; k],
        h,
    };
    code_distortion(&joint.second, &hamming(), &code).unwrap()
}

fn sr_consistency() -> Outcome {
    let (mut covered_bad, mut zero_bad, mut points) = (0, 0, 0);
    for i in 0..10u64 {
        let mut rng = Seed(200 + i).generator();
        let block = 1 + (i % 2) as usize;
        let x: Vec<usize> = (0..24)
            .map(|_| usize::from(rng.random_range(0.0..1.0) < 0.4))
            .collect();
        let ty = block_empirical(&Sequence::new(2, x).unwrap(), block).unwrap();
        let ch = TwoSidedChannel::product(
            &Channel::bsc(rng.random_range(0.05..0.45)).unwrap(),
            &Channel::bsc(rng.random_range(0.0..0.3)).unwrap(),
        )
        .unwrap();
        let joint = SrJoint::from_empirical(&ty, &ch).unwrap();
        let ka = joint.source_blocks();
        for (l1, l2) in [(0.05, 0.05), (0.3, 0.1), (2.0, 0.5)] {
            let first = solve_lagrangian(&joint.first, &hamming(), l1, ka + 1, Seed(i), 16)
                .unwrap()
                .code;
            let p = conditional_second_stage(
                &joint,
                &hamming(),
                &hamming(),
                &first,
                l2,
                ka,
                Seed(i),
                16,
            )
            .unwrap();
            let region = brute_force_sr_region(
                &joint,
                &hamming(),
                &hamming(),
                p.rate,
                p.delta_rate,
                SrCaps::full(ka),
            )
            .unwrap();
            points += 1;
            covered_bad += usize::from(!region.covers(p.d1, p.d2, SR_TOL));
        }
        for rate in [0.0, 0.5, 1.0] {
            let region =
                brute_force_sr_region(&joint, &hamming(), &hamming(), rate, 0.0, SrCaps::full(ka))
                    .unwrap();
            for f in region.frontier_points() {
                zero_bad += usize::from((f.d2 - second_si_only(&joint, &f.u_map)).abs() > SR_TOL);
            }
        }
    }
    outcome(
        covered_bad == 0 && zero_bad == 0,
        format!("10 instances, {points} descent points, {covered_bad} below the frontier, {zero_bad} zero-rate mismatches"),
    )
}

fn hash_dir(dir: &Path) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            let digest = Sha256::digest(std::fs::read(e.path()).unwrap());
            (
                e.file_name().to_string_lossy().into_owned(),
                digest.iter().map(|b| format!("{b:02x}")).collect(),
            )
        })
        .collect();
    out.sort();
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("experiment.toml");
    std::fs::write(
        &config,
        "seed = 11\n\
         channel = [[0.9, 0.1], [0.1, 0.9]]\n\
         sequence = \"0010110111010001001011101101000100101101110100010010110111010001\"\n\
         [drf]\nblock = 2\nlambdas = 16\nrestarts = 8\n\
         [fsm_opt]\nstates = 2\ndelay = 1\n\
         [codec]\nblock = 2\nrate = 0.5\nlambdas = 16\nrestarts = 8\n\
         [growth.wrap]\nrate = 0.5\ndelta = 0.2\nstates = 2\n\
         [sr.region]\nrate = 0.5\ndelta_rate = 0.5\nchannel3 = [[0.72, 0.08, 0.18, 0.02], [0.02, 0.18, 0.08, 0.72]]\n\
         [gen.dms]\np = [0.3, 0.7]\nn = 64\n\
         [check.theorem1]\nsamples = 4\nlambdas = 8\nrestarts = 4\n",
    )
    .unwrap();
    let experiments: [&[&str]; 10] = [
        &["drf"],
        &["fsm-opt"],
        &["codec", "encode"],
        &["codec", "decode"],
        &["growth", "sweep"],
        &["growth", "wrap"],
        &["sr", "region"],
        &["gen", "converse"],
        &["gen", "dms"],
        &["check", "theorem1"],
    ];
    let mut runs = Vec::new();
    for run in ["a", "b"] {
        let dir = tmp.path().join(run);
        for args in experiments {
            let status = Command::new(env!("CARGO_BIN_EXE_wzfsm"))
                .arg("--config")
                .arg(&config)
                .arg("--out-dir")
                .arg(&dir)
                .args(args)
                .output()
                .unwrap();
            if !status.status.success() {
                return outcome(
                    false,
                    format!(
                        "`{}` failed: {}",
                        args.join(" "),
                        String::from_utf8_lossy(&status.stderr)
                    ),
                );
            }
        }
        runs.push(hash_dir(&dir));
    }
    let files = runs[0].len();
    let same = runs[0] == runs[1];
    outcome(
        same && files >= 15,
        format!(
            "{} experiments, {files} artifacts, identical hashes: {same}",
            experiments.len()
        ),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |k: u32, name: &str, start: Instant, o: Outcome| {
        failed += usize::from(!o.pass);
        println!(
            "{} [{k}] {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    };
    let t = Instant::now();
    let (c1, c4) = lower_bound_sweep();
    report(
        1,
        "operational optimum above the shifted block curve",
        t,
        c1,
    );
    let t = Instant::now();
    report(2, "descent matches exhaustive hull", t, solver_oracle());
    let t = Instant::now();
    report(
        3,
        "universal codec rate bound and distortion",
        t,
        codec_rate_bound(),
    );
    report(
        4,
        "zero-rate curve equals one-state optimum",
        Instant::now(),
        c4,
    );
    let t = Instant::now();
    report(
        5,
        "longer blocks never hurt on memoryless sources",
        t,
        dms_monotone(),
    );
    let t = Instant::now();
    report(6, "decoder description accounting", t, header_accounting());
    let t = Instant::now();
    report(7, "maximum-entropy noise", t, maxent_phi());
    let t = Instant::now();
    report(8, "two-stage region consistency", t, sr_consistency());
    let t = Instant::now();
    report(9, "byte-identical reruns", t, determinism());
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
