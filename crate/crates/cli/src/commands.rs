use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use wzfsm::codec::{rate_bound, uc_decode, uc_encode_traced, CodecConfig};
use wzfsm::config::Model;
use wzfsm::empirical::{
    block_empirical, dms_block_marginal, join_with_channel, JointBlockDistribution,
};
use wzfsm::growth::{
    converse_process_generate, maxent_distribution, pad_decoder, theta_sweep, wrapper_decode,
    wrapper_encode, WrapperOutcome,
};
use wzfsm::machine::{decoder_to_text, encoder_to_text, Bitstream};
use wzfsm::model::{average_distortion, sample_side_info, validate_dmc, Sequence};
use wzfsm::refine::{brute_force_sr_region, SrCaps, SrJoint, TwoSidedChannel};
use wzfsm::rng::sample_index;
use wzfsm::search::{bit_budget, SearchGrid, SearchIndex};
use wzfsm::solver::{brute_force_drf, drf_curve, log_spaced};

use crate::config::overlay;
use crate::{
    check, hex, io_error, labels, write_csv, write_json, write_text, CheckCommand, CliError,
    CodecArgs, CodecCommand, Command, Context, ConverseArgs, DmsArgs, DrfArgs, FsmOptArgs,
    GenCommand, GrowthCommand, Report, SrArgs, SrCommand, SweepArgs, Theorem1Args, WrapArgs,
};

pub(crate) fn dispatch(cmd: &Command, ctx: &Context) -> Result<Report, CliError> {
    match cmd {
        Command::Drf(a) => drf(a, ctx),
        Command::FsmOpt(a) => fsm_opt(a, ctx),
        Command::Codec(CodecCommand::Encode(a)) => codec_encode(a, ctx),
        Command::Codec(CodecCommand::Decode(a)) => codec_decode(a, ctx),
        Command::Growth(GrowthCommand::Sweep(a)) => growth_sweep(a, ctx),
        Command::Growth(GrowthCommand::Wrap(a)) => growth_wrap(a, ctx),
        Command::Sr(SrCommand::Region(a)) => sr_region(a, ctx),
        Command::Gen(GenCommand::Converse(a)) => gen_converse(a, ctx),
        Command::Gen(GenCommand::Dms(a)) => gen_dms(a, ctx),
        Command::Check(CheckCommand::Theorem1(a)) => theorem1(a, ctx),
    }
}

fn require<T>(v: Option<T>, what: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("missing `{what}`")))
}

fn sequence(model: &Model) -> Result<&Sequence, CliError> {
    model
        .sequence
        .as_ref()
        .ok_or_else(|| CliError::Config("missing field `sequence`".into()))
}

struct Artifacts<'a> {
    dir: &'a Path,
    paths: Vec<PathBuf>,
}

impl<'a> Artifacts<'a> {
    fn new(ctx: &'a Context) -> Self {
        Artifacts {
            dir: &ctx.out_dir,
            paths: Vec::new(),
        }
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.paths.push(p.clone());
        p
    }

    fn report(self, experiment: &str, summary: serde_json::Value) -> Result<Report, CliError> {
        let report = Report {
            experiment: experiment.into(),
            artifacts: self.paths,
            summary,
        };
        write_json(
            &self
                .dir
                .join(format!("{}.summary.json", experiment.replace(' ', "_"))),
            &report.summary,
        )?;
        Ok(report)
    }
}

fn drf(args: &DrfArgs, ctx: &Context) -> Result<Report, CliError> {
    let mut a = args.clone();
    overlay!(a, ctx.config.section::<DrfArgs>(&["drf"])?; block, labels, lambdas, restarts, source, brute_force);
    let model = ctx.config.model()?;
    let block = a.block.unwrap_or(1);
    let joint = match (&a.source, &model.sequence) {
        (Some(p), _) => JointBlockDistribution::from_marginal(
            block,
            dms_block_marginal(p, block)?,
            &model.channel,
        )?,
        (None, Some(x)) => join_with_channel(&block_empirical(x, block)?, &model.channel)?,
        (None, None) => return Err(CliError::Config("drf needs `source` or `sequence`".into())),
    };
    let labels_ = a.labels.unwrap_or(joint.source_blocks() + 1);
    let curve = if a.brute_force.unwrap_or(false) {
        brute_force_drf(&joint, &model.distortion, labels_)?
    } else {
        let lambdas = log_spaced(a.lambdas.unwrap_or(64), 1e-3, 1e2);
        drf_curve(
            &joint,
            &model.distortion,
            &lambdas,
            labels_,
            ctx.seed.derive(labels::SOLVER, 0),
            a.restarts.unwrap_or(64),
        )?
    };
    #[derive(Serialize)]
    struct Row {
        rate: f64,
        distortion: f64,
        lambda: Option<f64>,
    }
    let rows: Vec<Row> = curve
        .hull_points()
        .map(|p| Row {
            rate: p.rate,
            distortion: p.distortion,
            lambda: p.lambda,
        })
        .collect();
    let mut out = Artifacts::new(ctx);
    write_csv(
        &out.path("drf.csv"),
        &rows,
        &["rate", "distortion", "lambda"],
    )?;
    let summary = json!({
        "block": block,
        "labels": labels_,
        "points": curve.points.len(),
        "hull_vertices": rows.len(),
        "zero_rate_distortion": curve.query(0.0),
        "min_distortion": curve.min_distortion(),
        "all_converged": curve.points.iter().all(|p| p.converged),
    });
    out.report("drf", summary)
}

fn fsm_opt(args: &FsmOptArgs, ctx: &Context) -> Result<Report, CliError> {
    let mut a = args.clone();
    overlay!(a, ctx.config.section::<FsmOptArgs>(&["fsm_opt"])?; rates, states, delay, max_len, complete_only);
    let model = ctx.config.model()?;
    let x = sequence(&model)?;
    let mut grid = SearchGrid::new(
        a.states.unwrap_or(1),
        a.delay.unwrap_or(0),
        a.max_len.unwrap_or(2),
        model.alpha,
        model.beta,
        model.gamma,
    )?
    .with_budget(ctx.budget);
    if a.complete_only.unwrap_or(false) {
        grid = grid.complete_only();
    }
    let index = SearchIndex::new(&grid)?;
    let keys = index.keys(x)?;
    let profile = keys.profile(&model.channel, &model.distortion)?;
    let rates = a.rates.unwrap_or_else(|| vec![0.0, 0.25, 0.5, 1.0]);
    let results = rates
        .iter()
        .map(|&r| profile.query(r, grid.states, grid.delay))
        .collect::<Result<Vec<_>, _>>()?;
    #[derive(Serialize)]
    struct Row {
        rate: f64,
        bit_budget: u64,
        bits: u64,
        distortion: f64,
        feasible: bool,
        states: usize,
        delay: usize,
    }
    let rows: Vec<Row> = rates
        .iter()
        .zip(&results)
        .map(|(&rate, r)| Row {
            rate,
            bit_budget: bit_budget(x.len(), rate),
            bits: r.bits,
            distortion: r.distortion,
            feasible: r.feasible,
            states: r.states,
            delay: r.delay,
        })
        .collect();
    let mut out = Artifacts::new(ctx);
    write_csv(
        &out.path("fsm_opt.csv"),
        &rows,
        &[
            "rate",
            "bit_budget",
            "bits",
            "distortion",
            "feasible",
            "states",
            "delay",
        ],
    )?;
    write_json(&out.path("fsm_opt.json"), &results)?;
    let summary = json!({
        "n": x.len(),
        "search_size": index.search_size().to_string(),
        "structures": index.structure_count(),
        "rates": rates.len(),
    });
    out.report("fsm-opt", summary)
}

fn codec_config(a: &CodecArgs, model: &Model, ctx: &Context) -> Result<CodecConfig, CliError> {
    let mut cfg = CodecConfig::new(
        a.block.unwrap_or(2),
        require(a.rate, "rate")?,
        model.channel.clone(),
        model.distortion.clone(),
    )?;
    if let Some(l) = a.labels {
        cfg.usize_ = l;
    }
    if let Some(k) = a.lambdas {
        cfg.lambdas = log_spaced(k, 1e-3, 1e2);
    }
    if let Some(r) = a.restarts {
        cfg.restarts = r;
    }
    cfg.time_sharing = a.time_sharing.unwrap_or(false);
    cfg.seed = ctx.seed.derive(labels::CODEC_SOLVER, 0);
    Ok(cfg)
}

fn codec_args(args: &CodecArgs, ctx: &Context) -> Result<CodecArgs, CliError> {
    let mut a = args.clone();
    overlay!(a, ctx.config.section::<CodecArgs>(&["codec"])?; block, rate, time_sharing, labels, lambdas, restarts, stream, side_info);
    Ok(a)
}

/// Stream files: bit length as 8 little-endian bytes, then the packed bits.
fn write_stream(path: &Path, bits: &Bitstream) -> Result<(), CliError> {
    let mut bytes = (bits.len() as u64).to_le_bytes().to_vec();
    bytes.extend(bits.to_bytes());
    std::fs::write(path, bytes).map_err(|e| io_error(path, e))
}

fn read_stream(path: &Path) -> Result<Bitstream, CliError> {
    let bytes = std::fs::read(path).map_err(|e| io_error(path, e))?;
    if bytes.len() < 8 {
        return Err(CliError::Config(format!(
            "{} is not a stream file",
            path.display()
        )));
    }
    let mut head = [0u8; 8];
    head.copy_from_slice(&bytes[..8]);
    Ok(Bitstream::from_bytes(
        &bytes[8..],
        u64::from_le_bytes(head) as usize,
    )?)
}

fn codec_encode(args: &CodecArgs, ctx: &Context) -> Result<Report, CliError> {
    let a = codec_args(args, ctx)?;
    let model = ctx.config.model()?;
    let x = sequence(&model)?;
    let cfg = codec_config(&a, &model, ctx)?;
    let (stream, design) = uc_encode_traced(x, &cfg, ctx.seed.derive(labels::CODEC_ENCODE, 0))?;
    let mut out = Artifacts::new(ctx);
    let path = a
        .stream
        .clone()
        .unwrap_or_else(|| ctx.out_dir.join("codec.bin"));
    write_stream(&path, &stream.bits)?;
    out.paths.push(path);
    let n = x.len();
    let summary = json!({
        "n": n,
        "block": cfg.block,
        "rate": cfg.rate,
        "bits": stream.len(),
        "header_bits": stream.header_bits,
        "bits_per_letter": stream.len() as f64 / n as f64,
        "rate_bound": rate_bound(n, cfg.block, cfg.alpha(), cfg.rate),
        "design_distortion": design.distortion(),
        "design_fingerprint": hex(&design.fingerprint()),
    });
    out.report("codec-encode", summary)
}

fn codec_decode(args: &CodecArgs, ctx: &Context) -> Result<Report, CliError> {
    let a = codec_args(args, ctx)?;
    let model = ctx.config.model()?;
    let cfg = codec_config(&a, &model, ctx)?;
    let stream = read_stream(
        &a.stream
            .clone()
            .unwrap_or_else(|| ctx.out_dir.join("codec.bin")),
    )?;
    let y = match (&a.side_info, &model.sequence) {
        (Some(digits), _) => Sequence::from_digits(model.beta, digits)
            .map_err(|e| CliError::Config(format!("side_info: {e}")))?,
        (None, Some(x)) => {
            sample_side_info(x, &model.channel, ctx.seed.derive(labels::SIDE_INFO, 0))?
        }
        (None, None) => {
            return Err(CliError::Config(
                "decoding needs `side_info` or `sequence`".into(),
            ))
        }
    };
    let xhat = uc_decode(&stream, &y, &cfg)?;
    let mut out = Artifacts::new(ctx);
    write_text(&out.path("decoded.txt"), &format!("{}\n", xhat.to_digits()))?;
    let distortion = match &model.sequence {
        Some(x) if x.len() == xhat.len() => Some(average_distortion(x, &xhat, &model.distortion)?),
        _ => None,
    };
    let summary = json!({
        "n": xhat.len(),
        "stream_bits": stream.len(),
        "side_info": y.to_digits(),
        "distortion": distortion,
    });
    out.report("codec-decode", summary)
}

fn growth_sweep(args: &SweepArgs, ctx: &Context) -> Result<Report, CliError> {
    let mut a = args.clone();
    overlay!(a, ctx.config.section::<SweepArgs>(&["growth", "sweep"])?; theta, ns, alpha, beta, gamma);
    let theta = a.theta.unwrap_or(0.5);
    let ns =
        a.ns.unwrap_or_else(|| vec![1_000, 10_000, 100_000, 1_000_000, 10_000_000]);
    let rows = theta_sweep(
        theta,
        &ns,
        a.alpha.unwrap_or(2),
        a.beta.unwrap_or(2),
        a.gamma.unwrap_or(2),
    )?;
    #[derive(Serialize)]
    struct Row {
        n: u64,
        states: String,
        header_bits: String,
        per_letter: f64,
    }
    let csv_rows: Vec<Row> = rows
        .iter()
        .map(|r| Row {
            n: r.n,
            states: r.states.to_string(),
            header_bits: r.header_bits.to_string(),
            per_letter: r.per_letter,
        })
        .collect();
    let mut out = Artifacts::new(ctx);
    write_csv(
        &out.path("growth_sweep.csv"),
        &csv_rows,
        &["n", "states", "header_bits", "per_letter"],
    )?;
    let summary = json!({
        "theta": theta,
        "strictly_decreasing": rows.windows(2).all(|w| w[1].per_letter < w[0].per_letter),
        "strictly_increasing": rows.windows(2).all(|w| w[1].per_letter > w[0].per_letter),
    });
    out.report("growth-sweep", summary)
}

fn growth_wrap(args: &WrapArgs, ctx: &Context) -> Result<Report, CliError> {
    let mut a = args.clone();
    overlay!(a, ctx.config.section::<WrapArgs>(&["growth", "wrap"])?; rate, delta, states, delay, max_len);
    let model = ctx.config.model()?;
    let x = sequence(&model)?;
    let grid = SearchGrid::new(
        a.states.unwrap_or(1),
        a.delay.unwrap_or(0),
        a.max_len.unwrap_or(2),
        model.alpha,
        model.beta,
        model.gamma,
    )?
    .with_budget(ctx.budget)
    .complete_only();
    let outcome = wrapper_encode(
        x,
        require(a.rate, "rate")?,
        require(a.delta, "delta")?,
        &grid,
        &model.channel,
        &model.distortion,
    )?;
    let mut out = Artifacts::new(ctx);
    let summary = match outcome {
        WrapperOutcome::Encoded {
            stream,
            header_bits,
            payload_bits,
            result,
        } => {
            write_stream(&out.path("wrap.bin"), &stream)?;
            let y = sample_side_info(x, &model.channel, ctx.seed.derive(labels::SIDE_INFO, 0))?;
            let (dec, xhat) = wrapper_decode(&stream, &y, &grid)?;
            let witness = result.decoder.as_ref().expect("achieved");
            json!({
                "achieved": true,
                "header_bits": header_bits,
                "payload_bits": payload_bits,
                "total_bits": stream.len(),
                "distortion": result.distortion,
                "decoder_round_trip": dec == pad_decoder(witness, grid.states)?,
                "sample_distortion": average_distortion(x, &xhat, &model.distortion)?,
                "encoder": encoder_to_text(result.encoder.as_ref().expect("achieved")),
                "decoder": decoder_to_text(witness),
            })
        }
        WrapperOutcome::NotAchievable { best_distortion } => json!({
            "achieved": false,
            "best_distortion": best_distortion,
        }),
    };
    out.report("growth-wrap", summary)
}

fn sr_region(args: &SrArgs, ctx: &Context) -> Result<Report, CliError> {
    let mut a = args.clone();
    overlay!(a, ctx.config.section::<SrArgs>(&["sr", "region"])?; rate, delta_rate, channel3, y_size, block);
    let rows = require(a.channel3, "channel3")?.0;
    let y_size = a.y_size.unwrap_or(2);
    let width = rows.first().map_or(0, Vec::len);
    if y_size == 0 || width % y_size != 0 {
        return Err(CliError::Config(format!(
            "channel3 rows of length {width} do not split over |Y| = {y_size}"
        )));
    }
    let ch = TwoSidedChannel::new(&rows, y_size, width / y_size)
        .map_err(|e| CliError::Config(format!("channel3: {e}")))?;
    let alpha = ch.inputs();
    let x = ctx
        .config
        .sequence(alpha)?
        .ok_or_else(|| CliError::Config("missing field `sequence`".into()))?;
    let rho = ctx.config.distortion(alpha)?;
    let block = a.block.unwrap_or(1);
    let joint = SrJoint::from_empirical(&block_empirical(&x, block)?, &ch)?;
    let (rate, delta_rate) = (
        require(a.rate, "rate")?,
        require(a.delta_rate, "delta_rate")?,
    );
    let region = brute_force_sr_region(
        &joint,
        &rho,
        &rho,
        rate,
        delta_rate,
        SrCaps::full(joint.source_blocks()),
    )?;
    #[derive(Serialize)]
    struct Row {
        d1: f64,
        d2: f64,
        hu: f64,
        hvgu: f64,
    }
    let l = block as f64;
    let frontier: Vec<Row> = region
        .frontier_points()
        .map(|p| Row {
            d1: p.d1,
            d2: p.d2,
            hu: p.rate * l,
            hvgu: p.delta_rate * l,
        })
        .collect();
    let mut out = Artifacts::new(ctx);
    write_csv(
        &out.path("sr_frontier.csv"),
        &frontier,
        &["D1", "D2", "HU", "HVgU"],
    )?;
    write_json(
        &out.path("sr_region.json"),
        &region.frontier_points().collect::<Vec<_>>(),
    )?;
    let summary = json!({
        "rate": rate,
        "delta_rate": delta_rate,
        "block": block,
        "feasible_points": region.points.len(),
        "frontier_points": frontier.len(),
        "hull_points": region.hull.len(),
    });
    out.report("sr-region", summary)
}

fn gen_converse(args: &ConverseArgs, ctx: &Context) -> Result<Report, CliError> {
    let mut a = args.clone();
    overlay!(a, ctx.config.section::<ConverseArgs>(&["gen", "converse"])?; m, blocks, rate, delta, rho0);
    let rho0 = a.rho0.unwrap_or_else(|| vec![0.0, 1.0]);
    let delta = a.delta.unwrap_or(0.11);
    let s = converse_process_generate(
        a.m.unwrap_or(8),
        a.blocks.unwrap_or(16),
        a.rate.unwrap_or(0.5),
        delta,
        &rho0,
        ctx.seed.derive(labels::CONVERSE, 0),
    )?;
    let phi = maxent_distribution(&rho0, delta)?;
    let mut out = Artifacts::new(ctx);
    write_text(
        &out.path("converse.txt"),
        &format!("{}\n", s.sequence().to_digits()),
    )?;
    write_json(&out.path("converse.json"), &s)?;
    let summary = json!({
        "n": s.x.len(),
        "codebook_size": s.codebook.len(),
        "phi": phi.phi,
        "noise_distribution": phi.distribution,
        "mean_noise_cost": s.noise.iter().map(|&z| rho0[z]).sum::<f64>() / s.noise.len().max(1) as f64,
    });
    out.report("gen-converse", summary)
}

fn gen_dms(args: &DmsArgs, ctx: &Context) -> Result<Report, CliError> {
    let mut a = args.clone();
    overlay!(a, ctx.config.section::<DmsArgs>(&["gen", "dms"])?; p, n);
    let p = a.p.unwrap_or_else(|| vec![0.5, 0.5]);
    validate_dmc(std::slice::from_ref(&p)).map_err(|e| CliError::Config(format!("p: {e}")))?;
    let n = a.n.unwrap_or(1024);
    let mut rng = ctx.seed.derive(labels::DMS, 0).generator();
    let x = Sequence::new(
        p.len(),
        (0..n).map(|_| sample_index(&mut rng, &p)).collect(),
    )?;
    let mut out = Artifacts::new(ctx);
    write_text(&out.path("dms.txt"), &format!("{}\n", x.to_digits()))?;
    if ctx.config.has_channel() {
        let model = ctx.config.model()?;
        if model.alpha != p.len() {
            return Err(CliError::Config(
                "channel inputs do not match the source alphabet".into(),
            ));
        }
        let y = sample_side_info(&x, &model.channel, ctx.seed.derive(labels::SIDE_INFO, 0))?;
        write_text(&out.path("dms_y.txt"), &format!("{}\n", y.to_digits()))?;
    }
    let mut counts = vec![0usize; p.len()];
    x.symbols().iter().for_each(|&s| counts[s] += 1);
    out.report("gen-dms", json!({ "n": n, "counts": counts }))
}

fn theorem1(args: &Theorem1Args, ctx: &Context) -> Result<Report, CliError> {
    let mut a = args.clone();
    overlay!(a, ctx.config.section::<Theorem1Args>(&["check", "theorem1"])?; samples, exhaustive, n, rates, blocks, lambdas, restarts);
    let opts = check::Theorem1Options {
        n: a.n.unwrap_or(12),
        samples: if a.exhaustive.unwrap_or(false) {
            None
        } else {
            Some(a.samples.unwrap_or(256))
        },
        rates: a.rates.unwrap_or_else(|| vec![0.0, 0.25, 0.5, 1.0]),
        blocks: a.blocks.unwrap_or_else(|| vec![2, 4]),
        lambdas: a.lambdas.unwrap_or(64),
        restarts: a.restarts.unwrap_or(16),
        seed: ctx.seed,
        budget: ctx.budget,
    };
    let (rows, summary) = check::theorem1_sweep(&opts)?;
    let mut out = Artifacts::new(ctx);
    write_csv(
        &out.path("theorem1.csv"),
        &rows,
        &[
            "sequence",
            "channel",
            "block",
            "rate",
            "states",
            "delay",
            "operational",
            "bound",
            "pass",
        ],
    )?;
    write_json(&out.path("theorem1.json"), &summary)?;
    out.report(
        "theorem1-check",
        serde_json::to_value(&summary).expect("plain data"),
    )
}
