use super::decoder::{fsm_decode, FsmDecoder};
use super::encoder::{fsm_encode, FsmEncoder};
use crate::error::{Error, Result};
use crate::model::{
    average_distortion, sample_side_info_with, Channel, DistortionMatrix, Sequence,
};
use crate::rng::Seed;

fn check_alphabets(
    x: &Sequence,
    enc: &FsmEncoder,
    dec: &FsmDecoder,
    ch: &Channel,
    rho: &DistortionMatrix,
) -> Result<()> {
    let fail = |what: &str| {
        Err(Error::InvalidParameter(format!(
            "inconsistent alphabets: {what}"
        )))
    };
    if x.alphabet().size() > enc.alpha() || enc.alpha() != ch.inputs() {
        return fail("source vs encoder vs channel");
    }
    if dec.beta() != ch.outputs() {
        return fail("channel output vs decoder");
    }
    if rho.source_size() != enc.alpha() || rho.recon_size() < dec.gamma() {
        return fail("distortion table");
    }
    Ok(())
}

/// Per-step decoder-state distributions `pi_1..pi_n` together with the
/// exact expected distortion.
pub struct ExactTrace {
    pub distortion: f64,
    pub state_marginals: Vec<Vec<f64>>,
}

/// Exact `(1/n) sum E rho(x_i, Xhat_i)` over the channel, by forward
/// recursion on the decoder-state distribution.
pub fn expected_distortion_exact(
    x: &Sequence,
    enc: &FsmEncoder,
    dec: &FsmDecoder,
    ch: &Channel,
    rho: &DistortionMatrix,
) -> Result<f64> {
    Ok(exact_trace(x, enc, dec, ch, rho)?.distortion)
}

pub fn exact_trace(
    x: &Sequence,
    enc: &FsmEncoder,
    dec: &FsmDecoder,
    ch: &Channel,
    rho: &DistortionMatrix,
) -> Result<ExactTrace> {
    check_alphabets(x, enc, dec, ch, rho)?;
    let n = x.len();
    if n == 0 {
        return Ok(ExactTrace {
            distortion: 0.0,
            state_marginals: Vec::new(),
        });
    }
    let xs = x.symbols();
    let d = dec.delay();
    let m = dec.states();
    let e = fsm_encode(x, enc)?;
    let mut pi = vec![0.0; m];
    pi[0] = 1.0;
    let mut marginals = Vec::with_capacity(n);
    let mut total = 0.0;
    for i in 0..n {
        marginals.push(pi.clone());
        let w = e.codewords[i];
        let row = ch.row(xs[i]);
        let mut next = vec![0.0; m];
        for s in 0..m {
            if pi[s] == 0.0 {
                continue;
            }
            let u = dec
                .code(s)
                .index_of(&w)
                .ok_or(Error::UnknownCodeword { position: i })?;
            for (y, &py) in row.iter().enumerate() {
                if py == 0.0 {
                    continue;
                }
                let mass = pi[s] * py;
                if i >= d {
                    total += mass * rho.get(xs[i - d], dec.recon(s, u, y));
                }
                next[dec.next(s, u, y)] += mass;
            }
        }
        pi = next;
    }
    for &xj in &xs[n.saturating_sub(d)..] {
        total += rho.get(xj, 0);
    }
    Ok(ExactTrace {
        distortion: total / n as f64,
        state_marginals: marginals,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Average realized distortion over independent channel draws.
pub fn monte_carlo_distortion(
    x: &Sequence,
    enc: &FsmEncoder,
    dec: &FsmDecoder,
    ch: &Channel,
    rho: &DistortionMatrix,
    samples: usize,
    seed: Seed,
) -> Result<MonteCarloEstimate> {
    check_alphabets(x, enc, dec, ch, rho)?;
    let e = fsm_encode(x, enc)?;
    let mut rng = seed.generator();
    let mut values = Vec::with_capacity(samples);
    for _ in 0..samples {
        let y = sample_side_info_with(x, ch, &mut rng)?;
        let xh = fsm_decode(&e.codewords, &y, dec)?;
        values.push(average_distortion(x, &xh, rho)?);
    }
    Ok(summarize(&values))
}

pub(crate) fn summarize(values: &[f64]) -> MonteCarloEstimate {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    MonteCarloEstimate {
        mean,
        std_error: (var / k).sqrt(),
        samples: values.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::code::PrefixCode;

    fn constant_zero() -> FsmDecoder {
        FsmDecoder::memoryless_side(2, &[0, 0]).unwrap()
    }

    #[test]
    fn fixed_output_counts_ones() {
        let x = Sequence::from_digits(2, "0110100").unwrap();
        let d = expected_distortion_exact(
            &x,
            &FsmEncoder::idle(2),
            &constant_zero(),
            &Channel::bsc(0.3).unwrap(),
            &DistortionMatrix::hamming(2),
        )
        .unwrap();
        assert!((d - 3.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_side_info() {
        let x = Sequence::from_digits(2, "0110100").unwrap();
        let pass = FsmDecoder::memoryless_side(2, &[0, 1]).unwrap();
        let d = expected_distortion_exact(
            &x,
            &FsmEncoder::idle(2),
            &pass,
            &Channel::identity(2),
            &DistortionMatrix::hamming(2),
        )
        .unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn bsc_pass_through_matches_crossover() {
        let x = Sequence::from_digits(2, "0110100111010").unwrap();
        let pass = FsmDecoder::memoryless_side(2, &[0, 1]).unwrap();
        let ch = Channel::bsc(0.2).unwrap();
        let rho = DistortionMatrix::hamming(2);
        let exact = expected_distortion_exact(&x, &FsmEncoder::idle(2), &pass, &ch, &rho).unwrap();
        assert!((exact - 0.2).abs() < 1e-12);
        let mc =
            monte_carlo_distortion(&x, &FsmEncoder::idle(2), &pass, &ch, &rho, 100_000, Seed(5))
                .unwrap();
        assert!((mc.mean - 0.2).abs() < 0.01);
    }

    #[test]
    fn delay_charges_padding() {
        // Verbatim code with delay 1: every output is right, the last is padded.
        let enc = FsmEncoder::verbatim(2).unwrap();
        let dec = FsmDecoder::new(
            2,
            2,
            1,
            vec![PrefixCode::canonical(&[1, 1]).unwrap()],
            vec![vec![vec![0, 0], vec![0, 0]]],
            vec![vec![vec![0, 0], vec![1, 1]]],
        )
        .unwrap();
        let x = Sequence::from_digits(2, "0111").unwrap();
        let d = expected_distortion_exact(
            &x,
            &enc,
            &dec,
            &Channel::bsc(0.1).unwrap(),
            &DistortionMatrix::hamming(2),
        )
        .unwrap();
        // xhat = (u2, u3, u4, pad) = 1110 against x = 0111.
        assert!((d - 2.0 / 4.0).abs() < 1e-15);
    }
}
