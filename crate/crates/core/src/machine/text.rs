//! Line-based text form of machines. Tables are row-major, one row per line:
//!
//! ```text
//! encoder <states> <alpha>
//! code <codewords of state 0>        ("." is the empty codeword)
//! ...
//! output <f[0][0..alpha]>
//! ...
//! next <g[0][0..alpha]>
//! ...
//! ```
//!
//! ```text
//! decoder <states> <beta> <gamma> <delay>
//! code <codewords of state s>        one line per state
//! next <g'[s][u][0..beta]>           one line per (s, u), s major
//! recon <f'[s][u][0..beta]>          one line per (s, u), s major
//! ```

use std::fmt::Write;

use super::code::{Codeword, PrefixCode};
use super::decoder::FsmDecoder;
use super::encoder::FsmEncoder;
use crate::error::{Error, Result};

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn encoder_to_text(enc: &FsmEncoder) -> String {
    let mut out = format!("encoder {} {}\n", enc.states(), enc.alpha());
    for c in enc.codes() {
        let _ = writeln!(out, "code {c}");
    }
    for row in enc.output_table() {
        let _ = writeln!(out, "output {}", join(row));
    }
    for row in enc.next_table() {
        let _ = writeln!(out, "next {}", join(row));
    }
    out
}

pub fn decoder_to_text(dec: &FsmDecoder) -> String {
    let mut out = format!(
        "decoder {} {} {} {}\n",
        dec.states(),
        dec.beta(),
        dec.gamma(),
        dec.delay()
    );
    for c in dec.codes() {
        let _ = writeln!(out, "code {c}");
    }
    for rows in dec.next_table() {
        for row in rows {
            let _ = writeln!(out, "next {}", join(row));
        }
    }
    for rows in dec.recon_table() {
        for row in rows {
            let _ = writeln!(out, "recon {}", join(row));
        }
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Peekable<Box<dyn Iterator<Item = &'a str> + 'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = &'a str>> = Box::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        );
        Lines {
            inner: it.peekable(),
        }
    }

    fn expect(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let line = self.inner.next().ok_or_else(|| {
            Error::InvalidMachine(format!("expected `{key}` line, found end of text"))
        })?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(Error::InvalidMachine(format!(
                "expected `{key}` line, found {line:?}"
            )));
        }
        Ok(parts.collect())
    }

    fn finish(mut self) -> Result<()> {
        match self.inner.next() {
            None => Ok(()),
            Some(l) => Err(Error::InvalidMachine(format!("trailing line {l:?}"))),
        }
    }

    fn peek_is(&mut self, key: &str) -> bool {
        self.inner
            .peek()
            .is_some_and(|l| l.split_whitespace().next() == Some(key))
    }
}

fn numbers(parts: &[&str], expected: usize) -> Result<Vec<usize>> {
    if parts.len() != expected {
        return Err(Error::InvalidMachine(format!(
            "expected {expected} numbers, found {}",
            parts.len()
        )));
    }
    parts
        .iter()
        .map(|p| {
            p.parse()
                .map_err(|_| Error::InvalidMachine(format!("not a number: {p:?}")))
        })
        .collect()
}

fn code(parts: &[&str]) -> Result<PrefixCode> {
    PrefixCode::new(
        parts
            .iter()
            .map(|p| Codeword::parse(p))
            .collect::<Result<_>>()?,
    )
}

pub fn encoder_from_text(text: &str) -> Result<FsmEncoder> {
    let mut lines = Lines::new(text);
    let head = numbers(&lines.expect("encoder")?, 2)?;
    let (m, alpha) = (head[0], head[1]);
    let codes = (0..m)
        .map(|_| code(&lines.expect("code")?))
        .collect::<Result<Vec<_>>>()?;
    let output = (0..m)
        .map(|_| numbers(&lines.expect("output")?, alpha))
        .collect::<Result<Vec<_>>>()?;
    let next = (0..m)
        .map(|_| numbers(&lines.expect("next")?, alpha))
        .collect::<Result<Vec<_>>>()?;
    lines.finish()?;
    FsmEncoder::new(alpha, codes, output, next)
}

pub fn decoder_from_text(text: &str) -> Result<FsmDecoder> {
    let mut lines = Lines::new(text);
    let head = numbers(&lines.expect("decoder")?, 4)?;
    let (m, beta, gamma, delay) = (head[0], head[1], head[2], head[3]);
    let codes = (0..m)
        .map(|_| code(&lines.expect("code")?))
        .collect::<Result<Vec<_>>>()?;
    let mut table = |key: &str| -> Result<Vec<Vec<Vec<usize>>>> {
        codes
            .iter()
            .map(|c| {
                (0..c.len())
                    .map(|_| numbers(&lines.expect(key)?, beta))
                    .collect()
            })
            .collect()
    };
    let next = table("next")?;
    let recon = table("recon")?;
    lines.finish()?;
    FsmDecoder::new(beta, gamma, delay, codes, next, recon)
}

/// True when the text describes an encoder.
pub fn is_encoder_text(text: &str) -> bool {
    Lines::new(text).peek_is("encoder")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoder_round_trip() {
        let enc = FsmEncoder::new(
            2,
            vec![PrefixCode::canonical(&[1, 2]).unwrap(), PrefixCode::idle()],
            vec![vec![1, 0], vec![0, 0]],
            vec![vec![1, 0], vec![0, 1]],
        )
        .unwrap();
        let text = encoder_to_text(&enc);
        assert!(is_encoder_text(&text));
        assert_eq!(
            text,
            "encoder 2 2\ncode 0 10\ncode .\noutput 1 0\noutput 0 0\nnext 1 0\nnext 0 1\n"
        );
        assert_eq!(encoder_from_text(&text).unwrap(), enc);
    }

    #[test]
    fn decoder_round_trip() {
        let code = PrefixCode::canonical(&[1, 1]).unwrap();
        let dec = FsmDecoder::new(
            2,
            2,
            1,
            vec![code.clone(), code],
            vec![vec![vec![0, 1], vec![1, 0]], vec![vec![1, 0], vec![0, 1]]],
            vec![vec![vec![0, 1], vec![1, 0]], vec![vec![1, 1], vec![0, 0]]],
        )
        .unwrap();
        let text = decoder_to_text(&dec);
        assert!(!is_encoder_text(&text));
        assert_eq!(decoder_from_text(&text).unwrap(), dec);
    }

    #[test]
    fn malformed_text() {
        assert!(encoder_from_text("encoder 1 2\ncode 0 1\noutput 0 1\n").is_err());
        assert!(encoder_from_text("encoder 1 2\ncode 0 1\noutput 0 1\nnext 0 0\nextra\n").is_err());
        assert!(decoder_from_text(
            "decoder 1 2 2 0\ncode 0 0\nnext 0 0\nnext 0 0\nrecon 0 0\nrecon 0 0\n"
        )
        .is_err());
    }
}
