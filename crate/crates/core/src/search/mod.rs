//! Exhaustive operational optimum over small finite-state pairs.
//!
//! The search domain is built once per [`SearchGrid`]:
//!
//! * codes: the idle code and every canonical prefix code with at most
//!   `alpha` codewords of length at most `max_len`, one per length multiset;
//! * encoders: every table over those codes with at most `states` states,
//!   all reachable from state 0;
//! * decoders: a parse machine (codes drawn from the encoder's codes,
//!   updated by the codeword only) times an optional side-information
//!   component, with at most `states` states in total, every delay up to
//!   `delay`, and every reconstruction table. Two parse states always carry
//!   different codes; equal codes are the side component with transitions
//!   that ignore `y`.
//!
//! For a given sequence only the parse-state and codeword-label trajectory
//! of a pair matters, so pairs are grouped by that trajectory and the
//! reconstruction table is chosen optimally cell by cell instead of being
//! enumerated. [`enumerate_pairs`] walks the same domain literally.

use std::collections::HashMap;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::machine::{decoder_to_text, encoder_to_text, FsmDecoder, FsmEncoder, PrefixCode};
use crate::model::{Channel, DistortionMatrix, Sequence};


/// Default cap on the enumeration size.
pub const DEFAULT_BUDGET: u128 = 100_000_000;
/// Largest state count the search supports.
pub const MAX_SEARCH_STATES: usize = 2;
/// Longest codeword accepted in a grid.
pub const MAX_GRID_LEN: u8 = 16;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SearchGrid {
    /// Maximum number of states of either machine.
    pub states: usize,
    /// Maximum decoding delay.
    pub delay: usize,
    pub max_len: u8,
    pub alpha: usize,
    pub beta: usize,
    pub gamma: usize,
    /// Restrict to codes with Kraft sum exactly one.
    pub complete_codes_only: bool,
    pub budget: u128,
}

impl SearchGrid {
    pub fn new(
        states: usize,
        delay: usize,
        max_len: u8,
        alpha: usize,
        beta: usize,
        gamma: usize,
    ) -> Result<Self> {
        let grid = SearchGrid {
            states,
            delay,
            max_len,
            alpha,
            beta,
            gamma,
            complete_codes_only: false,
            budget: DEFAULT_BUDGET,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Binary source, side information and reconstruction.
    pub fn binary(states: usize, delay: usize, max_len: u8) -> Result<Self> {
        SearchGrid::new(states, delay, max_len, 2, 2, 2)
    }

    pub fn with_budget(mut self, budget: u128) -> Self {
        self.budget = budget;
        self
    }

    pub fn complete_only(mut self) -> Self {
        self.complete_codes_only = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.states == 0 {
            return Err(Error::InvalidParameter(
                "grid needs at least one state".into(),
            ));
        }
        if self.states > MAX_SEARCH_STATES {
            return Err(Error::CapExceeded(format!(
                "{} states > {MAX_SEARCH_STATES}",
                self.states
            )));
        }
        if self.max_len == 0 || self.max_len > MAX_GRID_LEN {
            return Err(Error::InvalidParameter(format!(
                "max_len must be in 1..={MAX_GRID_LEN}"
            )));
        }
        if self.alpha == 0 || self.beta == 0 || self.gamma == 0 {
            return Err(Error::InvalidParameter("alphabets must be nonempty".into()));
        }
        if self.alpha * MAX_SEARCH_STATES > u8::MAX as usize {
            return Err(Error::CapExceeded(format!(
                "alphabet {} too large for the search",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Every code of the grid: the idle code first, then canonical codes
    /// ordered by size and length multiset.
    pub fn codes(&self) -> Vec<PrefixCode> {
        let full = 1u64 << self.max_len;
        let mut multisets: Vec<Vec<u8>> = Vec::new();
        fn rec(
            prefix: &mut Vec<u8>,
            k: usize,
            min: u8,
            max: u8,
            used: u64,
            full: u64,
            out: &mut Vec<Vec<u8>>,
        ) {
            if prefix.len() == k {
                out.push(prefix.clone());
                return;
            }
            for l in min..=max {
                let w = full >> l;
                if used + w <= full {
                    prefix.push(l);
                    rec(prefix, k, l, max, used + w, full, out);
                    prefix.pop();
                }
            }
        }
        for k in 1..=self.alpha {
            rec(&mut Vec::new(), k, 1, self.max_len, 0, full, &mut multisets);
        }
        let mut codes = vec![PrefixCode::idle()];
        codes.extend(
            multisets
                .iter()
                .map(|l| PrefixCode::canonical(l).expect("Kraft checked")),
        );
        if self.complete_codes_only {
            codes.retain(PrefixCode::is_complete);
        }
        codes
    }
}

/// Encoder tables with codes given as indices into the grid's code list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct EncoderSpec {
    pub codes: Vec<usize>,
    pub output: Vec<Vec<usize>>,
    pub next: Vec<Vec<usize>>,
}

impl EncoderSpec {
    fn states(&self) -> usize {
        self.codes.len()
    }

    fn build(&self, alpha: usize, codes: &[PrefixCode]) -> FsmEncoder {
        FsmEncoder::new(
            alpha,
            self.codes.iter().map(|&c| codes[c].clone()).collect(),
            self.output.clone(),
            self.next.clone(),
        )
        .expect("enumerated encoders are valid")
    }
}

/// Parse machine: a code per parse state and `next[q][u]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct ParseSpec {
    pub codes: Vec<usize>,
    pub next: Vec<Vec<usize>>,
}

/// An encoder together with a parse machine that can follow it.
#[derive(Clone, Debug)]
pub(crate) struct Structure {
    pub encoder: usize,
    pub parse: ParseSpec,
}

/// How the full decoder state is formed from the parse state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecoderShape {
    /// One state.
    Single,
    /// One parse state and a two-state side component driven by `(u, y)`.
    Side,
    /// Two parse states; the decoder state is the parse state.
    Parse,
}

/// All tuples of `len` digits below `base`, first digit most significant.
fn tuples(base: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..base).map(move |d| {
                    let mut t = t.clone();
                    t.push(d);
                    t
                })
            })
            .collect();
    }
    out
}

fn all_reachable(next: &[Vec<usize>]) -> bool {
    let m = next.len();
    let mut seen = vec![false; m];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(s) = stack.pop() {
        for &t in &next[s] {
            if !seen[t] {
                seen[t] = true;
                stack.push(t);
            }
        }
    }
    seen.into_iter().all(|b| b)
}

fn sat_pow(base: u128, exp: usize) -> u128 {
    (0..exp).fold(1u128, |acc, _| acc.saturating_mul(base))
}

/// The precomputed search domain of a grid.
#[derive(Clone, Debug)]
pub struct SearchIndex {
    grid: SearchGrid,
    codes: Vec<PrefixCode>,
    encoders: Vec<EncoderSpec>,
    structures: Vec<Structure>,
}

impl SearchIndex {
    /// Builds the domain and checks the search size against the budget.
    pub fn new(grid: &SearchGrid) -> Result<Self> {
        let index = SearchIndex::build(grid)?;
        let estimate = index.search_size();
        if estimate > grid.budget {
            return Err(Error::BudgetExceeded {
                estimate,
                budget: grid.budget,
            });
        }
        Ok(index)
    }

    fn build(grid: &SearchGrid) -> Result<Self> {
        grid.validate()?;
        let codes = grid.codes();
        let alpha = grid.alpha;
        // Closed-form bound on the structure enumeration itself.
        let per_state = |m: usize| -> u128 {
            codes
                .iter()
                .map(|c| sat_pow(c.len() as u128, alpha))
                .fold(0u128, u128::saturating_add)
                .saturating_mul(sat_pow(m as u128, alpha))
        };
        let encoder_bound = (1..=grid.states)
            .map(|m| sat_pow(per_state(m), m))
            .fold(0u128, u128::saturating_add);
        let parse_bound = 1u128
            + if grid.states >= 2 {
                sat_pow(2, 2 + 2 * alpha)
            } else {
                0
            };
        let work = encoder_bound.saturating_mul(parse_bound);
        if work > grid.budget {
            return Err(Error::BudgetExceeded {
                estimate: work,
                budget: grid.budget,
            });
        }

        let mut encoders = Vec::new();
        for m in 1..=grid.states {
            let options: Vec<(usize, Vec<usize>, Vec<usize>)> = (0..codes.len())
                .flat_map(|c| {
                    let fs = tuples(codes[c].len(), alpha);
                    let gs = tuples(m, alpha);
                    fs.into_iter()
                        .flat_map(move |f| gs.clone().into_iter().map(move |g| (c, f.clone(), g)))
                })
                .collect();
            for pick in tuples(options.len(), m) {
                let spec = EncoderSpec {
                    codes: pick.iter().map(|&i| options[i].0).collect(),
                    output: pick.iter().map(|&i| options[i].1.clone()).collect(),
                    next: pick.iter().map(|&i| options[i].2.clone()).collect(),
                };
                if all_reachable(&spec.next) {
                    encoders.push(spec);
                }
            }
        }

        let mut structures = Vec::new();
        for (ei, enc) in encoders.iter().enumerate() {
            let mut distinct = enc.codes.clone();
            distinct.sort_unstable();
            distinct.dedup();
            for &c0 in &distinct {
                let parse = ParseSpec {
                    codes: vec![c0],
                    next: vec![vec![0; codes[c0].len()]],
                };
                if joint_reach(enc, &parse, &codes, alpha).is_some() {
                    structures.push(Structure { encoder: ei, parse });
                }
            }
            if grid.states < 2 {
                continue;
            }
            // Equal codes on both parse states are covered by the side shape.
            for &c0 in &distinct {
                for &c1 in distinct.iter().filter(|&&c1| c1 != c0) {
                    for g0 in tuples(2, codes[c0].len()) {
                        for g1 in tuples(2, codes[c1].len()) {
                            let parse = ParseSpec {
                                codes: vec![c0, c1],
                                next: vec![g0.clone(), g1],
                            };
                            if joint_reach(enc, &parse, &codes, alpha).is_some_and(|seen| seen[1]) {
                                structures.push(Structure { encoder: ei, parse });
                            }
                        }
                    }
                }
            }
        }
        Ok(SearchIndex {
            grid: grid.clone(),
            codes,
            encoders,
            structures,
        })
    }

    pub fn grid(&self) -> &SearchGrid {
        &self.grid
    }

    pub fn codes(&self) -> &[PrefixCode] {
        &self.codes
    }

    pub fn encoder_count(&self) -> usize {
        self.encoders.len()
    }

    pub fn structure_count(&self) -> usize {
        self.structures.len()
    }

    fn shapes(&self, st: &Structure) -> Vec<DecoderShape> {
        match (st.parse.codes.len(), self.grid.states >= 2) {
            (1, false) => vec![DecoderShape::Single],
            (1, true) => vec![DecoderShape::Single, DecoderShape::Side],
            _ => vec![DecoderShape::Parse],
        }
    }

    fn side_tables(&self, words: usize) -> u128 {
        sat_pow(2, 2 * words * self.grid.beta)
    }

    /// Number of candidate evaluations of the search: one per structure,
    /// decoder shape, side table and delay. Each candidate stands for all
    /// of its reconstruction tables, which are optimized in closed form.
    pub fn search_size(&self) -> u128 {
        let delays = self.grid.delay as u128 + 1;
        self.structures
            .iter()
            .map(|st| {
                self.shapes(st)
                    .into_iter()
                    .map(|shape| match shape {
                        DecoderShape::Side => self.side_tables(self.codes[st.parse.codes[0]].len()),
                        _ => 1,
                    })
                    .fold(0u128, u128::saturating_add)
            })
            .fold(0u128, u128::saturating_add)
            .saturating_mul(delays)
    }

    fn cells(&self, st: &Structure, shape: DecoderShape) -> usize {
        let words: usize = st.parse.codes.iter().map(|&c| self.codes[c].len()).sum();
        let states = if shape == DecoderShape::Side { 2 } else { 1 };
        states * words * self.grid.beta
    }

    fn shape_count(&self, st: &Structure, shape: DecoderShape) -> u128 {
        let side = match shape {
            DecoderShape::Side => self.side_tables(self.codes[st.parse.codes[0]].len()),
            _ => 1,
        };
        side.saturating_mul(self.grid.delay as u128 + 1)
            .saturating_mul(sat_pow(self.grid.gamma as u128, self.cells(st, shape)))
    }

    /// Runs a structure on `xs`: packed `(parse state, label)` trajectory,
    /// total bits, and for every parse state the codeword index of each
    /// label in order of first appearance.
    fn run(&self, st: &Structure, xs: &[usize]) -> (Vec<u8>, u64, Vec<Vec<usize>>) {
        let enc = &self.encoders[st.encoder];
        let alpha = self.grid.alpha;
        let mut labels: Vec<Vec<usize>> = vec![Vec::new(); st.parse.codes.len()];
        let mut key = Vec::with_capacity(xs.len());
        let (mut s, mut q, mut bits) = (0usize, 0usize, 0u64);
        for &x in xs {
            let w = self.codes[enc.codes[s]].word(enc.output[s][x]);
            let u = self.codes[st.parse.codes[q]]
                .index_of(&w)
                .expect("structures are compatible");
            let label = match labels[q].iter().position(|&v| v == u) {
                Some(l) => l,
                None => {
                    labels[q].push(u);
                    labels[q].len() - 1
                }
            };
            key.push((q * alpha + label) as u8);
            bits += u64::from(w.len);
            s = enc.next[s][x];
            q = st.parse.next[q][u];
        }
        (key, bits, labels)
    }

    /// Assembles a decoder around a structure. `next` and `recon` receive
    /// `(decoder state, parse state, codeword index, y)`.
    fn assemble(
        &self,
        st: &Structure,
        shape: DecoderShape,
        delay: usize,
        next: impl Fn(usize, usize, usize, usize) -> usize,
        recon: impl Fn(usize, usize, usize, usize) -> usize,
    ) -> FsmDecoder {
        let beta = self.grid.beta;
        let parse_of = |s: usize| if shape == DecoderShape::Parse { s } else { 0 };
        let states = if shape == DecoderShape::Single { 1 } else { 2 };
        let codes: Vec<PrefixCode> = (0..states)
            .map(|s| self.codes[st.parse.codes[parse_of(s)]].clone())
            .collect();
        let table = |f: &dyn Fn(usize, usize, usize, usize) -> usize| -> Vec<Vec<Vec<usize>>> {
            (0..states)
                .map(|s| {
                    (0..codes[s].len())
                        .map(|u| (0..beta).map(|y| f(s, parse_of(s), u, y)).collect())
                        .collect()
                })
                .collect()
        };
        let next_table = table(&next);
        let recon_table = table(&recon);
        FsmDecoder::new(beta, self.grid.gamma, delay, codes, next_table, recon_table)
            .expect("assembled decoders are valid")
    }

    /// Groups the structures by their trajectory on `x`.
    pub fn keys(&self, x: &Sequence) -> Result<KeySet<'_>> {
        if x.is_empty() {
            return Err(Error::InvalidParameter("empty sequence".into()));
        }
        if x.alphabet().size() > self.grid.alpha {
            return Err(Error::InvalidParameter(
                "sequence alphabet exceeds the grid".into(),
            ));
        }
        let xs = x.symbols().to_vec();
        let mut single: Vec<KeyEntry> = Vec::new();
        let mut parse: Vec<KeyEntry> = Vec::new();
        let mut single_ids: HashMap<Vec<u8>, usize> = HashMap::new();
        let mut parse_ids: HashMap<Vec<u8>, usize> = HashMap::new();
        for (si, st) in self.structures.iter().enumerate() {
            let (key, bits, _) = self.run(st, &xs);
            let (entries, ids) = if st.parse.codes.len() == 1 {
                (&mut single, &mut single_ids)
            } else {
                (&mut parse, &mut parse_ids)
            };
            let id = *ids.entry(key).or_insert_with_key(|k| {
                entries.push(KeyEntry {
                    key: k.clone(),
                    best: [None, None],
                });
                entries.len() - 1
            });
            let entry = &mut entries[id];
            let one_state = self.encoders[st.encoder].states() == 1 && st.parse.codes.len() == 1;
            for class in 0..2 {
                if class == 0 && !one_state {
                    continue;
                }
                if entry.best[class].is_none_or(|(b, _)| bits < b) {
                    entry.best[class] = Some((bits, si));
                }
            }
        }
        Ok(KeySet {
            index: self,
            xs,
            single,
            parse,
        })
    }
}

/// Joint reachability of (encoder state, parse state); `None` when some
/// reachable pair emits a codeword outside the parse state's code.
fn joint_reach(
    enc: &EncoderSpec,
    parse: &ParseSpec,
    codes: &[PrefixCode],
    alpha: usize,
) -> Option<Vec<bool>> {
    let m = enc.states();
    let qn = parse.codes.len();
    let mut seen = vec![false; m * qn];
    let mut stack = vec![(0usize, 0usize)];
    seen[0] = true;
    let mut parse_seen = vec![false; qn];
    while let Some((s, q)) = stack.pop() {
        parse_seen[q] = true;
        for x in 0..alpha {
            let w = codes[enc.codes[s]].word(enc.output[s][x]);
            let u = codes[parse.codes[q]].index_of(&w)?;
            let (t, r) = (enc.next[s][x], parse.next[q][u]);
            if !seen[t * qn + r] {
                seen[t * qn + r] = true;
                stack.push((t, r));
            }
        }
    }
    Some(parse_seen)
}

#[derive(Clone, Debug)]
struct KeyEntry {
    key: Vec<u8>,
    /// Fewest bits and the first structure reaching them, for one-state
    /// pairs (`[0]`) and for all pairs (`[1]`).
    best: [Option<(u64, usize)>; 2],
}

/// The structures of an index grouped by their trajectory on one sequence.
pub struct KeySet<'a> {
    index: &'a SearchIndex,
    xs: Vec<usize>,
    single: Vec<KeyEntry>,
    parse: Vec<KeyEntry>,
}

impl<'a> KeySet<'a> {
    pub fn distinct_trajectories(&self) -> usize {
        self.single.len() + self.parse.len()
    }

    /// Best distortion for every (state count, delay, bit count).
    pub fn profile(&self, ch: &Channel, rho: &DistortionMatrix) -> Result<OperationalProfile<'_>> {
        let grid = &self.index.grid;
        if ch.inputs() != grid.alpha || ch.outputs() != grid.beta {
            return Err(Error::InvalidParameter(
                "channel does not match the grid alphabets".into(),
            ));
        }
        if rho.source_size() != grid.alpha || rho.recon_size() != grid.gamma {
            return Err(Error::InvalidParameter(
                "distortion does not match the grid alphabets".into(),
            ));
        }
        let n = self.xs.len();
        let max_bits = n * grid.max_len as usize;
        let mut profile = OperationalProfile {
            keys: self,
            max_bits,
            table: vec![None; MAX_SEARCH_STATES * (grid.delay + 1) * (max_bits + 1)],
        };
        let mut ev = Evaluator::new(&self.xs, ch, rho, grid.delay);
        let alpha = grid.alpha;
        for entry in &self.single {
            ev.accumulate(&entry.key, 1, alpha, |_, _, _| 0);
            for (class, best) in entry.best.iter().enumerate() {
                if let Some((bits, st)) = *best {
                    profile.offer(&ev, class, bits, st, DecoderShape::Single, &[], alpha);
                }
            }
            if grid.states < 2 {
                continue;
            }
            let Some((bits, st)) = entry.best[1] else {
                continue;
            };
            let k = entry.key.iter().map(|&p| p as usize + 1).max().unwrap_or(1);
            let entries = 2 * k * grid.beta;
            for t in 0u64..(1u64 << entries) {
                let side: Vec<usize> = (0..entries).map(|j| ((t >> j) & 1) as usize).collect();
                ev.accumulate(&entry.key, 2, k, |s, p, y| {
                    side[(s * k + p) * grid.beta + y]
                });
                profile.offer(&ev, 1, bits, st, DecoderShape::Side, &side, k);
            }
        }
        for entry in &self.parse {
            let Some((bits, st)) = entry.best[1] else {
                continue;
            };
            ev.accumulate(&entry.key, 1, 2 * alpha, |_, _, _| 0);
            profile.offer(&ev, 1, bits, st, DecoderShape::Parse, &[], 2 * alpha);
        }
        Ok(profile)
    }
}

/// Per-cell posterior mass over the delayed source symbol, for every delay.
struct Evaluator<'e> {
    xs: &'e [usize],
    ch: &'e Channel,
    rho: &'e DistortionMatrix,
    max_delay: usize,
    /// `pad[d]`: distortion charged for the last `d` positions.
    pad: Vec<f64>,
    /// `w[(d * cells + cell) * alpha + x]`.
    w: Vec<f64>,
    cells: usize,
}

impl<'e> Evaluator<'e> {
    fn new(xs: &'e [usize], ch: &'e Channel, rho: &'e DistortionMatrix, max_delay: usize) -> Self {
        let n = xs.len();
        let pad = (0..=max_delay)
            .map(|d| {
                xs[n.saturating_sub(d)..]
                    .iter()
                    .map(|&x| rho.get(x, 0))
                    .sum()
            })
            .collect();
        Evaluator {
            xs,
            ch,
            rho,
            max_delay,
            pad,
            w: Vec::new(),
            cells: 0,
        }
    }

    /// Forward pass of the decoder-state distribution. Cells are indexed
    /// `(state * width + packed label) * beta + y`.
    fn accumulate(
        &mut self,
        key: &[u8],
        states: usize,
        width: usize,
        next: impl Fn(usize, usize, usize) -> usize,
    ) {
        let beta = self.ch.outputs();
        let alpha = self.ch.inputs();
        self.cells = states * width * beta;
        self.w.clear();
        self.w
            .resize((self.max_delay + 1) * self.cells * alpha, 0.0);
        let mut pi = [0.0f64; MAX_SEARCH_STATES];
        pi[0] = 1.0;
        for (i, &p) in key.iter().enumerate() {
            let p = p as usize;
            let row = self.ch.row(self.xs[i]);
            let mut next_pi = [0.0f64; MAX_SEARCH_STATES];
            for s in 0..states {
                if pi[s] == 0.0 {
                    continue;
                }
                for (y, &py) in row.iter().enumerate() {
                    if py == 0.0 {
                        continue;
                    }
                    let mass = pi[s] * py;
                    let cell = (s * width + p) * beta + y;
                    for d in 0..=self.max_delay.min(i) {
                        self.w[(d * self.cells + cell) * alpha + self.xs[i - d]] += mass;
                    }
                    if states > 1 {
                        next_pi[next(s, p, y)] += mass;
                    }
                }
            }
            if states > 1 {
                pi = next_pi;
            }
        }
    }

    fn cell_cost(&self, d: usize, cell: usize, xh: usize) -> f64 {
        let alpha = self.ch.inputs();
        let base = (d * self.cells + cell) * alpha;
        (0..alpha)
            .map(|x| self.w[base + x] * self.rho.get(x, xh))
            .sum()
    }

    fn best_symbol(&self, d: usize, cell: usize) -> (usize, f64) {
        (0..self.rho.recon_size())
            .map(|xh| (xh, self.cell_cost(d, cell, xh)))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    }

    fn distortion(&self, d: usize) -> f64 {
        let total: f64 = (0..self.cells).map(|c| self.best_symbol(d, c).1).sum();
        (total + self.pad[d]) / self.xs.len() as f64
    }

    fn recon(&self, d: usize) -> Vec<usize> {
        (0..self.cells).map(|c| self.best_symbol(d, c).0).collect()
    }
}

#[derive(Clone, Debug)]
struct Candidate {
    distortion: f64,
    bits: u64,
    structure: usize,
    shape: DecoderShape,
    delay: usize,
    width: usize,
    side: Vec<usize>,
    recon: Vec<usize>,
}

/// Best candidate per (state count, delay, bit count) for one sequence,
/// channel and distortion measure.
pub struct OperationalProfile<'a> {
    keys: &'a KeySet<'a>,
    max_bits: usize,
    table: Vec<Option<Candidate>>,
}

impl<'a> OperationalProfile<'a> {
    fn slot(&self, class: usize, delay: usize, bits: usize) -> usize {
        (class * (self.keys.index.grid.delay + 1) + delay) * (self.max_bits + 1) + bits
    }

    #[allow(clippy::too_many_arguments)]
    fn offer(
        &mut self,
        ev: &Evaluator<'_>,
        class: usize,
        bits: u64,
        structure: usize,
        shape: DecoderShape,
        side: &[usize],
        width: usize,
    ) {
        for delay in 0..=self.keys.index.grid.delay {
            let distortion = ev.distortion(delay);
            let slot = self.slot(class, delay, bits as usize);
            if self.table[slot]
                .as_ref()
                .is_none_or(|c| distortion < c.distortion)
            {
                self.table[slot] = Some(Candidate {
                    distortion,
                    bits,
                    structure,
                    shape,
                    delay,
                    width,
                    side: side.to_vec(),
                    recon: ev.recon(delay),
                });
            }
        }
    }

    /// Optimum over pairs with at most `states` states, delay at most
    /// `delay` and at most `floor(n * rate)` bits.
    pub fn query(&self, rate: f64, states: usize, delay: usize) -> Result<OperationalResult> {
        self.query_where(rate, states, delay, |d| d <= delay)
    }

    /// As [`query`](Self::query) with the delay fixed.
    pub fn query_exact_delay(
        &self,
        rate: f64,
        states: usize,
        delay: usize,
    ) -> Result<OperationalResult> {
        self.query_where(rate, states, delay, |d| d == delay)
    }

    fn query_where(
        &self,
        rate: f64,
        states: usize,
        delay: usize,
        keep: impl Fn(usize) -> bool,
    ) -> Result<OperationalResult> {
        let grid = &self.keys.index.grid;
        if rate.is_nan() || rate < 0.0 || rate.is_infinite() {
            return Err(Error::InvalidParameter(format!(
                "rate {rate} must be finite and nonnegative"
            )));
        }
        if states == 0 || states > grid.states || delay > grid.delay {
            return Err(Error::InvalidParameter("query outside the grid".into()));
        }
        let n = self.keys.xs.len();
        let limit = bit_budget(n, rate).min(self.max_bits as u64) as usize;
        let mut best: Option<(&Candidate, usize)> = None;
        for bits in 0..=limit {
            for class in 0..states {
                for d in (0..=grid.delay).filter(|&d| keep(d)) {
                    if let Some(c) = &self.table[self.slot(class, d, bits)] {
                        if best.is_none_or(|(b, _)| c.distortion < b.distortion) {
                            best = Some((c, class + 1));
                        }
                    }
                }
            }
        }
        Ok(match best {
            None => OperationalResult {
                distortion: f64::INFINITY,
                rate: 0.0,
                bits: 0,
                feasible: false,
                states: 0,
                delay: 0,
                encoder: None,
                decoder: None,
            },
            Some((c, class)) => {
                let (enc, dec) = self.witness(c);
                OperationalResult {
                    distortion: c.distortion,
                    rate: c.bits as f64 / n as f64,
                    bits: c.bits,
                    feasible: true,
                    states: class,
                    delay: c.delay,
                    encoder: Some(enc),
                    decoder: Some(dec),
                }
            }
        })
    }

    fn witness(&self, c: &Candidate) -> (FsmEncoder, FsmDecoder) {
        let index = self.keys.index;
        let grid = &index.grid;
        let st = &index.structures[c.structure];
        let (_, _, labels) = index.run(st, &self.keys.xs);
        let label = |q: usize, u: usize| labels[q].iter().position(|&v| v == u);
        let beta = grid.beta;
        let alpha = grid.alpha;
        let enc = index.encoders[st.encoder].build(alpha, &index.codes);
        let width = c.width;
        let dec = match c.shape {
            DecoderShape::Single => index.assemble(
                st,
                c.shape,
                c.delay,
                |_, _, _, _| 0,
                |_, q, u, y| label(q, u).map_or(0, |l| c.recon[l * beta + y]),
            ),
            DecoderShape::Parse => index.assemble(
                st,
                c.shape,
                c.delay,
                |_, q, u, _| st.parse.next[q][u],
                |_, q, u, y| label(q, u).map_or(0, |l| c.recon[(q * alpha + l) * beta + y]),
            ),
            DecoderShape::Side => index.assemble(
                st,
                c.shape,
                c.delay,
                |s, q, u, y| label(q, u).map_or(0, |l| c.side[(s * width + l) * beta + y]),
                |s, q, u, y| label(q, u).map_or(0, |l| c.recon[(s * width + l) * beta + y]),
            ),
        };
        (enc, dec)
    }
}

/// `floor(n * rate)` with a little slack for rates such as `1/3`.
pub fn bit_budget(n: usize, rate: f64) -> u64 {
    (n as f64 * rate + 1e-9).floor().max(0.0) as u64
}

fn serialize_encoder<S: Serializer>(
    e: &Option<FsmEncoder>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match e {
        Some(e) => s.serialize_some(&encoder_to_text(e)),
        None => s.serialize_none(),
    }
}

fn serialize_decoder<S: Serializer>(
    d: &Option<FsmDecoder>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match d {
        Some(d) => s.serialize_some(&decoder_to_text(d)),
        None => s.serialize_none(),
    }
}

/// The operational optimum with a witness pair in machine text format.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OperationalResult {
    pub distortion: f64,
    /// Bits used per source letter.
    pub rate: f64,
    pub bits: u64,
    pub feasible: bool,
    /// Larger state count of the two witness machines' search class.
    pub states: usize,
    pub delay: usize,
    #[serde(serialize_with = "serialize_encoder")]
    pub encoder: Option<FsmEncoder>,
    #[serde(serialize_with = "serialize_decoder")]
    pub decoder: Option<FsmDecoder>,
}

/// Minimum exact expected distortion over the grid's pairs that spend at
/// most `floor(n R)` bits on `x`.
pub fn operational_optimum(
    x: &Sequence,
    rate: f64,
    grid: &SearchGrid,
    ch: &Channel,
    rho: &DistortionMatrix,
) -> Result<OperationalResult> {
    let index = SearchIndex::new(grid)?;
    let keys = index.keys(x)?;
    let profile = keys.profile(ch, rho)?;
    profile.query(rate, grid.states, grid.delay)
}

/// Number of pairs [`enumerate_pairs`] yields, saturating at `u128::MAX`.
pub fn count_pairs(grid: &SearchGrid) -> Result<u128> {
    let index = SearchIndex::build(grid)?;
    Ok(index.pair_count())
}

impl SearchIndex {
    fn pair_count(&self) -> u128 {
        self.structures
            .iter()
            .flat_map(|st| {
                self.shapes(st)
                    .into_iter()
                    .map(move |sh| self.shape_count(st, sh))
            })
            .fold(0u128, u128::saturating_add)
    }
}

/// Every pair of the grid, literally, with all reconstruction tables.
pub fn enumerate_pairs(grid: &SearchGrid) -> Result<PairIter> {
    let index = SearchIndex::build(grid)?;
    let estimate = index.pair_count();
    if estimate > grid.budget {
        return Err(Error::BudgetExceeded {
            estimate,
            budget: grid.budget,
        });
    }
    let shapes = index
        .structures
        .iter()
        .enumerate()
        .flat_map(|(i, st)| index.shapes(st).into_iter().map(move |sh| (i, sh)))
        .map(|(i, sh)| (i, sh, index.shape_count(&index.structures[i], sh)))
        .collect();
    Ok(PairIter {
        index,
        shapes,
        pos: 0,
        local: 0,
    })
}

pub struct PairIter {
    index: SearchIndex,
    shapes: Vec<(usize, DecoderShape, u128)>,
    pos: usize,
    local: u128,
}

impl PairIter {
    fn pair(&self, si: usize, shape: DecoderShape, mut local: u128) -> (FsmEncoder, FsmDecoder) {
        let index = &self.index;
        let grid = &index.grid;
        let st = &index.structures[si];
        let beta = grid.beta;
        let cells = index.cells(st, shape);
        let mut recon = vec![0usize; cells];
        for slot in recon.iter_mut().rev() {
            *slot = (local % grid.gamma as u128) as usize;
            local /= grid.gamma as u128;
        }
        let delay = (local % (grid.delay as u128 + 1)) as usize;
        local /= grid.delay as u128 + 1;
        let words: Vec<usize> = st
            .parse
            .codes
            .iter()
            .map(|&c| index.codes[c].len())
            .collect();
        let side_len = if shape == DecoderShape::Side {
            2 * words[0] * beta
        } else {
            0
        };
        let mut side = vec![0usize; side_len];
        for slot in side.iter_mut().rev() {
            *slot = (local % 2) as usize;
            local /= 2;
        }
        // Cells run over (decoder state, codeword, y) with states laid out
        // in order; for the parse shape state q owns words[q] codewords.
        let offset = |s: usize| -> usize {
            match shape {
                DecoderShape::Parse => words[..s].iter().sum::<usize>(),
                _ => s * words[0],
            }
        };
        let enc = index.encoders[st.encoder].build(grid.alpha, &index.codes);
        let dec = index.assemble(
            st,
            shape,
            delay,
            |s, q, u, y| match shape {
                DecoderShape::Single => 0,
                DecoderShape::Parse => st.parse.next[q][u],
                DecoderShape::Side => side[(s * words[0] + u) * beta + y],
            },
            |s, _, u, y| recon[(offset(s) + u) * beta + y],
        );
        (enc, dec)
    }
}

impl Iterator for PairIter {
    type Item = (FsmEncoder, FsmDecoder);

    fn next(&mut self) -> Option<Self::Item> {
        while let Some(&(si, shape, count)) = self.shapes.get(self.pos) {
            if self.local < count {
                let item = self.pair(si, shape, self.local);
                self.local += 1;
                return Some(item);
            }
            self.pos += 1;
            self.local = 0;
        }
        None
    }
}

/// The encoder of every structure of the grid paired with a decoder that
/// parses it (all-zero reconstruction), one pair per structure.
pub fn parse_compatible_pairs(grid: &SearchGrid) -> Result<Vec<(FsmEncoder, FsmDecoder)>> {
    let index = SearchIndex::build(grid)?;
    Ok(index
        .structures
        .iter()
        .map(|st| {
            let shape = if st.parse.codes.len() == 1 {
                DecoderShape::Single
            } else {
                DecoderShape::Parse
            };
            let enc = index.encoders[st.encoder].build(grid.alpha, &index.codes);
            let dec = index.assemble(
                st,
                shape,
                0,
                |_, q, u, _| st.parse.next[q][u],
                |_, _, _, _| 0,
            );
            (enc, dec)
        })
        .collect())
}
