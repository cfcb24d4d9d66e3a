//! Alphabets, sequences, channels and distortion measures.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{sample_index, Seed};

/// Absolute tolerance for every stochasticity check.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// A finite alphabet `{0, .., size - 1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Alphabet(usize);

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidParameter(
                "alphabet size must be at least 1".into(),
            ));
        }
        Ok(Alphabet(size))
    }

    pub fn size(self) -> usize {
        self.0
    }

    pub fn contains(self, symbol: usize) -> bool {
        symbol < self.0
    }
}

/// A finite sequence over a declared alphabet.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Sequence {
    alphabet: Alphabet,
    symbols: Vec<usize>,
}

impl Sequence {
    pub fn new(alphabet: usize, symbols: Vec<usize>) -> Result<Self> {
        let alphabet = Alphabet::new(alphabet)?;
        if let Some(&bad) = symbols.iter().find(|&&s| !alphabet.contains(s)) {
            return Err(Error::SymbolOutOfRange {
                symbol: bad,
                size: alphabet.size(),
            });
        }
        Ok(Sequence { alphabet, symbols })
    }

    /// Parses a string of decimal digits, e.g. `"0110"`.
    pub fn from_digits(alphabet: usize, digits: &str) -> Result<Self> {
        let symbols = digits
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| {
                c.to_digit(36)
                    .map(|d| d as usize)
                    .ok_or_else(|| Error::InvalidParameter(format!("not a digit: {c:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Sequence::new(alphabet, symbols)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn to_digits(&self) -> String {
        self.symbols
            .iter()
            .map(|&s| std::char::from_digit(s as u32, 36).unwrap_or('?'))
            .collect()
    }
}

fn check_table(rows: &[Vec<f64>]) -> Result<usize> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return Err(Error::Shape(
            "table needs at least one row and one column".into(),
        ));
    }
    for (r, row) in rows.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::Shape(format!(
                "row {r} has {} entries, expected {cols}",
                row.len()
            )));
        }
    }
    Ok(cols)
}

/// A discrete memoryless channel `P(y|x)`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    inputs: usize,
    outputs: usize,
    table: Vec<f64>,
}

/// Validates a row-stochastic table. Rows are never renormalized.
pub fn validate_dmc(matrix: &[Vec<f64>]) -> Result<Channel> {
    let cols = check_table(matrix)?;
    for (r, row) in matrix.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::NegativeEntry {
                    row: r,
                    col: c,
                    value: v,
                });
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::NonStochasticRow { row: r, sum });
        }
    }
    Ok(Channel {
        inputs: matrix.len(),
        outputs: cols,
        table: matrix.iter().flatten().copied().collect(),
    })
}

impl Channel {
    pub fn identity(size: usize) -> Self {
        let rows: Vec<Vec<f64>> = (0..size)
            .map(|x| (0..size).map(|y| if x == y { 1.0 } else { 0.0 }).collect())
            .collect();
        validate_dmc(&rows).expect("identity is stochastic")
    }

    /// Binary symmetric channel with crossover `p`.
    pub fn bsc(p: f64) -> Result<Self> {
        validate_dmc(&[vec![1.0 - p, p], vec![p, 1.0 - p]])
    }

    /// Every row uniform: the output carries no information about the input.
    pub fn uniform(inputs: usize, outputs: usize) -> Self {
        let rows = vec![vec![1.0 / outputs as f64; outputs]; inputs];
        // 1/outputs summed may miss 1 by an ulp or two; well inside the tolerance.
        validate_dmc(&rows).expect("uniform rows are stochastic")
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.table[x * self.outputs + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.table[x * self.outputs..(x + 1) * self.outputs]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.inputs).map(|x| self.row(x).to_vec()).collect()
    }

    /// True when every row is a point mass.
    pub fn is_deterministic(&self) -> bool {
        self.table.iter().all(|&p| p == 0.0 || p == 1.0)
    }
}

/// Single-letter distortion `rho[x][xhat]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistortionMatrix {
    rows: usize,
    cols: usize,
    table: Vec<f64>,
    max: f64,
}

impl DistortionMatrix {
    pub fn new(matrix: &[Vec<f64>]) -> Result<Self> {
        let cols = check_table(matrix)?;
        for (r, row) in matrix.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::NegativeEntry {
                        row: r,
                        col: c,
                        value: v,
                    });
                }
            }
        }
        let table: Vec<f64> = matrix.iter().flatten().copied().collect();
        let max = table.iter().copied().fold(0.0, f64::max);
        Ok(DistortionMatrix {
            rows: matrix.len(),
            cols,
            table,
            max,
        })
    }

    pub fn hamming(size: usize) -> Self {
        let rows: Vec<Vec<f64>> = (0..size)
            .map(|x| (0..size).map(|y| if x == y { 0.0 } else { 1.0 }).collect())
            .collect();
        DistortionMatrix::new(&rows).expect("hamming is valid")
    }

    /// Difference distortion `rho[x][xhat] = rho0((x - xhat) mod alpha)`.
    pub fn difference(rho0: &[f64]) -> Result<Self> {
        let a = rho0.len();
        let rows: Vec<Vec<f64>> = (0..a)
            .map(|x| (0..a).map(|xh| rho0[(x + a - xh) % a]).collect())
            .collect();
        DistortionMatrix::new(&rows)
    }

    pub fn source_size(&self) -> usize {
        self.rows
    }

    pub fn recon_size(&self) -> usize {
        self.cols
    }

    pub fn get(&self, x: usize, xhat: usize) -> f64 {
        self.table[x * self.cols + xhat]
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|x| self.table[x * self.cols..(x + 1) * self.cols].to_vec())
            .collect()
    }
}

/// Passes `x` through the channel letter by letter.
pub fn sample_side_info(x: &Sequence, ch: &Channel, seed: Seed) -> Result<Sequence> {
    let mut rng = seed.generator();
    sample_side_info_with(x, ch, &mut rng)
}

pub(crate) fn sample_side_info_with<R: Rng + ?Sized>(
    x: &Sequence,
    ch: &Channel,
    rng: &mut R,
) -> Result<Sequence> {
    if x.alphabet().size() > ch.inputs() {
        return Err(Error::SymbolOutOfRange {
            symbol: x.alphabet().size() - 1,
            size: ch.inputs(),
        });
    }
    let ys = x
        .symbols()
        .iter()
        .map(|&xi| sample_index(rng, ch.row(xi)))
        .collect();
    Sequence::new(ch.outputs(), ys)
}

/// `(1/n) sum rho[x_i][xhat_i]`; zero for empty input.
pub fn average_distortion(x: &Sequence, xh: &Sequence, rho: &DistortionMatrix) -> Result<f64> {
    if x.len() != xh.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: xh.len(),
        });
    }
    if x.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = x
        .symbols()
        .iter()
        .zip(xh.symbols())
        .map(|(&a, &b)| rho.get(a, b))
        .sum();
    Ok(total / x.len() as f64)
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum::<f64>()
        // A point mass sums to -0.0.
        + 0.0
}

/// Binary entropy function.
pub fn h2(p: f64) -> f64 {
    entropy(&[p, 1.0 - p])
}
