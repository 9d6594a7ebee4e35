//! Channel, policy, kernel and distribution types.
//!
//! Every probability container validates on construction: entries must lie
//! in `[0, 1]` and each conditional row must sum to one within
//! [`LOAD_TOLERANCE`]. Rows that are off by more than [`SUM_TOLERANCE`] are
//! renormalized so that downstream code can rely on the tighter bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-sum tolerance accepted from external input.
pub const LOAD_TOLERANCE: f64 = 1e-9;

/// Row-sum tolerance guaranteed after construction.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// A finite alphabet `{0, .., size - 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    size: usize,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Validation("alphabet size must be at least 1".into()));
        }
        Ok(Alphabet { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }
}

fn check_rows(data: &mut [f64], row_len: usize, what: &str) -> Result<()> {
    for (r, row) in data.chunks_mut(row_len).enumerate() {
        for (c, &p) in row.iter().enumerate() {
            if !(0.0..=1.0 + LOAD_TOLERANCE).contains(&p) {
                return Err(Error::Validation(format!(
                    "{what} row {r} entry {c} = {p} is not a probability"
                )));
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > LOAD_TOLERANCE {
            return Err(Error::Validation(format!("{what} row {r} sums to {sum}, not 1")));
        }
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            row.iter_mut().for_each(|p| *p /= sum);
        }
    }
    Ok(())
}

fn flatten_rows(rows: Vec<Vec<f64>>, width: usize, what: &'static str) -> Result<Vec<f64>> {
    let mut flat = Vec::with_capacity(rows.len() * width);
    for row in rows {
        if row.len() != width {
            return Err(Error::DimensionMismatch {
                what,
                expected: width,
                found: row.len(),
            });
        }
        flat.extend(row);
    }
    Ok(flat)
}

/// A channel `P(b | b_prev, a)` whose output depends on the current input
/// and the previous output only.
///
/// The kernel is stored densely, row-major by `(b_prev, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitMemoryChannel {
    input: Alphabet,
    output: Alphabet,
    kernel: Vec<f64>,
}

impl UnitMemoryChannel {
    /// Builds a channel from a flat `[b_prev][a][b]` array.
    pub fn new(input_size: usize, output_size: usize, mut kernel: Vec<f64>) -> Result<Self> {
        let input = Alphabet::new(input_size)?;
        let output = Alphabet::new(output_size)?;
        let expected = output_size * input_size * output_size;
        if kernel.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "channel kernel",
                expected,
                found: kernel.len(),
            });
        }
        check_rows(&mut kernel, output_size, "channel kernel")?;
        Ok(UnitMemoryChannel { input, output, kernel })
    }

    /// Builds a channel from a nested `[b_prev][a][b]` array.
    pub fn from_nested(kernel: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let output_size = kernel.len();
        let input_size = kernel.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(output_size * input_size * output_size);
        for block in kernel {
            if block.len() != input_size {
                return Err(Error::DimensionMismatch {
                    what: "channel kernel inputs",
                    expected: input_size,
                    found: block.len(),
                });
            }
            flat.extend(flatten_rows(block, output_size, "channel kernel outputs")?);
        }
        Self::new(input_size, output_size, flat)
    }

    /// Channel that ignores the previous output: `P(b | a)` embedded as a
    /// unit-memory channel.
    pub fn memoryless(rows: Vec<Vec<f64>>) -> Result<Self> {
        let output_size = rows.first().map_or(0, Vec::len);
        let nested = (0..output_size).map(|_| rows.clone()).collect();
        Self::from_nested(nested)
    }

    pub fn input_size(&self) -> usize {
        self.input.size()
    }

    pub fn output_size(&self) -> usize {
        self.output.size()
    }

    pub fn input_alphabet(&self) -> Alphabet {
        self.input
    }

    pub fn output_alphabet(&self) -> Alphabet {
        self.output
    }

    #[inline]
    pub fn prob(&self, b_prev: usize, a: usize, b: usize) -> f64 {
        self.kernel[(b_prev * self.input.size() + a) * self.output.size() + b]
    }

    /// The output distribution `P(. | b_prev, a)`.
    #[inline]
    pub fn row(&self, b_prev: usize, a: usize) -> &[f64] {
        let n = self.output.size();
        let start = (b_prev * self.input.size() + a) * n;
        &self.kernel[start..start + n]
    }

    /// The flat `[b_prev][a][b]` kernel.
    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.output_size())
            .map(|bp| (0..self.input_size()).map(|a| self.row(bp, a).to_vec()).collect())
            .collect()
    }
}

/// A conditional input distribution `pi(a | b_prev)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputPolicy {
    states: usize,
    inputs: usize,
    matrix: Vec<f64>,
    /// Stage index for per-stage policies; `None` means time-invariant.
    pub stage: Option<usize>,
}

impl InputPolicy {
    /// Builds a policy from a flat `[b_prev][a]` array.
    pub fn new(states: usize, inputs: usize, mut matrix: Vec<f64>) -> Result<Self> {
        Alphabet::new(states)?;
        Alphabet::new(inputs)?;
        if matrix.len() != states * inputs {
            return Err(Error::DimensionMismatch {
                what: "policy matrix",
                expected: states * inputs,
                found: matrix.len(),
            });
        }
        check_rows(&mut matrix, inputs, "policy")?;
        Ok(InputPolicy {
            states,
            inputs,
            matrix,
            stage: None,
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let states = rows.len();
        let inputs = rows.first().map_or(0, Vec::len);
        let flat = flatten_rows(rows, inputs, "policy row")?;
        Self::new(states, inputs, flat)
    }

    pub fn uniform(states: usize, inputs: usize) -> Result<Self> {
        Self::new(states, inputs, vec![1.0 / inputs as f64; states * inputs])
    }

    /// Uniform policy shaped for `channel`.
    pub fn uniform_for(channel: &UnitMemoryChannel) -> Self {
        Self::uniform(channel.output_size(), channel.input_size()).expect("channel alphabets are non-empty")
    }

    pub fn with_stage(mut self, stage: usize) -> Self {
        self.stage = Some(stage);
        self
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    #[inline]
    pub fn prob(&self, b_prev: usize, a: usize) -> f64 {
        self.matrix[b_prev * self.inputs + a]
    }

    #[inline]
    pub fn row(&self, b_prev: usize) -> &[f64] {
        &self.matrix[b_prev * self.inputs..(b_prev + 1) * self.inputs]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.states).map(|b| self.row(b).to_vec()).collect()
    }

    /// Largest absolute entry-wise difference to `other`.
    pub fn sup_distance(&self, other: &InputPolicy) -> f64 {
        self.matrix
            .iter()
            .zip(&other.matrix)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Errors unless the policy is shaped for `channel`.
    pub fn check_against(&self, channel: &UnitMemoryChannel) -> Result<()> {
        if self.states != channel.output_size() {
            return Err(Error::DimensionMismatch {
                what: "policy states",
                expected: channel.output_size(),
                found: self.states,
            });
        }
        if self.inputs != channel.input_size() {
            return Err(Error::DimensionMismatch {
                what: "policy inputs",
                expected: channel.input_size(),
                found: self.inputs,
            });
        }
        Ok(())
    }
}

/// Transition matrix `P(b | b_prev)` of the output process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputKernel {
    size: usize,
    matrix: Vec<f64>,
}

impl OutputKernel {
    pub fn new(size: usize, mut matrix: Vec<f64>) -> Result<Self> {
        Alphabet::new(size)?;
        if matrix.len() != size * size {
            return Err(Error::DimensionMismatch {
                what: "output kernel",
                expected: size * size,
                found: matrix.len(),
            });
        }
        check_rows(&mut matrix, size, "output kernel")?;
        Ok(OutputKernel { size, matrix })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        let flat = flatten_rows(rows, size, "output kernel row")?;
        Self::new(size, flat)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn prob(&self, b_prev: usize, b: usize) -> f64 {
        self.matrix[b_prev * self.size + b]
    }

    #[inline]
    pub fn row(&self, b_prev: usize) -> &[f64] {
        &self.matrix[b_prev * self.size..(b_prev + 1) * self.size]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.size).map(|b| self.row(b).to_vec()).collect()
    }
}

/// A probability vector over a finite alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    weights: Vec<f64>,
}

impl Distribution {
    pub fn new(mut weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Validation("distribution must be non-empty".into()));
        }
        let n = weights.len();
        check_rows(&mut weights, n, "distribution")?;
        Ok(Distribution { weights })
    }

    pub fn uniform(size: usize) -> Result<Self> {
        Alphabet::new(size)?;
        Ok(Distribution {
            weights: vec![1.0 / size as f64; size],
        })
    }

    pub fn point_mass(size: usize, at: usize) -> Result<Self> {
        Alphabet::new(size)?;
        if at >= size {
            return Err(Error::Validation(format!(
                "point mass at {at} outside alphabet of size {size}"
            )));
        }
        let mut weights = vec![0.0; size];
        weights[at] = 1.0;
        Ok(Distribution { weights })
    }

    /// Wraps weights that the caller guarantees are a probability vector.
    pub(crate) fn from_trusted(weights: Vec<f64>) -> Self {
        Distribution { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}
