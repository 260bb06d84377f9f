//! Synthetic joint models on the unit square.
//!
//! Every model answers rectangle-mass and marginal-quantile queries exactly
//! (both marginal CDFs are piecewise linear), which is what lets the lab put
//! an exact population on one side of each comparison.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, DATA_STREAM};

/// Tolerance on the total mass of a piecewise-constant model.
pub const MODEL_MASS_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::X => f.write_str("x"),
            Axis::Y => f.write_str("y"),
        }
    }
}

/// Masses of a density that is constant on each block of a regular
/// `rows x cols` partition of the unit square.
///
/// Row `i` covers `y in [i/rows, (i+1)/rows]` and column `j` covers
/// `x in [j/cols, (j+1)/cols]`, so row 0 is the bottom of the square.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMasses {
    rows: usize,
    cols: usize,
    masses: Vec<f64>,
}

impl BlockMasses {
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let rows = matrix.len();
        if rows == 0 {
            return Err(Error::InvalidModel("block mass matrix has no rows".into()));
        }
        let cols = matrix[0].len();
        if cols == 0 {
            return Err(Error::InvalidModel("block mass matrix has no columns".into()));
        }
        if matrix.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidModel("block mass matrix is ragged".into()));
        }
        let masses: Vec<f64> = matrix.into_iter().flatten().collect();
        if let Some(bad) = masses.iter().find(|m| !m.is_finite() || **m < 0.0) {
            return Err(Error::InvalidModel(format!("block mass {bad} is negative or not finite")));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MODEL_MASS_TOLERANCE {
            return Err(Error::InvalidModel(format!("block masses sum to {total}, expected 1")));
        }
        Ok(Self { rows, cols, masses })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn mass(&self, row: usize, col: usize) -> f64 {
        self.masses[row * self.cols + col]
    }

    pub fn to_matrix(&self) -> Vec<Vec<f64>> {
        self.masses.chunks(self.cols).map(|r| r.to_vec()).collect()
    }

    fn marginal(&self, axis: Axis) -> Vec<f64> {
        match axis {
            Axis::X => (0..self.cols)
                .map(|j| (0..self.rows).map(|i| self.mass(i, j)).sum())
                .collect(),
            Axis::Y => self.masses.chunks(self.cols).map(|r| r.iter().sum()).collect(),
        }
    }
}

/// Fraction of block `index` (of `blocks` equal blocks on [0,1]) covered by
/// the interval `[lo, hi]`.
fn block_fraction(lo: f64, hi: f64, index: usize, blocks: usize) -> f64 {
    let scale = blocks as f64;
    let j = index as f64;
    let at = |t: f64| (t * scale - j).clamp(0.0, 1.0);
    at(hi) - at(lo)
}

/// Strictly increasing piecewise-linear bijection of [0,1] onto itself.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneMap {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl MonotoneMap {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidModel("monotone map needs at least two breakpoints".into()));
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = breakpoints.into_iter().unzip();
        if xs[0] != 0.0 || ys[0] != 0.0 {
            return Err(Error::InvalidModel("monotone map must start at (0, 0)".into()));
        }
        if *xs.last().unwrap() != 1.0 || *ys.last().unwrap() != 1.0 {
            return Err(Error::InvalidModel("monotone map must end at (1, 1)".into()));
        }
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&xs) || !increasing(&ys) {
            return Err(Error::InvalidModel(
                "monotone map breakpoints must be strictly increasing in both coordinates".into(),
            ));
        }
        Ok(Self { xs, ys })
    }

    pub fn identity() -> Self {
        Self { xs: vec![0.0, 1.0], ys: vec![0.0, 1.0] }
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    fn interpolate(from: &[f64], to: &[f64], t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        let seg = from.partition_point(|&b| b < t).clamp(1, from.len() - 1);
        let (a0, a1) = (from[seg - 1], from[seg]);
        let (b0, b1) = (to[seg - 1], to[seg]);
        b0 + (t - a0) * (b1 - b0) / (a1 - a0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        Self::interpolate(&self.xs, &self.ys, x)
    }

    pub fn inverse(&self, y: f64) -> f64 {
        Self::interpolate(&self.ys, &self.xs, y)
    }
}

/// Joint distribution of `(X, Y)` on the unit square.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpec", into = "ModelSpec")]
pub enum JointModel {
    PiecewiseConstant(BlockMasses),
    /// `X ~ U[0,1]` and `Y = f(X)`.
    DeterministicMonotone(MonotoneMap),
    IndependentUniform,
}

/// On-disk model schema.
#[derive(Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
enum ModelSpec {
    PiecewiseConstant { block_masses: Vec<Vec<f64>> },
    DeterministicMonotone { breakpoints: Vec<[f64; 2]> },
    IndependentUniform {},
}

impl TryFrom<ModelSpec> for JointModel {
    type Error = Error;

    fn try_from(spec: ModelSpec) -> Result<Self> {
        Ok(match spec {
            ModelSpec::PiecewiseConstant { block_masses } => {
                JointModel::PiecewiseConstant(BlockMasses::new(block_masses)?)
            }
            ModelSpec::DeterministicMonotone { breakpoints } => JointModel::DeterministicMonotone(
                MonotoneMap::new(breakpoints.into_iter().map(|[x, y]| (x, y)).collect())?,
            ),
            ModelSpec::IndependentUniform {} => JointModel::IndependentUniform,
        })
    }
}

impl From<JointModel> for ModelSpec {
    fn from(model: JointModel) -> Self {
        match model {
            JointModel::PiecewiseConstant(b) => ModelSpec::PiecewiseConstant { block_masses: b.to_matrix() },
            JointModel::DeterministicMonotone(f) => ModelSpec::DeterministicMonotone {
                breakpoints: f.breakpoints().map(|(x, y)| [x, y]).collect(),
            },
            JointModel::IndependentUniform => ModelSpec::IndependentUniform {},
        }
    }
}

fn check_unit(value: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::InvalidArgument(format!("{what} = {value} is outside [0, 1]")));
    }
    Ok(())
}

impl JointModel {
    pub fn piecewise_constant(block_masses: Vec<Vec<f64>>) -> Result<Self> {
        Ok(JointModel::PiecewiseConstant(BlockMasses::new(block_masses)?))
    }

    pub fn deterministic_monotone(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        Ok(JointModel::DeterministicMonotone(MonotoneMap::new(breakpoints)?))
    }

    pub fn identity() -> Self {
        JointModel::DeterministicMonotone(MonotoneMap::identity())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidModel(e.to_string()))
    }

    /// Exact probability of `[x_lo, x_hi] x [y_lo, y_hi]`.
    pub fn rect_mass(&self, x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Result<f64> {
        for (v, name) in [(x_lo, "x_lo"), (x_hi, "x_hi"), (y_lo, "y_lo"), (y_hi, "y_hi")] {
            check_unit(v, name)?;
        }
        if x_lo > x_hi || y_lo > y_hi {
            return Err(Error::InvalidArgument(format!(
                "rectangle bounds inverted: [{x_lo}, {x_hi}] x [{y_lo}, {y_hi}]"
            )));
        }
        Ok(self.rect_mass_unchecked(x_lo, x_hi, y_lo, y_hi))
    }

    pub(crate) fn rect_mass_unchecked(&self, x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> f64 {
        match self {
            JointModel::IndependentUniform => (x_hi - x_lo) * (y_hi - y_lo),
            JointModel::DeterministicMonotone(f) => {
                let lo = x_lo.max(f.inverse(y_lo));
                let hi = x_hi.min(f.inverse(y_hi));
                (hi - lo).max(0.0)
            }
            JointModel::PiecewiseConstant(b) => {
                let mut total = 0.0;
                for i in 0..b.rows {
                    let fy = block_fraction(y_lo, y_hi, i, b.rows);
                    if fy == 0.0 {
                        continue;
                    }
                    for j in 0..b.cols {
                        let fx = block_fraction(x_lo, x_hi, j, b.cols);
                        total += b.mass(i, j) * fx * fy;
                    }
                }
                total
            }
        }
    }

    /// Marginal CDF `P(axis <= c)`.
    pub fn marginal_cdf(&self, axis: Axis, c: f64) -> f64 {
        let c = c.clamp(0.0, 1.0);
        match (self, axis) {
            (JointModel::IndependentUniform, _) => c,
            (JointModel::DeterministicMonotone(_), Axis::X) => c,
            (JointModel::DeterministicMonotone(f), Axis::Y) => f.inverse(c),
            (JointModel::PiecewiseConstant(b), _) => {
                let marginal = b.marginal(axis);
                let blocks = marginal.len();
                marginal
                    .iter()
                    .enumerate()
                    .map(|(j, m)| m * block_fraction(0.0, c, j, blocks))
                    .sum()
            }
        }
    }

    /// Smallest coordinate `c` with `P(axis <= c) >= p`.
    pub fn marginal_quantile(&self, axis: Axis, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("probability {p} is outside [0, 1]")));
        }
        Ok(match (self, axis) {
            (JointModel::IndependentUniform, _) => p,
            (JointModel::DeterministicMonotone(_), Axis::X) => p,
            (JointModel::DeterministicMonotone(f), Axis::Y) => f.eval(p),
            (JointModel::PiecewiseConstant(b), _) => {
                if p == 0.0 {
                    return Ok(0.0);
                }
                let marginal = b.marginal(axis);
                let blocks = marginal.len() as f64;
                let mut cum = 0.0;
                for (j, &m) in marginal.iter().enumerate() {
                    if m > 0.0 && cum + m >= p {
                        let t = ((p - cum) / m).clamp(0.0, 1.0);
                        return Ok((j as f64 + t) / blocks);
                    }
                    cum += m;
                }
                1.0
            }
        })
    }

    /// True when the marginal CDF on `axis` has an interval of zero density.
    pub fn has_flat_marginal(&self, axis: Axis) -> bool {
        match self {
            JointModel::PiecewiseConstant(b) => b.marginal(axis).iter().any(|&m| m <= 0.0),
            _ => false,
        }
    }

    /// `n` iid draws, bit-identical for a given seed.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample size must be at least 1".into()));
        }
        let mut rng = rng::stream(seed, DATA_STREAM);
        let points = match self {
            JointModel::IndependentUniform => (0..n)
                .map(|_| {
                    let x = rng::unit_f64(&mut rng);
                    (x, rng::unit_f64(&mut rng))
                })
                .collect(),
            JointModel::DeterministicMonotone(f) => (0..n)
                .map(|_| {
                    let x = rng::unit_f64(&mut rng);
                    (x, f.eval(x))
                })
                .collect(),
            JointModel::PiecewiseConstant(b) => {
                // Positive-mass blocks only; a draw landing exactly on a
                // cumulative boundary goes to the lower block.
                let mut upper = Vec::new();
                let mut cum = 0.0;
                for (idx, &m) in b.masses.iter().enumerate() {
                    if m > 0.0 {
                        cum += m;
                        upper.push((cum, idx));
                    }
                }
                (0..n)
                    .map(|_| {
                        let u = rng::unit_f64(&mut rng);
                        let pos = upper.partition_point(|&(c, _)| c < u).min(upper.len() - 1);
                        let idx = upper[pos].1;
                        let (row, col) = (idx / b.cols, idx % b.cols);
                        let x = (col as f64 + rng::unit_f64(&mut rng)) / b.cols as f64;
                        let y = (row as f64 + rng::unit_f64(&mut rng)) / b.rows as f64;
                        (x.min(1.0), y.min(1.0))
                    })
                    .collect()
            }
        };
        Ok(Dataset { points, seed })
    }
}

/// A finite sample of points in the unit square.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    points: Vec<(f64, f64)>,
    seed: u64,
}

impl Dataset {
    /// External data; use seed 0 when the points were not generated here.
    pub fn new(points: Vec<(f64, f64)>, seed: u64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for (i, &(x, y)) in points.iter().enumerate() {
            if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
                return Err(Error::InvalidArgument(format!("point {i} = ({x}, {y}) is outside [0,1]^2")));
            }
        }
        Ok(Self { points, seed })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn coords(&self, axis: Axis) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(move |&(x, y)| match axis {
            Axis::X => x,
            Axis::Y => y,
        })
    }
}
