//! Axis-aligned grids, the discrete distributions they induce, and the
//! straddle masses used by the decomposition bound.

use serde::{Deserialize, Serialize};

use crate::dist::{Axis, Dataset, JointModel};
use crate::error::{Error, Result};

/// Grid given by interior cut coordinates. Columns are split by `x_cuts`,
/// rows by `y_cuts`; cell `(i, j)` is row `i`, column `j`, counted from the
/// origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct GridPartition {
    x_cuts: Vec<f64>,
    y_cuts: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridSpec {
    x_cuts: Vec<f64>,
    y_cuts: Vec<f64>,
}

impl TryFrom<GridSpec> for GridPartition {
    type Error = Error;

    fn try_from(spec: GridSpec) -> Result<Self> {
        GridPartition::new(spec.x_cuts, spec.y_cuts)
    }
}

impl From<GridPartition> for GridSpec {
    fn from(g: GridPartition) -> Self {
        GridSpec { x_cuts: g.x_cuts, y_cuts: g.y_cuts }
    }
}

fn check_cuts(cuts: &[f64], axis: Axis) -> Result<()> {
    if let Some(c) = cuts.iter().find(|c| !(**c > 0.0 && **c < 1.0)) {
        return Err(Error::InvalidGrid(format!("{axis} cut {c} is not inside (0, 1)")));
    }
    if cuts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid(format!("{axis} cuts are not strictly increasing")));
    }
    Ok(())
}

fn edges(cuts: &[f64]) -> Vec<f64> {
    let mut e = Vec::with_capacity(cuts.len() + 2);
    e.push(0.0);
    e.extend_from_slice(cuts);
    e.push(1.0);
    e
}

/// Index of the interval containing `v`; a value on a cut belongs to the
/// lower interval.
pub(crate) fn bin_of(cuts: &[f64], v: f64) -> usize {
    cuts.partition_point(|&c| c < v)
}

impl GridPartition {
    pub fn new(x_cuts: Vec<f64>, y_cuts: Vec<f64>) -> Result<Self> {
        check_cuts(&x_cuts, Axis::X)?;
        check_cuts(&y_cuts, Axis::Y)?;
        Ok(Self { x_cuts, y_cuts })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidGrid(e.to_string()))
    }

    pub fn x_cuts(&self) -> &[f64] {
        &self.x_cuts
    }

    pub fn y_cuts(&self) -> &[f64] {
        &self.y_cuts
    }

    pub fn cuts(&self, axis: Axis) -> &[f64] {
        match axis {
            Axis::X => &self.x_cuts,
            Axis::Y => &self.y_cuts,
        }
    }

    pub fn rows(&self) -> usize {
        self.y_cuts.len() + 1
    }

    pub fn cols(&self) -> usize {
        self.x_cuts.len() + 1
    }

    pub fn cells(&self) -> usize {
        self.rows() * self.cols()
    }

    /// Whether every cut of `self` is also a cut of `other`.
    pub fn is_subgrid_of(&self, other: &GridPartition) -> bool {
        let contained = |mine: &[f64], theirs: &[f64]| mine.iter().all(|c| theirs.contains(c));
        contained(&self.x_cuts, &other.x_cuts) && contained(&self.y_cuts, &other.y_cuts)
    }

    /// Cell `(row, col)` holding a point, lower-index cell on ties.
    pub fn cell_of(&self, x: f64, y: f64) -> (usize, usize) {
        (bin_of(&self.y_cuts, y), bin_of(&self.x_cuts, x))
    }
}

/// Slack allowed on the total mass of a grid distribution: `1e-12` plus one
/// rounding unit per cell.
fn mass_tolerance(cells: usize) -> f64 {
    1e-12 + cells as f64 * f64::EPSILON
}

/// Nonnegative `rows x cols` masses summing to one; row-major storage.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDistribution {
    rows: usize,
    cols: usize,
    masses: Vec<f64>,
}

impl GridDistribution {
    pub fn new(rows: usize, cols: usize, masses: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || masses.len() != rows * cols {
            return Err(Error::InvalidDistribution(format!(
                "{} masses do not fill a {rows}x{cols} grid",
                masses.len()
            )));
        }
        if let Some(m) = masses.iter().find(|m| !m.is_finite() || **m < 0.0) {
            return Err(Error::InvalidDistribution(format!("mass {m} is negative or not finite")));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > mass_tolerance(masses.len()) {
            return Err(Error::InvalidDistribution(format!("masses sum to {total}, expected 1")));
        }
        Ok(Self { rows, cols, masses })
    }

    pub fn from_matrix(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let rows = matrix.len();
        let cols = matrix.first().map_or(0, |r| r.len());
        if matrix.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidDistribution("ragged mass matrix".into()));
        }
        Self::new(rows, cols, matrix.into_iter().flatten().collect())
    }

    /// Cell counts normalised by `n`.
    pub fn from_counts(rows: usize, cols: usize, counts: &[u64], n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let total = n as f64;
        Self::new(rows, cols, counts.iter().map(|&c| c as f64 / total).collect())
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

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.masses.chunks(self.cols).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for row in self.masses.chunks(self.cols) {
            for (s, m) in sums.iter_mut().zip(row) {
                *s += m;
            }
        }
        sums
    }

    /// Sums masses within each row group and column group.
    pub fn merge(&self, grouping: &Grouping) -> Result<GridDistribution> {
        if grouping.row_of.len() != self.rows || grouping.col_of.len() != self.cols {
            return Err(Error::ShapeMismatch {
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: grouping.row_of.len(),
                right_cols: grouping.col_of.len(),
            });
        }
        let (rows, cols) = (grouping.row_groups(), grouping.col_groups());
        let mut masses = vec![0.0; rows * cols];
        for i in 0..self.rows {
            let gi = grouping.row_of[i];
            for j in 0..self.cols {
                masses[gi * cols + grouping.col_of[j]] += self.mass(i, j);
            }
        }
        Ok(GridDistribution { rows, cols, masses })
    }
}

/// Assignment of rows and columns to contiguous groups, e.g. `[0, 0, 1, 2, 2]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grouping {
    row_of: Vec<usize>,
    col_of: Vec<usize>,
}

fn check_contiguous(labels: &[usize], what: &str) -> Result<()> {
    if labels.first() != Some(&0) {
        return Err(Error::InvalidArgument(format!("{what} grouping must start at group 0")));
    }
    if labels.windows(2).any(|w| w[1] != w[0] && w[1] != w[0] + 1) {
        return Err(Error::InvalidArgument(format!("{what} grouping is not contiguous: {labels:?}")));
    }
    Ok(())
}

impl Grouping {
    pub fn new(row_of: Vec<usize>, col_of: Vec<usize>) -> Result<Self> {
        check_contiguous(&row_of, "row")?;
        check_contiguous(&col_of, "column")?;
        Ok(Self { row_of, col_of })
    }

    pub fn identity(rows: usize, cols: usize) -> Self {
        Self { row_of: (0..rows).collect(), col_of: (0..cols).collect() }
    }

    /// Grouping of `fine`'s rows and columns into the cells of `coarse`,
    /// whose cuts must all be cuts of `fine`.
    pub fn between(fine: &GridPartition, coarse: &GridPartition) -> Result<Self> {
        if !coarse.is_subgrid_of(fine) {
            return Err(Error::InvalidGrid("coarse grid has a cut that is not in the fine grid".into()));
        }
        let labels = |fine_cuts: &[f64], coarse_cuts: &[f64]| -> Vec<usize> {
            edges(fine_cuts)[..=fine_cuts.len()]
                .iter()
                .map(|&lo| coarse_cuts.partition_point(|&c| c <= lo))
                .collect()
        };
        Ok(Self { row_of: labels(&fine.y_cuts, &coarse.y_cuts), col_of: labels(&fine.x_cuts, &coarse.x_cuts) })
    }

    pub fn row_groups(&self) -> usize {
        self.row_of.last().map_or(0, |g| g + 1)
    }

    pub fn col_groups(&self) -> usize {
        self.col_of.last().map_or(0, |g| g + 1)
    }
}

/// Grid whose induced rows and columns carry equal population mass.
pub fn equipartition(model: &JointModel, rows: usize, cols: usize) -> Result<GridPartition> {
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidArgument(format!("equipartition needs at least 2x2, got {rows}x{cols}")));
    }
    let cuts = |axis: Axis, parts: usize| -> Result<Vec<f64>> {
        if model.has_flat_marginal(axis) {
            return Err(Error::FlatMarginal { axis });
        }
        (1..parts).map(|j| model.marginal_quantile(axis, j as f64 / parts as f64)).collect()
    };
    GridPartition::new(cuts(Axis::X, cols)?, cuts(Axis::Y, rows)?)
}

/// Exact population distribution on the cells of `grid`.
pub fn induce_population(model: &JointModel, grid: &GridPartition) -> GridDistribution {
    let xe = edges(&grid.x_cuts);
    let ye = edges(&grid.y_cuts);
    let mut masses = Vec::with_capacity(grid.cells());
    for yw in ye.windows(2) {
        for xw in xe.windows(2) {
            masses.push(model.rect_mass_unchecked(xw[0], xw[1], yw[0], yw[1]));
        }
    }
    GridDistribution { rows: grid.rows(), cols: grid.cols(), masses }
}

pub fn cell_counts(data: &Dataset, grid: &GridPartition) -> Vec<u64> {
    let mut counts = vec![0u64; grid.cells()];
    let cols = grid.cols();
    for &(x, y) in data.points() {
        let (i, j) = grid.cell_of(x, y);
        counts[i * cols + j] += 1;
    }
    counts
}

/// Empirical distribution of `data` on the cells of `grid`.
pub fn induce_sample(data: &Dataset, grid: &GridPartition) -> Result<GridDistribution> {
    if data.n() == 0 {
        return Err(Error::EmptyDataset);
    }
    let total = data.n() as f64;
    let masses = cell_counts(data, grid).into_iter().map(|c| c as f64 / total).collect();
    Ok(GridDistribution { rows: grid.rows(), cols: grid.cols(), masses })
}

fn snap_cuts(cuts: &[f64], lines: &[f64]) -> Vec<f64> {
    if lines.is_empty() {
        return Vec::new();
    }
    let mut out: Vec<f64> = cuts
        .iter()
        .map(|&c| {
            let idx = lines.partition_point(|&l| l < c);
            match (idx.checked_sub(1).map(|i| lines[i]), lines.get(idx)) {
                (Some(lo), Some(&hi)) => {
                    // Equidistant cuts go to the lower line.
                    if hi - c < c - lo {
                        hi
                    } else {
                        lo
                    }
                }
                (Some(lo), None) => lo,
                (None, Some(&hi)) => hi,
                (None, None) => unreachable!(),
            }
        })
        .collect();
    out.dedup();
    out
}

/// Moves every cut of `g` to the nearest line of `gamma`, collapsing cuts
/// that land on the same line.
pub fn snap_to_subgrid(g: &GridPartition, gamma: &GridPartition) -> GridPartition {
    GridPartition { x_cuts: snap_cuts(&g.x_cuts, &gamma.x_cuts), y_cuts: snap_cuts(&g.y_cuts, &gamma.y_cuts) }
}

/// Mass of the cells of `gamma` that are cut by a line of `g`.
#[derive(Clone, Debug, PartialEq)]
pub struct StraddleReport {
    /// Population mass of straddled cells.
    pub delta: f64,
    /// Sample mass of straddled cells.
    pub d: f64,
    pub straddled_rows: Vec<usize>,
    pub straddled_cols: Vec<usize>,
}

fn straddled(cuts: &[f64], lines: &[f64]) -> Vec<usize> {
    let mut hit: Vec<usize> = cuts
        .iter()
        .filter_map(|&c| {
            let idx = lines.partition_point(|&l| l < c);
            (lines.get(idx) != Some(&c)).then_some(idx)
        })
        .collect();
    hit.dedup();
    hit
}

impl StraddleReport {
    /// Straddle masses from distributions already induced on `gamma`.
    pub fn from_distributions(
        population: &GridDistribution,
        sample: &GridDistribution,
        gamma: &GridPartition,
        g: &GridPartition,
    ) -> Result<Self> {
        for dist in [population, sample] {
            if dist.rows != gamma.rows() || dist.cols != gamma.cols() {
                return Err(Error::ShapeMismatch {
                    left_rows: dist.rows,
                    left_cols: dist.cols,
                    right_rows: gamma.rows(),
                    right_cols: gamma.cols(),
                });
            }
        }
        let straddled_rows = straddled(&g.y_cuts, &gamma.y_cuts);
        let straddled_cols = straddled(&g.x_cuts, &gamma.x_cuts);
        let mut row_hit = vec![false; gamma.rows()];
        let mut col_hit = vec![false; gamma.cols()];
        straddled_rows.iter().for_each(|&i| row_hit[i] = true);
        straddled_cols.iter().for_each(|&j| col_hit[j] = true);
        let (mut delta, mut d) = (0.0, 0.0);
        for i in 0..gamma.rows() {
            for j in 0..gamma.cols() {
                if row_hit[i] || col_hit[j] {
                    delta += population.mass(i, j);
                    d += sample.mass(i, j);
                }
            }
        }
        Ok(Self { delta, d, straddled_rows, straddled_cols })
    }
}

pub fn straddle_mass(
    model: &JointModel,
    data: &Dataset,
    gamma: &GridPartition,
    g: &GridPartition,
) -> Result<StraddleReport> {
    let population = induce_population(model, gamma);
    let sample = induce_sample(data, gamma)?;
    StraddleReport::from_distributions(&population, &sample, gamma, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn grid(x: &[f64], y: &[f64]) -> GridPartition {
        GridPartition::new(x.to_vec(), y.to_vec()).unwrap()
    }

    fn random_pc(seed: u64) -> JointModel {
        let mut r = rng::stream(seed, 7);
        let rows = 1 + (rng::unit_f64(&mut r) * 4.0) as usize;
        let cols = 1 + (rng::unit_f64(&mut r) * 4.0) as usize;
        let raw: Vec<f64> = (0..rows * cols).map(|_| 0.05 + rng::unit_f64(&mut r)).collect();
        let total: f64 = raw.iter().sum();
        JointModel::piecewise_constant(raw.chunks(cols).map(|c| c.iter().map(|m| m / total).collect()).collect())
            .unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridPartition::new(vec![0.0], vec![]).is_err());
        assert!(GridPartition::new(vec![0.5, 1.0], vec![]).is_err());
        assert!(GridPartition::new(vec![0.5, 0.4], vec![]).is_err());
        assert!(GridPartition::new(vec![], vec![0.5, 0.5]).is_err());
        let g = grid(&[0.2, 0.6], &[0.5]);
        assert_eq!((g.rows(), g.cols(), g.cells()), (2, 3, 6));
    }

    #[test]
    fn grid_json_round_trip() {
        let g = grid(&[0.25, 0.5], &[0.75]);
        let text = serde_json::to_string(&g).unwrap();
        assert_eq!(text, r#"{"x_cuts":[0.25,0.5],"y_cuts":[0.75]}"#);
        assert_eq!(GridPartition::from_json(&text).unwrap(), g);
        assert!(GridPartition::from_json(r#"{"x_cuts":[1.5],"y_cuts":[]}"#).is_err());
    }

    #[test]
    fn equipartition_examples() {
        let g = equipartition(&JointModel::IndependentUniform, 2, 2).unwrap();
        assert_eq!(g, grid(&[0.5], &[0.5]));
        let m = JointModel::piecewise_constant(vec![vec![0.75, 0.25]]).unwrap();
        let g = equipartition(&m, 2, 2).unwrap();
        assert!((g.x_cuts()[0] - 1.0 / 3.0).abs() < 1e-15);
        let g = equipartition(&JointModel::IndependentUniform, 4, 8).unwrap();
        assert_eq!(g.y_cuts(), &[0.25, 0.5, 0.75]);
        let eighths: Vec<f64> = (1..8).map(|j| j as f64 / 8.0).collect();
        assert_eq!(g.x_cuts(), eighths.as_slice());
    }

    #[test]
    fn equipartition_rejects_flat_marginals() {
        let m = JointModel::piecewise_constant(vec![vec![0.5, 0.0, 0.5]]).unwrap();
        match equipartition(&m, 2, 2) {
            Err(Error::FlatMarginal { axis }) => assert_eq!(axis, Axis::X),
            other => panic!("expected flat marginal error, got {other:?}"),
        }
        assert!(equipartition(&JointModel::IndependentUniform, 1, 2).is_err());
    }

    #[test]
    fn equipartition_marginals_on_random_models() {
        for seed in 0..50 {
            let model = random_pc(seed);
            for &rows in &[2, 4, 8] {
                for &cols in &[2, 4, 8] {
                    let gamma = equipartition(&model, rows, cols).unwrap();
                    let dist = induce_population(&model, &gamma);
                    for s in dist.row_sums() {
                        assert!((s - 1.0 / rows as f64).abs() < 1e-9);
                    }
                    for s in dist.col_sums() {
                        assert!((s - 1.0 / cols as f64).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn population_examples() {
        let g = grid(&[0.5], &[0.5]);
        let u = induce_population(&JointModel::IndependentUniform, &g);
        assert!(u.masses().iter().all(|&m| m == 0.25));
        let d = induce_population(&JointModel::identity(), &g);
        assert_eq!(d.masses(), &[0.5, 0.0, 0.0, 0.5]);
        let model = JointModel::piecewise_constant(vec![vec![0.4, 0.1], vec![0.1, 0.4]]).unwrap();
        let c = induce_population(&model, &g);
        assert_eq!(c.masses(), &[0.4, 0.1, 0.1, 0.4]);
    }

    #[test]
    fn sample_examples() {
        let g = grid(&[0.5], &[0.5]);
        let quad = Dataset::new(vec![(0.1, 0.1), (0.9, 0.1), (0.1, 0.9), (0.9, 0.9)], 0).unwrap();
        assert!(induce_sample(&quad, &g).unwrap().masses().iter().all(|&m| m == 0.25));
        let same = Dataset::new(vec![(0.7, 0.2); 5], 0).unwrap();
        assert_eq!(induce_sample(&same, &g).unwrap().masses(), &[0.0, 1.0, 0.0, 0.0]);
        let on_cut = Dataset::new(vec![(0.5, 0.9)], 0).unwrap();
        assert_eq!(induce_sample(&on_cut, &g).unwrap().masses(), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn snapping_examples() {
        let gamma = grid(&[0.25, 0.5, 0.75], &[0.25, 0.5, 0.75]);
        assert_eq!(snap_to_subgrid(&grid(&[0.3], &[]), &gamma), grid(&[0.25], &[]));
        let inside = grid(&[0.5], &[0.25, 0.75]);
        assert_eq!(snap_to_subgrid(&inside, &gamma), inside);
        assert_eq!(snap_to_subgrid(&grid(&[0.26, 0.27], &[]), &gamma), grid(&[0.25], &[]));
        // Equidistant from 0.25 and 0.5.
        assert_eq!(snap_to_subgrid(&grid(&[0.375], &[]), &gamma), grid(&[0.25], &[]));
        assert_eq!(snap_to_subgrid(&grid(&[0.9], &[0.1]), &gamma), grid(&[0.75], &[0.25]));
    }

    #[test]
    fn straddle_examples() {
        let model = JointModel::IndependentUniform;
        let data = model.sample(500, 3).unwrap();
        let gamma = equipartition(&model, 4, 4).unwrap();
        let on_lines = straddle_mass(&model, &data, &gamma, &grid(&[0.5], &[0.25, 0.75])).unwrap();
        assert_eq!((on_lines.delta, on_lines.d), (0.0, 0.0));
        let report = straddle_mass(&model, &data, &gamma, &grid(&[0.3], &[0.3])).unwrap();
        assert!((report.delta - 0.4375).abs() < 1e-15);
        assert_eq!(report.straddled_cols, vec![1]);
        assert_eq!(report.straddled_rows, vec![1]);
    }

    #[test]
    fn straddle_shape_mismatch() {
        let gamma = grid(&[0.5], &[0.5]);
        let p = GridDistribution::new(1, 1, vec![1.0]).unwrap();
        assert!(StraddleReport::from_distributions(&p, &p, &gamma, &gamma).is_err());
    }

    #[test]
    fn distribution_validation() {
        assert!(GridDistribution::new(2, 2, vec![0.5, 0.5, 0.1, -0.1]).is_err());
        assert!(GridDistribution::new(2, 2, vec![0.5, 0.5, 0.1, 0.1]).is_err());
        assert!(GridDistribution::new(2, 2, vec![0.25; 3]).is_err());
        assert!(GridDistribution::from_matrix(vec![vec![0.5], vec![0.25, 0.25]]).is_err());
    }

    #[test]
    fn grouping_rejects_non_contiguous() {
        assert!(Grouping::new(vec![0, 1, 0], vec![0]).is_err());
        assert!(Grouping::new(vec![0, 2], vec![0]).is_err());
        assert!(Grouping::new(vec![1, 1], vec![0]).is_err());
        assert!(Grouping::new(vec![0, 0, 1], vec![0, 1, 1]).is_ok());
    }

    #[test]
    fn grouping_between_grids() {
        let fine = grid(&[0.25, 0.5, 0.75], &[0.5]);
        let coarse = grid(&[0.5], &[]);
        let gr = Grouping::between(&fine, &coarse).unwrap();
        assert_eq!(gr, Grouping::new(vec![0, 0], vec![0, 0, 1, 1]).unwrap());
        assert!(Grouping::between(&fine, &grid(&[0.3], &[])).is_err());
    }

    fn arb_cuts(max: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.001f64..0.999, 0..max).prop_map(|mut v| {
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn snapping_is_idempotent(gx in arb_cuts(6), gy in arb_cuts(6), lx in arb_cuts(10), ly in arb_cuts(10)) {
            let g = GridPartition::new(gx, gy).unwrap();
            let gamma = GridPartition::new(lx, ly).unwrap();
            let once = snap_to_subgrid(&g, &gamma);
            prop_assert!(once.is_subgrid_of(&gamma));
            prop_assert_eq!(snap_to_subgrid(&once, &gamma), once);
        }

        #[test]
        fn delta_bound_holds_with_probability_one(seed in any::<u64>(), k in 2usize..5, l in 2usize..5,
                                                  factor in 2usize..9, gx in arb_cuts(4), gy in arb_cuts(4)) {
            let model = random_pc(seed);
            let gx: Vec<f64> = gx.into_iter().take(l - 1).collect();
            let gy: Vec<f64> = gy.into_iter().take(k - 1).collect();
            let g = GridPartition::new(gx, gy).unwrap();
            let gamma = equipartition(&model, k * factor, l * factor).unwrap();
            let data = model.sample(64, seed).unwrap();
            let report = straddle_mass(&model, &data, &gamma, &g).unwrap();
            prop_assert!(report.delta <= 2.0 / factor as f64);
            prop_assert!(report.straddled_cols.len() < g.cols());
            prop_assert!(report.straddled_rows.len() < g.rows());
            prop_assert!((0.0..=1.0).contains(&report.d));
        }

        #[test]
        fn merging_preserves_mass(raw in proptest::collection::vec(0.0f64..1.0, 12), split in 1usize..4) {
            let total: f64 = raw.iter().sum::<f64>().max(1e-9);
            let raw: Vec<f64> = if total <= 1e-9 { vec![1.0 / 12.0; 12] } else { raw.iter().map(|m| m / total).collect() };
            let dist = GridDistribution::new(4, 3, raw).unwrap();
            let rows: Vec<usize> = (0..4).map(|i| usize::from(i >= split)).collect();
            let merged = dist.merge(&Grouping::new(rows.clone(), vec![0, 1, 2]).unwrap()).unwrap();
            let sum: f64 = merged.masses().iter().sum();
            prop_assert!((sum - dist.masses().iter().sum::<f64>()).abs() <= 1e-12);
            for j in 0..3 {
                let top: f64 = (0..split).map(|i| dist.mass(i, j)).sum();
                prop_assert!((merged.mass(0, j) - top).abs() <= 1e-12);
            }
        }
    }
}
