//! Population and sample characteristic matrices.
//!
//! The supremum over all `k x l` grids is replaced by a maximum over grids
//! whose cuts come from a finite per-axis candidate set. With resolution `m`
//! the candidates are the `m - 1` interior boundaries of the `m`-quantile
//! partition: population quantiles `j/m` for a model, rank boundaries of the
//! distinct coordinates for a sample. Every entry is the exact maximum over
//! that family.
//!
//! Two search routes compute the same maximum:
//! - enumeration of every `(k-1)`-subset by `(l-1)`-subset of candidates;
//! - enumeration of one axis only, with the other axis solved by dynamic
//!   programming. For fixed columns the mutual information is a sum of
//!   per-row terms, so the best row partition is an exact interval DP.
//!
//! The cheaper route is picked per entry. Either way the reported value is
//! recomputed from the attained grid's mass table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::dist::{Axis, Dataset, JointModel};
use crate::error::{Error, Result};
use crate::grids::{self, GridPartition};
use crate::info::mi_of_masses;

pub const DEFAULT_CANDIDATE_M: usize = 32;
pub const DEFAULT_ALPHA: f64 = 0.4;
pub const DEFAULT_EXHAUSTIVE_LIMIT: u64 = 1_000_000;

/// Entries whose value exceeds one by more than this are a bug.
pub const NORMALIZATION_SLACK: f64 = 1e-9;

/// `B(n) = floor(coefficient * n^alpha)`, robust to `powf` landing just
/// below an integer.
pub fn budget(n: usize, alpha: f64, coefficient: f64) -> usize {
    (coefficient * (n as f64).powf(alpha) + 1e-9).floor() as usize
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    /// Per-axis resolution `m`; the family uses `m - 1` candidate cuts.
    pub candidate_m: usize,
    /// Budget `B` on `k * l`.
    pub max_cells: usize,
    /// Largest number of grids (or outer-axis subsets on the DP route) one
    /// entry may enumerate.
    pub exhaustive_limit: u64,
}

impl SearchConfig {
    pub fn new(candidate_m: usize, max_cells: usize) -> Self {
        Self { candidate_m, max_cells, exhaustive_limit: DEFAULT_EXHAUSTIVE_LIMIT }
    }

    /// Default resolution with `B(n) = floor(n^0.4)`.
    pub fn for_sample_size(n: usize) -> Self {
        Self::new(DEFAULT_CANDIDATE_M, budget(n, DEFAULT_ALPHA, 1.0))
    }

    /// Grid sizes `(k, l)` with `k, l >= 2` and `k * l <= B`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for k in 2..=self.max_cells / 2 {
            for l in 2..=self.max_cells / k {
                out.push((k, l));
            }
        }
        out
    }

    /// Largest `k` (equivalently `l`) among the requested pairs.
    pub fn max_side(&self) -> usize {
        self.max_cells / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_cells < 4 {
            return Err(Error::InvalidArgument(format!(
                "budget B = {} admits no grid with k, l >= 2",
                self.max_cells
            )));
        }
        if self.exhaustive_limit < 1 {
            return Err(Error::InvalidArgument("exhaustive_limit must be at least 1".into()));
        }
        if self.candidate_m < self.max_side() {
            return Err(Error::InvalidArgument(format!(
                "candidate_m = {} gives {} cuts per axis, but B = {} needs grids with {} rows",
                self.candidate_m,
                self.candidate_m.saturating_sub(1),
                self.max_cells,
                self.max_side()
            )));
        }
        Ok(())
    }
}

/// Population quantiles `j/m`, `j = 1..m-1`, on both axes.
pub fn population_candidates(model: &JointModel, m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let axis = |axis: Axis| -> Result<Vec<f64>> {
        let mut cuts = Vec::with_capacity(m.saturating_sub(1));
        for j in 1..m {
            let c = model.marginal_quantile(axis, j as f64 / m as f64)?;
            if c > 0.0 && c < 1.0 && cuts.last().is_none_or(|&last| c > last) {
                cuts.push(c);
            }
        }
        Ok(cuts)
    };
    Ok((axis(Axis::X)?, axis(Axis::Y)?))
}

fn distinct_sorted(data: &Dataset, axis: Axis) -> Vec<f64> {
    let mut v: Vec<f64> = data.coords(axis).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Midpoints between consecutive distinct coordinates, thinned to the
/// `m - 1` rank boundaries of an `m`-way equal-frequency split when there
/// are more.
fn rank_candidates(distinct: &[f64], m: usize) -> Vec<f64> {
    let count = distinct.len();
    let mid = |r: usize| 0.5 * (distinct[r - 1] + distinct[r]);
    if count <= m {
        (1..count).map(mid).collect()
    } else {
        (1..m).map(|i| mid(i * count / m)).collect()
    }
}

pub fn sample_candidates(data: &Dataset, m: usize) -> (Vec<f64>, Vec<f64>) {
    (
        rank_candidates(&distinct_sorted(data, Axis::X), m),
        rank_candidates(&distinct_sorted(data, Axis::Y), m),
    )
}

/// Weights of the elementary cells cut out by every candidate line, with
/// 2-D prefix sums for rectangle queries.
#[derive(Clone, Debug)]
pub struct CandidateLattice {
    x_cuts: Vec<f64>,
    y_cuts: Vec<f64>,
    /// `(y_cuts + 1) x (x_cuts + 1)`, row-major.
    weights: Vec<f64>,
    /// `(rows + 1) x (cols + 1)`.
    prefix: Vec<f64>,
    total: f64,
}

impl CandidateLattice {
    fn build(x_cuts: Vec<f64>, y_cuts: Vec<f64>, weights: Vec<f64>, total: f64) -> Self {
        let (rows, cols) = (y_cuts.len() + 1, x_cuts.len() + 1);
        let stride = cols + 1;
        let mut prefix = vec![0.0; (rows + 1) * stride];
        for r in 0..rows {
            let mut run = 0.0;
            for c in 0..cols {
                run += weights[r * cols + c];
                prefix[(r + 1) * stride + c + 1] = prefix[r * stride + c + 1] + run;
            }
        }
        Self { x_cuts, y_cuts, weights, prefix, total }
    }

    /// Exact population masses on the candidate lattice.
    pub fn population(model: &JointModel, x_cuts: Vec<f64>, y_cuts: Vec<f64>) -> Result<Self> {
        let grid = GridPartition::new(x_cuts, y_cuts)?;
        let weights = grids::induce_population(model, &grid).masses().to_vec();
        Ok(Self::build(grid.x_cuts().to_vec(), grid.y_cuts().to_vec(), weights, 1.0))
    }

    /// Point counts on the candidate lattice, normalised by `n`.
    pub fn sample(data: &Dataset, x_cuts: Vec<f64>, y_cuts: Vec<f64>) -> Result<Self> {
        let grid = GridPartition::new(x_cuts, y_cuts)?;
        let weights = grids::cell_counts(data, &grid).into_iter().map(|c| c as f64).collect();
        Ok(Self::build(grid.x_cuts().to_vec(), grid.y_cuts().to_vec(), weights, data.n() as f64))
    }

    pub fn x_cuts(&self) -> &[f64] {
        &self.x_cuts
    }

    pub fn y_cuts(&self) -> &[f64] {
        &self.y_cuts
    }

    fn rows(&self) -> usize {
        self.y_cuts.len() + 1
    }

    fn cols(&self) -> usize {
        self.x_cuts.len() + 1
    }

    fn transposed(&self) -> Self {
        let (rows, cols) = (self.rows(), self.cols());
        let mut weights = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                weights[c * rows + r] = self.weights[r * cols + c];
            }
        }
        Self::build(self.y_cuts.clone(), self.x_cuts.clone(), weights, self.total)
    }

    /// Weight of lattice rows `[r0, r1)` by columns `[c0, c1)`.
    fn rect(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> f64 {
        let s = self.cols() + 1;
        self.prefix[r1 * s + c1] - self.prefix[r0 * s + c1] - self.prefix[r1 * s + c0] + self.prefix[r0 * s + c0]
    }

    /// Mass table of the grid using candidate cut indices `xs` and `ys`.
    fn grid_masses(&self, xs: &[usize], ys: &[usize], out: &mut Vec<f64>) {
        out.clear();
        let (rows, cols) = (self.rows(), self.cols());
        let bound = |idx: &[usize], i: usize, end: usize| match i {
            0 => 0,
            i if i > idx.len() => end,
            i => idx[i - 1] + 1,
        };
        for gi in 0..=ys.len() {
            let (r0, r1) = (bound(ys, gi, rows), bound(ys, gi + 1, rows));
            for gj in 0..=xs.len() {
                let (c0, c1) = (bound(xs, gj, cols), bound(xs, gj + 1, cols));
                out.push(self.rect(r0, r1, c0, c1) / self.total);
            }
        }
    }

    fn grid_mi(&self, xs: &[usize], ys: &[usize], buf: &mut Vec<f64>) -> f64 {
        self.grid_masses(xs, ys, buf);
        mi_of_masses(ys.len() + 1, xs.len() + 1, buf)
    }

    /// Mutual information of the grid with candidate cut indices `xs`, `ys`.
    pub(crate) fn mi_at(&self, xs: &[usize], ys: &[usize]) -> f64 {
        self.grid_mi(xs, ys, &mut Vec::new())
    }
}

fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    (0..r).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Advances `idx` to the next `idx.len()`-subset of `0..n` in lexicographic
/// order; false once exhausted.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let r = idx.len();
    for i in (0..r).rev() {
        if idx[i] < n - r + i {
            idx[i] += 1;
            for j in i + 1..r {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn for_each_combination(n: usize, r: usize, mut f: impl FnMut(&[usize])) {
    if r > n {
        return;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        f(&idx);
        if !next_combination(&mut idx, n) {
            break;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchMethod {
    /// Every grid of the family evaluated.
    Enumeration,
    /// Columns enumerated, rows solved by interval DP.
    RowDp,
    /// Rows enumerated, columns solved by interval DP.
    ColumnDp,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixEntry {
    /// `max I(G) / log2 min(k, l)` over the family.
    pub value: f64,
    pub x_cuts: Vec<f64>,
    pub y_cuts: Vec<f64>,
    pub method: SearchMethod,
    pub grids_evaluated: u128,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CharacteristicMatrix {
    entries: BTreeMap<(usize, usize), MatrixEntry>,
    pub max_cells: usize,
    pub candidate_m: usize,
    pub x_candidates: usize,
    pub y_candidates: usize,
}

impl CharacteristicMatrix {
    /// Matrix from bare values; for tests and externally computed matrices.
    pub fn from_values(values: impl IntoIterator<Item = ((usize, usize), f64)>, max_cells: usize) -> Self {
        let entries = values
            .into_iter()
            .map(|(key, value)| {
                let entry = MatrixEntry {
                    value,
                    x_cuts: Vec::new(),
                    y_cuts: Vec::new(),
                    method: SearchMethod::Enumeration,
                    grids_evaluated: 0,
                };
                (key, entry)
            })
            .collect();
        Self { entries, max_cells, candidate_m: 0, x_candidates: 0, y_candidates: 0 }
    }

    pub fn get(&self, k: usize, l: usize) -> Option<f64> {
        self.entries.get(&(k, l)).map(|e| e.value)
    }

    pub fn entry(&self, k: usize, l: usize) -> Option<&MatrixEntry> {
        self.entries.get(&(k, l))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(usize, usize), &MatrixEntry)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// CSV with header `k,l,value,attained_x_cuts,attained_y_cuts,candidate_m,exhaustive_flag`;
    /// cut lists are `;`-separated.
    pub fn to_csv(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";");
        let mut out = String::from("k,l,value,attained_x_cuts,attained_y_cuts,candidate_m,exhaustive_flag\n");
        for (&(k, l), e) in &self.entries {
            // Both search routes are exact over the family.
            let _ = writeln!(out, "{k},{l},{},{},{},{},true", e.value, join(&e.x_cuts), join(&e.y_cuts), self.candidate_m);
        }
        out
    }
}

struct Best {
    value: f64,
    xs: Vec<usize>,
    ys: Vec<usize>,
}

impl Best {
    fn offer(slot: &mut Option<Best>, value: f64, xs: &[usize], ys: &[usize]) {
        if slot.as_ref().is_none_or(|b| value > b.value) {
            *slot = Some(Best { value, xs: xs.to_vec(), ys: ys.to_vec() });
        }
    }
}

/// Best `groups`-way partition of the lattice rows for the column groups
/// given by cut indices `xs`. Returns the chosen row cut indices.
fn best_row_partition(lat: &CandidateLattice, xs: &[usize], groups: usize, ws: &mut DpWorkspace) -> Vec<usize> {
    let rows = lat.rows();
    let cols = lat.cols();
    let l = xs.len() + 1;
    let bounds: Vec<usize> = std::iter::once(0).chain(xs.iter().map(|&i| i + 1)).chain(std::iter::once(cols)).collect();

    // cum[r * l + j]: weight of rows [0, r) in column group j.
    ws.cum.clear();
    for r in 0..=rows {
        for j in 0..l {
            ws.cum.push(lat.rect(0, r, bounds[j], bounds[j + 1]));
        }
    }
    let total = lat.total;
    let col_mass: Vec<f64> = (0..l).map(|j| ws.cum[rows * l + j] / total).collect();

    let span = rows + 1;
    ws.score.clear();
    ws.score.resize(span * span, 0.0);
    for a in 0..rows {
        for b in a + 1..=rows {
            let mut group = 0.0;
            for j in 0..l {
                group += (ws.cum[b * l + j] - ws.cum[a * l + j]) / total;
            }
            let mut s = 0.0;
            if group > 0.0 {
                for j in 0..l {
                    let p = (ws.cum[b * l + j] - ws.cum[a * l + j]) / total;
                    if p > 0.0 {
                        s += p * (p / (group * col_mass[j])).log2();
                    }
                }
            }
            ws.score[a * span + b] = s;
        }
    }

    // best[g][b]: rows [0, b) split into g + 1 groups.
    ws.best.clear();
    ws.best.resize(groups * span, f64::NEG_INFINITY);
    ws.arg.clear();
    ws.arg.resize(groups * span, 0);
    for b in 1..=rows {
        ws.best[b] = ws.score[b];
    }
    for g in 1..groups {
        for b in g + 1..=rows {
            let mut top = f64::NEG_INFINITY;
            let mut arg = g;
            for a in g..b {
                let cand = ws.best[(g - 1) * span + a] + ws.score[a * span + b];
                if cand > top {
                    top = cand;
                    arg = a;
                }
            }
            ws.best[g * span + b] = top;
            ws.arg[g * span + b] = arg;
        }
    }
    let mut cuts = Vec::with_capacity(groups - 1);
    let mut b = rows;
    for g in (1..groups).rev() {
        let a = ws.arg[g * span + b];
        cuts.push(a - 1);
        b = a;
    }
    cuts.reverse();
    cuts
}

#[derive(Default)]
struct DpWorkspace {
    cum: Vec<f64>,
    score: Vec<f64>,
    best: Vec<f64>,
    arg: Vec<usize>,
}

fn dp_cost(outer: u128, inner_rows: usize, groups: usize, outer_groups: usize) -> u128 {
    let pairs = (inner_rows as u128 + 1) * (inner_rows as u128) / 2;
    outer * (pairs * (outer_groups as u128 + 1) + pairs * groups as u128)
}

fn search_entry(
    lat: &CandidateLattice,
    transposed: &mut Option<CandidateLattice>,
    k: usize,
    l: usize,
    limit: u64,
) -> Result<MatrixEntry> {
    let (nx, ny) = (lat.x_cuts.len(), lat.y_cuts.len());
    if nx < l - 1 {
        return Err(Error::InsufficientDistinct { axis: Axis::X, distinct: nx + 1, needed: l });
    }
    if ny < k - 1 {
        return Err(Error::InsufficientDistinct { axis: Axis::Y, distinct: ny + 1, needed: k });
    }
    let x_subsets = binomial(nx, l - 1);
    let y_subsets = binomial(ny, k - 1);
    let family = x_subsets * y_subsets;

    let mut routes = vec![
        (SearchMethod::Enumeration, family, family * (k * l) as u128),
        (SearchMethod::RowDp, x_subsets, dp_cost(x_subsets, ny + 1, k, l)),
        (SearchMethod::ColumnDp, y_subsets, dp_cost(y_subsets, nx + 1, l, k)),
    ];
    routes.retain(|r| r.1 <= limit as u128);
    let Some(&(method, evaluated, _)) = routes.iter().min_by_key(|r| r.2) else {
        return Err(Error::EnumerationTooLarge { k, l, count: x_subsets.min(y_subsets), limit });
    };

    let mut buf = Vec::with_capacity(k * l);
    let mut best: Option<Best> = None;
    match method {
        SearchMethod::Enumeration => {
            for_each_combination(nx, l - 1, |xs| {
                for_each_combination(ny, k - 1, |ys| {
                    let v = lat.grid_mi(xs, ys, &mut buf);
                    Best::offer(&mut best, v, xs, ys);
                });
            });
        }
        SearchMethod::RowDp => {
            let mut ws = DpWorkspace::default();
            for_each_combination(nx, l - 1, |xs| {
                let ys = best_row_partition(lat, xs, k, &mut ws);
                let v = lat.grid_mi(xs, &ys, &mut buf);
                Best::offer(&mut best, v, xs, &ys);
            });
        }
        SearchMethod::ColumnDp => {
            let t = transposed.get_or_insert_with(|| lat.transposed());
            let mut ws = DpWorkspace::default();
            for_each_combination(ny, k - 1, |ys| {
                let xs = best_row_partition(t, ys, l, &mut ws);
                let v = lat.grid_mi(&xs, ys, &mut buf);
                Best::offer(&mut best, v, &xs, ys);
            });
        }
    }
    let best = best.expect("candidate family is nonempty");
    let norm = (k.min(l) as f64).log2();
    Ok(MatrixEntry {
        value: best.value / norm,
        x_cuts: best.xs.iter().map(|&i| lat.x_cuts[i]).collect(),
        y_cuts: best.ys.iter().map(|&i| lat.y_cuts[i]).collect(),
        method,
        grids_evaluated: evaluated,
    })
}

/// Characteristic matrix over the grid family of `lattice`.
pub fn char_matrix(lattice: &CandidateLattice, cfg: &SearchConfig) -> Result<CharacteristicMatrix> {
    cfg.validate()?;
    let mut transposed = None;
    let mut entries = BTreeMap::new();
    for (k, l) in cfg.pairs() {
        entries.insert((k, l), search_entry(lattice, &mut transposed, k, l, cfg.exhaustive_limit)?);
    }
    Ok(CharacteristicMatrix {
        entries,
        max_cells: cfg.max_cells,
        candidate_m: cfg.candidate_m,
        x_candidates: lattice.x_cuts.len(),
        y_candidates: lattice.y_cuts.len(),
    })
}

pub fn population_lattice(model: &JointModel, m: usize) -> Result<CandidateLattice> {
    let (xc, yc) = population_candidates(model, m)?;
    CandidateLattice::population(model, xc, yc)
}

pub fn population_char_matrix(model: &JointModel, cfg: &SearchConfig) -> Result<CharacteristicMatrix> {
    cfg.validate()?;
    char_matrix(&population_lattice(model, cfg.candidate_m)?, cfg)
}

pub fn sample_char_matrix(data: &Dataset, cfg: &SearchConfig) -> Result<CharacteristicMatrix> {
    cfg.validate()?;
    let needed = cfg.max_side();
    for axis in [Axis::X, Axis::Y] {
        let distinct = distinct_sorted(data, axis).len();
        if distinct < needed {
            return Err(Error::InsufficientDistinct { axis, distinct, needed });
        }
    }
    let (xc, yc) = sample_candidates(data, cfg.candidate_m);
    char_matrix(&CandidateLattice::sample(data, xc, yc)?, cfg)
}

/// Largest entry.
pub fn mic_value(cm: &CharacteristicMatrix) -> Result<f64> {
    cm.entries.values().map(|e| e.value).reduce(f64::max).ok_or(Error::EmptyMatrix)
}

/// `max |M_{k,l} - M^_{k,l}|` over the shared keys.
pub fn matrix_deviation(population: &CharacteristicMatrix, sample: &CharacteristicMatrix) -> Result<f64> {
    if population.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if !population.entries.keys().eq(sample.entries.keys()) {
        return Err(Error::KeyMismatch);
    }
    Ok(population
        .entries
        .values()
        .zip(sample.entries.values())
        .map(|(a, b)| (a.value - b.value).abs())
        .fold(0.0, f64::max))
}

/// Largest mutual-information gap between two lattices over the common grid
/// family, the right-hand side of `|M - M^| <= max_G |I_pop(G) - I_samp(G)|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FamilyGap {
    /// In bits.
    pub max_gap: f64,
    /// Gap divided by `log2 min(k, l)`, maximised over pairs.
    pub max_normalized_gap: f64,
}

pub fn family_mi_gap(population: &CandidateLattice, sample: &CandidateLattice, cfg: &SearchConfig) -> Result<FamilyGap> {
    cfg.validate()?;
    if population.x_cuts != sample.x_cuts || population.y_cuts != sample.y_cuts {
        return Err(Error::InvalidArgument("lattices do not share a candidate family".into()));
    }
    let (nx, ny) = (population.x_cuts.len(), population.y_cuts.len());
    let mut gap = FamilyGap { max_gap: 0.0, max_normalized_gap: 0.0 };
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (k, l) in cfg.pairs() {
        let family = binomial(nx, l - 1) * binomial(ny, k - 1);
        if family > cfg.exhaustive_limit as u128 {
            return Err(Error::EnumerationTooLarge { k, l, count: family, limit: cfg.exhaustive_limit });
        }
        let norm = (k.min(l) as f64).log2();
        for_each_combination(nx, l - 1, |xs| {
            for_each_combination(ny, k - 1, |ys| {
                let diff = (population.grid_mi(xs, ys, &mut a) - sample.grid_mi(xs, ys, &mut b)).abs();
                gap.max_gap = gap.max_gap.max(diff);
                gap.max_normalized_gap = gap.max_normalized_gap.max(diff / norm);
            });
        });
    }
    Ok(gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::induce_sample;
    use crate::info::mutual_information;

    fn exhaustive_only(lat: &CandidateLattice, k: usize, l: usize) -> f64 {
        let mut buf = Vec::new();
        let mut best = f64::NEG_INFINITY;
        for_each_combination(lat.x_cuts.len(), l - 1, |xs| {
            for_each_combination(lat.y_cuts.len(), k - 1, |ys| best = best.max(lat.grid_mi(xs, ys, &mut buf)));
        });
        best / (k.min(l) as f64).log2()
    }

    #[test]
    fn combinations_are_lexicographic() {
        let mut seen = Vec::new();
        for_each_combination(4, 2, |c| seen.push(c.to_vec()));
        assert_eq!(seen, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(binomial(16, 8), 12870);
        assert_eq!(binomial(3, 5), 0);
    }

    #[test]
    fn pairs_respect_budget() {
        let cfg = SearchConfig::new(8, 6);
        assert_eq!(cfg.pairs(), vec![(2, 2), (2, 3), (3, 2)]);
        assert!(SearchConfig::new(8, 3).validate().is_err());
        assert!(SearchConfig::new(2, 8).validate().is_err());
        assert_eq!(budget(1024, 0.4, 1.0), 16);
        assert_eq!(budget(4096, 0.4, 1.0), 27);
    }

    #[test]
    fn rank_thinning() {
        let distinct: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        assert_eq!(rank_candidates(&distinct, 16).len(), 9);
        let thinned = rank_candidates(&distinct, 4);
        assert_eq!(thinned.len(), 3);
        assert!(thinned.windows(2).all(|w| w[0] < w[1]));
        assert!((thinned[0] - 0.15).abs() < 1e-12);
    }

    #[test]
    fn independent_population_is_zero() {
        let cfg = SearchConfig::new(8, 8);
        let cm = population_char_matrix(&JointModel::IndependentUniform, &cfg).unwrap();
        for (_, e) in cm.entries() {
            assert!(e.value.abs() <= 1e-12);
        }
    }

    #[test]
    fn identity_population_saturates() {
        for m in [12, 24] {
            let cfg = SearchConfig::new(m, 16);
            let cm = population_char_matrix(&JointModel::identity(), &cfg).unwrap();
            for k in 2..=4 {
                assert!((cm.get(k, k).unwrap() - 1.0).abs() <= 1e-9, "m={m} k={k}");
            }
        }
    }

    #[test]
    fn checkerboard_population_entry() {
        let model = JointModel::piecewise_constant(vec![vec![0.4, 0.1], vec![0.1, 0.4]]).unwrap();
        let cm = population_char_matrix(&model, &SearchConfig::new(16, 4)).unwrap();
        let e = cm.entry(2, 2).unwrap();
        let oracle = 2.0 * 0.4 * (0.4f64 / 0.25).log2() + 2.0 * 0.1 * (0.1f64 / 0.25).log2();
        assert!((e.value - oracle).abs() < 1e-12);
        assert!((e.value - 0.278072).abs() < 1e-6);
        assert_eq!(e.x_cuts, vec![0.5]);
        assert_eq!(e.y_cuts, vec![0.5]);
    }

    #[test]
    fn sample_examples() {
        let cfg = SearchConfig::new(8, 4);
        let diag = Dataset::new(vec![(0.1, 0.1), (0.4, 0.4), (0.6, 0.6), (0.9, 0.9)], 0).unwrap();
        let cm = sample_char_matrix(&diag, &cfg).unwrap();
        assert!((cm.get(2, 2).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cm.entry(2, 2).unwrap().x_cuts, vec![0.5]);

        let corners = Dataset::new(vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)], 0).unwrap();
        assert_eq!(sample_char_matrix(&corners, &cfg).unwrap().get(2, 2), Some(0.0));

        let single = Dataset::new(vec![(0.3, 0.3)], 0).unwrap();
        assert!(matches!(sample_char_matrix(&single, &cfg), Err(Error::InsufficientDistinct { .. })));
    }

    #[test]
    fn sample_entry_matches_direct_mi_of_attained_grid() {
        let data = JointModel::identity().sample(200, 4).unwrap();
        let cm = sample_char_matrix(&data, &SearchConfig::new(10, 12)).unwrap();
        for (&(k, l), e) in cm.entries() {
            let g = GridPartition::new(e.x_cuts.clone(), e.y_cuts.clone()).unwrap();
            let direct = mutual_information(&induce_sample(&data, &g).unwrap()) / (k.min(l) as f64).log2();
            assert_eq!(direct, e.value);
        }
    }

    #[test]
    fn dp_routes_agree_with_enumeration() {
        let model = JointModel::piecewise_constant(vec![vec![0.2, 0.05, 0.1], vec![0.05, 0.3, 0.05], vec![0.1, 0.05, 0.1]])
            .unwrap();
        for seed in 0..5 {
            let data = model.sample(300, seed).unwrap();
            let (xc, yc) = sample_candidates(&data, 9);
            let lat = CandidateLattice::sample(&data, xc, yc).unwrap();
            let mut t = None;
            for (k, l) in [(2, 2), (2, 4), (3, 3), (4, 2), (3, 5)] {
                let oracle = exhaustive_only(&lat, k, l);
                let e = search_entry(&lat, &mut t, k, l, u64::MAX).unwrap();
                assert!((e.value - oracle).abs() < 1e-12, "({k},{l}) via {:?}", e.method);
                {
                    let limit = binomial(8, l - 1).min(binomial(8, k - 1)) as u64;
                    let e = search_entry(&lat, &mut t, k, l, limit).unwrap();
                    assert!((e.value - oracle).abs() < 1e-12);
                    assert_ne!(e.method, SearchMethod::Enumeration);
                }
            }
        }
    }

    #[test]
    fn enumeration_guard() {
        let data = JointModel::IndependentUniform.sample(500, 1).unwrap();
        let mut cfg = SearchConfig::new(32, 40);
        cfg.exhaustive_limit = 10;
        assert!(matches!(sample_char_matrix(&data, &cfg), Err(Error::EnumerationTooLarge { .. })));
    }

    #[test]
    fn mic_value_examples() {
        let zeros = CharacteristicMatrix::from_values([((2, 2), 0.0), ((2, 3), 0.0)], 6);
        assert_eq!(mic_value(&zeros).unwrap(), 0.0);
        let one = CharacteristicMatrix::from_values([((2, 2), 1.0), ((2, 3), 0.5)], 6);
        assert_eq!(mic_value(&one).unwrap(), 1.0);
        let listed = CharacteristicMatrix::from_values([((2, 2), 0.278072), ((2, 3), 0.21)], 6);
        assert_eq!(mic_value(&listed).unwrap(), 0.278072);
        assert!(mic_value(&CharacteristicMatrix::from_values([], 6)).is_err());
    }

    #[test]
    fn deviation_examples() {
        let a = CharacteristicMatrix::from_values([((2, 2), 0.0)], 4);
        let b = CharacteristicMatrix::from_values([((2, 2), 0.2)], 4);
        assert_eq!(matrix_deviation(&a, &a).unwrap(), 0.0);
        assert_eq!(matrix_deviation(&a, &b).unwrap(), 0.2);
        let c = CharacteristicMatrix::from_values([((2, 3), 0.2)], 6);
        assert!(matches!(matrix_deviation(&a, &c), Err(Error::KeyMismatch)));
    }

    #[test]
    fn refining_nested_candidates_never_lowers_population_entries() {
        let model = JointModel::piecewise_constant(vec![vec![0.3, 0.05, 0.15], vec![0.1, 0.25, 0.15]]).unwrap();
        let mut prev: Option<CharacteristicMatrix> = None;
        for m in [3, 6, 12, 24] {
            let cm = population_char_matrix(&model, &SearchConfig::new(m, 6)).unwrap();
            if let Some(p) = &prev {
                for (key, e) in p.entries() {
                    assert!(cm.get(key.0, key.1).unwrap() >= e.value - 1e-12, "m={m} {key:?}");
                }
            }
            prev = Some(cm);
        }
    }

    #[test]
    fn symmetric_models_give_symmetric_matrices() {
        for model in [JointModel::IndependentUniform, JointModel::identity()] {
            let cm = population_char_matrix(&model, &SearchConfig::new(12, 12)).unwrap();
            for (&(k, l), e) in cm.entries() {
                assert!((e.value - cm.get(l, k).unwrap()).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn deviation_bounded_by_family_gap() {
        let model = JointModel::piecewise_constant(vec![vec![0.35, 0.15], vec![0.15, 0.35]]).unwrap();
        let cfg = SearchConfig::new(8, 8);
        let pop_lat = population_lattice(&model, cfg.candidate_m).unwrap();
        let pop = char_matrix(&pop_lat, &cfg).unwrap();
        for seed in 0..10 {
            let data = model.sample(400, seed).unwrap();
            let samp_lat = CandidateLattice::sample(&data, pop_lat.x_cuts().to_vec(), pop_lat.y_cuts().to_vec()).unwrap();
            let samp = char_matrix(&samp_lat, &cfg).unwrap();
            let dev = matrix_deviation(&pop, &samp).unwrap();
            let gap = family_mi_gap(&pop_lat, &samp_lat, &cfg).unwrap();
            assert!(dev <= gap.max_normalized_gap + 1e-12);
            assert!(gap.max_normalized_gap <= gap.max_gap + 1e-15);
        }
    }

    #[test]
    fn csv_layout() {
        let diag = Dataset::new(vec![(0.1, 0.1), (0.4, 0.4), (0.6, 0.6), (0.9, 0.9)], 0).unwrap();
        let cm = sample_char_matrix(&diag, &SearchConfig::new(8, 4)).unwrap();
        assert_eq!(
            cm.to_csv(),
            "k,l,value,attained_x_cuts,attained_y_cuts,candidate_m,exhaustive_flag\n2,2,1,0.5,0.5,8,true\n"
        );
    }
}
