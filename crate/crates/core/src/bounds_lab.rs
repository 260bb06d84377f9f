//! Chernoff calculators and seeded Monte Carlo runners for the straddle,
//! total-variation and consistency bounds.
//!
//! Every runner is deterministic given [`LabConfig::master_seed`]: trial `t`
//! at sample size `n` draws its data from `derive_seed(master, n, t)` on the
//! data stream and its random test grid from the same seed on the grid
//! stream. Records come back sorted by `(n, trial)`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dist::{Dataset, JointModel};
use crate::error::{Error, Result};
use crate::grids::{self, GridDistribution, GridPartition, Grouping, StraddleReport};
use crate::info::{self, BoundBreakdown};
use crate::mic::{self, CandidateLattice, CharacteristicMatrix, SearchConfig};
use crate::rng::{self, GRID_STREAM};

/// Slack allowed on inequalities that hold exactly in real arithmetic.
pub const EXACT_SLACK: f64 = 1e-12;

/// `min(1, 2 exp(-n mu t^2 / 3))`.
pub fn chernoff_two_sided(n: u64, mu: f64, t: f64) -> Result<f64> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidArgument(format!("two-sided bound needs 0 < t < 1, got {t}")));
    }
    check_mean(n, mu)?;
    Ok((2.0 * (-(n as f64) * mu * t * t / 3.0).exp()).min(1.0))
}

/// `min(1, exp(-n mu_hat t^2 / 3))`.
pub fn chernoff_upper(n: u64, mu_hat: f64, t: f64) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::InvalidArgument(format!("upper-tail bound needs 0 < t <= 1, got {t}")));
    }
    check_mean(n, mu_hat)?;
    Ok((-(n as f64) * mu_hat * t * t / 3.0).exp().min(1.0))
}

fn check_mean(n: u64, mu: f64) -> Result<()> {
    if n < 1 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::InvalidArgument(format!("mean must lie in (0, 1], got {mu}")));
    }
    Ok(())
}

/// Per-cell tail bounds with and without the dropped `pi^2` factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlawComparison {
    /// `exp(-n / C^(1+2 alpha))`.
    pub flawed: f64,
    /// `2 exp(-n pi^2 / (3 C^(1+2 alpha)))`.
    pub corrected_cell: f64,
    /// `C * corrected_cell`, uncapped.
    pub corrected_union: f64,
    /// `corrected_union` read as a probability.
    pub corrected_union_capped: f64,
}

pub fn flawed_vs_corrected(n: f64, cells: f64, alpha: f64, pi: f64) -> Result<FlawComparison> {
    if !(n >= 1.0) || !(cells >= 4.0) || !(pi > 0.0 && pi <= 1.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need n >= 1, C >= 4, 0 < pi <= 1; got n={n}, C={cells}, pi={pi}, alpha={alpha}"
        )));
    }
    let scale = cells.powf(1.0 + 2.0 * alpha);
    let flawed = (-n / scale).exp();
    let corrected_cell = 2.0 * (-n * pi * pi / (3.0 * scale)).exp();
    let corrected_union = cells * corrected_cell;
    Ok(FlawComparison { flawed, corrected_cell, corrected_union, corrected_union_capped: corrected_union.min(1.0) })
}

/// Parameters of the flawed-versus-corrected comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoConfig {
    pub n: f64,
    pub epsilon: f64,
    pub alpha: f64,
    /// Defaults to `n^(1 - epsilon/2)`.
    #[serde(default)]
    pub cells: Option<f64>,
    /// Defaults to `1 / C`, the independence case.
    #[serde(default)]
    pub pi: Option<f64>,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self { n: 1e8, epsilon: 0.5, alpha: 0.0, cells: None, pi: None }
    }
}

impl DemoConfig {
    pub fn resolved_cells(&self) -> f64 {
        self.cells.unwrap_or_else(|| self.n.powf(1.0 - self.epsilon / 2.0))
    }

    pub fn resolved_pi(&self) -> f64 {
        self.pi.unwrap_or_else(|| 1.0 / self.resolved_cells())
    }

    pub fn evaluate(&self) -> Result<FlawComparison> {
        flawed_vs_corrected(self.n, self.resolved_cells(), self.alpha, self.resolved_pi())
    }
}

/// Largest admissible `alpha` when the dropped factor is restored:
/// `(3 eps - 4) / (4 - 2 eps)`.
pub fn alpha_constraint(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 2.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 2), got {epsilon}")));
    }
    Ok((3.0 * epsilon - 4.0) / (4.0 - 2.0 * epsilon))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridDraw {
    /// Cuts uniform on `(0, 1)`.
    #[default]
    Random,
    /// Cuts chosen among the lines of the equipartition.
    OnGammaLines,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Largest accepted fraction of trials with `d` above its bound.
    pub d_violation_rate: f64,
    /// Smallest accepted fraction of trials with deviation within `deviation`.
    pub success_rate: f64,
    pub deviation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { d_violation_rate: 0.01, success_rate: 0.95, deviation: 0.05 }
    }
}

fn default_alpha() -> f64 {
    mic::DEFAULT_ALPHA
}

fn default_side() -> usize {
    2
}

fn default_coefficient() -> f64 {
    1.0
}

fn default_candidate_m() -> usize {
    mic::DEFAULT_CANDIDATE_M
}

fn default_limit() -> u64 {
    mic::DEFAULT_EXHAUSTIVE_LIMIT
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabConfig {
    pub model: JointModel,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub epsilon: f64,
    pub n_grid: Vec<usize>,
    pub trials_per_n: usize,
    #[serde(default = "default_side")]
    pub k: usize,
    #[serde(default = "default_side")]
    pub l: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Replaces the rounded `n^epsilon` refinement factor when set.
    #[serde(default)]
    pub fixed_factor: Option<usize>,
    /// `B(n) = floor(coefficient * n^alpha)`.
    #[serde(default = "default_coefficient")]
    pub budget_coefficient: f64,
    #[serde(default = "default_candidate_m")]
    pub candidate_m: usize,
    #[serde(default = "default_limit")]
    pub exhaustive_limit: u64,
    #[serde(default)]
    pub grid_draw: GridDraw,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl LabConfig {
    pub fn new(model: JointModel, epsilon: f64, n_grid: Vec<usize>, trials_per_n: usize) -> Self {
        Self {
            model,
            alpha: default_alpha(),
            epsilon,
            n_grid,
            trials_per_n,
            k: 2,
            l: 2,
            master_seed: 0,
            fixed_factor: None,
            budget_coefficient: 1.0,
            candidate_m: default_candidate_m(),
            exhaustive_limit: default_limit(),
            grid_draw: GridDraw::Random,
            tolerances: Tolerances::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.alpha > 0.0) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return bad("n_grid must be a nonempty list of positive sizes".into());
        }
        if self.trials_per_n == 0 {
            return bad("trials_per_n must be at least 1".into());
        }
        if self.k < 2 || self.l < 2 {
            return bad(format!("test grids need k, l >= 2, got {}x{}", self.k, self.l));
        }
        if self.fixed_factor.is_some_and(|f| f < 1) {
            return bad("fixed_factor must be at least 1".into());
        }
        if !(self.budget_coefficient > 0.0) {
            return bad("budget_coefficient must be positive".into());
        }
        let t = &self.tolerances;
        for (name, v) in [("d_violation_rate", t.d_violation_rate), ("success_rate", t.success_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("tolerance {name} must lie in [0, 1], got {v}"));
            }
        }
        if !(t.deviation >= 0.0) {
            return bad("deviation tolerance must be nonnegative".into());
        }
        Ok(())
    }

    /// Extra constraints of the consistency regime.
    pub fn validate_consistency(&self) -> Result<()> {
        self.validate()?;
        if self.alpha >= 0.5 {
            return Err(Error::InvalidArgument(format!("consistency runs need alpha < 0.5, got {}", self.alpha)));
        }
        let cap = 0.25 - self.alpha / 2.0;
        if self.epsilon >= cap {
            return Err(Error::InvalidArgument(format!(
                "consistency runs need epsilon < 1/4 - alpha/2 = {cap}, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Realised per-axis refinement factor: `n^epsilon` rounded, at least 2.
    pub fn factor(&self, n: usize) -> usize {
        self.fixed_factor.unwrap_or_else(|| ((n as f64).powf(self.epsilon).round() as usize).max(2))
    }

    /// Number of cells of the equipartition at size `n`.
    pub fn cell_count(&self, n: usize) -> usize {
        let f = self.factor(n);
        self.k * f * self.l * f
    }

    pub fn budget(&self, n: usize) -> usize {
        mic::budget(n, self.alpha, self.budget_coefficient)
    }

    pub fn search_config(&self, n: usize) -> SearchConfig {
        SearchConfig { candidate_m: self.candidate_m, max_cells: self.budget(n), exhaustive_limit: self.exhaustive_limit }
    }
}

/// One trial: one sample, one equipartition, one random test grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub delta: f64,
    pub delta_bound: f64,
    pub d: f64,
    pub d_bound: f64,
    /// TV between population and sample on the equipartition.
    pub tv: f64,
    pub tv_bound: f64,
    /// TV after merging down to the snapped test grid.
    pub tv_subgrid: f64,
    pub deviation: Option<f64>,
    /// Largest normalised cross-evaluation gap at the attained grids; the
    /// deviation can never exceed it.
    pub chain_witness: Option<f64>,
    pub max_rel_cell_error: f64,
    pub n_eps_eff: usize,
    pub large_cells: usize,
    pub small_cells: usize,
}

impl TrialRecord {
    pub fn delta_violated(&self) -> bool {
        self.delta > self.delta_bound
    }

    pub fn d_violated(&self) -> bool {
        self.d > self.d_bound
    }

    pub fn coarsening_violated(&self) -> bool {
        self.tv_subgrid > self.tv + EXACT_SLACK
    }

    pub fn chain_violated(&self) -> bool {
        matches!((self.deviation, self.chain_witness), (Some(dev), Some(w)) if dev > w + EXACT_SLACK)
    }
}

pub const TRIAL_CSV_HEADER: &str =
    "n,trial,seed,delta,delta_bound,d,d_bound,tv,tv_bound,deviation,max_rel_cell_error,n_eps_eff,large_cells,small_cells";

/// Trial CSV; `deviation` is empty outside consistency runs.
pub fn trials_to_csv(records: &[TrialRecord]) -> String {
    let mut out = String::with_capacity(128 * (records.len() + 1));
    out.push_str(TRIAL_CSV_HEADER);
    out.push('\n');
    for r in records {
        let deviation = r.deviation.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.trial,
            r.seed,
            r.delta,
            r.delta_bound,
            r.d,
            r.d_bound,
            r.tv,
            r.tv_bound,
            deviation,
            r.max_rel_cell_error,
            r.n_eps_eff,
            r.large_cells,
            r.small_cells
        );
    }
    out
}

/// Per-size state shared by all trials.
struct SizeContext {
    n: usize,
    factor: usize,
    gamma: GridPartition,
    pop_gamma: GridDistribution,
}

impl SizeContext {
    fn new(cfg: &LabConfig, n: usize) -> Result<Self> {
        let factor = cfg.factor(n);
        let gamma = grids::equipartition(&cfg.model, cfg.k * factor, cfg.l * factor)?;
        let pop_gamma = grids::induce_population(&cfg.model, &gamma);
        Ok(Self { n, factor, gamma, pop_gamma })
    }
}

fn random_cuts(rng: &mut rng::Stream, count: usize) -> Vec<f64> {
    let mut cuts: Vec<f64> = Vec::with_capacity(count);
    while cuts.len() < count {
        let c = rng::unit_f64(rng);
        if c > 0.0 && !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts
}

fn lines_subset(rng: &mut rng::Stream, lines: &[f64], count: usize) -> Vec<f64> {
    let mut picked: Vec<usize> = Vec::with_capacity(count);
    while picked.len() < count {
        let i = ((rng::unit_f64(rng) * lines.len() as f64) as usize).min(lines.len() - 1);
        if !picked.contains(&i) {
            picked.push(i);
        }
    }
    picked.sort_unstable();
    picked.into_iter().map(|i| lines[i]).collect()
}

/// The `k x l` test grid of one trial.
pub fn draw_test_grid(cfg: &LabConfig, seed: u64, gamma: &GridPartition) -> Result<GridPartition> {
    let mut rng = rng::stream(seed, GRID_STREAM);
    let (x, y) = match cfg.grid_draw {
        GridDraw::Random => (random_cuts(&mut rng, cfg.l - 1), random_cuts(&mut rng, cfg.k - 1)),
        GridDraw::OnGammaLines => {
            (lines_subset(&mut rng, gamma.x_cuts(), cfg.l - 1), lines_subset(&mut rng, gamma.y_cuts(), cfg.k - 1))
        }
    };
    GridPartition::new(x, y)
}

struct TrialState {
    record: TrialRecord,
    data: Dataset,
    g: GridPartition,
    samp_gamma: GridDistribution,
}

fn run_trial(cfg: &LabConfig, ctx: &SizeContext, trial: usize) -> Result<TrialState> {
    let n = ctx.n;
    let seed = rng::derive_seed(cfg.master_seed, n as u64, trial as u64);
    let data = cfg.model.sample(n, seed)?;
    let samp_gamma = grids::induce_sample(&data, &ctx.gamma)?;
    let g = draw_test_grid(cfg, seed, &ctx.gamma)?;
    let straddle = StraddleReport::from_distributions(&ctx.pop_gamma, &samp_gamma, &ctx.gamma, &g)?;

    let snapped = grids::snap_to_subgrid(&g, &ctx.gamma);
    let grouping = Grouping::between(&ctx.gamma, &snapped)?;
    let (tv, tv_subgrid) = info::tv_coarsen_check(&ctx.pop_gamma, &samp_gamma, &grouping)?;

    let threshold = 9.0 * (n as f64).log2() / n as f64;
    let mut max_rel_cell_error = 0.0f64;
    let mut large_cells = 0;
    for (&pi, &psi) in ctx.pop_gamma.masses().iter().zip(samp_gamma.masses()) {
        if pi > 0.0 {
            max_rel_cell_error = max_rel_cell_error.max((psi - pi).abs() / pi);
        }
        if pi > threshold {
            large_cells += 1;
        }
    }
    let f = ctx.factor as f64;
    let nf = n as f64;
    let record = TrialRecord {
        n,
        trial,
        seed,
        delta: straddle.delta,
        delta_bound: 2.0 / f,
        d: straddle.d,
        d_bound: 4.0 / f,
        tv,
        tv_bound: nf.powf(cfg.alpha) * f * f * (nf.log2() / nf).sqrt(),
        tv_subgrid,
        deviation: None,
        chain_witness: None,
        max_rel_cell_error,
        n_eps_eff: ctx.factor,
        large_cells,
        small_cells: ctx.gamma.cells() - large_cells,
    };
    Ok(TrialState { record, data, g, samp_gamma })
}

fn for_each_trial(cfg: &LabConfig, mut f: impl FnMut(&SizeContext, TrialState) -> Result<()>) -> Result<()> {
    let mut sizes = cfg.n_grid.clone();
    sizes.sort_unstable();
    sizes.dedup();
    for n in sizes {
        let ctx = SizeContext::new(cfg, n)?;
        for trial in 0..cfg.trials_per_n {
            f(&ctx, run_trial(cfg, &ctx, trial)?)?;
        }
    }
    Ok(())
}

/// Straddle masses `delta` and `d` of a random test grid against the
/// equipartition, with their bounds `2/f` and `4/f`.
pub fn run_straddle_trials(cfg: &LabConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for_each_trial(cfg, |_, t| {
        out.push(t.record);
        Ok(())
    })?;
    Ok(out)
}

/// Population-versus-sample TV on the equipartition and on the snapped
/// test grid. The records are the same as the straddle runner's; both
/// families of columns are filled in every run.
pub fn run_tv_trials(cfg: &LabConfig) -> Result<Vec<TrialRecord>> {
    run_straddle_trials(cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRecord {
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub breakdown: BoundBreakdown,
}

pub const DECOMPOSITION_CSV_HEADER: &str = "n,trial,seed,lhs,term_delta,term_d,term_subgrid,beta,delta,d,collapsed_lines";

pub fn decompositions_to_csv(records: &[DecompositionRecord]) -> String {
    let mut out = String::from(DECOMPOSITION_CSV_HEADER);
    out.push('\n');
    for r in records {
        let b = &r.breakdown;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.n, r.trial, r.seed, b.lhs, b.term_delta, b.term_d, b.term_subgrid, b.beta, b.delta, b.d, b.collapsed_lines
        );
    }
    out
}

/// Grid-snapping decomposition of the MI gap on each trial's test grid.
pub fn run_decomposition_trials(cfg: &LabConfig) -> Result<Vec<DecompositionRecord>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for_each_trial(cfg, |ctx, t| {
        let breakdown = info::decomposition_with(&cfg.model, &t.data, &t.g, &ctx.gamma, &ctx.pop_gamma, &t.samp_gamma)?;
        out.push(DecompositionRecord { n: ctx.n, trial: t.record.trial, seed: t.record.seed, breakdown });
        Ok(())
    })?;
    Ok(out)
}

fn cut_indices(cuts: &[f64], values: &[f64]) -> Vec<usize> {
    values.iter().map(|v| cuts.partition_point(|c| c < v)).collect()
}

/// Cross-evaluates each lattice at the other's maximising grid. The result
/// is a member of the family maximum `max_G |I_pop(G) - I_samp(G)|`
/// (normalised), and bounds the matrix deviation from above.
pub fn chain_witness(
    pop_lattice: &CandidateLattice,
    samp_lattice: &CandidateLattice,
    population: &CharacteristicMatrix,
    sample: &CharacteristicMatrix,
) -> Result<f64> {
    if pop_lattice.x_cuts() != samp_lattice.x_cuts() || pop_lattice.y_cuts() != samp_lattice.y_cuts() {
        return Err(Error::InvalidArgument("lattices do not share a candidate family".into()));
    }
    let mut witness = 0.0f64;
    for (&(k, l), pe) in population.entries() {
        let se = sample.entry(k, l).ok_or(Error::KeyMismatch)?;
        let norm = (k.min(l) as f64).log2();
        for e in [pe, se] {
            let xs = cut_indices(pop_lattice.x_cuts(), &e.x_cuts);
            let ys = cut_indices(pop_lattice.y_cuts(), &e.y_cuts);
            let gap = (pop_lattice.mi_at(&xs, &ys) - samp_lattice.mi_at(&xs, &ys)).abs() / norm;
            witness = witness.max(gap);
        }
    }
    Ok(witness)
}

/// Population and sample characteristic matrices over the population
/// quantile family, compared for all `k l <= B(n)`.
pub fn run_consistency_trials(cfg: &LabConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate_consistency()?;
    let pop_lattice = mic::population_lattice(&cfg.model, cfg.candidate_m)?;
    let mut current: Option<(usize, CharacteristicMatrix, SearchConfig)> = None;
    let mut out = Vec::new();
    for_each_trial(cfg, |ctx, mut t| {
        if current.as_ref().is_none_or(|c| c.0 != ctx.n) {
            let search = cfg.search_config(ctx.n);
            let population = mic::char_matrix(&pop_lattice, &search)?;
            current = Some((ctx.n, population, search));
        }
        let (_, population, search) = current.as_ref().expect("set above");
        let samp_lattice =
            CandidateLattice::sample(&t.data, pop_lattice.x_cuts().to_vec(), pop_lattice.y_cuts().to_vec())?;
        let sample = mic::char_matrix(&samp_lattice, search)?;
        t.record.deviation = Some(mic::matrix_deviation(population, &sample)?);
        t.record.chain_witness = Some(chain_witness(&pop_lattice, &samp_lattice, population, &sample)?);
        out.push(t.record);
        Ok(())
    })?;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Least squares on `(ln n, ln value)`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!("a fit needs at least 3 points, got {}", points.len())));
    }
    if let Some(&(n, v)) = points.iter().find(|&&(n, v)| !(n > 0.0 && v > 0.0 && n.is_finite() && v.is_finite())) {
        return Err(Error::InvalidArgument(format!("fit points must be positive and finite, got ({n}, {v})")));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("a fit needs at least two distinct sizes".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(FitResult { slope, intercept, r_squared, n_points: points.len() })
}

fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len().is_multiple_of(2) { 0.5 * (values[mid - 1] + values[mid]) } else { values[mid] })
}

/// Median of `field` at each sample size, skipping records where it is absent.
pub fn median_by_n(records: &[TrialRecord], field: impl Fn(&TrialRecord) -> Option<f64>) -> Vec<(usize, f64)> {
    let mut sizes: Vec<usize> = records.iter().map(|r| r.n).collect();
    sizes.dedup();
    sizes
        .into_iter()
        .filter_map(|n| median(records.iter().filter(|r| r.n == n).filter_map(&field).collect()).map(|m| (n, m)))
        .collect()
}

/// Fit of the per-size medians of `field`, when at least three are positive.
pub fn median_fit(records: &[TrialRecord], field: impl Fn(&TrialRecord) -> Option<f64>) -> Option<FitResult> {
    let points: Vec<(f64, f64)> =
        median_by_n(records, field).into_iter().filter(|&(_, m)| m > 0.0).map(|(n, m)| (n as f64, m)).collect();
    fit_power_law(&points).ok()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub n: usize,
    pub trials: usize,
    pub n_eps_eff: usize,
    pub median_delta: f64,
    pub median_d: f64,
    pub median_tv: f64,
    pub median_deviation: Option<f64>,
    pub delta_violations: usize,
    pub d_violations: usize,
    pub coarsening_violations: usize,
    pub chain_violations: usize,
    pub deviation_within_tolerance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabSummary {
    pub trials: usize,
    pub delta_violations: usize,
    pub d_violation_rate: f64,
    pub d_rate_ok: bool,
    pub coarsening_violations: usize,
    pub chain_violations: usize,
    pub tv_fit: Option<FitResult>,
    pub deviation_fit: Option<FitResult>,
    pub per_n: Vec<SizeSummary>,
}

impl LabSummary {
    /// True when a bound that holds with certainty was broken.
    pub fn hard_violation(&self) -> bool {
        self.delta_violations > 0 || self.coarsening_violations > 0 || self.chain_violations > 0
    }
}

pub fn summarize(records: &[TrialRecord], tolerances: &Tolerances) -> LabSummary {
    let count = |rs: &[&TrialRecord], p: fn(&TrialRecord) -> bool| rs.iter().filter(|r| p(r)).count();
    let mut sizes: Vec<usize> = records.iter().map(|r| r.n).collect();
    sizes.dedup();
    let per_n = sizes
        .into_iter()
        .map(|n| {
            let rs: Vec<&TrialRecord> = records.iter().filter(|r| r.n == n).collect();
            let deviations: Vec<f64> = rs.iter().filter_map(|r| r.deviation).collect();
            let within = (!deviations.is_empty()).then(|| {
                deviations.iter().filter(|&&d| d <= tolerances.deviation).count() as f64 / deviations.len() as f64
            });
            SizeSummary {
                n,
                trials: rs.len(),
                n_eps_eff: rs[0].n_eps_eff,
                median_delta: median(rs.iter().map(|r| r.delta).collect()).unwrap_or(0.0),
                median_d: median(rs.iter().map(|r| r.d).collect()).unwrap_or(0.0),
                median_tv: median(rs.iter().map(|r| r.tv).collect()).unwrap_or(0.0),
                median_deviation: median(deviations),
                delta_violations: count(&rs, TrialRecord::delta_violated),
                d_violations: count(&rs, TrialRecord::d_violated),
                coarsening_violations: count(&rs, TrialRecord::coarsening_violated),
                chain_violations: count(&rs, TrialRecord::chain_violated),
                deviation_within_tolerance: within,
            }
        })
        .collect::<Vec<_>>();
    let all: Vec<&TrialRecord> = records.iter().collect();
    let d_violation_rate =
        if records.is_empty() { 0.0 } else { count(&all, TrialRecord::d_violated) as f64 / records.len() as f64 };
    LabSummary {
        trials: records.len(),
        delta_violations: count(&all, TrialRecord::delta_violated),
        d_violation_rate,
        d_rate_ok: d_violation_rate <= tolerances.d_violation_rate,
        coarsening_violations: count(&all, TrialRecord::coarsening_violated),
        chain_violations: count(&all, TrialRecord::chain_violated),
        tv_fit: median_fit(records, |r| Some(r.tv)),
        deviation_fit: median_fit(records, |r| r.deviation),
        per_n,
    }
}
