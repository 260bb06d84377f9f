//! Information and distance functionals on grid distributions, in bits.

use serde::{Deserialize, Serialize};

use crate::dist::{Dataset, JointModel};
use crate::error::{Error, Result};
use crate::grids::{self, GridDistribution, GridPartition, Grouping, StraddleReport};

/// Mutual information of a row-major `rows x cols` mass table, with
/// `0 log 0 = 0`. Masses are assumed valid.
pub(crate) fn mi_of_masses(rows: usize, cols: usize, masses: &[f64]) -> f64 {
    let mut row_sums = vec![0.0; rows];
    let mut col_sums = vec![0.0; cols];
    for (i, row) in masses.chunks(cols).enumerate() {
        for (j, &m) in row.iter().enumerate() {
            row_sums[i] += m;
            col_sums[j] += m;
        }
    }
    let mut mi = 0.0;
    for (i, row) in masses.chunks(cols).enumerate() {
        for (j, &m) in row.iter().enumerate() {
            if m > 0.0 {
                mi += m * (m / (row_sums[i] * col_sums[j])).log2();
            }
        }
    }
    mi.max(0.0)
}

pub fn mutual_information(p: &GridDistribution) -> f64 {
    mi_of_masses(p.rows(), p.cols(), p.masses())
}

fn same_shape(p: &GridDistribution, q: &GridDistribution) -> Result<()> {
    if p.rows() != q.rows() || p.cols() != q.cols() {
        return Err(Error::ShapeMismatch {
            left_rows: p.rows(),
            left_cols: p.cols(),
            right_rows: q.rows(),
            right_cols: q.cols(),
        });
    }
    Ok(())
}

/// Half the L1 distance between two distributions on the same grid.
pub fn tv_distance(p: &GridDistribution, q: &GridDistribution) -> Result<f64> {
    same_shape(p, q)?;
    Ok(0.5 * p.masses().iter().zip(q.masses()).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// `multiplier * delta * log2(min(rows, cols) / delta)`, the shape of the
/// mutual-information change allowed by a TV distance of at most `delta`.
/// The hidden constant is not known, so it is left to the caller.
pub fn prop40_bound(delta: f64, rows: usize, cols: usize, multiplier: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 0.25) {
        return Err(Error::InvalidArgument(format!(
            "TV radius {delta} outside the hypothesis 0 < delta <= 1/4"
        )));
    }
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidArgument(format!("grid must be at least 2x2, got {rows}x{cols}")));
    }
    Ok(multiplier * delta * (rows.min(cols) as f64 / delta).log2())
}

/// `mass * log2(beta / mass)`, zero at zero mass.
pub fn straddle_term(mass: f64, beta: usize) -> f64 {
    if mass <= 0.0 {
        0.0
    } else {
        mass * (beta as f64 / mass).log2()
    }
}

/// The four quantities of the grid-snapping decomposition for one grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundBreakdown {
    /// `|I(pop on G) - I(sample on G)|`.
    pub lhs: f64,
    pub term_delta: f64,
    pub term_d: f64,
    /// `|I(pop on G') - I(sample on G')|` for the snapped grid G'.
    pub term_subgrid: f64,
    pub beta: usize,
    pub delta: f64,
    pub d: f64,
    /// Lines of `g` that merged with another line when snapped.
    pub collapsed_lines: usize,
}

impl BoundBreakdown {
    /// `(lhs - term_subgrid) / (term_delta + term_d)`, when the denominator
    /// is positive.
    pub fn envelope_ratio(&self) -> Option<f64> {
        let denom = self.term_delta + self.term_d;
        (denom > 0.0).then(|| (self.lhs - self.term_subgrid) / denom)
    }
}

/// Largest envelope ratio over a set of breakdowns.
pub fn envelope_constant<'a>(items: impl IntoIterator<Item = &'a BoundBreakdown>) -> Option<f64> {
    items.into_iter().filter_map(BoundBreakdown::envelope_ratio).reduce(f64::max)
}

fn mi_gap(model: &JointModel, data: &Dataset, grid: &GridPartition) -> Result<f64> {
    let pop = mutual_information(&grids::induce_population(model, grid));
    let samp = mutual_information(&grids::induce_sample(data, grid)?);
    Ok((pop - samp).abs())
}

pub fn decomposition_breakdown(
    model: &JointModel,
    data: &Dataset,
    g: &GridPartition,
    gamma: &GridPartition,
) -> Result<BoundBreakdown> {
    let pop_gamma = grids::induce_population(model, gamma);
    let samp_gamma = grids::induce_sample(data, gamma)?;
    decomposition_with(model, data, g, gamma, &pop_gamma, &samp_gamma)
}

/// Same as [`decomposition_breakdown`] with the distributions on `gamma`
/// already induced.
pub fn decomposition_with(
    model: &JointModel,
    data: &Dataset,
    g: &GridPartition,
    gamma: &GridPartition,
    pop_gamma: &GridDistribution,
    samp_gamma: &GridDistribution,
) -> Result<BoundBreakdown> {
    let beta = g.cells();
    let straddle = StraddleReport::from_distributions(pop_gamma, samp_gamma, gamma, g)?;
    let snapped = grids::snap_to_subgrid(g, gamma);
    let collapsed_lines = (g.x_cuts().len() + g.y_cuts().len()) - (snapped.x_cuts().len() + snapped.y_cuts().len());
    Ok(BoundBreakdown {
        lhs: mi_gap(model, data, g)?,
        term_delta: straddle_term(straddle.delta, beta),
        term_d: straddle_term(straddle.d, beta),
        term_subgrid: mi_gap(model, data, &snapped)?,
        beta,
        delta: straddle.delta,
        d: straddle.d,
        collapsed_lines,
    })
}

/// TV distance before and after merging both distributions by `grouping`.
pub fn tv_coarsen_check(p_fine: &GridDistribution, q_fine: &GridDistribution, grouping: &Grouping) -> Result<(f64, f64)> {
    let fine = tv_distance(p_fine, q_fine)?;
    let coarse = tv_distance(&p_fine.merge(grouping)?, &q_fine.merge(grouping)?)?;
    Ok((fine, coarse))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::{equipartition, GridPartition};
    use crate::rng;
    use proptest::prelude::*;

    fn dist(m: Vec<Vec<f64>>) -> GridDistribution {
        GridDistribution::from_matrix(m).unwrap()
    }

    /// Direct hand evaluation over the four cells with uniform marginals.
    fn checkerboard_mi_oracle() -> f64 {
        2.0 * 0.4 * (0.4f64 / 0.25).log2() + 2.0 * 0.1 * (0.1f64 / 0.25).log2()
    }

    #[test]
    fn mi_examples() {
        assert_eq!(mutual_information(&dist(vec![vec![0.25, 0.25], vec![0.25, 0.25]])), 0.0);
        assert!((mutual_information(&dist(vec![vec![0.5, 0.0], vec![0.0, 0.5]])) - 1.0).abs() < 1e-15);
        let mi = mutual_information(&dist(vec![vec![0.4, 0.1], vec![0.1, 0.4]]));
        assert!((mi - checkerboard_mi_oracle()).abs() < 1e-15);
        assert!((mi - 0.278072).abs() < 1e-6);
    }

    #[test]
    fn mi_of_degenerate_shapes_is_zero() {
        assert_eq!(mutual_information(&dist(vec![vec![0.3, 0.7]])), 0.0);
        assert_eq!(mutual_information(&dist(vec![vec![1.0]])), 0.0);
    }

    #[test]
    fn tv_examples() {
        let p = dist(vec![vec![0.5, 0.5]]);
        assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
        assert_eq!(tv_distance(&dist(vec![vec![1.0, 0.0]]), &dist(vec![vec![0.0, 1.0]])).unwrap(), 1.0);
        assert_eq!(tv_distance(&p, &dist(vec![vec![0.75, 0.25]])).unwrap(), 0.25);
        assert!(tv_distance(&p, &dist(vec![vec![0.5], vec![0.5]])).is_err());
    }

    #[test]
    fn prop40_examples() {
        assert!(prop40_bound(1e-300, 2, 2, 1.0).unwrap() < 1e-290);
        assert!((prop40_bound(0.25, 2, 2, 1.0).unwrap() - 0.75).abs() < 1e-15);
        assert!(prop40_bound(0.3, 2, 2, 1.0).is_err());
        assert!(prop40_bound(0.0, 2, 2, 1.0).is_err());
        assert!(prop40_bound(0.1, 1, 2, 1.0).is_err());
    }

    #[test]
    fn straddle_term_limits() {
        assert_eq!(straddle_term(0.0, 4), 0.0);
        assert!((straddle_term(0.5, 4) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn decomposition_on_exact_subgrid() {
        let model = JointModel::piecewise_constant(vec![vec![0.3, 0.2], vec![0.1, 0.4]]).unwrap();
        let data = model.sample(300, 5).unwrap();
        let gamma = equipartition(&model, 8, 8).unwrap();
        let g = GridPartition::new(vec![gamma.x_cuts()[2]], vec![gamma.y_cuts()[5]]).unwrap();
        let b = decomposition_breakdown(&model, &data, &g, &gamma).unwrap();
        assert_eq!((b.term_delta, b.term_d), (0.0, 0.0));
        assert_eq!(b.lhs, b.term_subgrid);
        assert_eq!(b.beta, 4);
        assert_eq!(b.envelope_ratio(), None);
    }

    #[test]
    fn decomposition_with_reproducing_sample() {
        // One point at the centre of each 1/4 x 1/4 block reproduces the
        // uniform masses on any grid with cuts at multiples of 1/4.
        let pts = (0..4).flat_map(|i| (0..4).map(move |j| ((i as f64 + 0.5) / 4.0, (j as f64 + 0.5) / 4.0))).collect();
        let data = Dataset::new(pts, 0).unwrap();
        let g = GridPartition::new(vec![0.5], vec![0.25]).unwrap();
        let gamma = equipartition(&JointModel::IndependentUniform, 4, 4).unwrap();
        let b = decomposition_breakdown(&JointModel::IndependentUniform, &data, &g, &gamma).unwrap();
        assert!(b.lhs.abs() < 1e-15);
    }

    #[test]
    fn decomposition_envelope_on_random_models() {
        // Ensemble from the info module contract: lhs <= term_subgrid +
        // 4 (term_delta + term_d) over 200 random instances.
        let mut worst: f64 = f64::NEG_INFINITY;
        for trial in 0..200u64 {
            let mut r = rng::stream(trial, 11);
            let raw: Vec<f64> = (0..9).map(|_| 0.05 + rng::unit_f64(&mut r)).collect();
            let total: f64 = raw.iter().sum();
            let model = JointModel::piecewise_constant(raw.chunks(3).map(|c| c.iter().map(|m| m / total).collect()).collect())
                .unwrap();
            let data = model.sample(1024, trial).unwrap();
            let gamma = equipartition(&model, 8, 8).unwrap();
            let g = GridPartition::new(vec![0.02 + 0.96 * rng::unit_f64(&mut r)], vec![0.02 + 0.96 * rng::unit_f64(&mut r)]).unwrap();
            let b = decomposition_breakdown(&model, &data, &g, &gamma).unwrap();
            assert!(b.lhs <= b.term_subgrid + 4.0 * (b.term_delta + b.term_d), "trial {trial}: {b:?}");
            if let Some(ratio) = b.envelope_ratio() {
                worst = worst.max(ratio);
            }
        }
        assert!(worst.is_finite());
    }

    #[test]
    fn tv_coarsening_examples() {
        let p = dist(vec![vec![0.1, 0.2], vec![0.3, 0.4]]);
        let q = dist(vec![vec![0.4, 0.3], vec![0.2, 0.1]]);
        let all = Grouping::new(vec![0, 0], vec![0, 0]).unwrap();
        let (fine, coarse) = tv_coarsen_check(&p, &q, &all).unwrap();
        assert!(coarse.abs() < 1e-15);
        assert!(fine > 0.0);
        let (fine, coarse) = tv_coarsen_check(&p, &q, &Grouping::identity(2, 2)).unwrap();
        assert_eq!(fine, coarse);
    }

    fn normalised(raw: Vec<f64>) -> Vec<f64> {
        let total: f64 = raw.iter().sum();
        raw.iter().map(|m| m / total).collect()
    }

    fn arb_dist(rows: usize, cols: usize) -> impl Strategy<Value = GridDistribution> {
        proptest::collection::vec(0.001f64..1.0, rows * cols)
            .prop_map(move |raw| GridDistribution::new(rows, cols, normalised(raw)).unwrap())
    }

    fn arb_any_dist() -> impl Strategy<Value = GridDistribution> {
        (1usize..7, 1usize..7).prop_flat_map(|(r, c)| arb_dist(r, c))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn mi_within_zero_and_log_min(p in arb_any_dist()) {
            let mi = mutual_information(&p);
            prop_assert!(mi >= 0.0);
            prop_assert!(mi <= (p.rows().min(p.cols()) as f64).log2() + 1e-12);
        }

        #[test]
        fn mi_of_products_vanishes(rows in proptest::collection::vec(0.001f64..1.0, 1..7),
                                   cols in proptest::collection::vec(0.001f64..1.0, 1..7)) {
            let (r, c) = (normalised(rows), normalised(cols));
            let masses: Vec<f64> = r.iter().flat_map(|a| c.iter().map(move |b| a * b)).collect();
            let p = GridDistribution::new(r.len(), c.len(), masses).unwrap();
            prop_assert!(mutual_information(&p) <= 1e-12);
        }

        #[test]
        fn mi_invariant_under_row_permutation(p in arb_dist(4, 3), shift in 1usize..4) {
            let rows: Vec<Vec<f64>> = p.masses().chunks(3).map(|r| r.to_vec()).collect();
            let mut rotated = rows.clone();
            rotated.rotate_left(shift);
            let q = GridDistribution::from_matrix(rotated).unwrap();
            prop_assert!((mutual_information(&p) - mutual_information(&q)).abs() <= 1e-12);
        }

        #[test]
        fn tv_metric_axioms(p in arb_dist(3, 3), q in arb_dist(3, 3), r in arb_dist(3, 3)) {
            let pq = tv_distance(&p, &q).unwrap();
            prop_assert_eq!(pq, tv_distance(&q, &p).unwrap());
            prop_assert!((0.0..=1.0).contains(&pq));
            let pr = tv_distance(&p, &r).unwrap();
            let rq = tv_distance(&r, &q).unwrap();
            prop_assert!(pq <= pr + rq + 1e-12);
        }

        #[test]
        fn coarsening_never_increases_tv(p in arb_dist(8, 8), q in arb_dist(8, 8),
                                         row_split in 1usize..8, col_split in 1usize..8) {
            let rows: Vec<usize> = (0..8).map(|i| usize::from(i >= row_split)).collect();
            let cols: Vec<usize> = (0..8).map(|j| usize::from(j >= col_split)).collect();
            let (fine, coarse) = tv_coarsen_check(&p, &q, &Grouping::new(rows, cols).unwrap()).unwrap();
            prop_assert!(coarse <= fine + 1e-12);
        }
    }

    #[test]
    fn diagonal_mi_equals_log_k() {
        for k in 2..=8usize {
            let mut m = vec![0.0; k * k];
            for i in 0..k {
                m[i * k + i] = 1.0 / k as f64;
            }
            let p = GridDistribution::new(k, k, m).unwrap();
            assert!((mutual_information(&p) - (k as f64).log2()).abs() < 1e-12);
        }
    }

    #[test]
    fn tv_triangle_on_random_triples() {
        let mut r = rng::stream(42, 3);
        let mut draw = || {
            let raw: Vec<f64> = (0..16).map(|_| rng::unit_f64(&mut r)).collect();
            GridDistribution::new(4, 4, normalised(raw)).unwrap()
        };
        for _ in 0..1000 {
            let (p, q, s) = (draw(), draw(), draw());
            let lhs = tv_distance(&p, &q).unwrap();
            assert!(lhs <= tv_distance(&p, &s).unwrap() + tv_distance(&s, &q).unwrap() + 1e-12);
        }
    }
}
