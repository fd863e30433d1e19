//! Confidence band for theory-minus-experiment differences and per-model
//! consistency or exclusion verdicts.
//!
//! The difference of two independently determined quantities carries the
//! error Ξ = min{Δ_th + Δ_exp, k_β^(2)·sqrt(Δ_th² + Δ_exp²)}. A model is
//! consistent at a grid point when its mean difference lies in the closed
//! band [−Ξ, Ξ], and excluded over a range when it leaves the band at every
//! point of the range.

use serde::{Deserialize, Serialize};

use crate::composition::CoefficientTables;
use crate::data::TheoryCurve;
use crate::error::{Error, Result};

/// Half-width of the confidence band for the difference of two quantities
/// with total absolute errors `delta_tot_theory` and `delta_tot_exp`.
pub fn difference_error(
    delta_tot_theory: f64,
    delta_tot_exp: f64,
    beta: f64,
    tables: &CoefficientTables,
) -> Result<f64> {
    if delta_tot_theory < 0.0 || delta_tot_exp < 0.0 {
        return Err(Error::InvalidInput(
            "total errors must be nonnegative".into(),
        ));
    }
    let k = tables.k(beta, 2)?;
    let sum = delta_tot_theory + delta_tot_exp;
    let quad = k * (delta_tot_theory * delta_tot_theory + delta_tot_exp * delta_tot_exp).sqrt();
    Ok(sum.min(quad))
}

/// Mean theory-minus-experiment difference at each experimental abscissa.
/// The theory curve must cover the experimental range.
pub fn mean_difference(curve: &TheoryCurve, exp_means: &[(f64, f64)]) -> Result<Vec<f64>> {
    exp_means
        .iter()
        .map(|&(z_nm, mean)| Ok(curve.interpolate(z_nm)? - mean))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandStatus {
    Consistent,
    Excluded,
}

/// Band membership at one separation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BandPoint {
    pub z_nm: f64,
    pub difference: f64,
    pub xi: f64,
    pub inside: bool,
}

/// Maximal contiguous grid range with one status.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZRange {
    pub from_nm: f64,
    pub to_nm: f64,
    pub status: BandStatus,
}

/// Per-model comparison outcome.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonVerdict {
    pub model_name: String,
    pub beta: f64,
    pub points: Vec<BandPoint>,
    /// Partition of the analyzed grid into consistent/excluded ranges.
    pub ranges: Vec<ZRange>,
}

impl ComparisonVerdict {
    pub fn excluded_ranges(&self) -> impl Iterator<Item = &ZRange> {
        self.ranges
            .iter()
            .filter(|r| r.status == BandStatus::Excluded)
    }

    pub fn is_excluded(&self) -> bool {
        self.excluded_ranges().next().is_some()
    }
}

/// Builds the verdict for one model. Out-of-band runs shorter than
/// `min_run` grid points do not form exclusion ranges; they stay visible
/// through the per-point `inside` flags.
pub fn verdict(
    model_name: &str,
    beta: f64,
    zs: &[f64],
    differences: &[f64],
    xis: &[f64],
    min_run: usize,
) -> Result<ComparisonVerdict> {
    if zs.len() != differences.len() || zs.len() != xis.len() {
        return Err(Error::InvalidInput(format!(
            "grid mismatch: {} separations, {} differences, {} band half-widths",
            zs.len(),
            differences.len(),
            xis.len()
        )));
    }
    if zs.is_empty() {
        return Err(Error::InvalidInput("empty comparison grid".into()));
    }
    let min_run = min_run.max(1);
    let points: Vec<BandPoint> = zs
        .iter()
        .zip(differences)
        .zip(xis)
        .map(|((&z_nm, &difference), &xi)| BandPoint {
            z_nm,
            difference,
            xi,
            inside: difference.abs() <= xi,
        })
        .collect();

    // mark points sitting in an out-of-band run of at least min_run
    let mut excluded = vec![false; points.len()];
    let mut i = 0;
    while i < points.len() {
        if points[i].inside {
            i += 1;
            continue;
        }
        let start = i;
        while i < points.len() && !points[i].inside {
            i += 1;
        }
        if i - start >= min_run {
            for flag in &mut excluded[start..i] {
                *flag = true;
            }
        }
    }

    let mut ranges = Vec::new();
    let mut start = 0;
    for i in 1..=points.len() {
        if i == points.len() || excluded[i] != excluded[start] {
            ranges.push(ZRange {
                from_nm: points[start].z_nm,
                to_nm: points[i - 1].z_nm,
                status: if excluded[start] {
                    BandStatus::Excluded
                } else {
                    BandStatus::Consistent
                },
            });
            start = i;
        }
    }

    Ok(ComparisonVerdict {
        model_name: model_name.to_string(),
        beta,
        points,
        ranges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn tables() -> CoefficientTables {
        CoefficientTables::default()
    }

    #[test]
    fn difference_error_reference_points() {
        // relative form pass-through
        let xi = difference_error(1.6, 0.59, 0.95, &tables()).unwrap();
        assert_abs_diff_eq!(xi, 1.876, epsilon = 1e-3);
        let xi = difference_error(3.5, 0.87, 0.95, &tables()).unwrap();
        assert_abs_diff_eq!(xi, 3.967, epsilon = 1e-3);
        // with one argument zero: min{x, 1.1x} = x
        assert_eq!(difference_error(0.0, 2.0, 0.95, &tables()).unwrap(), 2.0);
    }

    #[test]
    fn difference_error_bounds() {
        let xi = difference_error(3.0, 4.0, 0.95, &tables()).unwrap();
        assert!(xi >= 4.0 && xi <= 7.0);
    }

    #[test]
    fn mean_difference_translation() {
        let curve = TheoryCurve::new("m", vec![(100.0, -5.0), (200.0, -2.0)]).unwrap();
        let exp = vec![(100.0, -5.0), (150.0, -3.5), (200.0, -2.0)];
        let diffs = mean_difference(&curve, &exp).unwrap();
        assert!(diffs.iter().all(|d| d.abs() < 1e-12));
        let shifted: Vec<(f64, f64)> = exp.iter().map(|&(z, v)| (z, v - 0.5)).collect();
        let diffs = mean_difference(&curve, &shifted).unwrap();
        assert!(diffs.iter().all(|d| (d - 0.5).abs() < 1e-12));
    }

    #[test]
    fn theory_must_cover_experiment_range() {
        let curve = TheoryCurve::new("m", vec![(100.0, -5.0), (200.0, -2.0)]).unwrap();
        let exp = vec![(150.0, -3.5), (250.0, -1.0)];
        assert!(matches!(
            mean_difference(&curve, &exp),
            Err(Error::OutsideGrid { .. })
        ));
    }

    #[test]
    fn band_boundary_is_closed() {
        let v = verdict("m", 0.95, &[100.0], &[1.5], &[1.5], 1).unwrap();
        assert!(v.points[0].inside);
        assert!(!v.is_excluded());
    }

    #[test]
    fn out_of_band_everywhere_is_excluded_over_the_range() {
        let zs = [170.0, 180.0];
        let v = verdict("drude", 0.95, &zs, &[18.8, 14.4], &[17.2, 13.4], 2).unwrap();
        assert!(v.points.iter().all(|p| !p.inside));
        assert_eq!(
            v.ranges,
            vec![ZRange {
                from_nm: 170.0,
                to_nm: 180.0,
                status: BandStatus::Excluded
            }]
        );
    }

    #[test]
    fn inside_band_is_consistent() {
        let v = verdict("impedance", 0.95, &[170.0, 180.0], &[2.01, -0.74], &[17.2, 13.4], 2)
            .unwrap();
        assert!(v.points.iter().all(|p| p.inside));
        assert!(!v.is_excluded());
    }

    #[test]
    fn short_runs_do_not_form_exclusions() {
        // single out-of-band point between in-band neighbors
        let zs = [1.0, 2.0, 3.0];
        let v = verdict("m", 0.95, &zs, &[0.1, 5.0, 0.1], &[1.0, 1.0, 1.0], 2).unwrap();
        assert!(!v.points[1].inside);
        assert!(!v.is_excluded());
        assert_eq!(v.ranges.len(), 1);
        assert_eq!(v.ranges[0].status, BandStatus::Consistent);
        // with min_run = 1 the same data excludes the middle point
        let v = verdict("m", 0.95, &zs, &[0.1, 5.0, 0.1], &[1.0, 1.0, 1.0], 1).unwrap();
        assert!(v.is_excluded());
        assert_eq!(v.ranges.len(), 3);
    }

    #[test]
    fn ranges_partition_the_grid() {
        let zs: Vec<f64> = (0..12).map(|i| 100.0 + 10.0 * i as f64).collect();
        let diffs: Vec<f64> = (0..12)
            .map(|i| if (4..8).contains(&i) { 3.0 } else { 0.0 })
            .collect();
        let xis = vec![1.0; 12];
        let v = verdict("m", 0.95, &zs, &diffs, &xis, 2).unwrap();
        assert_eq!(v.ranges.len(), 3);
        assert_eq!(v.ranges[0].to_nm, zs[3]);
        assert_eq!(v.ranges[1].status, BandStatus::Excluded);
        assert_eq!(v.ranges[1].from_nm, zs[4]);
        assert_eq!(v.ranges[1].to_nm, zs[7]);
        assert_eq!(v.ranges[2].from_nm, zs[8]);
    }

    #[test]
    fn nested_confidence_bands() {
        // monotone coefficient tables: wider band at higher beta
        let t95 = tables();
        let mut t99 = tables();
        t99.k_beta = vec![crate::composition::KEntry {
            beta: 0.99,
            j: 2,
            k: 1.40,
        }];
        for (a, b) in [(1.0, 2.0), (0.3, 0.1), (5.0, 5.0)] {
            let xi95 = difference_error(a, b, 0.95, &t95).unwrap();
            let xi99 = difference_error(a, b, 0.99, &t99).unwrap();
            assert!(xi99 >= xi95);
        }
    }

    proptest! {
        #[test]
        fn xi_between_max_and_sum(
            a in 0.0_f64..1e6,
            b in 0.0_f64..1e6,
        ) {
            let xi = difference_error(a, b, 0.95, &tables()).unwrap();
            prop_assert!(xi >= a.max(b) - 1e-9 * a.max(b));
            prop_assert!(xi <= a + b + 1e-12);
        }

        #[test]
        fn verdict_invariant_under_common_rescaling(
            diffs in proptest::collection::vec(-10.0_f64..10.0, 3..12),
            scale in 1e-3_f64..1e3,
        ) {
            let n = diffs.len();
            let zs: Vec<f64> = (0..n).map(|i| 100.0 + i as f64).collect();
            let xis = vec![2.0; n];
            let v1 = verdict("m", 0.95, &zs, &diffs, &xis, 2).unwrap();
            let scaled_diffs: Vec<f64> = diffs.iter().map(|d| d * scale).collect();
            let scaled_xis: Vec<f64> = xis.iter().map(|x| x * scale).collect();
            let v2 = verdict("m", 0.95, &zs, &scaled_diffs, &scaled_xis, 2).unwrap();
            prop_assert_eq!(v1.ranges.len(), v2.ranges.len());
            for (r1, r2) in v1.ranges.iter().zip(&v2.ranges) {
                prop_assert_eq!(r1.status, r2.status);
                prop_assert_eq!(r1.from_nm, r2.from_nm);
                prop_assert_eq!(r1.to_nm, r2.to_nm);
            }
        }
    }
}
