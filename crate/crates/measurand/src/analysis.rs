//! End-to-end pipeline: grouping, random error, systematic composition,
//! theory budget, difference band, and per-model verdicts.
//!
//! Per-bin and per-model work runs in parallel; results are merged in fixed
//! index order, so outputs are identical for any worker count.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::binning::{aligned_grid, partition_into_subintervals, pointwise_mean_and_variance};
use crate::comparison::{difference_error, mean_difference, verdict, ComparisonVerdict};
use crate::composition::{
    combine_random_systematic, combine_systematic, evaluate_systematic_sources, Regime,
};
use crate::data::{BinningMode, ExperimentConfig, MeasurementCollection, QuantityKind, TheoryCurve};
use crate::error::{Error, Result};
use crate::random_error::random_errors;
use crate::report::{
    emit_comparison_csv, emit_comparison_json, emit_error_budget_csv, emit_error_budget_json,
    RunMeta,
};
use crate::theory::{
    base_theory_error, default_separation_exponent, pfa_error, separation_uncertainty_parts,
    total_theory_error,
};

/// Per-separation ledger of every error the pipeline produces. Relative
/// errors are dimensionless fractions; absolute errors are in measurement
/// units.
#[derive(Debug, Clone, Copy)]
pub struct BudgetRow {
    pub z_nm: f64,
    pub mean: f64,
    /// Smallest group member count within the smoothing window.
    pub m_min: usize,
    pub dof: u32,
    pub t_quantile: f64,
    /// Smoothed standard deviation of the mean.
    pub s_smoothed: f64,
    pub delta_rand_abs: f64,
    pub delta_syst_abs: f64,
    pub delta_tot_exp_abs: f64,
    pub delta_rand_rel: f64,
    pub delta_syst_rel: f64,
    pub delta_tot_exp_rel: f64,
    pub regime: Regime,
    pub r_ratio: f64,
    pub delta_1: f64,
    pub delta_2: f64,
    pub delta_0: f64,
    pub delta_3: f64,
    pub delta_tot_theory: f64,
    pub delta_tot_theory_abs: f64,
    pub xi_abs: f64,
    pub xi_rel: f64,
}

/// Complete outcome of one pipeline run.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub rows: Vec<BudgetRow>,
    pub verdicts: Vec<ComparisonVerdict>,
    pub meta: RunMeta,
}

impl Analysis {
    /// True when any model is excluded somewhere on the grid.
    pub fn any_model_excluded(&self) -> bool {
        self.verdicts.iter().any(|v| v.is_excluded())
    }
}

fn group_collection(
    cfg: &ExperimentConfig,
    coll: &MeasurementCollection,
) -> Result<(Vec<crate::binning::SubintervalGroup>, &'static str)> {
    match cfg.binning {
        BinningMode::Subintervals => Ok((partition_into_subintervals(coll)?, "subintervals")),
        BinningMode::Pointwise => Ok((pointwise_mean_and_variance(coll)?, "pointwise")),
        BinningMode::Auto => {
            if aligned_grid(coll).is_some() {
                Ok((pointwise_mean_and_variance(coll)?, "pointwise"))
            } else {
                Ok((partition_into_subintervals(coll)?, "subintervals"))
            }
        }
    }
}

/// Runs the full analysis for one experiment and any number of theory models.
pub fn run_analysis(
    cfg: &ExperimentConfig,
    coll: &MeasurementCollection,
    curves: &[TheoryCurve],
) -> Result<Analysis> {
    cfg.validate()?;
    if coll.unit != cfg.measurement.unit {
        return Err(Error::InvalidConfig(format!(
            "collection unit '{}' does not match configured unit '{}'",
            coll.unit, cfg.measurement.unit
        )));
    }
    let beta = cfg.confidence_beta;
    let tables = &cfg.coefficients;

    let (groups, path) = group_collection(cfg, coll)?;
    let window = cfg
        .window_size
        .unwrap_or(if path == "pointwise" { 30 } else { 5 })
        .min(groups.len());
    let rand = random_errors(&groups, window, beta)?;

    let exponent = cfg
        .separation_error_exponent
        .unwrap_or_else(|| default_separation_exponent(cfg.measurement.kind));
    let radius_rel = match cfg.measurement.kind {
        QuantityKind::Pressure => 0.0,
        QuantityKind::Force => cfg.sphere_radius_error_um / cfg.sphere_radius_um,
    };

    let rows: Vec<BudgetRow> = rand
        .par_iter()
        .map(|re| -> Result<BudgetRow> {
            let z_nm = re.z_nm;
            let magnitude = re.mean.abs();
            if magnitude == 0.0 {
                return Err(Error::ZeroMagnitude { z_nm });
            }
            let s = re.smoothed_var.sqrt();

            let (delta_syst_abs, delta_syst_rel) = if cfg.systematics.is_empty() {
                (0.0, 0.0)
            } else {
                let deltas = evaluate_systematic_sources(&cfg.systematics, z_nm, magnitude)?;
                let rel = combine_systematic(&deltas, beta, tables)?;
                (rel * magnitude, rel)
            };
            let combined = combine_random_systematic(
                re.delta_rand,
                delta_syst_abs,
                s,
                tables,
                cfg.regime_override,
            )?;

            let delta_1 = cfg.optical_data_error;
            let delta_2 = pfa_error(z_nm, cfg.sphere_radius_um)?;
            let delta_0 = base_theory_error(delta_1, delta_2, beta, tables)?;
            let delta_3 = separation_uncertainty_parts(
                z_nm,
                cfg.measurement.delta_z_nm,
                exponent,
                radius_rel,
            )?;
            let delta_tot_theory = total_theory_error(delta_0, delta_3, tables)?;
            // theory error normalized by the measured magnitude, the same
            // normalization the relative band uses
            let delta_tot_theory_abs = delta_tot_theory * magnitude;
            let xi_abs = difference_error(delta_tot_theory_abs, combined.total, beta, tables)?;

            Ok(BudgetRow {
                z_nm,
                mean: re.mean,
                m_min: re.m_min,
                dof: re.dof,
                t_quantile: re.t_quantile,
                s_smoothed: s,
                delta_rand_abs: re.delta_rand,
                delta_syst_abs,
                delta_tot_exp_abs: combined.total,
                delta_rand_rel: re.delta_rand / magnitude,
                delta_syst_rel,
                delta_tot_exp_rel: combined.total / magnitude,
                regime: combined.regime,
                r_ratio: combined.r_ratio,
                delta_1,
                delta_2,
                delta_0,
                delta_3,
                delta_tot_theory,
                delta_tot_theory_abs,
                xi_abs,
                xi_rel: xi_abs / magnitude,
            })
        })
        .collect::<Result<_>>()?;

    let exp_means: Vec<(f64, f64)> = rows.iter().map(|r| (r.z_nm, r.mean)).collect();
    let zs: Vec<f64> = rows.iter().map(|r| r.z_nm).collect();
    let xis: Vec<f64> = rows.iter().map(|r| r.xi_abs).collect();
    let verdicts: Vec<ComparisonVerdict> = curves
        .par_iter()
        .map(|curve| {
            let diffs = mean_difference(curve, &exp_means)?;
            verdict(
                &curve.model_name,
                beta,
                &zs,
                &diffs,
                &xis,
                cfg.min_exclusion_run,
            )
        })
        .collect::<Result<_>>()?;

    let meta = RunMeta {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_digest: cfg.digest(),
        beta,
        window_size: window,
        q_beta: tables.q_beta,
        k_beta: tables.k_beta.clone(),
        binning_path: path.to_string(),
        window_edge_policy: "shift-inward".to_string(),
    };

    Ok(Analysis {
        rows,
        verdicts,
        meta,
    })
}

/// Writes the four report documents into `out_dir` and returns their paths.
pub fn write_reports(analysis: &Analysis, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let docs = [
        (
            "error_budget.csv",
            emit_error_budget_csv(&analysis.rows, &analysis.meta),
        ),
        (
            "error_budget.json",
            emit_error_budget_json(&analysis.rows, &analysis.meta)?,
        ),
        (
            "comparison.csv",
            emit_comparison_csv(&analysis.verdicts, &analysis.meta),
        ),
        (
            "comparison.json",
            emit_comparison_json(&analysis.verdicts, &analysis.meta)?,
        ),
    ];
    let mut paths = Vec::new();
    for (name, content) in docs {
        let path = out_dir.join(name);
        fs::write(&path, content).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composition::CoefficientTables;
    use crate::data::{MeasurementMeta, TheoryCurve};
    use crate::synth::{generate_synthetic_experiment, GridSpec, PowerLawTruth, SyntheticScenario};

    fn scenario() -> SyntheticScenario {
        SyntheticScenario {
            truth: PowerLawTruth {
                amplitude: -2.0e10,
                exponent: 4.0,
            },
            z_start_nm: 200.0,
            z_end_nm: 600.0,
            n_points: 25,
            n_sets: 10,
            grid: GridSpec::Aligned,
            delta_z_nm: 0.6,
            sigma: 0.05,
            systematic_half_widths: vec![],
            seed: 11,
            beta: 0.95,
            window_size: Some(8),
            declare_systematics: true,
            coefficients: CoefficientTables::default(),
            unit: "mPa".into(),
            quantity: crate::data::QuantityKind::Pressure,
        }
    }

    fn config() -> ExperimentConfig {
        ExperimentConfig {
            measurement: MeasurementMeta {
                kind: crate::data::QuantityKind::Pressure,
                unit: "mPa".into(),
                delta_z_nm: 0.6,
            },
            confidence_beta: 0.95,
            sphere_radius_um: 148.7,
            sphere_radius_error_um: 0.2,
            window_size: Some(8),
            optical_data_error: 0.005,
            separation_error_exponent: None,
            coefficients: CoefficientTables::default(),
            systematics: vec![crate::composition::SystematicSource::ConstantRelative {
                name: "radius".into(),
                delta_rel: 0.2 / 148.7,
            }],
            regime_override: None,
            min_exclusion_run: 2,
            binning: BinningMode::Auto,
        }
    }

    fn truth_curve(sc: &SyntheticScenario, name: &str, shift: f64) -> TheoryCurve {
        let points: Vec<(f64, f64)> = (0..200)
            .map(|i| {
                let z = 150.0 + i as f64 * 3.0;
                (z, sc.truth.value(z) * (1.0 + shift))
            })
            .collect();
        TheoryCurve::new(name, points).unwrap()
    }

    #[test]
    fn pipeline_flags_a_shifted_model_and_keeps_the_true_one() {
        let sc = scenario();
        let coll = generate_synthetic_experiment(&sc).unwrap();
        let cfg = config();
        let good = truth_curve(&sc, "truth", 0.0);
        let bad = truth_curve(&sc, "shifted", 0.25);
        let analysis = run_analysis(&cfg, &coll, &[good, bad]).unwrap();

        assert_eq!(analysis.rows.len(), sc.n_points);
        assert_eq!(analysis.meta.binning_path, "pointwise");
        let good_verdict = &analysis.verdicts[0];
        let bad_verdict = &analysis.verdicts[1];
        assert!(!good_verdict.is_excluded(), "true model must stay consistent");
        assert!(bad_verdict.is_excluded(), "25% shift must leave the band");
        assert!(analysis.any_model_excluded());
    }

    #[test]
    fn budget_rows_carry_consistent_normalization() {
        let sc = scenario();
        let coll = generate_synthetic_experiment(&sc).unwrap();
        let analysis = run_analysis(&config(), &coll, &[]).unwrap();
        for r in &analysis.rows {
            let magnitude = r.mean.abs();
            assert!((r.delta_rand_rel * magnitude - r.delta_rand_abs).abs() < 1e-12);
            assert!((r.xi_rel * magnitude - r.xi_abs).abs() < 1e-12);
            assert!(r.xi_abs >= r.delta_tot_exp_abs.max(r.delta_tot_theory_abs) - 1e-12);
            assert!(r.delta_0 <= r.delta_1 + r.delta_2 + 1e-15);
        }
    }

    #[test]
    fn unit_mismatch_is_rejected() {
        let sc = scenario();
        let coll = generate_synthetic_experiment(&sc).unwrap();
        let mut cfg = config();
        cfg.measurement.unit = "pN".into();
        assert!(matches!(
            run_analysis(&cfg, &coll, &[]),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn reports_are_identical_across_thread_counts() {
        let sc = scenario();
        let coll = generate_synthetic_experiment(&sc).unwrap();
        let cfg = config();
        let curve = truth_curve(&sc, "truth", 0.0);
        let render = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                let analysis = run_analysis(&cfg, &coll, std::slice::from_ref(&curve)).unwrap();
                (
                    emit_error_budget_csv(&analysis.rows, &analysis.meta),
                    emit_comparison_csv(&analysis.verdicts, &analysis.meta),
                )
            })
        };
        let one = render(1);
        let four = render(4);
        assert_eq!(one, four);
    }
}
