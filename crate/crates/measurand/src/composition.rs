//! Composition of systematic errors and the random/systematic combination
//! rule.
//!
//! Systematic errors are treated as uniformly distributed random variables.
//! J of them combine as min{Σδ_i, k_β^(J)·sqrt(Σδ_i²)} with a tabulated
//! coefficient k. A random and a systematic error combine according to the
//! ratio r = Δ_syst / s: below `r_low` the systematic contribution is
//! negligible, above `r_high` the random one is, and in between the total is
//! q_β·(Δ_rand + Δ_syst).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Combination coefficient k_β^(J) for one (β, J) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KEntry {
    pub beta: f64,
    pub j: usize,
    pub k: f64,
}

/// Tabulated coefficients used by the composition rules.
///
/// Ships only the entries anchored in the reference tables:
/// k_{0.95}^(2) = 1.10, k_{0.95}^(4) = 1.12, q = 0.80, thresholds 0.8 and 8.
/// Other (β, J) pairs must be supplied through the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTables {
    #[serde(default = "default_k_entries")]
    pub k_beta: Vec<KEntry>,
    #[serde(default = "default_q")]
    pub q_beta: f64,
    #[serde(default = "default_r_low")]
    pub r_low: f64,
    #[serde(default = "default_r_high")]
    pub r_high: f64,
}

fn default_k_entries() -> Vec<KEntry> {
    vec![
        KEntry { beta: 0.95, j: 2, k: 1.10 },
        KEntry { beta: 0.95, j: 4, k: 1.12 },
    ]
}

fn default_q() -> f64 {
    0.80
}

fn default_r_low() -> f64 {
    0.8
}

fn default_r_high() -> f64 {
    8.0
}

impl Default for CoefficientTables {
    fn default() -> Self {
        CoefficientTables {
            k_beta: default_k_entries(),
            q_beta: default_q(),
            r_low: default_r_low(),
            r_high: default_r_high(),
        }
    }
}

impl CoefficientTables {
    /// Looks up k_β^(J). No interpolation: a missing entry is a
    /// configuration error.
    pub fn k(&self, beta: f64, j: usize) -> Result<f64> {
        self.k_beta
            .iter()
            .find(|e| e.j == j && (e.beta - beta).abs() < 1e-12)
            .map(|e| e.k)
            .ok_or(Error::MissingCoefficient { beta, j })
    }

    pub fn validate(&self) -> Result<()> {
        for e in &self.k_beta {
            if e.k < 1.0 || !(e.beta > 0.0 && e.beta < 1.0) || e.j < 1 {
                return Err(Error::InvalidConfig(format!(
                    "bad k entry (beta {}, J {}, k {})",
                    e.beta, e.j, e.k
                )));
            }
        }
        if !(self.q_beta > 0.0 && self.q_beta <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "q_beta must lie in (0, 1], got {}",
                self.q_beta
            )));
        }
        if !(self.r_low > 0.0 && self.r_low < self.r_high) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < r_low < r_high, got {} and {}",
                self.r_low, self.r_high
            )));
        }
        Ok(())
    }
}

/// One declared systematic error source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystematicSource {
    /// Fixed absolute half-width in measurement units; relative error is
    /// Δ/|Π(z)|.
    ConstantAbsolute { name: String, delta_abs: f64 },
    /// Fixed relative half-width, e.g. ΔR/R.
    ConstantRelative { name: String, delta_rel: f64 },
    /// Resonance-frequency detuning: Δf / |f_r(z) − f_0| with f_r given as
    /// a per-z column (linearly interpolated).
    FrequencyDetuning {
        name: String,
        delta_f_hz: f64,
        f0_hz: f64,
        resonance_hz: Vec<(f64, f64)>,
    },
}

impl SystematicSource {
    pub fn name(&self) -> &str {
        match self {
            SystematicSource::ConstantAbsolute { name, .. } => name,
            SystematicSource::ConstantRelative { name, .. } => name,
            SystematicSource::FrequencyDetuning { name, .. } => name,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            SystematicSource::ConstantAbsolute { delta_abs, .. } => *delta_abs >= 0.0,
            SystematicSource::ConstantRelative { delta_rel, .. } => *delta_rel >= 0.0,
            SystematicSource::FrequencyDetuning {
                delta_f_hz,
                resonance_hz,
                ..
            } => *delta_f_hz >= 0.0 && resonance_hz.len() >= 2,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "bad systematic source '{}'",
                self.name()
            )))
        }
    }

    /// Relative error contributed at separation `z_nm` where the measured
    /// magnitude is `magnitude`.
    pub fn evaluate(&self, z_nm: f64, magnitude: f64) -> Result<f64> {
        match self {
            SystematicSource::ConstantAbsolute { delta_abs, .. } => {
                if magnitude <= 0.0 {
                    return Err(Error::ZeroMagnitude { z_nm });
                }
                Ok(delta_abs / magnitude)
            }
            SystematicSource::ConstantRelative { delta_rel, .. } => Ok(*delta_rel),
            SystematicSource::FrequencyDetuning {
                name,
                delta_f_hz,
                f0_hz,
                resonance_hz,
            } => {
                let f_r = interp_column(resonance_hz, z_nm)?;
                let detuning = (f_r - f0_hz).abs();
                if detuning == 0.0 {
                    return Err(Error::SingularSource {
                        name: name.clone(),
                        z_nm,
                    });
                }
                Ok(delta_f_hz / detuning)
            }
        }
    }
}

// Linear interpolation in a sorted (z, value) column.
fn interp_column(column: &[(f64, f64)], z_nm: f64) -> Result<f64> {
    let lo = column.first().map(|p| p.0).unwrap_or(f64::NAN);
    let hi = column.last().map(|p| p.0).unwrap_or(f64::NAN);
    if !(z_nm >= lo && z_nm <= hi) {
        return Err(Error::OutsideGrid { z_nm, lo, hi });
    }
    let i = column.partition_point(|p| p.0 < z_nm);
    let (xi, vi) = column[i];
    if xi == z_nm {
        return Ok(vi);
    }
    let (x0, v0) = column[i - 1];
    Ok(v0 + (vi - v0) * (z_nm - x0) / (xi - x0))
}

/// Evaluates each declared source at one separation.
pub fn evaluate_systematic_sources(
    sources: &[SystematicSource],
    z_nm: f64,
    magnitude: f64,
) -> Result<Vec<f64>> {
    sources.iter().map(|s| s.evaluate(z_nm, magnitude)).collect()
}

/// Total systematic error of J sources: min{Σδ_i, k_β^(J)·sqrt(Σδ_i²)}.
/// A single source passes through unchanged. Works on absolute errors too.
pub fn combine_systematic(deltas: &[f64], beta: f64, tables: &CoefficientTables) -> Result<f64> {
    if deltas.is_empty() {
        return Err(Error::InvalidInput(
            "no systematic errors to combine".into(),
        ));
    }
    if deltas.iter().any(|d| *d < 0.0 || !d.is_finite()) {
        return Err(Error::InvalidInput(
            "systematic errors must be finite and nonnegative".into(),
        ));
    }
    if deltas.len() == 1 {
        return Ok(deltas[0]);
    }
    let k = tables.k(beta, deltas.len())?;
    let sum: f64 = deltas.iter().sum();
    let quad = k * deltas.iter().map(|d| d * d).sum::<f64>().sqrt();
    Ok(sum.min(quad))
}

/// Which branch of the combination rule applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    RandomDominated,
    SystematicDominated,
    Combined,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::RandomDominated => "random-dominated",
            Regime::SystematicDominated => "systematic-dominated",
            Regime::Combined => "combined",
        })
    }
}

/// Result of combining a random with a systematic error.
#[derive(Debug, Clone, Copy)]
pub struct CombinedError {
    pub total: f64,
    pub regime: Regime,
    /// r = Δ_syst / s; infinite when s = 0 with a nonzero systematic error.
    pub r_ratio: f64,
}

/// Combines a random and a systematic error (both absolute, or both relative
/// with the same normalization) given the standard deviation of the mean `s`.
///
/// `regime_override` forces the branch selection while leaving the reported
/// r untouched; it exists to reproduce published tables whose unrounded r
/// sits on a threshold.
pub fn combine_random_systematic(
    delta_rand: f64,
    delta_syst: f64,
    s: f64,
    tables: &CoefficientTables,
    regime_override: Option<Regime>,
) -> Result<CombinedError> {
    for (label, v) in [("random", delta_rand), ("systematic", delta_syst), ("s", s)] {
        if v < 0.0 || !v.is_finite() {
            return Err(Error::InvalidInput(format!(
                "{label} input must be finite and nonnegative, got {v}"
            )));
        }
    }
    let r_ratio = if s == 0.0 {
        if delta_syst > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        delta_syst / s
    };
    let regime = regime_override.unwrap_or(if r_ratio < tables.r_low {
        Regime::RandomDominated
    } else if r_ratio > tables.r_high {
        Regime::SystematicDominated
    } else {
        Regime::Combined
    });
    let total = match regime {
        Regime::RandomDominated => delta_rand,
        Regime::SystematicDominated => delta_syst,
        Regime::Combined => tables.q_beta * (delta_rand + delta_syst),
    };
    Ok(CombinedError {
        total,
        regime,
        r_ratio,
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
    fn four_absolute_sources_compose_to_reference_value() {
        let total = combine_systematic(&[0.82, 0.55, 0.31, 0.12], 0.95, &tables()).unwrap();
        assert_abs_diff_eq!(total, 1.17, epsilon = 0.005);
    }

    #[test]
    fn single_source_passes_through_without_lookup() {
        // J = 1 must not require a k entry
        let t = CoefficientTables {
            k_beta: vec![],
            ..tables()
        };
        assert_eq!(combine_systematic(&[0.007], 0.95, &t).unwrap(), 0.007);
    }

    #[test]
    fn two_equal_sources() {
        let total = combine_systematic(&[1.0, 1.0], 0.95, &tables()).unwrap();
        assert_abs_diff_eq!(total, 1.10 * std::f64::consts::SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn missing_k_entry_is_a_config_error() {
        let err = combine_systematic(&[1.0, 1.0, 1.0], 0.95, &tables()).unwrap_err();
        assert!(matches!(err, Error::MissingCoefficient { j: 3, .. }));
    }

    #[test]
    fn source_evaluation() {
        let detuning = SystematicSource::FrequencyDetuning {
            name: "resonance".into(),
            delta_f_hz: 0.006,
            f0_hz: 702.92,
            resonance_hz: vec![(100.0, 703.92), (700.0, 703.92)],
        };
        // |f_r - f_0| = 1 Hz -> 0.6%
        assert_abs_diff_eq!(detuning.evaluate(300.0, 1.0).unwrap(), 0.006, epsilon = 1e-15);

        let abs = SystematicSource::ConstantAbsolute {
            name: "calibration".into(),
            delta_abs: 0.82,
        };
        assert_abs_diff_eq!(abs.evaluate(100.0, 82.0).unwrap(), 0.01, epsilon = 1e-15);

        let rel = SystematicSource::ConstantRelative {
            name: "radius".into(),
            delta_rel: 0.005,
        };
        assert_eq!(rel.evaluate(100.0, 82.0).unwrap(), 0.005);
        assert_eq!(rel.evaluate(650.0, 1e-3).unwrap(), 0.005);
    }

    #[test]
    fn zero_detuning_is_singular() {
        let s = SystematicSource::FrequencyDetuning {
            name: "resonance".into(),
            delta_f_hz: 0.006,
            f0_hz: 700.0,
            resonance_hz: vec![(100.0, 700.0), (700.0, 700.0)],
        };
        assert!(matches!(
            s.evaluate(300.0, 1.0),
            Err(Error::SingularSource { .. })
        ));
    }

    #[test]
    fn zero_magnitude_is_an_error() {
        let s = SystematicSource::ConstantAbsolute {
            name: "calibration".into(),
            delta_abs: 0.82,
        };
        assert!(matches!(
            s.evaluate(100.0, 0.0),
            Err(Error::ZeroMagnitude { .. })
        ));
    }

    #[test]
    fn regimes_select_by_r() {
        let t = tables();
        // r = 0.04 -> random-dominated
        let c = combine_random_systematic(5.0, 0.1, 2.5, &t, None).unwrap();
        assert_eq!(c.regime, Regime::RandomDominated);
        assert_eq!(c.total, 5.0);
        // r large -> systematic-dominated
        let c = combine_random_systematic(0.5, 10.0, 0.1, &t, None).unwrap();
        assert_eq!(c.regime, Regime::SystematicDominated);
        assert_eq!(c.total, 10.0);
        // intermediate -> combined
        let c = combine_random_systematic(2.9, 3.8, 2.0, &t, None).unwrap();
        assert_eq!(c.regime, Regime::Combined);
        assert_abs_diff_eq!(c.total, 5.36, epsilon = 1e-12);
    }

    #[test]
    fn thresholds_belong_to_the_combined_regime() {
        let t = tables();
        let c = combine_random_systematic(1.0, 0.8, 1.0, &t, None).unwrap();
        assert_eq!(c.regime, Regime::Combined);
        let c = combine_random_systematic(1.0, 8.0, 1.0, &t, None).unwrap();
        assert_eq!(c.regime, Regime::Combined);
        let c = combine_random_systematic(1.0, 8.0 + 1e-9, 1.0, &t, None).unwrap();
        assert_eq!(c.regime, Regime::SystematicDominated);
    }

    #[test]
    fn zero_s_with_systematic_is_systematic_dominated() {
        let c = combine_random_systematic(0.0, 2.0, 0.0, &tables(), None).unwrap();
        assert_eq!(c.regime, Regime::SystematicDominated);
        assert_eq!(c.total, 2.0);
        assert!(c.r_ratio.is_infinite());
    }

    #[test]
    fn override_forces_branch_but_keeps_r() {
        let c =
            combine_random_systematic(2.9, 1.1, 2.0, &tables(), Some(Regime::Combined)).unwrap();
        assert_eq!(c.regime, Regime::Combined);
        assert_abs_diff_eq!(c.total, 3.2, epsilon = 1e-12);
        assert_abs_diff_eq!(c.r_ratio, 0.55, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn composition_stays_between_max_and_sum(
            deltas in proptest::collection::vec(0.0_f64..1e3, 2..5),
        ) {
            // use J entries that exist in the default table
            prop_assume!(deltas.len() == 2 || deltas.len() == 4);
            let total = combine_systematic(&deltas, 0.95, &tables()).unwrap();
            let max = deltas.iter().cloned().fold(0.0, f64::max);
            let sum: f64 = deltas.iter().sum();
            prop_assert!(total >= max - 1e-12 && total <= sum + 1e-12);
        }

        #[test]
        fn composition_homogeneous_and_permutation_invariant(
            a in 0.0_f64..100.0,
            b in 0.0_f64..100.0,
            scale in 1e-3_f64..1e3,
        ) {
            let t = tables();
            let fwd = combine_systematic(&[a, b], 0.95, &t).unwrap();
            let rev = combine_systematic(&[b, a], 0.95, &t).unwrap();
            prop_assert!((fwd - rev).abs() <= 1e-12 * fwd.abs().max(1.0));
            let scaled = combine_systematic(&[scale * a, scale * b], 0.95, &t).unwrap();
            prop_assert!((scaled - scale * fwd).abs() <= 1e-9 * scaled.abs().max(1e-9));
        }

        #[test]
        fn total_never_exceeds_plain_sum(
            rand in 0.0_f64..1e3,
            syst in 0.0_f64..1e3,
            s in 1e-6_f64..1e3,
        ) {
            let c = combine_random_systematic(rand, syst, s, &tables(), None).unwrap();
            prop_assert!(c.total <= rand + syst + 1e-12);
        }
    }
}
