//! Theoretical error budget: optical-data spread, proximity-force bound,
//! their base composition, the separation-uncertainty term, and the total.
//!
//! All quantities here are relative errors. The base error δ₀ combines the
//! optical-data spread δ₁ with the proximity-force bound δ₂ = z/R as two
//! uniform-distributed errors. The separation term δ₃ follows the leading
//! power of the measured quantity in z (4 for pressure, 3 for force plus a
//! radius term), and the total is q_β·(δ₀ + δ₃): no r-ratio test applies on
//! the theory side because no standard deviation exists for these
//! uniform-distributed errors.

use crate::composition::{combine_systematic, CoefficientTables};
use crate::data::QuantityKind;
use crate::error::{Error, Result};

/// Nanometers per micrometer; separations are nm, radii µm.
pub const NM_PER_UM: f64 = 1.0e3;

/// Proximity-force bound δ₂ = z/R as a dimensionless ratio.
pub fn pfa_error(z_nm: f64, radius_um: f64) -> Result<f64> {
    if !(z_nm > 0.0) || !(radius_um > 0.0) {
        return Err(Error::InvalidInput(format!(
            "pfa_error needs positive z and R, got z = {z_nm} nm, R = {radius_um} um"
        )));
    }
    Ok(z_nm / (radius_um * NM_PER_UM))
}

/// Base theoretical error δ₀ = min{δ₁+δ₂, k_β^(2)·sqrt(δ₁²+δ₂²)}.
pub fn base_theory_error(
    delta_1: f64,
    delta_2: f64,
    beta: f64,
    tables: &CoefficientTables,
) -> Result<f64> {
    combine_systematic(&[delta_1, delta_2], beta, tables)
}

/// Default leading-dependence exponent: pressure falls as z⁻⁴, force as z⁻³.
pub fn default_separation_exponent(kind: QuantityKind) -> u32 {
    match kind {
        QuantityKind::Pressure => 4,
        QuantityKind::Force => 3,
    }
}

/// Separation-uncertainty term from explicit parts:
/// δ₃ = radius_rel + exponent·Δz/z.
pub fn separation_uncertainty_parts(
    z_nm: f64,
    delta_z_nm: f64,
    exponent: u32,
    radius_rel: f64,
) -> Result<f64> {
    if !(z_nm > 0.0) {
        return Err(Error::InvalidInput(format!(
            "separation term needs positive z, got {z_nm} nm"
        )));
    }
    if delta_z_nm < 0.0 || radius_rel < 0.0 {
        return Err(Error::InvalidInput(
            "delta_z and radius term must be nonnegative".into(),
        ));
    }
    Ok(radius_rel + exponent as f64 * delta_z_nm / z_nm)
}

/// Separation-uncertainty term δ₃ by quantity kind: 4Δz/z for pressure,
/// ΔR/R + 3Δz/z for force.
pub fn separation_uncertainty_error(
    z_nm: f64,
    delta_z_nm: f64,
    kind: QuantityKind,
    radius_um: f64,
    radius_error_um: f64,
) -> Result<f64> {
    let radius_rel = match kind {
        QuantityKind::Pressure => 0.0,
        QuantityKind::Force => {
            if !(radius_um > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "force separation term needs positive R, got {radius_um} um"
                )));
            }
            radius_error_um / radius_um
        }
    };
    separation_uncertainty_parts(z_nm, delta_z_nm, default_separation_exponent(kind), radius_rel)
}

/// Total theoretical error q_β·(δ₀ + δ₃).
pub fn total_theory_error(
    delta_0: f64,
    delta_3: f64,
    tables: &CoefficientTables,
) -> Result<f64> {
    if delta_0 < 0.0 || delta_3 < 0.0 {
        return Err(Error::InvalidInput(
            "theory errors must be nonnegative".into(),
        ));
    }
    Ok(tables.q_beta * (delta_0 + delta_3))
}

/// Per-separation theoretical budget entry.
#[derive(Debug, Clone, Copy)]
pub struct TheoryErrorRow {
    pub z_nm: f64,
    pub delta_1: f64,
    pub delta_2: f64,
    pub delta_0: f64,
    pub delta_3: f64,
    pub delta_tot: f64,
}

/// Builds the full theoretical budget on a separation grid.
#[allow(clippy::too_many_arguments)]
pub fn theory_error_budget(
    zs: &[f64],
    delta_1: f64,
    delta_z_nm: f64,
    kind: QuantityKind,
    radius_um: f64,
    radius_error_um: f64,
    exponent: Option<u32>,
    beta: f64,
    tables: &CoefficientTables,
) -> Result<Vec<TheoryErrorRow>> {
    zs.iter()
        .map(|&z_nm| {
            let delta_2 = pfa_error(z_nm, radius_um)?;
            let delta_0 = base_theory_error(delta_1, delta_2, beta, tables)?;
            let radius_rel = match kind {
                QuantityKind::Pressure => 0.0,
                QuantityKind::Force => radius_error_um / radius_um,
            };
            let delta_3 = separation_uncertainty_parts(
                z_nm,
                delta_z_nm,
                exponent.unwrap_or_else(|| default_separation_exponent(kind)),
                radius_rel,
            )?;
            let delta_tot = total_theory_error(delta_0, delta_3, tables)?;
            Ok(TheoryErrorRow {
                z_nm,
                delta_1,
                delta_2,
                delta_0,
                delta_3,
                delta_tot,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tables() -> CoefficientTables {
        CoefficientTables::default()
    }

    #[test]
    fn pfa_hand_arithmetic() {
        assert_abs_diff_eq!(pfa_error(600.0, 148.7).unwrap(), 0.004035, epsilon = 1e-6);
        assert_abs_diff_eq!(pfa_error(160.0, 148.7).unwrap(), 0.001076, epsilon = 1e-6);
        assert_eq!(pfa_error(148_700.0, 148.7).unwrap(), 1.0);
        assert!(pfa_error(0.0, 148.7).is_err());
    }

    #[test]
    fn base_error_reference_points() {
        let t = tables();
        let d2 = pfa_error(600.0, 148.7).unwrap();
        let d0 = base_theory_error(0.005, d2, 0.95, &t).unwrap();
        assert_abs_diff_eq!(d0 * 100.0, 0.70, epsilon = 0.01);
        let d2 = pfa_error(160.0, 148.7).unwrap();
        let d0 = base_theory_error(0.005, d2, 0.95, &t).unwrap();
        assert_abs_diff_eq!(d0 * 100.0, 0.56, epsilon = 0.01);
        // vanishing second error passes the first through
        assert_eq!(base_theory_error(0.005, 0.0, 0.95, &t).unwrap(), 0.005);
    }

    #[test]
    fn separation_term_by_kind() {
        let d3 = separation_uncertainty_error(300.0, 0.6, QuantityKind::Pressure, 148.7, 0.2)
            .unwrap();
        assert_abs_diff_eq!(d3, 0.008, epsilon = 1e-15);
        let d3 = separation_uncertainty_error(300.0, 0.0, QuantityKind::Pressure, 148.7, 0.2)
            .unwrap();
        assert_eq!(d3, 0.0);
        let d3 =
            separation_uncertainty_error(62.33, 0.8, QuantityKind::Force, 100.0, 0.0).unwrap();
        assert_abs_diff_eq!(d3, 0.0385, epsilon = 1e-4);
    }

    #[test]
    fn total_reference_points() {
        let t = tables();
        assert_abs_diff_eq!(
            total_theory_error(0.0059, 0.008, &t).unwrap() * 100.0,
            1.112,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            total_theory_error(0.0056, 0.015, &t).unwrap() * 100.0,
            1.648,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            total_theory_error(0.005, 0.0, &t).unwrap(),
            0.004,
            epsilon = 1e-15
        );
    }

    #[test]
    fn budget_invariants_hold_and_total_decreases() {
        // over 160-600 nm the separation term dominates and the total falls;
        // past ~690 nm the growing z/R bound takes over
        let zs: Vec<f64> = (160..=600).step_by(10).map(|z| z as f64).collect();
        let rows = theory_error_budget(
            &zs,
            0.005,
            0.6,
            QuantityKind::Pressure,
            148.7,
            0.2,
            None,
            0.95,
            &tables(),
        )
        .unwrap();
        for r in &rows {
            assert!(r.delta_0 <= r.delta_1 + r.delta_2 + 1e-15);
            assert!(r.delta_tot <= r.delta_0 + r.delta_3 + 1e-15);
        }
        for w in rows.windows(2) {
            assert!(
                w[1].delta_tot < w[0].delta_tot,
                "total theory error must decrease on this grid"
            );
        }
    }
}
