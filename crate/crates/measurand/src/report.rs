//! Error-budget and comparison tables in CSV and JSON.
//!
//! Every document carries a meta section (tool version, config digest, β, N,
//! q, k table) and two fidelities of the percentage columns: a two
//! significant-figure view matching the style of published error-budget
//! tables, and the full-precision values. Emission is deterministic: the
//! same inputs always produce the same bytes.
//!
//! CSV meta lines are `#`-prefixed comments; fields containing commas,
//! quotes, or newlines are quoted RFC-4180 style.

use serde::Serialize;

use crate::analysis::BudgetRow;
use crate::comparison::{BandStatus, ComparisonVerdict};
use crate::composition::KEntry;
use crate::error::Result;

/// Provenance carried by every emitted document.
#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub tool_version: String,
    pub config_digest: String,
    pub beta: f64,
    pub window_size: usize,
    pub q_beta: f64,
    pub k_beta: Vec<KEntry>,
    /// "subintervals" or "pointwise".
    pub binning_path: String,
    /// Convention note: windows at the range edges shift inward.
    pub window_edge_policy: String,
}

/// Rounds to `digits` significant figures (half away from zero).
pub fn round_sig(x: f64, digits: u32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let magnitude = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(digits as i32 - 1 - magnitude);
    (x * scale).round() / scale
}

fn sig2(x: f64) -> String {
    format!("{}", round_sig(x, 2))
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn meta_comment_lines(meta: &RunMeta) -> String {
    let k: Vec<String> = meta
        .k_beta
        .iter()
        .map(|e| format!("({}, {}) -> {}", e.beta, e.j, e.k))
        .collect();
    format!(
        "# tool_version: {}\n# config_digest: {}\n# beta: {}\n# window_size: {}\n# q_beta: {}\n# k_beta: {}\n# binning_path: {}\n# window_edge_policy: {}\n",
        meta.tool_version,
        meta.config_digest,
        meta.beta,
        meta.window_size,
        meta.q_beta,
        k.join("; "),
        meta.binning_path,
        meta.window_edge_policy,
    )
}

/// Error-budget CSV: rounded percentage columns first (mirroring the (a)-(f)
/// table layout: random, systematic, total experimental, base theory, total
/// theory, relative band half-width), then full precision and absolute
/// fields.
pub fn emit_error_budget_csv(rows: &[BudgetRow], meta: &RunMeta) -> String {
    let mut out = meta_comment_lines(meta);
    out.push_str(
        "z_nm,rand_pct,syst_pct,tot_exp_pct,delta0_pct,tot_theory_pct,xi_rel_pct,regime,\
         m_min,dof,t_quantile,mean,\
         rand_pct_full,syst_pct_full,tot_exp_pct_full,delta0_pct_full,delta3_pct_full,\
         tot_theory_pct_full,xi_rel_pct_full,\
         delta_rand_abs,delta_syst_abs,delta_tot_exp_abs,delta_tot_theory_abs,xi_abs,r_ratio\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.z_nm,
            sig2(r.delta_rand_rel * 100.0),
            sig2(r.delta_syst_rel * 100.0),
            sig2(r.delta_tot_exp_rel * 100.0),
            sig2(r.delta_0 * 100.0),
            sig2(r.delta_tot_theory * 100.0),
            sig2(r.xi_rel * 100.0),
            r.regime,
            r.m_min,
            r.dof,
            r.t_quantile,
            r.mean,
            r.delta_rand_rel * 100.0,
            r.delta_syst_rel * 100.0,
            r.delta_tot_exp_rel * 100.0,
            r.delta_0 * 100.0,
            r.delta_3 * 100.0,
            r.delta_tot_theory * 100.0,
            r.xi_rel * 100.0,
            r.delta_rand_abs,
            r.delta_syst_abs,
            r.delta_tot_exp_abs,
            r.delta_tot_theory_abs,
            r.xi_abs,
            r.r_ratio,
        ));
    }
    out
}

#[derive(Serialize)]
struct BudgetRowJson {
    z_nm: f64,
    mean: f64,
    m_min: usize,
    dof: u32,
    t_quantile: f64,
    regime: String,
    r_ratio: f64,
    rounded: RoundedView,
    rand_pct: f64,
    syst_pct: f64,
    tot_exp_pct: f64,
    delta0_pct: f64,
    delta3_pct: f64,
    tot_theory_pct: f64,
    xi_rel_pct: f64,
    delta_rand_abs: f64,
    delta_syst_abs: f64,
    delta_tot_exp_abs: f64,
    delta_tot_theory_abs: f64,
    xi_abs: f64,
}

#[derive(Serialize)]
struct RoundedView {
    rand_pct: f64,
    syst_pct: f64,
    tot_exp_pct: f64,
    delta0_pct: f64,
    tot_theory_pct: f64,
    xi_rel_pct: f64,
}

#[derive(Serialize)]
struct BudgetDoc<'a> {
    meta: &'a RunMeta,
    rows: Vec<BudgetRowJson>,
}

/// Error-budget JSON with both fidelities and the regime tag per row.
pub fn emit_error_budget_json(rows: &[BudgetRow], meta: &RunMeta) -> Result<String> {
    let rows = rows
        .iter()
        .map(|r| BudgetRowJson {
            z_nm: r.z_nm,
            mean: r.mean,
            m_min: r.m_min,
            dof: r.dof,
            t_quantile: r.t_quantile,
            regime: r.regime.to_string(),
            r_ratio: r.r_ratio,
            rounded: RoundedView {
                rand_pct: round_sig(r.delta_rand_rel * 100.0, 2),
                syst_pct: round_sig(r.delta_syst_rel * 100.0, 2),
                tot_exp_pct: round_sig(r.delta_tot_exp_rel * 100.0, 2),
                delta0_pct: round_sig(r.delta_0 * 100.0, 2),
                tot_theory_pct: round_sig(r.delta_tot_theory * 100.0, 2),
                xi_rel_pct: round_sig(r.xi_rel * 100.0, 2),
            },
            rand_pct: r.delta_rand_rel * 100.0,
            syst_pct: r.delta_syst_rel * 100.0,
            tot_exp_pct: r.delta_tot_exp_rel * 100.0,
            delta0_pct: r.delta_0 * 100.0,
            delta3_pct: r.delta_3 * 100.0,
            tot_theory_pct: r.delta_tot_theory * 100.0,
            xi_rel_pct: r.xi_rel * 100.0,
            delta_rand_abs: r.delta_rand_abs,
            delta_syst_abs: r.delta_syst_abs,
            delta_tot_exp_abs: r.delta_tot_exp_abs,
            delta_tot_theory_abs: r.delta_tot_theory_abs,
            xi_abs: r.xi_abs,
        })
        .collect();
    let doc = BudgetDoc { meta, rows };
    Ok(serde_json::to_string_pretty(&doc).expect("budget serializes") + "\n")
}

/// Comparison CSV: the per-z band and per-model differences with inside
/// flags, then a blank line and the summary ranges.
pub fn emit_comparison_csv(verdicts: &[ComparisonVerdict], meta: &RunMeta) -> String {
    let mut out = meta_comment_lines(meta);
    let mut header = String::from("z_nm,xi_abs");
    for v in verdicts {
        header.push_str(&format!(
            ",{},{}",
            csv_field(&format!("diff_{}", v.model_name)),
            csv_field(&format!("inside_{}", v.model_name))
        ));
    }
    out.push_str(&header);
    out.push('\n');
    let n = verdicts.first().map(|v| v.points.len()).unwrap_or(0);
    for i in 0..n {
        let p0 = &verdicts[0].points[i];
        let mut line = format!("{},{}", p0.z_nm, p0.xi);
        for v in verdicts {
            let p = &v.points[i];
            line.push_str(&format!(",{},{}", p.difference, p.inside));
        }
        out.push_str(&line);
        out.push('\n');
    }
    out.push('\n');
    out.push_str("model,beta,from_z_nm,to_z_nm,status\n");
    for v in verdicts {
        for r in &v.ranges {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                csv_field(&v.model_name),
                v.beta,
                r.from_nm,
                r.to_nm,
                match r.status {
                    BandStatus::Consistent => "consistent",
                    BandStatus::Excluded => "excluded",
                }
            ));
        }
    }
    out
}

#[derive(Serialize)]
struct ComparisonDoc<'a> {
    meta: &'a RunMeta,
    models: &'a [ComparisonVerdict],
}

/// Comparison JSON: per-model points and summary ranges.
pub fn emit_comparison_json(verdicts: &[ComparisonVerdict], meta: &RunMeta) -> Result<String> {
    let doc = ComparisonDoc {
        meta,
        models: verdicts,
    };
    Ok(serde_json::to_string_pretty(&doc).expect("comparison serializes") + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::BudgetRow;
    use crate::comparison::verdict;
    use crate::composition::Regime;

    fn meta() -> RunMeta {
        RunMeta {
            tool_version: "0.0.0-test".into(),
            config_digest: "deadbeef".into(),
            beta: 0.95,
            window_size: 5,
            q_beta: 0.8,
            k_beta: vec![KEntry {
                beta: 0.95,
                j: 2,
                k: 1.10,
            }],
            binning_path: "subintervals".into(),
            window_edge_policy: "shift-inward".into(),
        }
    }

    // values a published pressure budget shows at 160 nm
    fn reference_row() -> BudgetRow {
        BudgetRow {
            z_nm: 160.0,
            mean: -1130.0,
            m_min: 65,
            dof: 64,
            t_quantile: 1.9977,
            s_smoothed: 0.0,
            delta_rand_abs: 0.0,
            delta_syst_abs: 0.0,
            delta_tot_exp_abs: 0.0,
            delta_rand_rel: 0.014,
            delta_syst_rel: 0.0015,
            delta_tot_exp_rel: 0.014,
            regime: Regime::RandomDominated,
            r_ratio: 0.2,
            delta_1: 0.005,
            delta_2: 0.001076,
            delta_0: 0.0056259,
            delta_3: 0.015,
            delta_tot_theory: 0.01648,
            delta_tot_theory_abs: 0.0,
            xi_abs: 0.0,
            xi_rel: 0.023787,
        }
    }

    #[test]
    fn rounding_to_two_significant_figures() {
        assert_eq!(round_sig(0.56259, 2), 0.56);
        assert_eq!(round_sig(1.648, 2), 1.6);
        assert_eq!(round_sig(0.8854, 2), 0.89);
        assert_eq!(round_sig(13.316, 2), 13.0);
        assert_eq!(round_sig(-1.648, 2), -1.6);
        assert_eq!(round_sig(0.0, 2), 0.0);
    }

    #[test]
    fn rounded_view_matches_reference_style() {
        let csv = emit_error_budget_csv(&[reference_row()], &meta());
        let data_line = csv
            .lines()
            .find(|l| l.starts_with("160"))
            .expect("row present");
        assert!(data_line.starts_with("160,1.4,0.15,1.4,0.56,1.6,2.4,random-dominated"));
    }

    #[test]
    fn rounded_and_full_views_agree_to_displayed_digits() {
        let row = reference_row();
        let json = emit_error_budget_json(&[row], &meta()).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&json).unwrap();
        let r = &doc["rows"][0];
        let full = r["tot_theory_pct"].as_f64().unwrap();
        let rounded = r["rounded"]["tot_theory_pct"].as_f64().unwrap();
        assert_eq!(round_sig(full, 2), rounded);
        assert_eq!(r["regime"], "random-dominated");
    }

    #[test]
    fn empty_budget_is_header_only() {
        let csv = emit_error_budget_csv(&[], &meta());
        let non_comment: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(non_comment.len(), 1);
        assert!(non_comment[0].starts_with("z_nm,"));
    }

    #[test]
    fn emission_is_byte_stable() {
        let rows = vec![reference_row()];
        let a = emit_error_budget_csv(&rows, &meta());
        let b = emit_error_budget_csv(&rows, &meta());
        assert_eq!(a, b);
        let a = emit_error_budget_json(&rows, &meta()).unwrap();
        let b = emit_error_budget_json(&rows, &meta()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn comparison_summary_lists_ranges() {
        let v = verdict(
            "drude",
            0.95,
            &[300.0, 350.0],
            &[5.07, 3.58],
            &[1.59, 0.89],
            2,
        )
        .unwrap();
        let csv = emit_comparison_csv(&[v.clone()], &meta());
        assert!(csv.contains("drude,0.95,300,350,excluded"));
        let json = emit_comparison_json(&[v], &meta()).unwrap();
        assert!(json.contains("\"excluded\""));
    }

    #[test]
    fn zero_models_gives_empty_summary() {
        let csv = emit_comparison_csv(&[], &meta());
        assert!(csv.ends_with("model,beta,from_z_nm,to_z_nm,status\n"));
    }

    #[test]
    fn model_names_with_commas_are_quoted() {
        let v = verdict("a,b", 0.95, &[1.0], &[0.0], &[1.0], 1).unwrap();
        let csv = emit_comparison_csv(&[v], &meta());
        assert!(csv.contains("\"diff_a,b\""));
        assert!(csv.contains("\"a,b\",0.95,1,1,consistent"));
    }
}
