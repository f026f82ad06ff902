//! Human-facing outputs: the pathway table as CSV, the full report as JSON,
//! and a Markdown summary.
//!
//! Similarity scores and income percentages are printed as integers and rate
//! ratios to two decimals; the JSON keeps full precision.

use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::run::RegressionSummary;
use crate::capability::SimilarityResult;
use crate::error::Result;
use crate::exposure::{ExposureSummary, TaskStatus};
use crate::regression::{InferenceRow, INTERCEPT};
use crate::synthesis::{PathwayReport, Priority, UnderutilizedPathway};
use crate::table::{read_rows, writer_to_string};

pub const PATHWAYS_CSV: &str = "pathways.csv";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";

/// One coefficient of one fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub model: String,
    pub term: String,
    pub estimate: f64,
    pub se: f64,
    pub p: f64,
    pub irr: f64,
    pub irr_ci_low: f64,
    pub irr_ci_high: f64,
}

impl CoefficientRow {
    pub fn new(model: &str, row: InferenceRow) -> Self {
        Self {
            model: model.to_string(),
            term: row.term,
            estimate: row.estimate,
            se: row.se,
            p: row.p,
            irr: row.irr,
            irr_ci_low: row.irr_ci_low,
            irr_ci_high: row.irr_ci_high,
        }
    }
}

const COEFFICIENT_COLUMNS: &[&str] = &["model", "term", "estimate", "se", "p", "irr", "irr_ci_low", "irr_ci_high"];

pub fn coefficients_csv(rows: &[CoefficientRow]) -> Result<String> {
    writer_to_string(COEFFICIENT_COLUMNS, |w| {
        for r in rows {
            w.serialize(r)?;
        }
        Ok(())
    })
}

pub fn load_coefficients<R: Read>(source: R) -> Result<Vec<CoefficientRow>> {
    Ok(read_rows(source, COEFFICIENT_COLUMNS)?.into_iter().map(|(_, r)| r).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub origin: String,
    pub similarity_threshold: f64,
    pub regions: Vec<String>,
    pub exposure: ExposureSummary,
    pub shortlist: Vec<SimilarityResult>,
    pub regression: RegressionSummary,
    /// Coefficients of the selected model.
    pub coefficients: Vec<CoefficientRow>,
    pub pathways: PathwayReport,
    pub underutilized: Vec<UnderutilizedPathway>,
}

/// One row per assessed pathway, in tier order.
pub fn pathways_csv(report: &Report) -> Result<String> {
    let mut headers: Vec<String> = [
        "priority",
        "occupation_code",
        "occupation_title",
        "similarity",
        "accessibility",
        "qual_gap",
        "growth",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    headers.extend(report.regions.iter().map(|r| format!("income_pct_{r}")));
    let header_refs: Vec<&str> = headers.iter().map(String::as_str).collect();
    writer_to_string(&header_refs, |w| {
        for p in report.pathways.pathways() {
            let mut record = vec![
                p.priority.to_string(),
                p.occupation_code.clone(),
                p.title.clone(),
                format!("{:.0}", p.similarity),
                p.accessibility.to_string(),
                p.qual_gap.to_string(),
                p.growth_flag.to_string(),
            ];
            record.extend(report.regions.iter().map(|r| {
                p.income_pct_by_region
                    .get(r)
                    .map(|v| format!("{v:.0}"))
                    .unwrap_or_default()
            }));
            w.write_record(&record)?;
        }
        Ok(())
    })
}

fn opt(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.digits$}"),
        _ => "n/a".into(),
    }
}

fn p_value(p: f64) -> String {
    if !p.is_finite() {
        "n/a".into()
    } else if p < 0.001 {
        "<0.001".into()
    } else {
        format!("{p:.3}")
    }
}

pub fn markdown(report: &Report) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "# Transition pathways from occupation {}\n", report.origin);

    let e = &report.exposure;
    let _ = writeln!(md, "## Task exposure\n");
    let _ = writeln!(md, "| Status | Tasks | Share |");
    let _ = writeln!(md, "|---|---:|---:|");
    for status in TaskStatus::ALL {
        let share = e.fractions.get(&status).copied().unwrap_or(0.0);
        let _ = writeln!(md, "| {} | {} | {:.0}% |", status.as_str(), e.count(status), 100.0 * share);
    }
    let _ = writeln!(md, "| total | {} | |\n", e.total);

    let _ = writeln!(md, "## Capability shortlist (similarity >= {:.0})\n", report.similarity_threshold);
    if report.shortlist.is_empty() {
        let _ = writeln!(md, "none\n");
    } else {
        let _ = writeln!(md, "| Code | Occupation | Similarity |");
        let _ = writeln!(md, "|---|---|---:|");
        for s in &report.shortlist {
            let _ = writeln!(md, "| {} | {} | {:.0} |", s.code, s.title, s.sim);
        }
        md.push('\n');
    }

    let r = &report.regression;
    let _ = writeln!(md, "## Model selection ({} observations)\n", r.n_obs);
    let _ = writeln!(md, "| Model | AIC | dAIC | Parameters | Converged |");
    let _ = writeln!(md, "|---|---:|---:|---:|---|");
    for m in &r.selection.ranking {
        let converged = r.models.iter().find(|s| s.id == m.id).is_some_and(|s| s.converged);
        let _ = writeln!(
            md,
            "| {} | {:.1} | {:.1} | {} | {} |",
            m.id,
            m.aic,
            m.delta_aic,
            m.n_params,
            if converged { "yes" } else { "no" }
        );
    }
    for id in &r.selection.unranked {
        let _ = writeln!(md, "| {id} | n/a | n/a | | |");
    }
    for f in &r.failures {
        let _ = writeln!(md, "| {} | failed: {} | | | |", f.id, f.error);
    }
    let _ = writeln!(md, "\nSelected model: **{}**\n", r.selection.best);
    if let Some(best) = r.models.iter().find(|m| m.id == r.selection.best) {
        let _ = writeln!(
            md,
            "Variance components: occupation {}, year {}; dispersion {}.\n",
            opt(best.sigma2_occ, 3),
            opt(best.sigma2_year, 4),
            opt(best.alpha.or(best.dispersion), 3)
        );
        if !best.boundary.is_empty() {
            let _ = writeln!(md, "Estimated on the boundary: {}.\n", best.boundary.join(", "));
        }
    }
    let _ = writeln!(md, "| Term | Estimate | SE | p | IRR | 95% CI |");
    let _ = writeln!(md, "|---|---:|---:|---:|---:|---|");
    for c in &report.coefficients {
        let (irr, ci) = if c.term == INTERCEPT {
            (String::new(), String::new())
        } else {
            (format!("{:.2}", c.irr), format!("{:.2} to {:.2}", c.irr_ci_low, c.irr_ci_high))
        };
        let _ = writeln!(
            md,
            "| {} | {:.3} | {:.3} | {} | {irr} | {ci} |",
            c.term,
            c.estimate,
            c.se,
            p_value(c.p)
        );
    }
    let robust: Vec<&str> = r
        .sign_robustness
        .iter()
        .filter(|(_, ok)| !**ok)
        .map(|(t, _)| t.as_str())
        .collect();
    if robust.is_empty() {
        let _ = writeln!(md, "\nEvery predictor keeps its sign across all fitted models.\n");
    } else {
        let _ = writeln!(md, "\nSign differs across models for: {}.\n", robust.join(", "));
    }

    let _ = writeln!(md, "## Pathway priorities\n");
    for p in Priority::TIERS {
        let _ = writeln!(md, "### {}\n", p.label());
        let tier = report.pathways.tier(p);
        if tier.is_empty() {
            let _ = writeln!(md, "none\n");
            continue;
        }
        let mut header = String::from("| Code | Occupation | Similarity |");
        let mut rule = String::from("|---|---|---:|");
        for region in &report.regions {
            let _ = write!(header, " {region} income % |");
            rule.push_str("---:|");
        }
        header.push_str(" Growth | Accessibility | Qualification gap |");
        rule.push_str("---|---|---|");
        let _ = writeln!(md, "{header}\n{rule}");
        for a in tier {
            let mut line = format!("| {} | {} | {:.0} |", a.occupation_code, a.title, a.similarity);
            for region in &report.regions {
                let v = a.income_pct_by_region.get(region).map_or("n/a".into(), |v| format!("{v:.0}"));
                let _ = write!(line, " {v} |");
            }
            let _ = write!(line, " {} | {} | {} |", a.growth_flag, a.accessibility, a.qual_gap);
            let _ = writeln!(md, "{line}");
        }
        md.push('\n');
    }

    let _ = writeln!(md, "## Underutilised favourable pathways\n");
    if report.underutilized.is_empty() {
        let _ = writeln!(md, "none");
    } else {
        let _ = writeln!(md, "| Code | Occupation | Priority | Occupation intercept |");
        let _ = writeln!(md, "|---|---|---|---:|");
        for u in &report.underutilized {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {:.2} |",
                u.occupation_code,
                u.assessment.title,
                u.priority.label(),
                u.intercept
            );
        }
    }
    md
}
