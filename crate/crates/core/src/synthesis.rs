//! Integrated pathway assessment and priority tiers.
//!
//! Each candidate occupation is scored on income relative to the origin,
//! recent growth, geographic accessibility and formal qualification gap, then
//! placed in a priority tier by a rule set read from a versioned rubric file.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::percent_of_origin_income;
use crate::regression::OccupationResidual;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accessibility {
    Low,
    Moderate,
    High,
    VeryHigh,
}

/// Ordered from no gap to the largest gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualGap {
    None,
    Minimal,
    Moderate,
    Substantial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    Negative,
    Flat,
    Positive,
}

/// Ordered from least to most recommended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Priority {
    NotRecommended,
    MediumLow,
    MediumHigh,
    High,
}

impl Priority {
    /// Report order, most recommended first.
    pub const TIERS: [Priority; 4] = [
        Priority::High,
        Priority::MediumHigh,
        Priority::MediumLow,
        Priority::NotRecommended,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Priority::High => "high",
            Priority::MediumHigh => "medium_high",
            Priority::MediumLow => "medium_low",
            Priority::NotRecommended => "not_recommended",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Priority::High => "High",
            Priority::MediumHigh => "Medium-High",
            Priority::MediumLow => "Medium-Low",
            Priority::NotRecommended => "Not recommended",
        }
    }
}

macro_rules! display_snake {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned));
                f.write_str(s.as_deref().unwrap_or("?"))
            }
        }
    )*};
}
display_snake!(Accessibility, QualGap, Growth, Priority);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccessibilityRules {
    /// Very high: at least this many workers in every region.
    pub very_high_min_all: f64,
    /// High: at least this many in every region ...
    pub high_min_all: f64,
    /// ... or at least `high_min_some` in `high_min_some_count` regions.
    pub high_min_some: f64,
    pub high_min_some_count: usize,
    /// Moderate: at least this many in every region.
    pub moderate_min_all: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncomeRules {
    /// Percent of origin income needed in a strict majority of regions for high priority.
    pub high_majority_pct: f64,
    /// Percent of origin income needed in every region for medium-high priority.
    pub medium_high_all_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualGapRules {
    /// Skill-level increase (in demand units) at which the gap becomes moderate.
    pub moderate_delta: i64,
    /// Skill-level increase at which the gap becomes substantial.
    pub substantial_delta: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorityRules {
    pub high_min_accessibility: Accessibility,
    pub high_max_qual_gap: QualGap,
    pub high_min_growth: Growth,
    pub medium_high_min_accessibility: Accessibility,
    pub medium_high_max_qual_gap: QualGap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rubric {
    pub version: u32,
    /// Below this similarity an occupation is not recommended.
    pub similarity_threshold: f64,
    pub accessibility: AccessibilityRules,
    pub income: IncomeRules,
    pub qual_gap: QualGapRules,
    pub priority: PriorityRules,
}

pub const RUBRIC_VERSION: u32 = 1;

impl Default for Rubric {
    fn default() -> Self {
        Self {
            version: RUBRIC_VERSION,
            similarity_threshold: 70.0,
            accessibility: AccessibilityRules {
                very_high_min_all: 5_000.0,
                high_min_all: 2_000.0,
                high_min_some: 4_000.0,
                high_min_some_count: 3,
                moderate_min_all: 1_500.0,
            },
            income: IncomeRules {
                high_majority_pct: 100.0,
                medium_high_all_pct: 80.0,
            },
            qual_gap: QualGapRules {
                moderate_delta: 1,
                substantial_delta: 2,
            },
            priority: PriorityRules {
                high_min_accessibility: Accessibility::Moderate,
                high_max_qual_gap: QualGap::Minimal,
                high_min_growth: Growth::Positive,
                medium_high_min_accessibility: Accessibility::High,
                medium_high_max_qual_gap: QualGap::Minimal,
            },
        }
    }
}

impl Rubric {
    pub fn from_toml(text: &str) -> Result<Self> {
        let rubric: Rubric = toml::from_str(text).map_err(|e| Error::Config(vec![format!("rubric: {e}")]))?;
        rubric.validate()?;
        Ok(rubric)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("rubric serialises")
    }

    /// Checks the version and that every cutoff sits in strict order.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if self.version != RUBRIC_VERSION {
            errors.push(format!("rubric version {} is not supported (expected {RUBRIC_VERSION})", self.version));
        }
        if !(0.0..=100.0).contains(&self.similarity_threshold) {
            errors.push(format!("similarity_threshold {} is outside [0, 100]", self.similarity_threshold));
        }
        let a = &self.accessibility;
        if !(a.moderate_min_all < a.high_min_all && a.high_min_all < a.very_high_min_all) {
            errors.push("accessibility cutoffs must satisfy moderate < high < very_high".into());
        }
        if !(a.high_min_some > a.high_min_all) {
            errors.push("accessibility.high_min_some must exceed high_min_all".into());
        }
        if a.high_min_some_count == 0 {
            errors.push("accessibility.high_min_some_count must be positive".into());
        }
        if !(self.income.medium_high_all_pct < self.income.high_majority_pct) {
            errors.push("income.medium_high_all_pct must be below high_majority_pct".into());
        }
        let q = &self.qual_gap;
        if !(0 < q.moderate_delta && q.moderate_delta < q.substantial_delta) {
            errors.push("qual_gap deltas must satisfy 0 < moderate_delta < substantial_delta".into());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn accessibility(&self, employment: &[f64]) -> Accessibility {
        let a = &self.accessibility;
        let all = |min: f64| !employment.is_empty() && employment.iter().all(|e| *e >= min);
        let some = employment.iter().filter(|e| **e >= a.high_min_some).count();
        if all(a.very_high_min_all) {
            Accessibility::VeryHigh
        } else if all(a.high_min_all) || some >= a.high_min_some_count {
            Accessibility::High
        } else if all(a.moderate_min_all) {
            Accessibility::Moderate
        } else {
            Accessibility::Low
        }
    }

    /// Gap implied by a skill-level increase, in demand units (positive = more demanding).
    pub fn qual_gap_from_delta(&self, delta: i64) -> QualGap {
        let q = &self.qual_gap;
        if delta <= 0 {
            QualGap::None
        } else if delta >= q.substantial_delta {
            QualGap::Substantial
        } else if delta >= q.moderate_delta {
            QualGap::Moderate
        } else {
            QualGap::Minimal
        }
    }
}

/// Majority vote over regional growth rates.
pub fn growth_flag(growth: &[f64]) -> Growth {
    let n = growth.len();
    let pos = growth.iter().filter(|g| **g > 0.0).count();
    let neg = growth.iter().filter(|g| **g < 0.0).count();
    if 2 * pos > n {
        Growth::Positive
    } else if 2 * neg > n {
        Growth::Negative
    } else {
        Growth::Flat
    }
}

/// Derived signals for one occupation, the inputs to the tier rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signals {
    pub similarity: f64,
    pub income_pct: Vec<f64>,
    pub growth: Growth,
    pub accessibility: Accessibility,
    pub qual_gap: QualGap,
}

/// Applies the tier rules, returning the tier and one justification line per test.
pub fn classify(signals: &Signals, rubric: &Rubric) -> (Priority, Vec<String>) {
    let r = &rubric.priority;
    let inc = &rubric.income;
    let n = signals.income_pct.len();
    let above = signals.income_pct.iter().filter(|p| **p >= inc.high_majority_pct).count();
    let income_high = 2 * above > n;
    let income_mid = n > 0 && signals.income_pct.iter().all(|p| *p >= inc.medium_high_all_pct);

    let mut why = Vec::new();
    if signals.similarity < rubric.similarity_threshold {
        why.push(format!(
            "similarity {:.0} is below the threshold {:.0}",
            signals.similarity, rubric.similarity_threshold
        ));
        return (Priority::NotRecommended, why);
    }

    let high = [
        (
            income_high,
            format!(
                "income at least {:.0}% of origin in {above} of {n} regions",
                inc.high_majority_pct
            ),
        ),
        (signals.growth >= r.high_min_growth, format!("growth {} (needs {})", signals.growth, r.high_min_growth)),
        (
            signals.accessibility >= r.high_min_accessibility,
            format!("accessibility {} (needs {})", signals.accessibility, r.high_min_accessibility),
        ),
        (
            signals.qual_gap <= r.high_max_qual_gap,
            format!("qualification gap {} (at most {})", signals.qual_gap, r.high_max_qual_gap),
        ),
    ];
    if high.iter().all(|(ok, _)| *ok) {
        why.extend(high.into_iter().map(|(_, s)| s));
        return (Priority::High, why);
    }
    let failed_high: Vec<String> = high.into_iter().filter(|(ok, _)| !ok).map(|(_, s)| s).collect();
    why.push(format!("not high: {}", failed_high.join("; ")));

    let mid = [
        (
            income_mid,
            format!("income at least {:.0}% of origin in every region", inc.medium_high_all_pct),
        ),
        (
            signals.accessibility >= r.medium_high_min_accessibility,
            format!("accessibility {} (needs {})", signals.accessibility, r.medium_high_min_accessibility),
        ),
        (
            signals.qual_gap <= r.medium_high_max_qual_gap,
            format!("qualification gap {} (at most {})", signals.qual_gap, r.medium_high_max_qual_gap),
        ),
    ];
    if mid.iter().all(|(ok, _)| *ok) {
        why.extend(mid.into_iter().map(|(_, s)| s));
        return (Priority::MediumHigh, why);
    }
    let failed_mid: Vec<String> = mid.into_iter().filter(|(ok, _)| !ok).map(|(_, s)| s).collect();
    why.push(format!("not medium-high: {}", failed_mid.join("; ")));
    why.push(format!(
        "similarity {:.0} meets the threshold {:.0}",
        signals.similarity, rubric.similarity_threshold
    ));
    (Priority::MediumLow, why)
}

/// Raw per-occupation inputs keyed by region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathwayInputs {
    pub occupation_code: String,
    pub title: String,
    pub similarity: f64,
    pub income_diff: BTreeMap<String, f64>,
    pub employment: BTreeMap<String, f64>,
    pub growth_pct: BTreeMap<String, f64>,
    /// Curated label; takes precedence over `skill_delta`.
    pub qual_gap: Option<QualGap>,
    /// Destination minus origin skill demand.
    pub skill_delta: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathwayAssessment {
    pub occupation_code: String,
    pub title: String,
    pub similarity: f64,
    pub income_pct_by_region: BTreeMap<String, f64>,
    pub growth_flag: Growth,
    pub accessibility: Accessibility,
    pub qual_gap: QualGap,
    pub priority: Priority,
    pub justifications: Vec<String>,
}

fn by_region<'a>(
    map: &'a BTreeMap<String, f64>,
    regions: &[String],
    what: &str,
    code: &str,
) -> Result<Vec<f64>> {
    regions
        .iter()
        .map(|r| {
            map.get(r)
                .copied()
                .ok_or_else(|| Error::MissingData(format!("{what} for occupation {code} in region {r}")))
        })
        .collect()
}

/// Scores one occupation over the given regions.
pub fn assess(
    inputs: &PathwayInputs,
    regions: &[String],
    origin_median: f64,
    rubric: &Rubric,
) -> Result<PathwayAssessment> {
    if regions.is_empty() {
        return Err(Error::Empty("no regions to assess".into()));
    }
    if !(origin_median > 0.0) {
        return Err(Error::InvalidParameter("origin median income must be positive".into()));
    }
    let code = &inputs.occupation_code;
    let diffs = by_region(&inputs.income_diff, regions, "income difference", code)?;
    let employment = by_region(&inputs.employment, regions, "employment", code)?;
    let growth = by_region(&inputs.growth_pct, regions, "employment growth", code)?;
    let qual_gap = match (inputs.qual_gap, inputs.skill_delta) {
        (Some(g), _) => g,
        (None, Some(d)) => rubric.qual_gap_from_delta(d),
        (None, None) => {
            return Err(Error::MissingData(format!("qualification gap for occupation {code}")));
        }
    };
    let income_pct: Vec<f64> = diffs.iter().map(|d| percent_of_origin_income(*d, origin_median)).collect();
    let signals = Signals {
        similarity: inputs.similarity,
        income_pct: income_pct.clone(),
        growth: growth_flag(&growth),
        accessibility: rubric.accessibility(&employment),
        qual_gap,
    };
    let (priority, justifications) = classify(&signals, rubric);
    Ok(PathwayAssessment {
        occupation_code: code.clone(),
        title: inputs.title.clone(),
        similarity: inputs.similarity,
        income_pct_by_region: regions.iter().cloned().zip(income_pct).collect(),
        growth_flag: signals.growth,
        accessibility: signals.accessibility,
        qual_gap,
        priority,
        justifications,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tier {
    pub priority: Priority,
    pub pathways: Vec<PathwayAssessment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathwayReport {
    /// Every tier, most recommended first; a tier may be empty.
    pub tiers: Vec<Tier>,
}

impl PathwayReport {
    pub fn tier(&self, priority: Priority) -> &[PathwayAssessment] {
        self.tiers
            .iter()
            .find(|t| t.priority == priority)
            .map_or(&[], |t| t.pathways.as_slice())
    }

    pub fn pathways(&self) -> impl Iterator<Item = &PathwayAssessment> {
        self.tiers.iter().flat_map(|t| t.pathways.iter())
    }
}

/// Groups assessments by tier; within a tier by similarity descending, then code.
pub fn rank_pathways(assessments: &[PathwayAssessment]) -> PathwayReport {
    let tiers = Priority::TIERS
        .iter()
        .map(|p| {
            let mut pathways: Vec<PathwayAssessment> =
                assessments.iter().filter(|a| a.priority == *p).cloned().collect();
            pathways.sort_by(|a, b| {
                b.similarity
                    .total_cmp(&a.similarity)
                    .then_with(|| a.occupation_code.cmp(&b.occupation_code))
            });
            Tier { priority: *p, pathways }
        })
        .collect();
    PathwayReport { tiers }
}

/// Default conditional-intercept cutoff, on the log-rate scale.
pub const UNDERUTILIZATION_CUTOFF: f64 = -0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnderutilizedPathway {
    pub occupation_code: String,
    pub priority: Priority,
    pub intercept: f64,
    pub assessment: PathwayAssessment,
}

/// Favourable pathways (high or medium-high) whose conditional occupation
/// intercept is below `cutoff`, most negative first.
pub fn flag_underutilized(
    assessments: &[PathwayAssessment],
    residuals: &[OccupationResidual],
    cutoff: f64,
) -> Vec<UnderutilizedPathway> {
    let by_code: BTreeMap<&str, &PathwayAssessment> =
        assessments.iter().map(|a| (a.occupation_code.as_str(), a)).collect();
    let mut out: Vec<UnderutilizedPathway> = residuals
        .iter()
        .filter(|r| r.intercept < cutoff)
        .filter_map(|r| {
            let a = by_code.get(r.occupation_code.as_str())?;
            (a.priority >= Priority::MediumHigh).then(|| UnderutilizedPathway {
                occupation_code: r.occupation_code.clone(),
                priority: a.priority,
                intercept: r.intercept,
                assessment: (*a).clone(),
            })
        })
        .collect();
    out.sort_by(|a, b| {
        a.intercept
            .total_cmp(&b.intercept)
            .then_with(|| a.occupation_code.cmp(&b.occupation_code))
    });
    out
}
