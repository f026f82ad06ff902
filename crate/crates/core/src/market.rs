//! Labour-market indicators and construction of the regression predictor panel.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::capability::SimilarityResult;
use crate::error::{Error, Result};
use crate::table::{read_rows, writer_to_string};

/// First and last census years bracketing the panel.
pub const CENSUS_YEARS: (i32, i32) = (2016, 2021);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketObservation {
    pub occupation_code: String,
    pub region: String,
    pub year: i32,
    pub median_income: f64,
    pub employment: f64,
    pub employment_growth_pct: f64,
}

pub fn load_market<R: Read>(source: R) -> Result<Vec<MarketObservation>> {
    let rows: Vec<(usize, MarketObservation)> = read_rows(
        source,
        &[
            "occupation_code",
            "region",
            "year",
            "median_income",
            "employment",
            "employment_growth_pct",
        ],
    )?;
    rows.into_iter()
        .map(|(line, r)| {
            if !(r.employment >= 0.0) {
                return Err(Error::parse(line, "employment must be nonnegative"));
            }
            if !(r.median_income >= 0.0) {
                return Err(Error::parse(line, "median income must be nonnegative"));
            }
            Ok(r)
        })
        .collect()
}

/// Regional shares of national employment for one occupation and year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionalShareVector {
    pub occupation_code: String,
    pub year: i32,
    pub shares: BTreeMap<String, f64>,
}

impl RegionalShareVector {
    pub fn new(occupation_code: impl Into<String>, year: i32, shares: BTreeMap<String, f64>) -> Result<Self> {
        let code = occupation_code.into();
        if shares.values().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "negative regional share for {code} in {year}"
            )));
        }
        let total: f64 = shares.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "regional shares for {code} in {year} sum to {total}, not 1"
            )));
        }
        Ok(Self {
            occupation_code: code,
            year,
            shares,
        })
    }
}

#[derive(Debug, Deserialize)]
struct ShareRow {
    occupation_code: String,
    year: i32,
    region: String,
    share: f64,
}

pub fn load_shares<R: Read>(source: R) -> Result<Vec<RegionalShareVector>> {
    let rows: Vec<(usize, ShareRow)> = read_rows(source, &["occupation_code", "year", "region", "share"])?;
    let mut grouped: BTreeMap<(String, i32), BTreeMap<String, f64>> = BTreeMap::new();
    for (line, r) in rows {
        let entry = grouped.entry((r.occupation_code, r.year)).or_default();
        if entry.insert(r.region.clone(), r.share).is_some() {
            return Err(Error::parse(line, format!("duplicate share for region {}", r.region)));
        }
    }
    grouped
        .into_iter()
        .map(|((code, year), shares)| RegionalShareVector::new(code, year, shares))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub occupation_code: String,
    pub year: i32,
    pub transitions: u64,
    pub origin_exposure: f64,
}

pub fn load_transitions<R: Read>(source: R) -> Result<Vec<TransitionRecord>> {
    let rows: Vec<(usize, TransitionRecord)> = read_rows(
        source,
        &["occupation_code", "year", "transitions", "origin_exposure"],
    )?;
    rows.into_iter()
        .map(|(line, r)| {
            if !(r.origin_exposure > 0.0) {
                return Err(Error::parse(line, "origin exposure must be positive"));
            }
            Ok(r)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualificationRecord {
    pub occupation_code: String,
    pub skill_level: i64,
}

pub fn load_qualifications<R: Read>(source: R) -> Result<BTreeMap<String, i64>> {
    let rows: Vec<(usize, QualificationRecord)> = read_rows(source, &["occupation_code", "skill_level"])?;
    let mut out = BTreeMap::new();
    for (line, r) in rows {
        if out.insert(r.occupation_code.clone(), r.skill_level).is_some() {
            return Err(Error::parse(line, format!("duplicate occupation {}", r.occupation_code)));
        }
    }
    Ok(out)
}

/// Destination minus origin median income; positive means a pay rise.
pub fn income_differential(dest_income: f64, origin_income: f64) -> f64 {
    dest_income - origin_income
}

/// How financial-year labels map onto the calendar axis used for interpolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensusAnchor {
    /// FY2016-17 sits at 2016.5.
    #[default]
    MidYear,
    /// FY2016-17 sits at 2016.0.
    StartYear,
}

impl CensusAnchor {
    pub fn point(self, financial_year_start: i32) -> f64 {
        match self {
            CensusAnchor::MidYear => financial_year_start as f64 + 0.5,
            CensusAnchor::StartYear => financial_year_start as f64,
        }
    }
}

/// Value on the line through `(2016, v2016)` and `(2021, v2021)` at `t`.
pub fn interpolate_census(v2016: f64, v2021: f64, t: f64) -> f64 {
    let (a, b) = CENSUS_YEARS;
    v2016 + (v2021 - v2016) * (t - a as f64) / (b - a) as f64
}

/// Negated L1 distance between two regional share distributions, in `[-2, 0]`.
pub fn spatial_alignment(origin: &RegionalShareVector, dest: &RegionalShareVector) -> Result<f64> {
    if origin.shares.len() != dest.shares.len()
        || origin.shares.keys().zip(dest.shares.keys()).any(|(a, b)| a != b)
    {
        return Err(Error::Misaligned {
            a: format!("{} regions", origin.occupation_code),
            b: format!("{} regions", dest.occupation_code),
        });
    }
    Ok(-origin
        .shares
        .values()
        .zip(dest.shares.values())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillDirection {
    /// Level 1 is the most demanding (ANZSCO convention).
    #[default]
    LowerIsMoreDemanding,
    HigherIsMoreDemanding,
}

/// Ordinal skill-level scale with a declared direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillScale {
    pub min: i64,
    pub max: i64,
    pub direction: SkillDirection,
}

impl Default for SkillScale {
    fn default() -> Self {
        Self {
            min: 1,
            max: 5,
            direction: SkillDirection::LowerIsMoreDemanding,
        }
    }
}

impl SkillScale {
    /// Requirement rank where larger means more demanding.
    pub fn demand(&self, level: i64) -> Result<i64> {
        if level < self.min || level > self.max {
            return Err(Error::UnknownSkillLevel(level));
        }
        Ok(match self.direction {
            SkillDirection::LowerIsMoreDemanding => self.max - level,
            SkillDirection::HigherIsMoreDemanding => level - self.min,
        })
    }
}

/// 1 when the destination's formal requirement does not exceed the origin's.
pub fn qual_flag(dest_level: i64, origin_level: i64, scale: &SkillScale) -> Result<u8> {
    Ok(u8::from(scale.demand(dest_level)? <= scale.demand(origin_level)?))
}

/// Median income as a rounded percentage of the origin median.
pub fn percent_of_origin_income(diff: f64, origin_median: f64) -> f64 {
    (100.0 * (origin_median + diff) / origin_median).round()
}

/// One destination-occupation x year observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorRow {
    pub occupation_code: String,
    pub year: i32,
    pub transitions: u64,
    pub sim: f64,
    pub inc: f64,
    pub emp: f64,
    pub spatial: f64,
    pub qual: u8,
    pub origin_exposure: f64,
}

impl PredictorRow {
    pub fn predictor(&self, name: Predictor) -> f64 {
        match name {
            Predictor::Sim => self.sim,
            Predictor::Inc => self.inc,
            Predictor::Emp => self.emp,
            Predictor::Spatial => self.spatial,
            Predictor::Qual => self.qual as f64,
        }
    }

    fn predictor_mut(&mut self, name: Predictor) -> &mut f64 {
        match name {
            Predictor::Sim => &mut self.sim,
            Predictor::Inc => &mut self.inc,
            Predictor::Emp => &mut self.emp,
            Predictor::Spatial => &mut self.spatial,
            Predictor::Qual => unreachable!("binary predictor is never rescaled"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Predictor {
    Sim,
    Inc,
    Emp,
    Spatial,
    Qual,
}

impl Predictor {
    pub const ALL: [Predictor; 5] = [
        Predictor::Sim,
        Predictor::Inc,
        Predictor::Emp,
        Predictor::Spatial,
        Predictor::Qual,
    ];
    pub const CONTINUOUS: [Predictor; 4] = [Predictor::Sim, Predictor::Inc, Predictor::Emp, Predictor::Spatial];

    pub fn name(self) -> &'static str {
        match self {
            Predictor::Sim => "SIM",
            Predictor::Inc => "INC",
            Predictor::Emp => "EMP",
            Predictor::Spatial => "SPATIAL",
            Predictor::Qual => "QUAL",
        }
    }

    pub fn parse(s: &str) -> Option<Predictor> {
        Predictor::ALL.into_iter().find(|p| p.name().eq_ignore_ascii_case(s))
    }
}

/// Sample standard deviation of each rescaled predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub sd: BTreeMap<Predictor, f64>,
}

impl ScalingReport {
    pub fn apply(&self, rows: &[PredictorRow]) -> Vec<PredictorRow> {
        self.map(rows, |v, sd| v / (2.0 * sd))
    }

    pub fn invert(&self, rows: &[PredictorRow]) -> Vec<PredictorRow> {
        self.map(rows, |v, sd| v * 2.0 * sd)
    }

    fn map(&self, rows: &[PredictorRow], f: impl Fn(f64, f64) -> f64) -> Vec<PredictorRow> {
        rows.iter()
            .map(|r| {
                let mut r = r.clone();
                for (p, sd) in &self.sd {
                    let v = r.predictor_mut(*p);
                    *v = f(*v, *sd);
                }
                r
            })
            .collect()
    }
}

pub(crate) fn sample_sd(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    (values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Divides SIM, INC, EMP and SPATIAL by twice their sample SD; QUAL is untouched.
pub fn standardize_two_sd(rows: &[PredictorRow]) -> Result<(Vec<PredictorRow>, ScalingReport)> {
    if rows.len() < 2 {
        return Err(Error::Empty("standardisation needs at least two rows".into()));
    }
    let mut sd = BTreeMap::new();
    for p in Predictor::CONTINUOUS {
        let s = sample_sd(rows.iter().map(|r| r.predictor(p)));
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Degenerate(format!("predictor {} has zero variance", p.name())));
        }
        sd.insert(p, s);
    }
    let report = ScalingReport { sd };
    Ok((report.apply(rows), report))
}

const PANEL_COLUMNS: &[&str] = &[
    "occupation_code",
    "year",
    "transitions",
    "sim",
    "inc",
    "emp",
    "spatial",
    "qual",
    "origin_exposure",
];

pub fn load_panel<R: Read>(source: R) -> Result<Vec<PredictorRow>> {
    let rows: Vec<(usize, PredictorRow)> = read_rows(source, PANEL_COLUMNS)?;
    if rows.is_empty() {
        return Err(Error::Empty("predictor panel has no rows".into()));
    }
    rows.into_iter()
        .map(|(line, r)| {
            if r.qual > 1 {
                return Err(Error::parse(line, "qual must be 0 or 1"));
            }
            if !(r.origin_exposure > 0.0) {
                return Err(Error::parse(line, "origin exposure must be positive"));
            }
            Ok(r)
        })
        .collect()
}

pub fn panel_csv(rows: &[PredictorRow]) -> Result<String> {
    writer_to_string(PANEL_COLUMNS, |w| {
        for r in rows {
            w.serialize(r)?;
        }
        Ok(())
    })
}

/// Raw inputs for assembling the predictor panel.
#[derive(Debug, Clone)]
pub struct PanelInputs<'a> {
    pub origin: &'a str,
    pub similarity: &'a [SimilarityResult],
    pub market: &'a [MarketObservation],
    pub shares: &'a [RegionalShareVector],
    pub skill_levels: &'a BTreeMap<String, i64>,
    pub national_region: &'a str,
    pub anchor: CensusAnchor,
    pub skill_scale: SkillScale,
    /// Inclusive range of financial-year starts in the panel.
    pub years: (i32, i32),
}

/// Predictor values for one destination occupation and year, before any
/// transitions are attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorValues {
    pub occupation_code: String,
    pub year: i32,
    pub sim: f64,
    pub inc: f64,
    pub emp: f64,
    pub spatial: f64,
    pub qual: u8,
}

const PREDICTOR_COLUMNS: &[&str] = &["occupation_code", "year", "sim", "inc", "emp", "spatial", "qual"];

pub fn load_predictors<R: Read>(source: R) -> Result<Vec<PredictorValues>> {
    let rows: Vec<(usize, PredictorValues)> = read_rows(source, PREDICTOR_COLUMNS)?;
    rows.into_iter()
        .map(|(line, r)| {
            if r.qual > 1 {
                return Err(Error::parse(line, "qual must be 0 or 1"));
            }
            Ok(r)
        })
        .collect()
}

pub fn predictors_csv(rows: &[PredictorValues]) -> Result<String> {
    writer_to_string(PREDICTOR_COLUMNS, |w| {
        for r in rows {
            w.serialize(r)?;
        }
        Ok(())
    })
}

/// Unstandardised predictors for every scored destination occupation and
/// every panel year, ordered by occupation code then year.
///
/// Income and employment come from the national rows at the two census years;
/// SPATIAL is computed at each census year and then placed on the same line,
/// clamped at 0 where extrapolation would overshoot.
pub fn build_predictors(inputs: &PanelInputs<'_>) -> Result<Vec<PredictorValues>> {
    if inputs.years.0 > inputs.years.1 {
        return Err(Error::InvalidParameter(format!(
            "panel years {}-{} are reversed",
            inputs.years.0, inputs.years.1
        )));
    }
    let national: BTreeMap<(&str, i32), &MarketObservation> = inputs
        .market
        .iter()
        .filter(|m| m.region == inputs.national_region)
        .map(|m| ((m.occupation_code.as_str(), m.year), m))
        .collect();
    let shares: BTreeMap<(&str, i32), &RegionalShareVector> = inputs
        .shares
        .iter()
        .map(|s| ((s.occupation_code.as_str(), s.year), s))
        .collect();
    let (c0, c1) = CENSUS_YEARS;

    let census = |code: &str| -> Result<(&MarketObservation, &MarketObservation)> {
        let get = |year| {
            national.get(&(code, year)).copied().ok_or_else(|| {
                Error::MissingData(format!(
                    "no {} market row for occupation {code} in {year}",
                    inputs.national_region
                ))
            })
        };
        Ok((get(c0)?, get(c1)?))
    };
    let share = |code: &str, year: i32| -> Result<&RegionalShareVector> {
        shares
            .get(&(code, year))
            .copied()
            .ok_or_else(|| Error::MissingData(format!("no regional shares for {code} in {year}")))
    };
    let origin_level = *inputs
        .skill_levels
        .get(inputs.origin)
        .ok_or_else(|| Error::MissingData(format!("no skill level for origin {}", inputs.origin)))?;
    let (origin_m0, origin_m1) = census(inputs.origin)?;
    let (origin_s0, origin_s1) = (share(inputs.origin, c0)?, share(inputs.origin, c1)?);

    let mut destinations: Vec<&SimilarityResult> =
        inputs.similarity.iter().filter(|r| r.code != inputs.origin).collect();
    destinations.sort_by(|a, b| a.code.cmp(&b.code));
    let mut out = Vec::new();
    for dest in destinations {
        let code = dest.code.as_str();
        let (m0, m1) = census(code)?;
        let inc0 = income_differential(m0.median_income, origin_m0.median_income);
        let inc1 = income_differential(m1.median_income, origin_m1.median_income);
        let sp0 = spatial_alignment(origin_s0, share(code, c0)?)?;
        let sp1 = spatial_alignment(origin_s1, share(code, c1)?)?;
        let level = *inputs
            .skill_levels
            .get(code)
            .ok_or_else(|| Error::MissingData(format!("no skill level for {code}")))?;
        let qual = qual_flag(level, origin_level, &inputs.skill_scale)?;
        for year in inputs.years.0..=inputs.years.1 {
            let t = inputs.anchor.point(year);
            out.push(PredictorValues {
                occupation_code: code.to_string(),
                year,
                sim: dest.sim,
                inc: interpolate_census(inc0, inc1, t),
                emp: interpolate_census(m0.employment, m1.employment, t).max(0.0),
                spatial: interpolate_census(sp0, sp1, t).min(0.0),
                qual,
            });
        }
    }
    if out.is_empty() {
        return Err(Error::Empty("no destination occupations to build predictors for".into()));
    }
    Ok(out)
}

/// Joins transition counts onto predictors, one panel row per transition
/// record. Records for the origin itself are skipped.
pub fn attach_transitions(
    predictors: &[PredictorValues],
    transitions: &[TransitionRecord],
    origin: &str,
) -> Result<Vec<PredictorRow>> {
    let index: BTreeMap<(&str, i32), &PredictorValues> = predictors
        .iter()
        .map(|p| ((p.occupation_code.as_str(), p.year), p))
        .collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(transitions.len());
    for tr in transitions {
        let code = tr.occupation_code.as_str();
        if code == origin {
            continue;
        }
        if !seen.insert((code, tr.year)) {
            return Err(Error::InvalidParameter(format!("duplicate transitions row for {code} in {}", tr.year)));
        }
        let p = index
            .get(&(code, tr.year))
            .ok_or_else(|| Error::MissingData(format!("no predictors for {code} in {}", tr.year)))?;
        out.push(PredictorRow {
            occupation_code: code.to_string(),
            year: tr.year,
            transitions: tr.transitions,
            sim: p.sim,
            inc: p.inc,
            emp: p.emp,
            spatial: p.spatial,
            qual: p.qual,
            origin_exposure: tr.origin_exposure,
        });
    }
    if out.is_empty() {
        return Err(Error::Empty("no destination transitions in panel".into()));
    }
    Ok(out)
}

/// Predictors joined with transitions in one step.
pub fn build_panel(inputs: &PanelInputs<'_>, transitions: &[TransitionRecord]) -> Result<Vec<PredictorRow>> {
    attach_transitions(&build_predictors(inputs)?, transitions, inputs.origin)
}
