//! Pipeline configuration: a flat TOML file with a fixed key set.
//!
//! Relative paths are resolved against the directory holding the config file.
//! Validation collects every problem it finds instead of stopping at the first.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::capability::CapabilitySelection;
use crate::error::{Error, Result};
use crate::market::{CensusAnchor, SkillDirection, SkillScale};
use crate::regression::ModelSpec;
use crate::synthesis::UNDERUTILIZATION_CUTOFF;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Md,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Csv, Format::Json, Format::Md];

    pub fn parse(s: &str) -> Option<Format> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            "md" => Some(Format::Md),
            _ => None,
        }
    }
}

/// Where capability similarity comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilaritySource {
    /// Long-format capability ratings, scored by the similarity stage.
    Capabilities(PathBuf),
    /// A precomputed similarity table used as is.
    Table(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Directory the config was read from; relative paths resolve against it.
    pub base_dir: PathBuf,
    pub origin: String,
    pub origin_median_income: f64,
    pub regions: Vec<String>,
    pub national_region: String,
    pub similarity_threshold: f64,
    pub capability_min_importance: Option<f64>,
    pub tasks: PathBuf,
    pub activities: PathBuf,
    pub similarity: SimilaritySource,
    pub market: PathBuf,
    pub shares: PathBuf,
    pub qualifications: PathBuf,
    pub qual_gaps: Option<PathBuf>,
    pub transitions: PathBuf,
    pub rubric: Option<PathBuf>,
    pub census_anchor: CensusAnchor,
    pub skill_scale: SkillScale,
    pub assessment_year: i32,
    pub panel_years: (i32, i32),
    pub candidates: Vec<String>,
    pub underutilization_cutoff: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub formats: Vec<Format>,
}

impl PipelineConfig {
    pub fn capability_selection(&self) -> CapabilitySelection {
        match self.capability_min_importance {
            Some(min) => CapabilitySelection::ImportantToOrigin { min },
            None => CapabilitySelection::All,
        }
    }

    pub fn candidate_specs(&self) -> Vec<ModelSpec> {
        self.candidates
            .iter()
            .map(|id| ModelSpec::parse_id(id).expect("validated model id"))
            .collect()
    }
}

/// Every key the config file may contain, with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("origin", "origin occupation code (required)"),
    ("origin_median_income", "origin median full-time income (required)"),
    ("regions", "regions compared in the pathway assessment (required)"),
    ("national_region", "region label of national rows in the market file (default \"national\")"),
    ("similarity_threshold", "shortlist threshold in [0, 100] (default 70)"),
    ("capability_min_importance", "score only items rated above this importance for the origin (default: all items)"),
    ("tasks", "task catalogue CSV (required)"),
    ("activities", "work activity CSV (required)"),
    ("capabilities", "capability ratings CSV (this or similarity_table)"),
    ("similarity_table", "precomputed similarity CSV (this or capabilities)"),
    ("market", "market observations CSV (required)"),
    ("shares", "regional employment shares CSV (required)"),
    ("qualifications", "skill levels CSV (required)"),
    ("qual_gaps", "curated qualification-gap labels CSV (optional)"),
    ("transitions", "transition counts CSV (required)"),
    ("rubric", "priority rubric TOML (default: built-in rubric)"),
    ("census_anchor", "\"mid_year\" or \"start_year\" (default \"mid_year\")"),
    ("skill_direction", "\"lower_is_more_demanding\" or \"higher_is_more_demanding\" (default lower)"),
    ("skill_level_min", "lowest skill level code (default 1)"),
    ("skill_level_max", "highest skill level code (default 5)"),
    ("assessment_year", "year of the regional market rows used for assessment (default 2021)"),
    ("panel_first_year", "first financial year in the regression panel (default 2016)"),
    ("panel_last_year", "last financial year in the regression panel (default 2021)"),
    ("candidates", "model ids to fit (default: the seven standard candidates)"),
    ("underutilization_cutoff", "occupation intercept below which a favourable pathway is flagged (default -0.5)"),
    ("seed", "seed for any simulation (default 0)"),
    ("output_dir", "directory for stage outputs (default \"out\")"),
    ("formats", "report formats, any of \"csv\", \"json\", \"md\" (default all)"),
];

struct Reader<'a> {
    table: &'a toml::Table,
    errors: Vec<String>,
}

impl Reader<'_> {
    fn get(&self, key: &str) -> Option<&toml::Value> {
        self.table.get(key)
    }

    fn string(&mut self, key: &str, required: bool) -> Option<String> {
        match self.get(key) {
            Some(toml::Value::String(s)) if !s.trim().is_empty() => Some(s.clone()),
            Some(toml::Value::String(_)) => {
                self.errors.push(format!("{key}: must not be empty"));
                None
            }
            Some(other) => {
                self.errors.push(format!("{key}: expected a string, found {}", other.type_str()));
                None
            }
            None => {
                if required {
                    self.errors.push(format!("{key}: required key is missing"));
                }
                None
            }
        }
    }

    fn number(&mut self, key: &str) -> Option<f64> {
        match self.get(key) {
            Some(toml::Value::Float(f)) => Some(*f),
            Some(toml::Value::Integer(i)) => Some(*i as f64),
            Some(other) => {
                self.errors.push(format!("{key}: expected a number, found {}", other.type_str()));
                None
            }
            None => None,
        }
    }

    fn integer(&mut self, key: &str) -> Option<i64> {
        match self.get(key) {
            Some(toml::Value::Integer(i)) => Some(*i),
            Some(other) => {
                self.errors.push(format!("{key}: expected an integer, found {}", other.type_str()));
                None
            }
            None => None,
        }
    }

    fn strings(&mut self, key: &str) -> Option<Vec<String>> {
        match self.get(key) {
            Some(toml::Value::Array(items)) => {
                let out: Option<Vec<String>> = items.iter().map(|v| v.as_str().map(str::to_owned)).collect();
                if out.is_none() {
                    self.errors.push(format!("{key}: expected an array of strings"));
                }
                out
            }
            Some(other) => {
                self.errors.push(format!("{key}: expected an array, found {}", other.type_str()));
                None
            }
            None => None,
        }
    }
}

/// Parses and validates a config file.
pub fn validate_config(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config(&text, &base)
}

/// Parses config text, resolving relative paths against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<PipelineConfig> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(vec![format!("not valid TOML: {}", e.message())]))?;
    let mut r = Reader {
        table: &table,
        errors: Vec::new(),
    };
    for key in table.keys() {
        if !KEYS.iter().any(|(k, _)| k == key) {
            r.errors.push(format!("{key}: unknown key"));
        }
    }
    let path = |s: String| -> PathBuf {
        let p = PathBuf::from(s);
        if p.is_absolute() { p } else { base_dir.join(p) }
    };

    let origin = r.string("origin", true);
    let origin_median_income = match r.number("origin_median_income") {
        Some(v) if v > 0.0 => Some(v),
        Some(v) => {
            r.errors.push(format!("origin_median_income: {v} must be positive"));
            None
        }
        None => {
            r.errors.push("origin_median_income: required key is missing".into());
            None
        }
    };
    let regions = match r.strings("regions") {
        Some(v) if !v.is_empty() => Some(v),
        Some(_) => {
            r.errors.push("regions: must list at least one region".into());
            None
        }
        None => {
            if r.get("regions").is_none() {
                r.errors.push("regions: required key is missing".into());
            }
            None
        }
    };
    let national_region = r.string("national_region", false).unwrap_or_else(|| "national".into());
    let similarity_threshold = r.number("similarity_threshold").unwrap_or(70.0);
    if !(0.0..=100.0).contains(&similarity_threshold) {
        r.errors.push(format!("similarity_threshold: {similarity_threshold} is outside [0, 100]"));
    }
    let capability_min_importance = r.number("capability_min_importance");

    let tasks = r.string("tasks", true).map(path);
    let activities = r.string("activities", true).map(path);
    let capabilities = r.string("capabilities", false).map(path);
    let similarity_table = r.string("similarity_table", false).map(path);
    let similarity = match (capabilities, similarity_table) {
        (Some(c), None) => Some(SimilaritySource::Capabilities(c)),
        (None, Some(t)) => Some(SimilaritySource::Table(t)),
        (Some(_), Some(_)) => {
            r.errors.push("capabilities and similarity_table are mutually exclusive".into());
            None
        }
        (None, None) => {
            r.errors.push("one of capabilities or similarity_table is required".into());
            None
        }
    };
    let market = r.string("market", true).map(path);
    let shares = r.string("shares", true).map(path);
    let qualifications = r.string("qualifications", true).map(path);
    let qual_gaps = r.string("qual_gaps", false).map(path);
    let transitions = r.string("transitions", true).map(path);
    let rubric = r.string("rubric", false).map(path);

    let census_anchor = match r.string("census_anchor", false).as_deref() {
        None | Some("mid_year") => CensusAnchor::MidYear,
        Some("start_year") => CensusAnchor::StartYear,
        Some(other) => {
            r.errors.push(format!("census_anchor: unknown value {other:?}"));
            CensusAnchor::MidYear
        }
    };
    let direction = match r.string("skill_direction", false).as_deref() {
        None | Some("lower_is_more_demanding") => SkillDirection::LowerIsMoreDemanding,
        Some("higher_is_more_demanding") => SkillDirection::HigherIsMoreDemanding,
        Some(other) => {
            r.errors.push(format!("skill_direction: unknown value {other:?}"));
            SkillDirection::LowerIsMoreDemanding
        }
    };
    let skill_min = r.integer("skill_level_min").unwrap_or(1);
    let skill_max = r.integer("skill_level_max").unwrap_or(5);
    if skill_min >= skill_max {
        r.errors.push(format!("skill_level_min {skill_min} must be below skill_level_max {skill_max}"));
    }
    let year = |r: &mut Reader, key: &str, default: i32| -> i32 {
        match r.integer(key) {
            Some(y) if (1900..=2100).contains(&y) => y as i32,
            Some(y) => {
                r.errors.push(format!("{key}: {y} is not a plausible year"));
                default
            }
            None => default,
        }
    };
    let assessment_year = year(&mut r, "assessment_year", 2021);
    let first = year(&mut r, "panel_first_year", 2016);
    let last = year(&mut r, "panel_last_year", 2021);
    if first > last {
        r.errors.push(format!("panel_first_year {first} is after panel_last_year {last}"));
    }

    let candidates = r
        .strings("candidates")
        .unwrap_or_else(|| ModelSpec::candidates().iter().map(ModelSpec::id).collect());
    if candidates.is_empty() {
        r.errors.push("candidates: must list at least one model".into());
    }
    for id in &candidates {
        if ModelSpec::parse_id(id).is_none() {
            r.errors.push(format!("candidates: unknown model id {id:?}"));
        }
    }
    let underutilization_cutoff = r.number("underutilization_cutoff").unwrap_or(UNDERUTILIZATION_CUTOFF);
    let seed = match r.integer("seed") {
        Some(s) if s >= 0 => s as u64,
        Some(s) => {
            r.errors.push(format!("seed: {s} must be nonnegative"));
            0
        }
        None => 0,
    };
    let output_dir = path(r.string("output_dir", false).unwrap_or_else(|| "out".into()));
    let formats = match r.strings("formats") {
        Some(list) => {
            let mut out = Vec::new();
            for f in list {
                match Format::parse(&f) {
                    Some(fmt) if !out.contains(&fmt) => out.push(fmt),
                    Some(_) => {}
                    None => r.errors.push(format!("formats: unknown format {f:?}")),
                }
            }
            out
        }
        None => Format::ALL.to_vec(),
    };

    if !r.errors.is_empty() {
        return Err(Error::Config(r.errors));
    }
    Ok(PipelineConfig {
        base_dir: base_dir.to_path_buf(),
        origin: origin.expect("checked"),
        origin_median_income: origin_median_income.expect("checked"),
        regions: regions.expect("checked"),
        national_region,
        similarity_threshold,
        capability_min_importance,
        tasks: tasks.expect("checked"),
        activities: activities.expect("checked"),
        similarity: similarity.expect("checked"),
        market: market.expect("checked"),
        shares: shares.expect("checked"),
        qualifications: qualifications.expect("checked"),
        qual_gaps,
        transitions: transitions.expect("checked"),
        rubric,
        census_anchor,
        skill_scale: SkillScale {
            min: skill_min,
            max: skill_max,
            direction,
        },
        assessment_year,
        panel_years: (first, last),
        candidates,
        underutilization_cutoff,
        seed,
        output_dir,
        formats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
origin = "7331"
origin_median_income = 71500
regions = ["A", "B"]
tasks = "tasks.csv"
activities = "activities.csv"
similarity_table = "similarity.csv"
market = "market.csv"
shares = "shares.csv"
qualifications = "qualifications.csv"
transitions = "transitions.csv"
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL, Path::new("/data")).unwrap();
        assert_eq!(c.similarity_threshold, 70.0);
        assert_eq!(c.transitions, PathBuf::from("/data/transitions.csv"));
        assert_eq!(c.candidates.len(), 7);
        assert_eq!(c.formats, Format::ALL.to_vec());
        assert_eq!(c.panel_years, (2016, 2021));
    }

    #[test]
    fn threshold_out_of_range() {
        let text = format!("{MINIMAL}similarity_threshold = 130\n");
        match parse_config(&text, Path::new(".")) {
            Err(Error::Config(errs)) => {
                assert_eq!(errs.len(), 1);
                assert!(errs[0].contains("similarity_threshold"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn all_errors_reported() {
        let text = format!("{MINIMAL}similarity_threshold = -1\ncolour = \"blue\"\n");
        match parse_config(&text, Path::new(".")) {
            Err(Error::Config(errs)) => {
                assert_eq!(errs.len(), 2, "{errs:?}");
                assert!(errs.iter().any(|e| e.contains("colour: unknown key")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_required_keys_listed() {
        match parse_config("origin = \"1\"\n", Path::new(".")) {
            Err(Error::Config(errs)) => {
                for key in ["origin_median_income", "regions", "tasks", "market", "transitions"] {
                    assert!(errs.iter().any(|e| e.starts_with(key)), "{key} not in {errs:?}");
                }
            }
            other => panic!("{other:?}"),
        }
    }
}
