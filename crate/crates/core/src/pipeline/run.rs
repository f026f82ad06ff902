//! Stage execution. Every stage reads its inputs from the config and from the
//! persisted outputs of earlier stages, so stages can be rerun one at a time.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::{validate_config, Format, PipelineConfig, SimilaritySource};
use super::manifest::{sha256_file, sha256_hex, Artifact, Manifest, Timings, FAILED_FILE};
use super::report::{self, CoefficientRow, Report};
use crate::capability::{
    load_profiles, load_similarity_table, score_distribution, shortlist, similarity_scores_with,
    similarity_table_csv, RatingScale, SimilarityResult,
};
use crate::error::{Error, Result};
use crate::exposure::{activity_evolution, exposure_summary, load_activities, load_task_catalog, ExposureSummary};
use crate::market::{
    attach_transitions, build_predictors, load_market, load_predictors, load_qualifications, load_shares,
    load_transitions, predictors_csv, standardize_two_sd, MarketObservation, PanelInputs, ScalingReport,
};
use crate::regression::{
    fit_candidates, inference_table, select_model, sign_robustness, underutilization_residuals, FittedModel,
    OccupationResidual, Selection,
};
use crate::synthesis::{assess, flag_underutilized, rank_pathways, PathwayInputs, QualGap, Rubric};
use crate::table::{open, read_rows, writer_to_string};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Exposure,
    Similarity,
    Market,
    Regression,
    Synthesis,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Exposure,
        Stage::Similarity,
        Stage::Market,
        Stage::Regression,
        Stage::Synthesis,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Exposure => "exposure",
            Stage::Similarity => "similarity",
            Stage::Market => "market",
            Stage::Regression => "regression",
            Stage::Synthesis => "synthesis",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const EXPOSURE_SUMMARY: &str = "exposure_summary.json";
pub const ACTIVITY_EVOLUTION: &str = "activity_evolution.json";
pub const SIMILARITY: &str = "similarity.csv";
pub const SHORTLIST: &str = "shortlist.csv";
pub const SIMILARITY_DISTRIBUTION: &str = "similarity_distribution.json";
pub const PREDICTORS: &str = "predictors.csv";
pub const REGIONAL: &str = "regional_indicators.csv";
pub const FITS: &str = "fits.json";
pub const REGRESSION: &str = "regression.json";
pub const COEFFICIENTS: &str = "coefficients.csv";
pub const RESIDUALS: &str = "residuals.csv";
pub const PATHWAYS: &str = "pathways.json";
pub const UNDERUTILIZED: &str = "underutilized.json";

/// Assessment-year indicators for one occupation in one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionalIndicator {
    pub occupation_code: String,
    pub region: String,
    pub median_income: f64,
    pub income_diff: f64,
    pub employment: f64,
    pub growth_pct: f64,
}

const REGIONAL_COLUMNS: &[&str] = &[
    "occupation_code",
    "region",
    "median_income",
    "income_diff",
    "employment",
    "growth_pct",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub id: String,
    pub label: String,
    pub converged: bool,
    pub loglik: Option<f64>,
    pub aic: Option<f64>,
    pub n_params: usize,
    pub sigma2_occ: Option<f64>,
    pub sigma2_year: Option<f64>,
    pub alpha: Option<f64>,
    pub dispersion: Option<f64>,
    pub boundary: Vec<String>,
    pub iterations: usize,
    pub message: String,
}

impl ModelSummary {
    fn of(fit: &FittedModel) -> Self {
        Self {
            id: fit.id.clone(),
            label: fit.spec.label(),
            converged: fit.converged,
            loglik: fit.loglik,
            aic: fit.aic,
            n_params: fit.n_params,
            sigma2_occ: fit.sigma2_occ,
            sigma2_year: fit.sigma2_year,
            alpha: fit.alpha,
            dispersion: fit.dispersion,
            boundary: fit.boundary.clone(),
            iterations: fit.iterations,
            message: fit.message.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFailure {
    pub id: String,
    pub error: String,
}

/// What the regression stage persists for later stages and reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSummary {
    pub n_obs: usize,
    pub scaling: ScalingReport,
    pub models: Vec<ModelSummary>,
    pub failures: Vec<ModelFailure>,
    pub selection: Selection,
    pub sign_robustness: BTreeMap<String, bool>,
    /// Model whose occupation intercepts feed the underutilisation check.
    pub residual_model: Option<String>,
}

#[derive(Debug, Deserialize)]
struct QualGapRow {
    occupation_code: String,
    qual_gap: QualGap,
}

/// Outcome of one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOutput {
    pub stage: Stage,
    pub artifacts: Vec<PathBuf>,
    pub seconds: f64,
}

pub struct Pipeline {
    config: PipelineConfig,
    config_sha256: String,
}

impl Pipeline {
    /// Reads and validates a config file.
    pub fn from_config_file(path: &Path) -> Result<Self> {
        let config = validate_config(path)?;
        let sha = sha256_file(path)?;
        Ok(Self::new(config, sha))
    }

    pub fn new(config: PipelineConfig, config_sha256: String) -> Self {
        Self { config, config_sha256 }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn config_mut(&mut self) -> &mut PipelineConfig {
        &mut self.config
    }

    pub fn output_dir(&self) -> &Path {
        &self.config.output_dir
    }

    /// Runs every stage in order, stopping at the first failure.
    pub fn run_all(&self) -> Result<Vec<StageOutput>> {
        Stage::ALL.iter().map(|s| self.run_stage(*s)).collect()
    }

    /// Runs one stage. Failures are wrapped in [`Error::Stage`] and leave a
    /// `FAILED` marker in the output directory naming the stage.
    pub fn run_stage(&self, stage: Stage) -> Result<StageOutput> {
        let dir = self.output_dir();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let marker = dir.join(FAILED_FILE);
        if marker.exists() {
            std::fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
        }
        let start = Instant::now();
        let mut ctx = StageContext {
            pipeline: self,
            artifacts: Vec::new(),
            inputs: Vec::new(),
        };
        let outcome = match stage {
            Stage::Exposure => ctx.exposure(),
            Stage::Similarity => ctx.similarity(),
            Stage::Market => ctx.market(),
            Stage::Regression => ctx.regression(),
            Stage::Synthesis => ctx.synthesis(),
        }
        .and_then(|()| ctx.record(stage));
        let seconds = start.elapsed().as_secs_f64();
        match outcome {
            Ok(()) => {
                let mut timings = Timings::load(dir)?;
                timings.seconds.insert(stage.as_str().into(), seconds);
                timings.save(dir)?;
                Ok(StageOutput {
                    stage,
                    artifacts: ctx.artifacts.into_iter().map(|a| dir.join(a)).collect(),
                    seconds,
                })
            }
            Err(err) => {
                let text = format!("stage: {stage}\nerror: {err}\n");
                // The stage error matters more than a failure to write the marker.
                let _ = std::fs::write(&marker, text);
                Err(Error::Stage {
                    stage: stage.as_str().into(),
                    source: Box::new(err),
                })
            }
        }
    }
}

struct StageContext<'a> {
    pipeline: &'a Pipeline,
    /// File names written by this stage, relative to the output directory.
    artifacts: Vec<String>,
    inputs: Vec<PathBuf>,
}

impl StageContext<'_> {
    fn cfg(&self) -> &PipelineConfig {
        &self.pipeline.config
    }

    fn out(&self, name: &str) -> PathBuf {
        self.pipeline.output_dir().join(name)
    }

    fn input(&mut self, path: &Path) -> Result<std::fs::File> {
        self.inputs.push(path.to_path_buf());
        open(path)
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.out(name);
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        self.write(name, &text)
    }

    /// Opens an artifact from an earlier stage.
    fn artifact(&self, name: &str, producer: Stage) -> Result<std::fs::File> {
        let path = self.out(name);
        if !path.exists() {
            return Err(Error::MissingData(format!(
                "{} not found; run the {producer} stage first",
                path.display()
            )));
        }
        open(&path)
    }

    fn artifact_json<T: DeserializeOwned>(&self, name: &str, producer: Stage) -> Result<T> {
        Ok(serde_json::from_reader(std::io::BufReader::new(self.artifact(name, producer)?))?)
    }

    fn similarity_table(&self) -> Result<Vec<SimilarityResult>> {
        load_similarity_table(self.artifact(SIMILARITY, Stage::Similarity)?, &self.cfg().origin)
    }

    /// Updates the manifest with this stage's inputs and artifacts.
    fn record(&self, stage: Stage) -> Result<()> {
        let dir = self.pipeline.output_dir();
        let mut manifest = match Manifest::load(dir)? {
            Some(m) if m.config_sha256 == self.pipeline.config_sha256 => m,
            _ => Manifest::new(self.pipeline.config_sha256.clone()),
        };
        for path in &self.inputs {
            let key = path
                .strip_prefix(&self.cfg().base_dir)
                .unwrap_or(path)
                .to_string_lossy()
                .into_owned();
            manifest.inputs.insert(key, sha256_file(path)?);
        }
        let artifacts = self
            .artifacts
            .iter()
            .map(|name| {
                Ok(Artifact {
                    path: name.clone(),
                    sha256: sha256_file(&dir.join(name))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        manifest.stages.insert(stage.as_str().into(), artifacts);
        manifest.save(dir)
    }

    fn exposure(&mut self) -> Result<()> {
        let tasks_path = self.cfg().tasks.clone();
        let activities_path = self.cfg().activities.clone();
        let tasks = load_task_catalog(self.input(&tasks_path)?)?;
        let activities = load_activities(self.input(&activities_path)?)?;
        self.write_json(EXPOSURE_SUMMARY, &exposure_summary(&tasks)?)?;
        self.write_json(ACTIVITY_EVOLUTION, &activity_evolution(&activities))
    }

    fn similarity(&mut self) -> Result<()> {
        let origin = self.cfg().origin.clone();
        let mut results = match self.cfg().similarity.clone() {
            SimilaritySource::Capabilities(path) => {
                let profiles = load_profiles(self.input(&path)?, RatingScale::default())?;
                let origin_profile = profiles
                    .iter()
                    .find(|p| p.code == origin)
                    .ok_or_else(|| Error::MissingData(format!("no capability profile for origin {origin}")))?;
                similarity_scores_with(origin_profile, &profiles, self.cfg().capability_selection())?
            }
            SimilaritySource::Table(path) => load_similarity_table(self.input(&path)?, &origin)?,
        };
        results.sort_by(|a, b| b.sim.total_cmp(&a.sim).then_with(|| a.code.cmp(&b.code)));
        let short = shortlist(&results, self.cfg().similarity_threshold);
        self.write(SIMILARITY, &similarity_table_csv(&results)?)?;
        self.write(SHORTLIST, &similarity_table_csv(&short)?)?;
        self.write_json(SIMILARITY_DISTRIBUTION, &score_distribution(&results)?)
    }

    fn market(&mut self) -> Result<()> {
        let cfg = self.cfg().clone();
        let similarity = self.similarity_table()?;
        let market = load_market(self.input(&cfg.market)?)?;
        let shares = load_shares(self.input(&cfg.shares)?)?;
        let skill_levels = load_qualifications(self.input(&cfg.qualifications)?)?;
        let inputs = PanelInputs {
            origin: &cfg.origin,
            similarity: &similarity,
            market: &market,
            shares: &shares,
            skill_levels: &skill_levels,
            national_region: &cfg.national_region,
            anchor: cfg.census_anchor,
            skill_scale: cfg.skill_scale,
            years: cfg.panel_years,
        };
        let predictors = build_predictors(&inputs)?;
        self.write(PREDICTORS, &predictors_csv(&predictors)?)?;

        let short = shortlist(&similarity, cfg.similarity_threshold);
        let regional = regional_indicators(&cfg, &short, &market)?;
        let text = writer_to_string(REGIONAL_COLUMNS, |w| {
            for r in &regional {
                w.serialize(r)?;
            }
            Ok(())
        })?;
        self.write(REGIONAL, &text)
    }

    fn regression(&mut self) -> Result<()> {
        let cfg = self.cfg().clone();
        let predictors = load_predictors(self.artifact(PREDICTORS, Stage::Market)?)?;
        if !cfg.transitions.exists() {
            return Err(Error::MissingData(format!(
                "transitions file {} does not exist",
                cfg.transitions.display()
            )));
        }
        let transitions = load_transitions(self.input(&cfg.transitions)?)?;
        let rows = attach_transitions(&predictors, &transitions, &cfg.origin)?;
        let (scaled, scaling) = standardize_two_sd(&rows)?;
        let specs = cfg.candidate_specs();
        let mut fits = Vec::new();
        let mut failures = Vec::new();
        for (spec, result) in specs.iter().zip(fit_candidates(&specs, &scaled)) {
            match result {
                Ok(fit) => fits.push(fit),
                Err(e) => failures.push(ModelFailure {
                    id: spec.id(),
                    error: e.to_string(),
                }),
            }
        }
        if fits.is_empty() {
            let detail: Vec<String> = failures.iter().map(|f| format!("{}: {}", f.id, f.error)).collect();
            return Err(Error::Convergence(format!("every candidate failed ({})", detail.join("; "))));
        }
        let selection = select_model(&fits)?;
        let by_id: BTreeMap<&str, &FittedModel> = fits.iter().map(|f| (f.id.as_str(), f)).collect();
        let residual_fit = selection
            .ranking
            .iter()
            .map(|r| by_id[r.id.as_str()])
            .find(|f| f.spec.random_effects.has_occupation());
        let residuals: Vec<OccupationResidual> = match residual_fit {
            Some(f) => underutilization_residuals(f)?,
            None => Vec::new(),
        };

        let coefficients: Vec<CoefficientRow> = fits
            .iter()
            .flat_map(|f| {
                inference_table(f)
                    .rows
                    .into_iter()
                    .map(move |r| CoefficientRow::new(&f.id, r))
            })
            .collect();
        let summary = RegressionSummary {
            n_obs: scaled.len(),
            scaling,
            models: fits.iter().map(ModelSummary::of).collect(),
            failures,
            sign_robustness: sign_robustness(&fits),
            residual_model: residual_fit.map(|f| f.id.clone()),
            selection,
        };
        self.write_json(FITS, &fits)?;
        self.write_json(REGRESSION, &summary)?;
        self.write(COEFFICIENTS, &report::coefficients_csv(&coefficients)?)?;
        let text = writer_to_string(
            &["occupation_code", "intercept", "observed_mean", "expected_mean"],
            |w| {
                for r in &residuals {
                    w.serialize(r)?;
                }
                Ok(())
            },
        )?;
        self.write(RESIDUALS, &text)
    }

    fn synthesis(&mut self) -> Result<()> {
        let cfg = self.cfg().clone();
        let mut rubric = match &cfg.rubric {
            Some(path) => {
                self.inputs.push(path.clone());
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                Rubric::from_toml(&text)?
            }
            None => Rubric::default(),
        };
        rubric.similarity_threshold = cfg.similarity_threshold;
        rubric.validate()?;

        let exposure: ExposureSummary = self.artifact_json(EXPOSURE_SUMMARY, Stage::Exposure)?;
        let regression: RegressionSummary = self.artifact_json(REGRESSION, Stage::Regression)?;
        let similarity = self.similarity_table()?;
        let short = shortlist(&similarity, cfg.similarity_threshold);
        let regional: Vec<(usize, RegionalIndicator)> =
            read_rows(self.artifact(REGIONAL, Stage::Market)?, REGIONAL_COLUMNS)?;
        let residuals: Vec<OccupationResidual> = read_rows(
            self.artifact(RESIDUALS, Stage::Regression)?,
            &["occupation_code", "intercept"],
        )?
        .into_iter()
        .map(|(_, r)| r)
        .collect();
        let coefficients = report::load_coefficients(self.artifact(COEFFICIENTS, Stage::Regression)?)?;
        let skill_levels = load_qualifications(self.input(&cfg.qualifications)?)?;
        let curated: BTreeMap<String, QualGap> = match &cfg.qual_gaps {
            Some(path) => {
                let rows: Vec<(usize, QualGapRow)> = read_rows(self.input(path)?, &["occupation_code", "qual_gap"])?;
                rows.into_iter().map(|(_, r)| (r.occupation_code, r.qual_gap)).collect()
            }
            None => BTreeMap::new(),
        };

        let origin_demand = skill_levels
            .get(&cfg.origin)
            .map(|l| cfg.skill_scale.demand(*l))
            .transpose()?;
        let mut assessments = Vec::new();
        for dest in &short {
            let mut inputs = PathwayInputs {
                occupation_code: dest.code.clone(),
                title: dest.title.clone(),
                similarity: dest.sim,
                income_diff: BTreeMap::new(),
                employment: BTreeMap::new(),
                growth_pct: BTreeMap::new(),
                qual_gap: curated.get(&dest.code).copied(),
                skill_delta: None,
            };
            for (_, r) in regional.iter().filter(|(_, r)| r.occupation_code == dest.code) {
                inputs.income_diff.insert(r.region.clone(), r.income_diff);
                inputs.employment.insert(r.region.clone(), r.employment);
                inputs.growth_pct.insert(r.region.clone(), r.growth_pct);
            }
            if inputs.qual_gap.is_none() {
                if let (Some(o), Some(level)) = (origin_demand, skill_levels.get(&dest.code)) {
                    inputs.skill_delta = Some(cfg.skill_scale.demand(*level)? - o);
                }
            }
            assessments.push(assess(&inputs, &cfg.regions, cfg.origin_median_income, &rubric)?);
        }
        let pathways = rank_pathways(&assessments);
        let underutilized = flag_underutilized(&assessments, &residuals, cfg.underutilization_cutoff);
        self.write_json(PATHWAYS, &pathways)?;
        self.write_json(UNDERUTILIZED, &underutilized)?;

        let best = regression.selection.best.clone();
        let report = Report {
            origin: cfg.origin.clone(),
            similarity_threshold: cfg.similarity_threshold,
            regions: cfg.regions.clone(),
            exposure,
            shortlist: short,
            regression,
            coefficients: coefficients.into_iter().filter(|c| c.model == best).collect(),
            pathways,
            underutilized,
        };
        for format in &cfg.formats {
            match format {
                Format::Csv => self.write(report::PATHWAYS_CSV, &report::pathways_csv(&report)?)?,
                Format::Json => self.write_json(report::REPORT_JSON, &report)?,
                Format::Md => self.write(report::REPORT_MD, &report::markdown(&report))?,
            }
        }
        Ok(())
    }
}

/// Assessment-year regional rows for each shortlisted occupation. A missing
/// origin row is an error; a missing destination row is left for the
/// assessment to report against the occupation.
fn regional_indicators(
    cfg: &PipelineConfig,
    shortlisted: &[SimilarityResult],
    market: &[MarketObservation],
) -> Result<Vec<RegionalIndicator>> {
    let rows: BTreeMap<(&str, &str), &MarketObservation> = market
        .iter()
        .filter(|m| m.year == cfg.assessment_year)
        .map(|m| ((m.occupation_code.as_str(), m.region.as_str()), m))
        .collect();
    let mut out = Vec::new();
    for region in &cfg.regions {
        let origin = rows.get(&(cfg.origin.as_str(), region.as_str())).ok_or_else(|| {
            Error::MissingData(format!(
                "no {} market row for origin {} in region {region}",
                cfg.assessment_year, cfg.origin
            ))
        })?;
        for dest in shortlisted {
            if let Some(m) = rows.get(&(dest.code.as_str(), region.as_str())) {
                out.push(RegionalIndicator {
                    occupation_code: dest.code.clone(),
                    region: region.clone(),
                    median_income: m.median_income,
                    income_diff: crate::market::income_differential(m.median_income, origin.median_income),
                    employment: m.employment,
                    growth_pct: m.employment_growth_pct,
                });
            }
        }
    }
    out.sort_by(|a, b| a.occupation_code.cmp(&b.occupation_code).then_with(|| a.region.cmp(&b.region)));
    Ok(out)
}

/// Hash of in-memory config text, for pipelines built without a file.
pub fn config_digest(text: &str) -> String {
    sha256_hex(text.as_bytes())
}
