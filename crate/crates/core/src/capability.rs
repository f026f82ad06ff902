//! Occupation capability profiles and capability-similarity scoring.
//!
//! An occupation is described by a level and an importance rating for every
//! skill, ability and knowledge item. The distance between two occupations is
//! the unweighted sum of absolute level and importance differences over all
//! items; similarity is the min-max rescaling of that distance onto `[0, 100]`
//! across the scored set, with the origin occupation anchoring 100.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::read_rows;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapabilityDomain {
    Skill,
    Ability,
    Knowledge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapabilityDescriptor {
    pub id: String,
    pub domain: CapabilityDomain,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapabilityRating {
    pub level: f64,
    pub importance: f64,
}

/// Declared bounds of the level and importance scales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingScale {
    pub level: (f64, f64),
    pub importance: (f64, f64),
}

impl Default for RatingScale {
    fn default() -> Self {
        Self {
            level: (0.0, 7.0),
            importance: (1.0, 5.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationProfile {
    pub code: String,
    pub title: String,
    pub ratings: BTreeMap<String, CapabilityRating>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityResult {
    pub code: String,
    pub title: String,
    pub diff: f64,
    pub sim: f64,
    /// True for the origin occupation itself.
    #[serde(default)]
    pub origin: bool,
}

/// Which capability items enter the distance.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum CapabilitySelection {
    #[default]
    All,
    /// Only items whose importance for the origin is strictly above `min`.
    ImportantToOrigin { min: f64 },
}

#[derive(Debug, Deserialize)]
struct CapabilityRow {
    occupation_code: String,
    occupation_title: String,
    capability_id: String,
    capability_domain: CapabilityDomain,
    level: f64,
    importance: f64,
}

const CAPABILITY_COLUMNS: &[&str] = &[
    "occupation_code",
    "occupation_title",
    "capability_id",
    "capability_domain",
    "level",
    "importance",
];

/// Loads the long-format capability table (one row per occupation x capability).
///
/// Profiles come back in order of first appearance. Every occupation must rate
/// the same capability set; a gap is a hard error rather than an imputation.
pub fn load_profiles<R: Read>(source: R, scale: RatingScale) -> Result<Vec<OccupationProfile>> {
    let rows: Vec<(usize, CapabilityRow)> = read_rows(source, CAPABILITY_COLUMNS)?;
    let mut order: Vec<String> = Vec::new();
    let mut profiles: BTreeMap<String, OccupationProfile> = BTreeMap::new();
    let mut domains: BTreeMap<String, CapabilityDomain> = BTreeMap::new();

    for (line, row) in rows {
        check_range(
            &format!("level of {} for {}", row.capability_id, row.occupation_code),
            row.level,
            scale.level,
        )?;
        check_range(
            &format!("importance of {} for {}", row.capability_id, row.occupation_code),
            row.importance,
            scale.importance,
        )?;
        match domains.get(&row.capability_id) {
            Some(d) if *d != row.capability_domain => {
                return Err(Error::parse(
                    line,
                    format!("capability {} declared with two domains", row.capability_id),
                ))
            }
            Some(_) => {}
            None => {
                domains.insert(row.capability_id.clone(), row.capability_domain);
            }
        }
        let profile = profiles.entry(row.occupation_code.clone()).or_insert_with(|| {
            order.push(row.occupation_code.clone());
            OccupationProfile {
                code: row.occupation_code.clone(),
                title: row.occupation_title.clone(),
                ratings: BTreeMap::new(),
            }
        });
        let rating = CapabilityRating {
            level: row.level,
            importance: row.importance,
        };
        if profile.ratings.insert(row.capability_id.clone(), rating).is_some() {
            return Err(Error::parse(
                line,
                format!(
                    "duplicate rating for {} / {}",
                    row.occupation_code, row.capability_id
                ),
            ));
        }
    }

    if profiles.is_empty() {
        return Err(Error::Empty("capability table has no rows".into()));
    }
    let all_ids: BTreeSet<&String> = domains.keys().collect();
    for code in &order {
        let profile = &profiles[code];
        if let Some(missing) = all_ids.iter().find(|id| !profile.ratings.contains_key(**id)) {
            return Err(Error::MissingCapability {
                occupation: code.clone(),
                capability: (*missing).clone(),
            });
        }
    }
    Ok(order
        .into_iter()
        .map(|code| profiles.remove(&code).expect("profile present"))
        .collect())
}

fn check_range(what: &str, value: f64, (min, max): (f64, f64)) -> Result<()> {
    if !(value >= min && value <= max) {
        return Err(Error::OutOfRange {
            what: what.to_string(),
            value,
            min,
            max,
        });
    }
    Ok(())
}

fn check_aligned(a: &OccupationProfile, b: &OccupationProfile) -> Result<()> {
    if a.ratings.len() != b.ratings.len() || a.ratings.keys().zip(b.ratings.keys()).any(|(x, y)| x != y) {
        return Err(Error::Misaligned {
            a: a.code.clone(),
            b: b.code.clone(),
        });
    }
    Ok(())
}

/// Sum over capabilities of `|level_a - level_b| + |importance_a - importance_b|`.
pub fn capability_distance(a: &OccupationProfile, b: &OccupationProfile) -> Result<f64> {
    check_aligned(a, b)?;
    Ok(a.ratings
        .values()
        .zip(b.ratings.values())
        .map(|(ra, rb)| (ra.level - rb.level).abs() + (ra.importance - rb.importance).abs())
        .sum())
}

/// Distance restricted to the items picked by `selection`, judged on `origin`.
pub fn capability_distance_selected(
    origin: &OccupationProfile,
    other: &OccupationProfile,
    selection: CapabilitySelection,
) -> Result<f64> {
    match selection {
        CapabilitySelection::All => capability_distance(origin, other),
        CapabilitySelection::ImportantToOrigin { min } => {
            check_aligned(origin, other)?;
            Ok(origin
                .ratings
                .values()
                .zip(other.ratings.values())
                .filter(|(ro, _)| ro.importance > min)
                .map(|(ro, rb)| (ro.level - rb.level).abs() + (ro.importance - rb.importance).abs())
                .sum())
        }
    }
}

/// Similarity of every candidate to `origin` on the 0-100 scale.
///
/// The origin always belongs to the normalisation set: if it is not among the
/// candidates it is appended, so the minimum distance is 0 and the origin
/// scores exactly 100.
pub fn similarity_scores(
    origin: &OccupationProfile,
    candidates: &[OccupationProfile],
) -> Result<Vec<SimilarityResult>> {
    similarity_scores_with(origin, candidates, CapabilitySelection::All)
}

pub fn similarity_scores_with(
    origin: &OccupationProfile,
    candidates: &[OccupationProfile],
    selection: CapabilitySelection,
) -> Result<Vec<SimilarityResult>> {
    if candidates.is_empty() {
        return Err(Error::Empty("no candidate occupations".into()));
    }
    let mut scored: Vec<(&OccupationProfile, f64)> = candidates
        .iter()
        .map(|c| capability_distance_selected(origin, c, selection).map(|d| (c, d)))
        .collect::<Result<_>>()?;
    if !candidates.iter().any(|c| c.code == origin.code) {
        scored.push((origin, 0.0));
    }
    let min = scored.iter().map(|(_, d)| *d).fold(f64::INFINITY, f64::min);
    let max = scored.iter().map(|(_, d)| *d).fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Err(Error::Degenerate(
            "all capability distances are equal; similarity is undefined".into(),
        ));
    }
    let span = max - min;
    Ok(scored
        .into_iter()
        .map(|(p, diff)| SimilarityResult {
            code: p.code.clone(),
            title: p.title.clone(),
            diff,
            sim: 100.0 * (1.0 - (diff - min) / span),
            origin: p.code == origin.code,
        })
        .collect())
}

/// Non-origin results at or above `threshold`, best first; ties by code.
pub fn shortlist(results: &[SimilarityResult], threshold: f64) -> Vec<SimilarityResult> {
    let mut out: Vec<SimilarityResult> = results
        .iter()
        .filter(|r| !r.origin && r.sim >= threshold)
        .cloned()
        .collect();
    out.sort_by(|a, b| b.sim.total_cmp(&a.sim).then_with(|| a.code.cmp(&b.code)));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub mean: f64,
    pub median: f64,
}

/// Mean and median similarity over the non-origin results.
pub fn score_distribution(results: &[SimilarityResult]) -> Result<ScoreDistribution> {
    let mut sims: Vec<f64> = results.iter().filter(|r| !r.origin).map(|r| r.sim).collect();
    if sims.is_empty() {
        return Err(Error::Empty("no non-origin similarity scores".into()));
    }
    sims.sort_by(f64::total_cmp);
    let n = sims.len();
    let mean = sims.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        sims[n / 2]
    } else {
        0.5 * (sims[n / 2 - 1] + sims[n / 2])
    };
    Ok(ScoreDistribution { mean, median })
}

#[derive(Debug, Deserialize)]
struct SimilarityRow {
    occupation_code: String,
    #[serde(default)]
    occupation_title: String,
    similarity: f64,
    #[serde(default)]
    diff: Option<f64>,
}

/// Loads a precomputed similarity table (`occupation_code, occupation_title,
/// similarity[, diff]`). The row whose code equals `origin` is marked as such.
pub fn load_similarity_table<R: Read>(source: R, origin: &str) -> Result<Vec<SimilarityResult>> {
    let rows: Vec<(usize, SimilarityRow)> = read_rows(source, &["occupation_code", "similarity"])?;
    if rows.is_empty() {
        return Err(Error::Empty("similarity table has no rows".into()));
    }
    let mut seen = BTreeSet::new();
    rows.into_iter()
        .map(|(line, r)| {
            check_range("similarity", r.similarity, (0.0, 100.0))?;
            if !seen.insert(r.occupation_code.clone()) {
                return Err(Error::parse(line, format!("duplicate occupation {}", r.occupation_code)));
            }
            Ok(SimilarityResult {
                origin: r.occupation_code == origin,
                code: r.occupation_code,
                title: r.occupation_title,
                diff: r.diff.unwrap_or(f64::NAN),
                sim: r.similarity,
            })
        })
        .collect()
}

pub fn similarity_table_csv(results: &[SimilarityResult]) -> Result<String> {
    crate::table::writer_to_string(
        &["occupation_code", "occupation_title", "similarity", "diff"],
        |w| {
            for r in results {
                let diff = if r.diff.is_finite() { r.diff.to_string() } else { String::new() };
                w.write_record([r.code.as_str(), r.title.as_str(), &r.sim.to_string(), &diff])?;
            }
            Ok(())
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(code: &str, ratings: &[(f64, f64)]) -> OccupationProfile {
        OccupationProfile {
            code: code.into(),
            title: code.into(),
            ratings: ratings
                .iter()
                .enumerate()
                .map(|(i, &(level, importance))| (format!("c{i}"), CapabilityRating { level, importance }))
                .collect(),
        }
    }

    #[test]
    fn identical_profiles_have_zero_distance() {
        let a = profile("a", &[(3.0, 2.0), (4.5, 3.5)]);
        assert_eq!(capability_distance(&a, &a.clone()).unwrap(), 0.0);
    }

    #[test]
    fn two_capability_distance() {
        let a = profile("a", &[(2.0, 3.0), (4.0, 1.0)]);
        let b = profile("b", &[(3.0, 3.5), (4.0, 3.0)]);
        assert!((capability_distance(&a, &b).unwrap() - 3.5).abs() < 1e-15);
        assert_eq!(capability_distance(&a, &b).unwrap(), capability_distance(&b, &a).unwrap());
    }

    #[test]
    fn misaligned_profiles_rejected() {
        let a = profile("a", &[(2.0, 3.0)]);
        let b = profile("b", &[(2.0, 3.0), (1.0, 1.0)]);
        assert!(matches!(capability_distance(&a, &b), Err(Error::Misaligned { .. })));
    }

    #[test]
    fn origin_scores_100_and_farthest_scores_0() {
        let origin = profile("o", &[(3.0, 3.0), (2.0, 2.0)]);
        let near = profile("n", &[(3.5, 3.0), (2.0, 2.0)]);
        let far = profile("f", &[(6.0, 5.0), (0.0, 1.0)]);
        let res = similarity_scores(&origin, &[near, far]).unwrap();
        assert_eq!(res.len(), 3);
        let o = res.iter().find(|r| r.origin).unwrap();
        assert_eq!(o.sim, 100.0);
        assert_eq!(res.iter().find(|r| r.code == "f").unwrap().sim, 0.0);
    }

    #[test]
    fn degenerate_set_is_an_error() {
        let origin = profile("o", &[(3.0, 3.0)]);
        assert!(matches!(
            similarity_scores(&origin, &[origin.clone()]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn shortlist_thresholds() {
        let origin = profile("o", &[(3.0, 3.0), (2.0, 2.0)]);
        let cands = vec![
            origin.clone(),
            profile("b", &[(3.5, 3.0), (2.0, 2.0)]),
            profile("a", &[(3.5, 3.0), (2.0, 2.0)]),
            profile("f", &[(6.0, 5.0), (0.0, 1.0)]),
        ];
        let res = similarity_scores(&origin, &cands).unwrap();
        assert!(shortlist(&res, 100.0).is_empty());
        let all = shortlist(&res, 0.0);
        assert_eq!(all.iter().map(|r| r.code.as_str()).collect::<Vec<_>>(), ["a", "b", "f"]);
    }

    #[test]
    fn distribution_examples() {
        let mk = |sims: &[f64]| -> Vec<SimilarityResult> {
            sims.iter()
                .enumerate()
                .map(|(i, &s)| SimilarityResult {
                    code: i.to_string(),
                    title: String::new(),
                    diff: 0.0,
                    sim: s,
                    origin: false,
                })
                .collect()
        };
        let d = score_distribution(&mk(&[70.0, 70.0, 70.0])).unwrap();
        assert_eq!((d.mean, d.median), (70.0, 70.0));
        let d = score_distribution(&mk(&[100.0, 0.0, 50.0])).unwrap();
        assert_eq!((d.mean, d.median), (50.0, 50.0));
        assert!(score_distribution(&[]).is_err());
    }

    const FIXTURE: &str = "\
occupation_code,occupation_title,capability_id,capability_domain,level,importance
1,One,s1,skill,3.0,2.5
1,One,k1,knowledge,1.0,1.5
2,Two,s1,skill,4.0,3.0
2,Two,k1,knowledge,2.0,2.0
3,Three,s1,skill,0.5,1.0
3,Three,k1,knowledge,6.0,4.5
";

    #[test]
    fn loads_well_formed_fixture() {
        let profiles = load_profiles(FIXTURE.as_bytes(), RatingScale::default()).unwrap();
        assert_eq!(profiles.len(), 3);
        let keys: Vec<_> = profiles[0].ratings.keys().collect();
        assert!(profiles.iter().all(|p| p.ratings.keys().collect::<Vec<_>>() == keys));
    }

    #[test]
    fn missing_rating_names_occupation_and_capability() {
        let text: String = FIXTURE.lines().filter(|l| !l.starts_with("2,Two,k1")).collect::<Vec<_>>().join("\n");
        match load_profiles(text.as_bytes(), RatingScale::default()) {
            Err(Error::MissingCapability { occupation, capability }) => {
                assert_eq!(occupation, "2");
                assert_eq!(capability, "k1");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn importance_out_of_scale_rejected() {
        let text = FIXTURE.replace("3,Three,s1,skill,0.5,1.0", "3,Three,s1,skill,0.5,9");
        assert!(matches!(
            load_profiles(text.as_bytes(), RatingScale::default()),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn missing_column_is_schema_error() {
        let text = "occupation_code,capability_id,level\n1,s1,2\n";
        assert!(matches!(load_profiles(text.as_bytes(), RatingScale::default()), Err(Error::Schema(_))));
    }
}
