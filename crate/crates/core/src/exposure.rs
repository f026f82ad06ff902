//! Task-level automation exposure and work-activity evolution.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::read_rows;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    Core,
    NonCore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    AutomatedByAt,
    AutomatableOther,
    HumanRequired,
}

impl TaskStatus {
    pub const ALL: [TaskStatus; 3] = [
        TaskStatus::AutomatedByAt,
        TaskStatus::AutomatableOther,
        TaskStatus::HumanRequired,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskStatus::AutomatedByAt => "automated_by_at",
            TaskStatus::AutomatableOther => "automatable_other",
            TaskStatus::HumanRequired => "human_required",
        }
    }
}

impl TaskType {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskType::Core => "core",
            TaskType::NonCore => "non_core",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub description: String,
    pub task_type: TaskType,
    pub status: TaskStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityCategory {
    AutomatedDriving,
    Persistent,
    Emerging,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkActivity {
    pub name: String,
    pub importance: f64,
    pub category: ActivityCategory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureSummary {
    pub total: usize,
    pub counts: BTreeMap<TaskStatus, usize>,
    pub by_type: BTreeMap<TaskType, BTreeMap<TaskStatus, usize>>,
    pub fractions: BTreeMap<TaskStatus, f64>,
}

impl ExposureSummary {
    pub fn count(&self, status: TaskStatus) -> usize {
        self.counts.get(&status).copied().unwrap_or(0)
    }

    pub fn cross(&self, task_type: TaskType, status: TaskStatus) -> usize {
        self.by_type
            .get(&task_type)
            .and_then(|m| m.get(&status))
            .copied()
            .unwrap_or(0)
    }
}

pub fn load_task_catalog<R: Read>(source: R) -> Result<Vec<TaskRecord>> {
    let rows: Vec<(usize, TaskRecord)> = read_rows(source, &["description", "task_type", "status"])?;
    if rows.is_empty() {
        return Err(Error::Empty("task catalog has no rows".into()));
    }
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

pub fn load_activities<R: Read>(source: R) -> Result<Vec<WorkActivity>> {
    let rows: Vec<(usize, WorkActivity)> = read_rows(source, &["name", "importance", "category"])?;
    rows.into_iter()
        .map(|(line, a)| {
            if !(1.0..=5.0).contains(&a.importance) {
                return Err(Error::parse(
                    line,
                    format!("importance {} of {} outside [1, 5]", a.importance, a.name),
                ));
            }
            Ok(a)
        })
        .collect()
}

pub fn exposure_summary(tasks: &[TaskRecord]) -> Result<ExposureSummary> {
    if tasks.is_empty() {
        return Err(Error::Empty("exposure is undefined on an empty catalog".into()));
    }
    let mut counts: BTreeMap<TaskStatus, usize> = TaskStatus::ALL.iter().map(|s| (*s, 0)).collect();
    let mut by_type: BTreeMap<TaskType, BTreeMap<TaskStatus, usize>> = [TaskType::Core, TaskType::NonCore]
        .into_iter()
        .map(|t| (t, TaskStatus::ALL.iter().map(|s| (*s, 0)).collect()))
        .collect();
    for task in tasks {
        *counts.get_mut(&task.status).unwrap() += 1;
        *by_type.get_mut(&task.task_type).unwrap().get_mut(&task.status).unwrap() += 1;
    }
    let total = tasks.len();
    let fractions = counts
        .iter()
        .map(|(s, c)| (*s, *c as f64 / total as f64))
        .collect();
    Ok(ExposureSummary {
        total,
        counts,
        by_type,
        fractions,
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ActivityEvolution {
    pub automated_driving: Vec<WorkActivity>,
    pub persistent: Vec<WorkActivity>,
    pub emerging: Vec<WorkActivity>,
}

/// Partitions activities by category, each group by importance (desc) then name.
pub fn activity_evolution(activities: &[WorkActivity]) -> ActivityEvolution {
    let mut out = ActivityEvolution::default();
    for a in activities {
        match a.category {
            ActivityCategory::AutomatedDriving => out.automated_driving.push(a.clone()),
            ActivityCategory::Persistent => out.persistent.push(a.clone()),
            ActivityCategory::Emerging => out.emerging.push(a.clone()),
        }
    }
    for group in [&mut out.automated_driving, &mut out.persistent, &mut out.emerging] {
        group.sort_by(|a, b| {
            b.importance
                .total_cmp(&a.importance)
                .then_with(|| a.name.cmp(&b.name))
        });
    }
    out
}
