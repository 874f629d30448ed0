//! Balance findings from a score matrix.
//!
//! Two questions are asked of each version. Is it a jump in difficulty from
//! the one before (challenge vs. success)? And does skill matter, or does the
//! random agent keep up with the skilled players (skill vs. chance)? All
//! quantities are normalized by the spread of the scores, so findings do not
//! change when every score is scaled by a positive constant or shifted.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Game;
use crate::eval::{EvaluationReport, PlayerColumn, PlayerGroup};

pub const BALANCE_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SPIKE_THRESHOLD: f64 = 0.15;
pub const DEFAULT_CHANCE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyzeError {
    #[error("the report has no versions")]
    EmptyReport,
    #[error("a difficulty curve needs at least two versions, got {0}")]
    TooFewVersions(usize),
    #[error("v{0} has no skill-bearing scores")]
    NoSkillScores(u32),
    #[error("v{0} has no random-agent score")]
    MissingRandom(u32),
    #[error("the report has no v{0}")]
    UnknownVersion(u32),
    #[error("invalid threshold {name} = {value}")]
    InvalidThreshold { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default = "default_spike")]
    pub spike: f64,
    #[serde(default = "default_chance")]
    pub chance: f64,
}

fn default_spike() -> f64 {
    DEFAULT_SPIKE_THRESHOLD
}

fn default_chance() -> f64 {
    DEFAULT_CHANCE_THRESHOLD
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            spike: DEFAULT_SPIKE_THRESHOLD,
            chance: DEFAULT_CHANCE_THRESHOLD,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), AnalyzeError> {
        if !(self.spike.is_finite() && self.spike >= 0.0) {
            return Err(AnalyzeError::InvalidThreshold {
                name: "spike",
                value: self.spike,
            });
        }
        if !(0.0..=1.0).contains(&self.chance) {
            return Err(AnalyzeError::InvalidThreshold {
                name: "chance",
                value: self.chance,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub version: u32,
    pub mean: f64,
}

/// Mean skill-bearing score per version, and the spread of those scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyCurve {
    pub points: Vec<CurvePoint>,
    /// Max minus min over every skill-bearing cell of every version.
    pub range: f64,
}

impl DifficultyCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("version,mean\n");
        for p in &self.points {
            let _ = writeln!(out, "v{},{}", p.version, p.mean);
        }
        out
    }
}

fn skill_values(report: &EvaluationReport, version: u32) -> Vec<f64> {
    report
        .row(version)
        .map(|row| {
            row.cells
                .iter()
                .filter(|c| c.column.is_skill_bearing())
                .filter_map(|c| c.median)
                .collect()
        })
        .unwrap_or_default()
}

/// The random agent is left out: difficulty is what skilled players feel.
pub fn difficulty_curve(report: &EvaluationReport) -> Result<DifficultyCurve, AnalyzeError> {
    if report.rows.is_empty() {
        return Err(AnalyzeError::EmptyReport);
    }
    if report.rows.len() < 2 {
        return Err(AnalyzeError::TooFewVersions(report.rows.len()));
    }
    let mut points = Vec::with_capacity(report.rows.len());
    let mut low = f64::INFINITY;
    let mut high = f64::NEG_INFINITY;
    for version in report.versions() {
        let values = skill_values(report, version);
        if values.is_empty() {
            return Err(AnalyzeError::NoSkillScores(version));
        }
        for &v in &values {
            low = low.min(v);
            high = high.max(v);
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        points.push(CurvePoint { version, mean });
    }
    Ok(DifficultyCurve {
        points,
        range: high - low,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Harder,
    Easier,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Harder => "harder",
            Direction::Easier => "easier",
        }
    }
}

/// A version whose mean moved sharply from its predecessor's.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeFinding {
    pub version: u32,
    pub previous: u32,
    pub direction: Direction,
    /// |change in mean| / curve range.
    pub magnitude: f64,
}

pub fn detect_spikes(curve: &DifficultyCurve, threshold: f64) -> Vec<SpikeFinding> {
    if curve.range <= 0.0 {
        return Vec::new();
    }
    curve
        .points
        .windows(2)
        .filter_map(|pair| {
            let delta = pair[1].mean - pair[0].mean;
            let magnitude = delta.abs() / curve.range;
            (magnitude >= threshold).then_some(SpikeFinding {
                version: pair[1].version,
                previous: pair[0].version,
                direction: if delta < 0.0 {
                    Direction::Harder
                } else {
                    Direction::Easier
                },
                magnitude,
            })
        })
        .collect()
}

/// How far the best skilled player gets above the random agent, relative to
/// the spread of the whole row: 1 when random is the worst, 0 when random
/// matches the best.
pub fn chance_index(report: &EvaluationReport, version: u32) -> Result<f64, AnalyzeError> {
    let row = report
        .row(version)
        .ok_or(AnalyzeError::UnknownVersion(version))?;
    let random = row
        .cells
        .iter()
        .find(|c| c.column == PlayerColumn::Random)
        .and_then(|c| c.median)
        .ok_or(AnalyzeError::MissingRandom(version))?;
    let skilled = skill_values(report, version);
    let best = skilled
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if skilled.is_empty() {
        return Err(AnalyzeError::NoSkillScores(version));
    }
    let worst = skilled.iter().copied().fold(random, f64::min);
    if best == worst {
        return Ok(0.0);
    }
    Ok(((best - random) / (best - worst)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChanceClass {
    Skill,
    Chance,
}

pub fn classify_chance(index: f64, threshold: f64) -> ChanceClass {
    if index < threshold {
        ChanceClass::Chance
    } else {
        ChanceClass::Skill
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChanceFinding {
    pub version: u32,
    pub chance_index: f64,
    pub classification: ChanceClass,
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation; `None` when fewer than three points or when
/// either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 3 {
        return None;
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}

/// Per-version score of a player group, skill levels averaged. `None` if
/// any of the group's columns is missing for some version.
pub fn group_scores(report: &EvaluationReport, group: PlayerGroup) -> Option<Vec<f64>> {
    let columns: Vec<PlayerColumn> = group
        .columns()
        .iter()
        .copied()
        .filter(|c| report.columns.contains(c))
        .collect();
    if columns.is_empty() {
        return None;
    }
    report
        .versions()
        .into_iter()
        .map(|v| {
            let values = columns
                .iter()
                .map(|&c| report.value(v, c))
                .collect::<Option<Vec<f64>>>()?;
            Some(values.iter().sum::<f64>() / values.len() as f64)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityEntry {
    pub a: PlayerGroup,
    pub b: PlayerGroup,
    /// Spearman correlation of the two groups' scores across versions.
    pub spearman: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub undefined_reason: Option<String>,
}

/// How alike two player groups' scores move across versions.
pub fn similarity(report: &EvaluationReport, a: PlayerGroup, b: PlayerGroup) -> SimilarityEntry {
    let undefined = |reason: String| SimilarityEntry {
        a,
        b,
        spearman: None,
        undefined_reason: Some(reason),
    };
    if report.rows.len() < 3 {
        return undefined(format!("needs at least 3 versions, got {}", report.rows.len()));
    }
    let (Some(xa), Some(xb)) = (group_scores(report, a), group_scores(report, b)) else {
        return undefined("a column is incomplete".into());
    };
    match spearman(&xa, &xb) {
        Some(rho) => SimilarityEntry {
            a,
            b,
            spearman: Some(rho),
            undefined_reason: None,
        },
        None => undefined("a column has constant scores".into()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub report_id: String,
    pub game: Option<Game>,
    pub versions: Vec<u32>,
    pub columns: Vec<PlayerColumn>,
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub schema_version: u32,
    pub provenance: Provenance,
    pub curve: DifficultyCurve,
    pub spikes: Vec<SpikeFinding>,
    pub chance: Vec<ChanceFinding>,
    pub similarity: Vec<SimilarityEntry>,
    /// Things the analysis had to skip, such as versions without a random
    /// score.
    #[serde(default)]
    pub notes: Vec<String>,
}

pub fn balance_report(
    report: &EvaluationReport,
    thresholds: Thresholds,
) -> Result<BalanceReport, AnalyzeError> {
    thresholds.validate()?;
    let curve = difficulty_curve(report)?;
    let spikes = detect_spikes(&curve, thresholds.spike);
    let mut notes = Vec::new();
    let mut chance = Vec::new();
    for version in report.versions() {
        match chance_index(report, version) {
            Ok(index) => chance.push(ChanceFinding {
                version,
                chance_index: index,
                classification: classify_chance(index, thresholds.chance),
            }),
            Err(e) => notes.push(format!("no chance finding for v{version}: {e}")),
        }
    }
    let mut similarity_table = Vec::new();
    for (i, &a) in PlayerGroup::ALL.iter().enumerate() {
        for &b in &PlayerGroup::ALL[i + 1..] {
            similarity_table.push(similarity(report, a, b));
        }
    }
    Ok(BalanceReport {
        schema_version: BALANCE_SCHEMA_VERSION,
        provenance: Provenance {
            report_id: report.report_id(),
            game: report.game,
            versions: report.versions(),
            columns: report.columns.clone(),
            thresholds,
        },
        curve,
        spikes,
        chance,
        similarity: similarity_table,
        notes,
    })
}

impl BalanceReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("balance report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn chance_versions(&self) -> Vec<u32> {
        self.chance
            .iter()
            .filter(|c| c.classification == ChanceClass::Chance)
            .map(|c| c.version)
            .collect()
    }

    /// Human-readable summary, one finding per line.
    pub fn summary_text(&self) -> String {
        let p = &self.provenance;
        let mut out = String::new();
        let game = p.game.map(|g| g.name()).unwrap_or("unnamed game");
        let _ = writeln!(out, "Balance summary for {game} (report {})", p.report_id);
        let _ = writeln!(
            out,
            "Thresholds: spike {}, chance {}",
            p.thresholds.spike, p.thresholds.chance
        );
        let curve: Vec<String> = self
            .curve
            .points
            .iter()
            .map(|pt| format!("v{} {:.2}", pt.version, pt.mean))
            .collect();
        let _ = writeln!(
            out,
            "Difficulty curve: {} (range {:.2})",
            curve.join(", "),
            self.curve.range
        );
        let _ = writeln!(out, "Difficulty spikes: {}", self.spikes.len());
        for s in &self.spikes {
            let _ = writeln!(
                out,
                "  v{}: {} than v{} (magnitude {:.3})",
                s.version,
                s.direction.name(),
                s.previous,
                s.magnitude
            );
        }
        let chance_lines: Vec<String> = self
            .chance
            .iter()
            .filter(|c| c.classification == ChanceClass::Chance)
            .map(|c| format!("v{} ({:.3})", c.version, c.chance_index))
            .collect();
        let _ = writeln!(
            out,
            "Depends more on luck than skill: {}",
            if chance_lines.is_empty() {
                "none".to_string()
            } else {
                chance_lines.join(", ")
            }
        );
        let skill: Vec<String> = self
            .chance
            .iter()
            .filter(|c| c.classification == ChanceClass::Skill)
            .map(|c| format!("v{} ({:.3})", c.version, c.chance_index))
            .collect();
        let _ = writeln!(
            out,
            "Depends more on skill than luck: {}",
            if skill.is_empty() {
                "none".to_string()
            } else {
                skill.join(", ")
            }
        );
        for s in &self.similarity {
            let value = match s.spearman {
                Some(r) => format!("{r:.3}"),
                None => format!(
                    "undefined ({})",
                    s.undefined_reason.as_deref().unwrap_or("unknown")
                ),
            };
            let _ = writeln!(out, "Similarity {} vs {}: {}", s.a, s.b, value);
        }
        for note in &self.notes {
            let _ = writeln!(out, "Note: {note}");
        }
        out
    }
}
