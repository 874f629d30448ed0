//! The testing protocol: every player plays every version for a fixed number
//! of timed runs, and each cell of the resulting matrix is the median score
//! over those runs.
//!
//! Agents and the random baseline are run here. Humans are never simulated:
//! their sessions are recorded by the play server, imported, and slotted
//! into the matrix. A player with nothing to contribute leaves its cell
//! explicitly missing, and the rest of the evaluation goes on.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Game;
use crate::games::VersionSpec;
use crate::rl::{ActMode, Model, RandomPolicy, Skill, TrainError, TrainedAgent};
use crate::rng::{derive_indexed, derive_seed, fnv1a};
use crate::session::{self, PlayerInfo, SessionError, SessionKind, SessionRecord, TestParams};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("median of an empty list")]
    EmptyMedian,
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Env(#[from] crate::env::EnvError),
    #[error("unknown player column {0:?}")]
    UnknownColumn(String),
    #[error("{column} cell for v{version} was given a {found} checkpoint")]
    WrongCheckpoint {
        version: u32,
        column: PlayerColumn,
        found: String,
    },
    #[error("session {player} (v{version}) does not belong in the {column} cell: {reason}")]
    SessionMismatch {
        player: String,
        version: u32,
        column: PlayerColumn,
        reason: String,
    },
    #[error("malformed report: {0}")]
    Malformed(String),
    #[error("report schema version {found} is not supported (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Median; for an even count, the mean of the two middle values. With two
/// runs per cell the median is therefore just their mean.
pub fn median(values: &[f64]) -> Result<f64, EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptyMedian);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    })
}

/// The seven player columns of a score matrix, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlayerColumn {
    HumanPro,
    HumanNovice,
    PpoPro,
    PpoNovice,
    A2cPro,
    A2cNovice,
    Random,
}

/// Columns grouped by who plays, skill levels merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlayerGroup {
    Human,
    Ppo,
    A2c,
    Random,
}

impl PlayerGroup {
    pub const ALL: [PlayerGroup; 4] = [
        PlayerGroup::Human,
        PlayerGroup::Ppo,
        PlayerGroup::A2c,
        PlayerGroup::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlayerGroup::Human => "Human",
            PlayerGroup::Ppo => "PPO",
            PlayerGroup::A2c => "A2C",
            PlayerGroup::Random => "Random",
        }
    }

    pub fn columns(self) -> &'static [PlayerColumn] {
        use PlayerColumn::*;
        match self {
            PlayerGroup::Human => &[HumanPro, HumanNovice],
            PlayerGroup::Ppo => &[PpoPro, PpoNovice],
            PlayerGroup::A2c => &[A2cPro, A2cNovice],
            PlayerGroup::Random => &[Random],
        }
    }
}

impl fmt::Display for PlayerGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl PlayerColumn {
    pub const ALL: [PlayerColumn; 7] = [
        PlayerColumn::HumanPro,
        PlayerColumn::HumanNovice,
        PlayerColumn::PpoPro,
        PlayerColumn::PpoNovice,
        PlayerColumn::A2cPro,
        PlayerColumn::A2cNovice,
        PlayerColumn::Random,
    ];

    /// Table heading, e.g. `PPO-Pro`.
    pub fn label(self) -> &'static str {
        match self {
            PlayerColumn::HumanPro => "Human-Pro",
            PlayerColumn::HumanNovice => "Human-Novice",
            PlayerColumn::PpoPro => "PPO-Pro",
            PlayerColumn::PpoNovice => "PPO-Novice",
            PlayerColumn::A2cPro => "A2C-Pro",
            PlayerColumn::A2cNovice => "A2C-Novice",
            PlayerColumn::Random => "Random",
        }
    }

    /// Lowercase identifier used in file names and seeds.
    pub fn key(self) -> &'static str {
        match self {
            PlayerColumn::HumanPro => "human-pro",
            PlayerColumn::HumanNovice => "human-novice",
            PlayerColumn::PpoPro => "ppo-pro",
            PlayerColumn::PpoNovice => "ppo-novice",
            PlayerColumn::A2cPro => "a2c-pro",
            PlayerColumn::A2cNovice => "a2c-novice",
            PlayerColumn::Random => "random",
        }
    }

    pub fn group(self) -> PlayerGroup {
        match self {
            PlayerColumn::HumanPro | PlayerColumn::HumanNovice => PlayerGroup::Human,
            PlayerColumn::PpoPro | PlayerColumn::PpoNovice => PlayerGroup::Ppo,
            PlayerColumn::A2cPro | PlayerColumn::A2cNovice => PlayerGroup::A2c,
            PlayerColumn::Random => PlayerGroup::Random,
        }
    }

    pub fn skill(self) -> Option<Skill> {
        match self {
            PlayerColumn::HumanPro | PlayerColumn::PpoPro | PlayerColumn::A2cPro => {
                Some(Skill::Professional)
            }
            PlayerColumn::HumanNovice | PlayerColumn::PpoNovice | PlayerColumn::A2cNovice => {
                Some(Skill::Novice)
            }
            PlayerColumn::Random => None,
        }
    }

    pub fn model(self) -> Option<Model> {
        match self.group() {
            PlayerGroup::Ppo => Some(Model::Ppo),
            PlayerGroup::A2c => Some(Model::A2c),
            _ => None,
        }
    }

    pub fn session_kind(self) -> SessionKind {
        match self.group() {
            PlayerGroup::Human => SessionKind::Human,
            PlayerGroup::Random => SessionKind::Random,
            _ => SessionKind::AiPlay,
        }
    }

    /// Humans and trained agents carry skill; the random agent does not.
    pub fn is_skill_bearing(self) -> bool {
        self != PlayerColumn::Random
    }

    pub fn agent(model: Model, skill: Skill) -> Self {
        match (model, skill) {
            (Model::Ppo, Skill::Professional) => PlayerColumn::PpoPro,
            (Model::Ppo, Skill::Novice) => PlayerColumn::PpoNovice,
            (Model::A2c, Skill::Professional) => PlayerColumn::A2cPro,
            (Model::A2c, Skill::Novice) => PlayerColumn::A2cNovice,
        }
    }

    pub fn human(skill: Skill) -> Self {
        match skill {
            Skill::Professional => PlayerColumn::HumanPro,
            Skill::Novice => PlayerColumn::HumanNovice,
        }
    }

    /// The column a logged session counts towards, from its header alone.
    pub fn for_session(record: &SessionRecord) -> Option<Self> {
        let h = &record.header;
        match h.session_kind {
            SessionKind::Random => Some(PlayerColumn::Random),
            SessionKind::Human => h.skill.map(PlayerColumn::human),
            SessionKind::AiPlay => Some(PlayerColumn::agent(h.model?, h.skill?)),
        }
    }
}

impl fmt::Display for PlayerColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PlayerColumn {
    type Err = EvalError;

    /// Accepts either the table heading or the key, case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_ascii_lowercase();
        PlayerColumn::ALL
            .into_iter()
            .find(|c| c.key() == wanted || c.label().to_ascii_lowercase() == wanted)
            .ok_or_else(|| EvalError::UnknownColumn(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub column: PlayerColumn,
    /// Median score over `scores`; `None` exactly when the cell is missing.
    pub median: Option<f64>,
    /// Individual session scores, in run order. Empty for tables imported
    /// without per-run data.
    #[serde(default)]
    pub scores: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing: Option<String>,
}

impl Cell {
    pub fn from_scores(column: PlayerColumn, scores: Vec<i64>) -> Result<Self, EvalError> {
        let values: Vec<f64> = scores.iter().map(|&s| s as f64).collect();
        Ok(Self {
            column,
            median: Some(median(&values)?),
            scores,
            missing: None,
        })
    }

    pub fn missing(column: PlayerColumn, reason: impl Into<String>) -> Self {
        Self {
            column,
            median: None,
            scores: Vec::new(),
            missing: Some(reason.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub version: u32,
    pub cells: Vec<Cell>,
}

/// Median scores indexed by (version, player column).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    #[serde(default)]
    pub game: Option<Game>,
    #[serde(default)]
    pub time_s: Option<u32>,
    #[serde(default)]
    pub runs: Option<u32>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub columns: Vec<PlayerColumn>,
    pub rows: Vec<ReportRow>,
}

impl EvaluationReport {
    /// A bare matrix with no run provenance, as read from a table.
    pub fn from_matrix(
        columns: Vec<PlayerColumn>,
        rows: Vec<(u32, Vec<Option<f64>>)>,
    ) -> Result<Self, EvalError> {
        let mut out = Vec::with_capacity(rows.len());
        for (version, values) in rows {
            if values.len() != columns.len() {
                return Err(EvalError::Malformed(format!(
                    "v{version} has {} cells for {} columns",
                    values.len(),
                    columns.len()
                )));
            }
            let cells = columns
                .iter()
                .zip(values)
                .map(|(&column, v)| match v {
                    Some(m) => Cell {
                        column,
                        median: Some(m),
                        scores: Vec::new(),
                        missing: None,
                    },
                    None => Cell::missing(column, "not reported"),
                })
                .collect();
            out.push(ReportRow { version, cells });
        }
        let report = Self {
            schema_version: REPORT_SCHEMA_VERSION,
            game: None,
            time_s: None,
            runs: None,
            seed: None,
            columns,
            rows: out,
        };
        report.validate()?;
        Ok(report)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.schema_version != REPORT_SCHEMA_VERSION {
            return Err(EvalError::SchemaVersion {
                found: self.schema_version,
                expected: REPORT_SCHEMA_VERSION,
            });
        }
        let mut seen = self.columns.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.columns.len() {
            return Err(EvalError::Malformed("duplicate player column".into()));
        }
        let mut versions = Vec::new();
        for row in &self.rows {
            if versions.contains(&row.version) {
                return Err(EvalError::Malformed(format!("duplicate row v{}", row.version)));
            }
            versions.push(row.version);
            let columns: Vec<PlayerColumn> = row.cells.iter().map(|c| c.column).collect();
            if columns != self.columns {
                return Err(EvalError::Malformed(format!(
                    "row v{} does not have exactly the report's columns",
                    row.version
                )));
            }
            for cell in &row.cells {
                match (cell.median, &cell.missing) {
                    (Some(m), None) if m.is_finite() => {}
                    (None, Some(_)) => {}
                    _ => {
                        return Err(EvalError::Malformed(format!(
                            "v{} {}: a cell is either a finite median or missing",
                            row.version, cell.column
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn versions(&self) -> Vec<u32> {
        self.rows.iter().map(|r| r.version).collect()
    }

    pub fn row(&self, version: u32) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.version == version)
    }

    pub fn cell(&self, version: u32, column: PlayerColumn) -> Option<&Cell> {
        self.row(version)?.cells.iter().find(|c| c.column == column)
    }

    /// The median for a cell, `None` if absent or missing.
    pub fn value(&self, version: u32, column: PlayerColumn) -> Option<f64> {
        self.cell(version, column)?.median
    }

    /// Content hash, stable across runs, used to tie findings to their input.
    pub fn report_id(&self) -> String {
        format!("{:016x}", fnv1a(&self.to_json()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let report: Self = serde_json::from_str(text)?;
        report.validate()?;
        Ok(report)
    }

    /// Rows are versions, columns are players; missing cells are empty.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut heading = vec!["version".to_string()];
        heading.extend(self.columns.iter().map(|c| c.label().to_string()));
        w.write_record(&heading).expect("writing to memory");
        for row in &self.rows {
            let mut record = vec![format!("v{}", row.version)];
            record.extend(
                row.cells
                    .iter()
                    .map(|c| c.median.map(|m| m.to_string()).unwrap_or_default()),
            );
            w.write_record(&record).expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
    }

    /// Reads a score table: a `version` column (`v3` or `3`) followed by
    /// player columns. Empty, `NA` or `-` cells are missing.
    pub fn from_csv(text: &str) -> Result<Self, EvalError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        let mut headings = headers.iter();
        match headings.next() {
            Some(h) if h.eq_ignore_ascii_case("version") => {}
            _ => {
                return Err(EvalError::Malformed(
                    "first column must be `version`".into(),
                ))
            }
        }
        let columns = headings
            .map(PlayerColumn::from_str)
            .collect::<Result<Vec<_>, _>>()?;
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            let raw = record.get(0).unwrap_or_default();
            let version = raw
                .trim_start_matches(['v', 'V'])
                .parse::<u32>()
                .map_err(|_| EvalError::Malformed(format!("bad version {raw:?}")))?;
            let values = record
                .iter()
                .skip(1)
                .map(|field| match field {
                    "" | "NA" | "-" => Ok(None),
                    v => v.parse::<f64>().map(Some).map_err(|_| {
                        EvalError::Malformed(format!("v{version}: bad score {v:?}"))
                    }),
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push((version, values));
        }
        Self::from_matrix(columns, rows)
    }
}

/// What to evaluate and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationPlan {
    pub game: Game,
    pub versions: Vec<u32>,
    pub columns: Vec<PlayerColumn>,
    pub time_s: u32,
    pub runs: u32,
    pub seed: u64,
    #[serde(default)]
    pub act_mode: ActMode,
}

impl EvaluationPlan {
    /// Every shipped version, every column, the default session protocol.
    pub fn full(game: Game, seed: u64) -> Self {
        Self {
            game,
            versions: (1..=VersionSpec::num_versions(game)).collect(),
            columns: PlayerColumn::ALL.to_vec(),
            time_s: session::DEFAULT_TIME_S,
            runs: session::DEFAULT_RUNS,
            seed,
            act_mode: ActMode::Sample,
        }
    }

    /// Seed for one run of one cell. Each cell draws from its own stream so
    /// adding or removing players never shifts anyone else's sessions.
    pub fn cell_seed(&self, version: u32, column: PlayerColumn, run: u32) -> u64 {
        let v = derive_indexed(self.seed, "version", u64::from(version));
        derive_indexed(derive_seed(v, column.key()), "run", u64::from(run))
    }

    pub fn test_params(&self, version: u32, column: PlayerColumn, run: u32) -> TestParams {
        TestParams {
            time_s: self.time_s,
            runs: self.runs,
            session_kind: column.session_kind(),
            skill: column.skill(),
            version,
            seed: self.cell_seed(version, column, run),
        }
    }
}

/// The players available to an evaluation. Random needs no entry.
#[derive(Debug, Clone, Default)]
pub struct Roster {
    pub agents: BTreeMap<(u32, PlayerColumn), TrainedAgent>,
    pub humans: BTreeMap<(u32, PlayerColumn), Vec<SessionRecord>>,
}

impl Roster {
    pub fn add_agent(&mut self, version: u32, agent: TrainedAgent) {
        let column = PlayerColumn::agent(agent.model, agent.skill);
        self.agents.insert((version, column), agent);
    }

    /// Files an imported human session under its version and skill.
    pub fn add_human(&mut self, record: SessionRecord) -> Result<(), EvalError> {
        let column = PlayerColumn::for_session(&record)
            .filter(|c| c.group() == PlayerGroup::Human)
            .ok_or_else(|| EvalError::SessionMismatch {
                player: record.header.player_id.clone(),
                version: record.header.version,
                column: PlayerColumn::HumanNovice,
                reason: "not a skill-tagged human session".into(),
            })?;
        self.humans
            .entry((record.header.version, column))
            .or_default()
            .push(record);
        Ok(())
    }
}

/// A finished evaluation: the report and every session behind it.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvaluationReport,
    pub sessions: Vec<SessionRecord>,
}

pub fn run_evaluation(plan: &EvaluationPlan, roster: &Roster) -> Result<Evaluation, EvalError> {
    let mut sessions = Vec::new();
    let mut rows = Vec::new();
    for &version in &plan.versions {
        let spec = VersionSpec::shipped(plan.game, version)?;
        let mut cells = Vec::new();
        for &column in &plan.columns {
            let played = match column.group() {
                PlayerGroup::Human => human_cell(plan, roster, version, column)?,
                PlayerGroup::Random => Some(random_cell(plan, &spec, version)?),
                _ => agent_cell(plan, roster, &spec, version, column)?,
            };
            cells.push(match played {
                Some(records) => {
                    let scores = records.iter().map(|r| r.score).collect();
                    sessions.extend(records);
                    Cell::from_scores(column, scores)?
                }
                None => Cell::missing(
                    column,
                    match column.group() {
                        PlayerGroup::Human => "no imported human sessions",
                        _ => "no checkpoint",
                    },
                ),
            });
        }
        rows.push(ReportRow { version, cells });
    }
    let report = EvaluationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        game: Some(plan.game),
        time_s: Some(plan.time_s),
        runs: Some(plan.runs),
        seed: Some(plan.seed),
        columns: plan.columns.clone(),
        rows,
    };
    report.validate()?;
    Ok(Evaluation { report, sessions })
}

fn random_cell(
    plan: &EvaluationPlan,
    spec: &VersionSpec,
    version: u32,
) -> Result<Vec<SessionRecord>, EvalError> {
    let actions = spec.make_env()?.actions().len();
    (0..plan.runs)
        .map(|run| {
            let params = plan.test_params(version, PlayerColumn::Random, run);
            let mut policy = RandomPolicy::new(actions, params.seed);
            Ok(session::run_session(
                spec,
                &mut policy,
                PlayerInfo::random(),
                &params,
            )?)
        })
        .collect()
}

fn agent_cell(
    plan: &EvaluationPlan,
    roster: &Roster,
    spec: &VersionSpec,
    version: u32,
    column: PlayerColumn,
) -> Result<Option<Vec<SessionRecord>>, EvalError> {
    let Some(agent) = roster.agents.get(&(version, column)) else {
        return Ok(None);
    };
    if PlayerColumn::agent(agent.model, agent.skill) != column {
        return Err(EvalError::WrongCheckpoint {
            version,
            column,
            found: format!("{}-{}", agent.model.name(), agent.skill.name()),
        });
    }
    let env = spec.make_env()?;
    let records = (0..plan.runs)
        .map(|run| {
            let params = plan.test_params(version, column, run);
            let mut policy = agent.policy(env.as_ref(), plan.act_mode, params.seed)?;
            Ok(session::run_session(
                spec,
                &mut policy,
                PlayerInfo::agent(agent.model, agent.skill),
                &params,
            )?)
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(Some(records))
}

fn human_cell(
    plan: &EvaluationPlan,
    roster: &Roster,
    version: u32,
    column: PlayerColumn,
) -> Result<Option<Vec<SessionRecord>>, EvalError> {
    let Some(records) = roster.humans.get(&(version, column)).filter(|r| !r.is_empty()) else {
        return Ok(None);
    };
    for r in records {
        let h = &r.header;
        let reason = if h.game != plan.game {
            Some(format!("recorded on {}", h.game))
        } else if h.version != version {
            Some(format!("recorded on v{}", h.version))
        } else if PlayerColumn::for_session(r) != Some(column) {
            Some("wrong skill tag".to_string())
        } else {
            None
        };
        if let Some(reason) = reason {
            return Err(EvalError::SessionMismatch {
                player: h.player_id.clone(),
                version,
                column,
                reason,
            });
        }
    }
    Ok(Some(records.clone()))
}

/// Rebuilds the score matrix from session logs alone. Cells with no logs
/// are missing.
pub fn report_from_sessions(
    plan: &EvaluationPlan,
    sessions: &[SessionRecord],
) -> Result<EvaluationReport, EvalError> {
    let mut scores: BTreeMap<(u32, PlayerColumn), Vec<i64>> = BTreeMap::new();
    for record in sessions.iter().filter(|r| r.header.game == plan.game) {
        if let Some(column) = PlayerColumn::for_session(record) {
            scores
                .entry((record.header.version, column))
                .or_default()
                .push(record.score);
        }
    }
    let rows = plan
        .versions
        .iter()
        .map(|&version| {
            let cells = plan
                .columns
                .iter()
                .map(|&column| match scores.remove(&(version, column)) {
                    Some(s) => Cell::from_scores(column, s),
                    None => Ok(Cell::missing(column, "no sessions")),
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ReportRow { version, cells })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(EvaluationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        game: Some(plan.game),
        time_s: Some(plan.time_s),
        runs: Some(plan.runs),
        seed: Some(plan.seed),
        columns: plan.columns.clone(),
        rows,
    })
}

impl Evaluation {
    /// Writes `report.json`, `report.csv` and one log per session under
    /// `sessions/`. Returns the session log paths in evaluation order.
    pub fn persist(&self, dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
        let session_dir = dir.join("sessions");
        std::fs::create_dir_all(&session_dir)?;
        std::fs::write(dir.join("report.json"), self.report.to_json())?;
        std::fs::write(dir.join("report.csv"), self.report.to_csv())?;
        let mut counters: BTreeMap<(u32, String), u32> = BTreeMap::new();
        let mut paths = Vec::with_capacity(self.sessions.len());
        for record in &self.sessions {
            let column = PlayerColumn::for_session(record)
                .map(|c| c.key().to_string())
                .unwrap_or_else(|| record.header.player_id.clone());
            let n = counters
                .entry((record.header.version, column.clone()))
                .or_default();
            let path = session_dir.join(format!(
                "{}-v{}-{}-{}.jsonl",
                record.header.game, record.header.version, column, n
            ));
            *n += 1;
            record.save(&path)?;
            paths.push(path);
        }
        Ok(paths)
    }
}

/// Loads every `*.jsonl` log in a directory, in file-name order.
pub fn load_sessions(dir: &Path) -> Result<Vec<SessionRecord>, EvalError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| Ok(SessionRecord::load(p)?))
        .collect()
}
