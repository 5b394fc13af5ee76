//! JSON instance documents and result files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{BoundReport, OracleResult, SweepRow};
use crate::learning::active::Envelope;
use crate::learning::{GpModel, GpModelData, LearnError, LinearQualityMap, QualityMap};
use crate::model::{Allocation, Cell, DomainSpec, MotionPlan, ModelError, PairOrder, ProblemDomain, Robot, Solution, Task, TaskNetwork, WorldMap, DEFAULT_ALPHA};
use crate::search::SearchStats;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: std::io::Error },
    #[error("{}line {line}, column {column}: {message}", origin.as_ref().map(|p| format!("{}: ", p.display())).unwrap_or_default())]
    Json {
        origin: Option<PathBuf>,
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("learned quality map {}: {source}", path.display())]
    Learned { path: PathBuf, source: LearnError },
    #[error("cannot serialize instance: {0}")]
    Unserializable(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IoError {
    fn json(origin: Option<&Path>, e: serde_json::Error) -> Self {
        let text = e.to_string();
        let message = match text.rsplit_once(" at line ") {
            Some((head, _)) => head.to_string(),
            None => text,
        };
        IoError::Json {
            origin: origin.map(Path::to_path_buf),
            line: e.line(),
            column: e.column(),
            message,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotDocument {
    pub traits: Vec<f64>,
    pub start: Cell,
    pub speed: f64,
}

/// Scalar output divisor, or one divisor per trait.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Normalizer {
    Scalar(f64),
    PerTrait(Vec<f64>),
}

impl Default for Normalizer {
    fn default() -> Self {
        Normalizer::Scalar(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum QualityMapDocument {
    Linear {
        weights: Vec<f64>,
        #[serde(default)]
        normalizer: Normalizer,
    },
    /// Path to a GP model file, relative to the instance file.
    Learned { model_path: PathBuf },
    Constant { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDocument {
    pub duration: f64,
    pub start_site: Cell,
    pub end_site: Cell,
    pub quality_map: QualityMapDocument,
}

fn default_cell_size() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    pub robots: Vec<RobotDocument>,
    pub tasks: Vec<TaskDocument>,
    #[serde(default)]
    pub precedence: Vec<[usize; 2]>,
    #[serde(default)]
    pub mutex: Vec<[usize; 2]>,
    pub map: Vec<String>,
    #[serde(default = "default_cell_size")]
    pub cell_size: f64,
    pub time_budget: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_m: Option<f64>,
}

/// A validated domain plus the document fields that do not live in it.
#[derive(Debug, Clone)]
pub struct LoadedInstance {
    pub domain: ProblemDomain,
    pub seed: Option<u64>,
}

pub fn read_instance(path: &Path) -> Result<LoadedInstance, IoError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })?;
    let doc: InstanceDocument = serde_json::from_str(&text).map_err(|e| IoError::json(Some(path), e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    Ok(LoadedInstance {
        seed: doc.seed,
        domain: domain_from_document(&doc, base)?,
    })
}

pub fn parse_instance(text: &str, base_dir: &Path) -> Result<LoadedInstance, IoError> {
    let doc: InstanceDocument = serde_json::from_str(text).map_err(|e| IoError::json(None, e))?;
    Ok(LoadedInstance {
        seed: doc.seed,
        domain: domain_from_document(&doc, base_dir)?,
    })
}

fn quality_map(doc: &QualityMapDocument, base_dir: &Path) -> Result<QualityMap, IoError> {
    let invalid = |e: LearnError| IoError::Model(ModelError::InvalidInput(e.to_string()));
    Ok(match doc {
        QualityMapDocument::Linear { weights, normalizer } => match normalizer {
            Normalizer::Scalar(s) => QualityMap::Linear(LinearQualityMap::new(weights.clone(), *s).map_err(invalid)?),
            Normalizer::PerTrait(div) => {
                if div.len() != weights.len() || div.iter().any(|d| !(*d > 0.0)) {
                    return Err(IoError::Model(ModelError::InvalidInput(format!(
                        "per-trait normalizer {div:?} must have {} positive entries",
                        weights.len()
                    ))));
                }
                let scaled = weights.iter().zip(div).map(|(w, d)| w / d).collect();
                QualityMap::Linear(LinearQualityMap::new(scaled, 1.0).map_err(invalid)?)
            }
        },
        QualityMapDocument::Constant { value } => QualityMap::Constant(*value),
        QualityMapDocument::Learned { model_path } => {
            let path = base_dir.join(model_path);
            let text = std::fs::read_to_string(&path).map_err(|source| IoError::File { path: path.clone(), source })?;
            let data: GpModelData = serde_json::from_str(&text).map_err(|e| IoError::json(Some(&path), e))?;
            let model = GpModel::from_data(data).map_err(|source| IoError::Learned { path: path.clone(), source })?;
            QualityMap::Learned {
                model,
                source: Some(model_path.clone()),
            }
        }
    })
}

pub fn domain_from_document(doc: &InstanceDocument, base_dir: &Path) -> Result<ProblemDomain, IoError> {
    let world = WorldMap::from_ascii(&doc.map, doc.cell_size)?;
    let robots = doc
        .robots
        .iter()
        .map(|r| Robot {
            traits: r.traits.clone(),
            start: r.start,
            speed: r.speed,
        })
        .collect();
    let tasks = doc
        .tasks
        .iter()
        .map(|t| Task {
            duration: t.duration,
            start_site: t.start_site,
            end_site: t.end_site,
        })
        .collect();
    let quality_maps = doc.tasks.iter().map(|t| quality_map(&t.quality_map, base_dir)).collect::<Result<Vec<_>, _>>()?;
    let pairs = |v: &[[usize; 2]]| v.iter().map(|p| (p[0], p[1])).collect();
    Ok(ProblemDomain::new(DomainSpec {
        network: TaskNetwork {
            tasks,
            precedence: pairs(&doc.precedence),
            mutex: pairs(&doc.mutex),
        },
        robots,
        quality_maps,
        world,
        time_budget: doc.time_budget,
        alpha: doc.alpha.unwrap_or(DEFAULT_ALPHA),
        big_m: doc.big_m,
    })?)
}

/// Serializes a domain. Learned maps must remember the path they came from.
pub fn document_from_domain(domain: &ProblemDomain, seed: Option<u64>) -> Result<InstanceDocument, IoError> {
    let tasks = domain
        .tasks()
        .iter()
        .zip(domain.quality_maps())
        .map(|(t, q)| {
            let quality_map = match q {
                QualityMap::Linear(m) => QualityMapDocument::Linear {
                    weights: m.weights().to_vec(),
                    normalizer: Normalizer::Scalar(m.normalizer()),
                },
                QualityMap::Constant(value) => QualityMapDocument::Constant { value: *value },
                QualityMap::Learned { source: Some(p), .. } => QualityMapDocument::Learned { model_path: p.clone() },
                QualityMap::Learned { source: None, .. } => {
                    return Err(IoError::Unserializable("learned quality map has no model file".into()));
                }
            };
            Ok(TaskDocument {
                duration: t.duration,
                start_site: t.start_site,
                end_site: t.end_site,
                quality_map,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let net = domain.network();
    Ok(InstanceDocument {
        robots: domain
            .robots()
            .iter()
            .map(|r| RobotDocument {
                traits: r.traits.clone(),
                start: r.start,
                speed: r.speed,
            })
            .collect(),
        tasks,
        precedence: net.precedence.iter().map(|&(i, j)| [i, j]).collect(),
        mutex: net.mutex.iter().map(|&(i, j)| [i, j]).collect(),
        map: domain.world().to_ascii(),
        cell_size: domain.world().cell_size(),
        time_budget: domain.time_budget(),
        alpha: Some(domain.alpha()),
        seed,
        big_m: domain.big_m_is_explicit().then(|| domain.big_m()),
    })
}

pub fn write_instance(path: &Path, doc: &InstanceDocument) -> Result<(), IoError> {
    write_json(path, doc)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| IoError::Unserializable(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub alpha: f64,
    pub time_budget: f64,
    pub worst_makespan: f64,
    pub big_m: f64,
    pub num_tasks: usize,
    pub num_robots: usize,
}

impl RunMetadata {
    pub fn of(domain: &ProblemDomain) -> Self {
        RunMetadata {
            alpha: domain.alpha(),
            time_budget: domain.time_budget(),
            worst_makespan: domain.worst_makespan(),
            big_m: domain.big_m(),
            num_tasks: domain.num_tasks(),
            num_robots: domain.num_robots(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionDocument {
    pub status: &'static str,
    pub metadata: RunMetadata,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allocation: Option<Allocation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_times: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub makespan: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orderings: Option<Vec<PairOrder>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_quality: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub naq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tbo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tetam: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub motion_plans: Option<Vec<MotionPlan>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_report: Option<BoundReport>,
    pub stats: SearchStats,
}

impl SolutionDocument {
    pub fn new(domain: &ProblemDomain, solution: Option<&Solution>, stats: &SearchStats) -> Self {
        let metadata = RunMetadata::of(domain);
        match solution {
            Some(s) => SolutionDocument {
                status: "solution",
                metadata,
                allocation: Some(s.allocation),
                start_times: Some(s.schedule.start_times.clone()),
                makespan: Some(s.schedule.makespan),
                orderings: Some(s.schedule.orderings.clone()),
                total_quality: Some(s.total_quality),
                naq: Some(s.naq),
                tbo: Some(s.tbo),
                tetam: Some(s.tetam),
                motion_plans: Some(s.motion_plans.clone()),
                bound_report: s.bound_report.clone(),
                stats: stats.clone(),
            },
            None => SolutionDocument {
                status: "infeasible",
                metadata,
                allocation: None,
                start_times: None,
                makespan: None,
                orderings: None,
                total_quality: None,
                naq: None,
                tbo: None,
                tetam: None,
                motion_plans: None,
                bound_report: None,
                stats: stats.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleDocument {
    pub metadata: RunMetadata,
    pub q_root: f64,
    pub q_null: f64,
    #[serde(flatten)]
    pub result: OracleResult,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const SWEEP_COLUMNS: [&str; 8] = [
    "alpha",
    "quality",
    "makespan",
    "norm_gap",
    "norm_apriori_bound",
    "norm_posthoc_bound",
    "holds_apriori",
    "holds_posthoc",
];

pub fn write_sweep_csv<W: std::io::Write>(writer: W, rows: &[SweepRow]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SWEEP_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.alpha.to_string(),
            opt(r.quality),
            opt(r.makespan),
            opt(r.norm_gap),
            r.norm_apriori_bound.to_string(),
            opt(r.norm_posthoc_bound),
            opt(r.holds_apriori),
            opt(r.holds_posthoc),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const LEARNING_COLUMNS: [&str; 7] = ["strategy", "seed", "step", "rmse", "envelope_min", "envelope_mean", "envelope_max"];

/// One strategy's traces. `seeds` is empty for the seed-free entropy run.
#[derive(Debug, Clone)]
pub struct LearningCurve<'a> {
    pub strategy: &'a str,
    pub seeds: Vec<Option<u64>>,
    pub traces: Vec<Vec<f64>>,
    pub envelope: Option<&'a Envelope>,
}

/// Rows are `(strategy, seed, step, rmse)`; uniform rows repeat the
/// per-step envelope over all seeds.
pub fn write_learning_curve_csv<W: std::io::Write>(writer: W, curves: &[LearningCurve<'_>]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(LEARNING_COLUMNS)?;
    for c in curves {
        for (seed, trace) in c.seeds.iter().zip(&c.traces) {
            for (k, rmse) in trace.iter().enumerate() {
                let env = |v: Option<&Vec<f64>>| v.and_then(|e| e.get(k)).map(|x| x.to_string()).unwrap_or_default();
                w.write_record([
                    c.strategy.to_string(),
                    opt(*seed),
                    (k + 1).to_string(),
                    rmse.to_string(),
                    env(c.envelope.map(|e| &e.min)),
                    env(c.envelope.map(|e| &e.mean)),
                    env(c.envelope.map(|e| &e.max)),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
