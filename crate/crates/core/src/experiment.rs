//! Experiment driver: JSON configs, pretraining, the efficiency, κ and
//! alignment studies, and their CSV/JSON outputs.
//!
//! Every random stream is a child of the per-seed master seed, so a given
//! `(config, seed)` produces the same numbers with any worker count. Rows
//! are sorted before they are written.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{self, evaluate_start, subspace_alignment, Policy};
use crate::exec::Execution;
use crate::gridworld::{GridConfig, GridLayout, GridWorld, TaskDistribution};
use crate::linalg::Matrix;
use crate::persist;
use crate::representation::{train, LearnedRepresentation, SamplePlan, TrainConfig};
use crate::sampling::{lafa_kappa, BasisMode, SamplingDistribution};
use crate::seed::{self, tag};
use crate::transfer::{transfer, transfer_with_bases, GreedyPolicy, TransferConfig, DEFAULT_TRANSFER_LAMBDA};

/// Header of `results.csv`.
pub const RESULTS_HEADER: &str =
    "run_id,study,method,pretrain_N,n,seed,level,mean_return,stderr,kappa,alignment_aggregate,wall_time_s";

/// Header of `alignment.csv`.
pub const ALIGNMENT_HEADER: &str = "seed,pretrain_N,level,coordinate,action,informative,norm";

fn default_lambda() -> f64 {
    DEFAULT_TRANSFER_LAMBDA
}

fn default_mode() -> BasisMode {
    BasisMode::Balanced
}

fn default_episodes() -> usize {
    2000
}

fn default_reach_fraction() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Map file, relative to the config file's directory.
    pub grid: PathBuf,
    /// Expected number of vacant cells; checked against the map when given.
    #[serde(default)]
    pub num_states: Option<usize>,
    pub obs_dim: usize,
    pub horizon: usize,
    /// Number of training tasks `T`.
    pub tasks: usize,
    /// Pretraining sample counts `N` per task and level.
    pub pretrain_n: Vec<usize>,
    /// Transfer and scratch sample counts `n` per level, ascending.
    pub n_sweep: Vec<usize>,
    /// Representation rank `d`.
    pub rank: usize,
    /// Bound σ of the uniform reward noise.
    #[serde(default)]
    pub reward_noise: f64,
    /// Observation noise standard deviation σ′.
    pub noise_std: f64,
    /// Deviation probability of the evaluation task.
    pub p_eval: f64,
    /// Ridge parameter for transfer and scratch regressions.
    #[serde(default = "default_lambda")]
    pub ridge_lambda: f64,
    /// Ridge parameter for pretraining; defaults to `ridge_lambda`.
    #[serde(default)]
    pub train_lambda: Option<f64>,
    #[serde(default = "default_mode")]
    pub dist_mode: BasisMode,
    pub seeds: Vec<u64>,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default)]
    pub task_distribution: TaskDistribution,
    /// Level reported by the alignment diagnostic; defaults to `⌈H/2⌉`.
    #[serde(default)]
    pub alignment_level: Option<usize>,
    /// Fraction of the optimal start value that counts as reached.
    #[serde(default = "default_reach_fraction")]
    pub reach_fraction: f64,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, &base)
    }

    /// Parses a config whose relative paths resolve against `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn grid_path(&self) -> PathBuf {
        self.base_dir.join(&self.grid)
    }

    pub fn train_lambda(&self) -> f64 {
        self.train_lambda.unwrap_or(self.ridge_lambda)
    }

    pub fn alignment_level(&self) -> usize {
        self.alignment_level.unwrap_or(self.horizon.div_ceil(2))
    }

    /// Keeps only `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seeds = vec![seed];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("obs_dim", self.obs_dim),
            ("horizon", self.horizon),
            ("tasks", self.tasks),
            ("rank", self.rank),
            ("episodes", self.episodes),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.seeds.is_empty() || self.n_sweep.is_empty() || self.pretrain_n.is_empty() {
            return Err(Error::Config(
                "seeds, n_sweep and pretrain_n must be non-empty".into(),
            ));
        }
        if self.n_sweep.contains(&0) || self.pretrain_n.contains(&0) {
            return Err(Error::Config("sample counts must be positive".into()));
        }
        if self.n_sweep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_sweep must be strictly ascending".into()));
        }
        if !(0.0..=1.0).contains(&self.p_eval) {
            return Err(Error::Config(format!("p_eval {} outside [0, 1]", self.p_eval)));
        }
        if !(self.noise_std >= 0.0 && self.reward_noise >= 0.0) {
            return Err(Error::Config("noise levels must be >= 0".into()));
        }
        if !(self.ridge_lambda >= 0.0 && self.train_lambda() >= 0.0) {
            return Err(Error::Config("ridge parameters must be >= 0".into()));
        }
        if !(self.reach_fraction > 0.0 && self.reach_fraction <= 1.0) {
            return Err(Error::Config("reach_fraction must lie in (0, 1]".into()));
        }
        let h = self.alignment_level();
        if h == 0 || h > self.horizon {
            return Err(Error::Config(format!(
                "alignment level {h} outside 1..={}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// Loads the map and builds the evaluation task and sampling design.
    pub fn setup(&self) -> Result<Setup> {
        let layout = GridLayout::load(self.grid_path())?;
        if let Some(k) = self.num_states {
            if layout.num_vacant() != k {
                return Err(Error::Config(format!(
                    "map has {} vacant cells, config expects {k}",
                    layout.num_vacant()
                )));
            }
        }
        let base = GridConfig {
            layout,
            obs_dim: self.obs_dim,
            noise_std: self.noise_std,
            deviation_prob: self.p_eval,
            horizon: self.horizon,
            reward_noise: self.reward_noise,
        };
        let eval_world = GridWorld::new(base.clone())?;
        let dist = SamplingDistribution::barycentric_basis(&eval_world, self.dist_mode)?;
        let optimal_start = evaluation::OraclePolicy::new(&eval_world)?
            .values()
            .value(1, eval_world.start_state());
        Ok(Setup {
            base,
            eval_world,
            dist,
            optimal_start,
        })
    }
}

/// Objects shared by all cells of a study.
#[derive(Debug, Clone)]
pub struct Setup {
    pub base: GridConfig,
    pub eval_world: GridWorld,
    pub dist: SamplingDistribution,
    /// `V*_1(start)` of the evaluation task.
    pub optimal_start: f64,
}

impl Setup {
    /// Return level counted as reaching the oracle.
    pub fn threshold(&self, fraction: f64) -> f64 {
        self.optimal_start - (1.0 - fraction) * self.optimal_start.abs()
    }

    /// The `T` training tasks for `seed`.
    pub fn training_tasks(&self, config: &ExperimentConfig, seed: u64) -> Result<Vec<GridWorld>> {
        let mut rng = seed::child_rng(seed, &[tag::TASKS]);
        (0..config.tasks)
            .map(|_| GridWorld::new(config.task_distribution.sample(&self.base, &mut rng)?))
            .collect()
    }
}

/// One line of `results.csv`. Inapplicable numeric fields are `None` and
/// written as empty cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run_id: String,
    pub study: String,
    pub method: String,
    pub pretrain_n: usize,
    pub n: usize,
    pub seed: u64,
    /// A level number or `aggregate`.
    pub level: String,
    pub mean_return: Option<f64>,
    pub stderr: Option<f64>,
    pub kappa: Option<f64>,
    pub alignment_aggregate: Option<f64>,
    pub wall_time_s: f64,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt(field: &str) -> std::result::Result<Option<f64>, std::num::ParseFloatError> {
    if field.is_empty() {
        Ok(None)
    } else {
        field.parse().map(Some)
    }
}

impl ResultRow {
    pub fn to_csv(&self) -> String {
        [
            self.run_id.clone(),
            self.study.clone(),
            self.method.clone(),
            self.pretrain_n.to_string(),
            self.n.to_string(),
            self.seed.to_string(),
            self.level.clone(),
            fmt_opt(self.mean_return),
            fmt_opt(self.stderr),
            fmt_opt(self.kappa),
            fmt_opt(self.alignment_aggregate),
            self.wall_time_s.to_string(),
        ]
        .join(",")
    }

    pub fn from_csv(line: &str, line_no: usize) -> Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        let err = |m: String| Error::Parse {
            line: line_no,
            message: m,
        };
        if f.len() != 12 {
            return Err(err(format!("expected 12 fields, found {}", f.len())));
        }
        let num = |i: usize| f[i].parse::<u64>().map_err(|e| err(format!("field {i}: {e}")));
        let real = |i: usize| parse_opt(f[i]).map_err(|e| err(format!("field {i}: {e}")));
        Ok(ResultRow {
            run_id: f[0].into(),
            study: f[1].into(),
            method: f[2].into(),
            pretrain_n: num(3)? as usize,
            n: num(4)? as usize,
            seed: num(5)?,
            level: f[6].into(),
            mean_return: real(7)?,
            stderr: real(8)?,
            kappa: real(9)?,
            alignment_aggregate: real(10)?,
            wall_time_s: real(11)?.unwrap_or(0.0),
        })
    }

    fn sort_key(&self) -> (&str, &str, usize, usize, u64, &str) {
        (
            &self.study,
            &self.method,
            self.pretrain_n,
            self.n,
            self.seed,
            &self.level,
        )
    }
}

pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut rows = rows.to_vec();
    sort_rows(&mut rows);
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in &rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

pub fn parse_results_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == RESULTS_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "unexpected results header".into(),
            })
        }
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| ResultRow::from_csv(l, i + 2))
        .collect()
}

/// Seed-averaged return per `n` for one curve, ascending in `n`.
pub fn seed_means(rows: &[ResultRow], method: &str, pretrain_n: usize) -> Vec<(usize, f64)> {
    let mut by_n: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for r in rows {
        if r.method == method && r.pretrain_n == pretrain_n {
            if let Some(v) = r.mean_return {
                by_n.entry(r.n).or_default().push(v);
            }
        }
    }
    by_n.into_iter()
        .map(|(n, v)| (n, evaluation::pairwise_sum(&v) / v.len() as f64))
        .collect()
}

/// Smallest `n` from which the seed-averaged return stays at or above
/// `threshold` for every larger `n` in the sweep.
pub fn n_reach(curve: &[(usize, f64)], threshold: f64) -> Option<usize> {
    let mut reach = None;
    for &(n, v) in curve.iter().rev() {
        if v >= threshold {
            reach = Some(n);
        } else {
            break;
        }
    }
    reach
}

/// A representation pretrained for one seed and sample count.
#[derive(Debug, Clone)]
pub struct Pretrained {
    pub seed: u64,
    pub pretrain_n: usize,
    pub rep: LearnedRepresentation,
    pub wall_time_s: f64,
}

/// Runs multitask training for `seed` with `n` samples per task and level.
pub fn pretrain(
    config: &ExperimentConfig,
    setup: &Setup,
    seed: u64,
    n: usize,
    exec: Execution,
) -> Result<Pretrained> {
    let clock = Instant::now();
    let tasks = setup.training_tasks(config, seed)?;
    let tc = TrainConfig {
        samples: SamplePlan::Iid(n),
        rank: config.rank,
        ridge_lambda: config.train_lambda(),
        seed: seed::child(seed, &[tag::TRAIN, n as u64]),
        min_norm_fallback: config.train_lambda() == 0.0,
    };
    let rep = train(&tasks, &setup.dist, &tc, exec)?;
    Ok(Pretrained {
        seed,
        pretrain_n: n,
        rep,
        wall_time_s: clock.elapsed().as_secs_f64(),
    })
}

/// Pretrains every `(seed, N)` pair of the config.
pub fn pretrain_all(config: &ExperimentConfig, setup: &Setup, exec: Execution) -> Result<Vec<Pretrained>> {
    let pairs: Vec<(u64, usize)> = config
        .seeds
        .iter()
        .flat_map(|&s| config.pretrain_n.iter().map(move |&n| (s, n)))
        .collect();
    exec.try_map(pairs.len(), |i| {
        pretrain(config, setup, pairs[i].0, pairs[i].1, exec)
    })
}

/// Largest closed-form κ over the levels of a representation.
fn worst_kappa(bases: &[Matrix], dist: &SamplingDistribution) -> Result<f64> {
    bases
        .iter()
        .map(|b| lafa_kappa(b, dist).map(|k| k.kappa))
        .try_fold(0.0_f64, |acc, k| k.map(|k| acc.max(k)))
}

fn eval_seed(seed: u64) -> u64 {
    seed::child(seed, &[tag::EVAL])
}

fn run_id(study: &str, method: &str, pretrain_n: usize, n: usize, seed: u64) -> String {
    format!("{study}-{method}-N{pretrain_n}-n{n}-s{seed}")
}

fn evaluate_row<P: Policy>(
    policy: &P,
    setup: &Setup,
    config: &ExperimentConfig,
    seed: u64,
    exec: Execution,
) -> Result<(f64, f64)> {
    evaluate_start(policy, &setup.eval_world, config.episodes, eval_seed(seed), exec)
}

/// Curve summary written to `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub method: String,
    pub pretrain_n: usize,
    pub n_reach: Option<usize>,
    pub points: Vec<(usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub study: String,
    pub optimal_start: f64,
    pub threshold: f64,
    pub curves: Vec<CurveSummary>,
}

#[derive(Debug, Clone)]
pub struct StudyOutput {
    pub study: String,
    pub rows: Vec<ResultRow>,
    pub summary: StudySummary,
    pub pretrained: Vec<Pretrained>,
    /// Extra CSV files as `(file name, contents)`.
    pub extra_files: Vec<(String, String)>,
}

impl StudyOutput {
    pub fn curve(&self, method: &str, pretrain_n: usize) -> Option<&CurveSummary> {
        self.summary
            .curves
            .iter()
            .find(|c| c.method == method && c.pretrain_n == pretrain_n)
    }
}

fn summarize(study: &str, setup: &Setup, config: &ExperimentConfig, rows: &[ResultRow]) -> StudySummary {
    let threshold = setup.threshold(config.reach_fraction);
    let mut keys: Vec<(String, usize)> = rows
        .iter()
        .filter(|r| r.mean_return.is_some())
        .map(|r| (r.method.clone(), r.pretrain_n))
        .collect();
    keys.sort();
    keys.dedup();
    let curves = keys
        .into_iter()
        .map(|(method, pretrain_n)| {
            let points = seed_means(rows, &method, pretrain_n);
            let kappa = rows
                .iter()
                .find(|r| r.method == method && r.pretrain_n == pretrain_n)
                .and_then(|r| r.kappa)
                .filter(|_| method.starts_with("transfer_"));
            CurveSummary {
                n_reach: n_reach(&points, threshold),
                method,
                pretrain_n,
                points,
                kappa,
            }
        })
        .collect();
    StudySummary {
        study: study.into(),
        optimal_start: setup.optimal_start,
        threshold,
        curves,
    }
}

/// Learning from scratch (single-task training on the evaluation task)
/// against transfer from each pretrained representation, over the n-sweep.
pub fn run_efficiency_study(config: &ExperimentConfig, exec: Execution) -> Result<StudyOutput> {
    let setup = config.setup()?;
    let pretrained = pretrain_all(config, &setup, exec)?;
    run_efficiency_study_with(config, &setup, pretrained, exec)
}

/// Efficiency study reusing already pretrained representations.
pub fn run_efficiency_study_with(
    config: &ExperimentConfig,
    setup: &Setup,
    pretrained: Vec<Pretrained>,
    exec: Execution,
) -> Result<StudyOutput> {
    const STUDY: &str = "efficiency";
    #[derive(Clone, Copy)]
    enum Cell {
        Scratch { seed: u64, n: usize },
        Transfer { idx: usize, n: usize },
    }
    let mut cells = Vec::new();
    for &seed in &config.seeds {
        for &n in &config.n_sweep {
            cells.push(Cell::Scratch { seed, n });
        }
    }
    for idx in 0..pretrained.len() {
        if !config.seeds.contains(&pretrained[idx].seed) {
            continue;
        }
        for &n in &config.n_sweep {
            cells.push(Cell::Transfer { idx, n });
        }
    }
    let world = &setup.eval_world;
    let b_star = world.ground_truth_representation();
    let h_align = config.alignment_level();
    let rows = exec.try_map(cells.len(), |i| -> Result<ResultRow> {
        let clock = Instant::now();
        match cells[i] {
            Cell::Scratch { seed, n } => {
                let tc = TrainConfig {
                    samples: SamplePlan::Iid(n),
                    rank: world.ambient_dim(),
                    ridge_lambda: config.ridge_lambda,
                    seed: seed::child(seed, &[tag::SCRATCH, n as u64]),
                    min_norm_fallback: true,
                };
                let rep = train(std::slice::from_ref(world), &setup.dist, &tc, exec)?;
                let policy = GreedyPolicy::from_representation(&rep, 0)?;
                let (mean, se) = evaluate_row(&policy, setup, config, seed, exec)?;
                Ok(ResultRow {
                    run_id: run_id(STUDY, "scratch", 0, n, seed),
                    study: STUDY.into(),
                    method: "scratch".into(),
                    pretrain_n: 0,
                    n,
                    seed,
                    level: "aggregate".into(),
                    mean_return: Some(mean),
                    stderr: Some(se),
                    kappa: None,
                    alignment_aggregate: None,
                    wall_time_s: clock.elapsed().as_secs_f64(),
                })
            }
            Cell::Transfer { idx, n } => {
                let p = &pretrained[idx];
                let tc = TransferConfig {
                    samples: SamplePlan::Iid(n),
                    ridge_lambda: config.ridge_lambda,
                    seed: seed::child(p.seed, &[tag::TRANSFER, p.pretrain_n as u64, n as u64]),
                };
                let res = transfer(&p.rep, world, &setup.dist, &tc)?;
                let (mean, se) = evaluate_row(&res.policy, setup, config, p.seed, exec)?;
                let align = subspace_alignment(&p.rep.level(h_align)?.b_hat, &b_star)?;
                Ok(ResultRow {
                    run_id: run_id(STUDY, "transfer", p.pretrain_n, n, p.seed),
                    study: STUDY.into(),
                    method: "transfer".into(),
                    pretrain_n: p.pretrain_n,
                    n,
                    seed: p.seed,
                    level: "aggregate".into(),
                    mean_return: Some(mean),
                    stderr: Some(se),
                    kappa: Some(worst_kappa(&p.rep.bases(), &setup.dist)?),
                    alignment_aggregate: Some(align.aggregate),
                    wall_time_s: clock.elapsed().as_secs_f64(),
                })
            }
        }
    })?;
    let mut rows = rows;
    sort_rows(&mut rows);
    Ok(StudyOutput {
        study: STUDY.into(),
        summary: summarize(STUDY, setup, config, &rows),
        rows,
        pretrained,
        extra_files: Vec::new(),
    })
}

/// Transfer with the ground-truth basis under balanced and unbalanced
/// sampling designs, over the n-sweep.
pub fn run_kappa_study(config: &ExperimentConfig, exec: Execution) -> Result<StudyOutput> {
    const STUDY: &str = "kappa";
    let setup = config.setup()?;
    let world = &setup.eval_world;
    let b_star = world.ground_truth_representation();
    let bases = vec![b_star.clone(); world.horizon()];
    let modes = [BasisMode::Balanced, BasisMode::Unbalanced];
    let dists = modes
        .iter()
        .map(|&m| SamplingDistribution::barycentric_basis(world, m))
        .collect::<Result<Vec<_>>>()?;
    let kappas = dists
        .iter()
        .map(|d| lafa_kappa(&b_star, d).map(|k| k.kappa))
        .collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    for (mi, _) in modes.iter().enumerate() {
        for &seed in &config.seeds {
            for &n in &config.n_sweep {
                cells.push((mi, seed, n));
            }
        }
    }
    let rows = exec.try_map(cells.len(), |i| -> Result<ResultRow> {
        let clock = Instant::now();
        let (mi, seed, n) = cells[i];
        let method = format!("transfer_{}", modes[mi]);
        let tc = TransferConfig {
            samples: SamplePlan::Iid(n),
            ridge_lambda: config.ridge_lambda,
            seed: seed::child(seed, &[tag::KAPPA, mi as u64, n as u64]),
        };
        let res = transfer_with_bases(&bases, world, &dists[mi], &tc)?;
        let (mean, se) = evaluate_row(&res.policy, &setup, config, seed, exec)?;
        Ok(ResultRow {
            run_id: run_id(STUDY, &method, 0, n, seed),
            study: STUDY.into(),
            method,
            pretrain_n: 0,
            n,
            seed,
            level: "aggregate".into(),
            mean_return: Some(mean),
            stderr: Some(se),
            kappa: Some(kappas[mi]),
            alignment_aggregate: Some(0.0),
            wall_time_s: clock.elapsed().as_secs_f64(),
        })
    })?;
    let mut rows = rows;
    sort_rows(&mut rows);
    Ok(StudyOutput {
        study: STUDY.into(),
        summary: summarize(STUDY, &setup, config, &rows),
        rows,
        pretrained: Vec::new(),
        extra_files: Vec::new(),
    })
}

/// Per-coordinate projected norms `‖B̂_hᵀe_i‖` of each pretrained
/// representation at `level`.
pub fn run_alignment_study_with(
    config: &ExperimentConfig,
    setup: &Setup,
    pretrained: Vec<Pretrained>,
    level: usize,
) -> Result<StudyOutput> {
    const STUDY: &str = "alignment";
    if level == 0 || level > config.horizon {
        return Err(Error::Domain(format!(
            "level {level} outside 1..={}",
            config.horizon
        )));
    }
    let world = &setup.eval_world;
    let b_star = world.ground_truth_representation();
    let mut rows = Vec::new();
    let mut csv = String::from(ALIGNMENT_HEADER);
    csv.push('\n');
    for p in &pretrained {
        let clock = Instant::now();
        let report = subspace_alignment(&p.rep.level(level)?.b_hat, &b_star)?;
        for (i, norm) in report.coordinate_norms.iter().enumerate() {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                p.seed,
                p.pretrain_n,
                level,
                i,
                i / world.obs_dim(),
                u8::from(world.is_informative_coordinate(i)),
                norm
            ));
        }
        let kappa = lafa_kappa(&p.rep.level(level)?.b_hat, &setup.dist)?.kappa;
        rows.push(ResultRow {
            run_id: run_id(STUDY, "pretrained", p.pretrain_n, 0, p.seed),
            study: STUDY.into(),
            method: "pretrained".into(),
            pretrain_n: p.pretrain_n,
            n: 0,
            seed: p.seed,
            level: level.to_string(),
            mean_return: None,
            stderr: None,
            kappa: Some(kappa),
            alignment_aggregate: Some(report.aggregate),
            wall_time_s: clock.elapsed().as_secs_f64() + p.wall_time_s,
        });
    }
    sort_rows(&mut rows);
    Ok(StudyOutput {
        study: STUDY.into(),
        summary: summarize(STUDY, setup, config, &rows),
        rows,
        pretrained,
        extra_files: vec![("alignment.csv".into(), csv)],
    })
}

/// Alignment study that pretrains with the first `N` of the config, or
/// uses the bundle at `rep` for every seed when given.
pub fn run_alignment_study(
    config: &ExperimentConfig,
    rep: Option<&Path>,
    level: Option<usize>,
    exec: Execution,
) -> Result<StudyOutput> {
    let level = level.unwrap_or(config.alignment_level());
    if level == 0 || level > config.horizon {
        return Err(Error::Domain(format!(
            "level {level} outside 1..={}",
            config.horizon
        )));
    }
    let setup = config.setup()?;
    let pretrained = match rep {
        Some(path) => {
            let rep = persist::load_representation(path)?;
            if rep.obs_dim != config.obs_dim || rep.horizon != config.horizon {
                return Err(Error::Config(format!(
                    "{} was trained for a different observation layout or horizon",
                    path.display()
                )));
            }
            vec![Pretrained {
                seed: config.seeds[0],
                pretrain_n: match rep.config.samples {
                    SamplePlan::Iid(n) => n,
                    SamplePlan::Exhaustive => 0,
                },
                rep,
                wall_time_s: 0.0,
            }]
        }
        None => {
            let n = config.pretrain_n[0];
            exec.try_map(config.seeds.len(), |i| {
                pretrain(config, &setup, config.seeds[i], n, exec)
            })?
        }
    };
    run_alignment_study_with(config, &setup, pretrained, level)
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    study: &'a str,
    version: &'a str,
    git_hash: String,
    config: &'a ExperimentConfig,
    grid_path: String,
    representations: Vec<String>,
}

fn git_hash() -> String {
    std::process::Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

/// Writes `results.csv`, `summary.json`, `manifest.json`, extra CSVs and
/// one bundle per pretrained representation into `out`.
pub fn write_outputs(out: &Path, config: &ExperimentConfig, output: &StudyOutput) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut bundles = Vec::new();
    for p in &output.pretrained {
        let dir = persist::save_representation(&p.rep, out)?;
        bundles.push(
            dir.file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default(),
        );
    }
    for (name, body) in &output.extra_files {
        let path = out.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    let path = out.join("results.csv");
    fs::write(&path, results_csv(&output.rows)).map_err(|e| Error::io(&path, e))?;
    persist::write_json(&out.join("summary.json"), &output.summary)?;
    let manifest = Manifest {
        study: &output.study,
        version: env!("CARGO_PKG_VERSION"),
        git_hash: git_hash(),
        config,
        grid_path: config.grid_path().display().to_string(),
        representations: bundles,
    };
    persist::write_json(&out.join("manifest.json"), &manifest)
}

/// Drops the `wall_time_s` column, for run-to-run comparisons.
pub fn strip_wall_time(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Greedy actions of a transferred policy against the oracle, per level and
/// non-terminal state, on noiseless observations.
pub fn policy_agreement(policy: &GreedyPolicy, world: &GridWorld) -> Result<f64> {
    let oracle = evaluation::OraclePolicy::new(world)?;
    let mut obs = vec![0.0; world.obs_dim()];
    let mut rng = seed::rng(0);
    let (mut agree, mut total) = (0usize, 0usize);
    for h in 1..=world.horizon() {
        for s in (0..world.num_states()).filter(|&s| !world.is_terminal(s)) {
            world.observe_into(s, None, 0.0, &mut rng, &mut obs);
            let a = policy.greedy_action(&obs, h);
            let q = oracle.values().q[h - 1].row(s);
            let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            total += 1;
            if (q[a] - best).abs() <= 1e-9 * (1.0 + best.abs()) {
                agree += 1;
            }
        }
    }
    Ok(agree as f64 / total.max(1) as f64)
}
