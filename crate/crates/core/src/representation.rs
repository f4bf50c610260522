//! Multitask representation learning by backward least-squares value
//! iteration.
//!
//! At every level `h = H, …, 1` each training task draws state-action pairs
//! from its sampling distribution, queries the generative model
//! `m = (H − h + 1)²` times per pair, and labels the pair with the mean of
//! `reward + V_{h+1}(s')`. One ridge regression per task gives
//! `θ⁽ᵗ⁾ ∈ R^D`; the top-`d` left singular vectors of `Θ = [θ⁽¹⁾ … θ⁽ᵀ⁾]`
//! form `B̂_h`, and `ŵ_{t,h} = B̂_hᵀ θ⁽ᵗ⁾`. The next level bootstraps from
//! `V_h(s) = max_a ξ(s,a)ᵀ B̂_h ŵ_{t,h}`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gridworld::{GridWorld, NUM_ACTIONS};
use crate::linalg::{self, dot, Matrix, NormalEquations};
use crate::sampling::{SamplingDistribution, SupportPoint};
use crate::seed::{self, tag};

/// How many state-action pairs a learner draws per level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplePlan {
    /// `n` i.i.d. draws from the sampling distribution.
    Iid(usize),
    /// Every support point exactly once, in support order.
    Exhaustive,
}

impl SamplePlan {
    pub fn count(&self, dist: &SamplingDistribution) -> usize {
        match *self {
            SamplePlan::Iid(n) => n,
            SamplePlan::Exhaustive => dist.support().len(),
        }
    }

    pub(crate) fn point<R: Rng + ?Sized>(
        &self,
        dist: &SamplingDistribution,
        j: usize,
        rng: &mut R,
    ) -> SupportPoint {
        match self {
            SamplePlan::Iid(_) => dist.sample_point(rng),
            SamplePlan::Exhaustive => dist.support()[j],
        }
    }
}

/// Number of generative queries per sampled pair at `level`.
pub fn queries_per_sample(horizon: usize, level: usize) -> usize {
    let remaining = horizon - level + 1;
    remaining * remaining
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub samples: SamplePlan,
    /// Target rank `d`; capped at `min(D, T)`.
    pub rank: usize,
    pub ridge_lambda: f64,
    pub seed: u64,
    /// Use the minimal-norm solution when `ridge_lambda = 0` and a task's
    /// normal equations are singular, instead of failing.
    #[serde(default)]
    pub min_norm_fallback: bool,
}

/// Linear Q-function over ambient features: `Q(obs, a) = ξ(obs, a)ᵀ θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearQ {
    theta: Vec<f64>,
    obs_dim: usize,
}

impl LinearQ {
    pub fn new(theta: Vec<f64>, obs_dim: usize) -> Result<Self> {
        if theta.len() != NUM_ACTIONS * obs_dim {
            return Err(Error::Shape(format!(
                "weight vector has {} entries, expected {}",
                theta.len(),
                NUM_ACTIONS * obs_dim
            )));
        }
        Ok(LinearQ { theta, obs_dim })
    }

    /// `B w`
    pub fn from_factors(b: &Matrix, w: &[f64], obs_dim: usize) -> Result<Self> {
        Self::new(b.matvec(w)?, obs_dim)
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    #[inline]
    pub fn q(&self, obs: &[f64], action: usize) -> f64 {
        let off = action * self.obs_dim;
        dot(obs, &self.theta[off..off + self.obs_dim])
    }

    /// Greedy action with ties broken toward the lowest index, and its value.
    #[inline]
    pub fn greedy(&self, obs: &[f64]) -> (usize, f64) {
        let mut best = (0, self.q(obs, 0));
        for a in 1..NUM_ACTIONS {
            let q = self.q(obs, a);
            if q > best.1 {
                best = (a, q);
            }
        }
        best
    }

    #[inline]
    pub fn value(&self, obs: &[f64]) -> f64 {
        self.greedy(obs).1
    }
}

/// Running min/max of bootstrap values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueRange {
    pub min: f64,
    pub max: f64,
}

impl ValueRange {
    pub(crate) fn empty() -> Self {
        ValueRange {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn include(&mut self, v: f64) {
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    fn merge(self, other: ValueRange) -> ValueRange {
        ValueRange {
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }

    fn is_empty(&self) -> bool {
        self.min > self.max
    }
}

/// Label for one pair: mean over `m` generative queries of
/// `reward + V_{h+1}(s')`, with `V_{h+1} = 0` after termination or past the
/// horizon. The next-state value is evaluated on a fresh observation.
#[allow(clippy::too_many_arguments)]
pub(crate) fn q_target<R: Rng + ?Sized>(
    world: &GridWorld,
    state: usize,
    action: usize,
    m: usize,
    next_value: Option<&LinearQ>,
    obs_buf: &mut [f64],
    range: &mut ValueRange,
    rng: &mut R,
) -> Result<f64> {
    let noise = world.config().noise_std;
    let mut total = 0.0;
    for _ in 0..m {
        let reply = world.query(state, action, rng)?;
        let mut target = reply.reward;
        if let (Some(vq), false) = (next_value, reply.done) {
            world.observe_into(reply.next_state, None, noise, rng, obs_buf);
            let v = vq.value(obs_buf);
            range.include(v);
            target += v;
        }
        total += target;
    }
    Ok(total / m as f64)
}

/// Q-value labels for `samples`, each averaged over `m` generative queries.
pub fn build_q_targets<R: Rng + ?Sized>(
    world: &GridWorld,
    samples: &[SupportPoint],
    m: usize,
    next_value: Option<&LinearQ>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::Domain("need at least one query per sample".into()));
    }
    let mut obs = vec![0.0; world.obs_dim()];
    let mut range = ValueRange::empty();
    samples
        .iter()
        .map(|p| q_target(world, p.state, p.action, m, next_value, &mut obs, &mut range, rng))
        .collect()
}

/// One level's learned factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRepresentation {
    pub level: usize,
    /// `D × d`, orthonormal columns.
    pub b_hat: Matrix,
    /// `d × T`
    pub w_hat: Matrix,
    /// `D × T` raw per-task regression solutions.
    pub theta_stack: Matrix,
    pub singular_values: Vec<f64>,
    /// Range of this level's bootstrap values as seen by level `h − 1`.
    pub value_range: Option<ValueRange>,
}

impl LevelRepresentation {
    pub fn rank(&self) -> usize {
        self.b_hat.cols()
    }

    /// `B̂ ŵ_t`
    pub fn task_theta(&self, task: usize) -> Vec<f64> {
        self.b_hat
            .matvec(&self.w_hat.column(task))
            .expect("factor shapes agree")
    }

    /// `‖θ_t − B̂ ŵ_t‖` per task.
    pub fn reconstruction_residuals(&self) -> Vec<f64> {
        (0..self.theta_stack.cols())
            .map(|t| {
                let approx = self.task_theta(t);
                let diff: Vec<f64> = self
                    .theta_stack
                    .column(t)
                    .iter()
                    .zip(&approx)
                    .map(|(a, b)| a - b)
                    .collect();
                linalg::norm(&diff)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedRepresentation {
    pub horizon: usize,
    pub num_states: usize,
    pub obs_dim: usize,
    pub num_tasks: usize,
    pub config: TrainConfig,
    /// `levels[h - 1]` is level `h`.
    pub levels: Vec<LevelRepresentation>,
}

impl LearnedRepresentation {
    pub fn ambient_dim(&self) -> usize {
        NUM_ACTIONS * self.obs_dim
    }

    /// Level `h` (1-based).
    pub fn level(&self, h: usize) -> Result<&LevelRepresentation> {
        if h == 0 || h > self.levels.len() {
            return Err(Error::Domain(format!(
                "level {h} outside 1..={}",
                self.levels.len()
            )));
        }
        Ok(&self.levels[h - 1])
    }

    pub fn bases(&self) -> Vec<Matrix> {
        self.levels.iter().map(|l| l.b_hat.clone()).collect()
    }

    /// Learned Q-function of `task` at level `h`.
    pub fn task_q(&self, h: usize, task: usize) -> Result<LinearQ> {
        let lvl = self.level(h)?;
        if task >= self.num_tasks {
            return Err(Error::Domain(format!(
                "task {task} outside 0..{}",
                self.num_tasks
            )));
        }
        LinearQ::new(lvl.task_theta(task), self.obs_dim)
    }

    /// Whether every recorded bootstrap value at level `h` lies in
    /// `[−10·(H−h+1), 100 + 100·(H−h)]`.
    pub fn bootstrap_within_bounds(&self, h: usize) -> Result<bool> {
        let lvl = self.level(h)?;
        let remaining = (self.horizon - h) as f64;
        let lo = -10.0 * (remaining + 1.0);
        let hi = 100.0 + 100.0 * remaining;
        Ok(lvl
            .value_range
            .is_none_or(|r| r.min >= lo - 1e-9 && r.max <= hi + 1e-9))
    }
}

/// Factors fitted at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelFit {
    pub b_hat: Matrix,
    pub w_hat: Matrix,
    pub theta_stack: Matrix,
    pub singular_values: Vec<f64>,
}

/// Per-task ridge regressions followed by a rank-`d` SVD truncation.
pub fn fit_level(
    designs: &[Matrix],
    labels: &[Vec<f64>],
    rank: usize,
    ridge_lambda: f64,
) -> Result<LevelFit> {
    if designs.is_empty() || designs.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} designs and {} label vectors",
            designs.len(),
            labels.len()
        )));
    }
    let systems = designs
        .iter()
        .zip(labels)
        .map(|(x, y)| NormalEquations::from_design(x, y))
        .collect::<Result<Vec<_>>>()?;
    fit_level_from_systems(&systems, rank, ridge_lambda, false)
}

pub(crate) fn fit_level_from_systems(
    systems: &[NormalEquations],
    rank: usize,
    ridge_lambda: f64,
    min_norm_fallback: bool,
) -> Result<LevelFit> {
    let dim = systems[0].dim();
    if systems.iter().any(|s| s.dim() != dim) {
        return Err(Error::Shape("tasks disagree on ambient dimension".into()));
    }
    if rank == 0 {
        return Err(Error::Domain("rank must be positive".into()));
    }
    let thetas = systems
        .iter()
        .map(|s| {
            if min_norm_fallback {
                s.solve_ridge_or_min_norm(ridge_lambda)
            } else {
                s.solve_ridge(ridge_lambda)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let theta_stack = Matrix::from_columns(dim, &thetas)?;
    let svd = linalg::svd(&theta_stack)?;
    let d = rank.min(svd.u.cols());
    let b_hat = svd.u.leading_columns(d);
    let w_hat = b_hat.transpose().matmul(&theta_stack)?;
    Ok(LevelFit {
        b_hat,
        w_hat,
        theta_stack,
        singular_values: svd.singular_values,
    })
}

fn check_tasks(tasks: &[GridWorld], dist: &SamplingDistribution) -> Result<()> {
    let first = tasks
        .first()
        .ok_or_else(|| Error::Domain("need at least one training task".into()))?;
    for t in tasks {
        if t.num_states() != first.num_states()
            || t.obs_dim() != first.obs_dim()
            || t.horizon() != first.horizon()
        {
            return Err(Error::Shape(
                "training tasks must share states, observation layout and horizon".into(),
            ));
        }
    }
    if dist.num_states() != first.num_states() || dist.obs_dim() != first.obs_dim() {
        return Err(Error::Shape(
            "sampling distribution does not match the tasks' observation layout".into(),
        ));
    }
    Ok(())
}

/// Accumulates one task's normal equations for one level.
pub(crate) fn level_system<R: Rng + ?Sized>(
    world: &GridWorld,
    dist: &SamplingDistribution,
    plan: SamplePlan,
    m: usize,
    next_value: Option<&LinearQ>,
    rng: &mut R,
) -> Result<(NormalEquations, ValueRange)> {
    let d_obs = world.obs_dim();
    let noise = world.config().noise_std;
    let mut ne = NormalEquations::new(world.ambient_dim());
    let mut obs = vec![0.0; d_obs];
    let mut next_obs = vec![0.0; d_obs];
    let mut range = ValueRange::empty();
    for j in 0..plan.count(dist) {
        let p = plan.point(dist, j, rng);
        world.observe_into(p.state, p.noise_coord, noise, rng, &mut obs);
        let y = q_target(
            world,
            p.state,
            p.action,
            m,
            next_value,
            &mut next_obs,
            &mut range,
            rng,
        )?;
        ne.add_block_row(p.action * d_obs, &obs, y);
    }
    Ok((ne, range))
}

/// Learns per-level representations from `tasks`, all sampled with `dist`.
pub fn train(
    tasks: &[GridWorld],
    dist: &SamplingDistribution,
    config: &TrainConfig,
    exec: Execution,
) -> Result<LearnedRepresentation> {
    check_tasks(tasks, dist)?;
    if config.samples.count(dist) == 0 {
        return Err(Error::Domain("sample count must be positive".into()));
    }
    let horizon = tasks[0].horizon();
    let obs_dim = tasks[0].obs_dim();
    let mut levels: Vec<LevelRepresentation> = Vec::with_capacity(horizon);
    let mut next_q: Option<Vec<LinearQ>> = None;

    for h in (1..=horizon).rev() {
        let m = queries_per_sample(horizon, h);
        let results = exec.try_map(tasks.len(), |t| {
            let mut rng = seed::child_rng(config.seed, &[tag::TRAIN, h as u64, t as u64]);
            let nq = next_q.as_ref().map(|q| &q[t]);
            level_system(&tasks[t], dist, config.samples, m, nq, &mut rng)
        })?;
        let range = results
            .iter()
            .map(|(_, r)| *r)
            .fold(ValueRange::empty(), ValueRange::merge);
        if let Some(prev) = levels.last_mut() {
            prev.value_range = (!range.is_empty()).then_some(range);
        }
        let systems: Vec<NormalEquations> = results.into_iter().map(|(s, _)| s).collect();
        let fit = fit_level_from_systems(
            &systems,
            config.rank,
            config.ridge_lambda,
            config.min_norm_fallback,
        )?;
        let level = LevelRepresentation {
            level: h,
            b_hat: fit.b_hat,
            w_hat: fit.w_hat,
            theta_stack: fit.theta_stack,
            singular_values: fit.singular_values,
            value_range: None,
        };
        next_q = Some(
            (0..tasks.len())
                .map(|t| LinearQ::new(level.task_theta(t), obs_dim))
                .collect::<Result<_>>()?,
        );
        levels.push(level);
    }
    levels.reverse();
    Ok(LearnedRepresentation {
        horizon,
        num_states: tasks[0].num_states(),
        obs_dim,
        num_tasks: tasks.len(),
        config: config.clone(),
        levels,
    })
}
