//! Transfer of a learned representation to a new task.
//!
//! Per level the new task is fitted in the `d`-dimensional feature space
//! `z = B̂_hᵀ ξ(obs, a)` by ridge regression on fresh generative samples,
//! again backward from `h = H` to 1 with the same query schedule as
//! training. The resulting policy acts greedily on `ξᵀ B̂_h w_h`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::Policy;
use crate::gridworld::GridWorld;
use crate::linalg::{Matrix, NormalEquations};
use crate::representation::{
    q_target, queries_per_sample, LearnedRepresentation, LinearQ, SamplePlan, ValueRange,
};
use crate::sampling::{lafa_kappa, project_block, SamplingDistribution};
use crate::seed::{self, tag, Rng};

/// Default ridge parameter for transfer regressions.
pub const DEFAULT_TRANSFER_LAMBDA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    pub samples: SamplePlan,
    pub ridge_lambda: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferLevel {
    pub level: usize,
    pub w_new: Vec<f64>,
    /// Closed-form κ of this level's basis under the sampling distribution.
    pub kappa_used: f64,
    /// Mean squared training residual.
    pub residual: f64,
    /// The regression fell back to the minimal-norm solution.
    pub min_norm: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferResult {
    pub levels: Vec<TransferLevel>,
    pub policy: GreedyPolicy,
}

/// Greedy policy over per-level linear Q-functions; `levels[h - 1]` acts at
/// level `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyPolicy {
    levels: Vec<LinearQ>,
}

impl GreedyPolicy {
    pub fn new(levels: Vec<LinearQ>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Domain("policy needs at least one level".into()));
        }
        Ok(GreedyPolicy { levels })
    }

    /// Policy from per-level bases and weights.
    pub fn from_factors(bases: &[Matrix], weights: &[Vec<f64>], obs_dim: usize) -> Result<Self> {
        if bases.len() != weights.len() {
            return Err(Error::Shape(format!(
                "{} bases and {} weight vectors",
                bases.len(),
                weights.len()
            )));
        }
        Self::new(
            bases
                .iter()
                .zip(weights)
                .map(|(b, w)| LinearQ::from_factors(b, w, obs_dim))
                .collect::<Result<_>>()?,
        )
    }

    /// Policy of training task `task` under a learned representation.
    pub fn from_representation(rep: &LearnedRepresentation, task: usize) -> Result<Self> {
        Self::new(
            (1..=rep.horizon)
                .map(|h| rep.task_q(h, task))
                .collect::<Result<_>>()?,
        )
    }

    pub fn horizon(&self) -> usize {
        self.levels.len()
    }

    pub fn q_function(&self, level: usize) -> &LinearQ {
        &self.levels[level - 1]
    }

    /// `argmax_a ξ(obs, a)ᵀ θ_h`, lowest index on ties.
    pub fn greedy_action(&self, obs: &[f64], level: usize) -> usize {
        self.q_function(level).greedy(obs).0
    }
}

impl Policy for GreedyPolicy {
    fn act(&self, obs: &[f64], level: usize, _rng: &mut Rng) -> usize {
        self.greedy_action(obs, level)
    }
}

/// Transfers `rep` to `task`.
pub fn transfer(
    rep: &LearnedRepresentation,
    task: &GridWorld,
    dist: &SamplingDistribution,
    config: &TransferConfig,
) -> Result<TransferResult> {
    if rep.obs_dim != task.obs_dim() || rep.horizon != task.horizon() {
        return Err(Error::Shape(
            "representation and task disagree on observation length or horizon".into(),
        ));
    }
    transfer_with_bases(&rep.bases(), task, dist, config)
}

/// Transfer with explicit per-level bases (`bases[h - 1]` for level `h`),
/// each with orthonormal columns.
pub fn transfer_with_bases(
    bases: &[Matrix],
    task: &GridWorld,
    dist: &SamplingDistribution,
    config: &TransferConfig,
) -> Result<TransferResult> {
    let horizon = task.horizon();
    if bases.len() != horizon {
        return Err(Error::Shape(format!(
            "{} bases for horizon {horizon}",
            bases.len()
        )));
    }
    dist.check_world(task)?;
    let n = config.samples.count(dist);
    if n == 0 {
        return Err(Error::Domain("sample count must be positive".into()));
    }
    let d_obs = task.obs_dim();
    let noise = task.config().noise_std;
    let mut obs = vec![0.0; d_obs];
    let mut next_obs = vec![0.0; d_obs];
    let mut levels: Vec<TransferLevel> = Vec::with_capacity(horizon);
    let mut qs: Vec<LinearQ> = Vec::with_capacity(horizon);

    for h in (1..=horizon).rev() {
        let b = &bases[h - 1];
        let kappa = lafa_kappa(b, dist)?;
        let d = b.cols();
        let m = queries_per_sample(horizon, h);
        let mut rng = seed::child_rng(config.seed, &[tag::TRANSFER, h as u64]);
        let mut ne = NormalEquations::new(d);
        let mut z = vec![0.0; d];
        let mut range = ValueRange::empty();
        for j in 0..n {
            let p = config.samples.point(dist, j, &mut rng);
            task.observe_into(p.state, p.noise_coord, noise, &mut rng, &mut obs);
            let y = q_target(
                task,
                p.state,
                p.action,
                m,
                qs.last(),
                &mut next_obs,
                &mut range,
                &mut rng,
            )?;
            project_block(b, &obs, p.action, &mut z);
            ne.add_row(&z, y);
        }
        let (w, min_norm) = match ne.solve_ridge(config.ridge_lambda) {
            Ok(w) => (w, false),
            Err(Error::SingularSystem(_)) if config.ridge_lambda == 0.0 => (ne.solve_min_norm()?, true),
            Err(e) => return Err(e),
        };
        qs.push(LinearQ::from_factors(b, &w, d_obs)?);
        levels.push(TransferLevel {
            level: h,
            residual: ne.mean_squared_residual(&w),
            w_new: w,
            kappa_used: kappa.kappa,
            min_norm,
        });
    }
    levels.reverse();
    qs.reverse();
    Ok(TransferResult {
        levels,
        policy: GreedyPolicy::new(qs)?,
    })
}
