//! Ground-truth oracles and metrics: finite-horizon dynamic programming on
//! the hidden tabular model, Monte Carlo policy evaluation under the noisy
//! observation model, subspace alignment and the value-error accumulation
//! bound.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gridworld::{GridWorld, NUM_ACTIONS};
use crate::linalg::{self, Matrix};
use crate::linear_mdp::LinearMdpSpec;
use crate::seed::{self, tag, Rng};

/// Chooses an action from an observation at level `h` (1-based).
pub trait Policy: Sync {
    fn act(&self, obs: &[f64], level: usize, rng: &mut Rng) -> usize;
}

/// Optimal values; `v` has `H + 1` rows with the last identically zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub v: Matrix,
    /// `q[h - 1]` is `K × |A|` at level `h`.
    pub q: Vec<Matrix>,
}

impl ValueTable {
    pub fn horizon(&self) -> usize {
        self.q.len()
    }

    /// `V*_h(s)` for `h ∈ 1..=H+1`.
    pub fn value(&self, h: usize, s: usize) -> f64 {
        self.v.get(h - 1, s)
    }

    pub fn q_value(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[h - 1].get(s, a)
    }

    /// Lowest-index maximizer of `Q*_h(s, ·)`.
    pub fn greedy_action(&self, h: usize, s: usize) -> usize {
        argmax(self.q[h - 1].row(s))
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn row_max(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Backward DP: `q_h = r + P v_{h+1}`, `v_h = max_a q_h`.
pub fn optimal_values(spec: &LinearMdpSpec, horizon: usize) -> ValueTable {
    let k = spec.num_states();
    let na = spec.num_actions();
    let mut v = Matrix::zeros(horizon + 1, k);
    let mut q = vec![Matrix::zeros(k, na); horizon];
    for h in (1..=horizon).rev() {
        let next = v.row(h).to_vec();
        for s in 0..k {
            for a in 0..na {
                q[h - 1].set(s, a, spec.backup(s, a, &next));
            }
            let best = row_max(q[h - 1].row(s));
            v.set(h - 1, s, best);
        }
    }
    ValueTable { v, q }
}

/// Acts optimally by reading the hidden state off the one-hot block.
#[derive(Debug, Clone)]
pub struct OraclePolicy {
    table: ValueTable,
    num_states: usize,
}

impl OraclePolicy {
    pub fn new(world: &GridWorld) -> Result<Self> {
        let spec = world.build_tabular_oracle()?;
        Ok(OraclePolicy {
            table: optimal_values(&spec, world.horizon()),
            num_states: world.num_states(),
        })
    }

    pub fn values(&self) -> &ValueTable {
        &self.table
    }
}

/// Hidden state encoded in the one-hot prefix of an observation.
pub fn decode_state(obs: &[f64], num_states: usize) -> usize {
    argmax(&obs[..num_states])
}

impl Policy for OraclePolicy {
    fn act(&self, obs: &[f64], level: usize, _rng: &mut Rng) -> usize {
        self.table
            .greedy_action(level, decode_state(obs, self.num_states))
    }
}

/// Uniformly random actions.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn act(&self, _obs: &[f64], _level: usize, rng: &mut Rng) -> usize {
        rng.random_range(0..NUM_ACTIONS)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean_return: f64,
    pub stderr: f64,
    /// Largest `V*_1(s) − V̂^π_1(s)` over non-terminal hidden states.
    pub suboptimality_max: f64,
    pub suboptimality_start: f64,
    pub episodes: usize,
    /// `V*_1(start)`.
    pub optimal_start: f64,
}

/// Sum by recursive halving; fixed association for a given length.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Return of one episode of `policy` from `start`, through at most `H`
/// levels with freshly noised observations.
pub fn rollout<P: Policy + ?Sized>(
    policy: &P,
    world: &GridWorld,
    start: usize,
    rng: &mut Rng,
) -> Result<f64> {
    let noise = world.config().noise_std;
    let mut obs = vec![0.0; world.obs_dim()];
    let mut s = start;
    let mut total = 0.0;
    for h in 1..=world.horizon() {
        if world.is_terminal(s) {
            break;
        }
        world.observe_into(s, None, noise, rng, &mut obs);
        let a = policy.act(&obs, h, rng);
        if a >= NUM_ACTIONS {
            return Err(Error::Domain(format!("policy chose action {a}")));
        }
        let out = world.step(s, a, rng)?;
        total += out.reward;
        s = out.next_state;
    }
    Ok(total)
}

fn returns_from<P: Policy + ?Sized>(
    policy: &P,
    world: &GridWorld,
    start: usize,
    episodes: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<f64>> {
    exec.try_map(episodes, |e| {
        let mut rng = seed::child_rng(seed, &[tag::EVAL, start as u64, e as u64]);
        rollout(policy, world, start, &mut rng)
    })
}

/// Monte Carlo evaluation from the start cell, plus the worst gap over all
/// non-terminal states using the same number of episodes per state.
pub fn evaluate_policy<P: Policy + ?Sized>(
    policy: &P,
    world: &GridWorld,
    episodes: usize,
    seed: u64,
    exec: Execution,
) -> Result<EvalReport> {
    if episodes == 0 {
        return Err(Error::Domain("need at least one episode".into()));
    }
    let table = optimal_values(&world.build_tabular_oracle()?, world.horizon());
    let start = world.start_state();
    let mut report = None;
    let mut worst = f64::NEG_INFINITY;
    for s in 0..world.num_states() {
        if world.is_terminal(s) {
            continue;
        }
        let returns = returns_from(policy, world, s, episodes, seed, exec)?;
        let (mean, stderr) = mean_and_stderr(&returns);
        let gap = table.value(1, s) - mean;
        worst = worst.max(gap);
        if s == start {
            report = Some((mean, stderr, gap));
        }
    }
    let (mean_return, stderr, suboptimality_start) = report.expect("start state is non-terminal");
    Ok(EvalReport {
        mean_return,
        stderr,
        suboptimality_max: worst,
        suboptimality_start,
        episodes,
        optimal_start: table.value(1, start),
    })
}

/// Start-state Monte Carlo evaluation only.
pub fn evaluate_start<P: Policy + ?Sized>(
    policy: &P,
    world: &GridWorld,
    episodes: usize,
    seed: u64,
    exec: Execution,
) -> Result<(f64, f64)> {
    if episodes == 0 {
        return Err(Error::Domain("need at least one episode".into()));
    }
    let returns = returns_from(policy, world, world.start_state(), episodes, seed, exec)?;
    Ok(mean_and_stderr(&returns))
}

/// Per-coordinate projected norms `‖B̂ᵀe_i‖` and `‖P_{B̂}^⊥ B*‖_F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub coordinate_norms: Vec<f64>,
    pub aggregate: f64,
}

impl AlignmentReport {
    /// Means over coordinates where `informative(i)` holds and where it
    /// does not.
    pub fn split_means(&self, informative: impl Fn(usize) -> bool) -> (f64, f64) {
        let (mut a, mut na, mut b, mut nb) = (0.0, 0usize, 0.0, 0usize);
        for (i, &x) in self.coordinate_norms.iter().enumerate() {
            if informative(i) {
                a += x;
                na += 1;
            } else {
                b += x;
                nb += 1;
            }
        }
        let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
        (mean(a, na), mean(b, nb))
    }
}

pub fn subspace_alignment(b_hat: &Matrix, b_star: &Matrix) -> Result<AlignmentReport> {
    if b_hat.rows() != b_star.rows() {
        return Err(Error::Shape(format!(
            "bases have {} and {} rows",
            b_hat.rows(),
            b_star.rows()
        )));
    }
    linalg::check_orthonormal_columns(b_hat, 1e-8)?;
    linalg::check_orthonormal_columns(b_star, 1e-8)?;
    let coordinate_norms = (0..b_hat.rows()).map(|i| linalg::norm(b_hat.row(i))).collect();
    let coef = b_hat.transpose().matmul(b_star)?;
    let residual = b_star.sub(&b_hat.matmul(&coef)?)?;
    Ok(AlignmentReport {
        coordinate_norms,
        aggregate: residual.frobenius_norm(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A4Violation {
    pub level: usize,
    pub state: usize,
    pub error: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A4Report {
    pub checks: usize,
    pub violations: Vec<A4Violation>,
    /// Largest `|V* − V̂| / Σδ` seen (0 when all bounds are 0 and met).
    pub worst_ratio: f64,
}

/// Perturbs every backup by `u ~ Uniform[−δ_h, δ_h]`, recomputes values by
/// backward maximization and checks `|V*_h − V̂_h| ≤ Σ_{k≥h} δ_k`.
pub fn lemma_a4_harness<R: rand::Rng + ?Sized>(
    spec: &LinearMdpSpec,
    horizon: usize,
    deltas: &[f64],
    rng: &mut R,
) -> Result<A4Report> {
    if deltas.len() != horizon {
        return Err(Error::Shape(format!(
            "{} perturbation bounds for horizon {horizon}",
            deltas.len()
        )));
    }
    if deltas.iter().any(|d| !(*d >= 0.0)) {
        return Err(Error::Domain("perturbation bounds must be >= 0".into()));
    }
    let exact = optimal_values(spec, horizon);
    let k = spec.num_states();
    let na = spec.num_actions();
    let mut v_hat = vec![0.0; k];
    let mut report = A4Report {
        checks: 0,
        violations: Vec::new(),
        worst_ratio: 0.0,
    };
    let mut bound = 0.0;
    for h in (1..=horizon).rev() {
        let delta = deltas[h - 1];
        bound += delta;
        let next = v_hat.clone();
        for (s, v) in v_hat.iter_mut().enumerate() {
            *v = (0..na)
                .map(|a| {
                    let u = if delta > 0.0 {
                        rng.random_range(-delta..=delta)
                    } else {
                        0.0
                    };
                    spec.backup(s, a, &next) + u
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let error = (exact.value(h, s) - *v).abs();
            let scale = 1.0 + exact.value(h, s).abs();
            report.checks += 1;
            if error > bound + 1e-12 * scale {
                report.violations.push(A4Violation {
                    level: h,
                    state: s,
                    error,
                    bound,
                });
            }
            let ratio = if bound > 0.0 {
                error / bound
            } else if error > 1e-12 * scale {
                f64::INFINITY
            } else {
                0.0
            };
            report.worst_ratio = report.worst_ratio.max(ratio);
        }
    }
    Ok(report)
}
