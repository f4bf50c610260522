//! Linear MDPs: `P(s'|s,a) = ⟨φ(s,a), ψ(s')⟩`, `r(s,a) = ⟨φ(s,a), θ⟩`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Matrix};

const PROB_TOL: f64 = 1e-9;

/// One task's ground truth over hidden states `0..num_states`.
///
/// Transition rows and mean rewards are derived once at construction, where
/// the normalization invariant is checked.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMdpSpec {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    /// Row `s * num_actions + a` is φ(s,a).
    features: Matrix,
    /// Row `s'` is ψ(s').
    psi: Matrix,
    theta: Vec<f64>,
    reward_noise: f64,
    transitions: Matrix,
    rewards: Vec<f64>,
}

/// Outcome of one generative-model query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerativeReply {
    pub reward: f64,
    pub next_state: usize,
    /// The episode ended on this transition; later levels contribute nothing.
    pub done: bool,
}

impl LinearMdpSpec {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        features: Matrix,
        psi: Matrix,
        theta: Vec<f64>,
        reward_noise: f64,
    ) -> Result<Self> {
        let d = theta.len();
        if num_states == 0 || num_actions == 0 || horizon == 0 {
            return Err(Error::InvalidModel("counts must be positive".into()));
        }
        if features.shape() != (num_states * num_actions, d) {
            return Err(Error::Shape(format!(
                "features must be {}x{d}, got {:?}",
                num_states * num_actions,
                features.shape()
            )));
        }
        if psi.shape() != (num_states, d) {
            return Err(Error::Shape(format!(
                "psi must be {num_states}x{d}, got {:?}",
                psi.shape()
            )));
        }
        if !(reward_noise >= 0.0) {
            return Err(Error::InvalidModel("reward noise bound must be >= 0".into()));
        }
        let transitions = features.matmul(&psi.transpose())?;
        let rewards = features.matvec(&theta)?;
        for pair in 0..num_states * num_actions {
            let row = transitions.row(pair);
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > PROB_TOL {
                return Err(Error::InvalidModel(format!(
                    "transition row {pair} sums to {total}"
                )));
            }
            if let Some(p) = row.iter().find(|p| **p < -PROB_TOL || **p > 1.0 + PROB_TOL) {
                return Err(Error::InvalidModel(format!(
                    "transition row {pair} has probability {p}"
                )));
            }
        }
        Ok(LinearMdpSpec {
            num_states,
            num_actions,
            horizon,
            features,
            psi,
            theta,
            reward_noise,
            transitions,
            rewards,
        })
    }

    /// Tabular MDP as a linear MDP with one-hot features of dimension
    /// `num_states * num_actions`.
    pub fn tabular(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        transitions: &Matrix,
        rewards: &[f64],
        reward_noise: f64,
    ) -> Result<Self> {
        let pairs = num_states * num_actions;
        if transitions.shape() != (pairs, num_states) || rewards.len() != pairs {
            return Err(Error::Shape(format!(
                "tabular model needs a {pairs}x{num_states} transition table and {pairs} rewards"
            )));
        }
        Self::new(
            num_states,
            num_actions,
            horizon,
            Matrix::identity(pairs),
            transitions.transpose(),
            rewards.to_vec(),
            reward_noise,
        )
    }

    /// Random tabular MDP with sparse-ish transition rows and rewards in [0, 1].
    pub fn random_tabular<R: Rng + ?Sized>(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let pairs = num_states * num_actions;
        let mut table = Matrix::zeros(pairs, num_states);
        for pair in 0..pairs {
            let row = table.row_mut(pair);
            for p in row.iter_mut() {
                if rng.random::<f64>() < 0.6 {
                    *p = -rng.random::<f64>().max(1e-12).ln();
                }
            }
            if row.iter().all(|p| *p == 0.0) {
                row[rng.random_range(0..num_states)] = 1.0;
            }
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= total);
        }
        let rewards: Vec<f64> = (0..pairs).map(|_| rng.random::<f64>()).collect();
        Self::tabular(num_states, num_actions, horizon, &table, &rewards, 0.0)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn feature_dim(&self) -> usize {
        self.theta.len()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn psi(&self) -> &Matrix {
        &self.psi
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn reward_noise(&self) -> f64 {
        self.reward_noise
    }

    pub fn feature(&self, s: usize, a: usize) -> &[f64] {
        self.features.row(s * self.num_actions + a)
    }

    /// `P(·|s,a)` over hidden states.
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        self.transitions.row(s * self.num_actions + a)
    }

    /// Mean reward `r(s,a)`.
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.num_actions + a]
    }

    /// `r(s,a) + E_{s'}[v(s')]`.
    pub fn backup(&self, s: usize, a: usize, v_next: &[f64]) -> f64 {
        self.reward(s, a) + dot(self.transition_row(s, a), v_next)
    }

    fn check_pair(&self, s: usize, a: usize) -> Result<()> {
        if s >= self.num_states || a >= self.num_actions {
            return Err(Error::Domain(format!(
                "(state {s}, action {a}) outside {}x{}",
                self.num_states, self.num_actions
            )));
        }
        Ok(())
    }

    /// Draws `(r(s,a) + z, s' ~ P(·|s,a))` with `z ~ Uniform[-σ, σ]`.
    pub fn generative_query<R: Rng + ?Sized>(
        &self,
        s: usize,
        a: usize,
        rng: &mut R,
    ) -> Result<GenerativeReply> {
        self.check_pair(s, a)?;
        let next_state = sample_index(self.transition_row(s, a), rng);
        let noise = if self.reward_noise > 0.0 {
            rng.random_range(-self.reward_noise..=self.reward_noise)
        } else {
            0.0
        };
        Ok(GenerativeReply {
            reward: self.reward(s, a) + noise,
            next_state,
            done: false,
        })
    }
}

/// Inverse-CDF draw from a probability row.
pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Weight vector whose inner product with φ(s,a) gives
/// `r(s,a) + Σ_{s'} P(s'|s,a) v_next(s')`, namely `θ + Σ_{s'} v_next(s') ψ(s')`.
pub fn q_weight_from_value(theta: &[f64], psi: &Matrix, v_next: &[f64]) -> Result<Vec<f64>> {
    if psi.cols() != theta.len() || psi.rows() != v_next.len() {
        return Err(Error::Shape(format!(
            "theta has {} entries, psi is {:?}, v_next has {} entries",
            theta.len(),
            psi.shape(),
            v_next.len()
        )));
    }
    let mut w = theta.to_vec();
    for (s, &v) in v_next.iter().enumerate() {
        if v != 0.0 {
            axpy(v, psi.row(s), &mut w);
        }
    }
    Ok(w)
}
