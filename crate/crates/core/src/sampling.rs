//! Sampling distributions over state-action pairs, barycentric basis
//! designs, and the least-activated-feature criterion
//! `κ = 1 / λ_min(E[B̂ᵀ x xᵀ B̂])`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridworld::{GridWorld, NUM_ACTIONS};
use crate::linalg::{self, Matrix};

/// Threshold on `λ_min` below which κ is reported as infinite.
pub const KAPPA_DEGENERATE_EIG: f64 = 1e-12;

/// A support point: hidden state, action, and an optional unit spike on a
/// noise coordinate of the observation template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SupportPoint {
    pub state: usize,
    pub action: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_coord: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisMode {
    /// Noise-coordinate templates are attached round-robin to all positions.
    Balanced,
    /// All noise-coordinate templates are attached to the start position.
    Unbalanced,
}

impl std::str::FromStr for BasisMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(BasisMode::Balanced),
            "unbalanced" => Ok(BasisMode::Unbalanced),
            other => Err(Error::Config(format!("unknown distribution mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for BasisMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BasisMode::Balanced => "balanced",
            BasisMode::Unbalanced => "unbalanced",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawDistribution {
    num_states: usize,
    obs_dim: usize,
    support: Vec<SupportPoint>,
    weights: Vec<f64>,
}

/// Finite distribution over support points for a fixed observation layout
/// (`num_states` one-hot coordinates out of `obs_dim`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct SamplingDistribution {
    num_states: usize,
    obs_dim: usize,
    support: Vec<SupportPoint>,
    weights: Vec<f64>,
    cdf: Vec<f64>,
    uniform: bool,
}

impl TryFrom<RawDistribution> for SamplingDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        SamplingDistribution::new(raw.num_states, raw.obs_dim, raw.support, raw.weights)
    }
}

impl From<SamplingDistribution> for RawDistribution {
    fn from(d: SamplingDistribution) -> Self {
        RawDistribution {
            num_states: d.num_states,
            obs_dim: d.obs_dim,
            support: d.support,
            weights: d.weights,
        }
    }
}

impl SamplingDistribution {
    pub fn new(
        num_states: usize,
        obs_dim: usize,
        support: Vec<SupportPoint>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::Domain("empty support".into()));
        }
        if support.len() != weights.len() {
            return Err(Error::Shape(format!(
                "{} support points but {} weights",
                support.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Domain("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("weights sum to {total}, expected 1")));
        }
        for p in &support {
            if p.state >= num_states || p.action >= NUM_ACTIONS {
                return Err(Error::Domain(format!("support point {p:?} out of range")));
            }
            if let Some(j) = p.noise_coord {
                if num_states + j >= obs_dim {
                    return Err(Error::Domain(format!(
                        "noise coordinate {j} outside observation of length {obs_dim}"
                    )));
                }
            }
        }
        let mut acc = 0.0;
        let cdf = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        let uniform = weights.iter().all(|w| *w == weights[0]);
        Ok(SamplingDistribution {
            num_states,
            obs_dim,
            support,
            weights,
            cdf,
            uniform,
        })
    }

    pub fn uniform(num_states: usize, obs_dim: usize, support: Vec<SupportPoint>) -> Result<Self> {
        let n = support.len().max(1);
        Self::new(num_states, obs_dim, support, vec![1.0 / n as f64; n])
    }

    pub fn point_mass(num_states: usize, obs_dim: usize, point: SupportPoint) -> Result<Self> {
        Self::new(num_states, obs_dim, vec![point], vec![1.0])
    }

    /// Uniform over the `4·obs_dim` support points of a barycentric basis:
    /// one plain template per (position, action), plus one spiked template
    /// per (noise coordinate, action). The ξ-images of the support form a
    /// basis of the ambient space.
    ///
    /// Balanced attaches noise templates round-robin and weights each point
    /// by the inverse template count of its (position, action), so every
    /// informative direction carries mass `1 / 4K`. Unbalanced attaches all
    /// noise templates to the start position and is uniform.
    pub fn barycentric_basis(world: &GridWorld, mode: BasisMode) -> Result<Self> {
        let k = world.num_states();
        let d_obs = world.obs_dim();
        let mut support = Vec::with_capacity(NUM_ACTIONS * d_obs);
        for action in 0..NUM_ACTIONS {
            for state in 0..k {
                support.push(SupportPoint {
                    state,
                    action,
                    noise_coord: None,
                });
            }
            for j in 0..d_obs - k {
                let state = match mode {
                    BasisMode::Balanced => j % k,
                    BasisMode::Unbalanced => world.start_state(),
                };
                support.push(SupportPoint {
                    state,
                    action,
                    noise_coord: Some(j),
                });
            }
        }
        let dist = match mode {
            BasisMode::Balanced => {
                let mut counts = vec![0usize; k * NUM_ACTIONS];
                for p in &support {
                    counts[p.state * NUM_ACTIONS + p.action] += 1;
                }
                let total = (k * NUM_ACTIONS) as f64;
                let weights = support
                    .iter()
                    .map(|p| 1.0 / (total * counts[p.state * NUM_ACTIONS + p.action] as f64))
                    .collect();
                Self::new(k, d_obs, support, weights)?
            }
            BasisMode::Unbalanced => Self::uniform(k, d_obs, support)?,
        };
        dist.verify_spanning()?;
        Ok(dist)
    }

    /// Checks that the noiseless ξ-templates span the ambient space.
    pub fn verify_spanning(&self) -> Result<()> {
        let rows: Vec<Vec<f64>> = self.support.iter().map(|p| self.template_ambient(p)).collect();
        let m = Matrix::from_rows(&rows)?;
        let svd = linalg::svd(&m)?;
        let smin = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
        if m.rows() < m.cols() || smin <= 1e-10 {
            return Err(Error::InvalidBasis(format!(
                "support does not span R^{} (smallest singular value {smin:e})",
                m.cols()
            )));
        }
        Ok(())
    }

    pub fn support(&self) -> &[SupportPoint] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn ambient_dim(&self) -> usize {
        NUM_ACTIONS * self.obs_dim
    }

    /// Total probability mass on each hidden state.
    pub fn state_histogram(&self) -> Vec<f64> {
        let mut h = vec![0.0; self.num_states];
        for (p, w) in self.support.iter().zip(&self.weights) {
            h[p.state] += w;
        }
        h
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.uniform {
            return rng.random_range(0..self.support.len());
        }
        let u: f64 = rng.random::<f64>() * self.cdf[self.cdf.len() - 1];
        self.cdf.partition_point(|&c| c <= u).min(self.support.len() - 1)
    }

    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> SupportPoint {
        self.support[self.sample_index(rng)]
    }

    /// Noiseless observation template of a support point.
    pub fn template(&self, p: &SupportPoint) -> Vec<f64> {
        let mut o = vec![0.0; self.obs_dim];
        o[p.state] = 1.0;
        if let Some(j) = p.noise_coord {
            o[self.num_states + j] += 1.0;
        }
        o
    }

    /// `ξ(template, action)`.
    pub fn template_ambient(&self, p: &SupportPoint) -> Vec<f64> {
        let mut x = vec![0.0; self.ambient_dim()];
        let off = p.action * self.obs_dim;
        x[off..off + self.obs_dim].copy_from_slice(&self.template(p));
        x
    }

    pub fn check_world(&self, world: &GridWorld) -> Result<()> {
        if world.num_states() != self.num_states || world.obs_dim() != self.obs_dim {
            return Err(Error::Shape(format!(
                "distribution built for K={} D_obs={}, world has K={} D_obs={}",
                self.num_states,
                self.obs_dim,
                world.num_states(),
                world.obs_dim()
            )));
        }
        Ok(())
    }

    /// Draws `n` i.i.d. support points and returns their ξ-rows, each
    /// observation being the template plus `N(0, noise_std²)` noise on the
    /// noise coordinates.
    pub fn sample_design<R: Rng + ?Sized>(
        &self,
        world: &GridWorld,
        n: usize,
        noise_std: f64,
        rng: &mut R,
    ) -> Result<(Matrix, Vec<SupportPoint>)> {
        self.check_world(world)?;
        if n == 0 {
            return Err(Error::Domain("sample size must be positive".into()));
        }
        let d_obs = self.obs_dim;
        let mut design = Matrix::zeros(n, self.ambient_dim());
        let mut points = Vec::with_capacity(n);
        let mut obs = vec![0.0; d_obs];
        for i in 0..n {
            let p = self.sample_point(rng);
            world.observe_into(p.state, p.noise_coord, noise_std, rng, &mut obs);
            let off = p.action * d_obs;
            design.row_mut(i)[off..off + d_obs].copy_from_slice(&obs);
            points.push(p);
        }
        Ok((design, points))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("distribution serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// κ together with the feature second-moment matrix it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    /// `1 / min_eig`, or `f64::INFINITY` when degenerate.
    pub kappa: f64,
    pub infinite: bool,
    pub min_eig: f64,
    pub covariance: Matrix,
}

impl KappaReport {
    fn from_covariance(covariance: Matrix) -> Result<Self> {
        let min_eig = linalg::min_eigenvalue(&covariance)?;
        let infinite = min_eig <= KAPPA_DEGENERATE_EIG;
        Ok(KappaReport {
            kappa: if infinite { f64::INFINITY } else { 1.0 / min_eig },
            infinite,
            min_eig,
            covariance,
        })
    }
}

fn add_outer(cov: &mut [f64], d: usize, z: &[f64], w: f64) {
    for i in 0..d {
        let zi = w * z[i];
        if zi == 0.0 {
            continue;
        }
        let row = &mut cov[i * d..(i + 1) * d];
        for j in i..d {
            row[j] += zi * z[j];
        }
    }
}

fn symmetric_from_upper(upper: Vec<f64>, d: usize) -> Matrix {
    let mut m = Matrix::from_vec(d, d, upper).expect("square buffer");
    for i in 0..d {
        for j in 0..i {
            let v = m.get(j, i);
            m.set(i, j, v);
        }
    }
    m
}

/// `B̂ᵀ x` for the block-sparse ξ of an observation under `action`.
pub(crate) fn project_block(b_hat: &Matrix, obs: &[f64], action: usize, out: &mut [f64]) {
    let d_obs = obs.len();
    out.iter_mut().for_each(|z| *z = 0.0);
    for (i, &x) in obs.iter().enumerate() {
        if x != 0.0 {
            linalg::axpy(x, b_hat.row(action * d_obs + i), out);
        }
    }
}

/// Closed-form κ over the finite support using noiseless templates.
pub fn lafa_kappa(b_hat: &Matrix, dist: &SamplingDistribution) -> Result<KappaReport> {
    if b_hat.rows() != dist.ambient_dim() {
        return Err(Error::Shape(format!(
            "representation has {} rows, ambient dimension is {}",
            b_hat.rows(),
            dist.ambient_dim()
        )));
    }
    linalg::check_orthonormal_columns(b_hat, 1e-8)?;
    let d = b_hat.cols();
    let mut cov = vec![0.0; d * d];
    let mut z = vec![0.0; d];
    for (p, &w) in dist.support.iter().zip(&dist.weights) {
        project_block(b_hat, &dist.template(p), p.action, &mut z);
        add_outer(&mut cov, d, &z, w);
    }
    KappaReport::from_covariance(symmetric_from_upper(cov, d))
}

/// Monte Carlo κ from `draws` samples, observations noised with `noise_std`.
pub fn monte_carlo_kappa<R: Rng + ?Sized>(
    b_hat: &Matrix,
    world: &GridWorld,
    dist: &SamplingDistribution,
    draws: usize,
    noise_std: f64,
    rng: &mut R,
) -> Result<KappaReport> {
    dist.check_world(world)?;
    if b_hat.rows() != dist.ambient_dim() {
        return Err(Error::Shape(
            "representation does not match ambient dimension".into(),
        ));
    }
    if draws == 0 {
        return Err(Error::Domain("need at least one draw".into()));
    }
    let d = b_hat.cols();
    let mut cov = vec![0.0; d * d];
    let mut z = vec![0.0; d];
    let mut obs = vec![0.0; dist.obs_dim];
    let w = 1.0 / draws as f64;
    for _ in 0..draws {
        let p = dist.sample_point(rng);
        world.observe_into(p.state, p.noise_coord, noise_std, rng, &mut obs);
        project_block(b_hat, &obs, p.action, &mut z);
        add_outer(&mut cov, d, &z, w);
    }
    KappaReport::from_covariance(symmetric_from_upper(cov, d))
}
