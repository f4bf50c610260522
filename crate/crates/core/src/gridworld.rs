//! Noisy grid-world testbed.
//!
//! The agent occupies one of `K` vacant cells (the hidden state) and sees an
//! observation `[e_s, o₂]` where `o₂ ~ N(0, σ′² I)` pads the one-hot position
//! to `obs_dim` coordinates. Actions are up, down, left, right; with
//! probability `p` the executed direction is replaced by one of the other
//! three uniformly. Entering a cell pays its reward (ground −1, fire −10,
//! destination +100); bumping into a wall or the boundary keeps the agent in
//! place and pays −1. Entering the destination ends the episode, and the
//! destination is an absorbing zero-reward state afterwards.
//!
//! A state-action pair is embedded as `ξ(obs, a)`: four blocks of `obs_dim`
//! coordinates, the observation placed in block `a`, zeros elsewhere.
//!
//! # Map format
//!
//! One line per grid row, one character per cell: `#` wall, `.` ground, `F`
//! fire, `G` destination, `S` start (a ground cell). Blank lines and lines
//! starting with `;` are ignored. Every row must have the same width.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::linear_mdp::{GenerativeReply, LinearMdpSpec};

pub const NUM_ACTIONS: usize = 4;
pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const LEFT: usize = 2;
pub const RIGHT: usize = 3;

pub const GROUND_REWARD: f64 = -1.0;
pub const FIRE_REWARD: f64 = -10.0;
pub const DESTINATION_REWARD: f64 = 100.0;
/// Reward for bumping into a wall or the boundary.
pub const BUMP_REWARD: f64 = GROUND_REWARD;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cell {
    Wall,
    Ground,
    Fire,
    Destination,
}

impl Cell {
    pub fn is_vacant(self) -> bool {
        self != Cell::Wall
    }

    /// Reward for entering the cell.
    pub fn reward(self) -> f64 {
        match self {
            Cell::Wall | Cell::Ground => GROUND_REWARD,
            Cell::Fire => FIRE_REWARD,
            Cell::Destination => DESTINATION_REWARD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    pub width: usize,
    pub height: usize,
    /// Row-major cells.
    pub cells: Vec<Cell>,
    /// `(row, col)` of the start cell.
    pub start: (usize, usize),
}

impl GridLayout {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cells = Vec::new();
        let mut width = None;
        let mut height = 0;
        let mut start = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.starts_with(';') {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: lineno + 1,
                message,
            };
            let chars: Vec<char> = line.chars().collect();
            match width {
                None => width = Some(chars.len()),
                Some(w) if w != chars.len() => {
                    return Err(parse_err(format!("row has {} cells, expected {w}", chars.len())))
                }
                _ => {}
            }
            for (col, ch) in chars.into_iter().enumerate() {
                let cell = match ch {
                    '#' => Cell::Wall,
                    '.' => Cell::Ground,
                    'F' => Cell::Fire,
                    'G' => Cell::Destination,
                    'S' => {
                        if start.is_some() {
                            return Err(parse_err("more than one start cell".into()));
                        }
                        start = Some((height, col));
                        Cell::Ground
                    }
                    other => return Err(parse_err(format!("unknown cell character {other:?}"))),
                };
                cells.push(cell);
            }
            height += 1;
        }
        let width = width.ok_or_else(|| Error::Parse {
            line: 0,
            message: "empty map".into(),
        })?;
        let start = start.ok_or_else(|| Error::Parse {
            line: 0,
            message: "map has no start cell 'S'".into(),
        })?;
        Ok(GridLayout {
            width,
            height,
            cells,
            start,
        })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(&path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in 0..self.height {
            for c in 0..self.width {
                let ch = match self.cell(r, c) {
                    _ if (r, c) == self.start => 'S',
                    Cell::Wall => '#',
                    Cell::Ground => '.',
                    Cell::Fire => 'F',
                    Cell::Destination => 'G',
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }

    #[inline]
    pub fn cell(&self, row: usize, col: usize) -> Cell {
        self.cells[row * self.width + col]
    }

    pub fn num_vacant(&self) -> usize {
        self.cells.iter().filter(|c| c.is_vacant()).count()
    }
}

/// One grid-world task: layout, observation model and dynamics parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub layout: GridLayout,
    /// Observation length `D_obs` (at least the number of vacant cells).
    pub obs_dim: usize,
    /// Standard deviation σ′ of the observation noise coordinates.
    pub noise_std: f64,
    /// Probability that the executed direction deviates from the chosen one.
    pub deviation_prob: f64,
    pub horizon: usize,
    /// Bound σ of the uniform reward noise returned by generative queries.
    #[serde(default)]
    pub reward_noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub next_state: usize,
    pub done: bool,
}

/// Observation `[o₁, o₂]`: one-hot hidden position followed by noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    values: Vec<f64>,
    num_states: usize,
}

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn o1(&self) -> &[f64] {
        &self.values[..self.num_states]
    }

    pub fn o2(&self) -> &[f64] {
        &self.values[self.num_states..]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

/// Validated grid-world with precomputed state indexing and moves.
#[derive(Debug, Clone)]
pub struct GridWorld {
    config: GridConfig,
    /// `(row, col)` of each hidden state.
    positions: Vec<(usize, usize)>,
    cell_types: Vec<Cell>,
    /// Result of moving in each direction: `None` on a bump.
    moves: Vec<[Option<usize>; NUM_ACTIONS]>,
    start: usize,
    destination: usize,
}

impl GridWorld {
    pub fn new(config: GridConfig) -> Result<Self> {
        let layout = &config.layout;
        if layout.cells.len() != layout.width * layout.height {
            return Err(Error::Config("cell count does not match grid size".into()));
        }
        if !(0.0..=1.0).contains(&config.deviation_prob) {
            return Err(Error::Config(format!(
                "deviation probability {} outside [0, 1]",
                config.deviation_prob
            )));
        }
        if !(config.noise_std >= 0.0) || !(config.reward_noise >= 0.0) {
            return Err(Error::Config("noise levels must be >= 0".into()));
        }
        if config.horizon == 0 {
            return Err(Error::Config("horizon must be positive".into()));
        }
        let mut index = vec![None; layout.cells.len()];
        let mut positions = Vec::new();
        let mut cell_types = Vec::new();
        for r in 0..layout.height {
            for c in 0..layout.width {
                let cell = layout.cell(r, c);
                if cell.is_vacant() {
                    index[r * layout.width + c] = Some(positions.len());
                    positions.push((r, c));
                    cell_types.push(cell);
                }
            }
        }
        let k = positions.len();
        if config.obs_dim < k {
            return Err(Error::Config(format!(
                "observation dimension {} is smaller than the {k} vacant cells",
                config.obs_dim
            )));
        }
        let destinations: Vec<usize> = (0..k).filter(|&s| cell_types[s] == Cell::Destination).collect();
        if destinations.len() != 1 {
            return Err(Error::Config(format!(
                "expected exactly one destination, found {}",
                destinations.len()
            )));
        }
        let (sr, sc) = layout.start;
        let start = (sr < layout.height && sc < layout.width)
            .then(|| index[sr * layout.width + sc])
            .flatten()
            .ok_or_else(|| Error::Config("start cell is not vacant".into()))?;
        if start == destinations[0] {
            return Err(Error::Config("start cell cannot be the destination".into()));
        }
        let moves = positions
            .iter()
            .map(|&(r, c)| {
                let target = |dr: isize, dc: isize| {
                    let nr = r as isize + dr;
                    let nc = c as isize + dc;
                    if nr < 0 || nc < 0 || nr >= layout.height as isize || nc >= layout.width as isize {
                        return None;
                    }
                    index[nr as usize * layout.width + nc as usize]
                };
                [target(-1, 0), target(1, 0), target(0, -1), target(0, 1)]
            })
            .collect();
        Ok(GridWorld {
            positions,
            cell_types,
            moves,
            start,
            destination: destinations[0],
            config,
        })
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    /// Number of hidden states `K`.
    pub fn num_states(&self) -> usize {
        self.positions.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.config.obs_dim
    }

    /// `4 · obs_dim`
    pub fn ambient_dim(&self) -> usize {
        NUM_ACTIONS * self.config.obs_dim
    }

    pub fn horizon(&self) -> usize {
        self.config.horizon
    }

    pub fn start_state(&self) -> usize {
        self.start
    }

    pub fn destination_state(&self) -> usize {
        self.destination
    }

    pub fn position(&self, s: usize) -> (usize, usize) {
        self.positions[s]
    }

    pub fn cell_type(&self, s: usize) -> Cell {
        self.cell_types[s]
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        s == self.destination
    }

    fn check_state(&self, s: usize) -> Result<()> {
        if s >= self.num_states() {
            return Err(Error::Domain(format!(
                "hidden state {s} outside 0..{}",
                self.num_states()
            )));
        }
        Ok(())
    }

    fn check_action(a: usize) -> Result<()> {
        if a >= NUM_ACTIONS {
            return Err(Error::Domain(format!("action {a} outside 0..{NUM_ACTIONS}")));
        }
        Ok(())
    }

    /// Writes an observation of `s` into `out` (length `obs_dim`). `spike`
    /// adds 1 to the given noise coordinate (0-based within `o₂`).
    /// Noise is drawn with standard deviation `sigma`.
    pub(crate) fn observe_into<R: Rng + ?Sized>(
        &self,
        s: usize,
        spike: Option<usize>,
        sigma: f64,
        rng: &mut R,
        out: &mut [f64],
    ) {
        let k = self.num_states();
        out[..k].iter_mut().for_each(|x| *x = 0.0);
        out[s] = 1.0;
        if sigma > 0.0 {
            for x in &mut out[k..] {
                *x = sigma * rng.sample::<f64, _>(StandardNormal);
            }
        } else {
            out[k..].iter_mut().for_each(|x| *x = 0.0);
        }
        if let Some(j) = spike {
            out[k + j] += 1.0;
        }
    }

    pub fn observe<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> Result<Observation> {
        self.check_state(s)?;
        let mut values = vec![0.0; self.obs_dim()];
        self.observe_into(s, None, self.config.noise_std, rng, &mut values);
        Ok(Observation {
            values,
            num_states: self.num_states(),
        })
    }

    /// Deterministic move in direction `dir` from `s`: `(next, reward, done)`.
    fn apply_move(&self, s: usize, dir: usize) -> (usize, f64, bool) {
        match self.moves[s][dir] {
            None => (s, BUMP_REWARD, false),
            Some(n) => (n, self.cell_types[n].reward(), n == self.destination),
        }
    }

    /// Probability of each executed direction when `action` is chosen.
    pub fn direction_probs(&self, action: usize) -> [f64; NUM_ACTIONS] {
        let p = self.config.deviation_prob;
        let mut probs = [p / 3.0; NUM_ACTIONS];
        probs[action] = 1.0 - p;
        probs
    }

    pub fn step<R: Rng + ?Sized>(&self, s: usize, action: usize, rng: &mut R) -> Result<StepOutcome> {
        self.check_state(s)?;
        Self::check_action(action)?;
        if self.is_terminal(s) {
            return Err(Error::InvalidTransition(
                "episode already ended at the destination".into(),
            ));
        }
        let p = self.config.deviation_prob;
        let dir = if p > 0.0 && rng.random::<f64>() < p {
            let k = rng.random_range(0..NUM_ACTIONS - 1);
            if k >= action {
                k + 1
            } else {
                k
            }
        } else {
            action
        };
        let (next_state, reward, done) = self.apply_move(s, dir);
        Ok(StepOutcome {
            reward,
            next_state,
            done,
        })
    }

    /// Generative-model access: the destination answers with zero reward and
    /// stays terminal; other states step normally. Uniform reward noise of
    /// bound σ is added to the reply.
    pub fn query<R: Rng + ?Sized>(&self, s: usize, action: usize, rng: &mut R) -> Result<GenerativeReply> {
        self.check_state(s)?;
        Self::check_action(action)?;
        let (reward, next_state, done) = if self.is_terminal(s) {
            (0.0, s, true)
        } else {
            let o = self.step(s, action, rng)?;
            (o.reward, o.next_state, o.done)
        };
        let sigma = self.config.reward_noise;
        let noise = if sigma > 0.0 {
            rng.random_range(-sigma..=sigma)
        } else {
            0.0
        };
        Ok(GenerativeReply {
            reward: reward + noise,
            next_state,
            done,
        })
    }

    /// `ξ(obs, a)`.
    pub fn vectorize(&self, observation: &[f64], action: usize) -> Result<Vec<f64>> {
        vectorize(observation, action)
    }

    /// `B* = [e_1..e_K, e_{D+1}..e_{D+K}, …]`: selects the one-hot coordinates
    /// of every action block. Shape `4·obs_dim × 4K`.
    pub fn ground_truth_representation(&self) -> Matrix {
        let k = self.num_states();
        let d_obs = self.obs_dim();
        let mut b = Matrix::zeros(self.ambient_dim(), NUM_ACTIONS * k);
        for a in 0..NUM_ACTIONS {
            for s in 0..k {
                b.set(a * d_obs + s, a * k + s, 1.0);
            }
        }
        b
    }

    /// Whether ambient coordinate `i` is one of the one-hot coordinates.
    pub fn is_informative_coordinate(&self, i: usize) -> bool {
        i % self.obs_dim() < self.num_states()
    }

    /// Exact hidden-state dynamics as a tabular linear MDP. The destination
    /// is absorbing with zero reward.
    pub fn build_tabular_oracle(&self) -> Result<LinearMdpSpec> {
        let k = self.num_states();
        let pairs = k * NUM_ACTIONS;
        let mut table = Matrix::zeros(pairs, k);
        let mut rewards = vec![0.0; pairs];
        for s in 0..k {
            for a in 0..NUM_ACTIONS {
                let pair = s * NUM_ACTIONS + a;
                if self.is_terminal(s) {
                    table.set(pair, s, 1.0);
                    continue;
                }
                for (dir, &prob) in self.direction_probs(a).iter().enumerate() {
                    if prob == 0.0 {
                        continue;
                    }
                    let (next, reward, _) = self.apply_move(s, dir);
                    let cur = table.get(pair, next);
                    table.set(pair, next, cur + prob);
                    rewards[pair] += prob * reward;
                }
            }
        }
        LinearMdpSpec::tabular(
            k,
            NUM_ACTIONS,
            self.horizon(),
            &table,
            &rewards,
            self.config.reward_noise,
        )
    }
}

/// `ξ(obs, a)`: the observation placed in block `a` of four.
pub fn vectorize(observation: &[f64], action: usize) -> Result<Vec<f64>> {
    GridWorld::check_action(action)?;
    let d = observation.len();
    let mut x = vec![0.0; NUM_ACTIONS * d];
    x[action * d..(action + 1) * d].copy_from_slice(observation);
    Ok(x)
}

/// Distribution over tasks sharing a layout: random destination, fire cells
/// and deviation probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDistribution {
    /// Fire count is drawn uniformly from `0..=max_fires`.
    pub max_fires: usize,
    pub deviation_range: (f64, f64),
    /// Keep the base layout's destination instead of drawing one.
    #[serde(default)]
    pub keep_destination: bool,
}

impl Default for TaskDistribution {
    fn default() -> Self {
        TaskDistribution {
            max_fires: 2,
            deviation_range: (0.0, 0.2),
            keep_destination: false,
        }
    }
}

impl TaskDistribution {
    /// Draws one task on `base`'s vacant cells; the start cell is kept.
    pub fn sample<R: Rng + ?Sized>(&self, base: &GridConfig, rng: &mut R) -> Result<GridConfig> {
        let (lo, hi) = self.deviation_range;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::Config(format!("invalid deviation range ({lo}, {hi})")));
        }
        let layout = &base.layout;
        let start_idx = layout.start.0 * layout.width + layout.start.1;
        let mut candidates: Vec<usize> = (0..layout.cells.len())
            .filter(|&i| layout.cells[i].is_vacant() && i != start_idx)
            .collect();
        if candidates.is_empty() {
            return Err(Error::Config("layout has no cell besides the start".into()));
        }
        let dest = if self.keep_destination {
            let i = layout
                .cells
                .iter()
                .position(|&c| c == Cell::Destination)
                .ok_or_else(|| Error::Config("base layout has no destination to keep".into()))?;
            candidates.retain(|&c| c != i);
            i
        } else {
            candidates.remove(rng.random_range(0..candidates.len()))
        };
        let fires = rng.random_range(0..=self.max_fires).min(candidates.len());
        let mut fire_cells = Vec::with_capacity(fires);
        for _ in 0..fires {
            fire_cells.push(candidates.remove(rng.random_range(0..candidates.len())));
        }
        let cells = layout
            .cells
            .iter()
            .enumerate()
            .map(|(i, &c)| match c {
                Cell::Wall => Cell::Wall,
                _ if i == dest => Cell::Destination,
                _ if fire_cells.contains(&i) => Cell::Fire,
                _ => Cell::Ground,
            })
            .collect();
        let deviation_prob = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        Ok(GridConfig {
            layout: GridLayout {
                cells,
                ..layout.clone()
            },
            deviation_prob,
            ..base.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    pub(crate) fn corridor(p: f64) -> GridWorld {
        GridWorld::new(GridConfig {
            layout: GridLayout::parse("S.G").unwrap(),
            obs_dim: 3,
            noise_std: 0.0,
            deviation_prob: p,
            horizon: 3,
            reward_noise: 0.0,
        })
        .unwrap()
    }

    #[test]
    fn parse_round_trip_and_errors() {
        let text = "S.#\n.FG\n";
        let layout = GridLayout::parse(text).unwrap();
        assert_eq!((layout.width, layout.height), (3, 2));
        assert_eq!(layout.start, (0, 0));
        assert_eq!(layout.num_vacant(), 5);
        assert_eq!(layout.to_text(), text);
        assert!(matches!(
            GridLayout::parse("S.\n...\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            GridLayout::parse("S.x"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(GridLayout::parse("..G").is_err());
    }

    #[test]
    fn config_invariants() {
        let base = corridor(0.0).config().clone();
        let mut bad = base.clone();
        bad.obs_dim = 2;
        assert!(GridWorld::new(bad).is_err());
        let mut bad = base.clone();
        bad.deviation_prob = 1.5;
        assert!(GridWorld::new(bad).is_err());
        let mut bad = base;
        bad.layout = GridLayout::parse("S.G.G").unwrap();
        bad.obs_dim = 5;
        assert!(GridWorld::new(bad).is_err());
    }

    #[test]
    fn observation_one_hot() {
        let world = GridWorld::new(GridConfig {
            layout: GridLayout::parse("S...G").unwrap(),
            obs_dim: 8,
            noise_std: 0.0,
            deviation_prob: 0.0,
            horizon: 2,
            reward_noise: 0.0,
        })
        .unwrap();
        let mut rng = seed::rng(0);
        let obs = world.observe(3, &mut rng).unwrap();
        assert_eq!(obs.o1(), &[0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(obs.o2(), &[0.0; 3]);
        assert!(matches!(world.observe(5, &mut rng), Err(Error::Domain(_))));
    }

    #[test]
    fn deterministic_moves_and_rewards() {
        let world = corridor(0.0);
        let mut rng = seed::rng(0);
        let o = world.step(0, RIGHT, &mut rng).unwrap();
        assert_eq!((o.reward, o.next_state, o.done), (GROUND_REWARD, 1, false));
        let o = world.step(1, RIGHT, &mut rng).unwrap();
        assert_eq!((o.reward, o.next_state, o.done), (DESTINATION_REWARD, 2, true));
        let o = world.step(0, LEFT, &mut rng).unwrap();
        assert_eq!((o.reward, o.next_state, o.done), (BUMP_REWARD, 0, false));
        assert!(matches!(
            world.step(2, LEFT, &mut rng),
            Err(Error::InvalidTransition(_))
        ));
        let q = world.query(2, LEFT, &mut rng).unwrap();
        assert_eq!((q.reward, q.next_state, q.done), (0.0, 2, true));
    }

    #[test]
    fn full_deviation_frequencies() {
        // Open 3x3 room so every direction is distinguishable from the centre.
        let world = GridWorld::new(GridConfig {
            layout: GridLayout::parse("G..\n.S.\n...").unwrap(),
            obs_dim: 9,
            noise_std: 0.0,
            deviation_prob: 1.0,
            horizon: 1,
            reward_noise: 0.0,
        })
        .unwrap();
        let centre = world.start_state();
        let mut rng = seed::rng(5);
        let trials = 100_000;
        let mut counts = [0usize; NUM_ACTIONS];
        for _ in 0..trials {
            let o = world.step(centre, UP, &mut rng).unwrap();
            let dir = (0..NUM_ACTIONS)
                .find(|&d| world.moves[centre][d] == Some(o.next_state))
                .unwrap();
            counts[dir] += 1;
        }
        assert!((counts[UP] as f64 / trials as f64) < 0.01);
        for d in [DOWN, LEFT, RIGHT] {
            assert!((counts[d] as f64 / trials as f64 - 1.0 / 3.0).abs() < 0.01);
        }
    }

    #[test]
    fn vectorize_blocks() {
        let obs = [0.5, -1.0, 2.0];
        let x = vectorize(&obs, 0).unwrap();
        assert_eq!(&x[..3], &obs);
        assert!(x[3..].iter().all(|v| *v == 0.0));
        let x = vectorize(&obs, 3).unwrap();
        assert_eq!(&x[9..12], &obs);
        for a in 0..NUM_ACTIONS {
            let x = vectorize(&obs, a).unwrap();
            let n: f64 = x.iter().map(|v| v * v).sum();
            assert!((n - 5.25).abs() < 1e-15);
        }
        assert!(vectorize(&obs, 4).is_err());
    }

    #[test]
    fn ground_truth_columns() {
        let world = GridWorld::new(GridConfig {
            layout: GridLayout::parse("SG").unwrap(),
            obs_dim: 3,
            noise_std: 0.0,
            deviation_prob: 0.0,
            horizon: 1,
            reward_noise: 0.0,
        })
        .unwrap();
        let b = world.ground_truth_representation();
        assert_eq!(b.shape(), (12, 8));
        let expected_rows = [0, 1, 3, 4, 6, 7, 9, 10];
        for (j, &i) in expected_rows.iter().enumerate() {
            let col = b.column(j);
            assert_eq!(col[i], 1.0);
            assert_eq!(col.iter().sum::<f64>(), 1.0);
        }
        let gram = b.transpose().matmul(&b).unwrap();
        assert_eq!(gram, Matrix::identity(8));
    }

    #[test]
    fn corridor_oracle_is_deterministic_shift() {
        let spec = corridor(0.0).build_tabular_oracle().unwrap();
        assert_eq!(spec.transition_row(0, RIGHT), &[0.0, 1.0, 0.0]);
        assert_eq!(spec.transition_row(1, RIGHT), &[0.0, 0.0, 1.0]);
        assert_eq!(spec.transition_row(1, LEFT), &[1.0, 0.0, 0.0]);
        assert_eq!(spec.transition_row(0, UP), &[1.0, 0.0, 0.0]);
        assert_eq!(spec.reward(1, RIGHT), DESTINATION_REWARD);
        assert_eq!(spec.reward(2, LEFT), 0.0);
    }

    #[test]
    fn task_distribution_keeps_layout() {
        let base = GridConfig {
            layout: GridLayout::parse("S..#\n.#..\n.#.#\n..##").unwrap(),
            obs_dim: 12,
            noise_std: 0.1,
            deviation_prob: 0.05,
            horizon: 4,
            reward_noise: 0.0,
        };
        let dist = TaskDistribution {
            max_fires: 3,
            deviation_range: (0.0, 0.2),
            keep_destination: false,
        };
        let mut rng = seed::rng(9);
        for _ in 0..50 {
            let task = dist.sample(&base, &mut rng).unwrap();
            let world = GridWorld::new(task.clone()).unwrap();
            assert_eq!(world.num_states(), 10);
            assert_eq!(task.layout.start, base.layout.start);
            assert!((0.0..=0.2).contains(&task.deviation_prob));
            let fires = task.layout.cells.iter().filter(|c| **c == Cell::Fire).count();
            assert!(fires <= 3);
        }
        let keep = TaskDistribution {
            keep_destination: true,
            ..dist
        };
        assert!(keep.sample(&base, &mut rng).is_err());
        let with_goal = GridConfig {
            layout: GridLayout::parse("S..#\n.#.G\n.#.#\n..##").unwrap(),
            ..base
        };
        for _ in 0..20 {
            let task = keep.sample(&with_goal, &mut rng).unwrap();
            assert_eq!(task.layout.cell(1, 3), Cell::Destination);
        }
    }
}
