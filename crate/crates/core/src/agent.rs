//! Tabular SARSA(λ) over the construction maze.
//!
//! Values and eligibility traces are dense `(N−K+1) × (K+1) × 2` tables indexed
//! by `(downs, rights, action)`. Traces accumulate (`+= 1` on the visited pair)
//! and decay by `γλ` every step. Since every move advances the bit index, a pair
//! is visited at most once per episode, so the trace also keeps the list of
//! pairs touched this episode and only walks those; every other entry is zero
//! and contributes nothing to the value update.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{derive_seed, ChannelConfig};
use crate::game::{Action, ConstructionGame, Maze, MazeState};
use crate::polar::CodeConstruction;
use crate::{Error, Result};

const CHANNEL_STREAM: u64 = 1;
const POLICY_STREAM: u64 = 2;
const QTABLE_HEADER: &str = "qtable v1";

#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    maze: Maze,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(maze: Maze) -> Self {
        Self {
            values: vec![0.0; maze.num_states() * 2],
            maze,
        }
    }

    pub fn maze(&self) -> &Maze {
        &self.maze
    }

    #[inline]
    fn index(&self, s: MazeState, a: Action) -> usize {
        (s.downs * self.maze.cols() + s.rights) * 2 + a.index()
    }

    pub fn get(&self, s: MazeState, a: Action) -> f64 {
        self.values[self.index(s, a)]
    }

    pub fn set(&mut self, s: MazeState, a: Action, v: f64) {
        let i = self.index(s, a);
        self.values[i] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Adds `c` to every entry.
    pub fn shift(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v += c);
    }

    /// Highest-valued legal action; ties go to `Down`.
    pub fn greedy(&self, s: MazeState, legal: &[Action]) -> Action {
        let mut best = legal[0];
        for &a in &legal[1..] {
            if self.get(s, a) > self.get(s, best) {
                best = a;
            }
        }
        best
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(&path, e))?;
        Self::parse(&text)
    }

    /// `qtable v1 N <int> K <int>` then one `d r a value` line per entry.
    pub fn to_text(&self) -> String {
        let mut out = format!("{QTABLE_HEADER} N {} K {}\n", self.maze.n_total(), self.maze.k());
        for d in 0..self.maze.rows() {
            for r in 0..self.maze.cols() {
                for a in Action::ALL {
                    let v = self.get(MazeState { downs: d, rights: r }, a);
                    writeln!(out, "{d} {r} {} {v:?}", a.index()).expect("writing to a String");
                }
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty file"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (n_total, k) = match fields.as_slice() {
            ["qtable", "v1", "N", n, "K", k] => match (n.parse(), k.parse()) {
                (Ok(n), Ok(k)) => (n, k),
                _ => return Err(Error::parse(1, "bad N or K")),
            },
            _ => return Err(Error::parse(1, format!("expected `{QTABLE_HEADER} N <int> K <int>`"))),
        };
        let maze = Maze::new(n_total, k).map_err(|e| Error::parse(1, e.to_string()))?;
        let mut q = QTable::zeros(maze);
        let mut seen = vec![false; q.values.len()];
        for (i, line) in lines {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let [d, r, a, v] = f.as_slice() else {
                return Err(Error::parse(lineno, "expected `d r a value`"));
            };
            let bad = |what: &str| Error::parse(lineno, format!("bad {what}"));
            let s = MazeState {
                downs: d.parse().map_err(|_| bad("d"))?,
                rights: r.parse().map_err(|_| bad("r"))?,
            };
            let a = match *a {
                "0" => Action::Down,
                "1" => Action::Right,
                _ => return Err(bad("action")),
            };
            let v: f64 = v.parse().map_err(|_| bad("value"))?;
            if !maze.contains(s) {
                return Err(Error::parse(lineno, format!("{s:?} outside the maze")));
            }
            let idx = q.index(s, a);
            if seen[idx] {
                return Err(Error::parse(lineno, "duplicate entry"));
            }
            seen[idx] = true;
            q.values[idx] = v;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::parse(text.lines().count(), "missing entries"));
        }
        Ok(q)
    }
}

/// Accumulating eligibility trace, zero at the start of every episode.
#[derive(Clone, Debug)]
pub struct EligibilityTrace {
    values: Vec<f64>,
    active: Vec<usize>,
}

impl EligibilityTrace {
    pub fn zeros(maze: Maze) -> Self {
        Self {
            values: vec![0.0; maze.num_states() * 2],
            active: Vec::with_capacity(maze.n_total()),
        }
    }

    pub fn clear(&mut self) {
        for &i in &self.active {
            self.values[i] = 0.0;
        }
        self.active.clear();
    }

    pub fn get(&self, q: &QTable, s: MazeState, a: Action) -> f64 {
        self.values[q.index(s, a)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `δ = r + γ·Q(s', a') − Q(s, a)`; pass `q_next = 0` for a terminal successor.
pub fn td_error(reward: f64, q_next: f64, q_cur: f64, gamma: f64) -> f64 {
    reward + gamma * q_next - q_cur
}

/// Decays the trace by `γλ`, bumps `(s, a)`, then moves every value by `ρ·δ·e`.
#[allow(clippy::too_many_arguments)]
pub fn trace_and_value_update(
    q: &mut QTable,
    e: &mut EligibilityTrace,
    s: MazeState,
    a: Action,
    delta: f64,
    gamma: f64,
    lambda: f64,
    rho: f64,
) {
    let decay = gamma * lambda;
    for &i in &e.active {
        e.values[i] *= decay;
    }
    let idx = q.index(s, a);
    if !e.active.contains(&idx) {
        e.active.push(idx);
    }
    e.values[idx] += 1.0;
    let step = rho * delta;
    for &i in &e.active {
        q.values[i] += step * e.values[i];
    }
}

/// ε-greedy choice: uniform over `legal` with probability `eps`, else greedy.
pub fn epsilon_greedy<R: Rng + ?Sized>(q: &QTable, s: MazeState, eps: f64, legal: &[Action], rng: &mut R) -> Action {
    if eps > 0.0 && rng.random::<f64>() < eps {
        legal[rng.random_range(0..legal.len())]
    } else {
        q.greedy(s, legal)
    }
}

/// Follows the greedy policy from the start cell and returns the construction it traces.
pub fn extract_construction(q: &QTable) -> CodeConstruction {
    let maze = *q.maze();
    let mut s = MazeState::START;
    let mut actions = Vec::with_capacity(maze.n_total());
    while !maze.is_terminal(s) {
        let legal = maze.legal_actions(s).expect("non-terminal state inside the maze");
        let a = q.greedy(s, legal);
        actions.push(a);
        s = s.after(a);
    }
    CodeConstruction::from_actions(&actions, maze.n_total(), maze.k()).expect("greedy walk ends at the terminal cell")
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub n_total: usize,
    pub k: usize,
    pub snr_db: f64,
    pub list_size: usize,
    pub episodes: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub rho: f64,
    pub eps0: f64,
    pub eps_min: f64,
    /// Per-episode decay factor; `None` reaches `eps_min` at 60% of the budget.
    pub eps_decay: Option<f64>,
    pub seed: u64,
}

impl TrainConfig {
    /// Defaults: γ = 1, ρ = 0.05, ε from 0.3 down to 0.01, λ = 0.3 for
    /// `N ≤ 32` and 0.75 above.
    pub fn new(n_total: usize, k: usize, snr_db: f64, list_size: usize, episodes: usize, seed: u64) -> Self {
        Self {
            n_total,
            k,
            snr_db,
            list_size,
            episodes,
            gamma: 1.0,
            lambda: default_lambda(n_total),
            rho: 0.05,
            eps0: 0.3,
            eps_min: 0.01,
            eps_decay: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        Maze::new(self.n_total, self.k)?;
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma {} outside (0, 1]", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda {} outside [0, 1]", self.lambda));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.rho));
        }
        if !(0.0 <= self.eps_min && self.eps_min <= self.eps0 && self.eps0 <= 1.0) {
            return bad(format!("need 0 <= eps_min ({}) <= eps0 ({}) <= 1", self.eps_min, self.eps0));
        }
        if let Some(d) = self.eps_decay {
            if !(d > 0.0 && d <= 1.0) {
                return bad(format!("eps decay {d} outside (0, 1]"));
            }
        }
        if self.list_size == 0 {
            return bad("list size must be at least 1".into());
        }
        if self.episodes == 0 {
            return bad("need at least one episode".into());
        }
        Ok(())
    }

    pub fn resolved_eps_decay(&self) -> f64 {
        self.eps_decay.unwrap_or_else(|| {
            if self.eps0 <= self.eps_min || self.eps0 == 0.0 {
                1.0
            } else {
                let horizon = (0.6 * self.episodes as f64).max(1.0);
                (self.eps_min / self.eps0).powf(1.0 / horizon)
            }
        })
    }

    /// `ε_i = max(eps_min, eps0 · decay^i)`.
    pub fn epsilon(&self, episode: usize) -> f64 {
        (self.eps0 * self.resolved_eps_decay().powf(episode as f64)).max(self.eps_min)
    }

    /// The game this configuration trains on; its noise is keyed off `seed`.
    pub fn game(&self) -> Result<ConstructionGame> {
        let channel = ChannelConfig::for_code(self.snr_db, self.n_total, self.k, derive_seed(self.seed, CHANNEL_STREAM))?;
        ConstructionGame::new(self.n_total, self.k, channel, self.list_size)
    }
}

pub fn default_lambda(n_total: usize) -> f64 {
    if n_total <= 32 {
        0.3
    } else {
        0.75
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub ret: f64,
    pub epsilon: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub episodes: Vec<EpisodeRecord>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("episode,return,epsilon,steps\n");
        for r in &self.episodes {
            writeln!(out, "{},{},{},{}", r.episode, r.ret, r.epsilon, r.steps).expect("writing to a String");
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Mean return over the last `n` episodes.
    pub fn tail_mean_return(&self, n: usize) -> f64 {
        let tail = &self.episodes[self.episodes.len().saturating_sub(n)..];
        tail.iter().map(|r| r.ret).sum::<f64>() / tail.len().max(1) as f64
    }
}

pub fn train(cfg: &TrainConfig) -> Result<(QTable, TrainLog)> {
    train_with(cfg, &cfg.game()?, |_, _| {})
}

/// Runs on-policy SARSA(λ) on `game`; `observe(episode, q)` is called after every episode.
pub fn train_with<F>(cfg: &TrainConfig, game: &ConstructionGame, mut observe: F) -> Result<(QTable, TrainLog)>
where
    F: FnMut(usize, &QTable),
{
    cfg.validate()?;
    let maze = *game.maze();
    if maze.n_total() != cfg.n_total || maze.k() != cfg.k {
        return Err(Error::Config("game dimensions differ from the training config".into()));
    }
    let mut q = QTable::zeros(maze);
    let mut trace = EligibilityTrace::zeros(maze);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, POLICY_STREAM));
    let mut log = TrainLog {
        episodes: Vec::with_capacity(cfg.episodes),
    };

    for episode in 0..cfg.episodes {
        let eps = cfg.epsilon(episode);
        trace.clear();
        let mut ep = game.reset_indexed(episode as u64)?;
        let mut s = ep.state();
        let mut a = epsilon_greedy(&q, s, eps, maze.legal_actions(s)?, &mut rng);
        loop {
            let t = ep.step(a)?;
            let next_a = if t.done {
                None
            } else {
                Some(epsilon_greedy(&q, t.next, eps, maze.legal_actions(t.next)?, &mut rng))
            };
            let q_next = next_a.map_or(0.0, |na| q.get(t.next, na));
            let delta = td_error(t.reward, q_next, q.get(s, a), cfg.gamma);
            trace_and_value_update(&mut q, &mut trace, s, a, delta, cfg.gamma, cfg.lambda, cfg.rho);
            match next_a {
                Some(na) => {
                    s = t.next;
                    a = na;
                }
                None => break,
            }
        }
        log.episodes.push(EpisodeRecord {
            episode,
            ret: ep.return_so_far(),
            epsilon: eps,
            steps: ep.state().k(),
        });
        observe(episode, &q);
    }
    Ok((q, log))
}
