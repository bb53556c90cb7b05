//! The construction maze.
//!
//! The maze has `N − K + 1` rows and `K + 1` columns. A state is the pair
//! `(downs, rights)`; moving down at step `k` freezes bit `k`, moving right
//! makes it an information bit. Every episode transmits a fresh all-zero
//! codeword and steps an SCL-genie decoder along with the agent. The only
//! nonzero reward is `−1`, given when a right move makes the decoder drop the
//! all-zero path, which also ends the episode.

use rand::Rng;

use crate::channel::{transmit_all_zero, ChannelConfig};
use crate::decoder::SclSession;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Down = 0,
    Right = 1,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Down, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct MazeState {
    pub downs: usize,
    pub rights: usize,
}

impl MazeState {
    pub const START: MazeState = MazeState { downs: 0, rights: 0 };

    /// Index of the bit decided by the next move.
    pub fn k(&self) -> usize {
        self.downs + self.rights
    }

    pub fn after(self, a: Action) -> MazeState {
        match a {
            Action::Down => MazeState { downs: self.downs + 1, ..self },
            Action::Right => MazeState { rights: self.rights + 1, ..self },
        }
    }
}

/// Maze geometry for a `P(N, K)` construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Maze {
    n_total: usize,
    k: usize,
}

impl Maze {
    pub fn new(n_total: usize, k: usize) -> Result<Self> {
        crate::polar::log2_block_length(n_total)?;
        if k > n_total {
            return Err(Error::InvalidArgument(format!("K = {k} exceeds N = {n_total}")));
        }
        Ok(Self { n_total, k })
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rows(&self) -> usize {
        self.n_total - self.k + 1
    }

    pub fn cols(&self) -> usize {
        self.k + 1
    }

    pub fn num_states(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn contains(&self, s: MazeState) -> bool {
        s.downs < self.rows() && s.rights < self.cols()
    }

    pub fn is_terminal(&self, s: MazeState) -> bool {
        s.downs == self.n_total - self.k && s.rights == self.k
    }

    /// Moves that stay inside the maze. Never empty for a non-terminal state.
    pub fn legal_actions(&self, s: MazeState) -> Result<&'static [Action]> {
        if !self.contains(s) {
            return Err(Error::PathLeavesMaze(format!("{s:?} is outside the maze")));
        }
        if self.is_terminal(s) {
            return Err(Error::Protocol("no moves from the terminal cell".into()));
        }
        let down = s.downs < self.n_total - self.k;
        let right = s.rights < self.k;
        Ok(match (down, right) {
            (true, true) => &Action::ALL,
            (true, false) => &[Action::Down],
            _ => &[Action::Right],
        })
    }
}

/// Maze plus the channel and list size that generate its rewards.
#[derive(Clone, Debug)]
pub struct ConstructionGame {
    maze: Maze,
    channel: ChannelConfig,
    list_size: usize,
}

impl ConstructionGame {
    pub fn new(n_total: usize, k: usize, channel: ChannelConfig, list_size: usize) -> Result<Self> {
        if list_size == 0 {
            return Err(Error::Config("list size must be at least 1".into()));
        }
        Ok(Self {
            maze: Maze::new(n_total, k)?,
            channel,
            list_size,
        })
    }

    pub fn maze(&self) -> &Maze {
        &self.maze
    }

    pub fn channel(&self) -> &ChannelConfig {
        &self.channel
    }

    pub fn list_size(&self) -> usize {
        self.list_size
    }

    /// Starts an episode over a new all-zero transmission drawn from `rng`.
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Episode> {
        let frame = transmit_all_zero(self.maze.n_total, &self.channel, rng);
        Ok(Episode {
            maze: self.maze,
            state: MazeState::START,
            session: Some(SclSession::genie_all_zero(&frame, self.list_size)?),
            done: false,
            return_so_far: 0.0,
        })
    }

    /// Episode `index`, whose noise comes from the channel substream of the same number.
    pub fn reset_indexed(&self, index: u64) -> Result<Episode> {
        self.reset(&mut self.channel.frame_rng(index))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub next: MazeState,
    pub reward: f64,
    pub done: bool,
}

#[derive(Clone, Debug)]
pub struct Episode {
    maze: Maze,
    state: MazeState,
    session: Option<SclSession>,
    done: bool,
    return_so_far: f64,
}

impl Episode {
    pub fn state(&self) -> MazeState {
        self.state
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn return_so_far(&self) -> f64 {
        self.return_so_far
    }

    /// The live decoder, `None` once the episode has ended.
    pub fn session(&self) -> Option<&SclSession> {
        self.session.as_ref()
    }

    pub fn legal_actions(&self) -> Result<&'static [Action]> {
        if self.done {
            return Err(Error::Protocol("episode already finished".into()));
        }
        self.maze.legal_actions(self.state)
    }

    /// Decodes bit `k` as frozen (down) or nonfrozen (right) and returns the reward.
    pub fn step(&mut self, a: Action) -> Result<Transition> {
        if self.done {
            return Err(Error::Protocol("episode already finished".into()));
        }
        if !self.maze.legal_actions(self.state)?.contains(&a) {
            return Err(Error::PathLeavesMaze(format!("{a:?} from {:?}", self.state)));
        }
        let k = self.state.k();
        let session = self.session.as_mut().expect("live episode owns a session");
        let report = session.step(k, a == Action::Down)?;
        self.state = self.state.after(a);

        let dropped = a == Action::Right && report.reference_survives == Some(false);
        let reward = if dropped { -1.0 } else { 0.0 };
        self.return_so_far += reward;
        if dropped || k + 1 == self.maze.n_total {
            self.done = true;
            self.session = None;
        }
        Ok(Transition {
            next: self.state,
            reward,
            done: self.done,
        })
    }

    /// Plays a fixed action sequence until the episode ends; returns the episode return.
    pub fn replay(&mut self, actions: &[Action]) -> Result<f64> {
        for &a in actions {
            if self.done {
                break;
            }
            self.step(a)?;
        }
        Ok(self.return_so_far)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polar::CodeConstruction;

    fn game(n: usize, k: usize, snr: f64, list: usize) -> ConstructionGame {
        let ch = ChannelConfig::for_code(snr, n, k, 4).unwrap();
        ConstructionGame::new(n, k, ch, list).unwrap()
    }

    #[test]
    fn legal_moves_at_walls() {
        let maze = Maze::new(8, 3).unwrap();
        assert_eq!(maze.legal_actions(MazeState { downs: 5, rights: 1 }).unwrap(), &[Action::Right]);
        assert_eq!(maze.legal_actions(MazeState { downs: 2, rights: 3 }).unwrap(), &[Action::Down]);
        assert_eq!(maze.legal_actions(MazeState { downs: 2, rights: 1 }).unwrap(), &Action::ALL);
        assert!(matches!(maze.legal_actions(MazeState { downs: 5, rights: 3 }), Err(Error::Protocol(_))));
        assert_eq!(maze.num_states(), 6 * 4);
    }

    #[test]
    fn reset_starts_with_single_zero_path() {
        let g = game(16, 8, 0.0, 4);
        let ep = g.reset_indexed(0).unwrap();
        assert_eq!(ep.state(), MazeState::START);
        assert!(!ep.is_done());
        let paths = ep.session().unwrap().paths();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].pm(), 0.0);
    }

    #[test]
    fn same_substream_same_frame() {
        let g = game(16, 8, 0.0, 2);
        let a = g.reset_indexed(3).unwrap();
        let b = g.reset_indexed(3).unwrap();
        let c = g.reset_indexed(4).unwrap();
        assert_eq!(format!("{:?}", a.session().unwrap()), format!("{:?}", b.session().unwrap()));
        assert_ne!(format!("{:?}", a.session().unwrap()), format!("{:?}", c.session().unwrap()));
    }

    #[test]
    fn noiseless_episode_never_penalised() {
        let ch = ChannelConfig::for_code(0.0, 16, 8, 1).unwrap().noiseless();
        let g = ConstructionGame::new(16, 8, ch, 1).unwrap();
        for path in [
            CodeConstruction::from_info_positions(16, &(0..8).collect::<Vec<_>>()).unwrap(),
            CodeConstruction::from_info_positions(16, &[1, 2, 4, 8, 9, 12, 14, 15]).unwrap(),
        ] {
            let mut ep = g.reset_indexed(0).unwrap();
            assert_eq!(ep.replay(&path.to_actions()).unwrap(), 0.0);
            assert!(ep.is_done());
            assert!(g.maze().is_terminal(ep.state()));
        }
        let mut ep = g.reset_indexed(1).unwrap();
        ep.replay(&[Action::Down; 8]).unwrap();
        assert_eq!(ep.session().unwrap().paths()[0].pm(), 0.0);
    }

    #[test]
    fn down_moves_never_penalised() {
        let g = game(32, 16, -2.0, 1);
        for i in 0..200 {
            let mut ep = g.reset_indexed(i).unwrap();
            for _ in 0..16 {
                assert_eq!(ep.step(Action::Down).unwrap().reward, 0.0);
            }
        }
    }

    #[test]
    fn protocol_errors() {
        let g = game(4, 2, 10.0, 1);
        let mut ep = g.reset_indexed(0).unwrap();
        ep.step(Action::Right).unwrap();
        ep.step(Action::Right).unwrap();
        assert!(matches!(ep.step(Action::Right), Err(Error::PathLeavesMaze(_))));
        ep.step(Action::Down).unwrap();
        let t = ep.step(Action::Down).unwrap();
        assert!(t.done);
        assert!(matches!(ep.step(Action::Down), Err(Error::Protocol(_))));
        assert!(ep.session().is_none());
    }

    #[test]
    fn returns_are_zero_or_minus_one() {
        let g = game(16, 8, 0.0, 2);
        let path = CodeConstruction::from_info_positions(16, &[3, 7, 10, 11, 12, 13, 14, 15]).unwrap().to_actions();
        let mut failures = 0;
        for i in 0..500 {
            let mut ep = g.reset_indexed(i).unwrap();
            let mut steps = 0;
            for &a in &path {
                if ep.step(a).unwrap().done {
                    steps = ep.state().k();
                    break;
                }
            }
            let r = ep.return_so_far();
            assert!(r == 0.0 || r == -1.0);
            if r == 0.0 {
                assert_eq!(steps, 16);
            } else {
                failures += 1;
            }
        }
        assert!(failures > 0);
    }
}
