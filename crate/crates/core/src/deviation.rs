//! Two-player turn-based deviation games and their solvers.
//!
//! For a deviator `j`, the coalition (player zero) owns `(v, q)` pairs and
//! proposes a decision; the deviator (player one) owns `(v, q, d)` triples
//! and may replace its own action in `d`. `q` follows `j`'s comparator for
//! the improvement threshold.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use serde_json::json;

use crate::comparator::{build_comparator, CompState, Comparator, ComparatorKind};
use crate::error::{Error, Result};
use crate::game::{DecisionId, Game, RewardBounds, StateId};
use crate::goal::{Goal, Relation};
use crate::rational::{format_rational, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Player {
    Zero,
    One,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::Zero => Player::One,
            Player::One => Player::Zero,
        }
    }
}

/// A finite turn-based game with a reachability objective for `reacher`;
/// the other player wins by avoiding `target` forever.
#[derive(Debug, Clone)]
pub struct TurnGame {
    owner: Vec<Player>,
    offsets: Vec<usize>,
    edges: Vec<usize>,
    target: Vec<bool>,
    reacher: Player,
}

impl TurnGame {
    pub fn new(
        owner: Vec<Player>,
        successors: Vec<Vec<usize>>,
        target: Vec<bool>,
        reacher: Player,
    ) -> Result<Self> {
        let n = owner.len();
        if successors.len() != n || target.len() != n {
            return Err(Error::Unsupported(
                "turn game vectors differ in length".into(),
            ));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut edges = Vec::new();
        offsets.push(0);
        for (s, succ) in successors.iter().enumerate() {
            if succ.is_empty() {
                return Err(Error::Unsupported(format!(
                    "turn-game state {s} has no successor"
                )));
            }
            if let Some(&bad) = succ.iter().find(|&&t| t >= n) {
                return Err(Error::Unsupported(format!(
                    "edge {s} -> {bad} leaves the game"
                )));
            }
            edges.extend_from_slice(succ);
            offsets.push(edges.len());
        }
        Ok(Self {
            owner,
            offsets,
            edges,
            target,
            reacher,
        })
    }

    pub fn num_states(&self) -> usize {
        self.owner.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn owner(&self, s: usize) -> Player {
        self.owner[s]
    }

    pub fn successors(&self, s: usize) -> &[usize] {
        &self.edges[self.offsets[s]..self.offsets[s + 1]]
    }

    pub fn is_target(&self, s: usize) -> bool {
        self.target[s]
    }

    pub fn reacher(&self) -> Player {
        self.reacher
    }

    fn predecessors(&self) -> (Vec<usize>, Vec<usize>) {
        let n = self.num_states();
        let mut count = vec![0usize; n + 1];
        for &t in &self.edges {
            count[t + 1] += 1;
        }
        for i in 0..n {
            count[i + 1] += count[i];
        }
        let mut fill = count.clone();
        let mut preds = vec![0; self.edges.len()];
        for s in 0..n {
            for &t in self.successors(s) {
                preds[fill[t]] = s;
                fill[t] += 1;
            }
        }
        (count, preds)
    }
}

/// Winning regions with positional strategies. `strategy[s]` is the index of
/// the chosen edge within `successors(s)` for states owned by their winner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WinPartition {
    pub winner: Vec<Player>,
    pub strategy: Vec<Option<usize>>,
    /// Attractor rank for states won by the reacher.
    pub rank: Vec<Option<u32>>,
    /// Edge inspections spent by the solver.
    pub work: usize,
}

impl WinPartition {
    pub fn winning(&self, player: Player) -> impl Iterator<Item = usize> + '_ {
        self.winner
            .iter()
            .enumerate()
            .filter(move |(_, &w)| w == player)
            .map(|(s, _)| s)
    }

    pub fn size(&self, player: Player) -> usize {
        self.winning(player).count()
    }

    pub fn chosen_successor(&self, game: &TurnGame, s: usize) -> Option<usize> {
        self.strategy[s].map(|i| game.successors(s)[i])
    }
}

fn extract_strategies(game: &TurnGame, rank: &[Option<u32>]) -> Vec<Option<usize>> {
    let reacher = game.reacher();
    (0..game.num_states())
        .map(|s| {
            let succ = game.successors(s);
            match (game.owner(s) == reacher, rank[s]) {
                (true, Some(r)) if game.is_target(s) || r == 0 => Some(0),
                (true, Some(r)) => succ.iter().position(|&t| rank[t].is_some_and(|rt| rt < r)),
                (false, None) => succ.iter().position(|&t| rank[t].is_none()),
                _ => None,
            }
        })
        .collect()
}

fn partition_from_ranks(game: &TurnGame, rank: Vec<Option<u32>>, work: usize) -> WinPartition {
    let reacher = game.reacher();
    let winner = rank
        .iter()
        .map(|r| {
            if r.is_some() {
                reacher
            } else {
                reacher.opponent()
            }
        })
        .collect();
    let strategy = extract_strategies(game, &rank);
    WinPartition {
        winner,
        strategy,
        rank,
        work,
    }
}

/// Linear-time attractor by predecessor counting.
pub fn solve_game(game: &TurnGame) -> WinPartition {
    let n = game.num_states();
    let reacher = game.reacher();
    let (pred_offsets, preds) = game.predecessors();
    let mut remaining: Vec<usize> = (0..n).map(|s| game.successors(s).len()).collect();
    let mut rank: Vec<Option<u32>> = vec![None; n];
    let mut queue = VecDeque::new();
    let mut work = 0;
    for (s, r) in rank.iter_mut().enumerate() {
        if game.is_target(s) {
            *r = Some(0);
            queue.push_back(s);
        }
    }
    while let Some(t) = queue.pop_front() {
        let r = rank[t].expect("queued states are ranked");
        for &s in &preds[pred_offsets[t]..pred_offsets[t + 1]] {
            work += 1;
            if rank[s].is_some() {
                continue;
            }
            let joins = if game.owner(s) == reacher {
                true
            } else {
                remaining[s] -= 1;
                remaining[s] == 0
            };
            if joins {
                rank[s] = Some(r + 1);
                queue.push_back(s);
            }
        }
    }
    partition_from_ranks(game, rank, work)
}

/// Naive fixpoint by repeated full scans. Quadratic, but shares nothing with
/// [`solve_game`] beyond strategy extraction.
pub fn solve_by_iteration(game: &TurnGame) -> WinPartition {
    let n = game.num_states();
    let reacher = game.reacher();
    let mut rank: Vec<Option<u32>> = (0..n).map(|s| game.is_target(s).then_some(0)).collect();
    let mut work = 0;
    let mut round = 0;
    loop {
        round += 1;
        let snapshot = rank.clone();
        let mut changed = false;
        for s in 0..n {
            if snapshot[s].is_some() {
                continue;
            }
            let succ = game.successors(s);
            work += succ.len();
            let inside = |t: &usize| snapshot[*t].is_some();
            let joins = if game.owner(s) == reacher {
                succ.iter().any(inside)
            } else {
                succ.iter().all(inside)
            };
            if joins {
                rank[s] = Some(round);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    partition_from_ranks(game, rank, work)
}

/// Default cap on the number of positional strategy pairs the oracle will
/// enumerate.
pub const ORACLE_PAIR_CAP: u128 = 1 << 22;

/// Brute force over all positional strategy pairs: the reacher wins from `s`
/// iff some reacher strategy hits the target from `s` against every
/// opponent strategy.
pub fn oracle_solve_positional(game: &TurnGame) -> Result<WinPartition> {
    oracle_solve_positional_capped(game, ORACLE_PAIR_CAP)
}

pub fn oracle_solve_positional_capped(game: &TurnGame, cap: u128) -> Result<WinPartition> {
    let n = game.num_states();
    let reacher = game.reacher();
    let mine: Vec<usize> = (0..n).filter(|&s| game.owner(s) == reacher).collect();
    let theirs: Vec<usize> = (0..n).filter(|&s| game.owner(s) != reacher).collect();
    let combos = |states: &[usize]| -> u128 {
        states
            .iter()
            .map(|&s| game.successors(s).len() as u128)
            .try_fold(1u128, |acc, k| acc.checked_mul(k))
            .unwrap_or(u128::MAX)
    };
    let pairs = combos(&mine).saturating_mul(combos(&theirs));
    if pairs > cap {
        return Err(Error::OracleTooLarge(format!(
            "{pairs} strategy pairs over {n} states exceed the cap of {cap}"
        )));
    }

    let mut choice = vec![0usize; n];
    let hits = |choice: &[usize]| -> Vec<bool> {
        // Functional graph: memoized walk, resolving whole paths at once.
        let mut result: Vec<Option<bool>> = vec![None; n];
        let mut on_path = vec![false; n];
        for start in 0..n {
            let mut path = Vec::new();
            let mut s = start;
            let verdict = loop {
                if let Some(v) = result[s] {
                    break v;
                }
                if game.is_target(s) {
                    break true;
                }
                if on_path[s] {
                    break false;
                }
                on_path[s] = true;
                path.push(s);
                s = game.successors(s)[choice[s]];
            };
            for p in path {
                on_path[p] = false;
                result[p] = Some(verdict);
            }
            result[start] = Some(verdict || game.is_target(start));
        }
        result.into_iter().map(|v| v.unwrap_or(false)).collect()
    };

    let advance = |choice: &mut [usize], states: &[usize]| -> bool {
        for &s in states {
            choice[s] += 1;
            if choice[s] < game.successors(s).len() {
                return true;
            }
            choice[s] = 0;
        }
        false
    };

    // For each reacher strategy, the states it wins against all opponents.
    let mut winning = vec![false; n];
    let mut reacher_witness: Vec<Option<Vec<usize>>> = vec![None; n];
    loop {
        let mut guaranteed = vec![true; n];
        for &s in &theirs {
            choice[s] = 0;
        }
        loop {
            let h = hits(&choice);
            for s in 0..n {
                guaranteed[s] &= h[s];
            }
            if !advance(&mut choice, &theirs) {
                break;
            }
        }
        for s in 0..n {
            if guaranteed[s] && !winning[s] {
                winning[s] = true;
                reacher_witness[s] = Some(choice.clone());
            }
        }
        if !advance(&mut choice, &mine) {
            break;
        }
    }

    // One opponent strategy that keeps every losing state out of the target.
    let mut opponent_choice = None;
    choice.fill(0);
    loop {
        let mut holds = true;
        for &s in &mine {
            choice[s] = 0;
        }
        loop {
            let h = hits(&choice);
            if (0..n).any(|s| !winning[s] && h[s]) {
                holds = false;
                break;
            }
            if !advance(&mut choice, &mine) {
                break;
            }
        }
        if holds {
            opponent_choice = Some(choice.clone());
            break;
        }
        if !advance(&mut choice, &theirs) {
            break;
        }
    }

    let winner: Vec<Player> = winning
        .iter()
        .map(|&w| if w { reacher } else { reacher.opponent() })
        .collect();
    let strategy = (0..n)
        .map(|s| {
            if winner[s] != game.owner(s) {
                None
            } else if winning[s] {
                reacher_witness[s].as_ref().map(|c| c[s])
            } else {
                opponent_choice.as_ref().map(|c| c[s])
            }
        })
        .collect();
    Ok(WinPartition {
        winner,
        strategy,
        rank: vec![None; n],
        work: 0,
    })
}

/// What agent `j` must achieve to profit from deviating.
#[derive(Debug, Clone)]
pub struct DeviationTarget {
    pub agent: usize,
    pub relation: Relation,
    pub threshold: Rational,
    /// Index into the agent's ascending threshold list.
    pub threshold_index: usize,
    pub comparator: Arc<Comparator>,
}

/// The threshold index and relation of the next-higher payoff, or `None`
/// when `level` is already maximal.
pub fn deviation_target_index(goal: &Goal, level: usize) -> Option<(Relation, usize)> {
    let n = goal.max_payoff();
    if level >= n {
        return None;
    }
    if goal.relation().is_upward() || !goal.relation().is_order() {
        Some((goal.relation(), level))
    } else {
        Some((goal.relation(), n - level - 1))
    }
}

pub fn deviation_target(
    goal: &Goal,
    agent: usize,
    level: usize,
    bounds: &RewardBounds,
    gamma: u32,
) -> Option<DeviationTarget> {
    let (relation, k) = deviation_target_index(goal, level)?;
    let threshold = goal.thresholds()[k].clone();
    let comparator = Arc::new(build_comparator(
        relation,
        &threshold,
        bounds.agent(agent).mu,
        gamma,
    ));
    Some(DeviationTarget {
        agent,
        relation,
        threshold,
        threshold_index: k,
        comparator,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeviationNode {
    Coalition {
        vertex: StateId,
        q: CompState,
    },
    Deviator {
        vertex: StateId,
        q: CompState,
        decision: DecisionId,
    },
}

/// `G_j` over the full space `V × Q` and `V × Q × D`.
#[derive(Debug, Clone)]
pub struct DeviationGame {
    agent: usize,
    comparator: Arc<Comparator>,
    num_vertices: usize,
    num_q: usize,
    num_decisions: usize,
    turn: TurnGame,
}

impl DeviationGame {
    pub fn build(game: &Game, target: &DeviationTarget) -> Result<Self> {
        let cmp = target.comparator.clone();
        let j = target.agent;
        let nv = game.num_states();
        let nq = cmp.num_states();
        let nd = game.num_decisions();
        let v0 = nv * nq;
        let total = v0 * (1 + nd);
        let decisive = cmp.decisive_sink();
        let mut owner = Vec::with_capacity(total);
        let mut successors = Vec::with_capacity(total);
        let mut is_target = Vec::with_capacity(total);
        for v in 0..nv {
            for q in 0..nq {
                owner.push(Player::Zero);
                successors.push((0..nd).map(|d| v0 + (v * nq + q) * nd + d).collect());
                is_target.push(decisive == Some(q as CompState));
            }
        }
        for v in 0..nv {
            for q in 0..nq {
                for d in 0..nd {
                    let mut succ: Vec<usize> = Vec::new();
                    for a in 0..game.actions(j).len() {
                        let alt = game.with_action(DecisionId(d), j, a);
                        let next_v = game.step(StateId(v), alt).0;
                        let next_q = cmp.step(q as CompState, game.reward(StateId(v), alt)[j]);
                        let t = next_v * nq + next_q as usize;
                        if !succ.contains(&t) {
                            succ.push(t);
                        }
                    }
                    owner.push(Player::One);
                    successors.push(succ);
                    is_target.push(decisive == Some(q as CompState));
                }
            }
        }
        let reacher = match cmp.kind() {
            ComparatorKind::CoSafety => Player::One,
            ComparatorKind::Safety => Player::Zero,
        };
        Ok(Self {
            agent: j,
            comparator: cmp,
            num_vertices: nv,
            num_q: nq,
            num_decisions: nd,
            turn: TurnGame::new(owner, successors, is_target, reacher)?,
        })
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn comparator(&self) -> &Arc<Comparator> {
        &self.comparator
    }

    pub fn turn_game(&self) -> &TurnGame {
        &self.turn
    }

    pub fn num_coalition_states(&self) -> usize {
        self.num_vertices * self.num_q
    }

    pub fn coalition_index(&self, v: StateId, q: CompState) -> usize {
        v.0 * self.num_q + q as usize
    }

    pub fn deviator_index(&self, v: StateId, q: CompState, d: DecisionId) -> usize {
        self.num_coalition_states() + (v.0 * self.num_q + q as usize) * self.num_decisions + d.0
    }

    pub fn node(&self, s: usize) -> DeviationNode {
        let v0 = self.num_coalition_states();
        if s < v0 {
            DeviationNode::Coalition {
                vertex: StateId(s / self.num_q),
                q: (s % self.num_q) as CompState,
            }
        } else {
            let rest = s - v0;
            let pair = rest / self.num_decisions;
            DeviationNode::Deviator {
                vertex: StateId(pair / self.num_q),
                q: (pair % self.num_q) as CompState,
                decision: DecisionId(rest % self.num_decisions),
            }
        }
    }

    pub fn to_dump_json(&self, game: &Game) -> serde_json::Value {
        let label = |s: usize| match self.node(s) {
            DeviationNode::Coalition { vertex, q } => format!("{}|{}", game.state_name(vertex), q),
            DeviationNode::Deviator {
                vertex,
                q,
                decision,
            } => format!(
                "{}|{}|{}",
                game.state_name(vertex),
                q,
                game.decision_label(decision)
            ),
        };
        let nodes: Vec<_> = (0..self.turn.num_states())
            .map(|s| {
                json!({
                    "id": label(s),
                    "owner": if self.turn.owner(s) == Player::Zero { "coalition" } else { "deviator" },
                    "target": self.turn.is_target(s),
                    "successors": self.turn.successors(s).iter().map(|&t| label(t)).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({
            "agent": self.agent,
            "relation": self.comparator.relation().symbol(),
            "threshold": format_rational(self.comparator.threshold()),
            "reacher": if self.turn.reacher() == Player::Zero { "coalition" } else { "deviator" },
            "nodes": nodes,
        })
    }
}

pub fn build_deviation_game(game: &Game, target: &DeviationTarget) -> Result<DeviationGame> {
    DeviationGame::build(game, target)
}

/// The coalition's positional retaliation over its winning `(v, q)` pairs.
pub fn coalition_strategy(
    dg: &DeviationGame,
    wp: &WinPartition,
) -> BTreeMap<(StateId, CompState), DecisionId> {
    let mut out = BTreeMap::new();
    for s in 0..dg.num_coalition_states() {
        if wp.winner[s] != Player::Zero {
            continue;
        }
        let edge = wp.strategy[s].expect("winning coalition states carry a strategy");
        if let DeviationNode::Coalition { vertex, q } = dg.node(s) {
            out.insert((vertex, q), DecisionId(edge));
        }
    }
    out
}

/// A solved deviation game with constant-time winning-set queries.
#[derive(Debug, Clone)]
pub struct SolvedDeviation {
    pub target: DeviationTarget,
    pub game: DeviationGame,
    pub partition: WinPartition,
}

impl SolvedDeviation {
    pub fn solve(game: &Game, target: DeviationTarget) -> Result<Self> {
        let dg = DeviationGame::build(game, &target)?;
        let partition = solve_game(dg.turn_game());
        Ok(Self {
            target,
            game: dg,
            partition,
        })
    }

    pub fn deviator_wins_at(&self, v: StateId, q: CompState) -> bool {
        self.partition.winner[self.game.coalition_index(v, q)] == Player::One
    }

    pub fn deviator_wins_after(&self, v: StateId, q: CompState, d: DecisionId) -> bool {
        self.partition.winner[self.game.deviator_index(v, q, d)] == Player::One
    }

    pub fn win1_size(&self) -> usize {
        self.partition.size(Player::One)
    }

    pub fn retaliation(&self) -> BTreeMap<(StateId, CompState), DecisionId> {
        coalition_strategy(&self.game, &self.partition)
    }
}
