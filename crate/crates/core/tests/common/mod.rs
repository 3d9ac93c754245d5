//! Test oracles built from first principles: exact discounted sums, threshold
//! counting, guaranteed values by positional enumeration, and brute-force
//! lasso search. None of these go through the comparator or the product.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use satne::deviation::{deviation_target, solve_by_iteration, DeviationGame, Player, WinPartition};
use satne::game::{reward_bounds, DecisionId, Game, LassoPlay, StateId};
use satne::goal::{Goal, PayoffVector, Relation};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn pow(gamma: u32, k: usize) -> Q {
    let mut out = Q::one();
    for _ in 0..k {
        out *= q(gamma as i64);
    }
    out
}

/// `Σ stem_k γ^-k + γ^-|stem| · (Σ cycle_k γ^-k) / (1 − γ^-|cycle|)`.
pub fn ds(stem: &[i64], cycle: &[i64], gamma: u32) -> Q {
    let prefix = |w: &[i64]| -> Q {
        w.iter()
            .enumerate()
            .fold(Q::zero(), |acc, (k, &r)| acc + q(r) / pow(gamma, k))
    };
    let c = cycle.len();
    let factor = Q::one() / (Q::one() - Q::one() / pow(gamma, c));
    prefix(stem) + prefix(cycle) * factor / pow(gamma, stem.len())
}

pub fn holds(r: Relation, lhs: &Q, rhs: &Q) -> bool {
    match r {
        Relation::Lt => lhs < rhs,
        Relation::Le => lhs <= rhs,
        Relation::Gt => lhs > rhs,
        Relation::Ge => lhs >= rhs,
        Relation::Eq => lhs == rhs,
        Relation::Ne => lhs != rhs,
    }
}

pub fn count_satisfied(goal: &Goal, value: &Q) -> usize {
    goal.thresholds()
        .iter()
        .filter(|t| holds(goal.relation(), value, t))
        .count()
}

/// Per-agent reward words of a lasso obtained by walking the game.
pub fn words(game: &Game, lasso: &LassoPlay) -> Vec<(Vec<i64>, Vec<i64>)> {
    let mut v = game.initial();
    let mut rewards: Vec<Vec<i64>> = vec![Vec::new(); game.num_agents()];
    for &d in lasso.stem.iter().chain(&lasso.cycle) {
        for (a, rs) in rewards.iter_mut().enumerate() {
            rs.push(game.reward(v, d)[a]);
        }
        v = game.step(v, d);
    }
    rewards
        .into_iter()
        .map(|rs| {
            let (s, c) = rs.split_at(lasso.stem.len());
            (s.to_vec(), c.to_vec())
        })
        .collect()
}

pub fn lasso_values(game: &Game, lasso: &LassoPlay) -> Vec<Q> {
    words(game, lasso)
        .iter()
        .map(|(s, c)| ds(s, c, game.gamma()))
        .collect()
}

pub fn lasso_closes(game: &Game, lasso: &LassoPlay) -> bool {
    if lasso.cycle.is_empty() {
        return false;
    }
    let mut v = game.initial();
    for &d in &lasso.stem {
        v = game.step(v, d);
    }
    let start = v;
    for &d in &lasso.cycle {
        v = game.step(v, d);
    }
    v == start
}

/// Every valid decision lasso with `|stem| + |loop| ≤ max_len`.
pub fn all_lassos(game: &Game, max_len: usize) -> Vec<LassoPlay> {
    let nd = game.num_decisions();
    let mut out = Vec::new();
    let mut seq: Vec<DecisionId> = Vec::new();
    fn rec(
        game: &Game,
        nd: usize,
        max_len: usize,
        seq: &mut Vec<DecisionId>,
        out: &mut Vec<LassoPlay>,
    ) {
        if !seq.is_empty() {
            for split in 0..seq.len() {
                let lasso = LassoPlay::new(seq[..split].to_vec(), seq[split..].to_vec());
                if lasso_closes(game, &lasso) {
                    out.push(lasso);
                }
            }
        }
        if seq.len() == max_len {
            return;
        }
        for d in 0..nd {
            seq.push(DecisionId(d));
            rec(game, nd, max_len, seq, out);
            seq.pop();
        }
    }
    rec(game, nd, max_len, &mut seq, &mut out);
    out
}

/// Positional strategy maps over `n` points with `k` choices each.
fn assignments(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..k).map(move |c| {
                    let mut p = p.clone();
                    p.push(c);
                    p
                })
            })
            .collect();
    }
    out
}

fn walk_value(game: &Game, agent: usize, start: usize, next: &dyn Fn(usize) -> DecisionId) -> Q {
    let mut seen = vec![None; game.num_states()];
    let mut rewards = Vec::new();
    let mut v = start;
    while seen[v].is_none() {
        seen[v] = Some(rewards.len());
        let d = next(v);
        rewards.push(game.reward(StateId(v), d)[agent]);
        v = game.step(StateId(v), d).0;
    }
    let split = seen[v].unwrap();
    ds(&rewards[..split], &rewards[split..], game.gamma())
}

/// The value agent `agent` can guarantee from each vertex when everyone else
/// commits to a decision first at every step. `maximize` selects whether the
/// agent wants the reward high (value `min_σ max_α`) or low (`max_σ min_α`).
pub fn guaranteed_values(game: &Game, agent: usize, maximize: bool) -> Vec<Q> {
    let n = game.num_states();
    let mut best: Vec<Option<Q>> = vec![None; n];
    let actions = game.actions(agent).len();
    for sigma in assignments(n, game.num_decisions()) {
        let mut inner: Vec<Option<Q>> = vec![None; n];
        for alpha in assignments(n, actions) {
            let step = |v: usize| game.with_action(DecisionId(sigma[v]), agent, alpha[v]);
            for v in 0..n {
                let val = walk_value(game, agent, v, &step);
                let better = match &inner[v] {
                    None => true,
                    Some(b) => (maximize && val > *b) || (!maximize && val < *b),
                };
                if better {
                    inner[v] = Some(val);
                }
            }
        }
        for v in 0..n {
            let val = inner[v].clone().unwrap();
            let better = match &best[v] {
                None => true,
                Some(b) => (maximize && val < *b) || (!maximize && val > *b),
            };
            if better {
                best[v] = Some(val);
            }
        }
    }
    best.into_iter().map(Option::unwrap).collect()
}

/// Threshold and relation agent `agent` must hit to improve on `level`.
pub fn improvement(goal: &Goal, level: usize) -> Option<(Relation, Q)> {
    let t = goal.thresholds();
    let n = t.len();
    if level >= n {
        return None;
    }
    Some(match goal.relation() {
        Relation::Ge | Relation::Gt | Relation::Eq | Relation::Ne => {
            (goal.relation(), t[level].clone())
        }
        Relation::Le | Relation::Lt => (goal.relation(), t[n - level - 1].clone()),
    })
}

enum Check {
    Value {
        relation: Relation,
        t: Q,
        values: Vec<Q>,
        spread: Q,
    },
    Game {
        dg: DeviationGame,
        wp: WinPartition,
    },
}

/// Deviation checks for one payoff vector, with the punishment values
/// computed once and shared across candidate lassos.
pub struct NeOracle<'g> {
    game: &'g Game,
    goals: &'g [Goal],
    w: PayoffVector,
    checks: Vec<Option<Check>>,
}

impl<'g> NeOracle<'g> {
    pub fn new(game: &'g Game, goals: &'g [Goal], w: &PayoffVector) -> Self {
        let checks = goals
            .iter()
            .enumerate()
            .map(|(a, goal)| {
                let (relation, t) = improvement(goal, w.levels()[a])?;
                Some(match relation {
                    Relation::Eq | Relation::Ne => {
                        let bounds = reward_bounds(game);
                        let single = Goal::satisficing(relation, t);
                        let target =
                            deviation_target(&single, a, 0, &bounds, game.gamma()).unwrap();
                        let dg = DeviationGame::build(game, &target).unwrap();
                        let wp = solve_by_iteration(dg.turn_game());
                        Check::Game { dg, wp }
                    }
                    _ => {
                        let maximize = matches!(relation, Relation::Ge | Relation::Gt);
                        let (lo, hi) = reward_span(game, a);
                        let g = q(game.gamma() as i64);
                        Check::Value {
                            relation,
                            t,
                            values: guaranteed_values(game, a, maximize),
                            spread: q(hi - lo) * &g / (&g - Q::one()),
                        }
                    }
                })
            })
            .collect();
        Self {
            game,
            goals,
            w: w.clone(),
            checks,
        }
    }

    /// Whether `agent` can leave the primary lasso at some step and force
    /// the improvement threshold against every punishment.
    pub fn profitable(&self, lasso: &LassoPlay, agent: usize) -> bool {
        match &self.checks[agent] {
            None => false,
            Some(Check::Value {
                relation,
                t,
                values,
                spread,
            }) => self.by_value(lasso, agent, *relation, t, values, spread),
            Some(Check::Game { dg, wp }) => self.by_game(lasso, agent, dg, wp),
        }
    }

    fn by_value(
        &self,
        lasso: &LassoPlay,
        agent: usize,
        relation: Relation,
        t: &Q,
        values: &[Q],
        spread: &Q,
    ) -> bool {
        let game = self.game;
        let maximize = matches!(relation, Relation::Ge | Relation::Gt);
        let g = q(game.gamma() as i64);
        let (stem, cycle) = words(game, lasso).swap_remove(agent);
        let primary = ds(&stem, &cycle, game.gamma());
        let gap = if primary > *t {
            &primary - t
        } else {
            t - &primary
        };
        let mut v = game.initial();
        // γ^i · (prefix_i − t), so deviating at step i wins iff this plus the
        // best one-step-then-punished continuation satisfies the relation.
        let mut scaled = -t.clone();
        for i in 0.. {
            let d = lasso.decision_at(i);
            let options = (0..game.actions(agent).len()).map(|a| {
                let alt = game.with_action(d, agent, a);
                q(game.reward(v, alt)[agent]) + &values[game.step(v, alt).0] / &g
            });
            let best = if maximize {
                options.max().unwrap()
            } else {
                options.min().unwrap()
            };
            if holds(relation, &(&scaled + best), &Q::zero()) {
                return true;
            }
            if i + 1 >= lasso.len() && (gap.is_zero() || &gap * pow(game.gamma(), i) > *spread) {
                return false;
            }
            scaled = (scaled + q(game.reward(v, d)[agent])) * &g;
            v = game.step(v, d);
        }
        unreachable!()
    }

    /// Equality targets have no monotone value, so these use the deviation
    /// game solved by naive fixpoint iteration.
    fn by_game(
        &self,
        lasso: &LassoPlay,
        agent: usize,
        dg: &DeviationGame,
        wp: &WinPartition,
    ) -> bool {
        let game = self.game;
        let cmp = dg.comparator();
        let mut state = cmp.initial();
        let mut v = game.initial();
        let mut seen = std::collections::HashSet::new();
        let mut pos = 0;
        while seen.insert((pos, state)) {
            let d = lasso.position_decision(pos);
            if wp.winner[dg.coalition_index(v, state)] == Player::One
                || wp.winner[dg.deviator_index(v, state, d)] == Player::One
            {
                return true;
            }
            state = cmp.step(state, game.reward(v, d)[agent]);
            v = game.step(v, d);
            pos = lasso.next_position(pos);
        }
        false
    }

    /// Both conditions of a W-NE on one lasso: exact levels equal `w`, and
    /// no agent below its maximal payoff has a profitable deviation.
    pub fn accepts(&self, lasso: &LassoPlay) -> bool {
        let values = lasso_values(self.game, lasso);
        let levels_match = self
            .goals
            .iter()
            .enumerate()
            .all(|(a, goal)| count_satisfied(goal, &values[a]) == self.w.levels()[a]);
        levels_match && (0..self.goals.len()).all(|a| !self.profitable(lasso, a))
    }
}

fn reward_span(game: &Game, agent: usize) -> (i64, i64) {
    let rs = game
        .states()
        .flat_map(|v| game.decisions().map(move |d| game.reward(v, d)[agent]));
    let (lo, hi) = rs.fold((i64::MAX, i64::MIN), |(lo, hi), r| (lo.min(r), hi.max(r)));
    (lo, hi)
}

/// Reward range `[l, g]` of discounted sums for each agent.
pub fn ds_range(game: &Game) -> Vec<(Q, Q)> {
    let g = q(game.gamma() as i64);
    let f = &g / (&g - Q::one());
    (0..game.num_agents())
        .map(|a| {
            let (lo, hi) = reward_span(game, a);
            (q(lo) * &f, q(hi) * &f)
        })
        .collect()
}
