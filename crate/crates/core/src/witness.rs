//! Witness profiles: a primary lasso plus per-deviator retaliation, their
//! document format, an executable profile, and an independent checker.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::comparator::{build_comparator, CompState, Comparator, ComparatorKind};
use crate::deviation::{
    deviation_target, oracle_solve_positional_capped, solve_by_iteration, DeviationGame,
    DeviationNode, Player, WinPartition,
};
use crate::error::{Error, Result};
use crate::game::{lasso_reward, reward_bounds, DecisionId, Game, LassoPlay, StateId};
use crate::goal::{Goal, PayoffVector, Relation};
use crate::rational::{format_rational, parse_rational, Rational};

/// The coalition's answer to a deviation by `agent`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Retaliation {
    pub agent: usize,
    pub relation: Relation,
    pub threshold: Rational,
    /// The agent's payoff on the primary trace.
    pub level: usize,
    pub moves: BTreeMap<(StateId, CompState), DecisionId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessProfile {
    pub lasso: LassoPlay,
    pub levels: PayoffVector,
    pub rewards: Vec<Rational>,
    pub retaliation: BTreeMap<usize, Retaliation>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RetaliationDoc {
    relation: Relation,
    threshold: String,
    level: usize,
    moves: BTreeMap<String, Vec<String>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WitnessDoc {
    levels: Vec<usize>,
    primary_stem: Vec<Vec<String>>,
    primary_loop: Vec<Vec<String>>,
    payoffs: Vec<String>,
    retaliation: BTreeMap<String, RetaliationDoc>,
}

fn state_key(game: &Game, v: StateId, q: CompState) -> String {
    format!("{}|{}", game.state_name(v), q)
}

impl WitnessProfile {
    pub fn to_json(&self, game: &Game) -> String {
        let decisions = |ds: &[DecisionId]| ds.iter().map(|&d| game.decision_names(d)).collect();
        let doc = WitnessDoc {
            levels: self.levels.levels().to_vec(),
            primary_stem: decisions(&self.lasso.stem),
            primary_loop: decisions(&self.lasso.cycle),
            payoffs: self.rewards.iter().map(format_rational).collect(),
            retaliation: self
                .retaliation
                .values()
                .map(|r| {
                    let moves = r
                        .moves
                        .iter()
                        .map(|(&(v, q), &d)| (state_key(game, v, q), game.decision_names(d)))
                        .collect();
                    (
                        r.agent.to_string(),
                        RetaliationDoc {
                            relation: r.relation,
                            threshold: format_rational(&r.threshold),
                            level: r.level,
                            moves,
                        },
                    )
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("witness documents serialize")
    }

    pub fn from_json(game: &Game, document: &str) -> Result<Self> {
        let doc: WitnessDoc = serde_json::from_str(document)?;
        let decision = |names: &Vec<String>| -> Result<DecisionId> {
            game.decision_from_names(names)
                .ok_or_else(|| Error::Witness(format!("unknown decision ({})", names.join(","))))
        };
        let decisions =
            |list: &Vec<Vec<String>>| list.iter().map(decision).collect::<Result<Vec<_>>>();
        let lasso = LassoPlay::new(decisions(&doc.primary_stem)?, decisions(&doc.primary_loop)?);
        let rewards = doc
            .payoffs
            .iter()
            .map(|p| parse_rational(p).map_err(Error::Witness))
            .collect::<Result<Vec<_>>>()?;
        let mut retaliation = BTreeMap::new();
        for (key, r) in doc.retaliation {
            let agent: usize = key.parse().map_err(|_| {
                Error::Witness(format!("retaliation key {key:?} is not an agent index"))
            })?;
            if agent >= game.num_agents() {
                return Err(Error::Witness(format!(
                    "retaliation for unknown agent {agent}"
                )));
            }
            let mut moves = BTreeMap::new();
            for (k, names) in &r.moves {
                let (state, q) = k
                    .rsplit_once('|')
                    .ok_or_else(|| Error::Witness(format!("malformed state key {k:?}")))?;
                let v = game
                    .state_id(state)
                    .ok_or_else(|| Error::Witness(format!("unknown state {state:?}")))?;
                let q: CompState = q
                    .parse()
                    .map_err(|_| Error::Witness(format!("malformed comparator state in {k:?}")))?;
                moves.insert((v, q), decision(names)?);
            }
            retaliation.insert(
                agent,
                Retaliation {
                    agent,
                    relation: r.relation,
                    threshold: parse_rational(&r.threshold).map_err(Error::Witness)?,
                    level: r.level,
                    moves,
                },
            );
        }
        Ok(Self {
            lasso,
            levels: PayoffVector(doc.levels),
            rewards,
            retaliation,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileMode {
    Primary,
    /// Someone without a retaliation strategy deviated; keep replaying the
    /// primary decisions by time.
    Offtrack,
    /// Punishing the retaliating agent with this monitor index.
    Punish(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProfileState {
    pub mode: ProfileMode,
    pub position: usize,
    pub vertex: StateId,
    pub monitors: Box<[CompState]>,
}

/// The finite-memory strategy profile described by a witness.
#[derive(Debug, Clone)]
pub struct ProfileRunner<'a> {
    game: &'a Game,
    witness: &'a WitnessProfile,
    agents: Vec<usize>,
    comparators: Vec<Arc<Comparator>>,
}

impl<'a> ProfileRunner<'a> {
    pub fn new(game: &'a Game, witness: &'a WitnessProfile) -> Self {
        let bounds = reward_bounds(game);
        let (agents, comparators) = witness
            .retaliation
            .values()
            .map(|r| {
                let cmp = build_comparator(
                    r.relation,
                    &r.threshold,
                    bounds.agent(r.agent).mu,
                    game.gamma(),
                );
                (r.agent, Arc::new(cmp))
            })
            .unzip();
        Self {
            game,
            witness,
            agents,
            comparators,
        }
    }

    pub fn initial(&self) -> ProfileState {
        ProfileState {
            mode: ProfileMode::Primary,
            position: 0,
            vertex: self.game.initial(),
            monitors: self.comparators.iter().map(|c| c.initial()).collect(),
        }
    }

    pub fn proposal(&self, s: &ProfileState) -> DecisionId {
        let primary = self.witness.lasso.position_decision(s.position);
        match s.mode {
            ProfileMode::Primary | ProfileMode::Offtrack => primary,
            ProfileMode::Punish(i) => {
                let r = &self.witness.retaliation[&self.agents[i]];
                r.moves
                    .get(&(s.vertex, s.monitors[i]))
                    .copied()
                    .unwrap_or(primary)
            }
        }
    }

    /// Moves on after `actual` is played; deviations from the proposal are
    /// punished by the lowest-indexed deviating agent that can be punished.
    pub fn advance(&self, s: &ProfileState, actual: DecisionId) -> ProfileState {
        let reward = self.game.reward(s.vertex, actual);
        let monitors = s
            .monitors
            .iter()
            .zip(&self.comparators)
            .zip(&self.agents)
            .map(|((&q, c), &a)| c.step(q, reward[a]))
            .collect();
        let mode = match s.mode {
            ProfileMode::Punish(i) => ProfileMode::Punish(i),
            mode => {
                let proposal = self.proposal(s);
                let deviating = (0..self.game.num_agents()).filter(|&a| {
                    self.game.action_of(actual, a) != self.game.action_of(proposal, a)
                });
                let mut any = false;
                let mut punish = None;
                for a in deviating {
                    any = true;
                    if let Some(i) = self.agents.iter().position(|&x| x == a) {
                        punish = Some(i);
                        break;
                    }
                }
                match (any, punish) {
                    (_, Some(i)) => ProfileMode::Punish(i),
                    (true, None) => ProfileMode::Offtrack,
                    (false, None) => mode,
                }
            }
        };
        ProfileState {
            mode,
            position: self.witness.lasso.next_position(s.position),
            vertex: self.game.step(s.vertex, actual),
            monitors,
        }
    }

    pub fn game(&self) -> &'a Game {
        self.game
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn check(name: &'static str, problems: Vec<String>) -> CheckResult {
    CheckResult {
        name,
        passed: problems.is_empty(),
        detail: if problems.is_empty() {
            "ok".into()
        } else {
            problems.join("; ")
        },
    }
}

/// Strategy pairs worth enumerating before switching to fixpoint iteration.
const VERIFY_PAIR_CAP: u128 = 1 << 12;

/// Solves a rebuilt deviation game, by strategy enumeration when small.
fn independent_solution(dg: &DeviationGame) -> WinPartition {
    oracle_solve_positional_capped(dg.turn_game(), VERIFY_PAIR_CAP)
        .unwrap_or_else(|_| solve_by_iteration(dg.turn_game()))
}

/// Checks a witness against `w` without reusing any search state.
pub fn verify_witness(
    game: &Game,
    goals: &[Goal],
    w: &PayoffVector,
    witness: &WitnessProfile,
) -> Result<VerificationReport> {
    w.validate(goals)?;
    if goals.len() != game.num_agents() {
        return Err(Error::Witness(format!(
            "{} goals for {} agents",
            goals.len(),
            game.num_agents()
        )));
    }
    let mut checks = Vec::new();

    let lasso_ok = witness.lasso.validate(game);
    checks.push(check(
        "lasso",
        lasso_ok
            .as_ref()
            .err()
            .map(|e| e.to_string())
            .into_iter()
            .collect(),
    ));
    if lasso_ok.is_err() {
        return Ok(VerificationReport { checks });
    }

    let mut problems = Vec::new();
    if witness.rewards.len() != game.num_agents() {
        problems.push(format!("{} recorded payoffs", witness.rewards.len()));
    }
    for (agent, goal) in goals.iter().enumerate() {
        let reward = lasso_reward(game, &witness.lasso, agent)?;
        let level = goal.payoff(&reward);
        if level != w.levels()[agent] {
            problems.push(format!(
                "agent {agent} earns {} which gives payoff {level}, not {}",
                format_rational(&reward),
                w.levels()[agent]
            ));
        }
        if witness.rewards.get(agent).is_some_and(|r| *r != reward) {
            problems.push(format!(
                "agent {agent} recorded payoff {} but the lasso yields {}",
                format_rational(&witness.rewards[agent]),
                format_rational(&reward)
            ));
        }
    }
    checks.push(check("payoffs", problems));

    let bounds = reward_bounds(game);
    let mut avoidance = Vec::new();
    let mut closure = Vec::new();
    for (agent, goal) in goals.iter().enumerate() {
        let Some(target) = deviation_target(goal, agent, w.levels()[agent], &bounds, game.gamma())
        else {
            if witness.retaliation.contains_key(&agent) {
                closure.push(format!(
                    "agent {agent} is at maximal payoff but has a retaliation entry"
                ));
            }
            continue;
        };
        let dg = DeviationGame::build(game, &target)?;
        let wp = independent_solution(&dg);
        let cmp = dg.comparator();

        // Replay the primary trace until (position, comparator state) repeats.
        let mut q = cmp.initial();
        let mut v = game.initial();
        let mut pos = 0;
        let mut seen = std::collections::HashSet::new();
        while seen.insert((pos, q)) {
            let d = witness.lasso.position_decision(pos);
            if wp.winner[dg.coalition_index(v, q)] == Player::One {
                avoidance.push(format!(
                    "agent {agent} can profitably deviate from ({}, {q}) at step {pos}",
                    game.state_name(v)
                ));
                break;
            }
            if wp.winner[dg.deviator_index(v, q, d)] == Player::One {
                avoidance.push(format!(
                    "agent {agent} can profitably deviate from ({}, {q}) after ({})",
                    game.state_name(v),
                    game.decision_label(d)
                ));
                break;
            }
            q = cmp.step(q, game.reward(v, d)[agent]);
            v = game.step(v, d);
            pos = witness.lasso.next_position(pos);
        }

        let Some(r) = witness.retaliation.get(&agent) else {
            closure.push(format!("agent {agent} has no retaliation strategy"));
            continue;
        };
        if r.relation != target.relation || r.threshold != target.threshold {
            closure.push(format!(
                "agent {agent} retaliation targets {} {} instead of {} {}",
                r.relation,
                format_rational(&r.threshold),
                target.relation,
                format_rational(&target.threshold)
            ));
            continue;
        }
        closure.extend(retaliation_problems(game, &dg, &wp, r));
    }
    checks.push(check("deviation-avoidance", avoidance));
    checks.push(check("retaliation", closure));
    Ok(VerificationReport { checks })
}

fn retaliation_problems(
    game: &Game,
    dg: &DeviationGame,
    wp: &WinPartition,
    r: &Retaliation,
) -> Vec<String> {
    let tg = dg.turn_game();
    let agent = r.agent;
    let mut problems = Vec::new();
    for (&(v, q), &d) in &r.moves {
        if q as usize >= dg.comparator().num_states() || v.0 >= game.num_states() {
            problems.push(format!("agent {agent}: move at unknown state {}|{q}", v.0));
            return problems;
        }
        let s = dg.coalition_index(v, q);
        if wp.winner[s] == Player::One {
            problems.push(format!(
                "agent {agent}: move at ({}, {q}) where the deviator wins",
                game.state_name(v)
            ));
        } else if !tg.is_target(s) && wp.winner[dg.deviator_index(v, q, d)] == Player::One {
            problems.push(format!(
                "agent {agent}: ({}) at ({}, {q}) hands the deviator a win",
                game.decision_label(d),
                game.state_name(v)
            ));
        }
    }
    for s in wp
        .winning(Player::Zero)
        .filter(|&s| s < dg.num_coalition_states())
    {
        if let DeviationNode::Coalition { vertex, q } = dg.node(s) {
            if !r.moves.contains_key(&(vertex, q)) {
                problems.push(format!(
                    "agent {agent}: no move at winning state ({}, {q})",
                    game.state_name(vertex)
                ));
            }
        }
    }
    if !problems.is_empty() || dg.comparator().kind() != ComparatorKind::Safety {
        return problems;
    }
    // The coalition must force the rejecting sink: with its moves fixed, the
    // deviator may not loop forever among non-target winning states.
    let mut color: HashMap<usize, u8> = HashMap::new();
    for &(v, q) in r.moves.keys() {
        let start = dg.coalition_index(v, q);
        if tg.is_target(start) || color.contains_key(&start) {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        color.insert(start, 1);
        while let Some(&mut (s, ref mut i)) = stack.last_mut() {
            let DeviationNode::Coalition { vertex, q } = dg.node(s) else {
                unreachable!()
            };
            let mid = dg.deviator_index(vertex, q, r.moves[&(vertex, q)]);
            let next: Vec<usize> = if tg.is_target(mid) {
                Vec::new()
            } else {
                tg.successors(mid)
                    .iter()
                    .copied()
                    .filter(|&t| !tg.is_target(t))
                    .collect()
            };
            if *i < next.len() {
                let t = next[*i];
                *i += 1;
                match color.get(&t) {
                    Some(1) => {
                        problems.push(format!(
                            "agent {agent}: the deviator can circle through ({}, {q}) forever",
                            game.state_name(vertex)
                        ));
                        return problems;
                    }
                    Some(_) => {}
                    None => {
                        color.insert(t, 1);
                        stack.push((t, 0));
                    }
                }
            } else {
                color.insert(s, 2);
                stack.pop();
            }
        }
    }
    problems
}
