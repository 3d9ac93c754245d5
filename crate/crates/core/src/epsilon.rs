//! ε-equilibria through threshold ladders, with a bounded-horizon
//! certificate computed against the witness's executable profile.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::game::{reward_bounds, Game};
use crate::goal::{Goal, MultiSatisficingGoal, PayoffVector, Relation};
use crate::rational::{format_rational, gamma_pow, int, Rational};
use crate::search::{Mode, SearchConfig, SearchReport, Solver};
use crate::witness::{ProfileRunner, ProfileState, WitnessProfile};

/// Whether agents chase high rewards (the standard reading) or low ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    #[default]
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ladder {
    pub delta: Rational,
    pub orientation: Orientation,
    /// Per agent: `(l_i, g_i)`.
    pub bounds: Vec<(Rational, Rational)>,
    pub goals: Vec<MultiSatisficingGoal>,
}

impl Ladder {
    pub fn goals(&self) -> Vec<Goal> {
        self.goals.iter().cloned().map(Goal::Multi).collect()
    }

    /// The four ladder hypotheses: the orientation's relation, first rung at
    /// most `l_i`, last rung at least `g_i`, and gaps no wider than ε.
    pub fn check(&self, eps: &Rational) -> std::result::Result<(), String> {
        let relation = match self.orientation {
            Orientation::Maximize => Relation::Ge,
            Orientation::Minimize => Relation::Le,
        };
        for (agent, (goal, (l, g))) in self.goals.iter().zip(&self.bounds).enumerate() {
            let t = goal.thresholds();
            if goal.relation() != relation {
                return Err(format!(
                    "agent {agent} uses {} instead of {relation}",
                    goal.relation()
                ));
            }
            if t[0] > *l {
                return Err(format!(
                    "agent {agent}: first rung above {}",
                    format_rational(l)
                ));
            }
            if t[t.len() - 1] < *g {
                return Err(format!(
                    "agent {agent}: last rung below {}",
                    format_rational(g)
                ));
            }
            if let Some(w) = t.windows(2).find(|w| &w[1] - &w[0] > *eps) {
                return Err(format!(
                    "agent {agent}: gap {} .. {} wider than ε",
                    format_rational(&w[0]),
                    format_rational(&w[1])
                ));
            }
        }
        Ok(())
    }
}

pub fn build_ladder(game: &Game, eps: &Rational) -> Result<Ladder> {
    build_ladder_oriented(game, eps, Orientation::Maximize)
}

/// Rungs `l_i + kε` for `k = 0..=⌈(g_i − l_i)/ε⌉`.
pub fn build_ladder_oriented(
    game: &Game,
    eps: &Rational,
    orientation: Orientation,
) -> Result<Ladder> {
    if !eps.is_positive() {
        return Err(Error::Epsilon(format_rational(eps)));
    }
    let bounds = reward_bounds(game);
    let relation = match orientation {
        Orientation::Maximize => Relation::Ge,
        Orientation::Minimize => Relation::Le,
    };
    let mut goals = Vec::new();
    let mut ranges = Vec::new();
    for agent in &bounds.agents {
        let (l, g) = (agent.lower.clone(), agent.upper.clone());
        let steps = ((&g - &l) / eps).ceil().to_integer();
        let mut rungs = Vec::new();
        let mut k = BigInt::zero();
        while k <= steps {
            rungs.push(&l + eps * Rational::from_integer(k.clone()));
            k += 1;
        }
        goals.push(
            MultiSatisficingGoal::new(relation, rungs).map_err(|message| Error::Goal {
                agent: goals.len(),
                message,
            })?,
        );
        ranges.push((l, g));
    }
    let ladder = Ladder {
        delta: eps.clone(),
        orientation,
        bounds: ranges,
        goals,
    };
    ladder.check(eps).map_err(Error::Soundness)?;
    Ok(ladder)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentCertificate {
    pub agent: usize,
    pub reward: Rational,
    pub lo: Rational,
    pub hi: Rational,
    pub horizon: usize,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpsilonCertificate {
    pub eps: Rational,
    pub orientation: Orientation,
    pub agents: Vec<AgentCertificate>,
}

impl EpsilonCertificate {
    pub fn verdict(&self) -> Verdict {
        if self.agents.iter().any(|a| a.verdict == Verdict::Fail) {
            Verdict::Fail
        } else if self.agents.iter().all(|a| a.verdict == Verdict::Pass) {
            Verdict::Pass
        } else {
            Verdict::Inconclusive
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "eps": format_rational(&self.eps),
            "orientation": self.orientation,
            "verdict": self.verdict(),
            "agents": self.agents.iter().map(|a| json!({
                "agent": a.agent,
                "reward": format_rational(&a.reward),
                "lo": format_rational(&a.lo),
                "hi": format_rational(&a.hi),
                "horizon": a.horizon,
                "verdict": a.verdict,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Largest number of (profile state, depth) pairs one agent's check may touch.
pub const CERTIFICATE_BUDGET: usize = 4_000_000;

/// Best discounted reward agent `agent` can collect in `horizon` steps while
/// everyone else follows the profile.
fn best_prefix_value(
    runner: &ProfileRunner<'_>,
    agent: usize,
    horizon: usize,
    orientation: Orientation,
) -> Result<Rational> {
    let game = runner.game();
    let mut layers: Vec<Vec<ProfileState>> = vec![vec![runner.initial()]];
    let mut touched = 1;
    for _ in 0..horizon {
        let mut next: Vec<ProfileState> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for s in layers.last().expect("nonempty") {
            let proposal = runner.proposal(s);
            for a in 0..game.actions(agent).len() {
                let t = runner.advance(s, game.with_action(proposal, agent, a));
                if seen.insert(t.clone()) {
                    next.push(t);
                }
            }
        }
        touched += next.len();
        if touched > CERTIFICATE_BUDGET {
            return Err(Error::Horizon {
                horizon,
                cap: CERTIFICATE_BUDGET,
            });
        }
        layers.push(next);
    }
    // Backward induction over the layers.
    let gamma = int(game.gamma() as i64);
    let mut below: HashMap<ProfileState, Rational> = HashMap::new();
    for depth in (0..horizon).rev() {
        let mut here = HashMap::with_capacity(layers[depth].len());
        for s in &layers[depth] {
            let proposal = runner.proposal(s);
            let mut best: Option<Rational> = None;
            for a in 0..game.actions(agent).len() {
                let d = game.with_action(proposal, agent, a);
                let r = int(game.reward(s.vertex, d)[agent]);
                let value = if depth + 1 == horizon {
                    r
                } else {
                    r + &below[&runner.advance(s, d)] / &gamma
                };
                best = Some(match (best, orientation) {
                    (None, _) => value,
                    (Some(b), Orientation::Maximize) => b.max(value),
                    (Some(b), Orientation::Minimize) => b.min(value),
                });
            }
            here.insert(s.clone(), best.expect("every agent has an action"));
        }
        below = here;
    }
    Ok(below
        .remove(&runner.initial())
        .unwrap_or_else(Rational::zero))
}

/// Brackets each agent's best unilateral deviation value at `horizon` and
/// compares it with the primary reward shifted by ε.
pub fn check_epsilon_deviation(
    game: &Game,
    witness: &WitnessProfile,
    eps: &Rational,
    horizon: usize,
) -> Result<EpsilonCertificate> {
    check_epsilon_deviation_oriented(game, witness, eps, horizon, Orientation::Maximize)
}

pub fn check_epsilon_deviation_oriented(
    game: &Game,
    witness: &WitnessProfile,
    eps: &Rational,
    horizon: usize,
    orientation: Orientation,
) -> Result<EpsilonCertificate> {
    if !eps.is_positive() {
        return Err(Error::Epsilon(format_rational(eps)));
    }
    let agents = (0..game.num_agents())
        .map(|agent| agent_certificate(game, witness, eps, horizon, orientation, agent))
        .collect::<Result<Vec<_>>>()?;
    Ok(EpsilonCertificate {
        eps: eps.clone(),
        orientation,
        agents,
    })
}

fn agent_certificate(
    game: &Game,
    witness: &WitnessProfile,
    eps: &Rational,
    horizon: usize,
    orientation: Orientation,
    agent: usize,
) -> Result<AgentCertificate> {
    if horizon == 0 {
        return Err(Error::Horizon { horizon, cap: 0 });
    }
    let runner = ProfileRunner::new(game, witness);
    let prefix = best_prefix_value(&runner, agent, horizon, orientation)?;
    let bounds = reward_bounds(game);
    let b = bounds.agent(agent);
    let g = game.gamma() as i64;
    let tail = Rational::new(
        BigInt::from(g),
        BigInt::from(g - 1) * gamma_pow(game.gamma(), horizon),
    );
    let lo = &prefix + int(b.min) * &tail;
    let hi = &prefix + int(b.max) * &tail;
    let reward = witness.rewards[agent].clone();
    let verdict = match orientation {
        Orientation::Maximize => {
            let bar = &reward + eps;
            if hi < bar {
                Verdict::Pass
            } else if lo >= bar {
                Verdict::Fail
            } else {
                Verdict::Inconclusive
            }
        }
        Orientation::Minimize => {
            let bar = &reward - eps;
            if lo > bar {
                Verdict::Pass
            } else if hi <= bar {
                Verdict::Fail
            } else {
                Verdict::Inconclusive
            }
        }
    };
    Ok(AgentCertificate {
        agent,
        reward,
        lo,
        hi,
        horizon,
        verdict,
    })
}

pub const DEFAULT_HORIZON_CAP: usize = 64;

/// Doubles the horizon per agent until its verdict is decided or `cap` is
/// reached.
pub fn certify(
    game: &Game,
    witness: &WitnessProfile,
    eps: &Rational,
    cap: usize,
    orientation: Orientation,
) -> Result<EpsilonCertificate> {
    if !eps.is_positive() {
        return Err(Error::Epsilon(format_rational(eps)));
    }
    let mut agents = Vec::new();
    for agent in 0..game.num_agents() {
        let mut h = 1;
        loop {
            let cert = agent_certificate(game, witness, eps, h, orientation, agent)?;
            if cert.verdict != Verdict::Inconclusive || h >= cap {
                agents.push(cert);
                break;
            }
            h = (h * 2).min(cap);
        }
    }
    Ok(EpsilonCertificate {
        eps: eps.clone(),
        orientation,
        agents,
    })
}

#[derive(Debug, Clone)]
pub struct EpsilonOptions {
    pub mode: Mode,
    pub horizon_cap: usize,
    pub orientation: Orientation,
    pub search: SearchConfig,
}

impl Default for EpsilonOptions {
    fn default() -> Self {
        Self {
            mode: Mode::First,
            horizon_cap: DEFAULT_HORIZON_CAP,
            orientation: Orientation::Maximize,
            search: SearchConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpsilonOutcome {
    pub ladder: Ladder,
    pub reports: Vec<SearchReport>,
    /// One certificate per witness among `reports`, by report index.
    pub certificates: Vec<(usize, EpsilonCertificate)>,
}

impl EpsilonOutcome {
    pub fn certified(&self) -> bool {
        !self.certificates.is_empty()
            && self
                .certificates
                .iter()
                .all(|(_, c)| c.verdict() == Verdict::Pass)
    }
}

/// Ladder goals, W-NE search, then a certificate for every witness. A failed
/// certificate means the correspondence was violated and is an error.
pub fn find_epsilon_equilibrium(
    game: &Game,
    eps: &Rational,
    options: &EpsilonOptions,
) -> Result<EpsilonOutcome> {
    let ladder = build_ladder_oriented(game, eps, options.orientation)?;
    let goals = ladder.goals();
    let solver = Solver::new(game, &goals, options.search.clone())?;
    let reports = solver.enumerate(options.mode)?;
    let mut certificates = Vec::new();
    for (i, report) in reports.iter().enumerate() {
        let Some(witness) = report.witness() else {
            continue;
        };
        let cert = certify(game, witness, eps, options.horizon_cap, options.orientation)?;
        if cert.verdict() == Verdict::Fail {
            return Err(Error::Soundness(format!(
                "ladder witness for {} is not a {}-equilibrium",
                report.w,
                format_rational(eps)
            )));
        }
        certificates.push((i, cert));
    }
    Ok(EpsilonOutcome {
        ladder,
        reports,
        certificates,
    })
}

/// The payoff vectors whose witnesses received certificates.
pub fn ladder_levels(outcome: &EpsilonOutcome) -> Vec<PayoffVector> {
    outcome
        .certificates
        .iter()
        .map(|(i, _)| outcome.reports[*i].w.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{load_game, DecisionId, LassoPlay};
    use crate::rational::ratio;
    use std::collections::BTreeMap;

    fn four_state() -> Game {
        load_game(include_str!("../data/four_state.json")).unwrap()
    }

    fn zero_game() -> Game {
        load_game(include_str!("../data/zero_game.json")).unwrap()
    }

    fn dec(g: &Game, a: &str, b: &str) -> DecisionId {
        g.decision_from_names(&[a.into(), b.into()]).unwrap()
    }

    fn rungs(l: &Ladder, agent: usize) -> Vec<Rational> {
        l.goals[agent].thresholds().to_vec()
    }

    #[test]
    fn four_state_ladders() {
        let g = four_state();
        let l = build_ladder(&g, &int(1)).unwrap();
        assert_eq!(rungs(&l, 1), vec![int(0), int(1), int(2)]);
        assert_eq!(rungs(&l, 0), (0..=16).map(int).collect::<Vec<_>>());
        let l = build_ladder(&g, &int(5)).unwrap();
        assert_eq!(rungs(&l, 1), vec![int(0), int(5)]);
        let l = build_ladder(&g, &ratio(3, 2)).unwrap();
        assert_eq!(rungs(&l, 1), vec![int(0), ratio(3, 2), int(3)]);
        assert!(l.check(&ratio(3, 2)).is_ok());
        assert!(l.check(&int(1)).is_err());
    }

    #[test]
    fn zero_game_ladder_is_one_rung() {
        let l = build_ladder(&zero_game(), &ratio(1, 3)).unwrap();
        assert!(l.goals.iter().all(|goal| goal.thresholds() == [int(0)]));
    }

    #[test]
    fn nonpositive_epsilon_is_rejected() {
        assert!(matches!(
            build_ladder(&four_state(), &int(0)),
            Err(Error::Epsilon(_))
        ));
        assert!(matches!(
            build_ladder(&four_state(), &int(-1)),
            Err(Error::Epsilon(_))
        ));
    }

    #[test]
    fn minimizing_ladder() {
        let l = build_ladder_oriented(&four_state(), &int(1), Orientation::Minimize).unwrap();
        assert_eq!(l.goals[1].relation(), Relation::Le);
        assert!(l.check(&int(1)).is_ok());
    }

    fn plain_witness(g: &Game, stem: Vec<DecisionId>, cycle: Vec<DecisionId>) -> WitnessProfile {
        let lasso = LassoPlay::new(stem, cycle);
        let rewards = (0..2)
            .map(|a| crate::game::lasso_reward(g, &lasso, a).unwrap())
            .collect();
        WitnessProfile {
            lasso,
            levels: PayoffVector(vec![1, 1]),
            rewards,
            retaliation: BTreeMap::new(),
        }
    }

    #[test]
    fn cooperative_profile_bracket() {
        let g = four_state();
        let w = plain_witness(
            &g,
            vec![
                dec(&g, "b", "stay"),
                dec(&g, "a", "stay"),
                dec(&g, "a", "go"),
            ],
            vec![dec(&g, "a", "stay")],
        );
        let cert = check_epsilon_deviation(&g, &w, &int(1), 12).unwrap();
        let agent1 = &cert.agents[1];
        // Staying at q3 forever: 1/2 + 1/4 + … = 1.
        assert!(agent1.lo <= int(1) && int(1) <= agent1.hi);
        assert!(&agent1.hi - &agent1.lo <= ratio(2 * 2, 1 << 12));
        assert_eq!(agent1.verdict, Verdict::Pass);
        // Agent 0 can take q1 -> q2 for 3 = 2 + 1.
        assert_eq!(cert.agents[0].verdict, Verdict::Fail);
    }

    #[test]
    fn forgoing_the_loop_fails() {
        let g = four_state();
        let w = plain_witness(
            &g,
            vec![dec(&g, "b", "go"), dec(&g, "a", "go")],
            vec![dec(&g, "a", "stay")],
        );
        assert_eq!(w.rewards[1], int(0));
        let cert = check_epsilon_deviation(&g, &w, &ratio(1, 4), 12).unwrap();
        assert_eq!(cert.agents[1].verdict, Verdict::Fail);
    }

    #[test]
    fn widening_never_flips_pass_to_fail() {
        let g = four_state();
        let w = plain_witness(
            &g,
            vec![
                dec(&g, "b", "stay"),
                dec(&g, "a", "stay"),
                dec(&g, "a", "go"),
            ],
            vec![dec(&g, "a", "stay")],
        );
        let mut passed = false;
        for h in 1..=16 {
            let cert = check_epsilon_deviation(&g, &w, &int(1), h).unwrap();
            if passed {
                assert_eq!(cert.agents[1].verdict, Verdict::Pass);
            }
            passed |= cert.agents[1].verdict == Verdict::Pass;
            assert_ne!(cert.agents[1].verdict, Verdict::Fail);
        }
        assert!(passed);
    }

    #[test]
    fn four_state_epsilon_pipeline() {
        let g = four_state();
        let outcome = find_epsilon_equilibrium(&g, &int(1), &EpsilonOptions::default()).unwrap();
        assert!(outcome.certified());
        assert_eq!(outcome.certificates.len(), 1);
    }

    #[test]
    fn zero_game_pipeline() {
        let g = zero_game();
        let outcome =
            find_epsilon_equilibrium(&g, &ratio(1, 2), &EpsilonOptions::default()).unwrap();
        assert!(outcome.certified());
        assert_eq!(ladder_levels(&outcome), vec![PayoffVector(vec![1, 1])]);
    }
}
