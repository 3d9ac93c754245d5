//! W-NE search: the primary-trace product restricted by every deviator's
//! losing region, searched for an accepting lasso by nested DFS.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde_json::json;

use crate::comparator::{build_comparator, Comparator};
use crate::deviation::{deviation_target_index, DeviationTarget, SolvedDeviation};
use crate::error::{Error, Result};
use crate::game::{lasso_reward, reward_bounds, DecisionId, Game, LassoPlay, RewardBounds};
use crate::goal::{Goal, PayoffVector};
use crate::product::{payoff_spec_with, Product, ProductState};
use crate::witness::{Retaliation, WitnessProfile};

pub const DEFAULT_STATE_CAP: usize = 10_000_000;
pub const STATE_CAP_ENV: &str = "SATNE_STATE_CAP";

/// The explored-state budget, overridable through `SATNE_STATE_CAP`.
pub fn default_state_cap() -> usize {
    std::env::var(STATE_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_STATE_CAP)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    First,
    All,
    Maximal,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "first" => Ok(Mode::First),
            "all" => Ok(Mode::All),
            "maximal" => Ok(Mode::Maximal),
            other => Err(format!("unknown mode {other:?} (first, all, maximal)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub state_cap: usize,
    pub jobs: usize,
    pub record_product: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            state_cap: default_state_cap(),
            jobs: 1,
            record_product: false,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Outcome {
    Witness(Box<WitnessProfile>),
    Empty,
}

#[derive(Debug, Clone)]
pub struct SearchReport {
    pub w: PayoffVector,
    pub outcome: Outcome,
    pub explored: usize,
    /// Deviator winning-region sizes by agent.
    pub win1_sizes: BTreeMap<usize, usize>,
    pub elapsed: Duration,
    pub product: Option<serde_json::Value>,
}

impl SearchReport {
    pub fn witness(&self) -> Option<&WitnessProfile> {
        match &self.outcome {
            Outcome::Witness(w) => Some(w),
            Outcome::Empty => None,
        }
    }
}

/// Search context for one game and goal list; comparators and solved
/// deviation games are built once and shared across payoff vectors.
pub struct Solver<'g> {
    game: &'g Game,
    goals: &'g [Goal],
    bounds: RewardBounds,
    config: SearchConfig,
    comparators: Vec<Vec<OnceLock<Arc<Comparator>>>>,
    deviations: Vec<Vec<OnceLock<Arc<SolvedDeviation>>>>,
}

impl<'g> Solver<'g> {
    pub fn new(game: &'g Game, goals: &'g [Goal], config: SearchConfig) -> Result<Self> {
        if goals.len() != game.num_agents() {
            return Err(Error::Goal {
                agent: goals.len().min(game.num_agents()),
                message: format!("{} goals for {} agents", goals.len(), game.num_agents()),
            });
        }
        fn slots<T>(goals: &[Goal]) -> Vec<Vec<OnceLock<T>>> {
            goals
                .iter()
                .map(|g| (0..g.thresholds().len()).map(|_| OnceLock::new()).collect())
                .collect()
        }
        Ok(Self {
            game,
            goals,
            bounds: reward_bounds(game),
            config,
            comparators: slots(goals),
            deviations: slots(goals),
        })
    }

    pub fn game(&self) -> &'g Game {
        self.game
    }

    pub fn goals(&self) -> &'g [Goal] {
        self.goals
    }

    pub fn config(&self) -> &SearchConfig {
        &self.config
    }

    pub fn comparator(&self, agent: usize, k: usize) -> Arc<Comparator> {
        self.comparators[agent][k]
            .get_or_init(|| {
                let goal = &self.goals[agent];
                Arc::new(build_comparator(
                    goal.relation(),
                    &goal.thresholds()[k],
                    self.bounds.agent(agent).mu,
                    self.game.gamma(),
                ))
            })
            .clone()
    }

    pub fn deviation(&self, agent: usize, k: usize) -> Arc<SolvedDeviation> {
        self.deviations[agent][k]
            .get_or_init(|| {
                let goal = &self.goals[agent];
                let target = DeviationTarget {
                    agent,
                    relation: goal.relation(),
                    threshold: goal.thresholds()[k].clone(),
                    threshold_index: k,
                    comparator: self.comparator(agent, k),
                };
                Arc::new(
                    SolvedDeviation::solve(self.game, target)
                        .expect("deviation games over total games are total"),
                )
            })
            .clone()
    }

    /// Decides whether a W-NE exists for `w` and extracts one.
    pub fn find(&self, w: &PayoffVector) -> Result<SearchReport> {
        let start = Instant::now();
        let spec = payoff_spec_with(self.goals, w, |a, k| self.comparator(a, k))?;
        let mut product = Product::new(self.game, spec);

        let targets: Vec<(usize, usize)> = self
            .goals
            .iter()
            .enumerate()
            .filter_map(|(a, g)| deviation_target_index(g, w.levels()[a]).map(|(_, k)| (a, k)))
            .collect();
        let solved: Vec<Arc<SolvedDeviation>> = if self.config.jobs > 1 {
            targets
                .par_iter()
                .map(|&(a, k)| self.deviation(a, k))
                .collect()
        } else {
            targets.iter().map(|&(a, k)| self.deviation(a, k)).collect()
        };
        let deviators: Vec<(usize, Arc<SolvedDeviation>)> = targets
            .iter()
            .zip(solved)
            .map(|(&(a, k), sd)| (product.add_monitor(a, k, self.comparator(a, k)), sd))
            .collect();
        let win1_sizes = deviators
            .iter()
            .map(|(_, sd)| (sd.target.agent, sd.win1_size()))
            .collect();

        let mut explorer = Explorer::new(&product, &deviators, self.config.state_cap);
        let found = explorer.search()?;
        let explored = explorer.states.len();
        let dump = self.config.record_product.then(|| explorer.dump());
        let outcome = match found {
            None => Outcome::Empty,
            Some(lasso) => {
                let lasso = lasso.canonical(self.game)?;
                debug_assert!(product.accepts_lasso(&lasso));
                Outcome::Witness(Box::new(self.witness(w, lasso, &deviators)?))
            }
        };
        Ok(SearchReport {
            w: w.clone(),
            outcome,
            explored,
            win1_sizes,
            elapsed: start.elapsed(),
            product: dump,
        })
    }

    fn witness(
        &self,
        w: &PayoffVector,
        lasso: LassoPlay,
        deviators: &[(usize, Arc<SolvedDeviation>)],
    ) -> Result<WitnessProfile> {
        let rewards = (0..self.game.num_agents())
            .map(|a| lasso_reward(self.game, &lasso, a))
            .collect::<Result<Vec<_>>>()?;
        let retaliation = deviators
            .iter()
            .map(|(_, sd)| {
                let agent = sd.target.agent;
                (
                    agent,
                    Retaliation {
                        agent,
                        relation: sd.target.relation,
                        threshold: sd.target.threshold.clone(),
                        level: w.levels()[agent],
                        moves: sd.retaliation(),
                    },
                )
            })
            .collect();
        Ok(WitnessProfile {
            lasso,
            levels: w.clone(),
            rewards,
            retaliation,
        })
    }

    /// Runs the search over payoff vectors in descending total order.
    ///
    /// `First` returns every vector tried up to and including the first
    /// witness. `All` returns every vector. `Maximal` returns the witnesses of
    /// the highest total that has any.
    pub fn enumerate(&self, mode: Mode) -> Result<Vec<SearchReport>> {
        let vectors = PayoffVector::enumerate(self.goals);
        match mode {
            Mode::All => self.find_many(&vectors),
            Mode::First => {
                let mut out = Vec::new();
                for group in by_total(&vectors) {
                    for report in self.find_many(group)? {
                        let done = report.witness().is_some();
                        out.push(report);
                        if done {
                            return Ok(out);
                        }
                    }
                }
                Ok(out)
            }
            Mode::Maximal => {
                for group in by_total(&vectors) {
                    let hits: Vec<_> = self
                        .find_many(group)?
                        .into_iter()
                        .filter(|r| r.witness().is_some())
                        .collect();
                    if !hits.is_empty() {
                        return Ok(hits);
                    }
                }
                Ok(Vec::new())
            }
        }
    }

    fn find_many(&self, vectors: &[PayoffVector]) -> Result<Vec<SearchReport>> {
        if self.config.jobs > 1 {
            vectors.par_iter().map(|w| self.find(w)).collect()
        } else {
            vectors.iter().map(|w| self.find(w)).collect()
        }
    }
}

fn by_total(vectors: &[PayoffVector]) -> Vec<&[PayoffVector]> {
    vectors.chunk_by(|a, b| a.total() == b.total()).collect()
}

pub fn find_w_ne(game: &Game, goals: &[Goal], w: &PayoffVector) -> Result<SearchReport> {
    Solver::new(game, goals, SearchConfig::default())?.find(w)
}

pub fn enumerate_w(game: &Game, goals: &[Goal], mode: Mode) -> Result<Vec<SearchReport>> {
    Solver::new(game, goals, SearchConfig::default())?.enumerate(mode)
}

/// On-the-fly exploration of the restricted product with interned states.
struct Explorer<'a, 'g> {
    product: &'a Product<'g>,
    deviators: &'a [(usize, Arc<SolvedDeviation>)],
    cap: usize,
    states: Vec<ProductState>,
    index: HashMap<ProductState, u32>,
    successors: Vec<Option<Edges>>,
}

/// Cached successors of an interned state: decision and target index.
type Edges = Box<[(DecisionId, u32)]>;

impl<'a, 'g> Explorer<'a, 'g> {
    fn new(
        product: &'a Product<'g>,
        deviators: &'a [(usize, Arc<SolvedDeviation>)],
        cap: usize,
    ) -> Self {
        Self {
            product,
            deviators,
            cap,
            states: Vec::new(),
            index: HashMap::new(),
            successors: Vec::new(),
        }
    }

    fn intern(&mut self, s: ProductState) -> Result<u32> {
        if let Some(&id) = self.index.get(&s) {
            return Ok(id);
        }
        if self.states.len() >= self.cap {
            return Err(Error::Budget {
                explored: self.states.len(),
                cap: self.cap,
            });
        }
        let id = self.states.len() as u32;
        self.index.insert(s.clone(), id);
        self.states.push(s);
        self.successors.push(None);
        Ok(id)
    }

    fn deviator_wins_at(&self, s: &ProductState) -> bool {
        self.deviators
            .iter()
            .any(|(track, sd)| sd.deviator_wins_at(s.vertex, s.comparators[*track]))
    }

    fn expand(&mut self, id: u32) -> Result<()> {
        if self.successors[id as usize].is_some() {
            return Ok(());
        }
        let s = self.states[id as usize].clone();
        let game = self.product.game();
        let mut out = Vec::new();
        for d in game.decisions() {
            if self
                .deviators
                .iter()
                .any(|(track, sd)| sd.deviator_wins_after(s.vertex, s.comparators[*track], d))
            {
                continue;
            }
            let Some(next) = self.product.step(&s, d) else {
                continue;
            };
            if self.deviator_wins_at(&next) {
                continue;
            }
            debug_assert!(!s.is_accepting() || next.is_accepting());
            out.push((d, self.intern(next)?));
        }
        self.successors[id as usize] = Some(out.into_boxed_slice());
        Ok(())
    }

    fn edges(&self, id: u32) -> &[(DecisionId, u32)] {
        self.successors[id as usize].as_deref().expect("expanded")
    }

    /// Nested DFS: after finishing an accepting state in post-order, a
    /// second search from it looks for a state on the outer stack.
    fn search(&mut self) -> Result<Option<LassoPlay>> {
        let init = self.product.initial();
        if self.deviator_wins_at(&init) {
            return Ok(None);
        }
        let root = self.intern(init)?;
        let mut outer_seen = vec![false];
        let mut on_stack = vec![false];
        let mut inner_seen = vec![false];
        let grow = |v: &mut Vec<bool>, n: usize| {
            if v.len() < n {
                v.resize(n, false);
            }
        };
        outer_seen[root as usize] = true;
        on_stack[root as usize] = true;
        let mut stack: Vec<(u32, usize)> = vec![(root, 0)];
        let mut path: Vec<DecisionId> = Vec::new();
        while let Some(&(id, next)) = stack.last() {
            self.expand(id)?;
            let n = self.states.len();
            grow(&mut outer_seen, n);
            grow(&mut on_stack, n);
            grow(&mut inner_seen, n);
            if let Some(&(d, t)) = self.edges(id).get(next) {
                stack.last_mut().expect("nonempty").1 += 1;
                if !outer_seen[t as usize] {
                    outer_seen[t as usize] = true;
                    on_stack[t as usize] = true;
                    stack.push((t, 0));
                    path.push(d);
                }
                continue;
            }
            if self.states[id as usize].is_accepting() {
                if let Some((inner, hit)) = self.inner(id, &on_stack, &mut inner_seen)? {
                    let x = stack
                        .iter()
                        .position(|&(s, _)| s == hit)
                        .expect("hit is on the stack");
                    let stem = path[..x].to_vec();
                    let mut cycle = path[x..].to_vec();
                    cycle.extend(inner);
                    return Ok(Some(LassoPlay::new(stem, cycle)));
                }
            }
            on_stack[id as usize] = false;
            stack.pop();
            path.pop();
        }
        Ok(None)
    }

    fn inner(
        &mut self,
        seed: u32,
        on_stack: &[bool],
        seen: &mut Vec<bool>,
    ) -> Result<Option<(Vec<DecisionId>, u32)>> {
        let mut stack: Vec<(u32, usize)> = vec![(seed, 0)];
        let mut path: Vec<DecisionId> = Vec::new();
        while let Some(&(id, next)) = stack.last() {
            self.expand(id)?;
            if seen.len() < self.states.len() {
                seen.resize(self.states.len(), false);
            }
            if let Some(&(d, t)) = self.edges(id).get(next) {
                stack.last_mut().expect("nonempty").1 += 1;
                if on_stack.get(t as usize).copied().unwrap_or(false) {
                    path.push(d);
                    return Ok(Some((path, t)));
                }
                if !seen[t as usize] {
                    seen[t as usize] = true;
                    stack.push((t, 0));
                    path.push(d);
                }
                continue;
            }
            stack.pop();
            path.pop();
        }
        Ok(None)
    }

    fn dump(&self) -> serde_json::Value {
        let game = self.product.game();
        let states: Vec<_> = self
            .states
            .iter()
            .enumerate()
            .map(|(id, s)| {
                json!({
                    "id": id,
                    "vertex": game.state_name(s.vertex),
                    "comparators": s.comparators.to_vec(),
                    "s1": s.s1,
                    "s2": s.s2,
                    "accepting": s.is_accepting(),
                    "edges": self.successors[id].as_deref().unwrap_or(&[]).iter()
                        .map(|&(d, t)| json!([game.decision_label(d), t]))
                        .collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({ "states": states })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::load_game;
    use crate::goal::Relation;
    use crate::rational::{int, ratio};
    use crate::witness::verify_witness;

    fn four_state() -> Game {
        load_game(include_str!("../data/four_state.json")).unwrap()
    }

    fn goals(t0: i64) -> Vec<Goal> {
        vec![
            Goal::satisficing(Relation::Ge, int(t0)),
            Goal::satisficing(Relation::Ge, ratio(1, 2)),
        ]
    }

    #[test]
    fn cooperative_witness() {
        let g = four_state();
        let goals = goals(2);
        let w = PayoffVector(vec![1, 1]);
        let report = find_w_ne(&g, &goals, &w).unwrap();
        let witness = report.witness().expect("cooperation is possible");
        assert_eq!(witness.rewards, vec![int(2), ratio(1, 2)]);
        assert!(witness.retaliation.is_empty());
        let states: Vec<_> = witness
            .lasso
            .states(&g)
            .iter()
            .map(|&v| g.state_name(v).to_string())
            .collect();
        assert_eq!(&states[..4], ["q1", "q3", "q3", "q4"]);
        assert!(verify_witness(&g, &goals, &w, witness).unwrap().passed());
    }

    #[test]
    fn hard_threshold_is_empty_but_selfish_witness_exists() {
        let g = four_state();
        let goals = goals(3);
        let report = find_w_ne(&g, &goals, &PayoffVector(vec![1, 1])).unwrap();
        assert!(report.witness().is_none());
        let w = PayoffVector(vec![1, 0]);
        let report = find_w_ne(&g, &goals, &w).unwrap();
        let witness = report.witness().expect("q1 -> q2 is stable");
        assert_eq!(g.state_name(witness.lasso.states(&g)[1]), "q2");
        assert_eq!(witness.rewards, vec![int(3), int(0)]);
        assert!(witness.retaliation.contains_key(&1));
        assert!(verify_witness(&g, &goals, &w, witness).unwrap().passed());
    }

    #[test]
    fn enumeration_modes() {
        let g = four_state();
        let coop = goals(2);
        let first = enumerate_w(&g, &coop, Mode::First).unwrap();
        assert_eq!(first.len(), 1);
        assert_eq!(first[0].w, PayoffVector(vec![1, 1]));

        let hard = goals(3);
        let maximal = enumerate_w(&g, &hard, Mode::Maximal).unwrap();
        assert!(maximal
            .iter()
            .all(|r| r.w.total() == 1 && r.witness().is_some()));
        assert!(maximal.iter().any(|r| r.w == PayoffVector(vec![1, 0])));

        let all = enumerate_w(&g, &hard, Mode::All).unwrap();
        assert_eq!(all.len(), 4);
        let best = all
            .iter()
            .filter(|r| r.witness().is_some())
            .map(|r| r.w.total())
            .max();
        assert_eq!(best, Some(1));
    }

    #[test]
    fn unsatisfiable_goals_only_admit_the_empty_vector() {
        let g = four_state();
        let goals = vec![
            Goal::satisficing(Relation::Gt, int(100)),
            Goal::satisficing(Relation::Gt, int(100)),
        ];
        let all = enumerate_w(&g, &goals, Mode::All).unwrap();
        let hits: Vec<_> = all
            .iter()
            .filter(|r| r.witness().is_some())
            .map(|r| r.w.clone())
            .collect();
        assert_eq!(hits, vec![PayoffVector(vec![0, 0])]);
    }

    #[test]
    fn budget_is_distinct_from_empty() {
        let g = four_state();
        let goals = goals(2);
        let solver = Solver::new(
            &g,
            &goals,
            SearchConfig {
                state_cap: 1,
                jobs: 1,
                record_product: false,
            },
        )
        .unwrap();
        assert!(matches!(
            solver.find(&PayoffVector(vec![1, 1])),
            Err(Error::Budget { cap: 1, .. })
        ));
    }

    #[test]
    fn parallel_enumeration_matches_sequential() {
        let g = four_state();
        let goals = goals(3);
        let seq = enumerate_w(&g, &goals, Mode::All).unwrap();
        let par = Solver::new(
            &g,
            &goals,
            SearchConfig {
                jobs: 4,
                ..SearchConfig::default()
            },
        )
        .unwrap()
        .enumerate(Mode::All)
        .unwrap();
        let summary = |rs: &[SearchReport]| -> Vec<_> {
            rs.iter()
                .map(|r| (r.w.clone(), r.witness().map(|w| w.lasso.clone())))
                .collect()
        };
        assert_eq!(summary(&seq), summary(&par));
    }

    #[test]
    fn product_dump_lists_explored_states() {
        let g = four_state();
        let goals = goals(2);
        let solver = Solver::new(
            &g,
            &goals,
            SearchConfig {
                record_product: true,
                ..SearchConfig::default()
            },
        )
        .unwrap();
        let report = solver.find(&PayoffVector(vec![0, 0])).unwrap();
        let dump = report.product.unwrap();
        assert_eq!(dump["states"].as_array().unwrap().len(), report.explored);
    }
}
