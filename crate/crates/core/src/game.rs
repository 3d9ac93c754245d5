//! Concurrent discounted-sum games, their JSON form, lasso plays and reward
//! bounds.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::rational::{discounted_sum, int, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateId(pub usize);

/// Index of a decision in `D = A_0 × … × A_{k-1}`, mixed radix with agent 0
/// most significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DecisionId(pub usize);

/// One action index per agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Decision(pub Vec<usize>);

#[derive(Debug, Clone)]
pub struct Game {
    state_names: Vec<String>,
    state_index: HashMap<String, StateId>,
    initial: StateId,
    action_names: Vec<Vec<String>>,
    gamma: u32,
    strides: Vec<usize>,
    decision_count: usize,
    transitions: Vec<StateId>,
    rewards: Vec<i64>,
}

impl Game {
    /// Builds a game from closures over `(state, decision)`. `states` and
    /// `actions` give display names; `dynamics` returns successor and rewards.
    pub fn from_fn<F>(
        states: Vec<String>,
        initial: usize,
        actions: Vec<Vec<String>>,
        gamma: u32,
        mut dynamics: F,
    ) -> Result<Game>
    where
        F: FnMut(StateId, &Decision) -> (StateId, Vec<i64>),
    {
        let mut game = Game::skeleton(states, initial, actions, gamma)?;
        let k = game.num_agents();
        for v in 0..game.num_states() {
            for d in 0..game.decision_count {
                let decision = game.decision(DecisionId(d));
                let (next, reward) = dynamics(StateId(v), &decision);
                let key = game.key(StateId(v), DecisionId(d));
                if next.0 >= game.num_states() {
                    return Err(Error::parse(key, "successor state out of range"));
                }
                if reward.len() != k {
                    return Err(Error::Arity {
                        key,
                        expected: k,
                        found: reward.len(),
                    });
                }
                let slot = v * game.decision_count + d;
                game.transitions[slot] = next;
                game.rewards[slot * k..(slot + 1) * k].copy_from_slice(&reward);
            }
        }
        Ok(game)
    }

    fn skeleton(
        states: Vec<String>,
        initial: usize,
        actions: Vec<Vec<String>>,
        gamma: u32,
    ) -> Result<Game> {
        if gamma < 2 {
            return Err(Error::Gamma {
                found: gamma.to_string(),
            });
        }
        if states.is_empty() {
            return Err(Error::parse("states", "a game needs at least one state"));
        }
        if initial >= states.len() {
            return Err(Error::parse("initial", "initial state out of range"));
        }
        if actions.is_empty() {
            return Err(Error::parse("agents", "a game needs at least one agent"));
        }
        let mut state_index = HashMap::new();
        for (i, name) in states.iter().enumerate() {
            if state_index.insert(name.clone(), StateId(i)).is_some() {
                return Err(Error::parse("states", format!("duplicate state `{name}`")));
            }
        }
        for (agent, acts) in actions.iter().enumerate() {
            if acts.is_empty() {
                return Err(Error::parse(
                    format!("actions[{agent}]"),
                    "action sets must be nonempty",
                ));
            }
            for (i, a) in acts.iter().enumerate() {
                if acts[..i].contains(a) {
                    return Err(Error::parse(
                        format!("actions[{agent}]"),
                        format!("duplicate action `{a}`"),
                    ));
                }
                if a.contains(',') || a.contains('|') {
                    return Err(Error::parse(
                        format!("actions[{agent}]"),
                        format!("action `{a}` may not contain `,` or `|`"),
                    ));
                }
            }
        }
        let k = actions.len();
        let mut strides = vec![1; k];
        for i in (0..k - 1).rev() {
            strides[i] = strides[i + 1] * actions[i + 1].len();
        }
        let decision_count = strides[0] * actions[0].len();
        let slots = states.len() * decision_count;
        Ok(Game {
            state_names: states,
            state_index,
            initial: StateId(initial),
            action_names: actions,
            gamma,
            strides,
            decision_count,
            transitions: vec![StateId(0); slots],
            rewards: vec![0; slots * k],
        })
    }

    pub fn num_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn num_agents(&self) -> usize {
        self.action_names.len()
    }

    pub fn num_decisions(&self) -> usize {
        self.decision_count
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn gamma(&self) -> u32 {
        self.gamma
    }

    pub fn state_name(&self, v: StateId) -> &str {
        &self.state_names[v.0]
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.state_index.get(name).copied()
    }

    pub fn actions(&self, agent: usize) -> &[String] {
        &self.action_names[agent]
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.num_states()).map(StateId)
    }

    pub fn decisions(&self) -> impl Iterator<Item = DecisionId> {
        (0..self.decision_count).map(DecisionId)
    }

    pub fn decision(&self, d: DecisionId) -> Decision {
        Decision(
            (0..self.num_agents())
                .map(|i| self.action_of(d, i))
                .collect(),
        )
    }

    pub fn action_of(&self, d: DecisionId, agent: usize) -> usize {
        (d.0 / self.strides[agent]) % self.action_names[agent].len()
    }

    pub fn decision_id(&self, decision: &Decision) -> DecisionId {
        DecisionId(
            decision
                .0
                .iter()
                .zip(&self.strides)
                .map(|(a, s)| a * s)
                .sum(),
        )
    }

    /// `d` with agent `agent`'s action replaced by `action`.
    pub fn with_action(&self, d: DecisionId, agent: usize, action: usize) -> DecisionId {
        let current = self.action_of(d, agent);
        DecisionId(d.0 - current * self.strides[agent] + action * self.strides[agent])
    }

    pub fn step(&self, v: StateId, d: DecisionId) -> StateId {
        self.transitions[v.0 * self.decision_count + d.0]
    }

    pub fn reward(&self, v: StateId, d: DecisionId) -> &[i64] {
        let k = self.num_agents();
        let slot = v.0 * self.decision_count + d.0;
        &self.rewards[slot * k..(slot + 1) * k]
    }

    pub fn decision_label(&self, d: DecisionId) -> String {
        let names: Vec<&str> = (0..self.num_agents())
            .map(|i| self.action_names[i][self.action_of(d, i)].as_str())
            .collect();
        names.join(",")
    }

    pub fn decision_from_names(&self, names: &[String]) -> Option<DecisionId> {
        if names.len() != self.num_agents() {
            return None;
        }
        let actions = names
            .iter()
            .enumerate()
            .map(|(i, n)| self.action_names[i].iter().position(|a| a == n))
            .collect::<Option<Vec<_>>>()?;
        Some(self.decision_id(&Decision(actions)))
    }

    pub fn decision_names(&self, d: DecisionId) -> Vec<String> {
        (0..self.num_agents())
            .map(|i| self.action_names[i][self.action_of(d, i)].clone())
            .collect()
    }

    fn key(&self, v: StateId, d: DecisionId) -> String {
        format!("{}|{}", self.state_name(v), self.decision_label(d))
    }

    pub fn to_json(&self) -> String {
        let mut transitions = BTreeMap::new();
        let mut rewards = BTreeMap::new();
        for v in self.states() {
            for d in self.decisions() {
                let key = self.key(v, d);
                transitions.insert(key.clone(), self.state_name(self.step(v, d)).to_string());
                rewards.insert(key, self.reward(v, d).to_vec());
            }
        }
        let doc = GameDocOut {
            states: &self.state_names,
            initial: self.state_name(self.initial),
            agents: self.num_agents(),
            actions: &self.action_names,
            gamma: self.gamma,
            transitions,
            rewards,
        };
        serde_json::to_string_pretty(&doc).expect("game documents serialize")
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GameDoc {
    states: Vec<String>,
    initial: String,
    agents: usize,
    actions: Vec<Vec<String>>,
    gamma: Value,
    transitions: BTreeMap<String, String>,
    rewards: BTreeMap<String, Vec<Value>>,
}

#[derive(Serialize)]
struct GameDocOut<'a> {
    states: &'a [String],
    initial: &'a str,
    agents: usize,
    actions: &'a [Vec<String>],
    gamma: u32,
    transitions: BTreeMap<String, String>,
    rewards: BTreeMap<String, Vec<i64>>,
}

/// Parses and validates a game document (see the README for the format).
pub fn load_game(document: &str) -> Result<Game> {
    let doc: GameDoc =
        serde_json::from_str(document).map_err(|e| Error::parse("document", e.to_string()))?;
    let gamma = match &doc.gamma {
        Value::Number(n) => n
            .as_u64()
            .filter(|&g| g >= 2 && g <= u32::MAX as u64)
            .map(|g| g as u32),
        _ => None,
    }
    .ok_or_else(|| Error::Gamma {
        found: doc.gamma.to_string(),
    })?;
    if doc.agents != doc.actions.len() {
        return Err(Error::parse(
            "agents",
            format!(
                "declares {} agents but `actions` has {} entries",
                doc.agents,
                doc.actions.len()
            ),
        ));
    }
    let initial = doc
        .states
        .iter()
        .position(|s| *s == doc.initial)
        .ok_or_else(|| Error::parse("initial", format!("unknown state `{}`", doc.initial)))?;
    let mut game = Game::skeleton(doc.states.clone(), initial, doc.actions.clone(), gamma)?;
    let k = game.num_agents();

    for key in doc.transitions.keys().chain(doc.rewards.keys()) {
        parse_key(&game, key)?;
    }
    for v in game.states() {
        for d in game.decisions() {
            let key = game.key(v, d);
            let label = format!("({},({}))", game.state_name(v), game.decision_label(d));
            let next = doc
                .transitions
                .get(&key)
                .ok_or_else(|| Error::Totality { key: label.clone() })?;
            let next = game
                .state_id(next)
                .ok_or_else(|| Error::parse(&key, format!("unknown successor `{next}`")))?;
            let reward = doc
                .rewards
                .get(&key)
                .ok_or_else(|| Error::Totality { key: label.clone() })?;
            if reward.len() != k {
                return Err(Error::Arity {
                    key,
                    expected: k,
                    found: reward.len(),
                });
            }
            let slot = v.0 * game.decision_count + d.0;
            game.transitions[slot] = next;
            for (i, r) in reward.iter().enumerate() {
                game.rewards[slot * k + i] = r
                    .as_i64()
                    .ok_or_else(|| Error::parse(&key, format!("reward `{r}` is not an integer")))?;
            }
        }
    }
    Ok(game)
}

fn parse_key(game: &Game, key: &str) -> Result<(StateId, DecisionId)> {
    let (state, actions) = key
        .split_once('|')
        .ok_or_else(|| Error::parse(key, "expected `state|a0,…,ak-1`"))?;
    let v = game
        .state_id(state)
        .ok_or_else(|| Error::parse(key, format!("unknown state `{state}`")))?;
    let names: Vec<String> = actions.split(',').map(|s| s.trim().to_string()).collect();
    if names.len() != game.num_agents() {
        return Err(Error::parse(
            key,
            format!("expected {} actions", game.num_agents()),
        ));
    }
    let d = game
        .decision_from_names(&names)
        .ok_or_else(|| Error::parse(key, "unknown action"))?;
    Ok((v, d))
}

/// An ultimately periodic play `stem · cycle^ω` given by its decisions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LassoPlay {
    pub stem: Vec<DecisionId>,
    pub cycle: Vec<DecisionId>,
}

impl LassoPlay {
    pub fn new(stem: Vec<DecisionId>, cycle: Vec<DecisionId>) -> Self {
        Self { stem, cycle }
    }

    pub fn len(&self) -> usize {
        self.stem.len() + self.cycle.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Decision at absolute step `j` of the infinite play.
    pub fn decision_at(&self, j: usize) -> DecisionId {
        if j < self.stem.len() {
            self.stem[j]
        } else {
            self.cycle[(j - self.stem.len()) % self.cycle.len()]
        }
    }

    /// The position that follows `pos` when positions index `stem ++ cycle`.
    pub fn next_position(&self, pos: usize) -> usize {
        if pos + 1 < self.len() {
            pos + 1
        } else {
            self.stem.len()
        }
    }

    pub fn position_decision(&self, pos: usize) -> DecisionId {
        self.decision_at(pos)
    }

    /// States visited at positions `0..=|stem|+|cycle|`.
    pub fn states(&self, game: &Game) -> Vec<StateId> {
        let mut v = game.initial();
        let mut out = vec![v];
        for &d in self.stem.iter().chain(&self.cycle) {
            v = game.step(v, d);
            out.push(v);
        }
        out
    }

    pub fn validate(&self, game: &Game) -> Result<()> {
        if self.cycle.is_empty() {
            return Err(Error::InvalidLasso("loop is empty".into()));
        }
        if let Some(d) = self
            .stem
            .iter()
            .chain(&self.cycle)
            .find(|d| d.0 >= game.num_decisions())
        {
            return Err(Error::InvalidLasso(format!(
                "decision {} out of range",
                d.0
            )));
        }
        let states = self.states(game);
        let start = states[self.stem.len()];
        let end = states[self.len()];
        if start != end {
            return Err(Error::InvalidLasso(format!(
                "loop starts at {} but returns to {}",
                game.state_name(start),
                game.state_name(end)
            )));
        }
        Ok(())
    }

    /// Agent `agent`'s reward word split as `(stem, cycle)`.
    pub fn reward_word(&self, game: &Game, agent: usize) -> (Vec<i64>, Vec<i64>) {
        let states = self.states(game);
        let rewards: Vec<i64> = self
            .stem
            .iter()
            .chain(&self.cycle)
            .enumerate()
            .map(|(j, &d)| game.reward(states[j], d)[agent])
            .collect();
        let (stem, cycle) = rewards.split_at(self.stem.len());
        (stem.to_vec(), cycle.to_vec())
    }

    /// Shortest equivalent lasso: the loop is reduced to its primitive root
    /// and rotated back into the stem as far as the state sequence allows.
    pub fn canonical(&self, game: &Game) -> Result<LassoPlay> {
        self.validate(game)?;
        let mut cur = self.clone();
        let n = cur.cycle.len();
        for p in (1..n).filter(|&p| n.is_multiple_of(p)) {
            if (0..n).all(|j| cur.cycle[j] == cur.cycle[j % p]) {
                let candidate = LassoPlay::new(cur.stem.clone(), cur.cycle[..p].to_vec());
                if candidate.validate(game).is_ok() {
                    cur = candidate;
                    break;
                }
            }
        }
        while let (Some(&s), Some(&c)) = (cur.stem.last(), cur.cycle.last()) {
            if s != c {
                break;
            }
            let mut stem = cur.stem.clone();
            stem.pop();
            let mut cycle = cur.cycle.clone();
            cycle.rotate_right(1);
            let candidate = LassoPlay::new(stem, cycle);
            if candidate.validate(game).is_err() {
                break;
            }
            cur = candidate;
        }
        Ok(cur)
    }

    pub fn describe(&self, game: &Game) -> String {
        let fmt = |ds: &[DecisionId]| {
            ds.iter()
                .map(|&d| format!("({})", game.decision_label(d)))
                .collect::<Vec<_>>()
                .join(" ")
        };
        format!("{} [{}]^ω", fmt(&self.stem), fmt(&self.cycle))
    }
}

/// Exact discounted cumulative reward of agent `agent` along the lasso.
pub fn lasso_reward(game: &Game, play: &LassoPlay, agent: usize) -> Result<Rational> {
    play.validate(game)?;
    let (stem, cycle) = play.reward_word(game, agent);
    Ok(discounted_sum(&stem, &cycle, game.gamma()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentBounds {
    /// Smallest edge reward `s_i`.
    pub min: i64,
    /// Largest edge reward `b_i`.
    pub max: i64,
    /// `s_i·γ/(γ−1)`.
    pub lower: Rational,
    /// `b_i·γ/(γ−1)`.
    pub upper: Rational,
    /// `max(|s_i|, |b_i|)`, the comparator alphabet bound.
    pub mu: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewardBounds {
    pub agents: Vec<AgentBounds>,
}

impl RewardBounds {
    pub fn agent(&self, i: usize) -> &AgentBounds {
        &self.agents[i]
    }
}

pub fn reward_bounds(game: &Game) -> RewardBounds {
    let factor = crate::rational::geometric_factor(game.gamma());
    let agents = (0..game.num_agents())
        .map(|i| {
            let rewards = game
                .states()
                .flat_map(|v| game.decisions().map(move |d| (v, d)))
                .map(|(v, d)| game.reward(v, d)[i]);
            let (min, max) =
                rewards.fold((i64::MAX, i64::MIN), |(lo, hi), r| (lo.min(r), hi.max(r)));
            AgentBounds {
                min,
                max,
                lower: int(min) * &factor,
                upper: int(max) * &factor,
                mu: min.abs().max(max.abs()),
            }
        })
        .collect();
    RewardBounds { agents }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}
