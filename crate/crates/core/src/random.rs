//! Seeded generators for small games, goals, words and turn games.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::deviation::{Player, TurnGame};
use crate::game::{DecisionId, Game, LassoPlay, StateId};
use crate::goal::{Goal, Relation};
use crate::rational::{ratio, Rational};

#[derive(Debug, Clone)]
pub struct GameShape {
    pub max_states: usize,
    pub agents: usize,
    pub max_actions: usize,
    pub reward_bound: i64,
    pub gamma: u32,
}

impl Default for GameShape {
    fn default() -> Self {
        Self {
            max_states: 3,
            agents: 2,
            max_actions: 2,
            reward_bound: 2,
            gamma: 2,
        }
    }
}

pub fn random_game<R: Rng>(rng: &mut R, shape: &GameShape) -> Game {
    let n = rng.gen_range(1..=shape.max_states);
    let states = (0..n).map(|i| format!("v{i}")).collect();
    let actions = (0..shape.agents)
        .map(|a| {
            let k = rng.gen_range(1..=shape.max_actions);
            (0..k)
                .map(|i| format!("{}{i}", (b'a' + a as u8) as char))
                .collect()
        })
        .collect::<Vec<Vec<String>>>();
    let radix: Vec<usize> = actions.iter().map(Vec::len).collect();
    let decisions: usize = radix.iter().product();
    let table: Vec<(usize, Vec<i64>)> = (0..n * decisions)
        .map(|_| {
            let to = rng.gen_range(0..n);
            let rewards = (0..shape.agents)
                .map(|_| rng.gen_range(-shape.reward_bound..=shape.reward_bound))
                .collect();
            (to, rewards)
        })
        .collect();
    Game::from_fn(states, 0, actions, shape.gamma, |v, d| {
        let index = d.0.iter().zip(&radix).fold(0, |acc, (&a, &k)| acc * k + a);
        let (to, r) = &table[v.0 * decisions + index];
        (StateId(*to), r.clone())
    })
    .expect("generated games are well formed")
}

/// A rational `p/q` with `q ≤ max_den` and `|p/q| ≤ bound`.
pub fn random_rational<R: Rng>(rng: &mut R, bound: i64, max_den: i64) -> Rational {
    let q = rng.gen_range(1..=max_den);
    let p = rng.gen_range(-bound * q..=bound * q);
    ratio(p, q)
}

pub fn random_relation<R: Rng>(rng: &mut R, order_only: bool) -> Relation {
    if order_only {
        *Relation::ORDER.choose(rng).expect("nonempty")
    } else {
        *Relation::ALL.choose(rng).expect("nonempty")
    }
}

/// A single-threshold goal. Some thresholds are taken from `hints` so that
/// boundary cases come up often.
pub fn random_satisficing<R: Rng>(rng: &mut R, bound: i64, hints: &[Rational]) -> Goal {
    let relation = random_relation(rng, false);
    let threshold = match hints.choose(rng) {
        Some(h) if rng.gen_bool(0.4) => h.clone(),
        _ => random_rational(rng, bound, 4),
    };
    Goal::satisficing(relation, threshold)
}

/// A multi-satisficing goal with up to `max_thresholds` distinct thresholds.
pub fn random_multi<R: Rng>(rng: &mut R, max_thresholds: usize, bound: i64, max_den: i64) -> Goal {
    let relation = random_relation(rng, true);
    let k = rng.gen_range(1..=max_thresholds);
    let mut t: Vec<Rational> = (0..k)
        .map(|_| random_rational(rng, bound, max_den))
        .collect();
    t.sort();
    t.dedup();
    Goal::multi(relation, t).expect("sorted distinct thresholds")
}

/// An ultimately periodic integer word over `[-mu, mu]`.
pub fn random_word<R: Rng>(
    rng: &mut R,
    max_stem: usize,
    max_cycle: usize,
    mu: i64,
) -> (Vec<i64>, Vec<i64>) {
    let stem = (0..rng.gen_range(0..=max_stem))
        .map(|_| rng.gen_range(-mu..=mu))
        .collect();
    let cycle = (0..rng.gen_range(1..=max_cycle))
        .map(|_| rng.gen_range(-mu..=mu))
        .collect();
    (stem, cycle)
}

/// A random walk from the initial state closed into a lasso at the first
/// revisit after `min_len` steps.
pub fn random_lasso<R: Rng>(rng: &mut R, game: &Game, min_len: usize) -> LassoPlay {
    let mut v = game.initial();
    let mut visited = vec![v];
    let mut decisions = Vec::new();
    loop {
        let d = DecisionId(rng.gen_range(0..game.num_decisions()));
        v = game.step(v, d);
        decisions.push(d);
        if decisions.len() >= min_len {
            if let Some(i) = visited.iter().position(|&u| u == v) {
                let cycle = decisions.split_off(i);
                return LassoPlay::new(decisions, cycle);
            }
        }
        visited.push(v);
    }
}

pub fn random_turn_game<R: Rng>(
    rng: &mut R,
    n: usize,
    max_out: usize,
    target_rate: f64,
) -> TurnGame {
    let owner = (0..n)
        .map(|_| {
            if rng.gen_bool(0.5) {
                Player::Zero
            } else {
                Player::One
            }
        })
        .collect();
    let successors = (0..n)
        .map(|_| {
            let k = rng.gen_range(1..=max_out.min(n));
            let mut all: Vec<usize> = (0..n).collect();
            all.shuffle(rng);
            all.truncate(k);
            all.sort();
            all
        })
        .collect();
    let target = (0..n).map(|_| rng.gen_bool(target_rate)).collect();
    let reacher = if rng.gen_bool(0.5) {
        Player::Zero
    } else {
        Player::One
    };
    TurnGame::new(owner, successors, target, reacher).expect("generated turn games are total")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_objects_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let g = random_game(&mut rng, &GameShape::default());
            assert!(g.num_states() <= 3);
            let lasso = random_lasso(&mut rng, &g, 2);
            assert!(lasso.validate(&g).is_ok());
            let goal = random_multi(&mut rng, 4, 4, 12);
            assert!(goal.max_payoff() >= 1);
            let tg = random_turn_game(&mut rng, 6, 3, 0.2);
            assert_eq!(tg.num_states(), 6);
        }
    }

    #[test]
    fn seeds_reproduce() {
        let make = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            random_game(&mut rng, &GameShape::default()).to_json()
        };
        assert_eq!(make(5), make(5));
    }
}
