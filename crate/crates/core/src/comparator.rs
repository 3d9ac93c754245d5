//! Deterministic comparator automata for `DS_γ(w) R t` over an integer
//! alphabet `[-μ, μ]`.
//!
//! The automaton reads the difference between the weight word and the base-γ
//! digit stream of `t`, keeping an integer residual `x' = γ·x + (w_j − t[j])`.
//! Every remaining difference digit has magnitude at most `B = μ + γ − 1`, so
//! the unread tail is worth at most `B/(γ−1)` in residual units. Once
//! `x·(γ−1) > B` the sum is definitely above `t` (sink high); once
//! `x·(γ−1) < −B` it is definitely below (sink low). A run that stays inside
//! the band forever has `DS(w) = t`.

use std::collections::{HashMap, VecDeque};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive};
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::goal::Relation;
use crate::rational::{discounted_sum, floor_to_bigint, format_rational, Rational};

pub type CompState = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ComparatorKind {
    Safety,
    CoSafety,
}

/// Eventually periodic base-γ expansion `t[0] . t[1] t[2] … (period)^ω`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitExpansion {
    /// `⌊t⌋`; may be negative.
    pub integer_digit: BigInt,
    pub stem: Vec<u32>,
    pub period: Vec<u32>,
}

impl DigitExpansion {
    /// Total description length `1 + |stem| + |period|`.
    pub fn eta(&self) -> usize {
        1 + self.stem.len() + self.period.len()
    }

    /// Fractional digit `t[j]` for `j ≥ 1`.
    pub fn digit(&self, j: usize) -> u32 {
        assert!(j >= 1, "digit 0 is the integer digit");
        if j <= self.stem.len() {
            self.stem[j - 1]
        } else {
            self.period[(j - 1 - self.stem.len()) % self.period.len()]
        }
    }

    pub fn value(&self, gamma: u32) -> Rational {
        let stem: Vec<i64> = self.stem.iter().map(|&d| d as i64).collect();
        let period: Vec<i64> = self.period.iter().map(|&d| d as i64).collect();
        Rational::from_integer(self.integer_digit.clone())
            + discounted_sum(&stem, &period, gamma) / Rational::from_integer(BigInt::from(gamma))
    }
}

/// Long division of the fractional part with remainder-cycle detection. The
/// period starts at the first repeated remainder, so terminating expansions
/// end in `(0)^ω` rather than `(γ−1)^ω`.
pub fn expand_threshold(t: &Rational, gamma: u32) -> DigitExpansion {
    assert!(gamma >= 2, "discount factor must be at least 2");
    let integer_digit = floor_to_bigint(t);
    let frac = t - Rational::from_integer(integer_digit.clone());
    let q = frac.denom().clone();
    let mut r = frac.numer().clone();
    let mut seen: HashMap<BigInt, usize> = HashMap::new();
    let mut digits = Vec::new();
    let start = loop {
        if let Some(&pos) = seen.get(&r) {
            break pos;
        }
        seen.insert(r.clone(), digits.len());
        let (digit, rest) = (r * gamma).div_rem(&q);
        digits.push(digit.to_u32().expect("base-γ digit fits in u32"));
        r = rest;
    };
    let period = digits.split_off(start);
    DigitExpansion {
        integer_digit,
        stem: digits,
        period,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum StateLabel {
    /// Before the integer digit has been consumed.
    Initial,
    /// `phase` indexes the next digit to read; stem positions first, then
    /// the period cyclically.
    Band {
        phase: u32,
        residual: i64,
    },
    High,
    Low,
    /// Merged high/low sink used by `=` and `≠`.
    Sink,
}

#[derive(Debug, Clone)]
pub struct Comparator {
    relation: Relation,
    threshold: Rational,
    mu: i64,
    gamma: u32,
    kind: ComparatorKind,
    expansion: DigitExpansion,
    labels: Vec<StateLabel>,
    delta: Vec<CompState>,
    accepting: Vec<bool>,
    accepting_sink: Option<CompState>,
    rejecting_sink: Option<CompState>,
}

/// Builds the comparator accepting `w ∈ [-μ, μ]^ω` iff `DS_γ(w) R t`. Only
/// states reachable from the initial state are materialized, numbered in
/// breadth-first order over ascending letters.
pub fn build_comparator(relation: Relation, t: &Rational, mu: i64, gamma: u32) -> Comparator {
    assert!(mu >= 0, "alphabet bound must be nonnegative");
    assert!(gamma >= 2, "discount factor must be at least 2");
    let expansion = expand_threshold(t, gamma);
    let g = gamma as i64;
    let bound = mu + g - 1;
    let band = bound / (g - 1);
    let stem_len = expansion.stem.len() as u32;
    let period_len = expansion.period.len() as u32;
    let merged = !relation.is_order();

    // Anything beyond ±(μ + band + 1) leaves the band on the first letter
    // regardless of the weight read, so the clamp does not change behavior.
    let limit = BigInt::from(mu + band + 1);
    let first_digit = if expansion.integer_digit.abs() > limit {
        if expansion.integer_digit.is_positive() {
            mu + band + 1
        } else {
            -(mu + band + 1)
        }
    } else {
        expansion
            .integer_digit
            .to_i64()
            .expect("clamped digit fits")
    };

    let digit_at = |phase: u32| -> i64 {
        if phase == 0 {
            first_digit
        } else {
            expansion.digit(phase as usize) as i64
        }
    };
    let next_phase = |phase: u32| -> u32 {
        if phase == stem_len + period_len {
            stem_len + 1
        } else {
            phase + 1
        }
    };
    let classify = |phase: u32, x: i64| -> StateLabel {
        if x * (g - 1) > bound {
            if merged {
                StateLabel::Sink
            } else {
                StateLabel::High
            }
        } else if x * (g - 1) < -bound {
            if merged {
                StateLabel::Sink
            } else {
                StateLabel::Low
            }
        } else {
            StateLabel::Band { phase, residual: x }
        }
    };
    let successor = |label: StateLabel, w: i64| -> StateLabel {
        match label {
            StateLabel::Initial => classify(next_phase(0), w - digit_at(0)),
            StateLabel::Band { phase, residual } => {
                classify(next_phase(phase), g * residual + w - digit_at(phase))
            }
            sink => sink,
        }
    };

    let letters = (2 * mu + 1) as usize;
    let mut index: HashMap<StateLabel, CompState> = HashMap::new();
    let mut labels = vec![StateLabel::Initial];
    index.insert(StateLabel::Initial, 0);
    let mut delta = Vec::new();
    let mut queue = VecDeque::from([0 as CompState]);
    while let Some(q) = queue.pop_front() {
        let label = labels[q as usize];
        let row_start = delta.len();
        delta.resize(row_start + letters, 0);
        for (li, w) in (-mu..=mu).enumerate() {
            let next = successor(label, w);
            let id = *index.entry(next).or_insert_with(|| {
                labels.push(next);
                queue.push_back((labels.len() - 1) as CompState);
                (labels.len() - 1) as CompState
            });
            delta[row_start + li] = id;
        }
    }

    let kind = if relation.is_safety() {
        ComparatorKind::Safety
    } else {
        ComparatorKind::CoSafety
    };
    let in_band = |l: &StateLabel| matches!(l, StateLabel::Initial | StateLabel::Band { .. });
    let accepting: Vec<bool> = labels
        .iter()
        .map(|l| match relation {
            Relation::Ge => *l != StateLabel::Low,
            Relation::Le => *l != StateLabel::High,
            Relation::Eq => in_band(l),
            Relation::Gt => *l == StateLabel::High,
            Relation::Lt => *l == StateLabel::Low,
            Relation::Ne => *l == StateLabel::Sink,
        })
        .collect();
    let find = |target: StateLabel| index.get(&target).copied();
    let (accepting_sink, rejecting_sink) = match relation {
        Relation::Ge => (None, find(StateLabel::Low)),
        Relation::Le => (None, find(StateLabel::High)),
        Relation::Eq => (None, find(StateLabel::Sink)),
        Relation::Gt => (find(StateLabel::High), None),
        Relation::Lt => (find(StateLabel::Low), None),
        Relation::Ne => (find(StateLabel::Sink), None),
    };

    Comparator {
        relation,
        threshold: t.clone(),
        mu,
        gamma,
        kind,
        expansion,
        labels,
        delta,
        accepting,
        accepting_sink,
        rejecting_sink,
    }
}

impl Comparator {
    pub fn relation(&self) -> Relation {
        self.relation
    }

    pub fn threshold(&self) -> &Rational {
        &self.threshold
    }

    pub fn mu(&self) -> i64 {
        self.mu
    }

    pub fn gamma(&self) -> u32 {
        self.gamma
    }

    pub fn kind(&self) -> ComparatorKind {
        self.kind
    }

    pub fn expansion(&self) -> &DigitExpansion {
        &self.expansion
    }

    pub fn num_states(&self) -> usize {
        self.labels.len()
    }

    pub fn initial(&self) -> CompState {
        0
    }

    pub fn label(&self, q: CompState) -> StateLabel {
        self.labels[q as usize]
    }

    pub fn is_accepting(&self, q: CompState) -> bool {
        self.accepting[q as usize]
    }

    pub fn accepting_sink(&self) -> Option<CompState> {
        self.accepting_sink
    }

    pub fn rejecting_sink(&self) -> Option<CompState> {
        self.rejecting_sink
    }

    /// The sink that settles the comparator's verdict: the accepting sink of
    /// a co-safety automaton, the rejecting sink of a safety automaton.
    pub fn decisive_sink(&self) -> Option<CompState> {
        match self.kind {
            ComparatorKind::Safety => self.rejecting_sink,
            ComparatorKind::CoSafety => self.accepting_sink,
        }
    }

    /// `η·(2·⌊(μ+γ−1)/(γ−1)⌋ + 1) + 3`.
    pub fn size_bound(&self) -> usize {
        let g = self.gamma as i64;
        let band = (self.mu + g - 1) / (g - 1);
        self.expansion.eta() * (2 * band as usize + 1) + 3
    }

    pub fn letter_in_range(&self, w: i64) -> bool {
        (-self.mu..=self.mu).contains(&w)
    }

    /// Panics on letters outside `[-μ, μ]`; see [`Comparator::try_step`].
    #[inline]
    pub fn step(&self, q: CompState, w: i64) -> CompState {
        assert!(
            self.letter_in_range(w),
            "letter {w} outside comparator alphabet [-{m}, {m}]",
            m = self.mu
        );
        let letters = (2 * self.mu + 1) as usize;
        self.delta[q as usize * letters + (w + self.mu) as usize]
    }

    pub fn try_step(&self, q: CompState, w: i64) -> Result<CompState> {
        if !self.letter_in_range(w) {
            return Err(Error::Alphabet {
                letter: w,
                mu: self.mu,
            });
        }
        Ok(self.step(q, w))
    }

    /// Membership of `stem · cycle^ω`, decided by running until the pair
    /// (automaton state, cycle offset) repeats.
    pub fn run_on_lasso(&self, stem: &[i64], cycle: &[i64]) -> Result<bool> {
        if cycle.is_empty() {
            return Err(Error::InvalidLasso("loop is empty".into()));
        }
        let mut q = self.initial();
        for &w in stem {
            q = self.try_step(q, w)?;
        }
        let mut seen: HashMap<(CompState, usize), usize> = HashMap::new();
        let mut trail = Vec::new();
        let mut offset = 0;
        loop {
            if let Some(&first) = seen.get(&(q, offset)) {
                return Ok(trail[first..].iter().any(|&s| self.is_accepting(s)));
            }
            seen.insert((q, offset), trail.len());
            trail.push(q);
            q = self.try_step(q, cycle[offset])?;
            offset = (offset + 1) % cycle.len();
        }
    }

    pub fn to_debug_json(&self) -> serde_json::Value {
        let letters = (2 * self.mu + 1) as usize;
        let states: Vec<_> = self
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                json!({
                    "id": i,
                    "label": l,
                    "accepting": self.accepting[i],
                    "next": &self.delta[i * letters..(i + 1) * letters],
                })
            })
            .collect();
        json!({
            "relation": self.relation.symbol(),
            "threshold": format_rational(&self.threshold),
            "mu": self.mu,
            "gamma": self.gamma,
            "kind": self.kind,
            "letters": (-self.mu..=self.mu).collect::<Vec<_>>(),
            "states": states,
        })
    }
}

/// Closed-form oracle: evaluates `DS_γ(stem · cycle^ω)` exactly and applies
/// the relation.
pub fn exact_compare(
    stem: &[i64],
    cycle: &[i64],
    relation: Relation,
    t: &Rational,
    gamma: u32,
) -> bool {
    relation.holds(&discounted_sum(stem, cycle, gamma), t)
}
