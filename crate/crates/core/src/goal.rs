//! Satisficing and multi-satisficing goals, and payoff vectors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::rational::{format_rational, parse_rational, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

impl Relation {
    pub const ALL: [Relation; 6] = [
        Relation::Lt,
        Relation::Le,
        Relation::Gt,
        Relation::Ge,
        Relation::Eq,
        Relation::Ne,
    ];

    pub const ORDER: [Relation; 4] = [Relation::Lt, Relation::Le, Relation::Gt, Relation::Ge];

    pub fn holds(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            Relation::Lt => lhs < rhs,
            Relation::Le => lhs <= rhs,
            Relation::Gt => lhs > rhs,
            Relation::Ge => lhs >= rhs,
            Relation::Eq => lhs == rhs,
            Relation::Ne => lhs != rhs,
        }
    }

    /// Comparators for `≤`, `≥` and `=` are safety automata; the rest are co-safety.
    pub fn is_safety(self) -> bool {
        matches!(self, Relation::Le | Relation::Ge | Relation::Eq)
    }

    pub fn is_order(self) -> bool {
        !matches!(self, Relation::Eq | Relation::Ne)
    }

    /// True for `>`/`≥`, where larger rewards satisfy more thresholds.
    pub fn is_upward(self) -> bool {
        matches!(self, Relation::Gt | Relation::Ge)
    }

    pub fn complement(self) -> Relation {
        match self {
            Relation::Lt => Relation::Ge,
            Relation::Le => Relation::Gt,
            Relation::Gt => Relation::Le,
            Relation::Ge => Relation::Lt,
            Relation::Eq => Relation::Ne,
            Relation::Ne => Relation::Eq,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Gt => ">",
            Relation::Ge => ">=",
            Relation::Eq => "=",
            Relation::Ne => "!=",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s.trim() {
            "<" => Relation::Lt,
            "<=" | "≤" => Relation::Le,
            ">" => Relation::Gt,
            ">=" | "≥" => Relation::Ge,
            "=" | "==" => Relation::Eq,
            "!=" | "≠" => Relation::Ne,
            other => return Err(format!("unknown relation `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SatisficingGoal {
    pub relation: Relation,
    pub threshold: Rational,
}

/// One order relation over a strictly increasing threshold sequence. The
/// payoff of a play is the number of thresholds it satisfies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiSatisficingGoal {
    relation: Relation,
    thresholds: Vec<Rational>,
}

impl MultiSatisficingGoal {
    pub fn new(relation: Relation, thresholds: Vec<Rational>) -> Result<Self, String> {
        if !relation.is_order() {
            return Err(format!(
                "multi-satisficing goals need an order relation, got `{relation}`"
            ));
        }
        if thresholds.is_empty() {
            return Err("threshold sequence is empty".into());
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err("thresholds must be strictly increasing".into());
        }
        Ok(Self {
            relation,
            thresholds,
        })
    }

    pub fn relation(&self) -> Relation {
        self.relation
    }

    pub fn thresholds(&self) -> &[Rational] {
        &self.thresholds
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Goal {
    Satisficing(SatisficingGoal),
    Multi(MultiSatisficingGoal),
}

impl Goal {
    pub fn satisficing(relation: Relation, threshold: Rational) -> Self {
        Goal::Satisficing(SatisficingGoal {
            relation,
            threshold,
        })
    }

    pub fn multi(relation: Relation, thresholds: Vec<Rational>) -> Result<Self, String> {
        MultiSatisficingGoal::new(relation, thresholds).map(Goal::Multi)
    }

    pub fn relation(&self) -> Relation {
        match self {
            Goal::Satisficing(g) => g.relation,
            Goal::Multi(g) => g.relation,
        }
    }

    /// Thresholds in ascending order (a single one for satisficing goals).
    pub fn thresholds(&self) -> &[Rational] {
        match self {
            Goal::Satisficing(g) => std::slice::from_ref(&g.threshold),
            Goal::Multi(g) => &g.thresholds,
        }
    }

    pub fn max_payoff(&self) -> usize {
        self.thresholds().len()
    }

    /// Number of thresholds `t` with `reward R t`.
    pub fn payoff(&self, reward: &Rational) -> usize {
        let relation = self.relation();
        self.thresholds()
            .iter()
            .filter(|t| relation.holds(reward, t))
            .count()
    }
}

/// Target payoff level per agent. Satisficing agents use levels 0 and 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PayoffVector(pub Vec<usize>);

impl PayoffVector {
    pub fn levels(&self) -> &[usize] {
        &self.0
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn validate(&self, goals: &[Goal]) -> Result<()> {
        if self.0.len() != goals.len() {
            return Err(Error::PayoffOutOfRange(format!(
                "{self} has {} entries for {} agents",
                self.0.len(),
                goals.len()
            )));
        }
        for (agent, (&level, goal)) in self.0.iter().zip(goals).enumerate() {
            if level > goal.max_payoff() {
                return Err(Error::PayoffOutOfRange(format!(
                    "{self}: agent {agent} level {level} exceeds maximum {}",
                    goal.max_payoff()
                )));
            }
        }
        Ok(())
    }

    /// Every payoff vector for `goals`, highest total first, ties broken by
    /// descending lexicographic order.
    pub fn enumerate(goals: &[Goal]) -> Vec<PayoffVector> {
        let mut all = vec![Vec::new()];
        for goal in goals {
            all = all
                .into_iter()
                .flat_map(|prefix| {
                    (0..=goal.max_payoff()).map(move |p| {
                        let mut v = prefix.clone();
                        v.push(p);
                        v
                    })
                })
                .collect();
        }
        let mut all: Vec<PayoffVector> = all.into_iter().map(PayoffVector).collect();
        all.sort_by(|a, b| b.total().cmp(&a.total()).then_with(|| b.0.cmp(&a.0)));
        all
    }
}

impl fmt::Display for PayoffVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|p| p.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl FromStr for PayoffVector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| format!("`{p}` is not a payoff level"))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(PayoffVector)
    }
}

#[derive(Serialize, Deserialize)]
struct GoalDoc {
    relation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    threshold: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    thresholds: Option<Vec<Value>>,
}

fn rational_value(value: &Value, key: &str) -> Result<Rational> {
    match value {
        Value::String(s) => parse_rational(s).map_err(|m| Error::parse(key, m)),
        Value::Number(n) if n.is_i64() => Ok(crate::rational::int(n.as_i64().unwrap())),
        other => Err(Error::parse(
            key,
            format!("expected a \"p/q\" string, found {other}"),
        )),
    }
}

/// Parses a goals document: a JSON array with one object per agent, each
/// holding `relation` and either `threshold` (satisficing) or `thresholds`
/// (multi-satisficing).
pub fn load_goals(document: &str) -> Result<Vec<Goal>> {
    let docs: Vec<GoalDoc> =
        serde_json::from_str(document).map_err(|e| Error::parse("goals", e.to_string()))?;
    docs.iter()
        .enumerate()
        .map(|(agent, doc)| {
            let key = format!("goals[{agent}]");
            let relation: Relation = doc
                .relation
                .parse()
                .map_err(|m: String| Error::parse(format!("{key}.relation"), m))?;
            match (&doc.threshold, &doc.thresholds) {
                (Some(t), None) => Ok(Goal::satisficing(
                    relation,
                    rational_value(t, &format!("{key}.threshold"))?,
                )),
                (None, Some(ts)) => {
                    let ts = ts
                        .iter()
                        .map(|t| rational_value(t, &format!("{key}.thresholds")))
                        .collect::<Result<Vec<_>>>()?;
                    Goal::multi(relation, ts).map_err(|message| Error::Goal { agent, message })
                }
                _ => Err(Error::parse(
                    key,
                    "exactly one of `threshold` or `thresholds` is required",
                )),
            }
        })
        .collect()
}

pub fn goals_to_json(goals: &[Goal]) -> String {
    let docs: Vec<GoalDoc> = goals
        .iter()
        .map(|goal| match goal {
            Goal::Satisficing(g) => GoalDoc {
                relation: g.relation.symbol().into(),
                threshold: Some(Value::String(format_rational(&g.threshold))),
                thresholds: None,
            },
            Goal::Multi(g) => GoalDoc {
                relation: g.relation.symbol().into(),
                threshold: None,
                thresholds: Some(
                    g.thresholds
                        .iter()
                        .map(|t| Value::String(format_rational(t)))
                        .collect(),
                ),
            },
        })
        .collect();
    serde_json::to_string_pretty(&docs).expect("goal documents serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    #[test]
    fn multi_payoff_counts_thresholds() {
        let gt = Goal::multi(Relation::Gt, vec![int(5), int(10), int(15)]).unwrap();
        assert_eq!(gt.payoff(&int(5)), 0);
        assert_eq!(gt.payoff(&int(7)), 1);
        assert_eq!(gt.payoff(&int(16)), 3);
        let lt = Goal::multi(Relation::Lt, vec![int(1), int(2), int(3)]).unwrap();
        assert_eq!(lt.payoff(&int(0)), 3);
        assert_eq!(lt.payoff(&int(4)), 0);
    }

    #[test]
    fn multi_goal_rejects_bad_sequences() {
        assert!(Goal::multi(Relation::Ge, vec![int(2), int(1)]).is_err());
        assert!(Goal::multi(Relation::Eq, vec![int(1)]).is_err());
        assert!(Goal::multi(Relation::Ge, vec![]).is_err());
    }

    #[test]
    fn enumeration_order() {
        let goals = vec![
            Goal::satisficing(Relation::Ge, int(2)),
            Goal::satisficing(Relation::Ge, ratio(1, 2)),
        ];
        let order: Vec<String> = PayoffVector::enumerate(&goals)
            .iter()
            .map(|w| w.to_string())
            .collect();
        assert_eq!(order, ["(1,1)", "(1,0)", "(0,1)", "(0,0)"]);
    }

    #[test]
    fn goals_round_trip() {
        let text = r#"[{"relation": ">=", "threshold": "1/2"},
                       {"relation": ">", "thresholds": ["5", "10", 15]}]"#;
        let goals = load_goals(text).unwrap();
        assert_eq!(goals[0], Goal::satisficing(Relation::Ge, ratio(1, 2)));
        assert_eq!(goals[1].max_payoff(), 3);
        assert_eq!(load_goals(&goals_to_json(&goals)).unwrap(), goals);
    }

    #[test]
    fn payoff_vector_validation() {
        let goals = vec![Goal::satisficing(Relation::Ge, int(2))];
        assert!("1"
            .parse::<PayoffVector>()
            .unwrap()
            .validate(&goals)
            .is_ok());
        assert!("2"
            .parse::<PayoffVector>()
            .unwrap()
            .validate(&goals)
            .is_err());
        assert!("1,1"
            .parse::<PayoffVector>()
            .unwrap()
            .validate(&goals)
            .is_err());
    }
}
