//! Several thresholds per agent: the payoff is how many are met.
//!
//!     cargo run --example multi_satisficing

use satne::game::load_game;
use satne::goal::{load_goals, PayoffVector};
use satne::product::payoff_encoding;
use satne::rational::format_rational;
use satne::search::{enumerate_w, Mode};

fn main() -> satne::Result<()> {
    let game = load_game(include_str!("../data/four_state.json"))?;
    let goals = load_goals(include_str!("../data/goals_multi.json"))?;
    for (a, g) in goals.iter().enumerate() {
        let t: Vec<String> = g.thresholds().iter().map(format_rational).collect();
        println!("agent {a}: DS {} each of [{}]", g.relation(), t.join(", "));
    }

    let w = PayoffVector(vec![2, 1]);
    for (a, g) in goals.iter().enumerate() {
        println!(
            "  payoff {} for agent {a} means {:?}",
            w.levels()[a],
            payoff_encoding(g, w.levels()[a])
        );
    }

    for report in enumerate_w(&game, &goals, Mode::All)? {
        match report.witness() {
            Some(wit) => {
                let r: Vec<String> = wit.rewards.iter().map(format_rational).collect();
                println!(
                    "W = {}: {}  rewards ({})",
                    report.w,
                    wit.lasso.describe(&game),
                    r.join(", ")
                );
            }
            None => println!("W = {}: none", report.w),
        }
    }
    Ok(())
}
