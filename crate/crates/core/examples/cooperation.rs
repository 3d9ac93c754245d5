//! The four-state running example: agent 1 only earns reward while the
//! play lingers at q3, agent 0 is paid once the play leaves it.
//!
//!     cargo run --example cooperation

use satne::game::load_game;
use satne::goal::{load_goals, PayoffVector};
use satne::rational::format_rational;
use satne::search::{enumerate_w, find_w_ne, Mode};

fn main() -> satne::Result<()> {
    let game = load_game(include_str!("../data/four_state.json"))?;

    let coop = load_goals(include_str!("../data/goals_coop.json"))?;
    let report = find_w_ne(&game, &coop, &PayoffVector(vec![1, 1]))?;
    let witness = report.witness().expect("both agents can be satisfied");
    let rewards: Vec<String> = witness.rewards.iter().map(format_rational).collect();
    println!("goals (>= 2, >= 1/2), W = (1,1)");
    println!("  lasso   {}", witness.lasso.describe(&game));
    println!("  rewards ({})", rewards.join(", "));
    println!("  explored {} product states", report.explored);

    // Raising agent 0's bar to 3 breaks the deal: waiting one round at q3
    // halves the 8 that agent 0 collects on leaving.
    let hard = load_goals(include_str!("../data/goals_hard.json"))?;
    let both = find_w_ne(&game, &hard, &PayoffVector(vec![1, 1]))?;
    println!(
        "goals (>= 3, >= 1/2), W = (1,1): {}",
        if both.witness().is_some() {
            "witness"
        } else {
            "empty"
        }
    );

    for report in enumerate_w(&game, &hard, Mode::Maximal)? {
        if let Some(w) = report.witness() {
            println!("  maximal W = {}: {}", report.w, w.lasso.describe(&game));
            for r in w.retaliation.values() {
                println!(
                    "  agent {} is held below {} {} from {} states",
                    r.agent,
                    r.relation,
                    format_rational(&r.threshold),
                    r.moves.len()
                );
            }
        }
    }
    Ok(())
}
