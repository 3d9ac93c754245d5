//! Approximate equilibria: a ladder of thresholds spaced at most epsilon
//! apart turns an exact W-NE into an epsilon-equilibrium.
//!
//!     cargo run --example epsilon_ladder [-- EPS]

use satne::epsilon::{find_epsilon_equilibrium, EpsilonOptions};
use satne::game::load_game;
use satne::rational::{format_rational, parse_rational};

fn main() -> satne::Result<()> {
    let eps = std::env::args().nth(1).unwrap_or_else(|| "1".into());
    let eps = parse_rational(&eps).map_err(satne::Error::Epsilon)?;
    let game = load_game(include_str!("../data/four_state.json"))?;

    let outcome = find_epsilon_equilibrium(&game, &eps, &EpsilonOptions::default())?;
    for (a, g) in outcome.ladder.goals.iter().enumerate() {
        let t: Vec<String> = g.thresholds().iter().map(format_rational).collect();
        println!("agent {a} ladder: {}", t.join(" "));
    }
    for (i, cert) in &outcome.certificates {
        let report = &outcome.reports[*i];
        let w = report.witness().expect("certificates belong to witnesses");
        println!("W = {}: {}", report.w, w.lasso.describe(&game));
        for c in &cert.agents {
            println!(
                "  agent {} gets {}, best deviation in [{}, {}] after {} steps: {:?}",
                c.agent,
                format_rational(&c.reward),
                format_rational(&c.lo),
                format_rational(&c.hi),
                c.horizon,
                c.verdict
            );
        }
    }
    Ok(())
}
