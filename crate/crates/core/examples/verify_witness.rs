//! Serializes a witness, reads it back, checks it independently, and plays
//! the encoded strategy profile against a deviating agent.
//!
//!     cargo run --example verify_witness

use satne::game::load_game;
use satne::goal::{load_goals, PayoffVector};
use satne::search::find_w_ne;
use satne::witness::{verify_witness, ProfileRunner, WitnessProfile};

fn main() -> satne::Result<()> {
    let game = load_game(include_str!("../data/four_state.json"))?;
    let goals = load_goals(include_str!("../data/goals_hard.json"))?;
    let w = PayoffVector(vec![1, 0]);
    let report = find_w_ne(&game, &goals, &w)?;
    let witness = report.witness().expect("agent 0 alone can be satisfied");

    let doc = witness.to_json(&game);
    println!(
        "witness document: {} bytes, payoffs {:?}",
        doc.len(),
        witness.rewards
    );
    let parsed = WitnessProfile::from_json(&game, &doc)?;
    for c in verify_witness(&game, &goals, &w, &parsed)?.checks {
        println!(
            "{} {}: {}",
            if c.passed { "pass" } else { "FAIL" },
            c.name,
            c.detail
        );
    }

    // Claiming the wrong payoff vector is caught.
    let wrong = verify_witness(&game, &goals, &PayoffVector(vec![0, 0]), &parsed)?;
    let failed: Vec<&str> = wrong.failed().map(|c| c.name).collect();
    println!("against W = (0,0): failed {failed:?}");

    // Agent 1 switches to "go" on every step; the profile reacts.
    let runner = ProfileRunner::new(&game, &parsed);
    let go = game
        .actions(1)
        .iter()
        .position(|a| a == "go")
        .expect("four_state action");
    let mut s = runner.initial();
    for _ in 0..4 {
        let proposal = runner.proposal(&s);
        let actual = game.with_action(proposal, 1, go);
        println!(
            "at {} propose {} play {}  ({:?})",
            game.state_name(s.vertex),
            game.decision_label(proposal),
            game.decision_label(actual),
            s.mode
        );
        s = runner.advance(&s, actual);
    }
    Ok(())
}
