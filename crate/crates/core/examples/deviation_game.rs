//! Builds and solves the game in which one agent tries to beat its payoff
//! against everyone else.
//!
//!     cargo run --example deviation_game

use satne::deviation::{deviation_target, solve_by_iteration, solve_game, Player, SolvedDeviation};
use satne::game::{load_game, reward_bounds};
use satne::goal::load_goals;
use satne::rational::format_rational;

fn main() -> satne::Result<()> {
    let game = load_game(include_str!("../data/four_state.json"))?;
    let goals = load_goals(include_str!("../data/goals_hard.json"))?;
    let bounds = reward_bounds(&game);

    // Agent 1 sits at payoff 0 in the (1,0) equilibrium; can it force >= 1/2?
    let target =
        deviation_target(&goals[1], 1, 0, &bounds, game.gamma()).expect("payoff 0 is not maximal");
    println!(
        "agent {} wants DS {} {}",
        target.agent,
        target.relation,
        format_rational(&target.threshold)
    );
    let solved = SolvedDeviation::solve(&game, target)?;
    let tg = solved.game.turn_game();
    println!(
        "{} states, {} edges, reacher {:?}",
        tg.num_states(),
        tg.num_edges(),
        tg.reacher()
    );

    let fast = solve_game(tg);
    let slow = solve_by_iteration(tg);
    assert_eq!(fast.winner, slow.winner);
    println!(
        "coalition wins {} states, deviator wins {}",
        fast.size(Player::Zero),
        fast.size(Player::One)
    );

    let start = solved.game.comparator().initial();
    for v in game.states() {
        let verdict = if solved.deviator_wins_at(v, start) {
            "deviator"
        } else {
            "coalition"
        };
        println!(
            "  from {} with a fresh monitor: {verdict}",
            game.state_name(v)
        );
    }

    for ((v, q), d) in solved.retaliation().iter().take(6) {
        println!(
            "  punish at ({}, q{q}) with {}",
            game.state_name(*v),
            game.decision_label(*d)
        );
    }
    Ok(())
}
