//! Property tests over generated words, goals and games.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use satne::comparator::build_comparator;
use satne::game::{reward_bounds, LassoPlay};
use satne::goal::{Goal, PayoffVector, Relation};
use satne::product::{payoff_spec, Product};
use satne::random::{random_game, random_lasso, random_multi, GameShape};
use satne::rational::{discounted_sum, ratio};

fn relation() -> impl Strategy<Value = Relation> {
    prop::sample::select(Relation::ALL.to_vec())
}

proptest! {
    #[test]
    fn closed_form_sum_matches_oracle(
        stem in prop::collection::vec(-5i64..=5, 0..5),
        cycle in prop::collection::vec(-5i64..=5, 1..5),
        gamma in 2u32..=5,
    ) {
        prop_assert_eq!(discounted_sum(&stem, &cycle, gamma), common::ds(&stem, &cycle, gamma));
    }

    #[test]
    fn comparator_decides_exactly(
        stem in prop::collection::vec(-3i64..=3, 0..5),
        cycle in prop::collection::vec(-3i64..=3, 1..5),
        num in -40i64..=40,
        den in 1i64..=9,
        gamma in 2u32..=3,
        r in relation(),
    ) {
        let t = ratio(num, den);
        let cmp = build_comparator(r, &t, 3, gamma);
        let want = common::holds(r, &common::ds(&stem, &cycle, gamma), &t);
        prop_assert_eq!(cmp.run_on_lasso(&stem, &cycle).unwrap(), want);
    }

    #[test]
    fn complement_flips_verdict(
        cycle in prop::collection::vec(-2i64..=2, 1..4),
        num in -8i64..=8,
        den in 1i64..=4,
        r in relation(),
    ) {
        let t = ratio(num, den);
        let a = build_comparator(r, &t, 2, 2).run_on_lasso(&[], &cycle).unwrap();
        let b = build_comparator(r.complement(), &t, 2, 2).run_on_lasso(&[], &cycle).unwrap();
        prop_assert_ne!(a, b);
    }

    #[test]
    fn rotating_the_loop_into_the_stem_keeps_acceptance(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let game = random_game(&mut rng, &GameShape::default());
        let goals: Vec<Goal> = (0..2).map(|_| random_multi(&mut rng, 3, 3, 6)).collect();
        let lasso = random_lasso(&mut rng, &game, 1);
        let mut unrolled = lasso.stem.clone();
        unrolled.push(lasso.cycle[0]);
        let mut cycle = lasso.cycle[1..].to_vec();
        cycle.push(lasso.cycle[0]);
        let shifted = LassoPlay::new(unrolled, cycle);
        let bounds = reward_bounds(&game);
        for w in PayoffVector::enumerate(&goals) {
            let spec = payoff_spec(&goals, &w, &bounds, game.gamma()).unwrap();
            let p = Product::new(&game, spec);
            prop_assert_eq!(p.accepts_lasso(&lasso), p.accepts_lasso(&shifted));
        }
    }
}
