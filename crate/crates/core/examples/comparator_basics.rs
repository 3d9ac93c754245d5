//! Builds discounted-sum comparators and checks them against exact sums.
//!
//!     cargo run --example comparator_basics

use satne::comparator::{build_comparator, expand_threshold};
use satne::goal::Relation;
use satne::rational::{discounted_sum, format_rational, ratio};

fn main() {
    let t = ratio(1, 3);
    let e = expand_threshold(&t, 2);
    println!(
        "1/3 in base 2: integer {} stem {:?} period {:?}",
        e.integer_digit, e.stem, e.period
    );

    for relation in Relation::ALL {
        let cmp = build_comparator(relation, &t, 2, 2);
        println!(
            "DS {relation} 1/3, mu 2: {:?}, {} states (bound {})",
            cmp.kind(),
            cmp.num_states(),
            cmp.size_bound()
        );
    }

    let cmp = build_comparator(Relation::Ge, &t, 2, 2);
    let words: [(&[i64], &[i64]); 4] = [
        (&[], &[0, 1]),
        (&[], &[1, 0]),
        (&[1, -2], &[0]),
        (&[0, 0, 2], &[-1]),
    ];
    for (stem, cycle) in words {
        let value = discounted_sum(stem, cycle, 2);
        let accepted = cmp.run_on_lasso(stem, cycle).expect("letters within mu");
        println!(
            "{stem:?}({cycle:?})^w  DS = {:>5}  accepted: {accepted}",
            format_rational(&value)
        );
    }

    // Alphabet size drives the residual band, so state count is linear in mu.
    let sizes: Vec<usize> = (1..=8)
        .map(|mu| build_comparator(Relation::Gt, &t, mu, 2).num_states())
        .collect();
    println!("DS > 1/3 states for mu = 1..8: {sizes:?}");
}
