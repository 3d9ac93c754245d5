//! Exact rational helpers: `"p/q"` text form and closed-form discounted sums
//! of ultimately periodic integer words.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Zero};

pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"p/q"`, `"-p/q"` or a bare integer `"p"`.
pub fn parse_rational(text: &str) -> Result<Rational, String> {
    let text = text.trim();
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text, "1"),
    };
    let num: BigInt = num
        .parse()
        .map_err(|_| format!("`{text}` is not a rational of the form p/q"))?;
    let den: BigInt = den
        .parse()
        .map_err(|_| format!("`{text}` is not a rational of the form p/q"))?;
    if den.is_zero() {
        return Err(format!("`{text}` has a zero denominator"));
    }
    Ok(Rational::new(num, den))
}

/// Integers print as `"p"`, everything else as reduced `"p/q"`.
pub fn format_rational(value: &Rational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

pub fn gamma_pow(gamma: u32, exp: usize) -> BigInt {
    Pow::pow(BigInt::from(gamma), exp)
}

/// `Σ_{j<n} word[j] / γ^j` for a finite word.
pub fn finite_sum(word: &[i64], gamma: u32) -> Rational {
    // Horner keeps everything integral until the final division.
    let mut acc = BigInt::zero();
    for &w in word {
        acc = acc * gamma + w;
    }
    if word.is_empty() {
        return Rational::zero();
    }
    Rational::new(acc, gamma_pow(gamma, word.len() - 1))
}

/// Discounted sum of `stem · cycle^ω`: the stem's finite sum plus
/// `cycle_sum · γ^{-|stem|} / (1 - γ^{-|cycle|})`.
pub fn discounted_sum(stem: &[i64], cycle: &[i64], gamma: u32) -> Rational {
    assert!(
        !cycle.is_empty(),
        "ultimately periodic word needs a nonempty cycle"
    );
    let head = finite_sum(stem, gamma);
    let loop_sum = finite_sum(cycle, gamma);
    let period = Rational::from_integer(gamma_pow(gamma, cycle.len()));
    let shift = Rational::from_integer(gamma_pow(gamma, stem.len()));
    head + loop_sum * &period / (shift * (period - Rational::one()))
}

/// `γ / (γ - 1)`, the value of the all-ones word.
pub fn geometric_factor(gamma: u32) -> Rational {
    ratio(gamma as i64, gamma as i64 - 1)
}

pub fn floor_to_bigint(value: &Rational) -> BigInt {
    value.floor().to_integer()
}
