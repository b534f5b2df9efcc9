//! Exact rational arithmetic helpers and the grid constants that the
//! Lyapunov machinery depends on.
//!
//! States evolve on a discrete grid: the decimal part of every node value
//! stays on multiples of `1/B_i` shifted by its initial decimal, where `B_i`
//! is the LCM of the node's weight denominators. That grid is what makes a
//! strictly positive margin `gamma` constructible, and `gamma` in turn fixes
//! the per-node margins `alpha_i = 1 - w_ii + gamma`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::Error;
use crate::weights::WeightMatrix;
use crate::Result;

/// Exact fraction; always stored reduced with a positive denominator.
pub type Rational = num_rational::BigRational;

/// Shorthand for small rational literals.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Rational from an integer.
pub fn rat_int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Largest integer not greater than `x`.
pub fn floor_int(x: &Rational) -> BigInt {
    x.floor().to_integer()
}

/// Decimal part `x - floor(x)`, always in `[0, 1)`.
pub fn frac(x: &Rational) -> Rational {
    x - x.floor()
}

/// Parse `p/q`, an integer, or a finite decimal string into an exact rational.
///
/// Decimals convert exactly (`"0.25"` becomes `1/4`); anything else is rejected.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| bad())?;
        let den: BigInt = den.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(Error::Parse(format!("zero denominator: {s:?}")));
        }
        return Ok(Rational::new(num, den));
    }
    if let Some((int_part, dec_part)) = s.split_once('.') {
        if dec_part.is_empty() || !dec_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = int_part.trim_start().starts_with('-');
        let int_part = if int_part.is_empty() || int_part == "-" || int_part == "+" {
            BigInt::zero()
        } else {
            int_part.parse().map_err(|_| bad())?
        };
        let scale = BigInt::from(10u32).pow(dec_part.len() as u32);
        let dec: BigInt = dec_part.parse().map_err(|_| bad())?;
        let unsigned = Rational::from_integer(int_part.abs()) + Rational::new(dec, scale);
        return Ok(if negative { -unsigned } else { unsigned });
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(n))
}

/// Render a rational as `p/q` (or just `p` for integers).
pub fn format_rational(x: &Rational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// LCM of the denominators of a node's neighbor weights.
pub fn lcm_denominators(weights_row: &[Rational]) -> Result<BigInt> {
    if weights_row.is_empty() {
        return Err(Error::EmptyNeighborhood);
    }
    let mut acc = BigInt::one();
    for w in weights_row {
        debug_assert!(w.is_positive(), "weights must be strictly positive");
        acc = acc.lcm(w.denom());
    }
    Ok(acc)
}

/// The per-node grid constants and margins derived from a weight matrix and
/// the initial state.
#[derive(Debug, Clone)]
pub struct GridConstants {
    /// `B_i`: LCM of the denominators of node i's edge weights.
    pub b: Vec<BigInt>,
    /// Grid-gap margin; strictly positive under the weight assumption.
    pub gamma: Rational,
    /// Minimum edge weight.
    pub delta: Rational,
    /// `alpha_i = 1 - w_ii + gamma`, each in `(0, 1/2)`.
    pub alpha: Vec<Rational>,
}

impl GridConstants {
    /// Derive the constants for `weights` and the initial state `x0`.
    ///
    /// Fails with [`Error::AssumptionViolated`] when some diagonal entry is
    /// not strictly above 1/2, in which case no positive margin exists.
    pub fn compute(weights: &WeightMatrix, x0: &[Rational]) -> Result<Self> {
        let decimals: Vec<Rational> = x0.iter().map(frac).collect();
        let gamma = compute_gamma(weights, &decimals)?;
        let mut b = Vec::with_capacity(weights.n());
        let mut alpha = Vec::with_capacity(weights.n());
        for i in 0..weights.n() {
            let row: Vec<Rational> = weights.neighbor_weights(i).map(|(_, w)| w.clone()).collect();
            b.push(lcm_denominators(&row)?);
            alpha.push(weights.off_diagonal_sum(i) + &gamma);
        }
        let delta = weights
            .min_edge_weight()
            .ok_or(Error::EmptyNeighborhood)?;
        Ok(Self { b, gamma, delta, alpha })
    }

    /// `max_i alpha_i`.
    pub fn alpha_max(&self) -> Rational {
        self.alpha.iter().max().cloned().expect("nonempty")
    }

    /// `min{gamma, delta}`: the guaranteed strict Lyapunov decrease.
    pub fn beta(&self) -> Rational {
        self.gamma.clone().min(self.delta.clone())
    }
}

/// Construct the margin `gamma > 0` for the quantized system.
///
/// Writing `D_i = lcm(B_i, den(c_i(0)))`, every reachable decimal value and
/// every off-diagonal row sum lie on the `1/D_i` grid, so any strict
/// inequality between them has gap at least `1/D_i`. Taking
/// `gamma = min(min_i 1/D_i, min_i (1/2 - sum_j w_ij)) / 2` satisfies the
/// four margin constraints at once.
pub fn compute_gamma(weights: &WeightMatrix, initial_decimals: &[Rational]) -> Result<Rational> {
    assert_eq!(initial_decimals.len(), weights.n(), "dimension mismatch");
    let half = rat(1, 2);
    let mut min_gap: Option<Rational> = None;
    for i in 0..weights.n() {
        let row: Vec<Rational> = weights.neighbor_weights(i).map(|(_, w)| w.clone()).collect();
        let b_i = lcm_denominators(&row)?;
        let d_i = b_i.lcm(initial_decimals[i].denom());
        let gap = Rational::new(BigInt::one(), d_i);
        let off_sum = weights.off_diagonal_sum(i);
        let slack = &half - &off_sum;
        if !slack.is_positive() {
            return Err(Error::AssumptionViolated(format!(
                "node {i}: diagonal weight {} is not strictly above 1/2",
                format_rational(&(Rational::one() - off_sum)),
            )));
        }
        let local = gap.min(slack);
        min_gap = Some(match min_gap {
            Some(m) => m.min(local),
            None => local,
        });
    }
    let min_gap = min_gap.ok_or(Error::EmptyNeighborhood)?;
    Ok(min_gap / rat_int(2))
}
