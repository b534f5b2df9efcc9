//! Uniform quantizers and the exact reductions between them.
//!
//! Truncation, ceiling, and rounding all reduce to the truncation system:
//! `Q_r(x) = Q_t(x + 1/2)` and `Q_c(x) = -Q_t(-x)`, so a ceiling or rounding
//! trajectory can be reproduced bit-for-bit by simulating truncation on a
//! transformed initial state and mapping back. The probabilistic quantizer
//! carries its own seeded RNG stream and admits no such reduction.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::numeric::{frac, rat, Rational};
use crate::Result;

/// Which quantizer, plus its step `epsilon` (`Q^(eps)(x) = eps Q(x / eps)`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizerKind {
    pub variant: Variant,
    pub step: Rational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Truncation,
    Ceiling,
    Rounding,
    Probabilistic { seed: u64 },
}

impl QuantizerKind {
    pub fn new(variant: Variant, step: Rational) -> Result<Self> {
        if !step.is_positive() {
            return Err(Error::ParameterOutOfRange("quantizer step must be > 0".into()));
        }
        Ok(Self { variant, step })
    }

    pub fn truncation() -> Self {
        Self { variant: Variant::Truncation, step: Rational::one() }
    }

    pub fn ceiling() -> Self {
        Self { variant: Variant::Ceiling, step: Rational::one() }
    }

    pub fn rounding() -> Self {
        Self { variant: Variant::Rounding, step: Rational::one() }
    }

    pub fn is_deterministic(&self) -> bool {
        !matches!(self.variant, Variant::Probabilistic { .. })
    }

    /// Instantiate the runtime quantizer (allocates the RNG stream for the
    /// probabilistic variant).
    pub fn build(&self) -> Quantizer {
        let rng = match self.variant {
            Variant::Probabilistic { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };
        Quantizer { kind: self.clone(), rng }
    }
}

/// A quantizer ready to apply. Deterministic variants are pure; the
/// probabilistic one consumes its RNG stream in call order.
#[derive(Debug, Clone)]
pub struct Quantizer {
    kind: QuantizerKind,
    rng: Option<ChaCha8Rng>,
}

impl Quantizer {
    pub fn kind(&self) -> &QuantizerKind {
        &self.kind
    }

    /// Integer lattice value `Q(x / eps)`.
    pub fn lattice(&mut self, x: &Rational) -> BigInt {
        let y = x / &self.kind.step;
        match self.kind.variant {
            Variant::Truncation => y.floor().to_integer(),
            Variant::Ceiling => y.ceil().to_integer(),
            // Tie at exactly .5 rounds up.
            Variant::Rounding => (y + rat(1, 2)).floor().to_integer(),
            Variant::Probabilistic { .. } => {
                let fl = y.floor().to_integer();
                let f = frac(&y);
                if f.is_zero() {
                    return fl;
                }
                let rng = self.rng.as_mut().expect("probabilistic quantizer has an RNG");
                // Round up with exact probability f = num/den when den fits
                // in u64; otherwise on a 2^-64 grid.
                let up = match (f.numer().to_u64(), f.denom().to_u64()) {
                    (Some(num), Some(den)) => rng.gen_range(0..den) < num,
                    _ => {
                        let r = Rational::new(BigInt::from(rng.gen::<u64>()), BigInt::from(1u128 << 64));
                        r < f
                    }
                };
                if up {
                    fl + BigInt::one()
                } else {
                    fl
                }
            }
        }
    }

    /// `Q^(eps)(x) = eps * Q(x / eps)`.
    pub fn quantize(&mut self, x: &Rational) -> Rational {
        Rational::from_integer(self.lattice(x)) * &self.kind.step
    }

    pub fn quantize_vec(&mut self, x: &[Rational]) -> Vec<Rational> {
        x.iter().map(|xi| self.quantize(xi)).collect()
    }
}

/// Invertible state map relating a ceiling/rounding system to the truncation
/// system it reduces to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InverseMap {
    /// Already a truncation system.
    Identity,
    /// Ceiling: `y = -x`, so `x = -y`.
    Negate,
    /// Rounding: `y = x + 1/2`, so `x = y - 1/2`.
    ShiftHalfDown,
}

impl InverseMap {
    /// Map a truncation-system state back to the original system.
    pub fn apply(&self, y: &[Rational]) -> Vec<Rational> {
        match self {
            InverseMap::Identity => y.to_vec(),
            InverseMap::Negate => y.iter().map(|v| -v).collect(),
            InverseMap::ShiftHalfDown => y.iter().map(|v| v - rat(1, 2)).collect(),
        }
    }
}

/// Transform an initial state so that the unit-step truncation system on the
/// result reproduces the original ceiling/rounding system exactly.
pub fn reduce_to_truncation(q: &QuantizerKind, x0: &[Rational]) -> Result<(Vec<Rational>, InverseMap)> {
    match q.variant {
        Variant::Probabilistic { .. } => return Err(Error::UnsupportedReduction),
        Variant::Truncation => return Ok((x0.to_vec(), InverseMap::Identity)),
        Variant::Ceiling | Variant::Rounding => {}
    }
    if !q.step.is_one() {
        return Err(Error::ParameterOutOfRange(
            "reduction to truncation is defined for unit step only".into(),
        ));
    }
    match q.variant {
        Variant::Ceiling => Ok((x0.iter().map(|v| -v).collect(), InverseMap::Negate)),
        Variant::Rounding => Ok((x0.iter().map(|v| v + rat(1, 2)).collect(), InverseMap::ShiftHalfDown)),
        _ => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rat_int;

    fn q(variant: Variant) -> Quantizer {
        QuantizerKind::new(variant, Rational::one()).unwrap().build()
    }

    #[test]
    fn unit_step_examples() {
        assert_eq!(q(Variant::Truncation).quantize(&rat(27, 10)), rat_int(2));
        assert_eq!(q(Variant::Truncation).quantize(&rat(-1, 2)), rat_int(-1));
        assert_eq!(q(Variant::Rounding).quantize(&rat(5, 2)), rat_int(3));
        assert_eq!(q(Variant::Ceiling).quantize(&rat(27, 10)), rat_int(3));
    }

    #[test]
    fn scaled_output_is_on_the_step_lattice() {
        let step = rat(3, 7);
        let mut quant = QuantizerKind::new(Variant::Truncation, step.clone()).unwrap().build();
        for k in -30i64..=30 {
            let x = rat(k, 11);
            let out = quant.quantize(&x);
            assert!((&out / &step).is_integer(), "{x} -> {out}");
        }
    }

    #[test]
    fn reduction_identities_on_grid() {
        // Q_r(x) = Q_t(x + 1/2) and Q_c(x) = -Q_t(-x) over x = k/8.
        let mut qt = q(Variant::Truncation);
        let mut qr = q(Variant::Rounding);
        let mut qc = q(Variant::Ceiling);
        for k in -40i64..=40 {
            let x = rat(k, 8);
            assert_eq!(qr.quantize(&x), qt.quantize(&(&x + rat(1, 2))), "x={x}");
            assert_eq!(qc.quantize(&x), -qt.quantize(&(-&x)), "x={x}");
            let residue = &x - qt.quantize(&x);
            assert!(!residue.is_negative() && residue < Rational::one());
        }
    }

    #[test]
    fn reduce_maps_initial_state() {
        let x0 = vec![rat(3, 10), rat(53, 10)];
        let (y0, inv) = reduce_to_truncation(&QuantizerKind::ceiling(), &x0).unwrap();
        assert_eq!(y0, vec![rat(-3, 10), rat(-53, 10)]);
        assert_eq!(inv.apply(&y0), x0);

        let x0 = vec![rat_int(0), rat_int(1)];
        let (y0, inv) = reduce_to_truncation(&QuantizerKind::rounding(), &x0).unwrap();
        assert_eq!(y0, vec![rat(1, 2), rat(3, 2)]);
        assert_eq!(inv.apply(&y0), x0);

        let (same, inv) = reduce_to_truncation(&QuantizerKind::truncation(), &x0).unwrap();
        assert_eq!(same, x0);
        assert_eq!(inv, InverseMap::Identity);

        let prob = QuantizerKind::new(Variant::Probabilistic { seed: 1 }, Rational::one()).unwrap();
        assert!(matches!(reduce_to_truncation(&prob, &x0), Err(Error::UnsupportedReduction)));
    }

    #[test]
    fn probabilistic_is_unbiased() {
        let x = rat(27, 10); // frac 7/10
        let mut quant = QuantizerKind::new(Variant::Probabilistic { seed: 99 }, Rational::one())
            .unwrap()
            .build();
        let draws = 100_000u32;
        let mut sum = 0f64;
        for _ in 0..draws {
            sum += quant.quantize(&x).to_f64().unwrap();
        }
        let mean = sum / draws as f64;
        // Var of one draw = f (1 - f) = 0.21; 3 standard errors of the mean.
        let se = (0.21f64 / draws as f64).sqrt();
        assert!((mean - 2.7).abs() <= 3.0 * se, "mean {mean}");
    }

    #[test]
    fn probabilistic_stream_is_reproducible() {
        let kind = QuantizerKind::new(Variant::Probabilistic { seed: 7 }, Rational::one()).unwrap();
        let (mut a, mut b) = (kind.build(), kind.build());
        for k in 0..200i64 {
            let x = rat(3 * k + 1, 7);
            assert_eq!(a.quantize(&x), b.quantize(&x));
        }
    }
}
