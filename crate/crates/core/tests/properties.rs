//! Property-based checks: conservation, quantizer identities, and
//! serialization round trips over randomized inputs.

use proptest::prelude::*;
use quantavg::dynamics::{simulate, state_sum, step, SimOptions, Trace, Verdict};
use quantavg::graph::Graph;
use quantavg::numeric::{format_rational, parse_rational, rat, Rational};
use quantavg::quantizer::{QuantizerKind, Variant};
use quantavg::weights;

fn small_rational() -> impl Strategy<Value = Rational> {
    (-2000i64..2000, 1i64..40).prop_map(|(n, d)| rat(n, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // The update moves mass along edges only: the sum is invariant for any
    // quantizer, including the probabilistic one, and any symmetric weights.
    #[test]
    fn step_conserves_sum(
        seed in 0u64..1000,
        xs in prop::collection::vec(small_rational(), 4..9),
        variant_ix in 0usize..4,
    ) {
        let n = xs.len();
        let g = Graph::erdos_renyi(n, &rat(3, 5), seed).unwrap();
        let w = weights::modified_metropolis(&g, &rat(5, 2)).unwrap();
        let variant = match variant_ix {
            0 => Variant::Truncation,
            1 => Variant::Ceiling,
            2 => Variant::Rounding,
            _ => Variant::Probabilistic { seed },
        };
        let mut q = QuantizerKind::new(variant, rat(1, 1)).unwrap().build();
        let total = state_sum(&xs);
        let mut x = xs;
        for _ in 0..15 {
            x = step(&w, &mut q, &x);
            prop_assert_eq!(state_sum(&x), total.clone());
        }
    }

    // Q_r(x) = Q_t(x + 1/2) and Q_c(x) = -Q_t(-x) pointwise.
    #[test]
    fn quantizer_reduction_identities(x in small_rational()) {
        let mut qt = QuantizerKind::truncation().build();
        let mut qr = QuantizerKind::rounding().build();
        let mut qc = QuantizerKind::ceiling().build();
        prop_assert_eq!(qr.quantize(&x), qt.quantize(&(&x + rat(1, 2))));
        prop_assert_eq!(qc.quantize(&x), -qt.quantize(&(-&x)));
    }

    #[test]
    fn rational_text_round_trip(x in small_rational()) {
        prop_assert_eq!(parse_rational(&format_rational(&x)).unwrap(), x);
    }

    #[test]
    fn trace_round_trip(seed in 0u64..200) {
        let g = Graph::erdos_renyi(5, &rat(3, 5), seed).unwrap();
        let w = weights::modified_metropolis(&g, &rat(2, 1)).unwrap();
        let x0: Vec<Rational> =
            (0..5).map(|i| rat((seed as i64 * 13 + 29 * i) % 100, 4)).collect();
        let trace = simulate(&w, &g, &QuantizerKind::truncation(), &x0, &SimOptions::default())
            .unwrap();
        let verdict = Verdict::from_json(&trace.verdict.to_json()).unwrap();
        prop_assert_eq!(&verdict, &trace.verdict);
        let back = Trace::from_csv(&trace.to_csv(), verdict).unwrap();
        prop_assert_eq!(back.states.len(), trace.states.len());
        for (a, b) in back.states.iter().zip(&trace.states) {
            prop_assert_eq!(&a.x, &b.x);
        }
    }
}
