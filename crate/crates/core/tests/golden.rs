//! Pinned regression run: a fixed-seed 10-node instance whose exact verdict
//! and a sample of exact terminal values are frozen here. Any change to the
//! RNG derivation, graph generation, weight construction, or update rule
//! shows up as a diff in this test before anywhere else.

use quantavg::dynamics::{simulate, SimOptions, Verdict};
use quantavg::experiments::{build_graph, build_weights, draw_initial, ExperimentConfig, GraphFamily};
use quantavg::numeric::{parse_rational, rat, GridConstants};
use quantavg::quantizer::QuantizerKind;

#[test]
fn fixed_seed_ten_node_run_is_stable() {
    let mut cfg = ExperimentConfig::new(GraphFamily::ErdosRenyi { p: rat(2, 5) }, 10);
    cfg.base_seed = 42;
    let seed = cfg.run_seed(0);
    assert_eq!(seed, 42);

    let g = build_graph(&cfg, seed).unwrap();
    assert_eq!(
        g.edges(),
        &[
            (0, 4), (0, 5), (0, 7), (1, 3), (1, 4), (1, 6), (1, 7), (1, 8),
            (2, 6), (2, 7), (2, 8), (3, 5), (3, 9), (4, 9), (6, 8), (7, 9),
        ]
    );

    let w = build_weights(&cfg, &g).unwrap();
    let x0 = draw_initial(&cfg, seed).unwrap();
    assert_eq!(x0[0], rat(8159, 100));
    assert_eq!(x0[9], rat(3831, 50));

    let constants = GridConstants::compute(&w, &x0).unwrap();
    assert_eq!(constants.gamma, rat(1, 1200));
    assert_eq!(constants.delta, rat(1, 12));
    assert_eq!(constants.alpha_max(), rat(167, 400));

    let trace =
        simulate(&w, &g, &QuantizerKind::truncation(), &x0, &SimOptions::default()).unwrap();
    assert_eq!(trace.verdict, Verdict::QuantizedConsensus { k0: 55, level: 38.into() });
    let terminal = &trace.states.last().unwrap().x;
    for (i, expect) in [
        "1937/50", "3807/100", "3807/100", "23131/600", "23107/600",
        "7777/200", "5743/150", "2861/75", "457/12", "7729/200",
    ]
    .iter()
    .enumerate()
    {
        assert_eq!(&terminal[i], &parse_rational(expect).unwrap(), "node {i}");
    }
}
