use blocksim::draws::SeededDraws;
use blocksim::matrix::{run_matrix, simulate_matrix_with, visible_height_naive, visible_height_pruned};
use blocksim::network::simulate_network_with;
use blocksim::validate::random_net_config;
use blocksim::{
    simulate_infinite, simulate_matrix, simulate_network, DistributionSpec, InfSimConfig, MatrixOptions,
    NetSimConfig, SampleStream, ScriptedDraws, Visibility,
};

fn spec(s: &str) -> DistributionSpec {
    s.parse().unwrap()
}

#[test]
fn network_and_matrix_agree_on_random_configs() {
    let mut stream = SampleStream::new(31, 0);
    for _ in 0..120 {
        let mut cfg = random_net_config(&mut stream);
        cfg.record_series = true;
        let net = simulate_network_with(&cfg, SeededDraws::new(&cfg.alpha, &cfg.beta, cfg.seed).unwrap()).unwrap();
        let mat = simulate_matrix_with(
            &cfg,
            SeededDraws::new(&cfg.alpha, &cfg.beta, cfg.seed).unwrap(),
            MatrixOptions::default(),
        )
        .unwrap();
        assert_eq!(net.p_n.to_bits(), mat.p_n.to_bits(), "{cfg:?}");
        assert_eq!(net.height_series, mat.height_series);
        assert_eq!(simulate_network(&cfg).unwrap().p_n, simulate_matrix(&cfg).unwrap().p_n);
    }
}

#[test]
fn hand_trace_on_both_engines() {
    let cfg = NetSimConfig::new(5, 5, spec("const:1"), spec("const:1.5"), 0);
    let cfg = NetSimConfig { m: 2, record_tree: true, record_series: true, ..cfg };
    let script = || ScriptedDraws::new(vec![1.0], vec![0, 1, 0, 1], vec![1.5]);
    let net = simulate_network_with(&cfg, script()).unwrap();
    let mat = simulate_matrix_with(&cfg, script(), MatrixOptions::default()).unwrap();
    for out in [&net, &mat] {
        assert_eq!(out.p_n, 3.0 / 5.0);
        assert_eq!(out.height_series.as_deref(), Some(&[1, 2, 2, 3, 3][..]));
    }
    let tree = net.tree.unwrap();
    assert_eq!(tree.parents(), &[0, 0, 1, 2]);
    assert_eq!(tree.height(), 3);
}

#[test]
fn pruned_scan_matches_naive_every_step() {
    let mut stream = SampleStream::new(8, 1);
    let mut runs = 0;
    for ratio in [0.01, 1.0, 10.0] {
        for kind in ["exp", "gamma:2", "const"] {
            for _ in 0..6 {
                let m = 2 + stream.next_index(30);
                let n = 100 + stream.next_index(1901);
                let beta = match kind {
                    "exp" => DistributionSpec::exponential(ratio),
                    "gamma:2" => DistributionSpec::gamma(2.0, ratio),
                    _ => DistributionSpec::constant(ratio),
                }
                .unwrap();
                let cfg = NetSimConfig::new(m, n, spec("exp:1"), beta, runs);
                let (_, state) =
                    run_matrix(&cfg, SeededDraws::new(&cfg.alpha, &cfg.beta, cfg.seed).unwrap(), MatrixOptions::default())
                        .unwrap();
                for k in 1..state.len() {
                    let (j, t) = (state.producers()[k], state.times()[k]);
                    let naive = visible_height_naive(k, j, t, &state, Visibility::Strict);
                    let (pruned, _) = visible_height_pruned(k, j, t, &state, Visibility::Strict);
                    assert_eq!(naive, pruned, "ratio {ratio} {kind} k={k}");
                    assert_eq!(naive, state.heights()[k]);
                }
                runs += 1;
            }
        }
    }
    assert!(runs >= 50);
}

#[test]
fn trivial_regimes_give_one() {
    for seed in 0..5 {
        let one = NetSimConfig::new(1, 300, spec("exp:1"), spec("exp:50"), seed);
        assert_eq!(simulate_network(&one).unwrap().p_n, 1.0);
        assert_eq!(simulate_matrix(&one).unwrap().p_n, 1.0);
        let sync = NetSimConfig::new(20, 300, spec("exp:1"), spec("const:0"), seed);
        assert_eq!(simulate_network(&sync).unwrap().p_n, 1.0);
        assert_eq!(simulate_matrix(&sync).unwrap().p_n, 1.0);
        let inf = InfSimConfig::new(1000, spec("exp:1"), spec("const:0"), seed);
        assert_eq!(simulate_infinite(&inf).unwrap().p_n, 1.0);
    }
}

#[test]
fn recorded_tree_is_consistent_with_outcome() {
    let cfg = NetSimConfig { record_tree: true, ..NetSimConfig::new(6, 400, spec("exp:1"), spec("exp:2"), 5) };
    let out = simulate_network(&cfg).unwrap();
    let tree = out.tree.unwrap();
    assert_eq!(tree.len(), 400);
    assert_eq!(tree.height(), out.final_height);
    let gaps = tree.invalid_gap_histogram();
    let weighted: u64 = gaps.counts.iter().map(|(g, c)| *g as u64 * c).sum();
    assert_eq!(weighted + gaps.trailing as u64, (tree.len() - tree.height()) as u64);
}
