"""Smoke test for the blocksim Python extension.

Build and install first, for example:

    pip install maturin
    maturin build --release -m crates/py/Cargo.toml -o dist
    pip install dist/blocksim-*.whl

then run `python python/smoke_test.py`.
"""

import math

import blocksim


def check_distributions():
    d = blocksim.Distribution("gamma", 4.0, shape=2.0)
    assert d.kind == "gamma" and d.mean == 4.0 and d.shape == 2.0
    assert math.isclose(d.variance, 8.0)
    assert blocksim.Distribution.parse("const:1.5").sample(3) == [1.5, 1.5, 1.5]
    draws = blocksim.Distribution.parse("exp:1").sample(200_000, seed=3)
    assert abs(sum(draws) / len(draws) - 1.0) < 0.01
    assert blocksim.Distribution.parse("exp:1").sample(5, seed=9) == blocksim.Distribution.parse("exp:1").sample(5, seed=9)
    try:
        blocksim.Distribution.parse("exp:-1")
    except ValueError:
        pass
    else:
        raise AssertionError("negative mean accepted")


def check_engines():
    net = blocksim.simulate_network(8, 400, "exp:1", "exp:2", seed=5, record_tree=True, record_series=True)
    mat = blocksim.simulate_matrix(8, 400, "exp:1", "exp:2", seed=5, record_series=True)
    assert net.p_n == mat.p_n and net.height_series == mat.height_series
    assert len(net.parents) == 399
    assert net.tree("dot").startswith("digraph blocktree {")
    assert sum(net.gap_histogram().values()) <= 399

    assert blocksim.simulate_network(1, 100, "exp:1", "exp:5").p_n == 1.0
    assert blocksim.simulate_infinite(1000, "exp:1", "const:0").p_n == 1.0
    pruned = blocksim.simulate_infinite(500, "exp:1", "exp:1", seed=2)
    full = blocksim.simulate_infinite(500, "exp:1", "exp:1", seed=2, pruning=False)
    assert pruned.p_n == full.p_n


def check_statistics():
    est = blocksim.run_replications("infinite", 1000, "exp:1", "exp:0.1", 50, seed=1)
    assert abs(est["mean"] - 1 / 1.1) < 0.02
    assert est["q25"] <= est["q50"] <= est["q75"]
    assert blocksim.run_replications("matrix", 100, "exp:1", "const:0", 5, m=4)["std_error"] == 0.0

    assert math.isclose(blocksim.predicted_p(1.0, 0.1), 1 / 1.1)
    assert math.isclose(blocksim.mixture_cdf("exp:1", 10, 0.0), 0.1)
    assert blocksim.sup_gap_bound(1000) == 0.002
    assert blocksim.classify(1.0, 1000.0) == "chaotic"
    assert blocksim.classify(1.0, 0.0) == "slow"
    m = blocksim.derived_metrics(0.5, 1.0)
    assert (m["growth_rate"], m["invalid_rate"], m["confirmation_time"]) == (0.5, 0.5, 2.0)
    assert all(blocksim.validate(quick=True).values())


if __name__ == "__main__":
    check_distributions()
    check_engines()
    check_statistics()
    print("blocksim python smoke test passed")
