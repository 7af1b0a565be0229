"""Smoke test for the mllg extension. Build it first with build_extension.sh."""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import mllg


def main():
    cfg = mllg.Config("n = 2\nJ = 4\nL = 3\n")
    assert cfg.n == 2 and cfg.steps == 4 and abs(cfg.k - 0.25) < 1e-15
    assert mllg.Config(cfg.to_text()).to_text() == cfg.to_text()

    try:
        mllg.Config(overrides=["theta=1.5"])
    except ValueError as e:
        assert "theta" in str(e)
    else:
        raise AssertionError("theta = 1.5 was accepted")

    info = mllg.mesh_info(2)
    assert (info["vertices"], info["edges"], info["tets"]) == (27, 98, 48)
    assert info["offdiagonal_ok"]

    u = mllg.apply_exp_sg([1.0, 0.0, 0.0], [0.0, 0.0, 1.0], math.pi / 2)
    assert max(abs(a - b) for a, b in zip(u, [0.0, -1.0, 0.0])) < 1e-15

    w = mllg.sample_wiener_path(10, 0.1, 7)
    assert len(w) == 11 and w[0] == 0.0
    assert w == mllg.sample_wiener_path(10, 0.1, 7)

    one = mllg.run_path(cfg)
    assert len(one["trace"]) == 5
    assert one["max_unit_deviation"] <= 1e-12

    ens = mllg.run_ensemble(cfg)
    assert ens["paths"] == 3 and len(ens["sample_paths"]) == 3
    assert len(set(ens["seeds"])) == 3
    assert abs(ens["mean_sphere_error_sq"] - sum(ens["sphere_error_sq"]) / 3) < 1e-14
    assert ens["sphere_error_sq"][0] == one["sphere_error_sq"]

    rows = mllg.convergence(cfg.with_overrides(["n_list=1,2", "k_ratios=1", "L=1"]))
    assert [r[0] for r in rows] == [1, 2]

    suites = mllg.check(cfg, "rotation")
    assert suites[0][0] == "rotation" and suites[0][1]

    print("smoke test passed:", cfg, "E =", ens["mean_sphere_error_sq"])


if __name__ == "__main__":
    main()
