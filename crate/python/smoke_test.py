"""Smoke test for the pylimweak extension module."""

import math
import os
import tempfile

import pylimweak


def test_closed_forms():
    assert abs(pylimweak.homog_weak_norm_closed("const:1", 2, 1.0) - math.sqrt(math.pi)) < 1e-12
    assert abs(pylimweak.homog_weak_norm_closed("pair:1,-1", 1, 0.5) - math.sqrt(2.0)) < 1e-12
    assert abs(pylimweak.beta_t(2, 1.0, 1.0, 0.1) - (1 / 0.9 - 1 / 1.1)) < 1e-12


def test_point_values():
    t = pylimweak.apply("T_signed", "pair:1,1", "indicator:0.5", 1, 0.5, [1.0])
    m = pylimweak.apply("M", "pair:1,1", "indicator:0.5", 1, 0.5, [0.0])
    assert abs(t - 2 * (math.sqrt(1.5) - math.sqrt(0.5))) < 1e-9
    assert abs(m - math.sqrt(2.0)) < 1e-6


def test_runs():
    rep = pylimweak.identity_check("const:1", 2, 1.0)
    assert rep["rel_err"] < 0.01
    run = pylimweak.limit_run("M", "pair:1,1", "indicator:0.5", 1, 0.5, 1.0, [0.2, 0.1, 0.05])
    assert all(b < a for a, b in zip(run["D"], run["D"][1:]))
    assert run["slope"] > 0.8


def test_errors():
    try:
        pylimweak.beta_t(1, 0.5, 1.0, 0.6)
    except ValueError as e:
        assert "t_schedule" in str(e)
    else:
        raise AssertionError("expected ValueError")


def test_cli():
    with tempfile.TemporaryDirectory() as d:
        out = os.path.join(d, "n.csv")
        assert pylimweak.run_cli(["norms", "--out", out]) == 0
        with open(out) as fh:
            assert fh.readline().strip() == "quantity,value,config_hash"
        assert pylimweak.run_cli(["limit", "--t", "0.6", "--out", out + "x"]) == 2
        assert not os.path.exists(out + "x")


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"{name} ok")
