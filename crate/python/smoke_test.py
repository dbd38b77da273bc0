"""Smoke test for the sicma extension module.

Build the module first, either with maturin or by copying the cdylib:

    cargo build --release -p sicma-py
    cp target/release/libsicma.so python/sicma.so
    python3 python/smoke_test.py
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import sicma  # noqa: E402


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    cfg = sicma.SystemConfig()
    assert cfg.n == 50 and cfg.packet_bits == 4000
    assert close(cfg.slot_time(31.0), 0.8e-3, 1e-12)
    assert close(sicma.slot_time(1.0, 4000, 1e6), 4e-3, 1e-12)
    assert close(sicma.target_snr(31.0, 0.1), 294.23, 0.01)

    fixed = sicma.fixed_params(cfg)
    assert fixed["p"] == 1.0
    assert close(fixed["gamma"], 1 / 20.28, 1e-12)
    assert close(fixed["slot"], 0.0576, 5e-4)
    assert sicma.adaptive_params(3, cfg)["p"] == 1 / 3

    # One strong packet over a weak one: both decodable at a low threshold.
    assert sicma.decode_slot([50.0, 5.0], 0.1, 0.1) == [True, True]
    assert sicma.decode_slot([0.01], 1.0, 0.1) == [False]

    mean, se = sicma.estimate_mh(1, 1.0, 0.1, 200_000, 7)
    assert abs(mean - 0.9) < 4 * se, (mean, se)

    light = cfg.with_lambda(10.0)
    a = sicma.fixed_metrics(light, 20_000)
    assert a["t_star"] < a["ed"] <= 1.5 * a["t_star"]

    m = sicma.replicate(light, "fixed", 200.0, 4, seed=3, min_slots=5_000)
    assert m["replications"] == 4
    assert m["ledger"]["generated"] > 0
    for key in ("pdr", "mean_access_delay", "mean_aoi", "cbr"):
        assert math.isfinite(m[key]), key
    assert abs(m["pdr"] - a["p_s"]) < 0.05
    assert abs(m["mean_access_delay"] - a["ed"]) / a["ed"] < 0.05

    s = sicma.simulate(cfg, "adaptive", 5.0, seed=1)
    assert 0.0 < s["pdr"] <= 1.0

    try:
        sicma.SystemConfig(epsilon=1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("invalid epsilon accepted")

    print("sicma", sicma.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
