#!/usr/bin/env python3
"""Smoke test for the `ccsr` Python extension module.

Builds nothing itself: it locates the cdylib produced by `cargo build -p
ccsr-py`, stages it under an importable name, and exercises the bound math,
the LDPC code, and the Monte Carlo entry point.
"""

import math
import pathlib
import shutil
import sys
import sysconfig
import tempfile

REPO = pathlib.Path(__file__).resolve().parent.parent


def stage_module(tmp: pathlib.Path) -> None:
    """Copy the built extension into `tmp` under the import name `ccsr`."""
    candidates = [
        REPO / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libccsr.so", "libccsr.dylib", "ccsr.dll")
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("extension not found; run `cargo build -p ccsr-py` first")
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    shutil.copy2(built, tmp / f"ccsr{suffix}")
    sys.path.insert(0, str(tmp))


def approx(a: float, b: float, rel: float = 1e-9) -> bool:
    return math.isclose(a, b, rel_tol=rel, abs_tol=1e-300)


def main() -> None:
    with tempfile.TemporaryDirectory() as tmpdir:
        stage_module(pathlib.Path(tmpdir))
        import ccsr

        # Gaussian tail surrogate: fixed values and monotonicity.
        assert approx(ccsr.q_approx(0.0), 1.0 / 3.0)
        assert ccsr.q_approx(1.0) > ccsr.q_approx(2.0) > ccsr.q_approx(3.0) > 0.0

        # Noise scaling: 3 dB more SNR halves the noise density.
        n0_a = ccsr.snr_to_n0(7.0)
        n0_b = ccsr.snr_to_n0(10.0)
        assert approx(n0_a / n0_b, 10.0 ** 0.3, rel=1e-12)

        assert approx(ccsr.marking_fraction(0.25), 1.0 - math.exp(-0.25), rel=1e-12)

        # Bounds: more combining rounds help, more SNR helps.
        b1 = ccsr.ber_upper_bound(8.0, 0.5, 1)
        b2 = ccsr.ber_upper_bound(8.0, 0.5, 2)
        b1_hi = ccsr.ber_upper_bound(12.0, 0.5, 1)
        assert 0.0 < b2 < b1 < 0.5
        assert b1_hi < b1

        # The optimizer's reported objective matches a direct evaluation.
        tau_o, eta_o = ccsr.optimal_tau(12.0, 2, 1024)
        assert 0.0 <= tau_o <= 4.0
        assert approx(eta_o, ccsr.throughput_lower_bound(12.0, tau_o, 2, 1024), rel=1e-12)
        assert eta_o >= ccsr.throughput_lower_bound(12.0, 1.7, 2, 1024)

        # LDPC round trip and a parity sanity check.
        code = ccsr.LdpcCode()
        assert (code.n, code.k) == (648, 324)
        info = [(i * 7 + 3) % 2 for i in range(code.k)]
        cw = code.encode(info)
        assert cw[: code.k] == info and code.syndrome_ok(cw)
        bits, converged, iters = code.decode([20.0 if b == 0 else -20.0 for b in cw])
        assert converged and iters == 0 and bits == cw
        corrupted = [20.0 if b == 0 else -20.0 for b in cw]
        for i in range(10):
            corrupted[i * 61] *= -1.0
        bits, converged, _ = code.decode(corrupted)
        assert converged and bits == cw

        # Monte Carlo entry point: self-consistent and seed-deterministic.
        kwargs = dict(snr_db=12.0, mu=1, frames=150, subcarriers=128, channel="iid")
        a = ccsr.simulate_point(tau=0.3, **kwargs)
        b = ccsr.simulate_point(tau=0.3, **kwargs)
        assert a == b
        assert a["frames"] == 150 and 0.0 <= a["eta"] <= 1.0
        assert abs(a["mean_beta_fraction"] - ccsr.marking_fraction(0.3)) < 0.05

        # Zero threshold marks nothing, so both schemes see identical draws.
        sel = ccsr.simulate_point(tau=0.0, **kwargs)
        plain = ccsr.simulate_point(tau=0.0, scheme="cc", **kwargs)
        assert sel["ber"] == plain["ber"] and sel["eta"] == plain["eta"]

    print("smoke test passed")


if __name__ == "__main__":
    main()
