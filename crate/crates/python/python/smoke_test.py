"""Smoke test for the mpdetect_py extension module.

Build and install first, e.g. `maturin develop` or
`maturin build --release && pip install target/wheels/*.whl`, then run
`python crates/python/python/smoke_test.py`.
"""

import json
import math

import mpdetect_py as mp


def check(cond, what):
    if not cond:
        raise SystemExit(f"FAIL: {what}")
    print(f"ok: {what}")


def main():
    check(abs(mp.norm_cdf(0.0) - 0.5) < 1e-15, "norm_cdf(0) = 0.5")
    check(abs(mp.inv_norm_cdf(0.975) - 1.959963984540054) < 1e-9, "inv_norm_cdf(0.975)")
    check(abs(mp.detector1_threshold(1e-4, 1024) - 0.0149) < 5e-5, "Detector I threshold example")
    check(abs(mp.detector2_threshold(1e-2) - math.log(100.0)) < 1e-12, "Detector II threshold")
    check(abs(mp.noncentral_chi2_cdf(2.0, 0.0) - (1 - math.exp(-1.0))) < 1e-12, "central chi2 cdf")

    spectrum = mp.periodogram([math.cos(2 * math.pi * 3 * k / 16) for k in range(16)])
    check(abs(spectrum[3] - 4.0) < 1e-12 and abs(spectrum[13] - 4.0) < 1e-12, "periodogram tone bins")

    rc = mp.ReceiverConfig(d=0.5)
    ray = mp.MultipathState(0.5, 0.3, math.radians(60.0))
    dtau, dphi = mp.solve_lock(ray, rc, "stl")
    out = mp.noiseless_outputs(dtau, dphi, ray, rc, "stl")
    check(abs(out.i_eml) / rc.los_amplitude() < 1e-9, "STL lock zeroes the discriminator")
    vtl = mp.noiseless_outputs(*mp.solve_lock(ray, rc, "vtl"), ray, rc, "vtl")
    check(abs(vtl.q_p) / rc.los_amplitude() < 1e-12, "VTL lock zeroes prompt quadrature")

    scenario = {
        "duration_s": 3.0,
        "mode": "STL",
        "receiver": {"d": 0.5, "T": 0.001, "f_s": 2046000.0, "c_over_n0_dbhz": 45.0},
        "segments": [
            {"start_s": 0.0, "alpha": 0.0},
            {"start_s": 1.5, "alpha": 0.5, "delta_M_chips": 0.3, "theta_M_deg": 60.0},
        ],
        "seed": 7,
    }
    stream = mp.simulate(json.dumps(scenario))
    check(len(stream) == 3000, "simulate produces one sample per epoch")

    cfg = mp.DetectorConfig("d1", n=1024, stride=64, pfa=1e-4)
    events, warning = cfg.run(stream)
    check(warning is None and len(events) > 0, "detector emits events")
    before = [e.decision for e in events if e.window_end_epoch <= 1500]
    after = [e.decision for e in events if e.window_end_epoch >= 1500 + 1024]
    check(all(d == "H0" for d in before) and all(d == "H1" for d in after), "decision flips after onset")
    check(cfg.band_sizes()[0] + cfg.band_sizes()[1] + cfg.band_sizes()[2] == 1024, "band plan covers all bins")

    rows = mp.theory_table("d2", [10.0], [1e-3, 1e-2, 1e-1], 1024)
    check(len(rows) == 3 and rows[0][2] < rows[2][2], "theory table rises with pfa")

    small = mp.DetectorConfig("d1", n=64)
    rate = mp.empirical_rate(small, trials=2000, seed=1 << 56)
    # 3 binomial standard errors at 2000 trials
    check(abs(rate.rate - 0.01) < 3 * math.sqrt(0.01 * 0.99 / 2000), "H0 rate near 1e-2")
    threshold, _ = mp.calibrate_threshold(small, 0.1, 2000, 2 << 56)
    check(threshold > 0.0, "calibrated threshold positive")

    try:
        mp.DetectorConfig("d1", n=1000)
    except ValueError as err:
        check("1000" in str(err), "non power-of-two window rejected")
    else:
        raise SystemExit("FAIL: window length 1000 accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
