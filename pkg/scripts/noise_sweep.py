"""Offline double-pendulum fit quality against measurement noise.

Noise is added after the fact to q, dq, ddq and u with a standard deviation
equal to a fraction of each channel's RMS, so the closed-loop trajectory is
the same for every row.

    python3 scripts/noise_sweep.py
"""
from importlib.resources import files

import numpy as np

from svaid.identify import Sample, fit, stack
from svaid.model import load_model
from svaid.sim import load_scenario, run_scenario

FRACTIONS = (0.0, 0.005, 0.01, 0.02, 0.05, 0.1)


def main(seed: int = 0) -> None:
    data = files("svaid") / "data"
    model = load_model(data / "double_pendulum.model")
    scn, cfg = load_scenario(data / "double_pendulum_offline.json", model)
    samples = run_scenario(scn, cfg).samples
    channels = [np.array([getattr(s.state, k) for s in samples]) for k in ("q", "dq", "ddq")]
    channels.append(np.array([s.u for s in samples]))
    rms = [np.sqrt(np.mean(c ** 2, axis=0)) for c in channels]
    rng = np.random.default_rng(seed)
    print("fraction,r2,r2_joint1,r2_joint2,clean_torque_error")
    for frac in FRACTIONS:
        noisy = [c + frac * r * rng.standard_normal(c.shape) for c, r in zip(channels, rms)]
        res = fit(stack(model, [Sample.from_arrays(s.t, *(c[k] for c in noisy)) for k, s in enumerate(samples)]))
        clean = stack(model, samples)
        err = np.max(np.abs(clean.Y_C @ res.theta_hat - clean.U_C))
        j = res.per_joint_r_squared
        print(f"{frac},{res.r_squared:.6f},{j[0]:.6f},{j[1]:.6f},{err:.3e}")


if __name__ == "__main__":
    main()
