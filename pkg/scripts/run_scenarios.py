"""Run every shipped scenario through the CLI and print a one-line summary each.

    python3 scripts/run_scenarios.py [out_root]
"""
import json
import sys
from importlib.resources import files
from pathlib import Path

from svaid.cli import main

SCENARIOS = {
    "double_pendulum_offline": "double_pendulum.model",
    "leg_offline_growing": "leg4.model",
    "arm_online_gated": "arm4.model",
}


def run(out_root: Path) -> int:
    data = files("svaid") / "data"
    worst = 0
    for scenario, model in SCENARIOS.items():
        out = out_root / scenario
        code = main(["simulate", str(data / model), str(data / f"{scenario}.json"), str(out)])
        worst = max(worst, code)
        if code == 0:
            m = json.loads((out / "metrics.json").read_text())
            keys = ("final_r2", "model_valid_time", "switch_time", "r2_at_switch")
            print(scenario, {k: m[k] for k in keys if m.get(k) is not None})
    return worst


if __name__ == "__main__":
    sys.exit(run(Path(sys.argv[1] if len(sys.argv) > 1 else "results")))
