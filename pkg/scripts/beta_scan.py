"""Scan the switching-curve coefficient beta for the classic Fuller problem.

Writes the cost curve to CSV and the chatter fit of the best run to JSON.

    python3 scripts/beta_scan.py --out runs/beta_scan
"""

import argparse
import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from fuller.problems import fuller_classic
from fuller.simulate import FeedbackLaw, SimOptions, beta_scan, fit_chatter, simulate_feedback


@dataclass(frozen=True)
class ScanConfig:
    x0: tuple[float, float] = (1.0, 0.0)
    beta_min: float = 0.05
    beta_max: float = 1.5
    beta_step: float = 0.005
    horizon: float = 20.0
    zeno_floor: float = 1e-10
    out: str = "runs/beta_scan"


def main(cfg: ScanConfig) -> dict:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    betas = np.round(np.arange(cfg.beta_min, cfg.beta_max + 1e-9, cfg.beta_step), 6)
    opts = SimOptions(zeno_floor=cfg.zeno_floor)
    best, costs = beta_scan(cfg.x0, betas, cfg.horizon, opts)
    with open(out / "costs.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["beta", "cost"])
        for b, c in costs.items():
            w.writerow([repr(b), repr(c)])
    tr = simulate_feedback(fuller_classic(), FeedbackLaw.fuller(best), cfg.x0, cfg.horizon, opts)
    tr.write_events_csv(out / "events.csv")
    chatter = fit_chatter(tr)
    summary = {
        "config": asdict(cfg),
        "beta_best": best,
        "cost_best": costs[best],
        "beta_closed_form": float(np.sqrt((np.sqrt(33) - 1) / 24)),
        "switches": len(tr.events),
        "terminated_by": tr.terminated_by,
        "chatter": chatter.to_json(),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    c = chatter.inputs[0]
    print(f"beta*={best:.3f} cost={costs[best]:.10f} switches={len(tr.events)} rho={c.rho:.6f} r2={c.fit_r2:.8f}")
    return summary


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=ScanConfig.out)
    ap.add_argument("--step", type=float, default=ScanConfig.beta_step)
    ap.add_argument("--horizon", type=float, default=ScanConfig.horizon)
    args = ap.parse_args()
    main(ScanConfig(beta_step=args.step, horizon=args.horizon, out=args.out))
