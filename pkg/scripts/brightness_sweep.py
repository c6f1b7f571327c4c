"""
Hold the Control Light button for 1..N ticks and record the brightness
sequence the simulator produces, next to a closed-form triangle wave.

    python scripts/brightness_sweep.py --max-hold 24
"""

import argparse
import csv
import sys
from dataclasses import dataclass
from pathlib import Path

from thingc.cli import CORPUS_DIR
from thingc.dsl import parse_file
from thingc.sim import Injection, Scenario, simulate


@dataclass
class SweepConfig:
    max_hold: int = 20
    horizon: int = 60
    start: int = 50
    rate: int = 10
    low: int = 10
    high: int = 100
    csv_path: str = ""


def triangle(cfg: SweepConfig, n: int) -> list[int]:
    out, b, up = [], cfg.start, True
    for _ in range(n):
        b = min(cfg.high, b + cfg.rate) if up else max(cfg.low, b - cfg.rate)
        up = b < cfg.high if up else b <= cfg.low
        out.append(b)
    return out


def run(cfg: SweepConfig) -> list[dict]:
    model = parse_file(CORPUS_DIR / "control_light.tm")
    rows = []
    for hold in range(1, cfg.max_hold + 1):
        scen = Scenario(f"hold{hold}", cfg.horizon,
                        tuple(Injection(t, "signal", "press_out") for t in range(hold)))
        trace = simulate(model, scen)
        levels = trace.assignments("brightness")
        rows.append({
            "hold": hold,
            "updates": len(levels),
            "final": trace.final_state["variables"]["brightness"],
            "light": trace.final_state["variables"]["light"],
            "matches": levels == triangle(cfg, len(levels)),
            "levels": " ".join(map(str, levels)),
        })
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    ap.add_argument("--max-hold", type=int, default=SweepConfig.max_hold)
    ap.add_argument("--horizon", type=int, default=SweepConfig.horizon)
    ap.add_argument("--csv", default="", help="also write rows to this CSV file")
    args = ap.parse_args(argv)
    cfg = SweepConfig(max_hold=args.max_hold, horizon=args.horizon, csv_path=args.csv)
    rows = run(cfg)
    print(f"{'hold':>4} {'updates':>7} {'final':>5} {'light':>5} {'wave':>5}  levels")
    for r in rows:
        print(f"{r['hold']:>4} {r['updates']:>7} {r['final']:>5} {r['light']:>5} "
              f"{'ok' if r['matches'] else 'DIFF':>5}  {r['levels']}")
    if cfg.csv_path:
        with open(cfg.csv_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
    return 0 if all(r["matches"] for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
