"""Run the acceptance experiments and print one PASS/FAIL line each.

    python scripts/run_acceptance.py --out results/acceptance
    python scripts/run_acceptance.py --fast --only 1,4
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path

from sectorflow.experiments import run_all, write_json


@dataclass
class AcceptanceConfig:
    out: Path = Path("results/acceptance")
    fast: bool = False
    workers: int = 1
    only: tuple[int, ...] | None = None


def main(cfg: AcceptanceConfig) -> int:
    results = run_all(fast=cfg.fast, out=cfg.out, workers=cfg.workers, only=cfg.only)
    for r in results:
        print(r.line(), flush=True)
    write_json(cfg.out / "summary.json", {"fast": cfg.fast, "results": [
        {"criterion": r.criterion, "name": r.name, "passed": r.passed, "metrics": r.metrics} for r in results]})
    return 0 if all(r.passed for r in results) else 1


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=AcceptanceConfig.out)
    ap.add_argument("--fast", action="store_true")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--only", type=lambda s: tuple(int(v) for v in s.split(",")))
    a = ap.parse_args()
    raise SystemExit(main(AcceptanceConfig(a.out, a.fast, a.workers, a.only)))
