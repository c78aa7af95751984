"""Weighted operator-norm estimates of the gradient kernel for both test-function families.

Shows that est(p) stays O(log n) on a fixed grid: the table is flat in p
for bumps and grows slowly with n for quadrant data.
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path

from sectorflow import kernels as Kn
from sectorflow import weights as W
from sectorflow.experiments import P_GROWTH, _spread


@dataclass
class OpnormConfig:
    delta: float = 0.5
    ns: tuple[int, ...] = (64, 128, 256)
    ps: tuple[float, ...] = P_GROWTH
    trials: int = 8
    seed: int = 7
    workers: int = 1
    out: Path = Path("results/opnorm")


def main(cfg: OpnormConfig) -> None:
    cfg.out.mkdir(parents=True, exist_ok=True)
    for family in ("bumps", "quadrants"):
        for n in cfg.ns:
            est = [W.weighted_operator_norm_estimate(Kn.free_space_kernel_gradient, p, cfg.delta, cfg.trials,
                                                     cfg.seed, n=n, workers=cfg.workers, family=family)
                   for p in cfg.ps]
            W.write_norm_table(est, cfg.out / f"opnorm_{family}_n{n}.csv", {"family": family})
            vals = [e.estimate for e in est]
            print(f"{family:9s} n={n:4d} est={[round(v, 4) for v in vals]} spread={_spread(vals, cfg.ps):.2f}",
                  flush=True)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ns", default="64,128,256")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results/opnorm"))
    a = ap.parse_args()
    main(OpnormConfig(ns=tuple(int(v) for v in a.ns.split(",")), workers=a.workers, out=a.out))
