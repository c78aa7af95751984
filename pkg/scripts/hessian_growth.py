"""Growth of r(p) = max_f ||D^2 G f||_p / ||f||_p with mesh resolution.

Writes ``hessian_growth_n{n}.csv`` (p, r, r_over_p) per resolution and a
JSON summary of the r/p spread.
"""

from __future__ import annotations

import argparse
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from sectorflow.experiments import P_GROWTH, _spread, hessian_growth, write_json, write_rows


@dataclass
class GrowthConfig:
    alpha: float = math.pi / 3
    ns: tuple[int, ...] = (32, 64, 128)
    ps: tuple[float, ...] = P_GROWTH
    count: int = 10
    seed: int = 3
    out: Path = field(default=Path("results/hessian_growth"))


def main(cfg: GrowthConfig) -> None:
    cfg.out.mkdir(parents=True, exist_ok=True)
    spreads = {}
    for n in cfg.ns:
        r, _ = hessian_growth(cfg.alpha, n, cfg.ps, cfg.count, cfg.seed)
        write_rows(cfg.out / f"hessian_growth_n{n}.csv", ["p", "r", "r_over_p"],
                   [(p, float(v), float(v) / p) for p, v in zip(cfg.ps, r)])
        spreads[n] = _spread(r, cfg.ps)
        print(f"n={n:4d} r={[round(float(v), 4) for v in r]} spread={spreads[n]:.3f}", flush=True)
    meta = {k: (str(v) if isinstance(v, Path) else v) for k, v in asdict(cfg).items()}
    write_json(cfg.out / "hessian_growth.json", {"config": meta, "spread": spreads})


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ns", default="32,64,128")
    ap.add_argument("--count", type=int, default=10)
    ap.add_argument("--out", type=Path, default=Path("results/hessian_growth"))
    a = ap.parse_args()
    main(GrowthConfig(ns=tuple(int(v) for v in a.ns.split(",")), count=a.count, out=a.out))
