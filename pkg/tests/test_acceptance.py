"""Acceptance criteria at their stated tolerances.

Each test prints one ``PASS``/``FAIL`` line; the lines are repeated in the
terminal summary under "acceptance criteria".
"""

import subprocess
import sys
import time

import pytest

from sectorflow.experiments import CRITERIA

pytestmark = pytest.mark.acceptance

NAMES = {1: "dirichlet", 2: "image_vortex", 3: "linear_growth", 4: "orlicz", 5: "ap_exact", 6: "maximal",
         7: "strip", 8: "kernels"}
DETERMINISM_BUDGET = 15 * 60


@pytest.mark.parametrize("k", sorted(CRITERIA), ids=[f"c{k}_{NAMES[k]}" for k in sorted(CRITERIA)])
def test_criterion(k, report):
    result = CRITERIA[k](fast=False)
    report(result.line())
    assert result.passed, result.line()


def test_criterion_9_determinism(tmp_path, report):
    def verify(out):
        t0 = time.perf_counter()
        done = subprocess.run([sys.executable, "-m", "sectorflow.cli", "verify-all", "--fast", "--workers", "1",
                               "--out", str(out)], capture_output=True, text=True)
        return done, time.perf_counter() - t0

    first, t1 = verify(tmp_path / "a")
    second, t2 = verify(tmp_path / "b")
    files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
    differing = [str(f) for f in files_a if (tmp_path / "a" / f).read_bytes() != (tmp_path / "b" / f).read_bytes()]
    ok = (first.returncode == 0 and second.returncode == 0 and files_a == files_b and bool(files_a)
          and not differing and max(t1, t2) < DETERMINISM_BUDGET)
    line = (f"{'PASS' if ok else 'FAIL'} criterion 9 (determinism): exit={first.returncode},{second.returncode}, "
            f"files={len(files_a)}, differing={len(differing)}, max_runtime={max(t1, t2):.1f}s")
    report(line)
    assert ok, line + "\n" + first.stderr[-2000:] + "\n" + ", ".join(differing)
