"""Builds the mkg_lab extension and exercises its entry points.

    python3 python/smoke_test.py

Uses an installed mkg_lab if one is importable, otherwise builds the cdylib
with cargo (feature extension-module) and loads it from a temporary dir.
"""

import importlib
import math
import os
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        return importlib.import_module("mkg_lab")
    except ImportError:
        pass
    subprocess.run(
        ["cargo", "build", "--release", "-p", "mkg-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    target = pathlib.Path(os.environ.get("CARGO_TARGET_DIR", ROOT / "target")) / "release"
    lib = next(p for p in (target / n for n in ("libmkg_lab.so", "libmkg_lab.dylib", "mkg_lab.dll")) if p.exists())
    tmp = tempfile.mkdtemp()
    shutil.copy(lib, pathlib.Path(tmp) / ("mkg_lab.pyd" if lib.suffix == ".dll" else "mkg_lab.so"))
    sys.path.insert(0, tmp)
    return importlib.import_module("mkg_lab")


def main():
    m = load()

    h = m.config_hash("[grid]\nr_max = 400\n")
    assert len(h) == 64 and h == m.config_hash("# same\n[grid]\nr_max=400.0\n")
    try:
        m.config_json("[weights]\ns = 1.2\n")
    except ValueError as e:
        assert "s < 1" in str(e)
    else:
        raise AssertionError("s = 1.2 accepted")

    # closed form 2π ln 3 at a = 2, |x| = 1
    v = m.angular_kernel_integral(2.0, 1.0)
    assert abs(v - 2 * math.pi * math.log(3)) < 1e-12, v

    # j = 3/4 (1 - q²) on [-1, 1] has unit mass: K₀(y) = -ln 3 at |y| = 1/2
    dq = 0.01
    j = [0.75 * (1 - (-1 + k * dq) ** 2) for k in range(201)]
    k = m.k_mu([0.5, 0.0, 0.0], -1.0, dq, j)
    assert abs(k[0] + math.log(3)) < 1e-10, k

    for name in m.oracle_cases():
        case, measured, tol, ok = m.oracle_case(name)
        print(f"{'PASS' if ok else 'FAIL'} oracle {case} measured {measured:.3e} tolerance {tol:.1e}")
        assert ok

    print("smoke test passed")


if __name__ == "__main__":
    main()
