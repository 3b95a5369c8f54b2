"""Smoke test for the Python bindings.

Builds the extension with cargo if it is not importable, then exercises the spec, the
porous-medium solve, one expansion with its reference solve, and the rate fit.

    python3 python/smoke_test.py
"""

import importlib
import os
import shutil
import subprocess
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def load_module():
    try:
        return importlib.import_module("prandtl_expander_py")
    except ImportError:
        pass
    subprocess.run(
        ["cargo", "build", "--release", "-p", "prandtl-expander-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    lib = os.path.join(ROOT, "target", "release", "libprandtl_expander_py.so")
    dest = tempfile.mkdtemp()
    shutil.copy(lib, os.path.join(dest, "prandtl_expander_py.so"))
    sys.path.insert(0, dest)
    return importlib.import_module("prandtl_expander_py")


def main():
    px = load_module()
    configs = os.path.join(ROOT, "configs")

    spec = px.ProblemSpec.from_file(os.path.join(configs, "default-benchmark.json")).with_grid(33, 65)
    ok, table = spec.validate()
    assert ok, table
    print(spec)

    bad = px.ProblemSpec.from_file(os.path.join(configs, "bad-gamma.json"))
    assert not bad.validate()[0]
    try:
        px.expand(bad, 0.02)
        raise AssertionError("bad spec was accepted")
    except px.SpecRejected as e:
        print("rejected as expected:", e)

    vm = px.porous_medium(spec)
    lo, hi = vm.bounds
    assert lo - 1e-8 <= vm.min_w and vm.max_w <= hi + 1e-8
    print(f"W in [{vm.min_w:.10f}, {vm.max_w:.10f}]")

    exp = px.expand(spec, 0.02, reference=True)
    norms = exp.residual_norms()
    assert norms["combined"] > 0.0
    assert max(exp.boundary_defects()) < 1e-10
    u, v, p = exp.reference()
    assert u.shape == exp.u_app.shape
    errs = exp.errors([2.0, float("inf")])
    print("residual", norms["combined"], "err_u_inf", errs["err_u_inf"], "err_u_lp", errs["err_u_lp"])

    trivial = px.ProblemSpec.from_file(os.path.join(configs, "trivial-chain.json")).with_grid(33, 65)
    assert px.expand(trivial, 0.04).corrector_max() == 0.0

    fit = px.fit_rate([0.04, 0.02, 0.01], [0.2, 0.1, 0.05])
    assert abs(fit["slope"] - 1.0) < 1e-12
    print("smoke test passed")


if __name__ == "__main__":
    main()
