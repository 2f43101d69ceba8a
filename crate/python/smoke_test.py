#!/usr/bin/env python3
"""Smoke test for the `bobench` extension module.

Builds the cdylib if needed, stages it under the name Python imports, and
exercises one representative call from each binding group. Run from
anywhere:

    python3 python/smoke_test.py
"""

import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def ensure_module():
    try:
        import bobench  # noqa: F401  (already installed or staged)
        return
    except ImportError:
        pass
    lib = next(
        (
            ROOT / "target" / profile / "libbobench.so"
            for profile in ("release", "debug")
            if (ROOT / "target" / profile / "libbobench.so").exists()
        ),
        None,
    )
    if lib is None:
        subprocess.run(
            ["cargo", "build", "-p", "bobench-py"], cwd=ROOT, check=True
        )
        lib = ROOT / "target" / "debug" / "libbobench.so"
    stage = Path(tempfile.mkdtemp(prefix="bobench-py-"))
    shutil.copy2(lib, stage / "bobench.so")
    sys.path.insert(0, str(stage))


def main():
    ensure_module()
    import bobench

    print(f"bobench {bobench.__version__}")

    land = bobench.synthetic_landscape(
        "demo", "nk", length=3, alphabet_size=3, seed=7, k=1
    )
    assert land.n == 27 and len(land) == 27
    assert land.length == 3 and land.alphabet_size == 3
    seqs = land.sequences()
    assert seqs[0] == "AAA" and len(set(seqs)) == 27
    norm = land.normalized_fitness()
    assert min(norm) == 0.0 and max(norm) == 1.0
    assert len(land.digest) == 64
    print(f"landscape: {land!r}")

    prof = bobench.profile(land)
    assert prof["n"] == 27
    assert 0.0 < prof["active_pct"] < 100.0
    assert prof["local_optima"] >= 1
    assert abs(
        prof["magnitude_epistasis_pct"] + prof["non_magnitude_epistasis_pct"] - 100.0
    ) < 1e-9
    print(
        f"profile: active={prof['active_pct']:.1f}% "
        f"optima={prof['local_optima']} ruggedness={prof['ruggedness']:.4f}"
    )

    tau, p = bobench.kendall_tau([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 5.0])
    assert abs(tau - 1.0) < 1e-12 and 0.0 <= p <= 1.0

    values = [float(i) for i in range(1, 101)]
    assert abs(bobench.var(values, 0.05) - 5.0) < 1e-12
    assert abs(bobench.cvar(values, 0.05) - 3.0) < 1e-12
    assert abs(bobench.cvar(values, 0.05, upper=True) - 98.0) < 1e-12
    assert bobench.delta_g_auc([1.0, 1.0, 1.0]) == 2.0

    front = bobench.pareto_front([("a", 1.0, 1.0), ("b", 0.5, 0.5), ("c", 1.0, 0.2)])
    assert front == ["a"], front

    result = bobench.run_campaign(
        land, surrogate="gp", acquisition="ei",
        n_init=6, batch_size=2, n_cycles=2, seed=0,
    )
    curve = result["payoff_curve"]
    assert result["model_id"] == "gp+ei+one_hot"
    assert len(curve) == 3 and curve == sorted(curve)
    assert len(result["gain_curve"]) == 2
    assert [len(batch) for batch in result["acquired"]] == [6, 2, 2]
    assert result["acquired"][0] == bobench.run_campaign(
        land, surrogate="random_forest", acquisition="greedy",
        n_init=6, batch_size=2, n_cycles=2, seed=0,
    )["acquired"][0], "paired runs must share the seed pool"
    print(f"campaign: payoff {curve[0]:.3f} -> {curve[-1]:.3f}")

    print("smoke test passed")


if __name__ == "__main__":
    main()
