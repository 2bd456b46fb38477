#!/usr/bin/env python3
"""Smoke test for the marl_dyn_py extension module.

Builds nothing itself: expects the cdylib at
target/release/libmarl_dyn_py.so (or target/debug/...); copies it into a
temp directory under the importable name and exercises the main surface.

    cargo build -p marl-dyn-py --release
    python3 python/smoke_test.py
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def locate_cdylib():
    candidates = [
        REPO / "target" / "release" / "libmarl_dyn_py.so",
        REPO / "target" / "debug" / "libmarl_dyn_py.so",
        REPO / "target" / "release" / "libmarl_dyn_py.dylib",
        REPO / "target" / "debug" / "libmarl_dyn_py.dylib",
    ]
    for c in candidates:
        if c.exists():
            return c
    sys.exit("cdylib not found; run `cargo build -p marl-dyn-py --release` first")


def check(name, condition, detail=""):
    status = "PASS" if condition else "FAIL"
    print(f"{status}  {name}{'  (' + detail + ')' if detail else ''}")
    if not condition:
        sys.exit(1)


def main():
    lib = locate_cdylib()
    tmp = tempfile.mkdtemp(prefix="marl_dyn_py_")
    suffix = ".so" if lib.suffix == ".so" else ".so"  # CPython loads .so on mac too
    shutil.copy(lib, Path(tmp) / f"marl_dyn_py{suffix}")
    sys.path.insert(0, tmp)
    import marl_dyn_py as m

    # Game tables and one-shot steps.
    pd = m.make_matrix_game("prisoners_dilemma")
    check("pd payoffs", pd.payoffs[0][0][0] == 1.0 and pd.payoffs[0][1][1] == 3.0)
    rewards, terminal = pd.step(1, 1)
    check("pd step", rewards == (3.0, 3.0) and terminal)
    mp = m.make_matrix_game("matching_pennies")
    check("mp zero sum", mp.zero_sum and mp.step(0, 0)[0] == (1.0, -1.0))

    # Softmax probabilities.
    p = m.boltzmann_probs([1.0, 0.0], 1.0)
    check(
        "boltzmann",
        abs(sum(p) - 1.0) < 1e-12 and abs(p[0] - math.e / (math.e + 1.0)) < 1e-12,
        f"p0={p[0]:.5f}",
    )

    # Replicator field: vertices are fixed points, PD flows to (1,1).
    check("replicator vertex", m.replicator_rhs("stag_hunt", 0.0, 0.0) == (0.0, 0.0))
    traj = m.integrate_rk4("prisoners_dilemma", 0.5, 0.5, 0.01, 5000)
    check(
        "replicator convergence",
        abs(traj[-1][0] - 1.0) < 1e-3 and abs(traj[-1][1] - 1.0) < 1e-3,
        f"end={traj[-1]}",
    )
    field = m.vector_field("matching_pennies", 11)
    center = [v for v in field if v[0] == 0.5 and v[1] == 0.5][0]
    check("vector field center", center[2] == 0.0 and center[3] == 0.0)

    # Lyapunov exponent of the chaotic logistic map (~ln 2).
    xs, x = [], 0.2024
    for _ in range(6000):
        xs.append([x])
        x = 4.0 * x * (1.0 - x)
    fit = m.max_lyapunov(xs, theiler_w=10, z_min=1, z_max=8)
    check(
        "logistic lyapunov",
        abs(fit["lambda_max"] - math.log(2.0)) < 0.12,
        f"lambda={fit['lambda_max']:.4f}",
    )

    # Correlation dimension of a circle orbit (~1).
    golden = 0.6180339887498949
    circle = [
        [math.cos(2 * math.pi * ((i * golden) % 1.0)), math.sin(2 * math.pi * ((i * golden) % 1.0))]
        for i in range(2000)
    ]
    d2 = m.correlation_dimension(circle, n_radii=24, theiler_w=10)
    check("circle d2", 0.85 < d2["d2"] < 1.15, f"d2={d2['d2']:.3f}")

    # Delay embedding shape.
    emb = m.delay_embed(list(range(10)), 3, 2)
    check("delay embed", len(emb) == 6 and emb[0] == [0.0, 2.0, 4.0])

    # Recurrence rate tracking.
    rec = m.recurrence_matrix(circle[:500], target_rate=0.08, theiler_mask_width=5)
    check(
        "recurrence rate",
        abs(rec["achieved_rate"] - 0.08) < 0.01,
        f"rate={rec['achieved_rate']:.4f}",
    )

    # Covariance norm of a hand-checkable sample.
    sigma, norm = m.covariance_frobenius([[0.0, 0.0], [2.0, 0.0]])
    check("covariance", sigma[0][0] == 2.0 and norm == 2.0)

    # Histogram density integrates to one.
    dens = m.stationary_distribution(circle, [10, 10])
    check("density mass", abs(dens["total_mass"] - 1.0) < 1e-9)

    # Simulation pipeline from a JSON config (same schema as the CLI).
    config = {
        "game": {"name": "prisoners_dilemma"},
        "agents": [
            {
                "kind": "tabular_q",
                "alpha": 0.001,
                "gamma": 0.9,
                "exploration": {"mode": "boltzmann", "temperature": 0.25},
            },
            {
                "kind": "tabular_q",
                "alpha": 0.001,
                "gamma": 0.9,
                "exploration": {"mode": "boltzmann", "temperature": 0.25},
            },
        ],
        "n_steps": 4000,
        "n_burn": 1000,
        "n_runs": 2,
        "seed": 7,
        "record_stride": 4,
        "projection_mode": "action_prob",
    }
    text = json.dumps(config)
    canonical, config_hash = m.describe_config(text)
    check("describe config", len(config_hash) == 16 and '"n_steps": 4000' in canonical)

    t1 = m.run_training(text, 0)
    t2 = m.run_training(text, 0)
    check(
        "deterministic traces",
        t1["joint"] == t2["joint"] and len(t1["joint"]) == 1000,
        f"rows={len(t1['joint'])}",
    )
    check(
        "probability projection",
        all(0.0 <= v <= 1.0 for row in t1["joint"] for v in row),
    )

    report = m.diagnose(text)
    check(
        "diagnose report",
        report["n_runs_analyzed"] == 2
        and math.isfinite(report["frobenius_pooled"])
        and math.isfinite(report["d2_mean"])
        and abs(report["recurrence_achieved_rate"] - 0.08) < 0.01,
        f"frob={report['frobenius_pooled']:.4f} d2={report['d2_mean']:.3f}",
    )

    # Config errors surface as ValueError.
    try:
        m.describe_config('{"game": {"name": "unknown_game"}, "agents": []}')
        check("config error", False)
    except ValueError:
        check("config error", True)

    print("all smoke checks passed")


if __name__ == "__main__":
    main()
