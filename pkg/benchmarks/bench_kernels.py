"""Compare the compiled kernels with the numpy fallback.

Each implementation runs in its own interpreter (the choice is made at
import time), timing the raw kernels and a few end-to-end solves.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys
import textwrap

WORKER = textwrap.dedent(
    """
    import json, sys, time
    import numpy as np
    from drp import catalog, kernels
    from drp.formulation import build_model
    from drp.graphgen import build_generated_graph
    from drp.instance import generate_instance
    from drp.solver import branch_and_bound

    repeat = int(sys.argv[1])

    def best(fn):
        out = []
        for _ in range(repeat):
            t0 = time.perf_counter(); fn(); out.append(time.perf_counter() - t0)
        return min(out)

    rng = np.random.default_rng(0)
    T0 = rng.normal(size=(150, 600)) * (rng.random((150, 600)) < 0.05)
    T0[:, 7] += 1.0

    def pivots():
        T = T0.copy()
        for r in range(150):
            kernels.pivot(T, r, 7 if r == 0 else int(np.argmax(np.abs(T[r, 8:]))) + 8)

    d = rng.normal(size=5000)
    status = rng.integers(0, 3, size=5000).astype(np.int8)
    span = np.full(5000, np.inf)

    def pricing():
        for _ in range(200):
            kernels.price_dantzig(d, status, 1e-9)
            kernels.dual_ratio(d, np.abs(d), status, span, 1, 1.0, 1e-9)

    k = 5
    pts = rng.random((k + 2, 2)) * 10
    pts[-1] = pts[0]
    dist = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    tt = np.broadcast_to(dist, (1 << k, k + 2, k + 2)).copy()
    ee = tt * (1.0 + np.arange(1 << k)[:, None, None] * 0.1)
    a = np.zeros(k + 2)
    b = np.full(k + 2, 1e3)

    def orders():
        for _ in range(20):
            kernels.order_search(tt, ee, a, b, k, 0.0, 1e9)

    models = []
    for n, seed in ((5, 0), (6, 1), (6, 2)):
        inst = generate_instance(catalog.oracle_config(n, "convex", "RE"), seed)
        models.append(build_model(build_generated_graph(inst), inst))

    def solves():
        for m in models:
            branch_and_bound(m)

    print(json.dumps({
        "implementation": kernels.IMPLEMENTATION,
        "pivot x150 (150x600)": best(pivots),
        "pricing + dual ratio x200 (5000 cols)": best(pricing),
        "order search x20 (5 stops)": best(orders),
        "branch-and-bound, 3 suite models": best(solves),
    }))
    """
)


def run(pure: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("DRP_PURE_PYTHON", None)
    if pure:
        env["DRP_PURE_PYTHON"] = "1"
    out = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast, slow = run(False, args.repeat), run(True, args.repeat)
    if fast["implementation"] != "cython":
        print("compiled kernels are not built; both columns use the fallback")
    print(f"{'benchmark':42s} {'cython s':>10s} {'python s':>10s} {'speedup':>8s}")
    for key in fast:
        if key == "implementation":
            continue
        print(f"{key:42s} {fast[key]:10.4f} {slow[key]:10.4f} {slow[key] / fast[key]:8.1f}x")


if __name__ == "__main__":
    main()
