"""Timing comparison of the compiled and pure-python kernel backends.

Usage: python3 benchmarks/benchmark_backends.py [--iters N] [--seed S]

The backend is chosen at import time from the CRMSBM_NUMBA environment
variable, so each backend is measured in its own subprocess. Both runs use
identical seeds; the driver checks that the resulting traces agree before
printing the table. Compilation time is excluded by a warm-up pass.
"""

import argparse
import json
import os
import subprocess
import sys
import time


def _workload(iters, seed):
    import numpy as np

    from crmsbm import _accel
    from crmsbm.data import from_network
    from crmsbm.generate import sample_network
    from crmsbm.ggp import GgpParams
    from crmsbm.inference import (McmcConfig, init_state, log_joint,
                                  mh_sweep, run_mcmc)

    rng = np.random.default_rng(seed)
    eta = np.full((3, 3), 0.2)
    np.fill_diagonal(eta, 4.0)
    net = sample_network(3, GgpParams(14.0, 0.5, 1.0), rng=rng,
                         beta=np.array([1 / 3, 1 / 3, 1 / 3]), eta=eta)
    A = from_network(net, binary=False)
    cfg = McmcConfig(K=3, iters=iters, mh_steps=50)

    # warm-up compiles the kernels on the accelerated backend
    run_mcmc(A, McmcConfig(K=3, iters=2), np.random.default_rng(seed))

    z, m = init_state(A, cfg, np.random.default_rng(seed))
    t0 = time.perf_counter()
    for _ in range(200):
        lp = log_joint(A.counts, z, m)
    t_joint = (time.perf_counter() - t0) / 200.0

    t0 = time.perf_counter()
    m2, b2, acc = mh_sweep(A.counts, z, m, 200, 0.1,
                           np.random.default_rng(seed))
    t_mh = (time.perf_counter() - t0) / 200.0

    t0 = time.perf_counter()
    res = run_mcmc(A, cfg, np.random.default_rng(seed))
    t_chain = time.perf_counter() - t0

    return {
        "backend": "numba" if _accel.USE_NUMBA else "python",
        "n_vertices": int(A.n_vertices),
        "log_joint_ms": t_joint * 1e3,
        "mh_step_ms": t_mh * 1e3,
        "chain_s": t_chain,
        "iters": iters,
        "final_logp": float(res.trace[-1, 1]),
        "trace_sum": float(res.trace[:, 1].sum()),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--iters", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()

    if args.worker:
        print(json.dumps(_workload(args.iters, args.seed)))
        return 0

    results = {}
    for flag in ("1", "0"):
        env = dict(os.environ, CRMSBM_NUMBA=flag)
        out = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--worker",
             "--iters", str(args.iters), "--seed", str(args.seed)],
            capture_output=True, text=True, env=env, check=True)
        results[flag] = json.loads(out.stdout.strip().splitlines()[-1])

    fast, slow = results["1"], results["0"]
    if abs(fast["trace_sum"] - slow["trace_sum"]) > 1e-6 * max(
            1.0, abs(fast["trace_sum"])):
        print("BACKEND MISMATCH: traces disagree", file=sys.stderr)
        print(json.dumps(results, indent=2), file=sys.stderr)
        return 1

    n = fast["n_vertices"]
    print("backends agree: %d-iteration traces identical to 1e-6 "
          "(final logp %.6f)" % (args.iters, fast["final_logp"]))
    print()
    print("%-28s %12s %12s %9s" % ("kernel (n=%d, K=3)" % n,
                                   "numba", "python", "speedup"))
    rows = [("log joint", "log_joint_ms", "ms"),
            ("MH step", "mh_step_ms", "ms"),
            ("%d-iteration chain" % args.iters, "chain_s", "s")]
    for name, key, unit in rows:
        f, s = fast[key], slow[key]
        print("%-28s %9.3f %s %9.3f %s %8.1fx"
              % (name, f, unit, s, unit, s / f if f > 0 else float("inf")))
    return 0


if __name__ == "__main__":
    sys.exit(main())
