"""Compare both bounds, the exact decay rate and Monte Carlo on small instances.

    python scripts/validate_small.py [--paths N] [--horizon T]
"""

from __future__ import annotations

import argparse

import numpy as np

from sisbounds import (
    DiGraph,
    SimConfig,
    SisParams,
    build_second_order,
    estimate_decay,
    exact_decay_rate,
    exact_marginals,
    propagate_bound,
    rho1,
    rho2,
    run_ensemble,
)


def instances():
    k4 = DiGraph.from_edges(4, [(i, j) for i in range(4) for j in range(4) if i != j])
    star = DiGraph.from_edges(5, [(0, i) for i in range(1, 5)]).bidirected()
    ring6 = [(i, (i + 1) % 6) for i in range(6)] + [(0, 3), (3, 1), (2, 5), (4, 0), (5, 2)]
    yield "2-cycle", DiGraph.from_edges(2, [(0, 1), (1, 0)]), SisParams.homogeneous(2, 1.0)
    yield ("3-cycle", DiGraph.from_edges(3, [(0, 1), (1, 2), (2, 0)]),
           SisParams(np.array([1.0, 1.5, 0.8]), np.array([1.0, 1.2, 0.9])))
    yield "K4", k4, SisParams.from_beta_frac(k4, 0.9)
    yield "star5", star, SisParams.from_beta_frac(star, 0.9)
    yield ("digraph6", DiGraph.from_edges(6, ring6),
           SisParams(np.array([0.6, 0.8, 0.5, 0.7, 0.9, 0.6]), np.array([1.0, 0.8, 1.2, 1.0, 0.9, 1.1])))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--horizon", type=float, default=20.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"{'instance':10s} {'rho1':>9s} {'rho2':>9s} {'exact':>9s} {'rho_hat':>9s} {'agree':>7s} {'max excess':>11s}")
    for k, (name, g, params) in enumerate(instances()):
        traj = run_ensemble(g, params, SimConfig(paths=args.paths, horizon=args.horizon, seed=args.seed + k))
        exact = exact_marginals(g, params, 2**g.n - 1, traj.t)
        bound = propagate_bound(build_second_order(g, params), np.ones(g.n), grid=traj.t)
        se = np.sqrt(exact * (1 - exact) / traj.paths)
        agree = np.mean(np.abs(traj.p_hat - exact) <= 3 * se + 1e-12)
        # positive means the estimate sits above the bound by more than 3 standard errors
        excess = np.max(traj.p_hat - bound - 3 * traj.stderr_p())
        print(f"{name:10s} {rho1(g, params):9.5f} {rho2(g, params):9.5f} {exact_decay_rate(g, params):9.5f} "
              f"{estimate_decay(traj).rho_hat:9.5f} {agree:7.2%} {excess:11.2e}")


if __name__ == "__main__":
    main()
