#!/usr/bin/env python3
"""Optimal control of a qubit state transfer through a dephasing bath.

Drives |+> to |-> with piecewise-constant controls h_x(t) sigma_x +
h_z(t) sigma_z under a super-Ohmic bosonic environment. The process
duration is t_N = 5 (dt = 0.05, 100 steps) with bounds |h_x| <= 5 pi
and |h_z| <= pi. Writes the optimized protocol and the optimizer
history to JSON.
"""

import argparse
import json

import numpy as np

from ptmpo import (Bath, LinearObjective, ParameterizedSystem, PowerLawSD,
                   TempoParameters, optimize_controls, pt_tempo_compute)

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)
PLUS = 0.5 * np.array([[1.0, 1.0], [1.0, 1.0]], dtype=complex)
MINUS = 0.5 * np.array([[1.0, -1.0], [-1.0, 1.0]], dtype=complex)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-steps", type=int, default=100)
    parser.add_argument("--dt", type=float, default=0.05)
    parser.add_argument("--budget", type=int, default=120)
    parser.add_argument("--epsrel", type=float, default=1e-7)
    parser.add_argument("--out", default="optimal_controls.json")
    args = parser.parse_args()

    bath = Bath(0.5 * SIGMA_Z, PowerLawSD(0.126, 3.0, 3.04), 0.0)
    pt = pt_tempo_compute(
        bath, TempoParameters(dt=args.dt, epsrel=args.epsrel, tcut=2.0),
        args.n_steps)

    ps = ParameterizedSystem(
        lambda hx, hz: hx * SIGMA_X + hz * SIGMA_Z, 2,
        bounds=[(-5.0 * np.pi, 5.0 * np.pi), (-np.pi, np.pi)],
        derivatives=[lambda hx, hz: SIGMA_X, lambda hx, hz: SIGMA_Z])
    objective = LinearObjective(MINUS.T)
    init = 0.01 * np.ones((2 * args.n_steps, 2))
    best, history = optimize_controls(ps, pt, PLUS, objective, init,
                                      bounds=ps.bounds, budget=args.budget)

    with open(args.out, "w") as fh:
        json.dump({"t_final": args.n_steps * args.dt,
                   "fidelity": history[-1]["objective"],
                   "controls": best.tolist(),
                   "history": [h["objective"] for h in history]},
                  fh, indent=1)
    print("final fidelity", history[-1]["objective"])
    print("wrote", args.out)


if __name__ == "__main__":
    main()
