"""Tiny-MDP check: DQN with one-hot inputs against exact value iteration.

Usage: python3 scripts/run_tiny_mdp.py [--seeds 0 1 2] [--grad-steps 20000]

Prints the greedy-policy agreement and the largest Q-value error per seed on
the 4x4x2 grid with one blocked cell.
"""
import argparse
from dataclasses import replace

import numpy as np

from plantnav import qnet
from plantnav.evaluation import TinyDqnConfig, one_hot, policy_agreement, train_tiny_dqn, value_iteration
from plantnav.scenarios import tiny_mdp


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--grad-steps", type=int, default=20_000)
    ap.add_argument("--gamma", type=float, default=0.99)
    args = ap.parse_args()

    mdp = tiny_mdp()
    table = value_iteration(mdp, args.gamma)
    x = np.array([one_hot(mdp, s) for s in table.states])
    cfg = replace(TinyDqnConfig(), gamma=args.gamma, grad_steps=args.grad_steps)
    print(f"{len(table.states)} states, value iteration converged in {table.iterations} sweeps")
    for seed in args.seeds:
        net = train_tiny_dqn(mdp, seed, cfg)
        err = float(np.max(np.abs(qnet.forward(net, x) - table.q)))
        print(f"seed {seed}: agreement {policy_agreement(mdp, net, table):.3f}, max |Q - Q*| {err:.2f}")


if __name__ == "__main__":
    main()
