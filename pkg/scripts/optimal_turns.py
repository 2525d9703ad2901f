"""Exact optimal-policy turn counts on the empty 10x10x5 world for several discount factors.

Usage: python3 scripts/optimal_turns.py [--gammas 0.99 0.95 0.9] [--pairs 50]

Solves the calm, position-only MDP for each target by value iteration (no
step or battery limit) and follows the greedy policy from axis-aligned
starts. The output shows how far the reward-optimal path departs from the
straight scripted path, which separates reward-induced detours from
training error when judging learned turn counts.
"""
import argparse
import itertools

import numpy as np

from plantnav.dynamics import Action, EnergyConfig, Termination, apply_action, initial_state
from plantnav.evaluation import scripted_turns
from plantnav.reward import total_reward
from plantnav.scenarios import axis_aligned_pairs, empty_scaled_world
from plantnav.trainer import count_turns


def solve(world, target, gamma):
    cells = list(itertools.product(*(range(d) for d in world.dims)))
    idx = {c: i for i, c in enumerate(cells)}
    energy = EnergyConfig(base_energy=np.inf)
    nxt = np.zeros((len(cells), 6), dtype=int)
    rew = np.zeros((len(cells), 6))
    done = np.zeros((len(cells), 6), dtype=bool)
    for i, c in enumerate(cells):
        if c == tuple(target):
            done[i] = True
            nxt[i] = i
            continue
        s = initial_state(c, target, energy)
        for a in Action:
            out = apply_action(world, s, a, None, energy, max_steps=2**62)
            nxt[i, a] = idx[tuple(out.next_state.pos)]
            rew[i, a] = total_reward(out, s).r_total
            done[i, a] = out.termination is not Termination.RUNNING
    q = np.zeros_like(rew)
    while True:
        new = rew + gamma * np.where(done, 0.0, q.max(axis=1)[nxt])
        if np.max(np.abs(new - q)) < 1e-9:
            return cells, idx, nxt, new
        q = new


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gammas", type=float, nargs="+", default=[0.99, 0.95, 0.9])
    ap.add_argument("--pairs", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    world = empty_scaled_world()
    pairs = axis_aligned_pairs(world, args.pairs, args.seed)
    for gamma in args.gammas:
        solved = {}
        excess = []
        for start, target in pairs:
            if target not in solved:
                solved[target] = solve(world, target, gamma)
            cells, idx, nxt, q = solved[target]
            c, actions = tuple(start), []
            while c != tuple(target) and len(actions) < 200:
                a = int(np.argmax(q[idx[c]]))
                actions.append(Action(a))
                c = cells[nxt[idx[c], a]]
            excess.append(count_turns(actions) - scripted_turns(start, target))
        within = sum(e <= 2 for e in excess) / len(excess)
        print(f"gamma {gamma}: within +2 turns {within:.2f}, mean excess {np.mean(excess):.2f}, max {max(excess)}")


if __name__ == "__main__":
    main()
