"""Regenerate the frozen golden tables under tests/golden/.

Both tables are computed here from first principles and do not import the
package, so they stay independent of the code they check:

* rewards.csv: every end stage x moved flag on a base shaping reward of 2.0.
* corridor_q.json: optimal Q-table of a 3x1x1 corridor (target at x=2,
  gamma=0.9) found by enumerating all deterministic stationary policies and
  solving each policy's linear value equations.
"""
import csv
import itertools
import json
from pathlib import Path

import numpy as np

GOLDEN = Path(__file__).resolve().parents[1] / "tests" / "golden"

ADJUST = {"running": 0.0, "crash": -500.0, "reached_target": 500.0, "max_steps": -30.0, "battery_out": -30.0}
NO_MOVE = -5.0


def write_rewards():
    r_climb, r_target = 0.5, 1.5  # shaping sum 2.0
    with open(GOLDEN / "rewards.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r_climb", "r_target", "moved", "termination", "no_move", "terminal_adjust", "r_total"])
        for term, moved in itertools.product(ADJUST, (True, False)):
            no_move = 0.0 if moved else NO_MOVE
            total = r_climb + r_target + no_move + ADJUST[term]
            w.writerow([r_climb, r_target, int(moved), term, no_move, ADJUST[term], total])


def corridor_model():
    """States x=0,1 (x=2 is the absorbing target). Actions +X,-X,+Y,-Y,+Z,-Z."""
    wt, target = 10.0, 2
    nxt = np.zeros((2, 6), dtype=int)
    rew = np.zeros((2, 6))
    term = np.zeros((2, 6), dtype=bool)
    for x in range(2):
        for a in range(6):
            if a == 0:
                x2 = x + 1
            elif a == 1:
                x2 = max(x - 1, 0)
            else:
                x2 = x  # clamped by the 1-cell-thick corridor
            r = wt * (abs(target - x) - abs(target - x2))
            if x2 == x:
                r += NO_MOVE
            if x2 == target:
                r += ADJUST["reached_target"]
                term[x, a] = True
            nxt[x, a], rew[x, a] = min(x2, 1), r
    return nxt, rew, term


def write_corridor(gamma=0.9):
    nxt, rew, term = corridor_model()
    best = np.full(2, -np.inf)
    for pi in itertools.product(range(6), repeat=2):
        p = np.zeros((2, 2))
        r = np.zeros(2)
        for s, a in enumerate(pi):
            r[s] = rew[s, a]
            if not term[s, a]:
                p[s, nxt[s, a]] = 1.0
        v = np.linalg.solve(np.eye(2) - gamma * p, r)
        best = np.maximum(best, v)
    q = np.where(term, rew, rew + gamma * best[nxt])
    doc = {
        "dims": [3, 1, 1],
        "target": [2, 0, 0],
        "gamma": gamma,
        "states": [[0, 0, 0], [1, 0, 0]],
        "q": q.tolist(),
    }
    (GOLDEN / "corridor_q.json").write_text(json.dumps(doc, indent=2) + "\n")


if __name__ == "__main__":
    GOLDEN.mkdir(parents=True, exist_ok=True)
    write_rewards()
    write_corridor()
