#!/usr/bin/env python3
"""Calibration helper for the synthetic generator's frozen constants.

Generates the default corpus, reports realized positive-label rates against
the configured targets, and prints suggested values for the empirical
correction constants in vdep/synthgen.py (the closed-form rate algebra
cannot see cross-possession window spillover, so those constants absorb it).
Rerun after touching the generator's possession or goal mechanics.
"""

from __future__ import annotations

import argparse

from vdep.synthgen import (
    GenConfig,
    _CONCEDES_POS_PER_FAST_GOAL,
    _RECOVERY_RATE_FUDGE,
    _ATTACKED_RATE_FUDGE,
    _SCORES_POS_PER_GOAL,
    generate,
    truth_label_rates,
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    args = parser.parse_args()

    cfg = GenConfig() if args.seed is None else GenConfig(seed=args.seed)
    gen = generate(cfg)
    rates = truth_label_rates(gen)

    targets = {
        "recovery": cfg.recovery_pos,
        "attacked": cfg.attacked_pos,
        "scores": cfg.scores_pos,
        "concedes": cfg.concedes_pos,
    }
    print(f"{'label':10s} {'rate':>9s} {'target':>9s} {'ratio':>7s}")
    ratios = {}
    for name, target in targets.items():
        ratios[name] = rates[name] / target
        print(f"{name:10s} {rates[name]:9.5f} {target:9.4f} {ratios[name]:7.3f}")

    slow = fast = 0
    for m in gen.corpus.matches:
        ev = m.events
        for i, e in enumerate(ev):
            if e.is_goal_scored:
                length, j = 0, i
                while j >= 0 and ev[j].team_id == e.team_id:
                    length += 1
                    j -= 1
                if length <= 3:
                    fast += 1
                else:
                    slow += 1
    print(f"\ngoals: {slow} slow / {fast} fast over {len(gen.corpus.matches)} matches")
    print("\nsuggested constant updates (current -> suggested):")
    print(f"  _RECOVERY_RATE_FUDGE        {_RECOVERY_RATE_FUDGE:.3f} -> "
          f"{_RECOVERY_RATE_FUDGE / ratios['recovery']:.3f}")
    print(f"  _ATTACKED_RATE_FUDGE        {_ATTACKED_RATE_FUDGE:.3f} -> "
          f"{_ATTACKED_RATE_FUDGE / ratios['attacked']:.3f}")
    print(f"  _SCORES_POS_PER_GOAL        {_SCORES_POS_PER_GOAL:.2f} -> "
          f"{_SCORES_POS_PER_GOAL * ratios['scores']:.2f}")
    print(f"  _CONCEDES_POS_PER_FAST_GOAL {_CONCEDES_POS_PER_FAST_GOAL:.2f} -> "
          f"{_CONCEDES_POS_PER_FAST_GOAL * ratios['concedes']:.2f}")
    print("(goal constants interact; fix scores first, then concedes)")


if __name__ == "__main__":
    main()
