"""Binary look-ahead targets over a match's ordered event stream.

Each event i is labeled by scanning the window i+1 .. i+k, truncated at the
end of the match and at period boundaries (defense before halftime gets no
credit for what happens after it). The reference teams are fixed at event
i: the acting team is attacking, the other defending.

* recovery: the defending team wins the ball inside the window, marked by a
  recovery-boundary flag on the first event of its new possession.
* attacked: the attacking team produces an effective attack inside the window.
* scores / concedes (wider window, default k=10): a goal inside the window
  by the attacking team / by the defending team respectively. The two are
  deliberately asymmetric -- conceding while on the ball needs the opponent
  to win it and score inside the same window, which is far rarer.
"""

from __future__ import annotations

from .domain import Event, LabelSet

K_VDEP_DEFAULT = 5
K_VAEP_DEFAULT = 10


def _window(events: list[Event] | tuple[Event, ...], i: int, k: int):
    period = events[i].period
    stop = min(i + k, len(events) - 1)
    for j in range(i + 1, stop + 1):
        if events[j].period != period:
            break
        yield events[j]


def label_recovery(events: list[Event] | tuple[Event, ...], i: int, k: int) -> int:
    """1 iff the team defending at event i recovers the ball within k events."""
    if k < 1:
        raise ValueError("window size k must be >= 1")
    attacker = events[i].team_id
    for e in _window(events, i, k):
        if e.is_ball_recovery_boundary and e.team_id != attacker:
            return 1
    return 0


def label_attacked(events: list[Event] | tuple[Event, ...], i: int, k: int) -> int:
    """1 iff the team attacking at event i lands an effective attack within k events."""
    if k < 1:
        raise ValueError("window size k must be >= 1")
    attacker = events[i].team_id
    for e in _window(events, i, k):
        if e.is_effective_attack and e.team_id == attacker:
            return 1
    return 0


def label_goals(
    events: list[Event] | tuple[Event, ...], i: int, k: int = K_VAEP_DEFAULT
) -> tuple[int, int]:
    """(scores, concedes) for event i: goal within k events by the attacking
    team, and by the defending team, respectively."""
    if k < 1:
        raise ValueError("window size k must be >= 1")
    attacker = events[i].team_id
    scores = 0
    concedes = 0
    for e in _window(events, i, k):
        if e.is_goal_scored:
            if e.team_id == attacker:
                scores = 1
            else:
                concedes = 1
        if scores and concedes:
            break
    return scores, concedes


def label_match(
    events: list[Event] | tuple[Event, ...],
    k_vdep: int = K_VDEP_DEFAULT,
    k_vaep: int = K_VAEP_DEFAULT,
) -> LabelSet:
    """All four labels for every event of one match."""
    recovery = []
    attacked = []
    scores = []
    concedes = []
    for i in range(len(events)):
        recovery.append(label_recovery(events, i, k_vdep))
        attacked.append(label_attacked(events, i, k_vdep))
        s, c = label_goals(events, i, k_vaep)
        scores.append(s)
        concedes.append(c)
    return LabelSet(
        recovery=tuple(recovery),
        attacked=tuple(attacked),
        scores=tuple(scores),
        concedes=tuple(concedes),
    )
