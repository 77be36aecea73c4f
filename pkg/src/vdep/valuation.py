"""Turning out-of-fold probabilities into defensive value.

Per event, the defensive value is

    v_vdep = p_recoveries - C * p_attacked

with C the trade-off constant of the fold that scored the event, estimated
as the ratio of recovery to attacked positive-label counts over that fold's
training weeks. The goal-based baseline values an event by the change in
scoring minus conceding probability between consecutive states of the same
possession perspective: when possession flips between events, the previous
state's scores/concedes probabilities swap roles, and a match's first event
takes its raw probabilities as the change from zero.

Team-match aggregation credits every event exactly once per index: the
defensive means (r_*) run over the events where the team is the defending
side, the goal-baseline sums (s_*) over the events where it is in
possession, mirroring how each index assigns responsibility.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


def estimate_C(recovery_positives, attacked_positives) -> float:
    """Ratio of recovery to attacked positive counts on the training folds.

    Accepts raw counts or label arrays (which are summed).
    """
    rec = float(np.sum(recovery_positives))
    att = float(np.sum(attacked_positives))
    if att <= 0:
        raise ValueError("cannot estimate C: no attacked positives in training data")
    return rec / att


@dataclass(frozen=True)
class ValuedEvent:
    match_id: int
    event_id: int
    attacking: int
    defending: int
    fold: int
    c: float
    p_recoveries: float
    p_attacked: float
    p_scores: float
    p_concedes: float
    v_vdep: float
    d_scores: float
    d_concedes: float
    v_vaep: float


def value_events(
    match_id: np.ndarray,
    event_id: np.ndarray,
    attacking: np.ndarray,
    defending: np.ndarray,
    p_recoveries: np.ndarray,
    p_attacked: np.ndarray,
    p_scores: np.ndarray,
    p_concedes: np.ndarray,
    c_of_event: np.ndarray,
    fold_of_event: np.ndarray | None = None,
) -> list[ValuedEvent]:
    """Per-event values; rows must be match-grouped in event order."""
    n = len(event_id)
    for arr in (p_recoveries, p_attacked, p_scores, p_concedes):
        a = np.asarray(arr, dtype=np.float64)
        if np.any((a < 0) | (a > 1)):
            raise ValueError("probabilities must lie in [0, 1]")
    if fold_of_event is None:
        fold_of_event = np.zeros(n, dtype=np.int64)
    out: list[ValuedEvent] = []
    for i in range(n):
        c = float(c_of_event[i]) if np.ndim(c_of_event) else float(c_of_event)
        first = i == 0 or match_id[i] != match_id[i - 1]
        if first:
            prev_s = prev_c = 0.0
        elif attacking[i] == attacking[i - 1]:
            prev_s, prev_c = p_scores[i - 1], p_concedes[i - 1]
        else:
            prev_s, prev_c = p_concedes[i - 1], p_scores[i - 1]
        d_scores = float(p_scores[i] - prev_s)
        d_concedes = float(p_concedes[i] - prev_c)
        out.append(
            ValuedEvent(
                match_id=int(match_id[i]),
                event_id=int(event_id[i]),
                attacking=int(attacking[i]),
                defending=int(defending[i]),
                fold=int(fold_of_event[i]),
                c=c,
                p_recoveries=float(p_recoveries[i]),
                p_attacked=float(p_attacked[i]),
                p_scores=float(p_scores[i]),
                p_concedes=float(p_concedes[i]),
                v_vdep=float(p_recoveries[i] - c * p_attacked[i]),
                d_scores=d_scores,
                d_concedes=d_concedes,
                v_vaep=d_scores - d_concedes,
            )
        )
    return out


@dataclass(frozen=True)
class TeamMatchValue:
    team_id: int
    match_id: int
    m_events: int  # defending events backing the r_* means
    c: float
    r_vdep: float
    r_recoveries: float
    r_attacked: float
    s_vaep: float
    s_scores: float
    s_concedes: float


def aggregate_team_match(
    valued: list[ValuedEvent], team_id: int, match_id: int
) -> TeamMatchValue:
    defending = [v for v in valued if v.match_id == match_id and v.defending == team_id]
    attacking = [v for v in valued if v.match_id == match_id and v.attacking == team_id]
    if not defending:
        raise ValueError(f"team {team_id} has no defending events in match {match_id}")
    m = len(defending)
    return TeamMatchValue(
        team_id=team_id,
        match_id=match_id,
        m_events=m,
        c=defending[0].c,
        r_vdep=sum(v.v_vdep for v in defending) / m,
        r_recoveries=sum(v.p_recoveries for v in defending) / m,
        r_attacked=sum(v.p_attacked for v in defending) / m,
        s_vaep=sum(v.v_vaep for v in attacking),
        s_scores=sum(v.d_scores for v in attacking),
        s_concedes=sum(v.d_concedes for v in attacking),
    )


def aggregate_all_team_matches(valued: list[ValuedEvent]) -> list[TeamMatchValue]:
    pairs = sorted({(v.match_id, team) for v in valued for team in (v.defending, v.attacking)})
    by_match: dict[int, list[ValuedEvent]] = {}
    for v in valued:
        by_match.setdefault(v.match_id, []).append(v)
    return [aggregate_team_match(by_match[mid], team, mid) for mid, team in pairs]


@dataclass(frozen=True)
class TeamSeasonValue:
    team_id: int
    n_matches: int
    r_vdep: float
    r_recoveries: float
    r_attacked: float
    s_vaep: float
    s_scores: float
    s_concedes: float


def aggregate_team_season(rows: list[TeamMatchValue]) -> TeamSeasonValue:
    """Across-match means of every index for one team."""
    if not rows:
        raise ValueError("season aggregate of zero matches")
    team_ids = {r.team_id for r in rows}
    if len(team_ids) != 1:
        raise ValueError(f"rows span several teams: {sorted(team_ids)}")
    n = len(rows)
    return TeamSeasonValue(
        team_id=rows[0].team_id,
        n_matches=n,
        r_vdep=sum(r.r_vdep for r in rows) / n,
        r_recoveries=sum(r.r_recoveries for r in rows) / n,
        r_attacked=sum(r.r_attacked for r in rows) / n,
        s_vaep=sum(r.s_vaep for r in rows) / n,
        s_scores=sum(r.s_scores for r in rows) / n,
        s_concedes=sum(r.s_concedes for r in rows) / n,
    )


def season_table(match_rows: list[TeamMatchValue]) -> list[TeamSeasonValue]:
    by_team: dict[int, list[TeamMatchValue]] = {}
    for r in match_rows:
        by_team.setdefault(r.team_id, []).append(r)
    return [aggregate_team_season(by_team[t]) for t in sorted(by_team)]


def league_means(rows: list[TeamSeasonValue]) -> dict[str, float]:
    n = len(rows)
    return {
        name: sum(getattr(r, name) for r in rows) / n
        for name in ("r_vdep", "r_recoveries", "r_attacked", "s_vaep", "s_scores", "s_concedes")
    }


# --- reports --------------------------------------------------------------

def write_valued_events_csv(valued: list[ValuedEvent], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["match_id", "event_id", "attacking", "defending", "fold", "c",
             "p_recoveries", "p_attacked", "p_scores", "p_concedes",
             "v_vdep", "d_scores", "d_concedes", "v_vaep"]
        )
        for v in valued:
            writer.writerow(
                [v.match_id, v.event_id, v.attacking, v.defending, v.fold, repr(v.c),
                 repr(v.p_recoveries), repr(v.p_attacked), repr(v.p_scores),
                 repr(v.p_concedes), repr(v.v_vdep), repr(v.d_scores),
                 repr(v.d_concedes), repr(v.v_vaep)]
            )


def write_team_match_csv(rows: list[TeamMatchValue], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["team_id", "match_id", "m_events", "c", "r_vdep", "r_recoveries",
             "r_attacked", "s_vaep", "s_scores", "s_concedes"]
        )
        for r in rows:
            writer.writerow(
                [r.team_id, r.match_id, r.m_events, repr(r.c), repr(r.r_vdep),
                 repr(r.r_recoveries), repr(r.r_attacked), repr(r.s_vaep),
                 repr(r.s_scores), repr(r.s_concedes)]
            )


def write_team_season_csv(rows: list[TeamSeasonValue], path: str | Path) -> None:
    """Season table with a league-mean footer row."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["team_id", "n_matches", "r_vdep", "r_recoveries", "r_attacked",
             "s_vaep", "s_scores", "s_concedes"]
        )
        for r in rows:
            writer.writerow(
                [r.team_id, r.n_matches, repr(r.r_vdep), repr(r.r_recoveries),
                 repr(r.r_attacked), repr(r.s_vaep), repr(r.s_scores),
                 repr(r.s_concedes)]
            )
        if rows:
            means = league_means(rows)
            writer.writerow(
                ["league", len(rows), repr(means["r_vdep"]), repr(means["r_recoveries"]),
                 repr(means["r_attacked"]), repr(means["s_vaep"]), repr(means["s_scores"]),
                 repr(means["s_concedes"])]
            )
