"""The 139-dimensional game-state feature vector.

Layout: [current-event block (36) | previous-event block (36) |
off-ball block (66) | opponent season goals (1)].

Each 36-wide event block is: action one-hot (19), event id (1), start/end
time and duration (3), ball start/end xy (4), within-event displacement
dx/dy/norm (3), displacement from the previous event's start dx/dy/norm
(3), distance and angle from the ball to the attacked goal (2), and the
possession-change flag (1). In the previous-event block the last four of
those would need the event two back, which a game state does not carry, so
they are structurally zero there; the whole block is zero for a match's
first event.

The off-ball block sorts each side's 11 players by distance to the ball
(ties by player id) and emits xy pairs for the possession side, xy pairs
for the defending side, then the 22 ball distances in the same order.

Naming follows the convention used in the attribution reports: `_a0` and
`_a1` suffix the current and previous event, `offense_*`/`defense_*` are
the sorted player features with `p` the ball distance, `end_*` marks
event-end quantities and `team_1` is the possession-change flag.

All coordinates are oriented into the current event's possession frame
(attacking toward x=105) before any feature is computed. Euclidean norms
use an explicit sqrt(dx^2 + dy^2) so the scalar and vectorized paths below
agree bit for bit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .domain import (
    ActionType,
    Event,
    GameState,
    GOAL_CENTER,
    MatchRecord,
    TrackingFrame,
    attacks_toward_high_x,
    orient_xy,
)
from .ingestion import Corpus, TeamInfo, align_tracking

N_FEATURES = 139
EVENT_BLOCK = 36
OFFBALL_BLOCK = 66

_ACTIONS = list(ActionType)
_ACTION_INDEX = {a: i for i, a in enumerate(_ACTIONS)}


def _event_block_names(suffix: str, team_flag: str) -> list[str]:
    names = [f"type_{a.value}_{suffix}" for a in _ACTIONS]
    names += [
        f"event_id_{suffix}",
        f"start_time_{suffix}",
        f"end_time_{suffix}",
        f"duration_{suffix}",
        f"start_x_{suffix}",
        f"start_y_{suffix}",
        f"end_x_{suffix}",
        f"end_y_{suffix}",
        f"dx_{suffix}",
        f"dy_{suffix}",
        f"movement_{suffix}",
        f"dx_prev_{suffix}",
        f"dy_prev_{suffix}",
        f"movement_prev_{suffix}",
        f"goal_dist_{suffix}",
        f"goal_angle_{suffix}",
        team_flag,
    ]
    return names


def feature_names() -> list[str]:
    """The stable 139-entry name table; index i names column i."""
    names = _event_block_names("a0", "team_1")
    names += _event_block_names("a1", "team_2")
    for side in ("offense", "defense"):
        for rank in range(1, 12):
            names.append(f"{side}_x{rank}_a0")
            names.append(f"{side}_y{rank}_a0")
    for side in ("offense", "defense"):
        for rank in range(1, 12):
            names.append(f"{side}_p{rank}_a0")
    names.append("opponent_season_goals")
    assert len(names) == N_FEATURES
    return names


FEATURE_NAMES = feature_names()
FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}


def write_feature_table(path: str | Path) -> None:
    """Dump the name <-> index table for audits (`features.csv`)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["name", "index"])
        for i, name in enumerate(FEATURE_NAMES):
            writer.writerow([name, i])


def _norm(dx: float, dy: float) -> float:
    return float(np.sqrt(dx * dx + dy * dy))


def build_event_block(e: Event | None, prev: Event | None) -> np.ndarray:
    """36 features of one event, already oriented to the possession frame.

    `prev` supplies the displacement-from-previous dims and the
    possession-change flag; pass None to zero them (unknown predecessor).
    A None event yields an all-zero block.
    """
    block = np.zeros(EVENT_BLOCK)
    if e is None:
        return block
    block[_ACTION_INDEX[e.action]] = 1.0
    block[19] = float(e.event_id)
    block[20] = e.t_start
    block[21] = e.t_end
    block[22] = e.t_end - e.t_start
    sx, sy = e.ball_start
    ex, ey = e.ball_end
    block[23:27] = (sx, sy, ex, ey)
    dx, dy = ex - sx, ey - sy
    block[27:30] = (dx, dy, _norm(dx, dy))
    if prev is not None:
        pdx, pdy = sx - prev.ball_start[0], sy - prev.ball_start[1]
        block[30:33] = (pdx, pdy, _norm(pdx, pdy))
        block[35] = 0.0 if prev.team_id == e.team_id else 1.0
    gdx, gdy = GOAL_CENTER[0] - sx, GOAL_CENTER[1] - sy
    block[33] = _norm(gdx, gdy)
    angle = float(np.arctan2(gdy, gdx))
    if angle == -np.pi:
        angle = float(np.pi)
    block[34] = angle
    return block


def build_offball_block(frame: TrackingFrame, possession_team: int) -> np.ndarray:
    """66 off-ball features: per-side ball-distance-sorted xy then distances."""
    offense = frame.team_players(possession_team)
    defense = [p for p in frame.players if p[0] != possession_team]
    if len(offense) != 11 or len(defense) != 11:
        raise ValueError(
            f"frame must carry 11 players per side, got {len(offense)}/{len(defense)}"
        )
    bx, by = frame.ball
    block = np.zeros(OFFBALL_BLOCK)
    for side_idx, side in enumerate((offense, defense)):
        ranked = sorted(
            ((_norm(x - bx, y - by), pid, x, y) for _, pid, x, y in side),
            key=lambda r: (r[0], r[1]),
        )
        xy_base = side_idx * 22
        p_base = 44 + side_idx * 11
        for rank, (dist, _, x, y) in enumerate(ranked):
            block[xy_base + 2 * rank] = x
            block[xy_base + 2 * rank + 1] = y
            block[p_base + rank] = dist
    return block


def build_state_vector(s: GameState) -> np.ndarray:
    """Reference single-state path; `build_match_features` is the fast twin."""
    vec = np.empty(N_FEATURES)
    vec[0:36] = build_event_block(s.event, s.previous_event)
    vec[36:72] = build_event_block(s.previous_event, None)
    vec[72:138] = build_offball_block(s.frame, s.event.team_id)
    vec[138] = s.opponent_season_goals
    return vec


# --- orientation and state assembly --------------------------------------

def _orient_event(e: Event, flip: bool) -> Event:
    if not flip:
        return e
    return Event(
        event_id=e.event_id,
        period=e.period,
        t_start=e.t_start,
        t_end=e.t_end,
        action=e.action,
        team_id=e.team_id,
        player_id=e.player_id,
        ball_start=orient_xy(*e.ball_start, True),
        ball_end=orient_xy(*e.ball_end, True),
        is_effective_attack=e.is_effective_attack,
        is_ball_recovery_boundary=e.is_ball_recovery_boundary,
        is_goal_scored=e.is_goal_scored,
    )


def _orient_frame(f: TrackingFrame, flip: bool) -> TrackingFrame:
    if not flip:
        return f
    return TrackingFrame(
        period=f.period,
        t=f.t,
        players=tuple(
            (team, pid, *orient_xy(x, y, True)) for team, pid, x, y in f.players
        ),
        ball=orient_xy(*f.ball, True),
    )


def build_states(match: MatchRecord, team_table: dict[int, TeamInfo]) -> list[GameState]:
    """Align, orient and pair every event of a match into game states."""
    pairs = align_tracking(list(match.events), list(match.frames))
    states: list[GameState] = []
    for i, (event, frame) in enumerate(pairs):
        flip = not attacks_toward_high_x(match.home_team, event.team_id, event.period)
        prev_event: Event | None = None
        prev_frame: TrackingFrame | None = None
        if i > 0:
            prev_event = _orient_event(pairs[i - 1][0], flip)
            prev_frame = _orient_frame(pairs[i - 1][1], flip)
        states.append(
            GameState(
                event=_orient_event(event, flip),
                frame=_orient_frame(frame, flip),
                previous_event=prev_event,
                previous_frame=prev_frame,
                defending_team=match.opponent_of(event.team_id),
                opponent_season_goals=team_table[event.team_id].season_goals,
            )
        )
    return states


@dataclass(frozen=True)
class MatchFeatures:
    """Feature matrix for one match plus row bookkeeping."""

    match_id: int
    X: np.ndarray  # (n_events, 139)
    event_ids: np.ndarray
    attacking: np.ndarray  # team in possession per row
    defending: np.ndarray
    week: int


def build_match_features(
    match: MatchRecord, team_table: dict[int, TeamInfo]
) -> MatchFeatures:
    """Vectorized feature build; bit-identical to the per-state reference."""
    pairs = align_tracking(list(match.events), list(match.frames))
    n = len(pairs)
    X = np.zeros((n, N_FEATURES))

    event_ids = np.empty(n, dtype=np.int64)
    team = np.empty(n, dtype=np.int64)
    period = np.empty(n, dtype=np.int64)
    action_idx = np.empty(n, dtype=np.int64)
    t0 = np.empty(n)
    t1 = np.empty(n)
    coords = np.empty((n, 4))  # raw sx, sy, ex, ey

    px = np.empty((n, 22))
    py = np.empty((n, 22))
    ppid = np.empty((n, 22), dtype=np.int64)
    ball = np.empty((n, 2))

    for i, (e, f) in enumerate(pairs):
        event_ids[i] = e.event_id
        team[i] = e.team_id
        period[i] = e.period
        action_idx[i] = _ACTION_INDEX[e.action]
        t0[i] = e.t_start
        t1[i] = e.t_end
        coords[i] = (*e.ball_start, *e.ball_end)
        # possession side first so columns 0..10 are offense, 11..21 defense
        row = sorted(f.players, key=lambda p: (p[0] != e.team_id, p[1]))
        for j, (pteam, pid, x, y) in enumerate(row):
            ppid[i, j] = pid
            px[i, j] = x
            py[i, j] = y
        ball[i] = f.ball

    home_high = period == 1
    team_is_home = team == match.home_team
    flip = ~np.where(team_is_home, home_high, ~home_high)

    def orient_x(x: np.ndarray) -> np.ndarray:
        return np.where(flip, 105.0 - x, x)

    def orient_y(y: np.ndarray) -> np.ndarray:
        return np.where(flip, 68.0 - y, y)

    sx = orient_x(coords[:, 0])
    sy = orient_y(coords[:, 1])
    ex = orient_x(coords[:, 2])
    ey = orient_y(coords[:, 3])

    # current-event block
    X[np.arange(n), action_idx] = 1.0
    X[:, 19] = event_ids
    X[:, 20] = t0
    X[:, 21] = t1
    X[:, 22] = t1 - t0
    X[:, 23] = sx
    X[:, 24] = sy
    X[:, 25] = ex
    X[:, 26] = ey
    dx = ex - sx
    dy = ey - sy
    X[:, 27] = dx
    X[:, 28] = dy
    X[:, 29] = np.sqrt(dx * dx + dy * dy)
    # previous-event start in the CURRENT event's frame
    prev_sx_raw = np.empty(n)
    prev_sy_raw = np.empty(n)
    prev_sx_raw[1:] = coords[:-1, 0]
    prev_sy_raw[1:] = coords[:-1, 1]
    prev_sx_raw[0] = prev_sy_raw[0] = 0.0
    pdx = sx - orient_x(prev_sx_raw)
    pdy = sy - orient_y(prev_sy_raw)
    pdx[0] = pdy[0] = 0.0
    X[:, 30] = pdx
    X[:, 31] = pdy
    X[:, 32] = np.sqrt(pdx * pdx + pdy * pdy)
    gdx = 105.0 - sx
    gdy = 34.0 - sy
    X[:, 33] = np.sqrt(gdx * gdx + gdy * gdy)
    angle = np.arctan2(gdy, gdx)
    angle[angle == -np.pi] = np.pi
    X[:, 34] = angle
    X[1:, 35] = (team[1:] != team[:-1]).astype(float)

    # previous-event block: same quantities for event i-1 in event i's frame;
    # dims that would need event i-2 stay zero
    psx = np.where(flip[1:], 105.0 - coords[:-1, 0], coords[:-1, 0])
    psy = np.where(flip[1:], 68.0 - coords[:-1, 1], coords[:-1, 1])
    pex = np.where(flip[1:], 105.0 - coords[:-1, 2], coords[:-1, 2])
    pey = np.where(flip[1:], 68.0 - coords[:-1, 3], coords[:-1, 3])
    rows1 = np.arange(1, n)
    X[rows1, 36 + action_idx[:-1]] = 1.0
    X[rows1, 55] = event_ids[:-1]
    X[rows1, 56] = t0[:-1]
    X[rows1, 57] = t1[:-1]
    X[rows1, 58] = t1[:-1] - t0[:-1]
    X[rows1, 59] = psx
    X[rows1, 60] = psy
    X[rows1, 61] = pex
    X[rows1, 62] = pey
    pdx1 = pex - psx
    pdy1 = pey - psy
    X[rows1, 63] = pdx1
    X[rows1, 64] = pdy1
    X[rows1, 65] = np.sqrt(pdx1 * pdx1 + pdy1 * pdy1)
    pgdx = 105.0 - psx
    pgdy = 34.0 - psy
    X[rows1, 69] = np.sqrt(pgdx * pgdx + pgdy * pgdy)
    pangle = np.arctan2(pgdy, pgdx)
    pangle[pangle == -np.pi] = np.pi
    X[rows1, 70] = pangle

    # off-ball block
    ox = np.where(flip[:, None], 105.0 - px, px)
    oy = np.where(flip[:, None], 68.0 - py, py)
    bx = orient_x(ball[:, 0])[:, None]
    by = orient_y(ball[:, 1])[:, None]
    ddx = ox - bx
    ddy = oy - by
    dist = np.sqrt(ddx * ddx + ddy * ddy)
    for side in range(2):
        cols = slice(11 * side, 11 * side + 11)
        order = np.lexsort((ppid[:, cols], dist[:, cols]), axis=-1)
        sx_side = np.take_along_axis(ox[:, cols], order, axis=1)
        sy_side = np.take_along_axis(oy[:, cols], order, axis=1)
        sd_side = np.take_along_axis(dist[:, cols], order, axis=1)
        base = 72 + 22 * side
        X[:, base : base + 22 : 2] = sx_side
        X[:, base + 1 : base + 23 : 2] = sy_side
        X[:, 116 + 11 * side : 116 + 11 * side + 11] = sd_side

    season_goals = np.array([team_table[int(t)].season_goals for t in team])
    X[:, 138] = season_goals

    return MatchFeatures(
        match_id=match.match_id,
        X=X,
        event_ids=event_ids,
        attacking=team,
        defending=np.where(team_is_home, match.away_team, match.home_team),
        week=match.week,
    )


@dataclass(frozen=True)
class CorpusFeatures:
    """Stacked feature matrices for a whole corpus."""

    X: np.ndarray
    match_id: np.ndarray
    event_id: np.ndarray
    week: np.ndarray
    attacking: np.ndarray
    defending: np.ndarray

    def __len__(self) -> int:
        return self.X.shape[0]


def build_corpus_features(corpus: Corpus) -> CorpusFeatures:
    parts = [build_match_features(m, corpus.team_table) for m in corpus.matches]
    return CorpusFeatures(
        X=np.concatenate([p.X for p in parts]),
        match_id=np.concatenate(
            [np.full(len(p.event_ids), p.match_id, dtype=np.int64) for p in parts]
        ),
        event_id=np.concatenate([p.event_ids for p in parts]),
        week=np.concatenate(
            [np.full(len(p.event_ids), p.week, dtype=np.int64) for p in parts]
        ),
        attacking=np.concatenate([p.attacking for p in parts]),
        defending=np.concatenate([p.defending for p in parts]),
    )
