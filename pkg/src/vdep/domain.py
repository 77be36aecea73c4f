"""Canonical in-memory types shared by every stage of the pipeline.

Pitch frame: x in [0, 105], y in [0, 68] meters. Stored coordinates are
absolute (side-of-play convention: the team that takes the match's first
event attacks toward x=105 in period 1 and toward x=0 in period 2, the
opponent the reverse). Possession-oriented views, where the team on the
ball always attacks toward the goal center at (105, 34), are produced by
`orient_xy` at game-state construction time.

No I/O and no learning here; everything is immutable after construction
and safe to share across workers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

PITCH_LENGTH = 105.0
PITCH_WIDTH = 68.0
GOAL_CENTER = (105.0, 34.0)


class ActionType(enum.Enum):
    """The closed set of 19 on-ball event types."""

    PASS = "pass"
    CROSS = "cross"
    THROW_IN = "throw_in"
    FREE_KICK = "free_kick"
    CORNER_KICK = "corner_kick"
    TRAP = "trap"
    FOUL = "foul"
    TACKLE = "tackle"
    INTERCEPTION = "interception"
    SHOT = "shot"
    PENALTY_KICK = "penalty_kick"
    OWN_GOAL = "own_goal"
    GK_HAND_CLEAR = "gk_hand_clear"
    GK_CATCH = "gk_catch"
    CLEARANCE = "clearance"
    BLOCK = "block"
    DRIBBLE = "dribble"
    OFFSIDE = "offside"
    GOAL_KICK = "goal_kick"

    @classmethod
    def parse(cls, token: str) -> "ActionType":
        try:
            return cls(token)
        except ValueError:
            raise ValueError(f"unknown action type: {token!r}") from None


@dataclass(frozen=True)
class Event:
    """One on-ball action. Coordinates are in the absolute pitch frame."""

    event_id: int
    period: int  # 1 or 2
    t_start: float  # seconds from period start
    t_end: float
    action: ActionType
    team_id: int  # team in possession (acting team)
    player_id: int
    ball_start: tuple[float, float]
    ball_end: tuple[float, float]
    is_effective_attack: bool = False
    is_ball_recovery_boundary: bool = False
    is_goal_scored: bool = False

    def sort_key(self) -> tuple[int, float, int]:
        return (self.period, self.t_start, self.event_id)


@dataclass(frozen=True)
class TrackingFrame:
    """Positions of all 22 players and the ball at one instant."""

    period: int
    t: float  # seconds from period start
    players: tuple[tuple[int, int, float, float], ...]  # (team_id, player_id, x, y)
    ball: tuple[float, float]

    def team_players(self, team_id: int) -> list[tuple[int, int, float, float]]:
        return [p for p in self.players if p[0] == team_id]


@dataclass(frozen=True)
class GameState:
    """Classifier input unit: the current event/frame pair plus the previous one.

    Coordinates in a GameState are oriented so the team in possession at the
    current event attacks toward x=105; the previous pair is oriented the
    same way so displacements between the two events are meaningful.
    `previous` is None only for a match's first event.
    """

    event: Event
    frame: TrackingFrame
    previous_event: Event | None
    previous_frame: TrackingFrame | None
    defending_team: int
    opponent_season_goals: float

    @property
    def attacking_team(self) -> int:
        return self.event.team_id


@dataclass(frozen=True)
class MatchRecord:
    """A full match: events, tracking, teams, result and schedule slot."""

    match_id: int
    home_team: int
    away_team: int
    events: tuple[Event, ...]
    frames: tuple[TrackingFrame, ...]
    home_goals: int
    away_goals: int
    week: int  # 1-based schedule week, drives fold assignment

    def teams(self) -> tuple[int, int]:
        return (self.home_team, self.away_team)

    def opponent_of(self, team_id: int) -> int:
        return self.away_team if team_id == self.home_team else self.home_team


@dataclass(frozen=True)
class LabelSet:
    """Per-event binary look-ahead targets, index-aligned with match events."""

    recovery: tuple[int, ...]
    attacked: tuple[int, ...]
    scores: tuple[int, ...]
    concedes: tuple[int, ...]


@dataclass(frozen=True)
class Violation:
    """One broken invariant, named by rule and offending record."""

    rule: str
    where: str
    detail: str = ""

    def __str__(self) -> str:
        msg = f"{self.rule} @ {self.where}"
        return f"{msg}: {self.detail}" if self.detail else msg


def attacks_toward_high_x(match_home: int, team_id: int, period: int) -> bool:
    """Side-of-play convention: home attacks +x in period 1, away in period 2."""
    home_attacks_high = period == 1
    return home_attacks_high if team_id == match_home else not home_attacks_high


def orient_xy(x: float, y: float, flip: bool) -> tuple[float, float]:
    """Map a point into the possession frame (rotate the pitch 180 degrees)."""
    if flip:
        return (PITCH_LENGTH - x, PITCH_WIDTH - y)
    return (x, y)


def _in_bounds(xy: tuple[float, float]) -> bool:
    return 0.0 <= xy[0] <= PITCH_LENGTH and 0.0 <= xy[1] <= PITCH_WIDTH


def validate_match(m: MatchRecord) -> list[Violation]:
    """Check every structural invariant; violations are data, not exceptions."""
    violations: list[Violation] = []

    if not 1 <= m.week <= 5:
        violations.append(Violation("week-range", f"match {m.match_id}", f"week={m.week}"))

    match_teams = {m.home_team, m.away_team}
    prev_key: tuple[int, float, int] | None = None
    for e in m.events:
        where = f"event {e.event_id}"
        if e.period not in (1, 2):
            violations.append(Violation("period", where, f"period={e.period}"))
        if e.t_end < e.t_start:
            violations.append(
                Violation("time-range", where, f"t_end={e.t_end} < t_start={e.t_start}")
            )
        for tag, xy in (("ball_start", e.ball_start), ("ball_end", e.ball_end)):
            if not _in_bounds(xy):
                violations.append(Violation("bounds", where, f"{tag}={xy}"))
        if e.team_id not in match_teams:
            violations.append(Violation("team-unknown", where, f"team_id={e.team_id}"))
        key = e.sort_key()
        if prev_key is not None and key <= prev_key:
            violations.append(
                Violation("ordering", where, f"key {key} does not follow {prev_key}")
            )
        prev_key = key

    seen_ids = [e.event_id for e in m.events]
    if len(set(seen_ids)) != len(seen_ids):
        violations.append(Violation("event-id-unique", f"match {m.match_id}"))

    for f in m.frames:
        where = f"frame p{f.period} t={f.t}"
        counts: dict[int, int] = {}
        for team_id, _, x, y in f.players:
            counts[team_id] = counts.get(team_id, 0) + 1
            if not _in_bounds((x, y)):
                violations.append(Violation("bounds", where, f"player at ({x}, {y})"))
        if sorted(counts.values()) != [11, 11]:
            violations.append(
                Violation("player-count", where, f"per-team counts {counts}")
            )
        if not _in_bounds(f.ball):
            violations.append(Violation("bounds", where, f"ball={f.ball}"))

    goals = {m.home_team: 0, m.away_team: 0}
    for e in m.events:
        if e.is_goal_scored and e.team_id in goals:
            goals[e.team_id] += 1
    if (goals[m.home_team], goals[m.away_team]) != (m.home_goals, m.away_goals):
        violations.append(
            Violation(
                "score-mismatch",
                f"match {m.match_id}",
                f"flags give {goals[m.home_team]}-{goals[m.away_team]}, "
                f"record says {m.home_goals}-{m.away_goals}",
            )
        )

    return violations


def goal_distance_angle(x: float, y: float) -> tuple[float, float]:
    """Distance and bearing from a possession-frame point to the attacked goal.

    Angle is in radians in (-pi, pi], zero when looking straight at the goal
    center along +x.
    """
    dx = GOAL_CENTER[0] - x
    dy = GOAL_CENTER[1] - y
    angle = math.atan2(dy, dx)
    if angle == -math.pi:
        angle = math.pi
    return (math.hypot(dx, dy), angle)
