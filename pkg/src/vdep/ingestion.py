"""Parsing, alignment and corpus assembly.

Three plain-text inputs describe a corpus:

* events file   -- one JSON object per line:
                   {match_id, event_id, period, t_start, t_end, action,
                    team_id, player_id, ball_start_x, ball_start_y,
                    ball_end_x, ball_end_y, flags}
                   where flags is a list drawn from {"effective_attack",
                   "recovery_boundary", "goal"}.
* tracking file -- CSV with header match_id,period,t,entity_id,team_id,x,y;
                   entity_id "ball" marks the ball row, all other rows are
                   players. 23 rows with one (match_id, period, t) key form
                   one frame.
* teams file    -- CSV with header team_id,name,season_goals.

Match metadata the files do not carry is derived deterministically: the
team taking a match's first event is the home side (it kicked off), the
score is the count of goal-flagged events per team, and schedule weeks are
assigned as five contiguous blocks over matches sorted by match_id. A
canonical corpus directory additionally carries a matches.csv with the true
weeks, which takes precedence over the block assignment when present.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .domain import ActionType, Event, MatchRecord, TrackingFrame, validate_match

ALIGN_TOLERANCE = 0.5  # seconds; nearest frame farther than this is an error
_TIE_EPS = 1e-9  # |d_prev - d_next| below this counts as an alignment tie

_FLAG_TOKENS = {"effective_attack", "recovery_boundary", "goal"}

EVENTS_FILENAME = "events.jsonl"
TRACKING_FILENAME = "tracking.csv"
TEAMS_FILENAME = "teams.csv"
MATCHES_FILENAME = "matches.csv"  # optional schedule metadata (true weeks)


class IngestError(Exception):
    """Raised for malformed inputs or impossible alignments."""


@dataclass(frozen=True)
class TeamInfo:
    team_id: int
    name: str
    season_goals: float


@dataclass(frozen=True)
class Corpus:
    matches: tuple[MatchRecord, ...]
    team_table: dict[int, TeamInfo]

    def match_by_id(self, match_id: int) -> MatchRecord:
        for m in self.matches:
            if m.match_id == match_id:
                return m
        raise KeyError(match_id)


def parse_events(path: str | Path) -> dict[int, list[Event]]:
    """Read an events file into per-match lists sorted by (period, t_start, id)."""
    out: dict[int, list[Event]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"{path}:{lineno}: malformed event record: {exc}") from None
            try:
                action = ActionType.parse(rec["action"])
                flags = set(rec.get("flags", []))
                unknown = flags - _FLAG_TOKENS
                if unknown:
                    raise ValueError(f"unknown flags {sorted(unknown)}")
                event = Event(
                    event_id=int(rec["event_id"]),
                    period=int(rec["period"]),
                    t_start=float(rec["t_start"]),
                    t_end=float(rec["t_end"]),
                    action=action,
                    team_id=int(rec["team_id"]),
                    player_id=int(rec["player_id"]),
                    ball_start=(float(rec["ball_start_x"]), float(rec["ball_start_y"])),
                    ball_end=(float(rec["ball_end_x"]), float(rec["ball_end_y"])),
                    is_effective_attack="effective_attack" in flags,
                    is_ball_recovery_boundary="recovery_boundary" in flags,
                    is_goal_scored="goal" in flags,
                )
                match_id = int(rec["match_id"])
            except (KeyError, TypeError, ValueError) as exc:
                raise IngestError(f"{path}:{lineno}: {exc}") from None
            out.setdefault(match_id, []).append(event)
    for events in out.values():
        events.sort(key=Event.sort_key)
    return out


def parse_tracking(path: str | Path) -> dict[int, list[TrackingFrame]]:
    """Read a tracking file into per-match frame lists sorted by (period, t)."""
    raw: dict[tuple[int, int, float], dict] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["match_id", "period", "t", "entity_id", "team_id", "x", "y"]:
            raise IngestError(f"{path}: missing or wrong tracking header: {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                match_id, period, t = int(row[0]), int(row[1]), float(row[2])
                x, y = float(row[5]), float(row[6])
                key = (match_id, period, t)
                bucket = raw.setdefault(key, {"players": [], "ball": None})
                if row[3] == "ball":
                    bucket["ball"] = (x, y)
                else:
                    bucket["players"].append((int(row[4]), int(row[3]), x, y))
            except (IndexError, ValueError) as exc:
                raise IngestError(f"{path}:{lineno}: malformed tracking row: {exc}") from None

    frames: dict[int, list[TrackingFrame]] = {}
    for (match_id, period, t), bucket in raw.items():
        if bucket["ball"] is None:
            raise IngestError(f"{path}: frame ({match_id}, p{period}, t={t}) has no ball row")
        players = bucket["players"]
        counts: dict[int, int] = {}
        for team_id, _, _, _ in players:
            counts[team_id] = counts.get(team_id, 0) + 1
        if sorted(counts.values()) != [11, 11]:
            raise IngestError(
                f"{path}: frame ({match_id}, p{period}, t={t}) rejected: "
                f"per-team player counts {counts}"
            )
        players.sort(key=lambda p: (p[0], p[1]))
        frames.setdefault(match_id, []).append(
            TrackingFrame(period=period, t=t, players=tuple(players), ball=bucket["ball"])
        )
    for frame_list in frames.values():
        frame_list.sort(key=lambda f: (f.period, f.t))
    return frames


def parse_teams(path: str | Path) -> dict[int, TeamInfo]:
    table: dict[int, TeamInfo] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["team_id", "name", "season_goals"]:
            raise IngestError(f"{path}: missing or wrong teams header: {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                team_id = int(row[0])
                table[team_id] = TeamInfo(team_id, row[1], float(row[2]))
            except (IndexError, ValueError) as exc:
                raise IngestError(f"{path}:{lineno}: malformed team row: {exc}") from None
    return table


def parse_matches(path: str | Path) -> dict[int, int]:
    """Optional schedule metadata: match_id -> week."""
    weeks: dict[int, int] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["match_id", "week", "home_team", "away_team", "home_goals", "away_goals"]:
            raise IngestError(f"{path}: missing or wrong matches header: {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                weeks[int(row[0])] = int(row[1])
            except (IndexError, ValueError) as exc:
                raise IngestError(f"{path}:{lineno}: malformed match row: {exc}") from None
    return weeks


def align_tracking(
    events: list[Event], frames: list[TrackingFrame]
) -> list[tuple[Event, TrackingFrame]]:
    """Pair each event with the frame nearest in time within the same period.

    Ties (to within 1e-9 s) break toward the earlier frame. Any event whose
    nearest frame is farther than 0.5 s raises, listing every offender.
    """
    if not events or not frames:
        raise IngestError("align_tracking needs non-empty event and frame streams")

    by_period: dict[int, list[TrackingFrame]] = {}
    for f in frames:
        by_period.setdefault(f.period, []).append(f)
    for fl in by_period.values():
        fl.sort(key=lambda f: f.t)

    pairs: list[tuple[Event, TrackingFrame]] = []
    misses: list[tuple[int, float]] = []
    for e in events:
        candidates = by_period.get(e.period)
        if not candidates:
            misses.append((e.event_id, math.inf))
            continue
        best = candidates[0]
        best_d = abs(best.t - e.t_start)
        for f in candidates[1:]:
            d = abs(f.t - e.t_start)
            if d < best_d - _TIE_EPS:
                best, best_d = f, d
            # on a tie the earlier frame, already held, wins
        if best_d > ALIGN_TOLERANCE:
            misses.append((e.event_id, best_d))
        else:
            pairs.append((e, best))
    if misses:
        listing = ", ".join(f"{eid} (gap {gap:.3f}s)" for eid, gap in misses)
        raise IngestError(f"no tracking frame within {ALIGN_TOLERANCE}s for events: {listing}")
    return pairs


def assign_weeks(match_ids: list[int]) -> dict[int, int]:
    """Five contiguous blocks over matches sorted by id; fewer matches than
    blocks degrade to one match per week."""
    ordered = sorted(match_ids)
    n = len(ordered)
    if n == 0:
        return {}
    if n < 5:
        return {mid: i + 1 for i, mid in enumerate(ordered)}
    return {mid: (i * 5) // n + 1 for i, mid in enumerate(ordered)}


def build_match(
    match_id: int, events: list[Event], frames: list[TrackingFrame], week: int
) -> MatchRecord:
    """Derive home side and score from the event stream itself."""
    if not events:
        raise IngestError(f"match {match_id} has no events")
    home = events[0].team_id
    teams = {e.team_id for e in events}
    if len(teams) != 2:
        raise IngestError(f"match {match_id} has teams {sorted(teams)}, expected exactly 2")
    away = (teams - {home}).pop()
    goals = {home: 0, away: 0}
    for e in events:
        if e.is_goal_scored:
            goals[e.team_id] += 1
    return MatchRecord(
        match_id=match_id,
        home_team=home,
        away_team=away,
        events=tuple(events),
        frames=tuple(frames),
        home_goals=goals[home],
        away_goals=goals[away],
        week=week,
    )


def load_corpus(directory: str | Path) -> Corpus:
    """Read a corpus directory; uses matches.csv week metadata when present."""
    directory = Path(directory)
    matches_path = directory / MATCHES_FILENAME
    return build_corpus(
        directory / EVENTS_FILENAME,
        directory / TRACKING_FILENAME,
        directory / TEAMS_FILENAME,
        matches_path if matches_path.exists() else None,
    )


def build_corpus(
    events_path: str | Path,
    tracking_path: str | Path,
    teams_path: str | Path,
    matches_path: str | Path | None = None,
) -> Corpus:
    events_by_match = parse_events(events_path)
    frames_by_match = parse_tracking(tracking_path)
    team_table = parse_teams(teams_path)

    if matches_path is not None:
        weeks = parse_matches(matches_path)
        missing = set(events_by_match) - set(weeks)
        if missing:
            raise IngestError(f"matches metadata lacks match ids: {sorted(missing)}")
    else:
        weeks = assign_weeks(list(events_by_match))
    matches = []
    for match_id in sorted(events_by_match):
        frames = frames_by_match.get(match_id)
        if not frames:
            raise IngestError(f"match {match_id} has events but no tracking frames")
        matches.append(
            build_match(match_id, events_by_match[match_id], frames, weeks[match_id])
        )

    referenced = {e.team_id for m in matches for e in m.events}
    missing = referenced - set(team_table)
    if missing:
        raise IngestError(f"teams referenced by events but absent from team table: {sorted(missing)}")
    return Corpus(matches=tuple(matches), team_table=team_table)


def validate_corpus(corpus: Corpus) -> list[str]:
    """Run every match through the domain validator; returns printable strings."""
    out: list[str] = []
    for m in corpus.matches:
        for v in validate_match(m):
            out.append(f"match {m.match_id}: {v}")
    return out


# --- emitters -----------------------------------------------------------

def _event_record(match_id: int, e: Event) -> dict:
    flags = []
    if e.is_effective_attack:
        flags.append("effective_attack")
    if e.is_ball_recovery_boundary:
        flags.append("recovery_boundary")
    if e.is_goal_scored:
        flags.append("goal")
    return {
        "match_id": match_id,
        "event_id": e.event_id,
        "period": e.period,
        "t_start": e.t_start,
        "t_end": e.t_end,
        "action": e.action.value,
        "team_id": e.team_id,
        "player_id": e.player_id,
        "ball_start_x": e.ball_start[0],
        "ball_start_y": e.ball_start[1],
        "ball_end_x": e.ball_end[0],
        "ball_end_y": e.ball_end[1],
        "flags": flags,
    }


def write_corpus(corpus: Corpus, directory: str | Path) -> None:
    """Emit the three canonical files; parse(emit(c)) reproduces c exactly."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    with open(directory / EVENTS_FILENAME, "w", encoding="utf-8", newline="\n") as fh:
        for m in corpus.matches:
            for e in m.events:
                fh.write(json.dumps(_event_record(m.match_id, e)))
                fh.write("\n")

    with open(directory / TRACKING_FILENAME, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["match_id", "period", "t", "entity_id", "team_id", "x", "y"])
        for m in corpus.matches:
            for f in m.frames:
                for team_id, player_id, x, y in f.players:
                    writer.writerow([m.match_id, f.period, repr(float(f.t)), player_id, team_id, repr(float(x)), repr(float(y))])
                writer.writerow([m.match_id, f.period, repr(float(f.t)), "ball", "", repr(float(f.ball[0])), repr(float(f.ball[1]))])

    with open(directory / TEAMS_FILENAME, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["team_id", "name", "season_goals"])
        for team_id in sorted(corpus.team_table):
            info = corpus.team_table[team_id]
            writer.writerow([info.team_id, info.name, repr(float(info.season_goals))])

    with open(directory / MATCHES_FILENAME, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["match_id", "week", "home_team", "away_team", "home_goals", "away_goals"])
        for m in corpus.matches:
            writer.writerow(
                [m.match_id, m.week, m.home_team, m.away_team, m.home_goals, m.away_goals]
            )
