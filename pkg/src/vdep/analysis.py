"""Outcome correlation study: winning points, goals and effect-size bands.

Correlations are interpreted through the classic effect-size bands on |r|
(rounded to three decimals first): below 0.20 slight/negligible, then low,
moderate at 0.40, high at 0.70 and very high from 0.90 up. No p-values are
computed; with a league of 18 teams the magnitude is the story.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .evaluation import UndefinedMetricError
from .ingestion import Corpus
from .valuation import TeamSeasonValue

INDICES = ("r_vdep", "s_vaep", "r_recoveries", "r_attacked")
OUTCOMES = ("points", "goals_for", "goals_against")


def winning_points(goals_for: int, goals_against: int) -> int:
    """3 for a win, 1 for a draw, 0 for a loss."""
    if goals_for < 0 or goals_against < 0:
        raise ValueError("goal counts must be non-negative")
    if goals_for > goals_against:
        return 3
    if goals_for == goals_against:
        return 1
    return 0


def pearson_r(x, y) -> float:
    """Product-moment correlation; undefined below 3 points or at zero variance."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be 1-D and equally long")
    if len(x) < 3:
        raise UndefinedMetricError("correlation needs at least 3 points")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        raise UndefinedMetricError("correlation undefined for zero variance")
    return float(np.sum(dx * dy) / (sx * sy))


def guilford_band(r: float) -> str:
    """Effect-size label for |r|, rounded to 3 decimals before banding."""
    if math.isnan(r) or abs(r) > 1.0 + 1e-12:
        raise ValueError(f"not a correlation coefficient: {r}")
    mag = round(abs(r), 3)
    if mag < 0.20:
        return "slight/negligible"
    if mag < 0.40:
        return "low"
    if mag < 0.70:
        return "moderate"
    if mag < 0.90:
        return "high"
    return "very high"


@dataclass(frozen=True)
class TeamOutcome:
    team_id: int
    points: float
    goals_for: float
    goals_against: float


def match_outcome_means(corpus: Corpus) -> dict[int, TeamOutcome]:
    """Per-team means of per-match points and goals over the corpus."""
    acc: dict[int, list[tuple[int, int, int]]] = {}
    for m in corpus.matches:
        for team, gf, ga in (
            (m.home_team, m.home_goals, m.away_goals),
            (m.away_team, m.away_goals, m.home_goals),
        ):
            acc.setdefault(team, []).append((winning_points(gf, ga), gf, ga))
    out = {}
    for team, rows in acc.items():
        n = len(rows)
        out[team] = TeamOutcome(
            team_id=team,
            points=sum(r[0] for r in rows) / n,
            goals_for=sum(r[1] for r in rows) / n,
            goals_against=sum(r[2] for r in rows) / n,
        )
    return out


def load_outcomes(path: str | Path) -> dict[int, TeamOutcome]:
    """Season outcome totals per team: team_id,points,goals_for,goals_against."""
    out: dict[int, TeamOutcome] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["team_id", "points", "goals_for", "goals_against"]:
            raise ValueError(f"{path}: missing or wrong outcomes header: {header}")
        for row in reader:
            if not row:
                continue
            out[int(row[0])] = TeamOutcome(
                team_id=int(row[0]),
                points=float(row[1]),
                goals_for=float(row[2]),
                goals_against=float(row[3]),
            )
    return out


def write_outcomes(outcomes: dict[int, TeamOutcome], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["team_id", "points", "goals_for", "goals_against"])
        for team in sorted(outcomes):
            o = outcomes[team]
            writer.writerow([o.team_id, repr(o.points), repr(o.goals_for), repr(o.goals_against)])


@dataclass(frozen=True)
class CorrelationRow:
    level: str
    index: str
    outcome: str
    r: float  # NaN when undefined
    band: str
    n: int


def correlation_report(
    season_rows: list[TeamSeasonValue],
    outcomes: dict[int, TeamOutcome],
    level: str,
) -> list[CorrelationRow]:
    """r and band for every index/outcome pair across teams.

    Undefined correlations (constant column) become NaN rows banded
    "undefined" rather than errors, so one degenerate column cannot sink a
    whole report.
    """
    teams = [r.team_id for r in season_rows if r.team_id in outcomes]
    if len(teams) < 3:
        raise UndefinedMetricError("correlation report needs at least 3 teams")
    by_team = {r.team_id: r for r in season_rows}
    rows: list[CorrelationRow] = []
    for index in INDICES:
        x = [getattr(by_team[t], index) for t in teams]
        for outcome in OUTCOMES:
            y = [getattr(outcomes[t], outcome) for t in teams]
            try:
                r = pearson_r(x, y)
                band = guilford_band(r)
            except UndefinedMetricError:
                r = float("nan")
                band = "undefined"
            rows.append(
                CorrelationRow(level=level, index=index, outcome=outcome,
                               r=r, band=band, n=len(teams))
            )
    return rows


def write_correlations_csv(rows: list[CorrelationRow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["level", "index", "outcome", "r", "band", "n"])
        for row in rows:
            writer.writerow(
                [row.level, row.index, row.outcome, repr(row.r), row.band, row.n]
            )


def write_scatter_csv(
    season_rows: list[TeamSeasonValue],
    team_names: dict[int, str],
    path: str | Path,
) -> None:
    """Per-team recovery/attacked means plus the league means, plot-ready."""
    n = len(season_rows)
    mean_rec = sum(r.r_recoveries for r in season_rows) / n if n else 0.0
    mean_att = sum(r.r_attacked for r in season_rows) / n if n else 0.0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["team_id", "name", "r_recoveries", "r_attacked", "r_vdep"])
        for r in season_rows:
            writer.writerow(
                [r.team_id, team_names.get(r.team_id, str(r.team_id)),
                 repr(r.r_recoveries), repr(r.r_attacked), repr(r.r_vdep)]
            )
        writer.writerow(["league", "league mean", repr(mean_rec), repr(mean_att), ""])
