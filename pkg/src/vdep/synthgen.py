"""Deterministic synthetic match generator, calibrated to realistic event
frequencies, used as the desk-scale stand-in for a proprietary feed and as
the oracle source for end-to-end tests.

A match is a sequence of possessions. Each possession draws a length, a
pressing latent (how tightly the defense closes down the carrier) and a
progress latent (how fast the ball moves upfield); geometry always follows
the latents, while the possession's fate couples to them only through the
configured signal strengths:

* recovery ending:  P = sigmoid(a_rec + signal_recovery * pressing)
* attacked ending:  P = sigmoid(a_att + signal_attacked * progress)

so at zero signal strength the outcomes are independent of everything a
classifier can see. The nearest defender's distance to the ball shrinks
with the pressing latent (and tightens toward the possession's end), the
other defenders are drawn independently so the planted signal stays
concentrated in the closest one; the ball's upfield drift follows the
progress latent. Goals land on the last event of a slice of attacked
possessions, preferring long build-ups with an occasional fast break,
which keeps goals-conceded-while-attacking rare relative to goals scored.

Team-quality latents shift pressing/progress per matchup and scale goal
probability, so better teams recover more, get attacked less and win more;
reported season goal counts correlate with attack quality to feed the
opponent-strength feature.

Everything is seeded: streams derive from (seed, purpose, match_id), so a
corpus is byte-reproducible and matches generate independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import TeamOutcome, winning_points
from .domain import (
    ActionType,
    Event,
    LabelSet,
    MatchRecord,
    TrackingFrame,
    attacks_toward_high_x,
)
from .ingestion import Corpus, TeamInfo
from .labeling import K_VAEP_DEFAULT, K_VDEP_DEFAULT

# empirical correction factors frozen from calibration runs of the default
# config (scripts/calibrate_synthgen.py); they absorb window effects the
# closed-form rate algebra below does not see (period truncation, windows
# spilling across possessions)
_RECOVERY_RATE_FUDGE = 0.960
_ATTACKED_RATE_FUDGE = 0.639
_SCORES_POS_PER_GOAL = 10.15
_CONCEDES_POS_PER_FAST_GOAL = 8.6

# build-up goals stretch their possession past the goal label window, so
# conceding-while-attacking positives come only from fast breaks
_GOAL_SLOW_MIN_LEN_MARGIN = 1  # slow goal length = k_vaep + this
_FAST_BREAK_LEN = 2

_POSSESSION_MEAN_LEN = 3.5
_POSSESSION_CAP = 30
_CALIBRATION_SAMPLES = 200_000

# action tables are conditioned only on the PAST (how the possession began),
# never on how it will end: any action signature of the upcoming boundary
# would hand classifiers a shortcut that survives zero signal strength
_IN_POSSESSION_ACTIONS = (
    (ActionType.PASS, 0.5), (ActionType.DRIBBLE, 0.19), (ActionType.TRAP, 0.14),
    (ActionType.CROSS, 0.05), (ActionType.SHOT, 0.04), (ActionType.PENALTY_KICK, 0.002),
    (ActionType.OWN_GOAL, 0.001), (ActionType.OFFSIDE, 0.007), (ActionType.THROW_IN, 0.02),
    (ActionType.FREE_KICK, 0.02), (ActionType.FOUL, 0.02), (ActionType.BLOCK, 0.01),
)
_RECOVERY_ACTIONS = (
    (ActionType.INTERCEPTION, 0.45), (ActionType.TACKLE, 0.3),
    (ActionType.GK_CATCH, 0.1), (ActionType.CLEARANCE, 0.1), (ActionType.BLOCK, 0.05),
)
_BOX_RESTART_ACTIONS = (
    (ActionType.GOAL_KICK, 0.6), (ActionType.GK_HAND_CLEAR, 0.2), (ActionType.GK_CATCH, 0.2),
)
_NEUTRAL_RESTART_ACTIONS = (
    (ActionType.THROW_IN, 0.5), (ActionType.FREE_KICK, 0.3), (ActionType.GOAL_KICK, 0.2),
)


@dataclass(frozen=True)
class GenConfig:
    """Corpus shape, positive-rate targets and planted-signal strengths."""

    n_teams: int = 18
    n_weeks: int = 5
    matches_per_week: int = 9
    events_per_match: int = 2163
    recovery_pos: float = 0.363
    attacked_pos: float = 0.137
    scores_pos: float = 0.0077
    concedes_pos: float = 0.0023
    k_vdep: int = K_VDEP_DEFAULT
    k_vaep: int = K_VAEP_DEFAULT
    signal_recovery: float = 2.4
    signal_attacked: float = 3.0
    team_spread: float = 0.35
    seed: int = 7

    def validate(self) -> None:
        if self.n_teams < 2 or self.n_weeks < 1 or self.matches_per_week < 1:
            raise ValueError("league shape values must be positive")
        if self.matches_per_week > self.n_teams // 2:
            raise ValueError("matches_per_week cannot exceed n_teams // 2")
        if self.events_per_match < 20:
            raise ValueError("events_per_match must be at least 20")
        for name in ("recovery_pos", "attacked_pos", "scores_pos", "concedes_pos"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must be a rate in (0, 1)")
        if self.signal_recovery < 0 or self.signal_attacked < 0:
            raise ValueError("signal strengths must be non-negative")


@dataclass(frozen=True)
class GeneratedCorpus:
    corpus: Corpus
    truth: dict[int, LabelSet]  # independently derived ground-truth labels
    outcomes: dict[int, TeamOutcome]  # season totals over the generated weeks
    config: GenConfig


# --- closed-form rate calibration ----------------------------------------

def _length_pmf() -> np.ndarray:
    """P(L = l) for l = 1..cap with the tail lumped into the cap.

    Lengths are geometric: a memoryless per-event continuation hazard means
    the distance from any event to the next possession boundary cannot be
    predicted from the event's position, so at zero signal strength the
    window labels carry no learnable structure at all.
    """
    p_end = 1.0 / _POSSESSION_MEAN_LEN
    pmf = np.zeros(_POSSESSION_CAP + 1)
    for l in range(1, _POSSESSION_CAP):
        pmf[l] = p_end * (1.0 - p_end) ** (l - 1)
    pmf[_POSSESSION_CAP] = 1.0 - pmf.sum()
    return pmf


def _expected_min(pmf: np.ndarray, k: int, shift: int = 0) -> float:
    return float(sum(p * min(max(l - shift, 0), k) for l, p in enumerate(pmf)))


def _solve_intercept(target: float, signal: float, latent_sd: float) -> float:
    """Intercept a with E_z[sigmoid(a + signal*z)] = target, z ~ N(0, latent_sd).

    Solved by bisection against a fixed Monte-Carlo sample, so the marginal
    outcome rate hits the target without distributional approximations.
    """
    if not 0.0 < target < 1.0:
        raise ValueError(f"outcome rate target {target} out of range")
    z = np.random.default_rng(0xCA1).standard_normal(_CALIBRATION_SAMPLES) * latent_sd
    lo, hi = -30.0, 30.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if np.mean(1.0 / (1.0 + np.exp(-(mid + signal * z)))) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class _Calibration:
    q_recovery_intercept: float
    q_attacked_intercept: float
    p_goal: float  # per attacked possession
    fast_break_share: float
    latent_sd: float


def _calibrate(cfg: GenConfig) -> _Calibration:
    pmf = _length_pmf()
    mean_len = float(sum(l * p for l, p in enumerate(pmf)))
    latent_sd = math.sqrt(1.0 + cfg.team_spread**2)

    q_rec = cfg.recovery_pos * mean_len / _expected_min(pmf, cfg.k_vdep) * _RECOVERY_RATE_FUDGE
    q_att_marginal = (
        cfg.attacked_pos * mean_len / _expected_min(pmf, cfg.k_vdep, shift=1)
        * _ATTACKED_RATE_FUDGE
    )
    q_att = q_att_marginal / (1.0 - q_rec)
    if not 0 < q_rec < 1 or not 0 < q_att < 1:
        raise ValueError("rate targets are unreachable with the possession geometry")

    goals_per_match = cfg.scores_pos * cfg.events_per_match / _SCORES_POS_PER_GOAL
    fast_goals = cfg.concedes_pos * cfg.events_per_match / _CONCEDES_POS_PER_FAST_GOAL
    fast_share = min(max(fast_goals / goals_per_match, 0.0), 0.9)
    possessions_per_match = cfg.events_per_match / mean_len
    attacked_possessions = possessions_per_match * (1.0 - q_rec) * q_att
    p_goal = goals_per_match / attacked_possessions if attacked_possessions > 0 else 0.0

    return _Calibration(
        q_recovery_intercept=_solve_intercept(q_rec, cfg.signal_recovery, latent_sd),
        q_attacked_intercept=_solve_intercept(q_att, cfg.signal_attacked, latent_sd),
        p_goal=min(p_goal, 0.9),
        fast_break_share=fast_share,
        latent_sd=latent_sd,
    )


# --- schedule -------------------------------------------------------------

def round_robin_schedule(cfg: GenConfig) -> list[tuple[int, int, int, int]]:
    """(match_id, week, home, away) rows via the circle method."""
    teams = list(range(1, cfg.n_teams + 1))
    if len(teams) % 2:
        teams.append(0)  # bye marker
    half = len(teams) // 2
    rows = []
    rotation = teams[1:]
    n_rounds = len(teams) - 1
    for week in range(1, cfg.n_weeks + 1):
        r = (week - 1) % n_rounds
        rot = rotation[r:] + rotation[:r]
        order = [teams[0]] + rot
        pairs = [(order[i], order[-(i + 1)]) for i in range(half)]
        pairs = [p for p in pairs if 0 not in p][: cfg.matches_per_week]
        for idx, (a, b) in enumerate(pairs):
            home, away = (a, b) if (week + idx) % 2 == 0 else (b, a)
            rows.append((week * 1000 + idx + 1, week, home, away))
    return rows


# --- per-match generation --------------------------------------------------

def _pick_action(rng: np.random.Generator, table) -> ActionType:
    r = rng.random()
    acc = 0.0
    for action, w in table:
        acc += w
        if r < acc:
            return action
    return table[-1][0]


def _clip_xy(x: float, y: float) -> tuple[float, float]:
    return (min(max(x, 0.3), 104.7), min(max(y, 0.3), 67.7))


@dataclass
class _TeamQuality:
    attack: dict[int, float] = field(default_factory=dict)
    defense: dict[int, float] = field(default_factory=dict)


def _draw_team_quality(cfg: GenConfig) -> _TeamQuality:
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 1)))
    q = _TeamQuality()
    for team in range(1, cfg.n_teams + 1):
        q.attack[team] = float(rng.normal(0.0, cfg.team_spread))
        q.defense[team] = float(rng.normal(0.0, cfg.team_spread))
    return q


def _place_players(
    rng: np.random.Generator,
    ball: tuple[float, float],
    attacker: int,
    defender: int,
    d1: float,
    toward_goal: float,  # +1 when the attacker plays toward x=105, else -1
) -> tuple[tuple[int, int, float, float], ...]:
    players = []
    bx, by = ball
    # attackers cluster on the ball; the nearest one effectively carries it
    ax, ay = _clip_xy(bx + rng.normal(0, 0.5), by + rng.normal(0, 0.5))
    players.append((attacker, attacker * 100 + 1, ax, ay))
    for j in range(2, 12):
        r = 3.0 + rng.gamma(2.0, 5.0)
        th = rng.uniform(0.0, 2.0 * math.pi)
        x, y = _clip_xy(bx + r * math.cos(th), by + r * math.sin(th))
        players.append((attacker, attacker * 100 + j, x, y))
    # nearest defender carries the planted pressing distance, goal-side bias
    th = rng.normal(0.0, 0.8)
    dx = d1 * math.cos(th) * toward_goal
    dy = d1 * math.sin(th)
    x, y = _clip_xy(bx + dx, by + dy)
    players.append((defender, defender * 100 + 1, x, y))
    # the rest are drawn independently and further out, so the planted
    # signal stays in the closest defender
    for j in range(2, 12):
        r = rng.uniform(8.0, 34.0)
        th = rng.uniform(0.0, 2.0 * math.pi)
        x, y = _clip_xy(bx + r * math.cos(th), by + r * math.sin(th))
        players.append((defender, defender * 100 + j, x, y))
    # canonical frame order, matching what ingestion produces
    players.sort(key=lambda p: (p[0], p[1]))
    return tuple(players)


def generate_match(
    cfg: GenConfig,
    match_id: int,
    week: int,
    home: int,
    away: int,
    quality: _TeamQuality,
    cal: _Calibration,
) -> MatchRecord:
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 2, match_id)))
    events: list[Event] = []
    frames: list[TrackingFrame] = []
    goals = {home: 0, away: 0}

    event_id = 0
    first_half = cfg.events_per_match - cfg.events_per_match // 2
    for period, budget, opener in ((1, first_half, home), (2, cfg.events_per_match // 2, away)):
        t = 0.0
        produced = 0
        attacker = opener
        ball = (52.5, 34.0)  # kickoff
        pending_recovery_flag = False
        opener_was_attacked = False
        while produced < budget:
            defender = away if attacker == home else home
            z1 = float(rng.normal(0.0, 1.0))
            z2 = float(rng.normal(0.0, 1.0))
            rho = -0.35  # fast breaks meet less pressure
            press = z1 + quality.defense[defender]
            progress = rho * z1 + math.sqrt(1.0 - rho * rho) * z2 + quality.attack[attacker]
            length = min(int(rng.geometric(1.0 / _POSSESSION_MEAN_LEN)), _POSSESSION_CAP)
            length = min(length, budget - produced)

            p_rec = 1.0 / (1.0 + math.exp(-(cal.q_recovery_intercept + cfg.signal_recovery * press)))
            p_att = 1.0 / (1.0 + math.exp(-(cal.q_attacked_intercept + cfg.signal_attacked * progress)))
            outcome = "neutral"
            if rng.random() < p_rec:
                outcome = "recovery"
            elif rng.random() < p_att:
                outcome = "attacked"
            goal = False
            if outcome == "attacked":
                p_goal = cal.p_goal * math.exp(
                    0.8 * (quality.attack[attacker] - quality.defense[defender])
                )
                if rng.random() < min(p_goal, 0.95):
                    goal = True
                    if rng.random() < cal.fast_break_share:
                        length = _FAST_BREAK_LEN
                    else:
                        # build-up long enough that the goal window never
                        # reaches back into the opponent's possession
                        length = max(length, cfg.k_vaep + _GOAL_SLOW_MIN_LEN_MARGIN)
                    length = min(length, budget - produced)

            direction = 1.0 if attacks_toward_high_x(home, attacker, period) else -1.0
            for pos in range(length):
                event_id += 1
                duration = float(rng.uniform(1.2, 3.8))
                last = pos == length - 1
                if pos == 0:
                    if pending_recovery_flag:
                        action = _pick_action(rng, _RECOVERY_ACTIONS)
                    elif t == 0.0:
                        action = ActionType.PASS  # kickoff
                    elif opener_was_attacked:
                        action = _pick_action(rng, _BOX_RESTART_ACTIONS)
                    else:
                        action = _pick_action(rng, _NEUTRAL_RESTART_ACTIONS)
                else:
                    action = _pick_action(rng, _IN_POSSESSION_ACTIONS)

                step_scale = float(rng.uniform(0.6, 1.0))
                drift = 1.0 + 4.6 * progress
                step_x = float(rng.normal(drift, 2.6)) * direction
                step_y = float(rng.normal(0.0, 3.0))
                start = _clip_xy(*ball)
                end = _clip_xy(start[0] + step_x * step_scale, start[1] + step_y * step_scale)

                # pressing is constant within a possession: any position-
                # dependent shaping would leak time-to-boundary information
                d1 = math.exp(
                    math.log(3.2)
                    - 0.85 * press
                    + float(rng.normal(0.0, 0.3))
                )
                d1 = min(max(d1, 0.2), 30.0)
                frame_t = round(t * 25.0) / 25.0
                frames.append(
                    TrackingFrame(
                        period=period,
                        t=frame_t,
                        players=_place_players(rng, start, attacker, defender, d1, direction),
                        ball=start,
                    )
                )
                events.append(
                    Event(
                        event_id=event_id,
                        period=period,
                        t_start=round(t, 3),
                        t_end=round(t + duration * float(rng.uniform(0.55, 0.95)), 3),
                        action=action,
                        team_id=attacker,
                        player_id=attacker * 100 + int(rng.integers(1, 12)),
                        ball_start=start,
                        ball_end=end,
                        is_effective_attack=last and outcome == "attacked",
                        is_ball_recovery_boundary=pending_recovery_flag and pos == 0,
                        is_goal_scored=last and goal,
                    )
                )
                pending_recovery_flag = False
                t += duration
                ball = (end[0] + rng.normal(0.0, 0.8), end[1] + rng.normal(0.0, 0.8))

            produced += length
            if goal:
                goals[attacker] += 1
                ball = (52.5, 34.0)
            elif outcome == "attacked":
                # shot dealt with; the defense restarts from its own box
                new_attacker = defender
                nd = 1.0 if attacks_toward_high_x(home, new_attacker, period) else -1.0
                gx = 5.5 + float(rng.uniform(0.0, 8.0))
                x = gx if nd > 0 else 105.0 - gx
                ball = (x, 24.0 + float(rng.uniform(0.0, 20.0)))
            else:
                ball = (ball[0] + rng.normal(0.0, 2.0), ball[1] + rng.normal(0.0, 2.0))
            pending_recovery_flag = outcome == "recovery"
            opener_was_attacked = outcome == "attacked"
            attacker = defender

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


# --- ground-truth labels (independent window scan) -------------------------

def derive_truth_labels(events, k_vdep: int, k_vaep: int) -> LabelSet:
    """Slice-and-filter window scan, kept separate from the labeling module
    so the two implementations can cross-check each other."""
    n = len(events)
    rec, att, sco, con = [], [], [], []
    for i in range(n):
        e = events[i]
        near = [f for f in events[i + 1 : i + 1 + k_vdep] if f.period == e.period]
        far = [f for f in events[i + 1 : i + 1 + k_vaep] if f.period == e.period]
        rec.append(int(any(f.is_ball_recovery_boundary and f.team_id != e.team_id for f in near)))
        att.append(int(any(f.is_effective_attack and f.team_id == e.team_id for f in near)))
        sco.append(int(any(f.is_goal_scored and f.team_id == e.team_id for f in far)))
        con.append(int(any(f.is_goal_scored and f.team_id != e.team_id for f in far)))
    return LabelSet(recovery=tuple(rec), attacked=tuple(att), scores=tuple(sco), concedes=tuple(con))


# --- corpus assembly --------------------------------------------------------

def _team_table(cfg: GenConfig, quality: _TeamQuality) -> dict[int, TeamInfo]:
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 3)))
    table = {}
    for team in range(1, cfg.n_teams + 1):
        goals = 40.0 + 22.0 * math.tanh(quality.attack[team]) + float(rng.normal(0.0, 3.0))
        table[team] = TeamInfo(team, f"team-{team:02d}", float(round(max(goals, 8.0))))
    return table


def generate(cfg: GenConfig = GenConfig()) -> GeneratedCorpus:
    """Build the full synthetic corpus with ground-truth labels and outcomes."""
    cfg.validate()
    cal = _calibrate(cfg)
    quality = _draw_team_quality(cfg)
    schedule = round_robin_schedule(cfg)

    matches = []
    truth: dict[int, LabelSet] = {}
    tally: dict[int, list[int]] = {t: [0, 0, 0] for t in range(1, cfg.n_teams + 1)}
    for match_id, week, home, away in schedule:
        m = generate_match(cfg, match_id, week, home, away, quality, cal)
        matches.append(m)
        truth[match_id] = derive_truth_labels(m.events, cfg.k_vdep, cfg.k_vaep)
        for team, gf, ga in ((home, m.home_goals, m.away_goals), (away, m.away_goals, m.home_goals)):
            tally[team][0] += winning_points(gf, ga)
            tally[team][1] += gf
            tally[team][2] += ga

    outcomes = {
        t: TeamOutcome(team_id=t, points=float(v[0]), goals_for=float(v[1]), goals_against=float(v[2]))
        for t, v in tally.items()
    }
    corpus = Corpus(matches=tuple(matches), team_table=_team_table(cfg, quality))
    return GeneratedCorpus(corpus=corpus, truth=truth, outcomes=outcomes, config=cfg)


def truth_label_rates(gen: GeneratedCorpus) -> dict[str, float]:
    """Realized positive-label rates over the whole corpus."""
    totals = {"recovery": 0, "attacked": 0, "scores": 0, "concedes": 0}
    n = 0
    for ls in gen.truth.values():
        totals["recovery"] += sum(ls.recovery)
        totals["attacked"] += sum(ls.attacked)
        totals["scores"] += sum(ls.scores)
        totals["concedes"] += sum(ls.concedes)
        n += len(ls.recovery)
    return {k: v / n for k, v in totals.items()}


def write_truth_labels(gen: GeneratedCorpus, path) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["match_id", "event_id", "recovery", "attacked", "scores", "concedes"])
        for m in gen.corpus.matches:
            ls = gen.truth[m.match_id]
            for i, e in enumerate(m.events):
                writer.writerow(
                    [m.match_id, e.event_id, ls.recovery[i], ls.attacked[i], ls.scores[i], ls.concedes[i]]
                )
