import numpy as np
import pytest

from vdep.domain import ActionType, Event, MatchRecord, TrackingFrame
from vdep.ingestion import TeamInfo

ACTIONS = list(ActionType)


def make_event(
    event_id,
    team_id,
    period=1,
    t_start=None,
    action=ActionType.PASS,
    start=(50.0, 30.0),
    end=(55.0, 32.0),
    attack=False,
    recovery=False,
    goal=False,
    player_id=None,
):
    t0 = float(event_id) * 2.5 if t_start is None else t_start
    return Event(
        event_id=event_id,
        period=period,
        t_start=t0,
        t_end=t0 + 1.5,
        action=action,
        team_id=team_id,
        player_id=player_id if player_id is not None else team_id * 100 + 1,
        ball_start=start,
        ball_end=end,
        is_effective_attack=attack,
        is_ball_recovery_boundary=recovery,
        is_goal_scored=goal,
    )


def make_frame(period, t, ball=(50.0, 30.0), teams=(1, 2), rng=None):
    players = []
    for team in teams:
        for j in range(1, 12):
            if rng is None:
                x, y = 30.0 + 3.0 * j, 20.0 + 2.0 * j
            else:
                x, y = rng.uniform(1, 104), rng.uniform(1, 67)
            players.append((team, team * 100 + j, x, y))
    return TrackingFrame(period=period, t=t, players=tuple(players), ball=ball)


def make_match(events, match_id=1, teams=(1, 2), week=1, frames=None):
    if frames is None:
        frames = tuple(
            make_frame(e.period, e.t_start, ball=e.ball_start, teams=teams) for e in events
        )
    home = events[0].team_id
    away = teams[0] if teams[1] == home else teams[1]
    goals = {teams[0]: 0, teams[1]: 0}
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


def make_team_table(team_ids, goals=40.0):
    return {t: TeamInfo(t, f"team-{t}", goals) for t in team_ids}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_event_stream(rng, n_events, teams=(1, 2), period_split=None, flag_rate=0.2):
    """Random flagged stream for labeling oracles; geometry is irrelevant."""
    if period_split is None:
        period_split = n_events // 2
    events = []
    for i in range(n_events):
        period = 1 if i < period_split else 2
        t = float(i if i < period_split else i - period_split) * 2.0
        events.append(
            make_event(
                event_id=i + 1,
                team_id=int(rng.choice(teams)),
                period=period,
                t_start=t,
                action=ACTIONS[int(rng.integers(len(ACTIONS)))],
                attack=bool(rng.random() < flag_rate),
                recovery=bool(rng.random() < flag_rate),
                goal=bool(rng.random() < 0.05),
            )
        )
    return events
