import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vdep.labeling import label_attacked, label_goals, label_match, label_recovery

from conftest import make_event, random_event_stream


def scan_oracle(events, i, k, predicate):
    """Exhaustive O(N*k) window scan, written independently of the library."""
    hits = 0
    for j in range(i + 1, min(i + k, len(events) - 1) + 1):
        if events[j].period != events[i].period:
            break
        if predicate(events[i], events[j]):
            hits += 1
    return int(hits > 0)


def oracle_recovery(events, i, k):
    return scan_oracle(
        events, i, k,
        lambda e, f: f.is_ball_recovery_boundary and f.team_id != e.team_id,
    )


def oracle_attacked(events, i, k):
    return scan_oracle(
        events, i, k, lambda e, f: f.is_effective_attack and f.team_id == e.team_id
    )


def oracle_goals(events, i, k):
    s = scan_oracle(events, i, k, lambda e, f: f.is_goal_scored and f.team_id == e.team_id)
    c = scan_oracle(events, i, k, lambda e, f: f.is_goal_scored and f.team_id != e.team_id)
    return s, c


class TestRecovery:
    def test_within_window(self):
        events = [make_event(i, 1) for i in range(1, 8)]
        events[2] = make_event(3, 2, recovery=True)
        assert label_recovery(events, 0, 5) == 1

    def test_outside_window(self):
        events = [make_event(i, 1) for i in range(1, 9)]
        events[6] = make_event(7, 2, recovery=True)
        assert label_recovery(events, 0, 5) == 0

    def test_last_event_has_empty_window(self):
        events = [make_event(1, 1), make_event(2, 2, recovery=True)]
        assert label_recovery(events, 1, 5) == 0

    def test_own_team_flag_does_not_count(self):
        events = [make_event(1, 1), make_event(2, 1, recovery=True)]
        assert label_recovery(events, 0, 5) == 0

    def test_period_boundary_truncates(self):
        events = [make_event(1, 1, period=1), make_event(2, 2, period=2, recovery=True)]
        assert label_recovery(events, 0, 5) == 0


class TestAttacked:
    def test_next_event_attack(self):
        events = [make_event(1, 1), make_event(2, 1, attack=True)]
        assert label_attacked(events, 0, 5) == 1

    def test_no_flag_in_window(self):
        events = [make_event(i, 1) for i in range(1, 8)]
        assert label_attacked(events, 0, 5) == 0

    def test_opponent_attack_does_not_count(self):
        events = [make_event(1, 1), make_event(2, 2, attack=True)]
        assert label_attacked(events, 0, 5) == 0


class TestGoals:
    def test_attacker_goal_scores_only(self):
        events = [make_event(i, 1) for i in range(1, 6)]
        events[3] = make_event(4, 1, goal=True)
        assert label_goals(events, 0, 10) == (1, 0)

    def test_defender_goal_concedes(self):
        events = [make_event(1, 1), make_event(2, 2, goal=True)]
        assert label_goals(events, 0, 10) == (0, 1)

    def test_no_goal(self):
        events = [make_event(i, 1) for i in range(1, 6)]
        assert label_goals(events, 0, 10) == (0, 0)


class TestAgainstOracle:
    def test_random_streams_match_oracle(self, rng):
        for _ in range(60):
            n = int(rng.integers(2, 40))
            events = random_event_stream(rng, n, period_split=int(rng.integers(0, n + 1)))
            k = int(rng.integers(1, 8))
            for i in range(n):
                assert label_recovery(events, i, k) == oracle_recovery(events, i, k)
                assert label_attacked(events, i, k) == oracle_attacked(events, i, k)
                assert label_goals(events, i, k) == oracle_goals(events, i, k)

    def test_label_match_consistency(self, rng):
        events = random_event_stream(rng, 50)
        ls = label_match(events, k_vdep=5, k_vaep=10)
        for i in range(50):
            assert ls.recovery[i] == label_recovery(events, i, 5)
            assert ls.attacked[i] == label_attacked(events, i, 5)
            assert (ls.scores[i], ls.concedes[i]) == label_goals(events, i, 10)


@st.composite
def flagged_streams(draw):
    n = draw(st.integers(min_value=2, max_value=30))
    split = draw(st.integers(min_value=0, max_value=n))
    seed = draw(st.integers(min_value=0, max_value=2**31))
    return random_event_stream(np.random.default_rng(seed), n, period_split=split)


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(flagged_streams(), st.integers(min_value=1, max_value=9), st.integers(min_value=0, max_value=29))
    def test_monotone_in_k(self, events, k, i):
        if i >= len(events):
            return
        if label_recovery(events, i, k) == 1:
            assert label_recovery(events, i, k + 1) == 1
        if label_attacked(events, i, k) == 1:
            assert label_attacked(events, i, k + 1) == 1
        s, c = label_goals(events, i, k)
        s2, c2 = label_goals(events, i, k + 1)
        assert s2 >= s and c2 >= c

    @settings(max_examples=40, deadline=None)
    @given(flagged_streams(), st.integers(min_value=1, max_value=6))
    def test_labels_ignore_the_past(self, events, k):
        # mutate flags strictly before index i; labels at i must not move
        i = len(events) // 2
        before = (
            label_recovery(events, i, k),
            label_attacked(events, i, k),
            label_goals(events, i, k),
        )
        mutated = list(events)
        for j in range(i):
            e = mutated[j]
            mutated[j] = e.__class__(**{
                **e.__dict__,
                "is_effective_attack": not e.is_effective_attack,
                "is_ball_recovery_boundary": not e.is_ball_recovery_boundary,
                "is_goal_scored": not e.is_goal_scored,
            })
        after = (
            label_recovery(mutated, i, k),
            label_attacked(mutated, i, k),
            label_goals(mutated, i, k),
        )
        assert before == after

    def test_k_must_be_positive(self):
        events = [make_event(1, 1), make_event(2, 2)]
        with pytest.raises(ValueError):
            label_recovery(events, 0, 0)


class TestCalibratedRates:
    def test_rate_ordering_on_synthetic_corpus(self):
        from vdep.synthgen import GenConfig, generate, truth_label_rates

        gen = generate(GenConfig(n_teams=6, matches_per_week=3, n_weeks=5,
                                 events_per_match=700, seed=2))
        rates = truth_label_rates(gen)
        assert rates["recovery"] > rates["attacked"] > rates["scores"] > rates["concedes"]
