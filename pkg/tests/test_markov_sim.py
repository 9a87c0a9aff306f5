import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from latentseq import (
    SETTINGS,
    ContinuousTrajectory,
    JumpMatrix,
    ValidationError,
    discretize_locf,
    get_setting,
    simulate_cohort,
    simulate_trajectory,
)
from latentseq.markov_sim import as_prob_vector, simulate_jump_chain

TABLE2_TIMES = [0.0, 0.8009673, 1.9858932, 4.3168586, 5.1538039, 7.1767493, 8.9486051]
TABLE2_STATES = [1, 4, 2, 3, 1, 5, 1]
TABLE2_LOCF = [1, 4, 2, 2, 2, 3, 1, 1, 5, 1]


class TestJumpMatrix:
    def test_valid(self):
        J = JumpMatrix(0.25 * (np.ones((5, 5)) - np.eye(5)))
        assert J.size == 5
        assert not J.probs.flags.writeable

    @pytest.mark.parametrize(
        "probs",
        [
            [[0.5, 0.5], [1.0, 0.0]],  # nonzero diagonal
            [[0.0, 0.9], [1.0, 0.0]],  # row sum
            [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]],  # not square
            [[0.0]],  # C < 2
            [[0.0, 1.5, -0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]],  # out of range
        ],
    )
    def test_invalid(self, probs):
        with pytest.raises(ValidationError):
            JumpMatrix(np.array(probs))

    def test_prob_vector(self):
        np.testing.assert_array_equal(as_prob_vector(None, 4), np.full(4, 0.25))
        with pytest.raises(ValidationError):
            as_prob_vector([0.5, 0.6], 2)
        with pytest.raises(ValidationError):
            as_prob_vector([1.0], 2)


def test_settings_validate_and_setting2_is_permutation():
    for s in SETTINGS.values():
        assert s.n_classes == 3 and s.n_states == 5
    P = SETTINGS[2].matrices[0].probs
    assert set(np.unique(P)) == {0.0, 1.0}
    assert (P.sum(axis=0) == 1).all() and (P.sum(axis=1) == 1).all()
    assert get_setting("2").name == get_setting("Setting2").name == get_setting(2).name == "Setting2"
    with pytest.raises(ValidationError):
        get_setting(7)


def test_cycle_is_followed_exactly():
    traj = simulate_trajectory(SETTINGS[2].matrices[0], [1, 0, 0, 0, 0], 200.0, seed=3)
    expected = (np.arange(traj.states.size) % 5) + 1
    np.testing.assert_array_equal(traj.states, expected)
    assert traj.times[0] == 0.0 and np.all(np.diff(traj.times) > 0) and traj.times[-1] <= 200.0


def test_horizon_before_first_jump():
    traj = simulate_trajectory(SETTINGS[1].matrices[0], None, 0.5, seed=0, sojourn="constant")
    assert traj.events == [(0.0, traj.states[0])]
    tiny = simulate_trajectory(SETTINGS[1].matrices[0], None, 1e-12, seed=0)
    assert len(tiny.events) == 1


def test_constant_sojourn_lands_on_integers():
    traj = simulate_trajectory(SETTINGS[1].matrices[1], None, 10, seed=1, sojourn="constant")
    np.testing.assert_array_equal(traj.times, np.arange(11.0))


def test_trajectory_is_deterministic():
    a = simulate_trajectory(SETTINGS[1].matrices[2], None, 44, seed=9)
    b = simulate_trajectory(SETTINGS[1].matrices[2], None, 44, seed=9)
    np.testing.assert_array_equal(a.times, b.times)
    np.testing.assert_array_equal(a.states, b.states)


def test_next_state_frequencies_from_state_2():
    chain = simulate_jump_chain(SETTINGS[1].matrices[1], None, 100_000, seed=21)
    after_two = chain[1:][chain[:-1] == 2]
    freq = np.bincount(after_two, minlength=6)[1:] / after_two.size
    np.testing.assert_allclose(freq, [0.7, 0, 0.1, 0.1, 0.1], atol=0.01)


@pytest.mark.parametrize("setting,cls", [(1, 2), (3, 1), (4, 2)])
def test_jump_frequencies_within_three_standard_errors(setting, cls):
    P = SETTINGS[setting].matrices[cls].probs
    chain = simulate_jump_chain(SETTINGS[setting].matrices[cls], None, 50_000, seed=setting * 10 + cls)
    for c in range(1, 6):
        nxt = chain[1:][chain[:-1] == c]
        freq = np.bincount(nxt, minlength=6)[1:] / nxt.size
        se = np.sqrt(P[c - 1] * (1 - P[c - 1]) / nxt.size)
        assert np.all(np.abs(freq - P[c - 1]) <= 3 * se + 1e-12)


def test_trajectory_validation():
    with pytest.raises(ValidationError):
        ContinuousTrajectory(np.array([0.0, 1.0, 1.0]), np.array([1, 2, 3]), 5.0)
    with pytest.raises(ValidationError):
        ContinuousTrajectory(np.array([0.0, 1.0]), np.array([2, 2]), 5.0)
    with pytest.raises(ValidationError):
        ContinuousTrajectory(np.array([0.5]), np.array([2]), 5.0)
    with pytest.raises(ValidationError):
        simulate_trajectory(SETTINGS[1].matrices[0], None, 0.0, seed=0)


class TestDiscretize:
    def test_table2(self):
        traj = ContinuousTrajectory(np.array(TABLE2_TIMES), np.array(TABLE2_STATES), 9.0)
        seq = discretize_locf(traj, 9)
        assert seq.states.tolist() == TABLE2_LOCF
        np.testing.assert_array_equal(seq.times, np.arange(10))

    def test_single_event(self):
        traj = ContinuousTrajectory(np.array([0.0]), np.array([3]), 5.0)
        assert discretize_locf(traj, 5).states.tolist() == [3] * 6

    def test_last_event_in_bucket_wins(self):
        traj = ContinuousTrajectory(np.array([0.0, 0.1, 0.9]), np.array([1, 2, 4]), 3.0)
        assert discretize_locf(traj, 3).states.tolist() == [1, 4, 4, 4]

    def test_bad_T(self):
        traj = ContinuousTrajectory(np.array([0.0]), np.array([3]), 5.0)
        with pytest.raises(ValidationError):
            discretize_locf(traj, 0)

    @given(
        gaps=st.lists(st.floats(0.01, 3.0), min_size=0, max_size=30),
        moves=st.lists(st.integers(1, 4), min_size=30, max_size=30),
        T=st.integers(1, 30),
    )
    def test_bucket_rule(self, gaps, moves, T):
        times = np.r_[0.0, np.cumsum(gaps)]
        keep = np.r_[True, np.diff(times) > 0]
        times = times[keep]
        states = (np.cumsum([0] + moves[: times.size - 1]) % 5) + 1
        seq = discretize_locf(ContinuousTrajectory(times, states, float(T)), T)
        assert len(seq) == T + 1
        # replay: the state at t is that of the last event whose ceiling time is at most t
        for t in range(T + 1):
            owners = np.flatnonzero(np.ceil(times) <= t)
            assert seq.states[t] == states[owners[-1]]


class TestCohort:
    def test_shape_and_labels(self, setting1_cohort):
        assert len(setting1_cohort) == 600
        assert {len(s) for s in setting1_cohort} == {45}
        labels = np.array([s.true_class for s in setting1_cohort])
        assert np.bincount(labels).tolist() == [0, 200, 200, 200]
        assert [s.id for s in setting1_cohort[:3]] == ["1", "2", "3"]

    def test_rejects_bad_sizes(self):
        with pytest.raises(ValidationError):
            simulate_cohort(SETTINGS[1], [1, 0, 1], 10)
        with pytest.raises(ValidationError):
            simulate_cohort(SETTINGS[1], [5, 5], 10)

    def test_deterministic(self):
        a = simulate_cohort(SETTINGS[4], [10, 10, 10], 44, seed=3)
        b = simulate_cohort(SETTINGS[4], [10, 10, 10], 44, seed=3)
        assert all(np.array_equal(x.states, y.states) and x.id == y.id for x, y in zip(a, b))
        c = simulate_cohort(SETTINGS[4], [10, 10, 10], 44, seed=4)
        assert any(not np.array_equal(x.states, y.states) for x, y in zip(a, c))

    def test_individual_streams_do_not_depend_on_later_classes(self):
        a = simulate_cohort(SETTINGS[1], [5, 5, 5], 30, seed=8)
        b = simulate_cohort(SETTINGS[1], [5, 9, 2], 30, seed=8)
        for x, y in zip(a[:5], b[:5]):
            np.testing.assert_array_equal(x.states, y.states)

    def test_init_point_mass(self):
        cohort = simulate_cohort(SETTINGS[1], [5, 5, 5], 10, init=[0, 0, 1, 0, 0], seed=2)
        assert {s.states[0] for s in cohort} == {3}
