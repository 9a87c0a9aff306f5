"""Class-labeled ordinal trajectories from continuous-time Markov jump processes.

A latent class is described by the embedded jump chain of a jump process on
states ``1..C``: on leaving state ``c`` the next state is drawn from row ``c`` of
a zero-diagonal :class:`JumpMatrix`, and the time spent in each state is an
exponential sojourn.  Continuous trajectories are mapped to an integer grid
``t = 0..T`` by taking the ceiling of each event time and carrying the last
observed state forward.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from latentseq.exceptions import ValidationError

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class JumpMatrix:
    """Embedded-chain transition probabilities for one latent class.

    ``probs[p, q]`` is the probability that the state following ``p + 1`` is
    ``q + 1``.  Rows sum to one and the diagonal is exactly zero.
    """

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 2 or probs.shape[0] != probs.shape[1]:
            raise ValidationError(f"jump matrix must be square, got shape {probs.shape}")
        if probs.shape[0] < 2:
            raise ValidationError("jump matrix needs at least 2 states")
        if not np.all(np.isfinite(probs)) or probs.min() < 0.0 or probs.max() > 1.0:
            raise ValidationError("jump matrix entries must lie in [0, 1]")
        if np.any(np.diag(probs) != 0.0):
            raise ValidationError("jump matrix diagonal must be exactly 0")
        sums = probs.sum(axis=1)
        if np.max(np.abs(sums - 1.0)) > ROW_SUM_TOL:
            raise ValidationError(f"jump matrix rows must sum to 1, got {sums}")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def size(self) -> int:
        return self.probs.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.probs, dtype=dtype)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, JumpMatrix):
            return NotImplemented
        return self.probs.shape == other.probs.shape and bool(np.all(self.probs == other.probs))

    __hash__ = None  # type: ignore[assignment]


def as_prob_vector(weights: Sequence[float] | np.ndarray | None, size: int) -> np.ndarray:
    """Validate an initial-state law over ``1..size``; ``None`` means uniform."""
    if weights is None:
        return np.full(size, 1.0 / size)
    w = np.array(weights, dtype=float)
    if w.shape != (size,):
        raise ValidationError(f"initial distribution must have {size} entries, got {w.shape}")
    if not np.all(np.isfinite(w)) or w.min() < 0.0:
        raise ValidationError("initial distribution entries must be nonnegative")
    if abs(w.sum() - 1.0) > ROW_SUM_TOL:
        raise ValidationError(f"initial distribution must sum to 1, got {w.sum()!r}")
    return w


@dataclass(frozen=True, eq=False)
class SimulationSetting:
    name: str
    matrices: tuple[JumpMatrix, ...]
    sojourn_rate: float = 1.0

    def __post_init__(self) -> None:
        if not self.matrices:
            raise ValidationError("a setting needs at least one class matrix")
        sizes = {m.size for m in self.matrices}
        if len(sizes) != 1:
            raise ValidationError("all class matrices in a setting must share the state count")
        if not self.sojourn_rate > 0:
            raise ValidationError("sojourn_rate must be positive")

    @property
    def n_classes(self) -> int:
        return len(self.matrices)

    @property
    def n_states(self) -> int:
        return self.matrices[0].size


_S1_L1 = 0.25 * (np.ones((5, 5)) - np.eye(5))
_S1_L2 = [
    [0, 0.25, 0.25, 0.25, 0.25],
    [0.7, 0, 0.1, 0.1, 0.1],
    [0.7, 0.1, 0, 0.1, 0.1],
    [0.7, 0.1, 0.1, 0, 0.1],
    [0.7, 0.1, 0.1, 0.1, 0],
]
_S1_L3 = [
    [0, 0.4, 0.4, 0.1, 0.1],
    [0.1, 0, 0.7, 0.1, 0.1],
    [0.1, 0.7, 0, 0.1, 0.1],
    [0.1, 0.4, 0.4, 0, 0.1],
    [0.1, 0.4, 0.4, 0.1, 0],
]
_S2_L1 = [
    [0, 1, 0, 0, 0],
    [0, 0, 1, 0, 0],
    [0, 0, 0, 1, 0],
    [0, 0, 0, 0, 1],
    [1, 0, 0, 0, 0],
]
_S3_L2 = [
    [0, 0.25, 0.25, 0.25, 0.25],
    [0.7, 0, 0.02, 0.16, 0.12],
    [0.7, 0.08, 0, 0.12, 0.1],
    [0.7, 0.21, 0.05, 0, 0.04],
    [0.7, 0.09, 0.18, 0.03, 0],
]
_S3_L3 = [
    [0, 0.4, 0.4, 0.07, 0.13],
    [0.2, 0, 0.7, 0.05, 0.05],
    [0.08, 0.7, 0, 0.12, 0.1],
    [0.19, 0.4, 0.4, 0, 0.01],
    [0.05, 0.4, 0.4, 0.15, 0],
]
_S4_L2 = [
    [0, 0.25, 0.25, 0.25, 0.25],
    [0.9, 0, 0.05, 0.04, 0.01],
    [0.8, 0.05, 0, 0.1, 0.05],
    [0.8, 0.03, 0.08, 0, 0.09],
    [0.8, 0.15, 0.03, 0.02, 0],
]
_S4_L3 = [
    [0, 0.1, 0.05, 0.05, 0.8],
    [0.6, 0, 0.05, 0.05, 0.3],
    [0.5, 0.05, 0, 0.1, 0.35],
    [0.3, 0.12, 0.08, 0, 0.5],
    [0.8, 0.15, 0.03, 0.02, 0],
]


def _setting(name: str, *mats) -> SimulationSetting:
    return SimulationSetting(name=name, matrices=tuple(JumpMatrix(np.array(m, dtype=float)) for m in mats))


SETTINGS: dict[int, SimulationSetting] = {
    1: _setting("Setting1", _S1_L1, _S1_L2, _S1_L3),
    2: _setting("Setting2", _S2_L1, _S1_L2, _S1_L3),
    3: _setting("Setting3", _S1_L1, _S3_L2, _S3_L3),
    4: _setting("Setting4", _S1_L1, _S4_L2, _S4_L3),
}


def get_setting(key: int | str, sojourn_rate: float = 1.0) -> SimulationSetting:
    """Look up a built-in setting by number (``2``, ``"2"``) or name (``"Setting2"``)."""
    text = str(key).strip()
    if text.lower().startswith("setting"):
        text = text[len("setting"):]
    try:
        base = SETTINGS[int(text)]
    except (ValueError, KeyError):
        raise ValidationError(f"unknown setting {key!r}; choose one of 1, 2, 3, 4") from None
    if sojourn_rate == base.sojourn_rate:
        return base
    return SimulationSetting(base.name, base.matrices, sojourn_rate)


@dataclass(frozen=True, eq=False)
class ContinuousTrajectory:
    """Jump-process path: ``states[j]`` is entered at ``times[j]``.

    ``times[0] == 0``, times strictly increase, consecutive states differ.
    States are 1-based.
    """

    times: np.ndarray
    states: np.ndarray
    horizon: float

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=np.int64)
        if times.ndim != 1 or times.shape != states.shape or times.size == 0:
            raise ValidationError("trajectory needs matching, nonempty times and states")
        if times[0] != 0.0:
            raise ValidationError("first event must be at time 0")
        if np.any(np.diff(times) <= 0):
            raise ValidationError("event times must be strictly increasing")
        if np.any(states[1:] == states[:-1]):
            raise ValidationError("consecutive events must change state")
        if states.min() < 1:
            raise ValidationError("states are 1-based")
        if not self.horizon > 0:
            raise ValidationError("horizon must be positive")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @property
    def events(self) -> list[tuple[float, int]]:
        return list(zip(self.times.tolist(), self.states.tolist()))


@dataclass(eq=False)
class DiscreteSequence:
    """Ordinal states on an integer grid starting at ``t0``.

    Simulated sequences use ``t0 = 0``; ingested data are re-indexed from 1.
    """

    id: str
    states: np.ndarray
    true_class: int | None = None
    t0: int = 0

    def __post_init__(self) -> None:
        self.states = np.asarray(self.states, dtype=np.int64)
        if self.states.ndim != 1 or self.states.size < 1:
            raise ValidationError(f"sequence {self.id!r} must be a nonempty 1-d array")
        if self.states.min() < 1:
            raise ValidationError(f"sequence {self.id!r} has states below 1")
        self.id = str(self.id)

    def __len__(self) -> int:
        return int(self.states.size)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.t0, self.t0 + len(self))


class _NextState:
    """Inverse-CDF sampler for the rows of a jump matrix."""

    def __init__(self, probs: np.ndarray):
        cum = np.cumsum(probs, axis=1)
        cum /= cum[:, -1:]
        self._cum = [row.tolist() for row in cum]

    def __call__(self, state: int, u: float) -> int:
        return bisect.bisect_right(self._cum[state - 1], u) + 1


def _draw_initial(init: np.ndarray, rng: np.random.Generator) -> int:
    cum = np.cumsum(init)
    cum /= cum[-1]
    return bisect.bisect_right(cum.tolist(), float(rng.random())) + 1


def simulate_trajectory(
    jump: JumpMatrix,
    init: Sequence[float] | np.ndarray | None,
    horizon: float,
    seed: int | np.random.Generator | np.random.SeedSequence | None = None,
    *,
    sojourn_rate: float = 1.0,
    sojourn: str = "exponential",
) -> ContinuousTrajectory:
    """Simulate one jump-process path on ``[0, horizon]``.

    Sojourns are exponential with mean ``1 / sojourn_rate``; ``sojourn="constant"``
    uses a fixed duration ``1 / sojourn_rate`` instead.  The first event time
    exceeding ``horizon`` ends the path and is not recorded.
    """
    if not isinstance(jump, JumpMatrix):
        jump = JumpMatrix(jump)
    init_w = as_prob_vector(init, jump.size)
    if not horizon > 0:
        raise ValidationError("horizon must be positive")
    if not sojourn_rate > 0:
        raise ValidationError("sojourn_rate must be positive")
    if sojourn not in ("exponential", "constant"):
        raise ValidationError(f"unknown sojourn law {sojourn!r}")

    rng = np.random.default_rng(seed)
    step = _NextState(jump.probs)
    state = _draw_initial(init_w, rng)
    times = [0.0]
    states = [state]
    t = 0.0
    block = max(16, int(horizon * sojourn_rate * 1.2) + 8)
    while True:
        if sojourn == "exponential":
            gaps = rng.exponential(1.0 / sojourn_rate, size=block).tolist()
        else:
            gaps = [1.0 / sojourn_rate] * block
        us = rng.random(block).tolist()
        for gap, u in zip(gaps, us):
            t += gap
            if t > horizon:
                return ContinuousTrajectory(np.array(times), np.array(states), float(horizon))
            state = step(state, u)
            times.append(t)
            states.append(state)


def simulate_jump_chain(
    jump: JumpMatrix,
    init: Sequence[float] | np.ndarray | None,
    n_steps: int,
    seed: int | np.random.Generator | np.random.SeedSequence | None = None,
) -> np.ndarray:
    """States visited by the embedded chain: ``n_steps`` jumps after the initial draw."""
    if not isinstance(jump, JumpMatrix):
        jump = JumpMatrix(jump)
    init_w = as_prob_vector(init, jump.size)
    if n_steps < 0:
        raise ValidationError("n_steps must be nonnegative")
    rng = np.random.default_rng(seed)
    step = _NextState(jump.probs)
    state = _draw_initial(init_w, rng)
    out = np.empty(n_steps + 1, dtype=np.int64)
    out[0] = state
    for j, u in enumerate(rng.random(n_steps).tolist(), start=1):
        state = step(state, u)
        out[j] = state
    return out


def discretize_locf(traj: ContinuousTrajectory, T: int, id: str = "0", true_class: int | None = None) -> DiscreteSequence:
    """Map a path to the grid ``t = 0..T`` by ceiling event times and carrying states forward.

    When several events share a ceiling bucket, the latest one wins.
    """
    if int(T) != T or T < 1:
        raise ValidationError("T must be a positive integer")
    T = int(T)
    buckets = np.ceil(traj.times).astype(np.int64)
    keep = buckets <= T
    buckets, states = buckets[keep], traj.states[keep]
    # times are sorted, so the last event of each bucket ends a run of equal buckets
    last = np.r_[buckets[1:] != buckets[:-1], True]
    buckets, states = buckets[last], states[last]

    marker = np.full(T + 1, -1, dtype=np.int64)
    marker[buckets] = np.arange(buckets.size)
    filled = np.maximum.accumulate(marker)
    return DiscreteSequence(id=id, states=states[filled], true_class=true_class, t0=0)


def simulate_cohort(
    setting: SimulationSetting,
    class_sizes: Sequence[int],
    T: int,
    init: Sequence[float] | np.ndarray | None = None,
    seed: int | np.random.SeedSequence | None = 0,
    *,
    sojourn: str = "exponential",
) -> list[DiscreteSequence]:
    """Simulate ``sum(class_sizes)`` labeled sequences of length ``T + 1``.

    Individuals are emitted in class order with ids ``"1".."N"``.  Each one
    draws from its own child of ``SeedSequence(seed)``, so the cohort does not
    depend on evaluation order.
    """
    sizes = [int(n) for n in class_sizes]
    if len(sizes) != setting.n_classes:
        raise ValidationError(f"{setting.name} has {setting.n_classes} classes, got {len(sizes)} class sizes")
    if any(n < 1 for n in sizes):
        raise ValidationError(f"every class needs at least one individual, got {sizes}")
    init_w = as_prob_vector(init, setting.n_states)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(sum(sizes))

    cohort = []
    i = 0
    for k, n in enumerate(sizes, start=1):
        jump = setting.matrices[k - 1]
        for _ in range(n):
            traj = simulate_trajectory(
                jump, init_w, T, children[i], sojourn_rate=setting.sojourn_rate, sojourn=sojourn
            )
            cohort.append(discretize_locf(traj, T, id=str(i + 1), true_class=k))
            i += 1
    return cohort
