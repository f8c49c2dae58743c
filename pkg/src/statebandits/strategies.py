"""Allocation strategies and recommendation rules.

Three allocation rules are provided: an optimism index rule with per-state
statistics (for cumulative reward), deterministic uniform rotation, and
phased successive elimination (for best-arm identification). Recommendation
is by empirical best state-average. All tie-breaks are toward the lowest arm
index, and forced exploration always picks the lowest-index unpulled arm.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .divergence import PsiFamily, psi_star_inv
from .env import Environment, pull, sigma_count
from .errors import ConfigurationError, RecommendationError, ScheduleError

__all__ = [
    "PullStats",
    "sb_ucb_select",
    "uniform_select",
    "eba_recommend",
    "log_bar",
    "SRSchedule",
    "sr_schedule",
    "SRResult",
    "successive_rejects",
    "run_uniform_eba",
    "run_sb_ucb",
    "write_trace_csv",
]


class PullStats:
    """Per-(arm, state) pull counts and reward sums for K arms and S states."""

    def __init__(self, K: int, S: int):
        if K < 1 or S < 1:
            raise ConfigurationError("need K >= 1 and S >= 1")
        self.K = K
        self.S = S
        self.counts = np.zeros((K, S), dtype=np.int64)
        self.sums = np.zeros((K, S), dtype=float)

    @property
    def t(self) -> int:
        """Total number of recorded pulls."""
        return int(self.counts.sum())

    @property
    def means(self) -> np.ndarray:
        """Per-cell sample means; cells with no pulls are NaN."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.counts > 0, self.sums / np.maximum(self.counts, 1), np.nan)

    def update(self, arm: int, state: int, reward: float) -> None:
        self.counts[arm, state] += 1
        self.sums[arm, state] += reward

    def copy(self) -> "PullStats":
        out = PullStats(self.K, self.S)
        out.counts = self.counts.copy()
        out.sums = self.sums.copy()
        return out


def sb_ucb_select(stats: PullStats, state: int, t: int, alpha: float, family: PsiFamily) -> int:
    """Arm to pull at 1-based time ``t`` in the given state.

    Any arm never pulled in this state is played first (lowest index);
    otherwise the arm maximizing sample mean plus the inverted-conjugate
    bonus on alpha*ln(t)/count wins, ties to the lowest index. alpha must
    exceed 2 for the associated regret guarantee to hold.
    """
    if not alpha > 2:
        raise ConfigurationError(f"alpha must exceed 2, got {alpha}")
    if not 0 <= state < stats.S:
        raise ConfigurationError(f"state {state} outside [0, {stats.S})")
    counts = stats.counts[:, state]
    unpulled = np.flatnonzero(counts == 0)
    if unpulled.size:
        return int(unpulled[0])
    means = stats.sums[:, state] / counts
    bonus = psi_star_inv(family, alpha * math.log(t) / counts)
    return int(np.argmax(means + bonus))


def uniform_select(state_sequence, t: int, K: int) -> int:
    """Deterministic rotation: the visit rank of the current state, mod K.

    The rank counts visits up to and including time ``t``, so per-(arm,
    state) pull counts after any horizon differ by at most one.
    """
    if K < 1:
        raise ConfigurationError("need K >= 1")
    s = state_sequence[t - 1]
    return sigma_count(state_sequence, s, t) % K


def eba_recommend(stats: PullStats) -> int:
    """Arm with the best average of per-state sample means.

    States with no pulls for an arm are left out of that arm's average. An
    arm with no pulls at all cannot be scored and raises RecommendationError.
    """
    totals = stats.counts.sum(axis=1)
    if np.any(totals == 0):
        bad = int(np.flatnonzero(totals == 0)[0])
        raise RecommendationError(f"arm {bad} has no pulls in any state")
    means = stats.means
    scores = np.nanmean(means, axis=1)
    return int(np.argmax(scores))


def log_bar(K: int) -> float:
    """The half-plus-harmonic normalizer used by the reference schedule."""
    if K < 2:
        raise ConfigurationError("need K >= 2")
    return 0.5 + sum(1.0 / i for i in range(2, K + 1))


@dataclass(frozen=True)
class SRSchedule:
    """Phase boundaries for successive elimination: K-1 strictly increasing
    rejection times, the last equal to the horizon."""

    kind: str
    t_k: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "t_k", tuple(int(t) for t in self.t_k))
        if len(self.t_k) < 1:
            raise ScheduleError("need at least one phase boundary", field="t_k")
        prev = 0
        for t in self.t_k:
            if t <= prev:
                raise ScheduleError(f"boundaries must be strictly increasing, got {self.t_k}", field="t_k")
            prev = t

    @property
    def K(self) -> int:
        return len(self.t_k) + 1

    @property
    def n(self) -> int:
        return self.t_k[-1]


def sr_schedule(kind: str, K: int, n: int) -> SRSchedule:
    """Build a named schedule.

    ``uniform`` splits the horizon evenly: t_k = ceil(k*n/(K-1)). ``reference``
    is the classical elimination budget: with per-arm targets
    n_j = ceil((n-K) / (log_bar(K) * (K+1-j))), phase j pulls each of the
    K+1-j active arms n_j - n_{j-1} more times, so
    t_j = sum_{i<=j} (K+1-i)*(n_i - n_{i-1}), capped at the horizon with the
    last boundary forced to it.
    """
    if K < 2:
        raise ScheduleError("need K >= 2", field="K")
    if n < K:
        raise ScheduleError(f"horizon {n} cannot cover {K} arms", field="n")
    if kind == "uniform":
        t_k = [math.ceil(k * n / (K - 1)) for k in range(1, K)]
    elif kind == "reference":
        bar = log_bar(K)
        t_k, total, prev = [], 0, 0
        for j in range(1, K):
            per_arm = math.ceil((n - K) / (bar * (K + 1 - j)))
            total += (K + 1 - j) * (per_arm - prev)
            prev = per_arm
            t_k.append(min(total, n))
        t_k[-1] = n
    else:
        raise ScheduleError(f"unknown schedule kind {kind!r}", field="kind")
    return SRSchedule(kind=kind, t_k=tuple(t_k))


@dataclass
class SRResult:
    """Outcome of a successive-elimination run.

    ``steps`` holds one (t, state, arm, reward, phase) tuple per pull;
    ``n_table[s, k-1]`` is the evenly-allocated per-arm pull count for state
    s through phase k (the quantity the closed-form counters reproduce).
    """

    winner: int
    rejected: list[int]
    steps: list[tuple[int, int, int, float, int]]
    n_table: np.ndarray
    stats: PullStats = field(repr=False)


def successive_rejects(env: Environment, schedule: SRSchedule, rng: np.random.Generator) -> SRResult:
    """Run phased elimination on ``env`` and return the surviving arm.

    Within a phase the active arms (ascending order) are rotated per state:
    the phase-local visit rank of the current state, mod the number of active
    arms, picks the arm. At each boundary the active arm with the lowest sum
    of per-state sample means is dropped (unpulled cells count as 0, ties to
    the lowest index).
    """
    spec = env.spec
    if schedule.K != spec.K:
        raise ScheduleError(f"schedule is for {schedule.K} arms, environment has {spec.K}", field="t_k")
    if schedule.n > spec.horizon:
        raise ScheduleError(
            f"schedule horizon {schedule.n} exceeds environment horizon {spec.horizon}", field="t_k"
        )
    stats = PullStats(spec.K, spec.S)
    active = list(range(spec.K))
    steps: list[tuple[int, int, int, float, int]] = []
    rejected: list[int] = []
    n_table = np.zeros((spec.S, spec.K - 1), dtype=np.int64)
    carried = np.zeros(spec.S, dtype=np.int64)
    t_prev = 0
    for k, t_k in enumerate(schedule.t_k, start=1):
        local = np.zeros(spec.S, dtype=np.int64)
        for t in range(t_prev + 1, t_k + 1):
            s = spec.state_sequence[t - 1]
            local[s] += 1
            arm = active[local[s] % len(active)]
            reward = pull(env, arm, t, rng)
            stats.update(arm, s, reward)
            steps.append((t, s, arm, reward, k))
        carried = carried + local // len(active)
        n_table[:, k - 1] = carried
        means = np.where(stats.counts > 0, stats.sums / np.maximum(stats.counts, 1), 0.0)
        scores = means.sum(axis=1)
        drop = min(active, key=lambda i: (scores[i], i))
        rejected.append(drop)
        active.remove(drop)
        t_prev = t_k
    return SRResult(winner=active[0], rejected=rejected, steps=steps, n_table=n_table, stats=stats)


def run_uniform_eba(env: Environment, n: int, rng: np.random.Generator) -> tuple[int, PullStats]:
    """Uniform rotation for ``n`` steps, then recommend by best state-average."""
    spec = env.spec
    if n > spec.horizon:
        raise ConfigurationError(f"n {n} exceeds environment horizon {spec.horizon}")
    stats = PullStats(spec.K, spec.S)
    visits = np.zeros(spec.S, dtype=np.int64)
    for t in range(1, n + 1):
        s = spec.state_sequence[t - 1]
        visits[s] += 1
        arm = int(visits[s]) % spec.K
        reward = pull(env, arm, t, rng)
        stats.update(arm, s, reward)
    return eba_recommend(stats), stats


def run_sb_ucb(
    env: Environment,
    n: int,
    alpha: float,
    family: PsiFamily,
    rng: np.random.Generator,
) -> tuple[PullStats, list[int]]:
    """Optimism-index allocation for ``n`` steps; returns stats and choices."""
    spec = env.spec
    if n > spec.horizon:
        raise ConfigurationError(f"n {n} exceeds environment horizon {spec.horizon}")
    stats = PullStats(spec.K, spec.S)
    chosen: list[int] = []
    for t in range(1, n + 1):
        s = spec.state_sequence[t - 1]
        arm = sb_ucb_select(stats, s, t, alpha, family)
        reward = pull(env, arm, t, rng)
        stats.update(arm, s, reward)
        chosen.append(arm)
    return stats, chosen


def write_trace_csv(steps, path) -> None:
    """Write per-pull records with header t,state,arm,reward,phase."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "state", "arm", "reward", "phase"])
        for t, state, arm, reward, phase in steps:
            writer.writerow([t, state, arm, repr(float(reward)), phase])
