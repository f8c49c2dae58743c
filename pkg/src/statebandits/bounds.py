"""Closed-form error and regret bounds.

Each bound takes a realized environment and returns a BoundReport holding the
raw sum, the value clamped to [0, 1] (every probability bound is trivially
valid at 1), and a digest of the inputs for traceability. Raw values are what
tightness studies plot; validity checks compare against the clamped value.

Bound catalogue (names used in reports and CSV output):

* ``thm1``: cumulative pseudo-regret of the optimism-index strategy.
* ``thm2.1`` / ``thm2.2``: misidentification probability of the global /
  empiric best arm under uniform rotation with best-state-average
  recommendation.
* ``thm3.1`` / ``thm3.2``: expected global / empiric simple regret, same
  strategy pair.
* ``thm4.1`` / ``thm4.2``: misidentification probability of the empiric /
  global best arm under successive elimination.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .divergence import PsiFamily, psi_star
from .env import Environment, gaps, state_counts
from .errors import ConfigurationError, ScheduleError
from .strategies import SRSchedule

__all__ = [
    "BoundReport",
    "normal_cdf",
    "thm1_bound",
    "thm2_bounds",
    "thm3_bounds",
    "sr_counts",
    "thm4_bounds",
    "write_bound_reports",
]


def normal_cdf(x):
    """Standard normal CDF, accurate to ~1e-16 relative; scalar or array."""
    out = ndtr(np.asarray(x, dtype=float))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class BoundReport:
    """A named bound value with its clamped form and an input digest."""

    name: str
    raw_value: float
    clamped_value: float
    inputs_digest: str


def _digest(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, np.ndarray):
            h.update(np.ascontiguousarray(p).tobytes())
        else:
            h.update(repr(p).encode("utf-8"))
        h.update(b"|")
    return h.hexdigest()[:16]


def _report(name: str, raw: float, digest: str) -> BoundReport:
    return BoundReport(name=name, raw_value=float(raw), clamped_value=float(min(raw, 1.0)), inputs_digest=digest)


def _per_state_floor(env: Environment, n: int) -> np.ndarray:
    """floor(visits to s within n / K) for each state."""
    if not 1 <= n <= env.spec.horizon:
        raise ConfigurationError(f"n {n} outside [1, {env.spec.horizon}]")
    return state_counts(env.spec.state_sequence, env.spec.S, n) // env.spec.K


def thm1_bound(env: Environment, alpha: float, n: int, family: PsiFamily) -> BoundReport:
    """Pseudo-regret bound: sum over cells with a positive per-state gap of
    gap * (alpha ln n / psi_star(gap/2) + alpha/(alpha-2))."""
    if not alpha > 2:
        raise ConfigurationError(f"alpha must exceed 2, got {alpha}")
    if not 1 <= n <= env.spec.horizon:
        raise ConfigurationError(f"n {n} outside [1, {env.spec.horizon}]")
    delta = gaps(env).delta_m
    positive = delta[delta > 0]
    total = float(
        np.sum(positive * (alpha * math.log(n) / psi_star(family, positive / 2.0) + alpha / (alpha - 2.0)))
    )
    digest = _digest("thm1", env.m, alpha, n, family)
    # Not a probability; the clamp is kept for interface uniformity only.
    return _report("thm1", total, digest)


def thm2_bounds(
    env: Environment,
    n: int,
    family: PsiFamily,
    sigma2: float | None = None,
    include_optimal: bool = True,
) -> tuple[BoundReport, BoundReport]:
    """Misidentification bounds under uniform rotation, as (global, empiric).

    The global-best bound adds a prior mass term 2*S*Phi(-delta_mu/(4*sigma2))
    per arm, with sigma2 the local-mean prior variance (defaults to the
    spec's). By default both sums run over every arm, the best one entering
    through its smallest rival gap; ``include_optimal=False`` drops it.
    """
    g = gaps(env)
    floors = _per_state_floor(env, n)
    sigma2 = env.spec.sigma2 if sigma2 is None else sigma2
    if not sigma2 > 0:
        raise ConfigurationError("sigma2 must be positive")

    def arm_mask(best: int) -> np.ndarray:
        keep = np.ones(env.spec.K, dtype=bool)
        if not include_optimal:
            keep[best] = False
        return keep

    keep_hat = arm_mask(g.j_hat_star)
    e_hat_raw = float(
        np.sum(2.0 * np.exp(-np.outer(psi_star(family, g.delta_sigma[keep_hat] / 2.0), floors)))
    )
    keep = arm_mask(g.j_star)
    e_raw = float(
        np.sum(2.0 * np.exp(-np.outer(psi_star(family, g.delta_sigma[keep] / 4.0), floors)))
        + np.sum(2.0 * env.spec.S * normal_cdf(-g.delta_mu[keep] / (4.0 * sigma2)))
    )
    digest = _digest("thm2", env.m, env.spec.mu, n, family, sigma2, include_optimal)
    return _report("thm2.1", e_raw, digest), _report("thm2.2", e_hat_raw, digest)


def thm3_bounds(
    env: Environment, n: int, family: PsiFamily | None = None
) -> tuple[BoundReport, BoundReport]:
    """Expected simple-regret bounds under uniform rotation, as (global, empiric).

    ``family`` is accepted for interface symmetry; the bounds assume rewards
    and local means supported on [0, 1] and do not use it.
    """
    g = gaps(env)
    floors = _per_state_floor(env, n)
    m = env.m

    def total(best: int, delta: np.ndarray) -> float:
        expo = np.exp(-(m[best][None, :] - m) ** 2 * floors[None, :])
        return float(np.sum(delta[:, None] * expo))

    digest = _digest("thm3", m, env.spec.mu, n)
    return (
        _report("thm3.1", total(g.j_star, g.delta_mu), digest),
        _report("thm3.2", total(g.j_hat_star, g.delta_sigma), digest),
    )


def sr_counts(state_sequence, schedule: SRSchedule, K: int, S: int | None = None) -> np.ndarray:
    """Evenly-allocated per-arm pull counts n_{s,k} through each phase.

    Entry [s, k-1] accumulates floor(phase-k visits to s / active arms in
    phase k); this is exactly the table a successive-elimination run reports.
    States that are never visited keep all-zero rows. ``S`` defaults to the
    largest state in the sequence plus one.
    """
    if schedule.K != K:
        raise ScheduleError(f"schedule is for {schedule.K} arms, got K={K}", field="t_k")
    if schedule.n > len(state_sequence):
        raise ScheduleError(
            f"schedule horizon {schedule.n} exceeds sequence length {len(state_sequence)}", field="t_k"
        )
    if S is None:
        S = int(max(state_sequence)) + 1
    seq = np.asarray(state_sequence[: schedule.n])
    table = np.zeros((S, K - 1), dtype=np.int64)
    carried = np.zeros(S, dtype=np.int64)
    t_prev = 0
    for k, t_k in enumerate(schedule.t_k, start=1):
        visits = np.bincount(seq[t_prev:t_k], minlength=S)
        carried = carried + visits // (K + 1 - k)
        table[:, k - 1] = carried
        t_prev = t_k
    return table


def _elimination_ordering(best: int, delta: np.ndarray) -> list[int]:
    rest = [i for i in range(len(delta)) if i != best]
    rest.sort(key=lambda i: (delta[i], i))
    return [best] + rest


def thm4_bounds(
    env: Environment,
    schedule: SRSchedule,
    ordering: list[int] | None = None,
) -> tuple[BoundReport, BoundReport]:
    """Misidentification bounds under successive elimination, as (global, empiric).

    Both statements share one elimination ranking: arms best-first by
    state-averaged local mean, then ascending gap, ties to the lower index.
    Phase k contributes k * exp(-n_{s,k} * (m[anchor, s] - m[rank K+1-k, s])^2)
    per state. The empiric bound anchors at the local-mean leader, the global
    bound at the top true-utility arm; when those differ, the global sum picks
    up a zero-gap rival term of size k*S and saturates past 1 (the bound is
    vacuous rather than wrong whenever the prior flips the leader).
    ``ordering`` overrides the shared ranking with an explicit best-first
    permutation; the anchors stay the environment's top arms.
    """
    g = gaps(env)
    table = sr_counts(env.spec.state_sequence, schedule, env.spec.K, env.spec.S)
    m = env.m
    K = env.spec.K
    if ordering is None:
        order = _elimination_ordering(g.j_hat_star, g.delta_sigma)
    else:
        order = list(ordering)
        if sorted(order) != list(range(K)):
            raise ConfigurationError(f"ordering must be a permutation of 0..{K - 1}, got {order}")

    def total(anchor: int) -> float:
        acc = 0.0
        for k in range(1, K):
            rival = order[K - k]
            diff2 = (m[anchor] - m[rival]) ** 2
            acc += k * float(np.sum(np.exp(-table[:, k - 1] * diff2)))
        return acc

    digest = _digest("thm4", m, env.spec.mu, schedule.kind, schedule.t_k)
    return (
        _report("thm4.2", total(g.j_star), digest),
        _report("thm4.1", total(g.j_hat_star), digest),
    )


def write_bound_reports(reports, path, n: int, K: int, S: int, min_state_visits: int) -> None:
    """CSV rows: name,raw,clamped,n,K,S,min_state_visits."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "raw", "clamped", "n", "K", "S", "min_state_visits"])
        for r in reports:
            writer.writerow([r.name, repr(r.raw_value), repr(r.clamped_value), n, K, S, min_state_visits])
