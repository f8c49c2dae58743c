"""Bandit environments with per-state local means.

An environment has ``K`` arms and ``S`` states. Each arm ``i`` carries a
global utility ``mu[i]`` in [0, 1]; instantiation draws a local mean
``m[i, s]`` for every state from a Normal(mu[i], sigma2) prior clamped to
[0, 1]. Pulling arm ``i`` at time ``t`` returns a reward with mean
``m[i, state_sequence[t-1]]`` from the configured reward family. The state
sequence is known in advance and shared by every strategy.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .rng import substream

__all__ = [
    "EnvironmentSpec",
    "Environment",
    "GapReport",
    "make_state_sequence",
    "instantiate",
    "pull",
    "sigma_count",
    "state_counts",
    "gaps",
    "save_environment",
    "load_environment",
]

REWARD_FAMILIES = ("bernoulli", "truncated_gaussian")


@dataclass(frozen=True)
class EnvironmentSpec:
    """Declarative description of an environment; fully determines it with seed."""

    K: int
    S: int
    mu: tuple[float, ...]
    sigma2: float
    state_sequence: tuple[int, ...]
    seed: int = 0
    reward_family: str = "bernoulli"
    reward_sigma2: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "mu", tuple(float(u) for u in self.mu))
        object.__setattr__(self, "state_sequence", tuple(int(s) for s in self.state_sequence))
        self.validate()

    def validate(self):
        if self.K < 2:
            raise ValidationError("need at least 2 arms", field="K")
        if self.S < 1:
            raise ValidationError("need at least 1 state", field="S")
        if len(self.mu) != self.K:
            raise ValidationError(f"expected {self.K} entries, got {len(self.mu)}", field="mu")
        if any(not (0.0 <= u <= 1.0) for u in self.mu):
            raise ValidationError("entries must lie in [0, 1]", field="mu")
        if not self.sigma2 > 0:
            raise ValidationError("must be positive", field="sigma2")
        if len(self.state_sequence) == 0:
            raise ValidationError("must be non-empty", field="state_sequence")
        if any(not (0 <= s < self.S) for s in self.state_sequence):
            raise ValidationError(f"entries must lie in [0, {self.S})", field="state_sequence")
        if self.reward_family not in REWARD_FAMILIES:
            raise ValidationError(f"must be one of {REWARD_FAMILIES}", field="reward_family")
        if self.reward_family == "truncated_gaussian" and not self.reward_sigma2 > 0:
            raise ValidationError("must be positive", field="reward_sigma2")
        if len(self.state_sequence) < self.K * self.S:
            warnings.warn(
                f"horizon {len(self.state_sequence)} is shorter than K*S = {self.K * self.S}; "
                "some (arm, state) cells cannot be visited",
                stacklevel=2,
            )

    @property
    def horizon(self) -> int:
        return len(self.state_sequence)


def make_state_sequence(S: int, n: int, mode: str = "iid_uniform", seed: int = 0) -> tuple[int, ...]:
    """Generate a length-n state sequence: iid_uniform, round_robin or blocks."""
    if S < 1 or n < 1:
        raise ValidationError("need S >= 1 and n >= 1", field="state_sequence")
    if mode == "iid_uniform":
        rng = substream(seed, "state-sequence")
        return tuple(int(s) for s in rng.integers(0, S, size=n))
    if mode == "round_robin":
        return tuple(t % S for t in range(n))
    if mode == "blocks":
        block = n // S
        seq = []
        for s in range(S):
            width = block if s < S - 1 else n - block * (S - 1)
            seq.extend([s] * width)
        return tuple(seq)
    raise ValidationError(f"unknown mode {mode!r}", field="state_sequence")


@dataclass(frozen=True)
class Environment:
    """A spec plus its realized local-mean matrix ``m`` of shape (K, S)."""

    spec: EnvironmentSpec
    m: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.shape != (self.spec.K, self.spec.S):
            raise ValidationError(
                f"expected shape {(self.spec.K, self.spec.S)}, got {m.shape}", field="m"
            )
        if np.any(m < 0.0) or np.any(m > 1.0):
            raise ValidationError("entries must lie in [0, 1]", field="m")
        object.__setattr__(self, "m", m)
        self.m.setflags(write=False)


def instantiate(spec: EnvironmentSpec) -> Environment:
    """Draw the local means for a spec; deterministic in spec.seed.

    Standard normals are drawn first and then shifted by mu, so raising any
    mu pointwise (same seed) never lowers a local mean after clamping.
    """
    rng = substream(spec.seed, "instantiate")
    z = rng.standard_normal((spec.K, spec.S))
    m = np.clip(np.asarray(spec.mu)[:, None] + np.sqrt(spec.sigma2) * z, 0.0, 1.0)
    return Environment(spec=spec, m=m)


def pull(env: Environment, arm: int, t: int, rng: np.random.Generator) -> float:
    """Sample one reward for pulling ``arm`` at 1-based time ``t``.

    Consumes exactly one variate from ``rng`` per call (a uniform for
    bernoulli, a normal for truncated_gaussian), which keeps scalar loops and
    vectorized replays on the same stream trajectory-identical.
    """
    spec = env.spec
    if not 0 <= arm < spec.K:
        raise ValidationError(f"arm {arm} outside [0, {spec.K})", field="arm")
    if not 1 <= t <= spec.horizon:
        raise ValidationError(f"t {t} outside [1, {spec.horizon}]", field="t")
    mean = env.m[arm, spec.state_sequence[t - 1]]
    if spec.reward_family == "bernoulli":
        return 1.0 if rng.random() < mean else 0.0
    draw = mean + np.sqrt(spec.reward_sigma2) * rng.standard_normal()
    return float(np.clip(draw, 0.0, 1.0))


def sigma_count(state_sequence, s: int, t: int) -> int:
    """Number of visits to state ``s`` among the first ``t`` steps (inclusive)."""
    if t < 0 or t > len(state_sequence):
        raise ValidationError(f"t {t} outside [0, {len(state_sequence)}]", field="t")
    return int(sum(1 for x in state_sequence[:t] if x == s))


def state_counts(state_sequence, S: int, n: int | None = None) -> np.ndarray:
    """Visit counts per state over the first ``n`` steps (default: all)."""
    seq = np.asarray(state_sequence[: len(state_sequence) if n is None else n])
    return np.bincount(seq, minlength=S)


@dataclass(frozen=True)
class GapReport:
    """All gap quantities of an environment under the min-gap convention.

    * ``delta_m[i, s]``: per-state gap to the state's best local mean.
    * ``delta_sigma[i]``: gap of arm i's state-average to the best
      state-average; the best arm gets the smallest rival gap.
    * ``delta_mu[i]``: same for global utilities.
    * ``j_star`` / ``j_hat_star``: best arm by mu / by state-average of m.
    """

    delta_m: np.ndarray
    delta_sigma: np.ndarray
    delta_mu: np.ndarray
    j_star: int
    j_hat_star: int
    m_star_per_state: np.ndarray


def _gap_vector(values: np.ndarray) -> tuple[np.ndarray, int]:
    best = int(np.argmax(values))
    delta = values[best] - values
    others = np.delete(delta, best)
    delta = delta.copy()
    delta[best] = float(np.min(others))
    return delta, best


def gaps(env: Environment) -> GapReport:
    """Compute every gap quantity for a realized environment."""
    m = env.m
    mu = np.asarray(env.spec.mu)
    m_star = m.max(axis=0)
    delta_m = m_star[None, :] - m
    delta_sigma, j_hat_star = _gap_vector(m.mean(axis=1))
    delta_mu, j_star = _gap_vector(mu)
    return GapReport(
        delta_m=delta_m,
        delta_sigma=delta_sigma,
        delta_mu=delta_mu,
        j_star=j_star,
        j_hat_star=j_hat_star,
        m_star_per_state=m_star,
    )


def save_environment(env: Environment, path) -> None:
    """Write spec + realized means as JSON text; floats round-trip exactly."""
    payload = {
        "spec": {
            "K": env.spec.K,
            "S": env.spec.S,
            "mu": list(env.spec.mu),
            "sigma2": env.spec.sigma2,
            "state_sequence": list(env.spec.state_sequence),
            "seed": env.spec.seed,
            "reward_family": env.spec.reward_family,
            "reward_sigma2": env.spec.reward_sigma2,
        },
        "m": [list(row) for row in env.m],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_environment(path) -> Environment:
    """Inverse of save_environment."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    spec = EnvironmentSpec(**payload["spec"])
    return Environment(spec=spec, m=np.asarray(payload["m"], dtype=float))
