"""Monte Carlo estimation of identification error, simple regret and
pseudo-regret, with closed-form bounds evaluated alongside.

Estimators exploit the fact that the rotation strategies are
reward-independent (uniform rotation always, successive elimination within a
phase given the active set): per-cell reward sums are Binomial draws, which
lets whole run batches be sampled at once. The step-by-step loops in
``strategies`` remain the reference implementations; exact-enumeration tests
pin the two paths to the same distribution.

Parallelism is per environment only. Every random quantity derives from
(master_seed, env_index, ...) substreams, so results are byte-identical for
any worker count.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from .bounds import thm1_bound, thm2_bounds, thm3_bounds, thm4_bounds
from .divergence import BOUNDED_UNIT, PsiFamily, psi_star_inv
from .env import Environment, EnvironmentSpec, gaps, instantiate, make_state_sequence, state_counts
from .errors import ConfigurationError, RecommendationError
from .rng import substream
from .strategies import SRSchedule, sr_schedule

__all__ = [
    "SweepConfig",
    "BAIEstimate",
    "SweepRecord",
    "SRRecord",
    "RegretCurve",
    "random_env",
    "estimate_bai",
    "tightness_sweep",
    "sr_compare",
    "estimate_pseudoregret",
    "write_sweep_csv",
    "write_sr_csv",
    "TIGHTNESS_HEADER",
    "SR_HEADER",
]

TIGHTNESS_HEADER = [
    "env_index", "K", "S", "n", "min_state_visits", "delta_sigma_min",
    "e_hat", "e_hat_se", "e", "e_se", "r", "r_se", "r_hat", "r_hat_se",
    "b21", "b22", "b31", "b32",
]

SR_HEADER = [
    "env_index", "K", "S", "n",
    "e_hat_uniform", "e_hat_reference", "b41_uniform", "b41_reference",
]


@dataclass(frozen=True)
class SweepConfig:
    """Randomized-environment study configuration.

    ``horizon=None`` means 50*K*S per environment. Ranges are inclusive for
    K and S; sigma2 is drawn uniformly from (sigma2_min, sigma2_max].
    """

    num_envs: int = 200
    runs_per_env: int = 100
    master_seed: int = 0
    horizon: int | None = None
    k_min: int = 3
    k_max: int = 10
    s_min: int = 1
    s_max: int = 10
    sigma2_min: float = 0.0
    sigma2_max: float = 0.3
    reward_family: str = "bernoulli"
    state_mode: str = "iid_uniform"

    def __post_init__(self):
        if self.num_envs < 0:
            raise ConfigurationError("num_envs must be non-negative")
        if self.runs_per_env < 1:
            raise ConfigurationError("runs_per_env must be positive")
        if not 2 <= self.k_min <= self.k_max:
            raise ConfigurationError("need 2 <= k_min <= k_max")
        if not 1 <= self.s_min <= self.s_max:
            raise ConfigurationError("need 1 <= s_min <= s_max")
        if not 0.0 <= self.sigma2_min < self.sigma2_max:
            raise ConfigurationError("need 0 <= sigma2_min < sigma2_max")
        if self.horizon is not None and self.horizon < 1:
            raise ConfigurationError("horizon must be positive")


def random_env(config: SweepConfig, env_index: int) -> EnvironmentSpec:
    """Draw one environment spec from the sweep distribution."""
    rng = substream(config.master_seed, env_index, "envgen")
    K = int(rng.integers(config.k_min, config.k_max + 1))
    S = int(rng.integers(config.s_min, config.s_max + 1))
    sigma2 = max(float(rng.uniform(config.sigma2_min, config.sigma2_max)), 1e-12)
    mu = tuple(float(u) for u in rng.random(K))
    n = config.horizon if config.horizon is not None else 50 * K * S
    if config.state_mode == "iid_uniform":
        seq = tuple(int(s) for s in rng.integers(0, S, size=n))
    else:
        seq = make_state_sequence(S, n, mode=config.state_mode)
    seed = int(rng.integers(0, 2**62))
    return EnvironmentSpec(
        K=K, S=S, mu=mu, sigma2=sigma2, state_sequence=seq, seed=seed,
        reward_family=config.reward_family,
    )


@dataclass(frozen=True)
class BAIEstimate:
    """Monte Carlo estimates of identification error and simple regret."""

    e: float
    e_se: float
    e_hat: float
    e_hat_se: float
    r: float
    r_se: float
    r_hat: float
    r_hat_se: float
    runs: int


def _uniform_cell_counts(env: Environment, n: int) -> np.ndarray:
    """Per-(arm, state) pull counts of the uniform rotation after n steps.

    Arm a is pulled on the visits whose rank is congruent to a mod K, so it
    gets floor(V/K) pulls plus one when 1 <= a <= V mod K.
    """
    K, S = env.spec.K, env.spec.S
    visits = state_counts(env.spec.state_sequence, S, n)
    counts = np.empty((K, S), dtype=np.int64)
    counts[0] = visits // K
    counts[1:] = visits // K + (np.arange(1, K)[:, None] <= (visits % K)[None, :])
    return counts


def _binomial_cell_means(counts, m, runs, rng):
    """Sample per-run cell means: Binomial(counts, m)/counts, NaN where 0."""
    K, S = counts.shape
    means = np.full((runs, K, S), np.nan)
    for a in range(K):
        for s in range(S):
            if counts[a, s] > 0:
                draws = rng.binomial(counts[a, s], m[a, s], size=runs)
                means[:, a, s] = draws / counts[a, s]
    return means


def _eba_pick(means: np.ndarray) -> np.ndarray:
    """Per-run recommendation: best average of defined cell means."""
    if np.any(np.all(np.isnan(means[0]), axis=1)):
        bad = int(np.flatnonzero(np.all(np.isnan(means[0]), axis=1))[0])
        raise RecommendationError(f"arm {bad} has no pulls in any state")
    scores = np.nanmean(means, axis=2)
    return np.argmax(scores, axis=1)


def _sr_phase_visits(seq: np.ndarray, schedule: SRSchedule, S: int) -> np.ndarray:
    out = np.zeros((len(schedule.t_k), S), dtype=np.int64)
    t_prev = 0
    for k, t_k in enumerate(schedule.t_k):
        out[k] = np.bincount(seq[t_prev:t_k], minlength=S)
        t_prev = t_k
    return out


def _sr_sample(env: Environment, schedule: SRSchedule, runs: int, rng) -> np.ndarray:
    """Per-run surviving arm of successive elimination, sampled phase-wise.

    Within a phase the rotation gives rank r (over the ascending active
    list) floor(V/A) pulls plus one for ranks 1..V mod A; rewards per
    (rank, state) cell are Binomial. Rejection drops the active arm with the
    lowest sum of per-state means (unpulled cells 0, ties to lowest index).
    """
    spec = env.spec
    K, S = spec.K, spec.S
    seq = np.asarray(spec.state_sequence[: schedule.n])
    visits = _sr_phase_visits(seq, schedule, S)
    m = env.m
    active = np.tile(np.arange(K), (runs, 1))
    counts = np.zeros((runs, K, S), dtype=np.int64)
    sums = np.zeros((runs, K, S))
    rows = np.arange(runs)
    for k in range(1, K):
        A = K + 1 - k
        for s in range(S):
            V = int(visits[k - 1, s])
            q, rem = divmod(V, A)
            for rank in range(A):
                n_rs = q + (1 if 1 <= rank <= rem else 0)
                if n_rs == 0:
                    continue
                arms = active[:, rank]
                draws = rng.binomial(n_rs, m[arms, s])
                counts[rows, arms, s] += n_rs
                sums[rows, arms, s] += draws
        means = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
        scores = means.sum(axis=2)
        active_mask = np.zeros((runs, K), dtype=bool)
        np.put_along_axis(active_mask, active, True, axis=1)
        drop = np.argmin(np.where(active_mask, scores, np.inf), axis=1)
        keep = active != drop[:, None]
        active = active[keep].reshape(runs, A - 1)
    return active[:, 0]


def _prob_se(p: float, runs: int) -> float:
    return float(np.sqrt(p * (1.0 - p) / runs))


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    if len(x) < 2:
        return float(np.mean(x)), 0.0
    return float(np.mean(x)), float(np.std(x, ddof=1) / np.sqrt(len(x)))


def estimate_bai(env: Environment, strategy: str, runs: int, n: int | None = None) -> BAIEstimate:
    """Estimate identification error and simple regret for one environment.

    ``strategy`` is ``uniform_eba``, ``sr_uniform`` or ``sr_reference``.
    Randomness derives from (env.spec.seed, "bai", strategy); successive
    elimination strategies share a stream root so that identical schedules
    replay identical draws.
    """
    spec = env.spec
    n = spec.horizon if n is None else n
    if not 1 <= n <= spec.horizon:
        raise ConfigurationError(f"n {n} outside [1, {spec.horizon}]")
    if strategy == "uniform_eba":
        rng = substream(spec.seed, "bai", "uniform_eba")
        counts = _uniform_cell_counts(env, n)
        picks = _eba_pick(_binomial_cell_means(counts, env.m, runs, rng))
    elif strategy in ("sr_uniform", "sr_reference"):
        schedule = sr_schedule(strategy.removeprefix("sr_"), spec.K, n)
        rng = substream(spec.seed, "bai", "sr")
        picks = _sr_sample(env, schedule, runs, rng)
    else:
        raise ConfigurationError(f"unknown strategy {strategy!r}")
    g = gaps(env)
    mu = np.asarray(spec.mu)
    row_means = env.m.mean(axis=1)
    e = float(np.mean(picks != g.j_star))
    e_hat = float(np.mean(picks != g.j_hat_star))
    r, r_se = _mean_se(mu[g.j_star] - mu[picks])
    r_hat, r_hat_se = _mean_se(row_means[g.j_hat_star] - row_means[picks])
    return BAIEstimate(
        e=e, e_se=_prob_se(e, runs), e_hat=e_hat, e_hat_se=_prob_se(e_hat, runs),
        r=r, r_se=r_se, r_hat=r_hat, r_hat_se=r_hat_se, runs=runs,
    )


@dataclass(frozen=True)
class SweepRecord:
    """One tightness-study row: estimates plus raw bound values."""

    env_index: int
    K: int
    S: int
    n: int
    min_state_visits: int
    delta_sigma_min: float
    e_hat: float
    e_hat_se: float
    e: float
    e_se: float
    r: float
    r_se: float
    r_hat: float
    r_hat_se: float
    b21: float
    b22: float
    b31: float
    b32: float


def _tightness_task(args) -> tuple[int, SweepRecord | None, str | None]:
    config, env_index = args
    try:
        spec = random_env(config, env_index)
        env = instantiate(spec)
        n = spec.horizon
        est = estimate_bai(env, "uniform_eba", config.runs_per_env, n)
        family = BOUNDED_UNIT
        b21, b22 = thm2_bounds(env, n, family)
        b31, b32 = thm3_bounds(env, n)
        g = gaps(env)
        record = SweepRecord(
            env_index=env_index, K=spec.K, S=spec.S, n=n,
            min_state_visits=int(state_counts(spec.state_sequence, spec.S, n).min()),
            delta_sigma_min=float(g.delta_sigma.min()),
            e_hat=est.e_hat, e_hat_se=est.e_hat_se, e=est.e, e_se=est.e_se,
            r=est.r, r_se=est.r_se, r_hat=est.r_hat, r_hat_se=est.r_hat_se,
            b21=b21.raw_value, b22=b22.raw_value, b31=b31.raw_value, b32=b32.raw_value,
        )
        return env_index, record, None
    except Exception as exc:  # noqa: BLE001 - sweep must survive bad rows
        return env_index, None, f"{type(exc).__name__}: {exc}"


def _run_tasks(task, config, workers: int):
    args = [(config, i) for i in range(config.num_envs)]
    if workers <= 1 or config.num_envs <= 1:
        results = [task(a) for a in args]
    else:
        chunk = max(1, config.num_envs // (workers * 4))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(task, args, chunksize=chunk))
    results.sort(key=lambda r: r[0])
    records = [rec for _, rec, err in results if err is None]
    failures = [(idx, err) for idx, _, err in results if err is not None]
    return records, failures


def tightness_sweep(config: SweepConfig, workers: int = 1):
    """Run the uniform-rotation tightness study; returns (records, failures)."""
    return _run_tasks(_tightness_task, config, workers)


@dataclass(frozen=True)
class SRRecord:
    """One paired successive-elimination comparison row (plus extras kept
    out of the pinned CSV: global-best error and its bound per schedule)."""

    env_index: int
    K: int
    S: int
    n: int
    e_hat_uniform: float
    e_hat_reference: float
    b41_uniform: float
    b41_reference: float
    e_hat_se_uniform: float = 0.0
    e_hat_se_reference: float = 0.0
    e_uniform: float = 0.0
    e_reference: float = 0.0
    e_se_uniform: float = 0.0
    e_se_reference: float = 0.0
    b42_uniform: float = 0.0
    b42_reference: float = 0.0


def _sr_task(args) -> tuple[int, SRRecord | None, str | None]:
    config, env_index = args
    try:
        spec = random_env(config, env_index)
        env = instantiate(spec)
        n = spec.horizon
        vals = {}
        for kind in ("uniform", "reference"):
            est = estimate_bai(env, f"sr_{kind}", config.runs_per_env, n)
            b42, b41 = thm4_bounds(env, sr_schedule(kind, spec.K, n))
            vals[kind] = (est, b41.raw_value, b42.raw_value)
        est_u, b41_u, b42_u = vals["uniform"]
        est_r, b41_r, b42_r = vals["reference"]
        record = SRRecord(
            env_index=env_index, K=spec.K, S=spec.S, n=n,
            e_hat_uniform=est_u.e_hat, e_hat_reference=est_r.e_hat,
            b41_uniform=b41_u, b41_reference=b41_r,
            e_hat_se_uniform=est_u.e_hat_se, e_hat_se_reference=est_r.e_hat_se,
            e_uniform=est_u.e, e_reference=est_r.e,
            e_se_uniform=est_u.e_se, e_se_reference=est_r.e_se,
            b42_uniform=b42_u, b42_reference=b42_r,
        )
        return env_index, record, None
    except Exception as exc:  # noqa: BLE001
        return env_index, None, f"{type(exc).__name__}: {exc}"


def sr_compare(config: SweepConfig, workers: int = 1):
    """Paired comparison of the two elimination schedules.

    Returns (records, summary, failures); the summary carries the mean
    per-schedule error, the mean paired difference (reference - uniform), a
    one-sided sign test that reference errs more, and a direction tag.
    """
    records, failures = _run_tasks(_sr_task, config, workers)
    diffs = np.array([r.e_hat_reference - r.e_hat_uniform for r in records])
    n_pos = int(np.sum(diffs > 0))
    n_neg = int(np.sum(diffs < 0))
    if n_pos + n_neg > 0:
        p_value = float(binomtest(n_pos, n_pos + n_neg, 0.5, alternative="greater").pvalue)
    else:
        p_value = 1.0
    mean_u = float(np.mean([r.e_hat_uniform for r in records])) if records else 0.0
    mean_r = float(np.mean([r.e_hat_reference for r in records])) if records else 0.0
    summary = {
        "num_envs": len(records),
        "mean_e_hat_uniform": mean_u,
        "mean_e_hat_reference": mean_r,
        "mean_paired_diff": float(np.mean(diffs)) if records else 0.0,
        "sign_test": {"n_pos": n_pos, "n_neg": n_neg, "n_tie": len(records) - n_pos - n_neg,
                      "p_value": p_value},
        "direction": "uniform_leq_reference" if mean_u <= mean_r else "reference_lt_uniform",
    }
    return records, summary, failures


@dataclass(frozen=True)
class RegretCurve:
    """Pseudo-regret estimates at checkpoints, with the closed-form bound."""

    checkpoints: tuple[int, ...]
    mean: np.ndarray
    se: np.ndarray
    bound: np.ndarray = field(repr=False)


def estimate_pseudoregret(
    env: Environment,
    alpha: float,
    checkpoints,
    runs: int,
    family: PsiFamily = BOUNDED_UNIT,
) -> RegretCurve:
    """Monte Carlo pseudo-regret of the optimism-index strategy.

    All runs are advanced in lockstep; run r consumes the substream
    (spec.seed, r, "rewards") one variate per step, so a single run matches
    the scalar loop in ``strategies`` exactly.
    """
    spec = env.spec
    checkpoints = tuple(sorted(int(c) for c in checkpoints))
    if not checkpoints or checkpoints[0] < 1 or checkpoints[-1] > spec.horizon:
        raise ConfigurationError(f"checkpoints must lie in [1, {spec.horizon}]")
    if not alpha > 2:
        raise ConfigurationError(f"alpha must exceed 2, got {alpha}")
    n_max = checkpoints[-1]
    variates = np.empty((runs, n_max))
    for r in range(runs):
        stream = substream(spec.seed, r, "rewards")
        if spec.reward_family == "bernoulli":
            variates[r] = stream.random(n_max)
        else:
            variates[r] = stream.standard_normal(n_max)
    m = env.m
    m_star = m.max(axis=0)
    counts = np.zeros((runs, spec.K, spec.S), dtype=np.int64)
    sums = np.zeros((runs, spec.K, spec.S))
    regret = np.zeros(runs)
    rows = np.arange(runs)
    out_mean, out_se = [], []
    check = set(checkpoints)
    for t in range(1, n_max + 1):
        s = spec.state_sequence[t - 1]
        C = counts[:, :, s]
        with np.errstate(invalid="ignore", divide="ignore"):
            score = sums[:, :, s] / C + psi_star_inv(family, alpha * np.log(t) / C)
        score = np.where(C == 0, np.inf, score)
        choice = np.argmax(score, axis=1)
        mean_c = m[choice, s]
        if spec.reward_family == "bernoulli":
            reward = (variates[:, t - 1] < mean_c).astype(float)
        else:
            reward = np.clip(mean_c + np.sqrt(spec.reward_sigma2) * variates[:, t - 1], 0.0, 1.0)
        counts[rows, choice, s] += 1
        sums[rows, choice, s] += reward
        regret += m_star[s] - mean_c
        if t in check:
            mu_hat, se = _mean_se(regret)
            out_mean.append(mu_hat)
            out_se.append(se)
    bound = np.array([thm1_bound(env, alpha, c, family).raw_value for c in checkpoints])
    return RegretCurve(checkpoints=checkpoints, mean=np.array(out_mean), se=np.array(out_se), bound=bound)


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_sweep_csv(records, path) -> None:
    """Write tightness rows with the pinned 18-column header."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIGHTNESS_HEADER)
        for rec in records:
            writer.writerow([_fmt(getattr(rec, name)) for name in TIGHTNESS_HEADER])


def write_sr_csv(records, path) -> None:
    """Write schedule-comparison rows with the pinned 8-column header."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SR_HEADER)
        for rec in records:
            writer.writerow([_fmt(getattr(rec, name)) for name in SR_HEADER])
