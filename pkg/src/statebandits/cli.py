"""Command-line interface.

Subcommands: ``tightness`` (randomized-environment bound-tightness study),
``sr-compare`` (paired elimination-schedule comparison), ``regret``
(pseudo-regret curve with bound), ``triage`` (screening pipeline vs
baselines), ``verify`` (fast invariant suites). Every run writes its outputs
plus a ``manifest.json`` holding the resolved config, seed and versions;
re-running from a manifest reproduces the outputs byte for byte, as does any
worker count.

Exit codes: 0 success, 2 configuration/validation problem, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .bounds import sr_counts, thm2_bounds
from .divergence import BOUNDED_UNIT, PsiFamily, psi, psi_star, psi_star_inv
from .env import EnvironmentSpec, Environment, gaps, instantiate, make_state_sequence, state_counts
from .errors import (
    ConfigurationError,
    ParseError,
    RecommendationError,
    ReferentialError,
    ScheduleError,
    ValidationError,
)
from .montecarlo import (
    SR_HEADER,
    TIGHTNESS_HEADER,
    SweepConfig,
    estimate_bai,
    estimate_pseudoregret,
    sr_compare,
    tightness_sweep,
    write_sr_csv,
    write_sweep_csv,
)
from .rng import substream
from .strategies import sr_schedule, successive_rejects
from .triage import (
    BASELINES,
    STAGE_COSTS_MILLI,
    default_stages,
    dollars,
    load_evaluations,
    metrics,
    run_baseline,
    run_pipeline,
    synth_population,
)

_CONFIG_ERRORS = (
    ConfigurationError,
    ValidationError,
    ParseError,
    ReferentialError,
    ScheduleError,
    FileNotFoundError,
)


# ---------------------------------------------------------------------------
# config schema plumbing


@dataclass(frozen=True)
class Field:
    name: str
    parse: callable
    default: object
    provenance: str  # "protocol" (mirrors the reference experimental protocol) or "tool"
    help: str


def _int(text):
    return int(str(text))


def _float(text):
    return float(str(text))


def _str(text):
    return str(text)


def _opt_int(text):
    s = str(text).strip()
    return None if s in ("", "none", "None") else int(s)


def _int_list(text):
    if isinstance(text, (list, tuple)):
        return tuple(int(x) for x in text)
    return tuple(int(x) for x in str(text).split(",") if x.strip())


def _float_list(text):
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    return tuple(float(x) for x in str(text).split(",") if x.strip())


def _str_list(text):
    if isinstance(text, (list, tuple)):
        return tuple(str(x) for x in text)
    return tuple(x.strip() for x in str(text).split(",") if x.strip())


def _coerce(field: Field, value):
    if isinstance(value, str):
        return field.parse(value)
    if field.parse in (_int_list, _float_list, _str_list):
        return field.parse(value)
    if field.parse is _opt_int:
        return None if value is None else int(value)
    return field.parse(value)


def resolve_config(schema: list[Field], raw: dict) -> dict:
    by_name = {f.name: f for f in schema}
    out = {f.name: f.default for f in schema}
    for key, value in raw.items():
        if key not in by_name:
            raise ConfigurationError(f"unknown config key {key!r}; known: {sorted(by_name)}")
        try:
            out[key] = _coerce(by_name[key], value)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"bad value for {key!r}: {exc}") from None
    return out


def load_config(path: str, command: str) -> tuple[dict, int | None]:
    """Read a key=value config file or a manifest JSON; returns (raw, seed)."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        obj = json.loads(text)
        if "config" in obj:
            if obj.get("command") not in (None, command):
                raise ConfigurationError(
                    f"manifest is for command {obj.get('command')!r}, not {command!r}"
                )
            return dict(obj["config"]), obj.get("seed")
        return dict(obj), None
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.strip()
        if not body or body.startswith("#"):
            continue
        if "=" not in body:
            raise ParseError(f"expected key = value, got {body!r}", line=lineno)
        key, _, value = body.partition("=")
        raw[key.strip()] = value.strip()
    return raw, None


def _schema_help(schema: list[Field]) -> str:
    lines = []
    for f in schema:
        tag = "protocol default" if f.provenance == "protocol" else "tool default"
        lines.append(f"  {f.name} = {f.default!r}  ({tag}) {f.help}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# output helpers


def _write_manifest(out_dir: str, command: str, seed: int, config: dict) -> None:
    payload = {
        "command": command,
        "seed": seed,
        "config": config,
        "versions": {
            "statebandits": __version__,
            "python": ".".join(str(v) for v in sys.version_info[:3]),
            "numpy": np.__version__,
        },
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_json_rows(header, records, path) -> None:
    rows = [{name: getattr(rec, name) for name in header} for rec in records]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_summary(out_dir: str, name: str, payload: dict) -> None:
    with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _report_failures(failures) -> None:
    for idx, message in failures:
        print(f"env {idx} failed: {message}", file=sys.stderr)


# ---------------------------------------------------------------------------
# tightness


_SWEEP_FIELDS = [
    Field("num_envs", _int, 200, "protocol", "number of randomized environments"),
    Field("runs_per_env", _int, 100, "protocol", "Monte Carlo runs per environment"),
    Field("horizon", _opt_int, None, "protocol", "steps per run; empty means 50*K*S"),
    Field("k_min", _int, 3, "protocol", "smallest arm count"),
    Field("k_max", _int, 10, "protocol", "largest arm count"),
    Field("s_min", _int, 1, "protocol", "smallest state count"),
    Field("s_max", _int, 10, "protocol", "largest state count"),
    Field("sigma2_min", _float, 0.0, "protocol", "lower edge of the prior variance draw"),
    Field("sigma2_max", _float, 0.3, "protocol", "upper edge of the prior variance draw"),
    Field("reward_family", _str, "bernoulli", "protocol", "bernoulli or truncated_gaussian"),
    Field("state_mode", _str, "iid_uniform", "tool", "state sequence generator"),
]

TIGHTNESS_SCHEMA = _SWEEP_FIELDS
SR_SCHEMA = [
    Field("num_envs", _int, 1000, "protocol", "number of randomized environments"),
] + _SWEEP_FIELDS[1:]


def _sweep_config(cfg: dict, seed: int) -> SweepConfig:
    return SweepConfig(
        num_envs=cfg["num_envs"], runs_per_env=cfg["runs_per_env"], master_seed=seed,
        horizon=cfg["horizon"], k_min=cfg["k_min"], k_max=cfg["k_max"],
        s_min=cfg["s_min"], s_max=cfg["s_max"],
        sigma2_min=cfg["sigma2_min"], sigma2_max=cfg["sigma2_max"],
        reward_family=cfg["reward_family"], state_mode=cfg["state_mode"],
    )


def _violation_rates(records) -> dict:
    checks = {
        "thm2.1": lambda r: r.e > min(r.b21, 1.0) + 3.0 * r.e_se,
        "thm2.2": lambda r: r.e_hat > min(r.b22, 1.0) + 3.0 * r.e_hat_se,
        "thm3.1": lambda r: r.r > min(r.b31, 1.0) + 3.0 * r.r_se,
        "thm3.2": lambda r: r.r_hat > min(r.b32, 1.0) + 3.0 * r.r_hat_se,
    }
    if not records:
        return {name: 0.0 for name in checks}
    return {name: sum(bool(fn(r)) for r in records) / len(records) for name, fn in checks.items()}


def cmd_tightness(args, cfg: dict, seed: int) -> int:
    config = _sweep_config(cfg, seed)
    records, failures = tightness_sweep(config, workers=args.workers)
    _report_failures(failures)
    out = args.out
    if args.format == "csv":
        write_sweep_csv(records, os.path.join(out, "tightness.csv"))
    else:
        _write_json_rows(TIGHTNESS_HEADER, records, os.path.join(out, "tightness.json"))
    rates = _violation_rates(records)
    _write_summary(out, "tightness_summary.json", {
        "rows": len(records),
        "violation_rate": rates,
        "failures": [{"env_index": i, "error": m} for i, m in failures],
    })
    _write_manifest(out, "tightness", seed, cfg)
    worst = max(rates.values()) if rates else 0.0
    print(f"tightness: {len(records)} environments, worst violation rate {worst:.4f}")
    return 0


# ---------------------------------------------------------------------------
# sr-compare


def cmd_sr_compare(args, cfg: dict, seed: int) -> int:
    config = _sweep_config(cfg, seed)
    records, summary, failures = sr_compare(config, workers=args.workers)
    _report_failures(failures)
    out = args.out
    if args.format == "csv":
        write_sr_csv(records, os.path.join(out, "sr_compare.csv"))
    else:
        _write_json_rows(SR_HEADER, records, os.path.join(out, "sr_compare.json"))
    summary = dict(summary)
    summary["failures"] = [{"env_index": i, "error": m} for i, m in failures]
    _write_summary(out, "sr_compare_summary.json", summary)
    _write_manifest(out, "sr-compare", seed, cfg)
    print(
        "sr-compare: mean empiric error uniform "
        f"{summary['mean_e_hat_uniform']:.4f} vs reference {summary['mean_e_hat_reference']:.4f} "
        f"(sign test p={summary['sign_test']['p_value']:.4g}, {summary['direction']})"
    )
    return 0


# ---------------------------------------------------------------------------
# regret


REGRET_SCHEMA = [
    Field("K", _int, 3, "tool", "number of arms"),
    Field("S", _int, 2, "tool", "number of states"),
    Field("mu", _float_list, (0.8, 0.6, 0.4), "tool", "per-arm global utilities"),
    Field("sigma2", _float, 0.05, "tool", "local-mean prior variance"),
    Field("m", _float_list, (), "tool",
          "explicit per-(arm,state) local means, row-major; empty draws them from mu"),
    Field("env_seed", _int, 0, "tool", "environment instantiation seed"),
    Field("reward_family", _str, "bernoulli", "protocol", "bernoulli or truncated_gaussian"),
    Field("state_mode", _str, "iid_uniform", "tool", "state sequence generator"),
    Field("alpha", _float, 3.0, "tool", "optimism exploration rate, must exceed 2"),
    Field("checkpoints", _int_list, (100, 1000, 10000), "protocol", "horizons to report"),
    Field("runs", _int, 1000, "protocol", "Monte Carlo runs"),
]


def cmd_regret(args, cfg: dict, seed: int) -> int:
    checkpoints = tuple(sorted(cfg["checkpoints"]))
    if cfg["K"] != len(cfg["mu"]):
        raise ConfigurationError(f"mu has {len(cfg['mu'])} entries for K={cfg['K']}")
    seq = make_state_sequence(cfg["S"], checkpoints[-1], mode=cfg["state_mode"], seed=seed)
    spec = EnvironmentSpec(
        K=cfg["K"], S=cfg["S"], mu=cfg["mu"], sigma2=cfg["sigma2"],
        state_sequence=seq, seed=cfg["env_seed"], reward_family=cfg["reward_family"],
    )
    if cfg["m"]:
        if len(cfg["m"]) != cfg["K"] * cfg["S"]:
            raise ConfigurationError(f"m needs K*S={cfg['K'] * cfg['S']} entries, got {len(cfg['m'])}")
        env = Environment(spec=spec, m=np.array(cfg["m"]).reshape(cfg["K"], cfg["S"]))
    else:
        env = instantiate(spec)
    curve = estimate_pseudoregret(env, cfg["alpha"], checkpoints, cfg["runs"])
    out = args.out
    header = ["checkpoint", "regret", "regret_se", "thm1_bound"]
    rows = [
        (c, curve.mean[i], curve.se[i], curve.bound[i]) for i, c in enumerate(curve.checkpoints)
    ]
    if args.format == "csv":
        with open(os.path.join(out, "regret.csv"), "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([row[0]] + [repr(float(x)) for x in row[1:]])
    else:
        payload = [dict(zip(header, (int(r[0]), float(r[1]), float(r[2]), float(r[3])))) for r in rows]
        with open(os.path.join(out, "regret.json"), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    _write_manifest(out, "regret", seed, cfg)
    tail = rows[-1]
    print(f"regret: n={tail[0]} empirical {tail[1]:.3f} (se {tail[2]:.3f}) bound {tail[3]:.3f}")
    return 0


# ---------------------------------------------------------------------------
# triage


TRIAGE_SCHEMA = [
    Field("n", _int, 242, "protocol", "population size"),
    Field("n_severe", _int, 42, "protocol", "number of truly at-risk individuals"),
    Field("stage_noise", _float_list, (0.45, 0.30, 0.10), "tool",
          "per-stage error probabilities, strictly decreasing"),
    Field("k", _int_list, (200, 100, 50), "protocol", "cohort sizes after each stage"),
    Field("total_budget", _int, 553, "protocol", "named total budget in dollars"),
    Field("scheme", _str, "", "protocol", "budget split for $1,300/$2,200: more3, more2 or equal"),
    Field("policy", _str, "round_robin", "tool", "within-stage allocation: round_robin or ucb"),
    Field("encoding", _str, "linear", "protocol", "label encoding: linear, binary or exponential"),
    Field("num_seeds", _int, 100, "tool", "independent repetitions"),
    Field("baselines", _str_list, BASELINES, "protocol", "reference approaches to run"),
    Field("human_csv", _str, "", "tool", "recorded human evaluations for replay (optional)"),
    Field("machine_pred", _str, "", "tool", "machine prediction vectors for replay (optional)"),
]


def _cell(values, decimals=4):
    """Render mean with a +-2*SD spread when it varies across seeds."""
    vals = [v for v in values if v is not None]
    if not vals:
        return ""
    mean = float(np.mean(vals))
    sd = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
    if sd == 0.0:
        if mean == int(mean):
            return str(int(mean))
        return f"{mean:.{decimals}f}"
    return f"{mean:.{decimals}f}±{2 * sd:.{decimals}f}"


def _money_cell(values):
    """Dollar amounts are exact multiples of 0.001; keep the mill digit."""
    vals = [v for v in values if v is not None]
    if not vals:
        return ""
    mean = float(np.mean(vals))
    sd = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
    text = f"{mean:.2f}" if round(mean, 2) == round(mean, 3) else f"{mean:.3f}"
    if sd == 0.0:
        return text
    return f"{text}±{2 * sd:.3f}"


def cmd_triage(args, cfg: dict, seed: int) -> int:
    k = tuple(cfg["k"])
    if len(k) != 3:
        raise ConfigurationError(f"k needs exactly 3 entries, got {k}")
    scheme = cfg["scheme"] or None
    stages = default_stages(cfg["n"], k, cfg["total_budget"], scheme)
    replay = bool(cfg["human_csv"] or cfg["machine_pred"])
    if replay and not (cfg["human_csv"] and cfg["machine_pred"]):
        raise ConfigurationError("replay needs both human_csv and machine_pred")
    noise = tuple(cfg["stage_noise"])
    if len(noise) != 3:
        raise ConfigurationError(f"stage_noise needs exactly 3 entries, got {noise}")

    rows: dict[str, list[dict]] = {}
    approaches = ["MAB", "MAB*"] + list(cfg["baselines"])
    for s in range(cfg["num_seeds"]):
        run_seed = int(substream(seed, s, "triage-seed").integers(0, 2**62))
        if replay:
            pop = load_evaluations(cfg["human_csv"], cfg["machine_pred"])
        else:
            pop = synth_population(cfg["n"], cfg["n_severe"], noise, seed=run_seed)
        result = run_pipeline(pop, stages, policy=cfg["policy"], seed=run_seed,
                              encoding=cfg["encoding"])
        for approach in approaches:
            if approach == "MAB":
                res, mode = result, "mab"
            elif approach == "MAB*":
                res, mode = result, "mab_star"
            else:
                res, mode = run_baseline(approach, pop, seed=run_seed), "mab"
            m = metrics(res, pop, mode)
            rows.setdefault(approach, []).append({
                "budget": dollars(res.spend_milli),
                "evaluated": len(res.evaluated),
                "pop_sensitivity": m.pop_sensitivity,
                "cohort_sensitivity": m.cohort_sensitivity,
                "precision": m.cohort_precision,
                "specificity": m.cohort_specificity,
                "tp": m.cohort.tp, "fp": m.cohort.fp, "fn": m.cohort.fn, "tn": m.cohort.tn,
            })
    header = ["approach", "budget", "evaluated", "pop_sensitivity", "cohort_sensitivity",
              "precision", "specificity", "tp", "fp", "fn", "tn"]
    table = []
    for approach in approaches:
        seeds_data = rows[approach]
        table.append([
            approach,
            _money_cell([d["budget"] for d in seeds_data]),
            _cell([d["evaluated"] for d in seeds_data], decimals=2),
            _cell([d["pop_sensitivity"] for d in seeds_data]),
            _cell([d["cohort_sensitivity"] for d in seeds_data]),
            _cell([d["precision"] for d in seeds_data]),
            _cell([d["specificity"] for d in seeds_data]),
            _cell([d["tp"] for d in seeds_data], decimals=2),
            _cell([d["fp"] for d in seeds_data], decimals=2),
            _cell([d["fn"] for d in seeds_data], decimals=2),
            _cell([d["tn"] for d in seeds_data], decimals=2),
        ])
    out = args.out
    if args.format == "csv":
        with open(os.path.join(out, "triage.csv"), "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(table)
    else:
        payload = [dict(zip(header, row)) for row in table]
        with open(os.path.join(out, "triage.json"), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    manifest_cfg = dict(cfg)
    manifest_cfg["stage_budgets_dollars"] = [dollars(st.budget_milli) for st in stages]
    _write_manifest(out, "triage", seed, manifest_cfg)
    mab_pop = _cell([d["pop_sensitivity"] for d in rows["MAB"]])
    print(f"triage: {len(approaches)} approaches x {cfg['num_seeds']} seeds; "
          f"pipeline population sensitivity {mab_pop}")
    return 0


# ---------------------------------------------------------------------------
# verify


def _suite_transforms() -> tuple[bool, str]:
    grid = np.linspace(0.0, 1.0, 101)
    for family in (BOUNDED_UNIT, PsiFamily.gaussian(0.2)):
        rt = psi_star_inv(family, psi_star(family, grid))
        if np.max(np.abs(rt - grid)) > 1e-12:
            return False, f"round trip off for {family.kind}"
        lams = np.linspace(0.0, 8.0, 33)
        for eps in grid[::10]:
            vals = lams * eps - psi(family, lams)
            if np.any(vals > psi_star(family, eps) + 1e-9):
                return False, f"conjugate not an upper envelope for {family.kind}"
        star = psi_star(family, grid)
        if np.any(np.diff(star) < -1e-15):
            return False, f"conjugate not monotone for {family.kind}"
    return True, "round trip, envelope and monotonicity hold"


def _suite_environment() -> tuple[bool, str]:
    spec = EnvironmentSpec(K=4, S=3, mu=(0.2, 0.5, 0.7, 0.9), sigma2=0.05,
                           state_sequence=make_state_sequence(3, 120, "round_robin"), seed=11)
    a, b = instantiate(spec), instantiate(spec)
    if not np.array_equal(a.m, b.m):
        return False, "instantiation not deterministic"
    bumped = EnvironmentSpec(K=4, S=3, mu=tuple(min(u + 0.05, 1.0) for u in spec.mu),
                             sigma2=0.05, state_sequence=spec.state_sequence, seed=11)
    if np.any(instantiate(bumped).m < a.m - 1e-15):
        return False, "clamp monotonicity violated"
    g = gaps(a)
    if np.any(np.abs(g.delta_m.min(axis=0)) > 1e-15) or np.any(g.delta_sigma < 0) or np.any(g.delta_mu < 0):
        return False, "gap conventions violated"
    return True, "determinism, clamp monotonicity and gap conventions hold"


def _suite_allocation() -> tuple[bool, str]:
    spec = EnvironmentSpec(K=3, S=2, mu=(0.8, 0.5, 0.2), sigma2=0.05,
                           state_sequence=make_state_sequence(2, 90, "iid_uniform", seed=5), seed=3)
    env = instantiate(spec)
    schedule = sr_schedule("uniform", 3, 90)
    res = successive_rejects(env, schedule, substream(1, "verify"))
    if len(res.steps) != 90:
        return False, "SR pull count mismatch"
    table = sr_counts(spec.state_sequence, schedule, 3, 2)
    if not np.array_equal(res.n_table, table):
        return False, "SR count table mismatch"
    counts = state_counts(spec.state_sequence, 2, 90)
    per_cell = np.zeros((3, 2), dtype=int)
    for _, s, arm, _, _ in res.steps:
        per_cell[arm, s] += 1
    if np.any(per_cell.sum(axis=0) != counts):
        return False, "per-state pulls do not add up"
    return True, "SR trace agrees with the closed-form counters"


def _suite_bounds() -> tuple[bool, str]:
    spec = EnvironmentSpec(K=3, S=2, mu=(0.8, 0.5, 0.2), sigma2=0.05,
                           state_sequence=make_state_sequence(2, 600, "round_robin"), seed=7)
    env = instantiate(spec)
    prev = None
    for n in (100, 200, 400, 600):
        e_b, eh_b = thm2_bounds(env, n, BOUNDED_UNIT)
        for rep in (e_b, eh_b):
            if not 0.0 <= rep.clamped_value <= 1.0 or rep.raw_value < rep.clamped_value - 1e-15:
                return False, "clamping broken"
        if prev is not None and eh_b.raw_value > prev + 1e-12:
            return False, "bound not shrinking with horizon"
        prev = eh_b.raw_value
    return True, "clamping and horizon monotonicity hold"


def _suite_estimators() -> tuple[bool, str]:
    spec = EnvironmentSpec(K=2, S=2, mu=(0.9, 0.1), sigma2=0.01,
                           state_sequence=make_state_sequence(2, 80, "round_robin"), seed=2)
    env = Environment(spec=spec, m=np.array([[0.9, 0.9], [0.1, 0.1]]))
    a = estimate_bai(env, "uniform_eba", 200)
    b = estimate_bai(env, "uniform_eba", 200)
    if a != b:
        return False, "estimator not reproducible"
    if not 0.0 <= a.e_hat <= 1.0 or a.e_hat > 0.05:
        return False, "estimator implausible on an easy instance"
    return True, "reproducibility and sanity hold"


def _suite_triage() -> tuple[bool, str]:
    pop = synth_population(242, 42, seed=4)
    four = run_baseline("4Experts", pop)
    if four.spend_milli != 968 * STAGE_COSTS_MILLI[2]:
        return False, "full-consensus cost accounting off"
    stages = default_stages(242)
    result = run_pipeline(pop, stages, seed=4)
    for st, outcome in zip(stages, result.stages):
        if outcome.spend_milli > st.budget_milli:
            return False, "stage overspent its budget"
        if len(outcome.survivors) != st.cohort_out:
            return False, "cohort size not exact"
    m = metrics(four, pop)
    if (m.pop_sensitivity, m.pop_precision, m.pop_specificity) != (1.0, 1.0, 1.0):
        return False, "consensus baseline not perfect"
    return True, "budgets, cohort sizes and consensus metrics hold"


VERIFY_SUITES = [
    ("transforms", _suite_transforms),
    ("environment", _suite_environment),
    ("allocation", _suite_allocation),
    ("bounds", _suite_bounds),
    ("estimators", _suite_estimators),
    ("triage", _suite_triage),
]


def cmd_verify(args, cfg: dict, seed: int) -> int:
    results = []
    for name, fn in VERIFY_SUITES:
        try:
            ok, detail = fn()
        except Exception as exc:  # noqa: BLE001 - a crash is a failed suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append({"suite": name, "passed": bool(ok), "detail": detail})
        print(f"{name:<12} {'PASS' if ok else 'FAIL'}  {detail}")
    _write_summary(args.out, "verify.json", {"suites": results})
    _write_manifest(args.out, "verify", seed, cfg)
    return 0 if all(r["passed"] for r in results) else 1


# ---------------------------------------------------------------------------
# entry point


COMMANDS = {
    "tightness": (cmd_tightness, TIGHTNESS_SCHEMA),
    "sr-compare": (cmd_sr_compare, SR_SCHEMA),
    "regret": (cmd_regret, REGRET_SCHEMA),
    "triage": (cmd_triage, TRIAGE_SCHEMA),
    "verify": (cmd_verify, []),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="statebandits",
        description="Simulation, bound verification and budgeted screening studies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, schema) in COMMANDS.items():
        p = sub.add_parser(
            name,
            formatter_class=argparse.RawDescriptionHelpFormatter,
            description=f"Config keys for {name}:\n{_schema_help(schema)}" if schema else None,
        )
        p.add_argument("--config", help="key = value config file, or a manifest JSON to re-run")
        p.add_argument("--seed", type=int, default=None, help="master seed (tool default 0)")
        p.add_argument("--out", default=".", help="output directory (tool default .)")
        p.add_argument("--workers", type=int, default=1,
                       help="environment-level parallelism for the sweep commands (tool default 1)")
        p.add_argument("--format", choices=("csv", "json"), default="csv",
                       help="tabular output format (tool default csv)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler, schema = COMMANDS[args.command]
    try:
        raw, manifest_seed = ({}, None)
        if args.config:
            raw, manifest_seed = load_config(args.config, args.command)
        cfg = resolve_config(schema, raw)
        seed = args.seed if args.seed is not None else (manifest_seed if manifest_seed is not None else 0)
        if args.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        os.makedirs(args.out, exist_ok=True)
        return handler(args, cfg, seed)
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - runtime failure envelope
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
