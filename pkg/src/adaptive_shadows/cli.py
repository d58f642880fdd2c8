"""Batch experiment runner behind the ``adsh`` entry point.

One subcommand per experiment id:

    attack, dp-median, pmw, threshold, subspace, ifpc-local, ifpc-pauli,
    povm-concentration, pauli-bell

Shared flags: --seed, --trials, --out, --config, --threads. Config files are
flat ``key = value`` lines (``#`` comments allowed); any key may also be set
through an environment variable with the ``ADSH_`` prefix (``ADSH_EPSILON=0.2``),
and --seed/--trials/--threads win over both. Each run writes
``<out>/<id>.csv`` (RFC-4180) and ``<out>/<id>_summary.json`` with means,
stds and a pass/fail verdict against the embedded thresholds; every data row
carries (seed, build, config_hash) so outputs are self-describing. Reruns
with the same seed and config are byte-identical.

Exit codes: 0 success, 1 an embedded acceptance threshold was missed,
2 bad experiment id / config / paths.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import math
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .attack import attack_experiment
from .core import (DenseState, HermitianDense, MechanismConfig, PauliString,
                   RankOneProjector, expectation, spawn_rngs)
from .errors import AcceptanceFailure, ConfigError, Halted, MalformedCsv
from .ifpc import EmpiricalMeanMechanism, run_local_attack, run_pauli_attack
from .mechanisms import (DpMedianSession, PmwSession, adaptive_pauli_mechanism)
from .shadows import (collect_povm_snapshots, povm_tail_bound,
                      shadow_norm_bound, snapshot_values)
from .subspace import (ExactTeacher, run_single_rank, single_rank_mistake_cap)
from .threshold_search import SparseVectorSession

ENV_PREFIX = "ADSH_"

EXPERIMENT_IDS = ("attack", "dp-median", "pmw", "threshold", "subspace",
                  "ifpc-local", "ifpc-pauli", "povm-concentration",
                  "pauli-bell")

# config keys the experiment spec recognizes: every MechanismConfig field
# except the seed (a flag), plus the handful of experiment-specific extras
_CFG_FIELDS = ("N", "M", "epsilon", "delta", "B", "R", "ell", "K",
               "d_users", "m_bits")
_INT_FIELDS = {"N", "M", "R", "ell", "K", "d_users", "m_bits"}
_EXTRA_FIELDS = ("m_grid", "gamma", "tolerance")

# per-experiment defaults; anything not listed falls back to MechanismConfig
DEFAULT_CONFIGS: dict[str, dict] = {
    "attack": {"N": 10_000,
               "m_grid": "100,200,400,800,1600,3200,6400,10000"},
    "dp-median": {"N": 8192, "M": 16, "epsilon": 0.3, "K": 256, "m_bits": 3},
    "pmw": {"N": 32768, "M": 200, "epsilon": 0.5, "delta": 0.05,
            "ell": 20000, "m_bits": 8, "tolerance": 0.1},
    "threshold": {"d_users": 8, "M": 200, "epsilon": 0.3, "ell": 10,
                  "delta": 0.05},
    "subspace": {"m_bits": 4, "M": 64, "epsilon": 0.3},
    "ifpc-local": {"N": 5, "M": 625},
    "ifpc-pauli": {"N": 5, "M": 625},
    "povm-concentration": {"m_bits": 3, "N": 20000},
    "pauli-bell": {"m_bits": 3, "N": 100_000, "M": 100, "epsilon": 0.15},
}

DEFAULT_TRIALS = 20

CONCENTRATION_TAUS = (0.25, 0.5, 1.0)


# ---------------------------------------------------------------------------
# spec assembly
# ---------------------------------------------------------------------------

@dataclass
class ExperimentSpec:
    """A fully resolved run request: id, knobs, output, seeding."""

    experiment: str
    cfg: MechanismConfig
    out_dir: Path
    seed: int = 0
    trials: int = DEFAULT_TRIALS
    threads: int = 1
    extras: dict = field(default_factory=dict)


def load_config(path) -> dict[str, str]:
    """Flat key=value file; '#' starts a comment; blank lines are skipped."""
    out: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"{path}:{lineno}: empty key or value")
        out[key] = value
    return out


def _apply_env(conf: dict, environ: dict) -> None:
    for key in list(_CFG_FIELDS) + list(_EXTRA_FIELDS):
        env_key = ENV_PREFIX + key.upper()
        if env_key in environ:
            conf[key] = environ[env_key]


def build_spec(experiment: str, seed: int, trials: int, out: str,
               config_path: Optional[str], threads: int,
               environ: Optional[dict] = None) -> ExperimentSpec:
    if experiment not in EXPERIMENT_IDS:
        raise ConfigError(f"unknown experiment id {experiment!r}; "
                          f"choose from {', '.join(EXPERIMENT_IDS)}")
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    conf: dict = dict(DEFAULT_CONFIGS[experiment])
    if config_path is not None:
        conf.update(load_config(config_path))
    if environ is None:
        import os
        environ = os.environ
    _apply_env(conf, environ)

    cfg_kwargs: dict = {"seed": seed}
    extras: dict = {}
    for key, value in conf.items():
        if key in _CFG_FIELDS:
            caster = int if key in _INT_FIELDS else float
            try:
                cfg_kwargs[key] = caster(value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"config key {key}={value!r}: {exc}") from exc
        elif key in _EXTRA_FIELDS:
            extras[key] = value
        else:
            raise ConfigError(f"unrecognized config key {key!r}")
    try:
        cfg = MechanismConfig(**cfg_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    out_dir = Path(out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output path {out} not writable: {exc}") from exc
    return ExperimentSpec(experiment=experiment, cfg=cfg, out_dir=out_dir,
                          seed=seed, trials=trials, threads=threads,
                          extras=extras)


def build_id() -> str:
    """git-describe-style build identifier, with a static fallback."""
    try:
        root = Path(__file__).resolve().parents[2]
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=root, capture_output=True, text=True, timeout=10)
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    try:
        from importlib.metadata import version
        return f"artifact-{version('artifact')}"
    except Exception:
        return "artifact-unknown"


def config_hash(spec: ExperimentSpec) -> str:
    items = {k: v for k, v in dataclasses.asdict(spec.cfg).items()
             if k != "seed"}
    items.update(spec.extras)
    items["experiment"] = spec.experiment
    items["trials"] = spec.trials
    blob = ";".join(f"{k}={items[k]}" for k in sorted(items))
    return hashlib.sha1(blob.encode()).hexdigest()[:10]


def _map_trials(fn: Callable, count: int, seed: int, threads: int) -> list:
    """Run fn(trial_index, rng) over a deterministic per-trial rng tree."""
    rngs = spawn_rngs(seed, count)
    if threads <= 1:
        return [fn(t, rngs[t]) for t in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda t: fn(t, rngs[t]), range(count)))


# ---------------------------------------------------------------------------
# shared state/stream builders
# ---------------------------------------------------------------------------

def _haar_unit(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def _heavy_state(d: int, rng: np.random.Generator,
                 weights=(0.4, 0.25, 0.15, 0.1)) -> DenseState:
    """Random density with a few dominant eigenvalues (rest spread flat)."""
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, _ = np.linalg.qr(g)
    lam = np.full(d, (1.0 - sum(weights)) / max(d - len(weights), 1))
    lam[:len(weights)] = weights
    rho = (q * lam) @ q.conj().T
    return DenseState(0.5 * (rho + rho.conj().T))


# ---------------------------------------------------------------------------
# runners: each returns (fieldnames, rows, metrics, passed)
# ---------------------------------------------------------------------------

def _run_attack(spec: ExperimentSpec):
    try:
        grid = [int(x) for x in spec.extras["m_grid"].split(",")]
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad m_grid: {exc}") from exc
    rows = attack_experiment(spec.cfg.N, grid, spec.trials, spec.seed)
    adaptive = [r for r in rows if r["mode"] == "adaptive"]
    nonadaptive = [r for r in rows if r["mode"] == "nonadaptive"]
    gap = adaptive[-1]["error_mean"] - nonadaptive[-1]["error_mean"]
    worst_nonadaptive = max(r["error_mean"] for r in nonadaptive)
    passed = gap > 0.0 and worst_nonadaptive <= 0.3
    metrics = {
        "adaptive_error_at_max_M": adaptive[-1]["error_mean"],
        "nonadaptive_error_max": worst_nonadaptive,
        "final_gap": gap,
    }
    fields = ["M", "N", "runs", "mode", "error_mean", "error_std", "seed"]
    return fields, rows, metrics, passed


def _run_dp_median(spec: ExperimentSpec):
    cfg = spec.cfg
    d = 2 ** cfg.m_bits
    gamma = float(spec.extras["gamma"]) if "gamma" in spec.extras else None

    def one(trial: int, rng: np.random.Generator):
        state = _heavy_state(d, rng)
        ds = collect_povm_snapshots(state, cfg.N, rng)
        session = DpMedianSession(ds, cfg, rng=rng, gamma=gamma)
        out = []
        for k in range(cfg.M):
            obs = RankOneProjector(_haar_unit(d, rng))
            answer = session.query(obs)
            truth = expectation(state, obs)
            out.append({"trial": trial, "query": k, "answer": answer,
                        "truth": truth, "error": abs(answer - truth)})
        return out

    results = _map_trials(one, spec.trials, spec.seed, spec.threads)
    rows = [r for chunk in results for r in chunk]
    per_trial_ok = [all(r["error"] <= cfg.epsilon for r in chunk)
                    for chunk in results]
    frac_ok = float(np.mean(per_trial_ok))
    metrics = {
        "max_error": max(r["error"] for r in rows),
        "mean_error": float(np.mean([r["error"] for r in rows])),
        "trials_within_epsilon": frac_ok,
    }
    return (["trial", "query", "answer", "truth", "error"], rows, metrics,
            frac_ok >= 0.95)


def _run_pmw(spec: ExperimentSpec):
    cfg = spec.cfg
    U = 2 ** cfg.m_bits
    tolerance = float(spec.extras.get("tolerance", 0.1))

    def one(trial: int, rng: np.random.Generator):
        # skewed universe histogram: squared-exponential weights
        raw = np.exp(-2.0 * rng.exponential(size=U))
        hist = raw / raw.sum()
        session = PmwSession(hist, cfg.N, cfg, rng=rng)
        out = []
        prev_sign = 1.0
        for k in range(cfg.M):
            values = rng.choice([-1.0, 1.0], size=U)
            if k % 3 == 2:
                values = values * prev_sign  # fold previous answer back in
            answer = session.query(values)
            truth = float(hist @ values)
            prev_sign = 1.0 if answer >= truth else -1.0
            out.append({"trial": trial, "query": k, "answer": answer,
                        "truth": truth, "error": abs(answer - truth)})
        return out

    results = _map_trials(one, spec.trials, spec.seed, spec.threads)
    rows = [r for chunk in results for r in chunk]
    per_trial_ok = [all(r["error"] <= tolerance for r in chunk)
                    for chunk in results]
    frac_ok = float(np.mean(per_trial_ok))
    metrics = {
        "max_error": max(r["error"] for r in rows),
        "tolerance": tolerance,
        "trials_within_tolerance": frac_ok,
    }
    return (["trial", "query", "answer", "truth", "error"], rows, metrics,
            frac_ok >= 0.95)


def _run_threshold(spec: ExperimentSpec):
    cfg = spec.cfg

    def one(trial: int, rng: np.random.Generator):
        truths = rng.uniform(0.0, 1.0, size=cfg.d_users)
        session = SparseVectorSession(truths, cfg.epsilon, cfg.delta,
                                      cfg.ell, cfg.M, rng)
        violations = 0
        asked = 0
        for _ in range(cfg.M):
            value = float(truths[rng.integers(cfg.d_users)])
            theta = float(np.clip(value + rng.uniform(-cfg.epsilon,
                                                      cfg.epsilon), 0.0, 1.0))
            try:
                answer = session.ask(value, theta)
            except Halted:
                break
            asked += 1
            if answer == "No" and value <= theta - cfg.epsilon:
                violations += 1
            if answer == "Yes" and value >= theta + cfg.epsilon:
                violations += 1
        return {"trial": trial, "asked": asked, "violations": violations,
                "no_count": session.no_count}

    rows = _map_trials(one, spec.trials, spec.seed, spec.threads)
    total = sum(r["violations"] for r in rows)
    metrics = {
        "total_violations": total,
        "mean_asked": float(np.mean([r["asked"] for r in rows])),
    }
    return (["trial", "asked", "violations", "no_count"], rows, metrics,
            total == 0)


def _run_subspace(spec: ExperimentSpec):
    cfg = spec.cfg
    d = 2 ** cfg.m_bits
    cap = single_rank_mistake_cap(cfg.epsilon)

    def one(trial: int, rng: np.random.Generator):
        state = _heavy_state(d, rng)
        lam, vecs = np.linalg.eigh(state.matrix)
        order = np.argsort(lam)[::-1]
        queries = []
        for k in range(cfg.M):
            if k % 3 == 0:
                v = vecs[:, order[k % 4]]
            else:
                base = vecs[:, order[rng.integers(4)]]
                noise = _haar_unit(d, rng)
                v = 0.9 * base + math.sqrt(1 - 0.81) * noise
                v = v / np.linalg.norm(v)
            queries.append(RankOneProjector(v))
        teacher = ExactTeacher(state, cfg.epsilon)
        run = run_single_rank(state, queries, cfg, teacher, rng=rng)
        errs = [abs(r.answer - r.truth) for r in run.transcript.rounds]
        return {"trial": trial, "mistakes": run.ledger.mistake_count,
                "max_error": max(errs), "k_final": run.subspace.k}

    rows = _map_trials(one, spec.trials, spec.seed, spec.threads)
    worst = max(r["max_error"] for r in rows)
    most = max(r["mistakes"] for r in rows)
    metrics = {"mistake_cap": cap, "max_mistakes": most, "max_error": worst}
    passed = most <= cap and worst <= cfg.epsilon
    return (["trial", "mistakes", "max_error", "k_final"], rows, metrics,
            passed)


def _ifpc_runner(spec: ExperimentSpec, variant: Callable):
    cfg = spec.cfg

    def one(trial: int, rng: np.random.Generator):
        res = variant(EmpiricalMeanMechanism(), cfg.N, cfg.M, rng)
        return {"trial": trial, "forced": int(res.forced_error),
                "forced_round": -1 if res.forced_round is None
                else res.forced_round,
                "max_error": res.max_error, "theta": res.state.theta,
                "psi": res.state.psi,
                "accused_count": len(res.state.accused)}

    rows = _map_trials(one, spec.trials, spec.seed, spec.threads)
    frac = float(np.mean([r["forced"] for r in rows]))
    metrics = {
        "forced_fraction": frac,
        "mean_theta": float(np.mean([r["theta"] for r in rows])),
        "max_psi": max(r["psi"] for r in rows),
    }
    fields = ["trial", "forced", "forced_round", "max_error", "theta", "psi",
              "accused_count"]
    return fields, rows, metrics, frac >= 0.9


def _run_ifpc_local(spec: ExperimentSpec):
    return _ifpc_runner(spec, run_local_attack)


def _run_ifpc_pauli(spec: ExperimentSpec):
    return _ifpc_runner(spec, run_pauli_attack)


def _run_povm_concentration(spec: ExperimentSpec):
    cfg = spec.cfg
    d = 2 ** cfg.m_bits

    def one(trial: int, rng: np.random.Generator):
        state = _heavy_state(d, rng)
        obs = RankOneProjector(_haar_unit(d, rng))
        B = shadow_norm_bound(obs, "povm")
        ds = collect_povm_snapshots(state, cfg.N, rng)
        centered = snapshot_values(ds, obs) - expectation(state, obs)
        out = []
        for tau in CONCENTRATION_TAUS:
            tail = float(np.mean(np.abs(centered) >= tau))
            out.append({"trial": trial, "tau": tau, "tail": tail,
                        "bound": povm_tail_bound(tau, B)})
        return out

    results = _map_trials(one, spec.trials, spec.seed, spec.threads)
    rows = [r for chunk in results for r in chunk]
    # pool across trials per tau: the bound is on the underlying probability
    ok = True
    pooled = {}
    for tau in CONCENTRATION_TAUS:
        tails = [r["tail"] for r in rows if r["tau"] == tau]
        bound = next(r["bound"] for r in rows if r["tau"] == tau)
        pooled[f"tail_{tau}"] = float(np.mean(tails))
        ok = ok and float(np.mean(tails)) <= bound
    metrics = dict(pooled)
    return (["trial", "tau", "tail", "bound"], rows, metrics, ok)


def _run_pauli_bell(spec: ExperimentSpec):
    cfg = spec.cfg
    n = cfg.m_bits
    tolerance = float(spec.extras.get("tolerance", cfg.epsilon))
    letters = "IXYZ"

    def one(trial: int, rng: np.random.Generator):
        state = _heavy_state(2 ** n, rng)
        queries = []
        while len(queries) < cfg.M:
            s = "".join(letters[i] for i in rng.integers(0, 4, size=n))
            if s != "I" * n:
                queries.append(PauliString(s))
        answers = adaptive_pauli_mechanism(state, queries, cfg, rng)
        out = []
        for k, (P, a) in enumerate(zip(queries, answers)):
            truth = expectation(state, P)
            out.append({"trial": trial, "query": k, "pauli": P.symbols,
                        "answer": a, "truth": truth,
                        "error": abs(a - truth)})
        return out

    results = _map_trials(one, spec.trials, spec.seed, spec.threads)
    rows = [r for chunk in results for r in chunk]
    per_trial_ok = [all(r["error"] <= tolerance for r in chunk)
                    for chunk in results]
    frac_ok = float(np.mean(per_trial_ok))
    metrics = {
        "max_error": max(r["error"] for r in rows),
        "tolerance": tolerance,
        "trials_within_tolerance": frac_ok,
    }
    return (["trial", "query", "pauli", "answer", "truth", "error"], rows,
            metrics, frac_ok >= 0.95)


EXPERIMENTS: dict[str, Callable] = {
    "attack": _run_attack,
    "dp-median": _run_dp_median,
    "pmw": _run_pmw,
    "threshold": _run_threshold,
    "subspace": _run_subspace,
    "ifpc-local": _run_ifpc_local,
    "ifpc-pauli": _run_ifpc_pauli,
    "povm-concentration": _run_povm_concentration,
    "pauli-bell": _run_pauli_bell,
}


# ---------------------------------------------------------------------------
# output plumbing
# ---------------------------------------------------------------------------

def _write_csv(path: Path, fieldnames: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames,
                                quoting=csv.QUOTE_MINIMAL)
        writer.writeheader()
        writer.writerows(rows)


def run(spec: ExperimentSpec) -> int:
    """Execute one experiment spec; writes CSV + summary, returns exit code.

    Raises AcceptanceFailure (after writing both artifacts) when the
    embedded threshold is missed, ConfigError on a bad spec.
    """
    runner = EXPERIMENTS.get(spec.experiment)
    if runner is None:
        raise ConfigError(f"unknown experiment id {spec.experiment!r}")
    build = build_id()
    chash = config_hash(spec)
    fieldnames, rows, metrics, passed = runner(spec)
    for row in rows:
        row.setdefault("seed", spec.seed)
        row["build"] = build
        row["config_hash"] = chash
    out_fields = list(fieldnames)
    for extra_col in ("seed", "build", "config_hash"):
        if extra_col not in out_fields:
            out_fields.append(extra_col)
    csv_path = spec.out_dir / f"{spec.experiment}.csv"
    _write_csv(csv_path, out_fields, rows)

    summary = {
        "experiment": spec.experiment,
        "seed": spec.seed,
        "trials": spec.trials,
        "build": build,
        "config_hash": chash,
        "config": {k: v for k, v in dataclasses.asdict(spec.cfg).items()},
        "extras": spec.extras,
        "metrics": metrics,
        "pass": bool(passed),
    }
    summary_path = spec.out_dir / f"{spec.experiment}_summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True)
                            + "\n")
    if not passed:
        raise AcceptanceFailure(
            f"{spec.experiment}: embedded threshold missed; see {summary_path}")
    return 0


# ---------------------------------------------------------------------------
# plot-data export
# ---------------------------------------------------------------------------

_METADATA_COLUMNS = {"seed", "build", "config_hash", "runs", "N", "trials"}
_STAT_RENAMES = {"error_mean": "mean", "error_std": "std"}


def emit_plot_data(csv_path, out_path=None) -> list[dict]:
    """Reshape an experiment CSV into plain long-format plotting rows.

    Row-preserving: renames error_mean/error_std to mean/std and drops
    metadata columns (seed, build, ...) that are constant across the file.
    Tables already in long form come back unchanged.
    """
    try:
        with open(csv_path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise MalformedCsv(f"{csv_path}: no header row")
            rows = list(reader)
    except OSError as exc:
        raise MalformedCsv(f"cannot read {csv_path}: {exc}") from exc
    if not rows:
        raise MalformedCsv(f"{csv_path}: no data rows")
    drop = {col for col in reader.fieldnames
            if col in _METADATA_COLUMNS
            and len({r[col] for r in rows}) == 1}
    out_fields = [_STAT_RENAMES.get(col, col)
                  for col in reader.fieldnames if col not in drop]
    out_rows = [{_STAT_RENAMES.get(col, col): row[col]
                 for col in reader.fieldnames if col not in drop}
                for row in rows]
    if out_path is not None:
        _write_csv(Path(out_path), out_fields, out_rows)
    return out_rows


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adsh",
        description="Seeded experiment runner; writes CSV + summary JSON.",
        epilog=f"Config keys: {', '.join(_CFG_FIELDS + _EXTRA_FIELDS)}; "
               f"each can be overridden via {ENV_PREFIX}<KEY>.")
    sub = parser.add_subparsers(dest="experiment", required=True,
                                metavar="{" + ",".join(EXPERIMENT_IDS) + "}")
    for exp_id in EXPERIMENT_IDS:
        p = sub.add_parser(exp_id)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
        p.add_argument("--out", default="results")
        p.add_argument("--config", default=None)
        p.add_argument("--threads", type=int, default=1)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        spec = build_spec(args.experiment, args.seed, args.trials, args.out,
                          args.config, args.threads)
        return run(spec)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AcceptanceFailure as exc:
        print(f"FAIL: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
