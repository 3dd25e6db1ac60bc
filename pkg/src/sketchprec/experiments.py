"""Grid benchmarks: generate, sketch, decode, score, and baselines.

A declarative :class:`ExperimentConfig` describes one benchmark grid. Every
``(m, lambda, repeat)`` cell builds its own operator, sketches the data (or
the true covariance in the infinite-sample regime), decodes and scores
against the ground truth. Baseline estimators (graphical lasso on the
empirical covariance, and its pseudo-inverse) run per ``(lambda, repeat)``
and ``(repeat,)`` respectively. Results land in a versioned CSV.

Step sizes and penalties in configs are quoted in raw-measurement units
(see :mod:`sketchprec.decoder`); each cell converts them for its own m.
"""

from __future__ import annotations

import csv

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .decoder import (
    SAFE_AUTO,
    STABLE,
    DecoderConfig,
    backprojection_init,
    decode,
    stable_step,
)
from .glasso import GlassoParams, PrecisionEstimate, glasso
from .metrics import f1_support, relative_error
from .modelgen import (
    DEFAULT_ZERO_TOL,
    GeneratorSpec,
    empirical_covariance,
    generate,
    sample_gaussian,
)
from .sketch import (
    build_operator,
    lambda_norm_mc,
    apply_A,
    sketch_of_matrix,
    sketch_stream,
)
from .symmat import pinv, symmetrize

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "run_grid",
    "baseline_glasso",
    "baseline_pinv",
    "best_lambda_rows",
    "rip_probe",
    "write_results_csv",
    "read_results_csv",
    "load_config",
    "INFINITE",
    "CSV_SCHEMA_HEADER",
]

INFINITE = "infinite"
CSV_SCHEMA_HEADER = "# sketchprec-results v1"

_CSV_COLUMNS = [
    "row_type",
    "method",
    "metric",
    "kind",
    "d",
    "blocks",
    "p",
    "n",
    "m",
    "lam",
    "gamma",
    "t_max",
    "repeat",
    "model_seed",
    "data_seed",
    "op_seed",
    "nnz",
    "re",
    "f1",
    "wall_ms",
    "converged",
    "failed",
    "error",
]

_CONFIG_KEYS = {
    "generator",
    "n",
    "m_grid",
    "lambda_grid",
    "gamma",
    "t_max",
    "repeats",
    "seeds",
    "operator_kind",
    "operator_dist",
    "init",
    "early_stop",
    "metrics",
    "baselines",
    "zero_tol",
}
_GENERATOR_KEYS = {"kind", "d", "blocks", "p", "seed"}
_SEED_KEYS = {"model", "data", "operator"}


@dataclass(frozen=True)
class ExperimentConfig:
    generator: GeneratorSpec
    n: int | str  # sample count, or "infinite" to sketch the true covariance
    m_grid: tuple
    lambda_grid: tuple  # raw-measurement units
    gamma: float | str = STABLE  # raw units, or "safe_auto" / "stable"
    t_max: int = 1000
    repeats: int = 1
    seed_model: int = 0
    seed_data: int = 1000
    seed_operator: int = 2000
    operator_kind: str = "structured"
    operator_dist: str = "gaussian"
    init: str = "backprojection"  # or "scaled_identity"
    early_stop: bool = False
    metric_re: bool = True
    metric_f1: bool = True
    baseline_glasso_enabled: bool = False
    baseline_pinv_enabled: bool = False
    zero_tol: float = DEFAULT_ZERO_TOL

    def __post_init__(self):
        if not self.m_grid or not self.lambda_grid:
            raise ValueError("m_grid and lambda_grid must be non-empty")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.n != INFINITE and (not isinstance(self.n, int) or self.n < 1):
            raise ValueError(f"n must be a positive integer or '{INFINITE}'")
        if self.init not in ("backprojection", "scaled_identity"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass
class ResultRow:
    row_type: str = "cell"
    method: str = "decode"
    metric: str = ""
    kind: str = ""
    d: int = 0
    blocks: int = 0
    p: float = 0.0
    n: str = ""
    m: int | None = None
    lam: float | None = None
    gamma: str = ""
    t_max: int | None = None
    repeat: int = 0
    model_seed: int = 0
    data_seed: int = 0
    op_seed: int = 0
    nnz: int = 0
    re: float | None = None
    f1: float | None = None
    wall_ms: int = 0
    converged: bool = False
    failed: bool = False
    error: str = ""


def load_config(path) -> ExperimentConfig:
    """Parse a JSON experiment description, rejecting unknown keys."""
    with open(path) as fh:
        raw = json.load(fh)
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ExperimentConfig:
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    gen_raw = dict(raw["generator"])
    unknown = set(gen_raw) - _GENERATOR_KEYS
    if unknown:
        raise ValueError(f"unknown generator keys: {sorted(unknown)}")
    gen = GeneratorSpec(
        kind=gen_raw["kind"],
        d=int(gen_raw["d"]),
        num_blocks=int(gen_raw["blocks"]),
        p=float(gen_raw.get("p", 0.2)),
        seed=int(gen_raw.get("seed", 0)),
    )
    seeds = dict(raw.get("seeds", {}))
    unknown = set(seeds) - _SEED_KEYS
    if unknown:
        raise ValueError(f"unknown seed keys: {sorted(unknown)}")
    n = raw["n"]
    if isinstance(n, str) and n != INFINITE:
        raise ValueError(f"n must be an integer or '{INFINITE}'")
    metrics_flags = dict(raw.get("metrics", {"re": True, "f1": True}))
    baselines = dict(raw.get("baselines", {}))
    gamma = raw.get("gamma", STABLE)
    if isinstance(gamma, str) and gamma not in (SAFE_AUTO, STABLE):
        raise ValueError(f"gamma must be a number, '{SAFE_AUTO}' or '{STABLE}'")
    return ExperimentConfig(
        generator=gen,
        n=n if isinstance(n, str) else int(n),
        m_grid=tuple(int(m) for m in raw["m_grid"]),
        lambda_grid=tuple(float(l) for l in raw["lambda_grid"]),
        gamma=gamma,
        t_max=int(raw.get("t_max", 1000)),
        repeats=int(raw.get("repeats", 1)),
        seed_model=int(seeds.get("model", 0)),
        seed_data=int(seeds.get("data", 1000)),
        seed_operator=int(seeds.get("operator", 2000)),
        operator_kind=raw.get("operator_kind", "structured"),
        operator_dist=raw.get("operator_dist", "gaussian"),
        init=raw.get("init", "backprojection"),
        early_stop=bool(raw.get("early_stop", False)),
        metric_re=bool(metrics_flags.get("re", True)),
        metric_f1=bool(metrics_flags.get("f1", True)),
        baseline_glasso_enabled=bool(baselines.get("glasso_full", False)),
        baseline_pinv_enabled=bool(baselines.get("pinv", False)),
        zero_tol=float(raw.get("zero_tol", DEFAULT_ZERO_TOL)),
    )


def baseline_glasso(data, lam: float, tol: float = 1e-6) -> PrecisionEstimate:
    """Graphical lasso on the empirical covariance of raw data."""
    return glasso(empirical_covariance(data), GlassoParams(lam=lam, tol=tol))


def baseline_pinv(data) -> np.ndarray:
    """Pseudo-inverse of the empirical covariance as a precision estimate."""
    return pinv(empirical_covariance(data))


def _cell_seeds(cfg: ExperimentConfig, repeat: int) -> tuple[int, int, int]:
    return (
        cfg.seed_model + repeat,
        cfg.seed_data + repeat,
        cfg.seed_operator + repeat,
    )


def _ground_truth(cfg: ExperimentConfig, model_seed: int):
    spec = GeneratorSpec(
        kind=cfg.generator.kind,
        d=cfg.generator.d,
        num_blocks=cfg.generator.num_blocks,
        p=cfg.generator.p,
        seed=model_seed,
    )
    return generate(spec)


def _score_row(row: ResultRow, cfg: ExperimentConfig, gt, theta_est) -> None:
    if cfg.metric_re:
        row.re = relative_error(gt.theta, theta_est)
    if cfg.metric_f1:
        row.f1 = f1_support(gt.theta, theta_est, cfg.zero_tol).f1
    if (row.re is not None and not math.isfinite(row.re)) or (
        row.f1 is not None and not math.isfinite(row.f1)
    ):
        row.failed = True
        row.error = "non-finite metric"


def _base_row(cfg: ExperimentConfig, repeat: int, gt) -> ResultRow:
    model_seed, data_seed, op_seed = _cell_seeds(cfg, repeat)
    return ResultRow(
        kind=cfg.generator.kind,
        d=cfg.generator.d,
        blocks=cfg.generator.num_blocks,
        p=cfg.generator.p,
        n=str(cfg.n),
        repeat=repeat,
        model_seed=model_seed,
        data_seed=data_seed,
        op_seed=op_seed,
        nnz=gt.nnz,
    )


def _decode_cell(cfg: ExperimentConfig, repeat: int, m: int, lam: float) -> ResultRow:
    model_seed, data_seed, op_seed = _cell_seeds(cfg, repeat)
    gt = _ground_truth(cfg, model_seed)
    row = _base_row(cfg, repeat, gt)
    row.method = "decode"
    row.m = m
    row.lam = lam
    row.gamma = str(cfg.gamma)
    row.t_max = cfg.t_max
    started = time.perf_counter()
    try:
        op = build_operator(
            cfg.operator_kind, cfg.generator.d, m, op_seed, dist=cfg.operator_dist
        )
        if cfg.n == INFINITE:
            s = sketch_of_matrix(op, gt.sigma)
        else:
            data = sample_gaussian(gt, int(cfg.n), data_seed)
            s = sketch_stream(op, data)
        init = backprojection_init(op, s) if cfg.init == "backprojection" else None
        dec_cfg = DecoderConfig.from_raw_units(
            lam,
            cfg.gamma if isinstance(cfg.gamma, str) else float(cfg.gamma),
            op.m,
            t_max=cfg.t_max,
            init=init,
            early_stop=cfg.early_stop,
        )
        result = decode(op, s, dec_cfg)
        row.converged = bool(result.estimate.converged)
        _score_row(row, cfg, gt, result.estimate.precision)
    except Exception as exc:  # cell failures must not kill the grid
        row.failed = True
        row.error = f"{type(exc).__name__}: {exc}"
    row.wall_ms = int(1000 * (time.perf_counter() - started))
    return row


def _glasso_cell(cfg: ExperimentConfig, repeat: int, lam: float) -> ResultRow:
    model_seed, data_seed, _ = _cell_seeds(cfg, repeat)
    gt = _ground_truth(cfg, model_seed)
    row = _base_row(cfg, repeat, gt)
    row.method = "glasso"
    row.lam = lam
    started = time.perf_counter()
    try:
        if cfg.n == INFINITE:
            est = glasso(gt.sigma, GlassoParams(lam=lam, tol=1e-6))
        else:
            data = sample_gaussian(gt, int(cfg.n), data_seed)
            est = baseline_glasso(data, lam)
        row.converged = bool(est.converged)
        _score_row(row, cfg, gt, est.precision)
    except Exception as exc:
        row.failed = True
        row.error = f"{type(exc).__name__}: {exc}"
    row.wall_ms = int(1000 * (time.perf_counter() - started))
    return row


def _pinv_cell(cfg: ExperimentConfig, repeat: int) -> ResultRow:
    model_seed, data_seed, _ = _cell_seeds(cfg, repeat)
    gt = _ground_truth(cfg, model_seed)
    row = _base_row(cfg, repeat, gt)
    row.method = "pinv"
    started = time.perf_counter()
    try:
        if cfg.n == INFINITE:
            theta_est = pinv(gt.sigma)
        else:
            theta_est = baseline_pinv(sample_gaussian(gt, int(cfg.n), data_seed))
        row.converged = True
        _score_row(row, cfg, gt, theta_est)
    except Exception as exc:
        row.failed = True
        row.error = f"{type(exc).__name__}: {exc}"
    row.wall_ms = int(1000 * (time.perf_counter() - started))
    return row


def _run_task(args):
    kind = args[0]
    if kind == "decode":
        return _decode_cell(*args[1:])
    if kind == "glasso":
        return _glasso_cell(*args[1:])
    return _pinv_cell(*args[1:])


def _worker_count(explicit: int | None) -> int:
    if explicit is not None:
        return max(1, explicit)
    env = os.environ.get("SKETCHPREC_WORKERS")
    if env:
        return max(1, int(env))
    return 1


def run_grid(cfg: ExperimentConfig, workers: int | None = None) -> list[ResultRow]:
    """Execute every grid cell and return rows sorted by coordinates.

    Failed cells are flagged and kept so that row count always equals
    ``|m_grid| * |lambda_grid| * repeats`` plus any baseline rows.
    """
    tasks = []
    for repeat in range(cfg.repeats):
        for m in cfg.m_grid:
            for lam in cfg.lambda_grid:
                tasks.append(("decode", cfg, repeat, m, lam))
        if cfg.baseline_glasso_enabled:
            for lam in cfg.lambda_grid:
                tasks.append(("glasso", cfg, repeat, lam))
        if cfg.baseline_pinv_enabled:
            tasks.append(("pinv", cfg, repeat))

    n_workers = _worker_count(workers)
    if n_workers == 1 or len(tasks) == 1:
        rows = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(_run_task, tasks, chunksize=1))

    rows.sort(
        key=lambda r: (
            r.method,
            r.repeat,
            r.m if r.m is not None else -1,
            r.lam if r.lam is not None else -1.0,
        )
    )
    rows.extend(best_lambda_rows(rows))
    return rows


def best_lambda_rows(rows: list[ResultRow]) -> list[ResultRow]:
    """Summary rows: per (method, m, metric), the best mean score over repeats.

    Ties in the mean score go to the larger (sparser) penalty.
    """
    summaries = []
    cells = [r for r in rows if r.row_type == "cell" and not r.failed and r.lam is not None]
    for method in sorted({r.method for r in cells}):
        m_values = sorted({r.m for r in cells if r.method == method}, key=lambda v: (v is None, v))
        for m in m_values:
            group = [r for r in cells if r.method == method and r.m == m]
            lams = sorted({r.lam for r in group})
            for metric, better in (("re", min), ("f1", max)):
                means = {}
                for lam in lams:
                    vals = [getattr(r, metric) for r in group if r.lam == lam]
                    vals = [v for v in vals if v is not None]
                    if vals:
                        means[lam] = float(np.mean(vals))
                if not means:
                    continue
                best_score = better(means.values())
                best_lam = max(l for l, v in means.items() if v == best_score)
                proto = next(r for r in group if r.lam == best_lam)
                summary = ResultRow(
                    row_type="best",
                    method=method,
                    metric=metric,
                    kind=proto.kind,
                    d=proto.d,
                    blocks=proto.blocks,
                    p=proto.p,
                    n=proto.n,
                    m=m,
                    lam=best_lam,
                    gamma=proto.gamma,
                    t_max=proto.t_max,
                    nnz=proto.nnz,
                    converged=True,
                )
                setattr(summary, metric, best_score)
                summaries.append(summary)
    return summaries


def rip_probe(
    d: int,
    k: int,
    a: float,
    b: float,
    m_grid,
    n_pairs: int,
    n_mc: int,
    dist: str = "gaussian",
    seed: int = 0,
    num_blocks: int | None = None,
    p: float = 0.2,
) -> list[dict]:
    """Sample normalized secant directions and record measurement deviations.

    Draws pairs of model-set covariances (sparse precision matrices with
    spectra rescaled into [a, b], rejecting draws with more than d + 2k
    nonzeros), normalizes their difference in the Monte-Carlo estimated
    measurement norm, and reports ``| ||A(U)||_1 - 1 |`` statistics per
    sketch size. A falsification probe over sampled pairs only; it bounds
    nothing.
    """
    if not (0 < a <= b):
        raise ValueError("need 0 < a <= b")
    if num_blocks is None:
        num_blocks = max(1, d // 8)

    def _model_draw(draw_seed: int) -> np.ndarray:
        attempt = 0
        while True:
            spec = GeneratorSpec(
                kind="erdos", d=d, num_blocks=num_blocks, p=p,
                seed=draw_seed + 7919 * attempt,
            )
            gt = generate(spec)
            if gt.nnz <= d + 2 * k:
                theta = gt.theta
                break
            attempt += 1
            if attempt > 200:
                raise RuntimeError("could not draw a sparse enough instance")
        eigs = np.linalg.eigvalsh(theta)
        lo, hi = float(eigs[0]), float(eigs[-1])
        if hi > lo:
            alpha = (b - a) / (hi - lo)
            beta = a - alpha * lo
        else:
            alpha, beta = 1.0, (a + b) / 2.0 - lo
        theta = alpha * theta + beta * np.eye(d)
        w, v = np.linalg.eigh(theta)
        return symmetrize((v * (1.0 / w)) @ v.T)

    directions = []
    pair_idx = 0
    while len(directions) < n_pairs:
        s1 = _model_draw(seed + 2 * pair_idx)
        s2 = _model_draw(seed + 2 * pair_idx + 1)
        pair_idx += 1
        diff = symmetrize(s1 - s2)
        if np.abs(diff).max() < 1e-12:
            continue  # degenerate pair, resample
        norm = lambda_norm_mc(diff, dist, n_mc, seed=seed + 31 * pair_idx)
        if norm <= 0:
            continue
        directions.append(diff / norm)

    out = []
    for m in m_grid:
        devs = []
        for i, u in enumerate(directions):
            op = build_operator("dense", d, m, seed + 1_000_003 * (i + 1) + m, dist=dist)
            devs.append(abs(float(np.abs(apply_A(op, u)).sum()) - 1.0))
        devs = np.asarray(devs)
        out.append(
            {
                "m": int(m),
                "n_pairs": len(devs),
                "median": float(np.median(devs)),
                "q10": float(np.quantile(devs, 0.10)),
                "q90": float(np.quantile(devs, 0.90)),
                "max": float(devs.max()),
            }
        )
    return out


def write_results_csv(path_or_file, rows: list[ResultRow]) -> None:
    """Write rows under the versioned schema header."""

    def _write(fh):
        fh.write(CSV_SCHEMA_HEADER + "\n")
        writer = csv.DictWriter(fh, fieldnames=_CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            rec = asdict(row)
            rec = {
                k: ("" if v is None else v)
                for k, v in rec.items()
            }
            writer.writerow(rec)

    if isinstance(path_or_file, (str, os.PathLike)):
        with open(path_or_file, "w", newline="") as fh:
            _write(fh)
    else:
        _write(path_or_file)


def read_results_csv(path) -> list[dict]:
    """Read a results CSV, validating the schema header."""
    with open(path, newline="") as fh:
        first = fh.readline().rstrip("\n")
        if first != CSV_SCHEMA_HEADER:
            raise ValueError(
                f"{path}: missing results schema header {CSV_SCHEMA_HEADER!r}"
            )
        return list(csv.DictReader(fh))
