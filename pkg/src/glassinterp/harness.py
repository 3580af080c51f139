"""Reproducible experiment driver.

An :class:`ExperimentConfig` names a model and the checks to run; every
check writes one CSV and :func:`run_config` adds a ``manifest.json`` holding
the exact config, package version and kernel backend. Per-task seeds come
from :func:`glassinterp._rng.derive_seed` on ``(master seed, task, index)``
so adding a task never perturbs the others. No timestamps are written, so
identical configs give byte-identical output directories.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__, _backend, _rng
from .alignment import align_tolerance, recover_isometry, residual
from .errors import ConfigInvalid, GlassInterpError
from .gaussian_core import is_euclidean_metric, metric_from_covariance, metrics_equal, validate_covariance
from .grem_model import (
    ASYMPTOTIC_COLUMNS,
    GremSpec,
    asymptotic_ratios,
    branching_vector,
    build_grem,
    check_subadditivity_grem,
    check_superpythagorean_grem,
    grem_quenched_alpha,
)
from .grem_model import MAX_PAIR_SPINS as GREM_PAIR_GUARD
from .grem_model import MAX_SPLIT_SPINS as GREM_SPLIT_GUARD
from .grem_model import MAX_TABLE_SPINS as GREM_TABLE_GUARD
from .grem_model import SUBADDITIVITY_COLUMNS as GREM_SUB_COLUMNS
from .interpolation import (
    CSV_COLUMNS as INTERP_COLUMNS,
    SIGMA_LEVEL,
    check_classic_conditions,
    check_metric_conditions,
    combined_stderr,
    estimate_F,
    interpolation_rhs,
    verify_inequality,
)
from .matio import format_matrix, read_matrix
from .sk_model import MAX_SPLIT_SPINS as SK_SPLIT_GUARD
from .sk_model import MAX_TABLE_SPINS as SK_TABLE_GUARD
from .sk_model import SUBADDITIVITY_COLUMNS as SK_SUB_COLUMNS
from .sk_model import LOG2, check_subadditivity_sk, check_superpythagorean_sk, quenched_alpha_sk

MODELS = ("sk", "grem", "abstract")
CHECKS = {
    "sk": ("trend", "subadditivity", "superpythagorean"),
    "grem": ("trend", "subadditivity", "superpythagorean", "asymptotics"),
    "abstract": ("interp", "metric"),
}

# covariance pair failing both classic conditions but not the metric one
GENERALIZED_PAIR = {"cx": [[1.0, 0.0], [0.0, 1.0]], "cy": [[2.0, 0.5], [0.5, 2.0]]}


def fmt(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def csv_text(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


@dataclass
class ExperimentConfig:
    model: str = "sk"
    sizes: list[int] = field(default_factory=lambda: [2, 4, 8])
    splits: list[tuple[int, int]] = field(default_factory=lambda: [(4, 4)])
    beta: float = 1.0
    samples: int = 2000
    seed: int = 0
    spec: dict | None = None
    output: str = "results"
    threads: int = 1
    checks: list[str] | None = None
    pairs: list[dict] = field(default_factory=list)
    mc_samples: int = 100_000
    t_nodes: int = 16
    points_v: Any = None
    points_w: Any = None
    base_dir: str = field(default=".", repr=False)

    @classmethod
    def from_dict(cls, obj: dict, base_dir: str | Path = ".") -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__ if f != "base_dir"}
        unknown = sorted(set(obj) - known)
        if unknown:
            raise ConfigInvalid(f"unknown config fields: {', '.join(unknown)}")
        kwargs = dict(obj)
        if "splits" in kwargs:
            try:
                kwargs["splits"] = [tuple(int(x) for x in s) for s in kwargs["splits"]]
            except (TypeError, ValueError) as exc:
                raise ConfigInvalid(f"splits: expected pairs of integers ({exc})") from exc
        cfg = cls(**kwargs, base_dir=str(base_dir))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            obj = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(obj, base_dir=path.parent)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        d["splits"] = [list(s) for s in self.splits]
        return d

    def grem_spec(self) -> GremSpec:
        return GremSpec.geometric() if self.spec is None else GremSpec.from_dict(self.spec)

    def selected_checks(self) -> list[str]:
        if self.checks is None:
            return list(CHECKS.get(self.model, ()))
        return list(self.checks)

    def validate(self) -> None:
        errors: list[str] = []
        if self.model not in MODELS:
            errors.append(f"model: must be one of {MODELS}, got {self.model!r}")
        if not (isinstance(self.beta, (int, float)) and math.isfinite(self.beta) and self.beta > 0):
            errors.append(f"beta: must be a finite number > 0, got {self.beta!r}")
        if not isinstance(self.samples, int) or self.samples < 2:
            errors.append(f"samples: must be an integer >= 2, got {self.samples!r}")
        if not isinstance(self.mc_samples, int) or self.mc_samples < 2:
            errors.append(f"mc_samples: must be an integer >= 2, got {self.mc_samples!r}")
        if not isinstance(self.threads, int) or self.threads < 1:
            errors.append(f"threads: must be an integer >= 1, got {self.threads!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            errors.append(f"seed: must be a 64-bit unsigned integer, got {self.seed!r}")
        if not isinstance(self.t_nodes, int) or self.t_nodes < 2:
            errors.append(f"t_nodes: must be an integer >= 2, got {self.t_nodes!r}")
        if list(self.sizes) != sorted(set(self.sizes)) or any(n < 1 for n in self.sizes):
            errors.append(f"sizes: must be strictly ascending positive integers, got {self.sizes}")
        for s in self.splits:
            if len(s) != 2 or min(s) < 0 or sum(s) < 1:
                errors.append(f"splits: {s} is not a pair N1, N2 >= 0 with N1 + N2 >= 1")
        allowed = set(CHECKS.get(self.model, ())) | {"align"}
        for c in self.selected_checks():
            if c not in allowed:
                errors.append(f"checks: {c!r} is not available for model {self.model!r}")
        if self.model == "grem":
            try:
                self.grem_spec()
            except GlassInterpError as exc:
                errors.append(f"spec: {exc}")
        if not errors:
            errors.extend(self._guard_errors())
        if errors:
            raise ConfigInvalid("; ".join(errors))

    def _guard_errors(self) -> list[str]:
        errs = []
        checks = self.selected_checks()
        if self.model == "sk":
            if "trend" in checks and self.sizes and max(self.sizes) > SK_TABLE_GUARD:
                errs.append(f"sizes: SK enumeration limited to N <= {SK_TABLE_GUARD}")
            for s in self.splits:
                if sum(s) > SK_SPLIT_GUARD:
                    errs.append(f"splits: SK split {s} exceeds N <= {SK_SPLIT_GUARD}")
        elif self.model == "grem":
            spec = self.grem_spec()
            if "trend" in checks:
                for n in self.sizes:
                    kt = sum(branching_vector(spec, n))
                    if not 1 <= kt <= GREM_TABLE_GUARD:
                        errs.append(f"sizes: |k({n})| = {kt} outside 1..{GREM_TABLE_GUARD}")
            for s in self.splits:
                kt = sum(branching_vector(spec, sum(s)))
                if "subadditivity" in checks and kt > GREM_SPLIT_GUARD:
                    errs.append(f"splits: |k({sum(s)})| = {kt} exceeds {GREM_SPLIT_GUARD}")
                if "superpythagorean" in checks and kt > GREM_PAIR_GUARD:
                    errs.append(f"splits: |k({sum(s)})| = {kt} exceeds pair-scan guard {GREM_PAIR_GUARD}")
        return errs

    def resolve_matrix(self, value, name: str) -> np.ndarray:
        if value is None:
            raise ConfigInvalid(f"{name}: missing")
        if isinstance(value, str):
            path = Path(value)
            if not path.is_absolute():
                path = Path(self.base_dir) / path
            try:
                return read_matrix(path)
            except (OSError, GlassInterpError) as exc:
                raise ConfigInvalid(f"{name}: cannot read matrix file {path} ({exc})") from exc
        try:
            return np.asarray(value, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise ConfigInvalid(f"{name}: not a numeric matrix ({exc})") from exc


@dataclass(frozen=True)
class TrendRow:
    N: int
    size: int
    alpha_over_size: float
    stderr: float
    running_infimum: float
    alpha_over_N: float
    stderr_over_N: float


TREND_COLUMNS = ("N", "size", "alpha_over_size", "stderr", "running_infimum",
                 "alpha_over_N", "stderr_over_N", "floor", "ok")


@dataclass(frozen=True)
class TrendReport:
    model: str
    beta: float
    rows: tuple[TrendRow, ...]
    floor: float
    row_ok: tuple[bool, ...]

    @property
    def holds(self) -> bool:
        return all(self.row_ok)

    def csv_rows(self) -> list[list]:
        return [[r.N, r.size, r.alpha_over_size, r.stderr, r.running_infimum,
                 r.alpha_over_N, r.stderr_over_N, self.floor, ok]
                for r, ok in zip(self.rows, self.row_ok)]


def fekete_trend(model: str, spec: GremSpec | None, sizes: Sequence[int], beta: float, M: int,
                 seed: int, threads: int = 1) -> TrendReport:
    """Per-site free energies ``alpha / (beta * size)`` with a running infimum.

    ``size`` is ``N`` for SK and ``|k(N)|`` for the GREM. Each row is checked
    against the Jensen floor ``-log 2 / beta - beta / 2`` and, for every
    earlier size dividing ``N``, against the subadditive direction
    ``alpha_N / N <= alpha_N' / N'`` (both within 3 standard errors).
    """
    if model not in ("sk", "grem"):
        raise ConfigInvalid(f"model: trend needs 'sk' or 'grem', got {model!r}")
    if list(sizes) != sorted(set(sizes)):
        raise ConfigInvalid("sizes: must be strictly ascending")
    rows: list[TrendRow] = []
    ok: list[bool] = []
    floor = -LOG2 / beta - beta / 2.0
    inf = math.inf
    for N in sizes:
        task_seed = _rng.derive_seed(seed, f"trend-{model}", N)
        if model == "sk":
            est = quenched_alpha_sk(N, beta, M, task_seed, threads)
            size = N
        else:
            tree = build_grem(spec or GremSpec.geometric(), N)
            size = tree.total_spins
            if size == 0:
                raise ConfigInvalid(f"sizes: |k({N})| = 0, per-site free energy undefined")
            est = grem_quenched_alpha(tree, spec, beta, M, task_seed, threads)
        per = est.mean / (beta * size)
        per_se = est.stderr / (beta * size)
        inf = min(inf, per)
        row = TrendRow(N, size, per, per_se, inf, est.mean / (beta * N), est.stderr / (beta * N))
        good = per >= floor - SIGMA_LEVEL * per_se
        for prev in rows:
            if N % prev.N == 0:
                slack = SIGMA_LEVEL * math.hypot(row.stderr_over_N, prev.stderr_over_N)
                good &= row.alpha_over_N <= prev.alpha_over_N + slack
        rows.append(row)
        ok.append(bool(good))
    return TrendReport(model, beta, tuple(rows), floor, tuple(ok))


@dataclass
class RunResult:
    ok: bool
    files: list[str]
    checks: dict[str, bool]


class _Writer:
    def __init__(self, out: Path):
        self.out = out
        self.files: dict[str, tuple[str, ...]] = {}
        self.results: dict[str, bool] = {}
        self._pending: dict[str, str] = {}

    def table(self, name: str, columns: Sequence[str], rows, ok: bool) -> None:
        fname = f"{name}.csv"
        self._pending[fname] = csv_text(columns, rows)
        self.files[fname] = tuple(columns)
        self.results[name] = bool(ok)

    def raw(self, fname: str, text: str) -> None:
        self._pending[fname] = text

    def flush(self, manifest: dict) -> list[str]:
        self.out.mkdir(parents=True, exist_ok=True)
        written = []
        for fname, text in sorted(self._pending.items()):
            (self.out / fname).write_text(text)
            written.append(fname)
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return written + ["manifest.json"]


def _run_sk(cfg: ExperimentConfig, w: _Writer, checks: list[str]) -> None:
    if "trend" in checks:
        rep = fekete_trend("sk", None, cfg.sizes, cfg.beta, cfg.samples, cfg.seed, cfg.threads)
        w.table("sk_trend", TREND_COLUMNS, rep.csv_rows(), rep.holds)
    if "subadditivity" in checks:
        reps = [check_subadditivity_sk(n1, n2, cfg.beta, cfg.samples,
                                       _rng.derive_seed(cfg.seed, "sk-sub", i), cfg.threads)
                for i, (n1, n2) in enumerate(cfg.splits)]
        w.table("sk_subadditivity", SK_SUB_COLUMNS, [r.csv_row() for r in reps],
                all(r.holds and r.annealed_ok for r in reps))
    if "superpythagorean" in checks:
        rows, good = [], True
        for n1, n2 in cfg.splits:
            res = check_superpythagorean_sk(n1, n2, cfg.beta)
            rows.append([n1 + n2, n1, n2, cfg.beta, res.worst_margin, res.holds])
            good &= res.holds
        w.table("sk_superpythagorean", ("N", "N1", "N2", "beta", "worst_margin", "holds"), rows, good)


def _run_grem(cfg: ExperimentConfig, w: _Writer, checks: list[str]) -> None:
    spec = cfg.grem_spec()
    if "trend" in checks:
        rep = fekete_trend("grem", spec, cfg.sizes, cfg.beta, cfg.samples, cfg.seed, cfg.threads)
        w.table("grem_trend", TREND_COLUMNS, rep.csv_rows(), rep.holds)
    if "subadditivity" in checks:
        reps = [check_subadditivity_grem(spec, n1 + n2, n1, n2, cfg.beta, cfg.samples,
                                         _rng.derive_seed(cfg.seed, "grem-sub", i), cfg.threads)
                for i, (n1, n2) in enumerate(cfg.splits)]
        w.table("grem_subadditivity", GREM_SUB_COLUMNS, [r.csv_row() for r in reps],
                all(r.holds and r.plain_holds for r in reps))
    if "superpythagorean" in checks:
        rows, good = [], True
        for n1, n2 in cfg.splits:
            res = check_superpythagorean_grem(spec, n1 + n2, n1, n2)
            rows.append([n1 + n2, n1, n2, res.worst_margin, res.worst_max_margin,
                         res.holds and res.max_holds])
            good &= res.holds and res.max_holds
        w.table("grem_superpythagorean",
                ("N", "N1", "N2", "worst_margin", "worst_max_margin", "holds"), rows, good)
    if "asymptotics" in checks:
        rows = asymptotic_ratios(spec, cfg.sizes)
        w.table("grem_asymptotics", ASYMPTOTIC_COLUMNS, [r.csv_row() for r in rows], True)


def _pairs(cfg: ExperimentConfig) -> list[tuple[np.ndarray, np.ndarray, Any]]:
    out = []
    for i, p in enumerate(cfg.pairs or [GENERALIZED_PAIR]):
        cx = cfg.resolve_matrix(p.get("cx"), f"pairs[{i}].cx")
        cy = cfg.resolve_matrix(p.get("cy"), f"pairs[{i}].cy")
        try:
            cx, cy = validate_covariance(cx), validate_covariance(cy)
        except GlassInterpError as exc:
            raise ConfigInvalid(f"pairs[{i}]: {exc}") from exc
        if cx.n != cy.n:
            raise ConfigInvalid(f"pairs[{i}]: dimensions differ ({cx.n} vs {cy.n})")
        out.append((cx, cy, p.get("weights")))
    return out


IDENTITY_COLUMNS = ("pair", "n", "seed", "m", "t_nodes", "rhs", "rhs_stderr",
                    "difference", "difference_stderr", "holds")
METRIC_COLUMNS = ("pair", "n", "classic_diag_ok", "classic_offdiag_ok", "metric_ok",
                  "worst_classic_violation", "worst_metric_deficit",
                  "x_euclidean", "y_euclidean", "metrics_equal")


def _run_abstract(cfg: ExperimentConfig, w: _Writer, checks: list[str]) -> None:
    pairs = _pairs(cfg)
    if "interp" in checks:
        rows, ident_rows, good = [], [], True
        for i, (cx, cy, wts) in enumerate(pairs):
            s = _rng.derive_seed(cfg.seed, "interp", i)
            rep = verify_inequality(cx, cy, wts, cfg.mc_samples, s)
            rows.append(rep.csv_row())
            # only the metric => inequality direction is asserted
            good &= rep.holds or not rep.metric.metric_ok
            rhs = interpolation_rhs(cx, cy, wts, cfg.t_nodes, cfg.mc_samples,
                                    _rng.derive_seed(s, "rhs"))
            fx = estimate_F(cx, wts, cfg.mc_samples, _rng.derive_seed(s, "lhs-x"))
            fy = estimate_F(cy, wts, cfg.mc_samples, _rng.derive_seed(s, "lhs-y"))
            se = combined_stderr(rhs, fx, fy)
            diff = fy.mean - fx.mean
            ident = abs(rhs.mean - diff) <= SIGMA_LEVEL * se
            good &= ident
            ident_rows.append([i, cx.n, s, cfg.mc_samples, cfg.t_nodes, rhs.mean, rhs.stderr,
                               diff, math.hypot(fx.stderr, fy.stderr), ident])
        w.table("verify_interp", INTERP_COLUMNS, rows, good)
        w.table("interp_identity", IDENTITY_COLUMNS, ident_rows, all(r[-1] for r in ident_rows))
    if "metric" in checks:
        rows, good = [], True
        for i, (cx, cy, _) in enumerate(pairs):
            classic = check_classic_conditions(cx, cy)
            metric = check_metric_conditions(cx, cy)
            ex = is_euclidean_metric(metric_from_covariance(cx))[0]
            ey = is_euclidean_metric(metric_from_covariance(cy))[0]
            # classic conditions imply the metric one; both metrics are Euclidean
            good &= ex and ey and (metric.metric_ok or not classic.classic_ok)
            rows.append([i, cx.n, classic.classic_diag_ok, classic.classic_offdiag_ok,
                         metric.metric_ok, classic.worst_violation, metric.worst_violation,
                         ex, ey, metrics_equal(cx, cy)])
        w.table("metric_check", METRIC_COLUMNS, rows, good)


ALIGN_COLUMNS = ("n", "k", "orthogonality_defect", "residual", "align_tol", "ok")


def _run_align(cfg: ExperimentConfig, w: _Writer) -> None:
    V = cfg.resolve_matrix(cfg.points_v, "points_v")
    W = cfg.resolve_matrix(cfg.points_w, "points_w")
    try:
        motion = recover_isometry(V, W)
    except GlassInterpError as exc:
        raise ConfigInvalid(f"points_v/points_w: {exc}") from exc
    res = residual(V, W, motion)
    tol = align_tolerance(W)
    defect = motion.orthogonality_defect()
    good = res <= tol and defect <= 1e-10
    w.table("align", ALIGN_COLUMNS, [[V.shape[0], V.shape[1], defect, res, tol, good]], good)
    w.raw("align_O.txt", format_matrix(motion.O))
    w.raw("align_b.txt", format_matrix(motion.b[None, :]))


def run_config(cfg: ExperimentConfig, out: str | Path | None = None,
               checks: Sequence[str] | None = None) -> RunResult:
    """Run the selected checks, write CSVs plus ``manifest.json`` and report success."""
    cfg.validate()
    selected = list(checks) if checks is not None else cfg.selected_checks()
    out_dir = Path(out if out is not None else cfg.output)
    w = _Writer(out_dir)
    model_checks = [c for c in selected if c != "align"]
    if cfg.model == "sk" and model_checks:
        _run_sk(cfg, w, model_checks)
    elif cfg.model == "grem" and model_checks:
        _run_grem(cfg, w, model_checks)
    elif cfg.model == "abstract" and model_checks:
        _run_abstract(cfg, w, model_checks)
    if "align" in selected:
        _run_align(cfg, w)
    manifest = {
        "config": cfg.to_dict(),
        "checks": selected,
        "version": __version__,
        "backend": _backend.BACKEND,
        "columns": {k: list(v) for k, v in sorted(w.files.items())},
        "results": dict(sorted(w.results.items())),
    }
    files = w.flush(manifest)
    return RunResult(all(w.results.values()), files, dict(w.results))
