"""
Experiment Harness
==================

Seeded trials over a grid of planted-partition parameters. Each
(point, trial) pair owns its instance, drawn from a seed derived from the
spec's base seed, so trials can run in any order or in parallel worker
processes and still produce identical rows. Rows are sorted by
(point, trial, algorithm) before they are written.
"""

import csv
import functools
import itertools
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np

from spectral_sbm.clustering import (
    ALGORITHMS,
    Clustering,
    DeltaMode,
    PowerConfig,
    SvdConfig,
    centered_svd_cluster,
    delta_power,
    power_iteration_cluster,
    svd1_cluster,
    svd2_cluster,
)
from spectral_sbm.config import (
    CSV_SCHEMA_VERSION,
    DECOMPOSITION_MAX_N,
    EXACT_IDENTITY_TOL,
    GROUP_SUM_TOL,
    VERIFY_DEFAULTS,
    default_power,
)
from spectral_sbm.encoding import (
    bell_number,
    class_unbiasedness_check,
    enumerate_encodings,
    group_sum_oracle,
    partition_unbiasedness_check,
)
from spectral_sbm.errors import ParameterError, ResourceError, SpecError
from spectral_sbm.evaluation import compare, separation_gap
from spectral_sbm.model import BlockParams, PlantedModel, center, derive_seed, plant, sample_ssbm, split
from spectral_sbm.verification import (
    AuditRecord,
    audit_decomposition,
    audit_entry_bound_RtL,
    audit_lr_entry_bound,
    audit_noise_norm,
    audit_norm_lemmas,
    audit_power_svd_residual,
    audit_projection_scaling,
    audit_weyl,
    decompose_terms,
)

logger = logging.getLogger(__name__)

TRIAL_AUDITS = ("noise-norm", "weyl", "projection-scaling", "power-svd-residual", "norm-lemmas")

CSV_COLUMNS = [
    "schema_version", "point", "trial", "seed", "n", "k", "sizes", "p", "q", "algorithm",
    "accuracy", "exact_all", "exact_largest", "n_groups", "gap_within", "gap_cross", "gap_ratio",
]
TIMING_COLUMN = "wall_time_s"

###############################################################################
#                               EXPERIMENT SPEC                               #
###############################################################################
@dataclass(frozen=True)
class PointSpec:
    """One parameter point: n, p, q and either k (uniform labels) or explicit sizes."""
    n: int
    p: float
    q: float
    k: Optional[int] = None
    sizes: Optional[Tuple[int, ...]] = None

    def params(self) -> BlockParams:
        return BlockParams(n=self.n, p=self.p, q=self.q, sizes=self.sizes,
                           k=None if self.sizes is not None else self.k)


@dataclass(frozen=True)
class ExperimentSpec:
    points: Tuple[PointSpec, ...]
    algorithms: Tuple[str, ...] = ("csvd",)
    trials: int = 1
    seed: int = 0
    r: Optional[int] = None
    delta: DeltaMode = field(default_factory=DeltaMode)
    self_loops: bool = True
    timing: bool = False
    audits: Tuple[str, ...] = ()
    out: Optional[str] = None


_SPEC_KEYS = {"points", "grid", "algorithms", "trials", "seed", "r", "delta",
              "self_loops", "timing", "audits", "out"}


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _point_from(raw: Dict[str, Any], where: str, problems: List[str]) -> Optional[PointSpec]:
    if not isinstance(raw, dict):
        problems.append(f"{where}: expected an object")
        return None
    unknown = set(raw) - {"n", "p", "q", "k", "sizes"}
    if unknown:
        problems.append(f"{where}: unknown keys {sorted(unknown)}")
    try:
        sizes = raw.get("sizes")
        point = PointSpec(n=raw.get("n"), p=raw.get("p"), q=raw.get("q"), k=raw.get("k"),
                          sizes=tuple(sizes) if sizes is not None else None)
        if not _is_int(point.n):
            raise ParameterError(f"n must be an integer, got {point.n!r}")
        if point.k is not None and not _is_int(point.k):
            raise ParameterError(f"k must be an integer, got {point.k!r}")
        if not all(isinstance(v, (int, float)) for v in (point.p, point.q)):
            raise ParameterError("p and q must be numbers")
        point.params()
        return point
    except (ValueError, TypeError) as exc:
        problems.append(f"{where}: {exc}")
        return None


def _expand_grid(grid: Dict[str, Any], problems: List[str]) -> List[Dict[str, Any]]:
    if not isinstance(grid, dict):
        problems.append("grid: expected an object of parameter lists")
        return []
    axes = [key for key in ("n", "k", "sizes", "p", "q") if key in grid]
    unknown = set(grid) - {"n", "k", "sizes", "p", "q"}
    if unknown:
        problems.append(f"grid: unknown keys {sorted(unknown)}")
    for key in axes:
        if not isinstance(grid[key], list) or not grid[key]:
            problems.append(f"grid.{key}: expected a non-empty list")
            return []
    return [dict(zip(axes, combo)) for combo in itertools.product(*(grid[k] for k in axes))]


def load_spec(source: Union[str, Path, Dict[str, Any]]) -> ExperimentSpec:
    """
    Build an ExperimentSpec from a JSON file or an already-parsed dict.

    Raises:
        SpecError: listing every offending field.
    """
    if isinstance(source, dict):
        raw = source
    else:
        try:
            raw = json.loads(Path(source).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise SpecError([f"cannot read spec {source}: {exc}"]) from exc
    if not isinstance(raw, dict):
        raise SpecError(["spec must be a JSON object"])

    problems: List[str] = []
    unknown = set(raw) - _SPEC_KEYS
    if unknown:
        problems.append(f"unknown keys {sorted(unknown)}")

    if ("points" in raw) == ("grid" in raw):
        problems.append("points/grid: give exactly one of them")
        raw_points: List[Any] = []
    elif "points" in raw:
        raw_points = raw["points"] if isinstance(raw["points"], list) else []
        if not raw_points:
            problems.append("points: expected a non-empty list")
    else:
        raw_points = _expand_grid(raw["grid"], problems)
    points = [_point_from(p, f"points[{i}]", problems) for i, p in enumerate(raw_points)]

    algorithms = raw.get("algorithms", ["csvd"])
    if not isinstance(algorithms, list) or not algorithms \
            or any(a not in ALGORITHMS for a in algorithms):
        problems.append(f"algorithms: expected a non-empty list drawn from {list(ALGORITHMS)}")
        algorithms = []
    trials = raw.get("trials", 1)
    if not _is_int(trials) or trials < 1:
        problems.append(f"trials: expected an integer >= 1, got {trials!r}")
    seed = raw.get("seed", 0)
    if not _is_int(seed) or seed < 0:
        problems.append(f"seed: expected a non-negative integer, got {seed!r}")
    r = raw.get("r")
    if r is not None and (not _is_int(r) or r < 1):
        problems.append(f"r: expected null or an integer >= 1, got {r!r}")
    delta = DeltaMode()
    try:
        delta = DeltaMode.parse(raw.get("delta", "theory"))
    except ParameterError as exc:
        problems.append(f"delta: {exc}")
    for flag in ("self_loops", "timing"):
        if flag in raw and not isinstance(raw[flag], bool):
            problems.append(f"{flag}: expected true or false")
    audits = raw.get("audits", [])
    if not isinstance(audits, list) or any(a not in TRIAL_AUDITS for a in audits):
        problems.append(f"audits: expected a list drawn from {list(TRIAL_AUDITS)}")
        audits = []
    out = raw.get("out")
    if out is not None and not isinstance(out, str):
        problems.append("out: expected a path string")

    if problems:
        raise SpecError(problems)
    return ExperimentSpec(
        points=tuple(points),
        algorithms=tuple(algorithms),
        trials=trials,
        seed=seed,
        r=r,
        delta=delta,
        self_loops=raw.get("self_loops", True),
        timing=raw.get("timing", False),
        audits=tuple(audits),
        out=out,
    )


###############################################################################
#                                  ALGORITHMS                                 #
###############################################################################
def run_algorithm(name: str, a: np.ndarray, b: np.ndarray, p: float, q: float, k: int,
                  r: Optional[int] = None, delta: DeltaMode = DeltaMode(),
                  seed: int = 0, s_star_hint: Optional[int] = None,
                  peel: bool = False) -> Clustering:
    """Dispatch one algorithm by name: power, csvd, svd1 or svd2."""
    if name == "power":
        return power_iteration_cluster(b, PowerConfig(p=p, q=q, r=r, delta_mode=delta,
                                                      s_star_hint=s_star_hint, peel=peel))
    if name == "csvd":
        return centered_svd_cluster(b, SvdConfig(k=k, p=p, q=q, delta_mode=delta))
    if name == "svd1":
        return svd1_cluster(a, k, p, q, delta)
    if name == "svd2":
        return svd2_cluster(a, k, p, q, seed, delta)
    raise ParameterError(f"unknown algorithm '{name}', expected one of {list(ALGORITHMS)}")


###############################################################################
#                                    TRIALS                                   #
###############################################################################
@dataclass
class TrialRow:
    point: int
    trial: int
    seed: int
    n: int
    k: int
    sizes: str
    p: float
    q: float
    algorithm: str
    accuracy: float
    exact_all: bool
    exact_largest: bool
    n_groups: int
    gap_within: Optional[float]
    gap_cross: Optional[float]
    gap_ratio: Optional[float]
    wall_time_s: float = 0.0

    def csv_fields(self, timing: bool) -> Dict[str, str]:
        values = asdict(self)
        fields = {"schema_version": str(CSV_SCHEMA_VERSION)}
        for column in CSV_COLUMNS[1:]:
            fields[column] = _fmt(values[column])
        if timing:
            fields[TIMING_COLUMN] = _fmt(self.wall_time_s)
        return fields


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else ("inf" if value > 0 else "-inf")
    return str(value)


def _gap_columns(clustering: Clustering, model: PlantedModel, algorithm: str):
    if clustering.distances is None:
        return None, None, None
    focus = model.largest_label if algorithm == "power" else None
    gap = separation_gap(clustering.distances, model.labels, clustering.distance_log_scale, focus)
    within, cross = gap.relative_to(clustering.threshold_used)
    return within, cross, gap.ratio


def trial_audits(names: Sequence[str], model: PlantedModel, b: np.ndarray,
                 r: Optional[int]) -> List[AuditRecord]:
    """Per-instance audits requested by a sweep spec."""
    params = model.params
    records = []
    for name in names:
        if name == "noise-norm":
            records.append(audit_noise_norm(split(b, model)))
        elif name == "weyl":
            records.append(audit_weyl(split(b, model)))
        elif name == "projection-scaling":
            records.append(audit_projection_scaling(b, params.k, r or default_power(params.n),
                                                    params.p, params.q))
        elif name == "power-svd-residual":
            records.append(audit_power_svd_residual(b, params.k, r or default_power(params.n),
                                                    params.p, params.q))
        elif name == "norm-lemmas":
            if params.n > DECOMPOSITION_MAX_N:
                logger.warning("skipping norm-lemmas audit: n=%d exceeds %d",
                               params.n, DECOMPOSITION_MAX_N)
                continue
            rr = r or default_power(params.n)
            terms = decompose_terms(split(b, model), rr)
            records.append(audit_norm_lemmas(terms, delta_power(model.s_star, params.p, params.q, rr)))
    return records


def run_trial(spec: ExperimentSpec, point_index: int, trial: int
              ) -> Tuple[List[TrialRow], List[AuditRecord]]:
    """Draw one instance and run every requested algorithm and audit on it."""
    point = spec.points[point_index]
    params = point.params()
    seed = derive_seed(spec.seed, point_index, trial)
    model = plant(params, seed, spec.self_loops)
    a = sample_ssbm(model)
    b = center(a, params.q)
    sizes = ";".join(str(int(s)) for s in model.cluster_sizes)

    rows = []
    for name in spec.algorithms:
        started = time.perf_counter()
        clustering = run_algorithm(name, a, b, params.p, params.q, params.k, r=spec.r,
                                   delta=spec.delta, seed=seed, s_star_hint=model.s_star)
        elapsed = time.perf_counter() - started
        report = compare(clustering, model.labels)
        within, cross, ratio = _gap_columns(clustering, model, name)
        rows.append(TrialRow(point_index, trial, seed, params.n, params.k, sizes, params.p,
                             params.q, name, report.accuracy, report.exact_all,
                             report.exact_largest, len(clustering.groups),
                             within, cross, ratio, elapsed))
        logger.debug("point %d trial %d %s: accuracy %.4f", point_index, trial, name,
                     report.accuracy)

    records = trial_audits(spec.audits, model, b, spec.r)
    for record in records:
        record.params.update({"point": point_index, "trial": trial, "seed": seed})
    return rows, records


@dataclass
class SweepResult:
    rows: List[TrialRow]
    records: List[AuditRecord]


def run_sweep(spec: ExperimentSpec, threads: int = 1) -> SweepResult:
    """
    Every (point, trial) pair of the spec, fanned out over ``threads`` worker processes.
    """
    tasks = [(pi, t) for pi in range(len(spec.points)) for t in range(spec.trials)]
    logger.info("sweep: %d points x %d trials x %d algorithms on %d worker(s)",
                len(spec.points), spec.trials, len(spec.algorithms), threads)
    worker = functools.partial(run_trial, spec)
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(worker, [t[0] for t in tasks], [t[1] for t in tasks]))
    else:
        results = [worker(pi, t) for pi, t in tasks]

    order = {name: i for i, name in enumerate(spec.algorithms)}
    rows = sorted((row for res in results for row in res[0]),
                  key=lambda row: (row.point, row.trial, order[row.algorithm]))
    records = sorted((rec for res in results for rec in res[1]),
                     key=lambda rec: (rec.params["point"], rec.params["trial"], rec.audit))
    return SweepResult(rows, records)


def write_sweep_csv(rows: Sequence[TrialRow], stream: TextIO, timing: bool = False) -> None:
    columns = CSV_COLUMNS + ([TIMING_COLUMN] if timing else [])
    writer = csv.DictWriter(stream, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row.csv_fields(timing))


def recovery_rates(rows: Sequence[TrialRow]) -> Dict[Tuple[int, str], float]:
    """Exact-recovery rate per (point, algorithm)."""
    totals: Dict[Tuple[int, str], List[bool]] = {}
    for row in rows:
        totals.setdefault((row.point, row.algorithm), []).append(row.exact_all)
    return {key: sum(flags) / len(flags) for key, flags in totals.items()}


###############################################################################
#                                VERIFY AUDITS                                #
###############################################################################
VERIFY_AUDITS = tuple(VERIFY_DEFAULTS)


def audit_params(name: str, overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Default instance of an audit with the given keys overridden."""
    if name not in VERIFY_DEFAULTS:
        raise ParameterError(f"unknown audit '{name}', expected one of {list(VERIFY_AUDITS)}")
    params = dict(VERIFY_DEFAULTS[name])
    ignored = []
    for key, value in overrides.items():
        if value is None:
            continue
        if key in params:
            params[key] = value
        else:
            ignored.append(key)
    if ignored:
        logger.warning("audit '%s' does not take %s; ignored", name, ", ".join(sorted(ignored)))
    return params


def _instance(params: Dict[str, Any], seed: int, self_loops: bool = True):
    k = params.get("k", 2)
    block = BlockParams(n=params["n"], p=params.get("p", 0.6), q=params.get("q", 0.2),
                        k=min(k, params["n"]))
    model = plant(block, seed, self_loops)
    b = center(sample_ssbm(model), block.q)
    return model, b


def _endpoint_pairs(n: int):
    return itertools.product(range(n), repeat=2)


def run_verify_audit(name: str, overrides: Optional[Dict[str, Any]] = None, seed: int = 0,
                     self_loops: bool = True) -> AuditRecord:
    """
    Run one named audit on its default instance.

    Exhaustive audits sweep every endpoint pair (a, b) and report the worst
    relative error.
    """
    params = audit_params(name, overrides or {})
    if name == "encodings":
        t = params["t"]
        classes = enumerate_encodings(t)
        try:
            brute = enumerate_encodings(t, brute_force=True) == classes
        except ResourceError:
            brute = None
        count = len(classes)
        passed = count == bell_number(t) and count <= t ** t and brute is not False
        return AuditRecord("encodings", "|X| is the Bell number and at most t^t", {"t": t},
                           count, t ** t, passed, exact=True,
                           extra={"bell": bell_number(t), "matches_brute_force": brute})

    if name in ("group-sum", "partition", "class-partition"):
        model, b = _instance(params, seed, self_loops)
        parts = split(b, model)
        worst = 0.0
        for a_end, b_end in _endpoint_pairs(model.n):
            if name == "group-sum":
                err = group_sum_oracle(parts.R, parts.L, a_end, b_end, params["t"]).rel_error
            elif name == "partition":
                err = partition_unbiasedness_check(parts.R, parts.L, a_end, b_end,
                                                   params["t"]).rel_error
            else:
                err = class_unbiasedness_check(parts.R, parts.L, a_end, b_end,
                                               params["x"]).rel_error
            worst = max(worst, err)
        tol = GROUP_SUM_TOL if name == "group-sum" else EXACT_IDENTITY_TOL
        claim = {
            "group-sum": "class sums add up to (R^t L)[a, b]",
            "partition": "W = t^t E_T[W(T)] over all assignments",
            "class-partition": "Z(X, 0) = t'^t' E_T[Z(X, 0, T)] over all assignments",
        }[name]
        return AuditRecord(name, claim, dict(params, seed=seed), worst, tol, worst <= tol,
                           exact=True)

    model, b = _instance(params, seed, self_loops)
    p, q = model.params.p, model.params.q
    r = params.get("r") or default_power(model.n)
    if name == "decomposition":
        record = audit_decomposition(decompose_terms(split(b, model), r))
    elif name == "entry-bound":
        record = audit_entry_bound_RtL(split(b, model), params["t"], model.s_star, p, q)
    elif name == "lr-entry-bound":
        record = audit_lr_entry_bound(split(b, model), params["t"], model.s_star, p, q)
    elif name == "norm-lemmas":
        terms = decompose_terms(split(b, model), r)
        record = audit_norm_lemmas(terms, delta_power(model.s_star, p, q, r))
    elif name == "projection-scaling":
        record = audit_projection_scaling(b, model.k, r, p, q)
    elif name == "noise-norm":
        record = audit_noise_norm(split(b, model))
    else:
        record = audit_weyl(split(b, model))
    record.params.update({"seed": seed, "k": model.k})
    return record
