"""
Convergence and dimension studies: construct generating vectors with both
CBC criteria, cross-evaluate S* and P* on every vector and write CSV,
two-column plot data and fitted slopes.
"""
import csv
import logging
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from ..cbc import cbc_p, cbc_s
from ..criteria import p_star, s_star
from ..korobov_space import SpaceParams
from ..spectral import NATIVE_BITS, precision
from .utils import CRITERIA, Timer, weights_slug

logger = logging.getLogger(__name__)

# (criterion evaluated, criterion the vector was built with)
KINDS = {
    "S_zS": ("S", "S"),
    "S_zP": ("S", "P"),
    "P_zS": ("P", "S"),
    "P_zP": ("P", "P"),
}
LABELS = {
    "S_zS": "S*(z_S)",
    "S_zP": "S*(z_P)",
    "P_zS": "P*(z_S)",
    "P_zP": "P*(z_P)",
}
CSV_HEADER = ["kind", "n", "d", "alpha", "weights", "precision_bits", "value", "construct_s", "eval_s"]
# Grid of the long-running full-scale run
FULL_SCALE = {"m_from": 10, "m_to": 14, "d": 10}


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    criteria: tuple = CRITERIA
    m_from: int = 7
    m_to: int = 11
    d: int = 10
    m: int = 8
    d_max: int = 10
    alpha: int = 1
    weights: str = "poly3a"
    precision_bits: int = 256
    out_dir: str = "results"
    seed: int = 0
    workers: int = 1
    timings: bool = True

    def __post_init__(self):
        if not self.criteria or set(self.criteria) - set(CRITERIA):
            raise ValueError(f"criteria must be a non-empty subset of {CRITERIA}, got {self.criteria}")
        if min(self.m_from, self.m_to, self.m) < 1 or self.m_from > self.m_to:
            raise ValueError(f"invalid m range {self.m_from}..{self.m_to} (m={self.m})")
        if self.d < 1 or self.d_max < 1:
            raise ValueError(f"dimensions must be positive, got d={self.d}, d_max={self.d_max}")
        if self.precision_bits < NATIVE_BITS:
            raise ValueError(f"precision must be at least {NATIVE_BITS} bits, got {self.precision_bits}")
        # validates alpha and the weight scheme early
        SpaceParams.create(self.alpha, self.weights, 1)

    def params(self, d=None):
        return SpaceParams.create(self.alpha, self.weights, d or self.d)

    @property
    def sizes(self):
        return [2 ** m for m in range(self.m_from, self.m_to + 1)]

    @property
    def kinds(self):
        return [kind for kind, (evaluated, built) in KINDS.items() if evaluated in self.criteria and built in self.criteria]

    def with_changes(self, **kwargs):
        return replace(self, **kwargs)


@dataclass(frozen=True)
class ExperimentRecord:
    kind: str
    n: int
    d: int
    alpha: int
    weights: str
    precision_bits: int
    value: float
    construct_s: float
    eval_s: float

    @property
    def label(self):
        return LABELS[self.kind]

    def row(self):
        return [
            self.label, self.n, self.d, self.alpha, self.weights, self.precision_bits,
            f"{self.value:.17g}", f"{self.construct_s:.6f}", f"{self.eval_s:.6f}",
        ]


def sort_records(records):
    order = list(KINDS)
    return sorted(records, key=lambda r: (order.index(r.kind), r.n, r.d))


# ---------------------------------------------------------
# Construction and evaluation
# ---------------------------------------------------------


def _construct(n, d, criterion, config):
    timer = Timer(config.timings)
    try:
        with timer.measure():
            if criterion == "S":
                result = cbc_s(n, d, config.params(d))
            else:
                result = cbc_p(n, d, config.params(d), precision(config.precision_bits), config.workers)
    except (ArithmeticError, RuntimeError, ValueError) as e:
        raise ExperimentError(f"construction failed for n={n}, criterion={criterion}: {e}") from e
    if criterion == "P" and result.diagnostics:
        logger.warning(f"CBC-P n={n}: {len(result.diagnostics)} candidates skipped as singular")
    return result.gv, timer.seconds


def _evaluate(gv, params, kind, config):
    timer = Timer(config.timings)
    evaluated, _ = KINDS[kind]
    try:
        with timer.measure():
            if evaluated == "S":
                value = s_star(gv, params)
            else:
                value = p_star(gv, params, precision(config.precision_bits))
    except (ArithmeticError, RuntimeError, ValueError) as e:
        raise ExperimentError(f"evaluation failed for n={gv.n}, d={gv.d}, kind={LABELS[kind]}: {e}") from e
    return value, timer.seconds


def _record(kind, gv, value, config, construct_s, eval_s):
    return ExperimentRecord(
        kind=kind,
        n=gv.n,
        d=gv.d,
        alpha=config.alpha,
        weights=config.weights,
        precision_bits=value.precision_bits,
        value=float(value),
        construct_s=construct_s,
        eval_s=eval_s,
    )


def run_convergence(config):
    """Every kind of the configuration for n = 2^m_from .. 2^m_to at dimension d."""
    records = []
    params = config.params()
    for n in config.sizes:
        logger.info(f"Convergence study: n={n}, d={config.d}, alpha={config.alpha}, weights={config.weights}")
        vectors = {criterion: _construct(n, config.d, criterion, config) for criterion in config.criteria}
        for kind in config.kinds:
            gv, construct_s = vectors[KINDS[kind][1]]
            value, eval_s = _evaluate(gv, params, kind, config)
            records.append(_record(kind, gv, value, config, construct_s, eval_s))
    check_cross_bounds(records)
    return sort_records(records)


def run_dimension(config):
    """Vectors built once at d_max for n = 2^m, evaluated at every prefix dimension."""
    records = []
    n = 2 ** config.m
    logger.info(f"Dimension study: n={n}, d=1..{config.d_max}, alpha={config.alpha}, weights={config.weights}")
    vectors = {criterion: _construct(n, config.d_max, criterion, config) for criterion in config.criteria}
    for d in range(1, config.d_max + 1):
        params = config.params(d)
        for kind in config.kinds:
            gv, construct_s = vectors[KINDS[kind][1]]
            value, eval_s = _evaluate(gv.prefix(d), params, kind, config)
            records.append(_record(kind, gv.prefix(d), value, config, construct_s, eval_s))
    check_cross_bounds(records)
    return sort_records(records)


def check_cross_bounds(records):
    """
    Each construction should win on its own criterion. Violations are
    possible for a greedy construction and are reported, not raised.
    """
    cells = {}
    for record in records:
        cells.setdefault((record.n, record.d), {})[record.kind] = record.value
    violations = []
    for (n, d), values in sorted(cells.items()):
        for own, other in (("S_zS", "S_zP"), ("P_zP", "P_zS")):
            if own in values and other in values and values[own] > values[other]:
                violations.append((n, d, own))
                logger.warning(
                    f"n={n} d={d}: {LABELS[own]}={values[own]:.6e} exceeds {LABELS[other]}={values[other]:.6e}"
                )
    return violations


def fit_slope(points):
    """Least-squares slope of log(value) against log(n)."""
    points = list(points)
    if len(points) < 2:
        raise ValueError(f"need at least 2 points to fit a slope, got {len(points)}")
    if any(n <= 0 or value <= 0 for n, value in points):
        raise ValueError("slope fitting needs positive n and values")
    x = np.log([float(n) for n, _ in points])
    y = np.log([float(value) for _, value in points])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


# ---------------------------------------------------------
# Output files
# ---------------------------------------------------------


def _prepare_directory(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create output directory '{path}': {e.strerror or e}") from e
    if not os.path.isdir(path):
        raise OSError(f"output path '{path}' is not a directory")


def _write_table(path, rows, fmt):
    try:
        np.savetxt(path, np.asarray(rows, dtype=object), fmt=fmt, delimiter=" ")
    except OSError as e:
        raise OSError(f"cannot write '{path}': {e.strerror or e}") from e
    return path


def emit_outputs(records, config, study="convergence"):
    """
    Write <study>.csv, one two-column plot file per kind and, for the
    convergence study, a slopes file. Returns the written paths.
    """
    if not records:
        raise ValueError("no records to write")
    records = sort_records(records)
    _prepare_directory(config.out_dir)
    written = []

    csv_path = os.path.join(config.out_dir, f"{study}.csv")
    try:
        with open(csv_path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            writer.writerows(record.row() for record in records)
    except OSError as e:
        raise OSError(f"cannot write '{csv_path}': {e.strerror or e}") from e
    written.append(csv_path)

    slug = weights_slug(config.weights)
    slopes = []
    for kind in KINDS:
        selected = [r for r in records if r.kind == kind]
        if not selected:
            continue
        if study == "convergence":
            for d in sorted({r.d for r in selected}):
                rows = [(r.n, r.value) for r in selected if r.d == d]
                name = f"{kind}_{config.alpha}_{d}_{slug}.txt"
                written.append(_write_table(os.path.join(config.out_dir, name), rows, ["%d", "%.17g"]))
                if len(rows) >= 2:
                    slopes.append((kind, d, fit_slope(rows)))
        else:
            for n in sorted({r.n for r in selected}):
                rows = [(r.d, r.value) for r in selected if r.n == n]
                name = f"{kind}_{config.alpha}_n{n}_{slug}.txt"
                written.append(_write_table(os.path.join(config.out_dir, name), rows, ["%d", "%.17g"]))

    if slopes:
        path = os.path.join(config.out_dir, f"slopes_{config.alpha}_{slug}.txt")
        rows = [(kind, d, f"{slope:.6f}") for kind, d, slope in slopes]
        written.append(_write_table(path, rows, ["%s", "%d", "%s"]))
        for kind, d, slope in slopes:
            logger.info(f"Slope of {LABELS[kind]} at d={d}: {slope:.4f}")
    logger.info(f"Wrote {len(written)} files to {config.out_dir}")
    return written


def slope_summary(records):
    """{kind: slope} over the n grid, for records of a single dimension."""
    summary = {}
    for kind in KINDS:
        points = [(r.n, r.value) for r in records if r.kind == kind]
        if len(points) >= 2:
            summary[kind] = fit_slope(points)
    return summary


def cross_ratio(records, n):
    """P*(z_S) / P*(z_P) at a given n."""
    values = {r.kind: r.value for r in records if r.n == n}
    if values.get("P_zP", 0) <= 0 or "P_zS" not in values:
        return math.inf
    return values["P_zS"] / values["P_zP"]
