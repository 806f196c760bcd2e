"""Linear search for the coverage-optimal bias and parameter sweeps."""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .analysis import AssociationReport, CoverageResult, association_probabilities, rate_coverage
from .model import NetworkConfig
from .numerics import DEFAULT_SPEC, QuadratureSpec

__all__ = ["SearchSpec", "Optimum", "optimize_bias", "SweepAxis", "SweepRow", "sweep",
           "default_grid", "SWEEP_COLUMNS"]

log = logging.getLogger(__name__)


def default_grid(lo: float = 1.0, hi: float = 1e4, points: int = 60) -> tuple:
    return tuple(float(v) for v in np.logspace(math.log10(lo), math.log10(hi), points))


@dataclass(frozen=True)
class SearchSpec:
    objective_delta: float
    grid: tuple = field(default_factory=default_grid)

    def __post_init__(self):
        grid = tuple(sorted(float(g) for g in self.grid))
        if not grid:
            raise ValueError("search grid must be nonempty")
        if grid[0] < 1:
            raise ValueError("search grid values must satisfy A_s >= 1")
        if not self.objective_delta > 0:
            raise ValueError("objective_delta must be > 0")
        object.__setattr__(self, "grid", grid)


@dataclass(frozen=True)
class Optimum:
    a_s_opt: float
    p_c_opt: float
    curve: tuple          # ((A_s, P_c), ...) for successful points
    failed: tuple = ()    # ((A_s, message), ...)


def _evaluate(cfg, bias, delta, exact_exclusion, quad):
    try:
        return rate_coverage(cfg.with_bias(bias), delta,
                             exact_exclusion=exact_exclusion, quad=quad), None
    except (ArithmeticError, ValueError) as exc:
        log.warning("A_s=%g failed: %s", bias, exc)
        return None, str(exc)


def _map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def optimize_bias(cfg: NetworkConfig, spec: SearchSpec, *, exact_exclusion: bool = False,
                  refine: bool = False, workers: int = 1,
                  quad: QuadratureSpec = DEFAULT_SPEC) -> Optimum:
    """Maximize rate coverage over the bias grid.

    Ties go to the smallest A_s.  With ``refine`` a golden-section search in
    log A_s runs between the neighbours of the best grid point; its result
    replaces the grid optimum only when strictly better.
    """
    delta = spec.objective_delta
    results = _map(lambda b: _evaluate(cfg, b, delta, exact_exclusion, quad),
                   spec.grid, workers)
    curve = []
    failed = []
    for bias, (res, err) in zip(spec.grid, results):
        if res is None:
            failed.append((bias, err))
        else:
            curve.append((bias, res.p_c))
    if not curve:
        raise ArithmeticError("every grid point failed")
    best = max(range(len(curve)), key=lambda i: (curve[i][1], -i))
    a_opt, p_opt = curve[best]

    if refine and len(curve) > 1:
        lo = curve[max(best - 1, 0)][0]
        hi = curve[min(best + 1, len(curve) - 1)][0]
        a_ref, p_ref = _golden(lambda b: rate_coverage(
            cfg.with_bias(b), delta, exact_exclusion=exact_exclusion, quad=quad).p_c,
            lo, hi)
        if p_ref > p_opt:
            a_opt, p_opt = a_ref, p_ref
    return Optimum(a_opt, p_opt, tuple(curve), tuple(failed))


def _golden(f, lo, hi, iters=30):
    invphi = (math.sqrt(5) - 1) / 2
    a, b = math.log(lo), math.log(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(math.exp(c)), f(math.exp(d))
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(math.exp(d))
    return (math.exp(c), fc) if fc >= fd else (math.exp(d), fd)


class SweepAxis(str, enum.Enum):
    BIAS = "bias"
    DELTA = "delta"
    LAMBDA_S = "lambda_s"
    BEAMWIDTHS = "beamwidths"


SWEEP_COLUMNS = ("axis_value", "B_m", "B_s", "P_tm", "P_ts", "L_m", "L_s",
                 "tau_m", "tau_s", "P2", "P3", "P4", "P5", "P_c")


@dataclass(frozen=True)
class SweepRow:
    axis_value: object
    association: AssociationReport | None
    coverage: CoverageResult | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def as_record(self) -> dict:
        """Flat mapping keyed by `SWEEP_COLUMNS` (plus ``error``)."""
        rec = dict.fromkeys(SWEEP_COLUMNS)
        v = self.axis_value
        rec["axis_value"] = "/".join(repr(float(x)) for x in v) if isinstance(v, tuple) else v
        a, c = self.association, self.coverage
        if a is not None:
            rec.update(B_m=a.b_macro, B_s=a.b_micro, P_tm=a.p_assoc_macro,
                       P_ts=a.p_assoc_micro, L_m=a.load_macro, L_s=a.load_micro)
        if c is not None:
            rec.update(tau_m=c.tau_macro, tau_s=c.tau_micro, P2=c.p2, P3=c.p3,
                       P4=c.p4, P5=c.p5, P_c=c.p_c)
        rec["error"] = self.error or ""
        return rec


def _apply_axis(cfg, axis, value, delta):
    if axis is SweepAxis.BIAS:
        return cfg.with_bias(value), delta
    if axis is SweepAxis.DELTA:
        return cfg, float(value)
    if axis is SweepAxis.LAMBDA_S:
        return cfg.with_micro_density(value), delta
    theta_m, theta_s = value
    return cfg.with_beamwidths(theta_m, theta_s), delta


def sweep(cfg: NetworkConfig, axis: SweepAxis | str, values: Sequence, *,
          delta: float | None = None, exact_exclusion: bool = False,
          workers: int = 1, quad: QuadratureSpec = DEFAULT_SPEC) -> list[SweepRow]:
    """Evaluate association and coverage along one parameter axis.

    ``beamwidths`` values are ``(theta_m, theta_s)`` pairs.  When ``delta``
    is None (and the axis is not ``delta``) only association is computed.
    A failing row carries its error message; other rows are unaffected.
    """
    axis = SweepAxis(axis)
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    if axis is SweepAxis.BEAMWIDTHS:
        values = [tuple(float(x) for x in v) for v in values]

    def row(value):
        try:
            c, d = _apply_axis(cfg, axis, value, delta)
            rep = association_probabilities(c, quad)
            cov = None
            if d is not None:
                cov = rate_coverage(c, d, exact_exclusion=exact_exclusion, quad=quad,
                                    report=rep)
            return SweepRow(value, rep, cov)
        except (ArithmeticError, ValueError) as exc:
            return SweepRow(value, None, None, f"{type(exc).__name__}: {exc}")

    return _map(row, values, workers)
