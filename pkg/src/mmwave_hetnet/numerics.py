"""Quadrature and derivative machinery.

`integrate_batch` is a vectorized adaptive Gauss-Kronrod (7/15 point) rule
that advances many independent integrals at once: every refinement round
evaluates the integrand on all pending nodes of all integrals in a single
call.  The coverage integrals are nested two deep, so the outer integrand is
itself a batch of inner integrals and this is where nearly all runtime goes.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "QuadratureSpec",
    "QuadratureError",
    "DerivativeStack",
    "integrate",
    "integrate_batch",
    "exp_form_derivatives",
    "exp_form_stack",
]

# Kronrod abscissae (positive half, descending) and weights; odd entries
# are shared with the embedded 7-point Gauss rule.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])           # 15 nodes, ascending
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(15)
_GW[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances for adaptive integration.

    An integral is accepted once its summed error estimate is at most
    ``max(abs_tol, rel_tol * |estimate|)``.  ``max_subdivisions`` bounds the
    number of subintervals any single integral may be split into.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_subdivisions: int = 200

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")

    def tightened(self, factor: float) -> "QuadratureSpec":
        return QuadratureSpec(self.rel_tol * factor, self.abs_tol * factor,
                              self.max_subdivisions)


DEFAULT_SPEC = QuadratureSpec()


class QuadratureError(ArithmeticError):
    """Adaptive integration ran out of subdivisions.

    The best available estimate and its error bound are kept on the
    exception so callers can decide whether it is good enough.
    """

    def __init__(self, message, estimate, error):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


def _gk15(f, a, b, owner):
    """Kronrod estimate and |K - G| error on each interval (a[i], b[i])."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = (mid[:, None] + half[:, None] * _NODES[None, :]).ravel()
    fx = np.asarray(f(x, np.repeat(owner, 15)), dtype=float)
    if fx.ndim == 0:
        fx = np.full(x.shape, float(fx))
    fx = fx.reshape((a.size, 15) + fx.shape[1:])
    if not np.all(np.isfinite(fx)):
        raise ValueError("integrand returned a non-finite value")
    kron = np.tensordot(fx, _KW, axes=([1], [0]))
    gauss = np.tensordot(fx, _GW, axes=([1], [0]))
    scale = half.reshape((-1,) + (1,) * (kron.ndim - 1))
    kron = kron * scale
    err = np.abs(kron - gauss * scale)
    # roundoff floor relative to the integral of |f|
    absint = np.tensordot(np.abs(fx), _KW, axes=([1], [0])) * np.abs(scale)
    err = np.maximum(err, 50.0 * _EPS * absint)
    return kron, err


def integrate_batch(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    lo: Sequence[float] | np.ndarray,
    hi: Sequence[float] | np.ndarray,
    spec: QuadratureSpec = DEFAULT_SPEC,
    *,
    strict: bool = True,
):
    """Integrate ``f`` over many intervals ``[lo[j], hi[j]]`` simultaneously.

    Parameters
    ----------
    f : callable
        ``f(x, owner)`` receives a 1-D array of abscissae and the index ``j``
        of the integral each abscissa belongs to.  It returns either shape
        ``(n,)`` or ``(n, d)`` for a vector-valued integrand.
    lo, hi : array_like
        Integration limits; ``lo[j] <= hi[j]`` is required.
    spec : QuadratureSpec
        Tolerances applied to each integral (componentwise for vector
        integrands).
    strict : bool
        Raise `QuadratureError` on non-convergence.  When False, the best
        estimates are returned instead.

    Returns
    -------
    values, errors : ndarray
        Shape ``(len(lo),)`` or ``(len(lo), d)``.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if lo.shape != hi.shape or lo.ndim != 1:
        raise ValueError("lo and hi must be 1-D arrays of equal length")
    if np.any(hi < lo):
        raise ValueError("integration requires lo <= hi")
    n_int = lo.size

    active = np.nonzero(hi > lo)[0]
    a, b, own = lo[active].copy(), hi[active].copy(), active.copy()
    total_len = hi - lo

    values = None
    errors = None
    counts = np.ones(n_int, dtype=int)
    failed = np.zeros(n_int, dtype=bool)
    settled = hi <= lo

    while a.size:
        est, err = _gk15(f, a, b, own)
        if values is None:
            tail = est.shape[1:]
            values = np.zeros((n_int,) + tail)
            errors = np.zeros((n_int,) + tail)
            locked_v = np.zeros_like(values)
            locked_e = np.zeros_like(values)
        cur_v = locked_v.copy()
        cur_e = locked_e.copy()
        np.add.at(cur_v, own, est)
        np.add.at(cur_e, own, err)
        tol = np.maximum(spec.abs_tol, spec.rel_tol * np.abs(cur_v))
        done = np.all((cur_e <= tol).reshape(n_int, -1), axis=1)

        over = counts >= spec.max_subdivisions
        finish = (done | over) & ~settled
        failed |= finish & ~done
        settled |= finish

        fin = np.nonzero(finish)[0]
        values[fin] = cur_v[fin]
        errors[fin] = cur_e[fin]
        keep = ~settled[own]
        if not np.any(keep):
            break
        # Local acceptance: an interval whose error fits its share of the
        # tolerance is frozen; the others are bisected.
        share = (b - a) / total_len[own]
        share = share.reshape((-1,) + (1,) * (err.ndim - 1))
        good = np.all((err <= tol[own] * share).reshape(err.shape[0], -1), axis=1)
        tiny = (b - a) <= 8 * _EPS * np.maximum(np.abs(a), np.abs(b))
        freeze = keep & (good | tiny)
        split = keep & ~freeze
        # An integral whose pending intervals all pass locally but whose
        # total still misses must split its worst interval.
        stuck = np.zeros(n_int, dtype=bool)
        stuck[own[keep]] = True
        stuck[own[split]] = False
        if np.any(stuck):
            errn = err.reshape(err.shape[0], -1).max(axis=1)
            cand = np.nonzero(stuck[own])[0]
            order = cand[np.lexsort((-errn[cand], own[cand]))]
            first = np.ones(order.size, dtype=bool)
            first[1:] = own[order][1:] != own[order][:-1]
            worst = order[first]
            freeze[worst] = False
            split[worst] = True
        np.add.at(locked_v, own[freeze], est[freeze])
        np.add.at(locked_e, own[freeze], err[freeze])

        sa, sb, so = a[split], b[split], own[split]
        mid = 0.5 * (sa + sb)
        np.add.at(counts, so, 1)
        a = np.concatenate([sa, mid])
        b = np.concatenate([mid, sb])
        own = np.concatenate([so, so])

    if values is None:
        # every interval has zero length
        probe = np.asarray(f(lo[:1].copy(), np.zeros(1, dtype=int)), dtype=float)
        shape = (n_int,) + probe.shape[1:]
        return np.zeros(shape), np.zeros(shape)
    if strict and np.any(failed):
        j = int(np.nonzero(failed)[0][0])
        raise QuadratureError(
            f"integral {j} did not converge within "
            f"{spec.max_subdivisions} subdivisions",
            values, errors)
    return values, errors


def integrate(f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
              spec: QuadratureSpec = DEFAULT_SPEC):
    """Adaptive integral of a vectorized function over ``[lo, hi]``.

    ``f`` must accept a 1-D array of abscissae.  Returns a float, or an
    array for vector-valued integrands.  Raises `QuadratureError` (with the
    best estimate attached) when the subdivision budget is exhausted.

    >>> round(integrate(lambda x: x**2, 0.0, 3.0), 12)
    9.0
    """
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise ValueError("integration limits must be finite")
    if hi < lo:
        raise ValueError("integration requires lo <= hi")
    try:
        vals, _ = integrate_batch(lambda x, _own: f(x), [lo], [hi], spec)
    except QuadratureError as exc:
        raise QuadratureError(str(exc), _scalar(exc.estimate[0]),
                              _scalar(exc.error[0])) from None
    return _scalar(vals[0])


def _scalar(v):
    v = np.asarray(v)
    return float(v) if v.ndim == 0 else v


@dataclass(frozen=True)
class DerivativeStack:
    """Values ``L(a), L'(a), ..., L^(k_max)(a)`` of ``L = exp(g)``."""

    values: tuple

    def __getitem__(self, k):
        return self.values[k]

    def __len__(self):
        return len(self.values)


def exp_form_stack(gvals: np.ndarray) -> np.ndarray:
    """Derivatives of ``exp(g)`` from derivatives of ``g``.

    ``gvals[n]`` holds ``g^(n)`` (any trailing shape); row 0 is ``g`` itself.
    Returns an array of the same shape whose row ``k`` is ``L^(k)``, using
    ``L^(k) = sum_j C(k-1, j) g^(k-j) L^(j)``.

    The recursion is homogeneous, so it equally maps ``a^n g^(n)`` to
    ``a^k L^(k)``; the coverage code relies on that scaled form.
    """
    gvals = np.asarray(gvals, dtype=float)
    out = np.empty_like(gvals)
    out[0] = np.exp(gvals[0])
    for k in range(1, gvals.shape[0]):
        acc = np.zeros_like(gvals[0])
        for j in range(k):
            acc = acc + comb(k - 1, j) * gvals[k - j] * out[j]
        out[k] = acc
    return out


def exp_form_derivatives(g_derivs: Callable[[int, float], float], a: float,
                         k_max: int) -> DerivativeStack:
    """Exact derivatives of ``L(a) = exp(g(a))`` up to order ``k_max``.

    ``g_derivs(n, a)`` must return ``g^(n)(a)`` for ``n = 0..k_max``.
    """
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    gvals = np.array([g_derivs(n, a) for n in range(k_max + 1)], dtype=float)
    return DerivativeStack(tuple(float(v) for v in exp_form_stack(gvals)))
