"""Association, load and rate-coverage analysis for the typical UE.

Outcomes are split into five scenarios:

1. no LoS BS of either tier (no service),
2. only macro BSs present,
3. only micro BSs present,
4. both present, macro chosen,
5. both present, micro chosen.

The SINR coverage of scenarios 2-5 is an integral over the serving distance
``x`` of ``sum_k (-a)^k / k! * L^(k)(a)`` at ``a = psi * x^alpha``, where ``L``
is the Laplace transform of interference plus noise.  ``L = exp(g)`` and the
derivatives of ``g`` are radial integrals with closed-form integrands, so the
whole derivative stack is exact up to quadrature error.

Internally every derivative is carried in the scaled form ``a^n g^(n)(a)``
(and ``a^k L^(k)(a)``), which keeps all integrands bounded near ``r = 0``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model import NetworkConfig, Tier, TierParams, association_ratio, distance_stats
from .numerics import (
    DEFAULT_SPEC,
    DerivativeStack,
    QuadratureSpec,
    exp_form_stack,
    integrate,
    integrate_batch,
)

__all__ = [
    "Scenario",
    "AssociationReport",
    "SinrQuery",
    "CoverageResult",
    "association_probabilities",
    "omega_kernel",
    "omega_exponent_derivatives",
    "laplace_derivatives",
    "scenario_coverage",
    "rate_coverage",
    "rate_threshold",
]

TWO_PI = 2.0 * math.pi
# inner radial integrals must be tighter than the outer one or their noise
# stalls the outer error estimate
_INNER_TIGHTEN = 1e-2


class Scenario(enum.IntEnum):
    S2 = 2
    S3 = 3
    S4 = 4
    S5 = 5

    @property
    def serving(self) -> Tier:
        return Tier.MACRO if self in (Scenario.S2, Scenario.S4) else Tier.MICRO


@dataclass(frozen=True)
class AssociationReport:
    """Nonempty-ball probabilities, association probabilities and loads."""

    b_macro: float
    b_micro: float
    p_assoc_macro: float
    p_assoc_micro: float
    load_macro: float
    load_micro: float
    scenario1_prob: float
    rho: float
    # Pr(Scenario 4) and Pr(Scenario 5); both tiers present
    overlap_macro: float
    overlap_micro: float

    def scenario_prob(self, scenario: Scenario | int) -> float:
        s = Scenario(scenario)
        if s is Scenario.S2:
            return self.p_assoc_macro - self.overlap_macro
        if s is Scenario.S3:
            return self.p_assoc_micro - self.overlap_micro
        return self.overlap_macro if s is Scenario.S4 else self.overlap_micro


def _disk_hit(lam, radius):
    """Pr(a PPP of intensity lam has a point in a disk of this radius)."""
    return -np.expm1(-lam * math.pi * np.square(radius))


def association_probabilities(cfg: NetworkConfig,
                              quad: QuadratureSpec = DEFAULT_SPEC) -> AssociationReport:
    dm, ds = distance_stats(cfg.macro), distance_stats(cfg.micro)
    lam_m, lam_s = dm.lambda_los, ds.lambda_los
    mu_m, mu_s = cfg.macro.mu, cfg.micro.mu
    rho = association_ratio(cfg)

    # B_m B_s f_s(x) F_m(x / rho), with the B factors cancelled analytically
    def macro_wins(x):
        return (2 * lam_s * math.pi * x * np.exp(-lam_s * math.pi * x * x)
                * _disk_hit(lam_m, np.minimum(x / rho, mu_m)))

    def micro_wins(x):
        return (2 * lam_m * math.pi * x * np.exp(-lam_m * math.pi * x * x)
                * _disk_hit(lam_s, np.minimum(rho * x, mu_s)))

    overlap_m = _split_integral(macro_wins, mu_s, rho * mu_m, quad)
    overlap_s = _split_integral(micro_wins, mu_m, mu_s / rho, quad)

    p_tm = dm.b_void * ds.p_empty + overlap_m
    p_ts = ds.b_void * dm.p_empty + overlap_s
    load_m = cfg.lambda_u * p_tm / cfg.macro.lambda_all if cfg.macro.lambda_all > 0 else 0.0
    load_s = cfg.lambda_u * p_ts / cfg.micro.lambda_all if cfg.micro.lambda_all > 0 else 0.0
    return AssociationReport(
        b_macro=dm.b_void, b_micro=ds.b_void,
        p_assoc_macro=p_tm, p_assoc_micro=p_ts,
        load_macro=load_m, load_micro=load_s,
        scenario1_prob=dm.p_empty * ds.p_empty, rho=rho,
        overlap_macro=overlap_m, overlap_micro=overlap_s)


def _split_integral(f, hi, kink, quad):
    if hi <= 0:
        return 0.0
    if 0 < kink < hi:
        return integrate(f, 0.0, kink, quad) + integrate(f, kink, hi, quad)
    return integrate(f, 0.0, hi, quad)


def _one_minus_pow(t, m):
    """1 - (1 + t)^-m without cancellation for small t."""
    return -np.expm1(-m * np.log1p(t))


def omega_kernel(tier: TierParams, a, r, m: int, alpha: float):
    """Angle-integrated interference kernel of one BS at distance ``r``.

    ``θ[1-(1+aPGmax/(m r^α))^-m] + (2π-θ)[1-(1+aPGmin/(m r^α))^-m]``
    """
    a = np.asarray(a, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(a < 0):
        raise ValueError("a must be >= 0")
    if np.any(r <= 0):
        raise ValueError("r must be > 0")
    base = a / (m * r ** alpha)
    theta = tier.beamwidth
    out = (theta * _one_minus_pow(base * tier.power * tier.g_max, m)
           + (TWO_PI - theta) * _one_minus_pow(base * tier.power * tier.g_min, m))
    return float(out) if out.ndim == 0 else out


# --- interference layout ----------------------------------------------------

def _lower_limits(cfg: NetworkConfig, scenario: Scenario, x, exact_exclusion: bool):
    """(tier, lower limit array) for every tier interfering in ``scenario``.

    Serving-tier interferers lie beyond the serving distance.  The other
    tier's interferers start at 0 unless ``exact_exclusion`` applies the
    association exclusion disk.
    """
    x = np.asarray(x, dtype=float)
    rho = association_ratio(cfg)
    zero = np.zeros_like(x)
    if scenario is Scenario.S2:
        return [(cfg.macro, np.minimum(x, cfg.macro.mu))]
    if scenario is Scenario.S3:
        return [(cfg.micro, np.minimum(x, cfg.micro.mu))]
    if scenario is Scenario.S4:
        lo_s = np.minimum(rho * x, cfg.micro.mu) if exact_exclusion else zero
        return [(cfg.macro, np.minimum(x, cfg.macro.mu)), (cfg.micro, lo_s)]
    lo_m = np.minimum(x / rho, cfg.macro.mu) if exact_exclusion else zero
    return [(cfg.macro, lo_m), (cfg.micro, np.minimum(x, cfg.micro.mu))]


@lru_cache(maxsize=16)
def _rising(m: int, n: int) -> float:
    return float(math.prod(range(m, m + n)))


def _exponent_stack(cfg: NetworkConfig, scenario: Scenario, a, x, k_max: int,
                    exact_exclusion: bool, quad: QuadratureSpec, scaled: bool = True):
    """Rows n = 0..k_max of ``a^n g^(n)(a)`` (or ``g^(n)(a)`` if not scaled).

    ``a`` and ``x`` are 1-D arrays of equal length; one column per pair.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    m = cfg.m
    alpha = cfg.alpha
    nx = a.size
    layout = _lower_limits(cfg, scenario, x, exact_exclusion)

    lo = np.concatenate([lim for _, lim in layout])
    hi = np.concatenate([np.full(nx, t.mu) for t, _ in layout])
    own_a = np.tile(a, len(layout))
    own_theta = np.repeat([t.beamwidth for t, _ in layout], nx)
    own_cmax = np.repeat([t.power * t.g_max / m for t, _ in layout], nx)
    own_cmin = np.repeat([t.power * t.g_min / m for t, _ in layout], nx)
    orders = np.arange(1, k_max + 1)

    def integrand(r, own):
        av = own_a[own]
        ra = r ** (-alpha)
        cols = np.empty((r.size, k_max + 1))
        parts = []
        for cvec, weight in ((own_cmax[own], own_theta[own]),
                             (own_cmin[own], TWO_PI - own_theta[own])):
            c = cvec * ra
            t = av * c
            parts.append((weight, c, t))
        cols[:, 0] = r * sum(w * _one_minus_pow(t, m) for w, _, t in parts)
        if k_max:
            acc = np.zeros((r.size, k_max))
            for w, c, t in parts:
                lp = np.log1p(t)
                if scaled:
                    # t^n (1+t)^(-m-n)
                    with np.errstate(divide="ignore", invalid="ignore"):
                        logt = np.log(t)
                    val = np.where(
                        t[:, None] > 0,
                        np.exp(orders[None, :] * (logt - lp)[:, None] - m * lp[:, None]),
                        0.0)
                else:
                    # c^n (1+t)^(-m-n)
                    val = np.exp(orders[None, :] * (np.log(c) - lp)[:, None]
                                 - m * lp[:, None])
                acc += w[:, None] * val
            cols[:, 1:] = r[:, None] * acc
        return cols

    inner = quad.tightened(_INNER_TIGHTEN)
    vals, _ = integrate_batch(integrand, lo, hi, inner)
    vals = vals.reshape(len(layout), nx, k_max + 1)

    out = np.zeros((k_max + 1, nx))
    noise = cfg.noise
    out[0] = -a * noise
    if k_max >= 1:
        out[1] = -(a if scaled else 1.0) * noise
    for i, (tier, _) in enumerate(layout):
        lam = tier.lambda_los
        out[0] -= lam * vals[i, :, 0]
        for n in range(1, k_max + 1):
            out[n] += lam * (-1) ** n * _rising(m, n) * vals[i, :, n]
    return out


def omega_exponent_derivatives(cfg: NetworkConfig, scenario: Scenario | int, n: int,
                               a: float, x: float, *, exact_exclusion: bool = False,
                               quad: QuadratureSpec = DEFAULT_SPEC) -> float:
    """n-th derivative (n >= 1) of the log-Laplace exponent ``g`` at ``a``.

    ``g(a) = -a σ² - Σ λ_ξ ∫ r Ω_ξ(a, r) dr`` with the scenario's radial
    limits given serving distance ``x``.
    """
    if n < 1:
        raise ValueError("n must be >= 1; use laplace_derivatives for the value")
    if a < 0:
        raise ValueError("a must be >= 0")
    stack = _exponent_stack(cfg, Scenario(scenario), [a], [x], n, exact_exclusion,
                            quad, scaled=False)
    return float(stack[n, 0])


def laplace_derivatives(cfg: NetworkConfig, scenario: Scenario | int, a: float,
                        x: float, k_max: int, *, exact_exclusion: bool = False,
                        quad: QuadratureSpec = DEFAULT_SPEC) -> DerivativeStack:
    """``L^(k)(a)`` for k = 0..k_max, L the interference-plus-noise transform."""
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    if a <= 0:
        raise ValueError("a must be > 0")
    scaled = exp_form_stack(_exponent_stack(cfg, Scenario(scenario), [a], [x], k_max,
                                            exact_exclusion, quad))[:, 0]
    return DerivativeStack(tuple(float(v / a ** k) for k, v in enumerate(scaled)))


# --- coverage ----------------------------------------------------------------

@dataclass(frozen=True)
class SinrQuery:
    """One SINR-coverage evaluation.

    ``psi = m τ / (P G_max)`` of the serving tier; ``serving_prefactor`` is
    ``P G_max`` so the serving signal is ``serving_prefactor * x^-α * ħ``.
    """

    scenario: Scenario
    tau: float
    psi: float
    serving_prefactor: float

    @classmethod
    def build(cls, cfg: NetworkConfig, scenario: Scenario | int, tau: float) -> "SinrQuery":
        scenario = Scenario(scenario)
        if not tau >= 0:
            raise ValueError("tau must be >= 0")
        tier = cfg.tier(scenario.serving)
        pref = tier.power * tier.g_max
        return cls(scenario, float(tau), cfg.m * tau / pref, pref)


def _scenario_weight(cfg: NetworkConfig, scenario: Scenario, rho: float):
    """Upper limit and weight(x) = Pr(scenario, serving distance in dx) / dx."""
    lam_m, lam_s = cfg.macro.lambda_los, cfg.micro.lambda_los
    mu_m, mu_s = cfg.macro.mu, cfg.micro.mu
    empty_m = math.exp(-lam_m * math.pi * mu_m ** 2)
    empty_s = math.exp(-lam_s * math.pi * mu_s ** 2)

    def dens(lam, x):
        return 2 * lam * math.pi * x * np.exp(-lam * math.pi * x * x)

    if scenario is Scenario.S2:
        return mu_m, lambda x: empty_s * dens(lam_m, x)
    if scenario is Scenario.S3:
        return mu_s, lambda x: empty_m * dens(lam_s, x)
    if scenario is Scenario.S4:
        # B_m B_s (1 - F_s(ρx)) f_m(x)
        return min(mu_s / rho, mu_m), lambda x: (
            np.maximum(np.exp(-lam_s * math.pi * (rho * x) ** 2) - empty_s, 0.0)
            * dens(lam_m, x))
    return min(mu_s, rho * mu_m), lambda x: (
        np.maximum(np.exp(-lam_m * math.pi * (x / rho) ** 2) - empty_m, 0.0)
        * dens(lam_s, x))


def scenario_coverage(cfg: NetworkConfig, query: SinrQuery, *,
                      exact_exclusion: bool = False,
                      quad: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Pr(SINR > τ and the query's scenario occurs)."""
    scenario = query.scenario
    if not np.isfinite(query.tau):
        return 0.0
    rho = association_ratio(cfg)
    upper, weight = _scenario_weight(cfg, scenario, rho)
    serving = cfg.tier(scenario.serving)
    if serving.lambda_los == 0 or upper <= 0:
        return 0.0
    k_max = cfg.m - 1
    signs = np.array([(-1) ** k / math.factorial(k) for k in range(k_max + 1)])

    def integrand(x):
        a = query.psi * x ** cfg.alpha
        h = _exponent_stack(cfg, scenario, a, x, k_max, exact_exclusion, quad)
        ell = exp_form_stack(h)
        return weight(x) * np.tensordot(signs, ell, axes=1)

    val = integrate(integrand, 0.0, upper, quad)
    return float(min(max(val, 0.0), 1.0))


def rate_threshold(delta: float, load: float, spectrum: float) -> float:
    """SINR threshold τ = 2^(δ L / S) - 1 for a rate target δ."""
    expo = delta * load / spectrum * math.log(2.0)
    return math.expm1(expo) if expo < 700 else math.inf


@dataclass(frozen=True)
class CoverageResult:
    p2: float
    p3: float
    p4: float
    p5: float
    p_c: float
    delta: float
    tau_macro: float
    tau_micro: float
    association: AssociationReport

    def scenario(self, s: Scenario | int) -> float:
        return getattr(self, f"p{int(s)}")


def rate_coverage(cfg: NetworkConfig, delta: float, *, exact_exclusion: bool = False,
                  quad: QuadratureSpec = DEFAULT_SPEC,
                  report: AssociationReport | None = None) -> CoverageResult:
    """Rate coverage Pr(S/L log2(1 + SINR) > δ) using mean loads."""
    if not delta > 0:
        raise ValueError("delta must be > 0")
    rep = report if report is not None else association_probabilities(cfg, quad)
    tau_m = rate_threshold(delta, rep.load_macro, cfg.macro.spectrum)
    tau_s = rate_threshold(delta, rep.load_micro, cfg.micro.spectrum)
    ps = {}
    for s in Scenario:
        tau = tau_m if s.serving is Tier.MACRO else tau_s
        ps[s] = scenario_coverage(cfg, SinrQuery.build(cfg, s, tau),
                                  exact_exclusion=exact_exclusion, quad=quad)
    return CoverageResult(
        p2=ps[Scenario.S2], p3=ps[Scenario.S3], p4=ps[Scenario.S4],
        p5=ps[Scenario.S5], p_c=sum(ps.values()), delta=float(delta),
        tau_macro=tau_m, tau_micro=tau_s, association=rep)
