"""Physical model of the two-tier mmWave HetNet.

Units follow the parameter table the defaults reproduce: transmit powers in
mW, distances in meters, intensities per m^2, spectrum in Hz.  Nothing is
converted to dB internally.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

__all__ = [
    "Tier",
    "TierParams",
    "FadingModel",
    "NetworkConfig",
    "DistanceStats",
    "los_probability",
    "antenna_gain",
    "wrap_angle",
    "fading_cdf",
    "fading_mgf",
    "association_ratio",
    "distance_stats",
    "received_power",
    "table1_config",
    "MAX_NAKAGAMI_M",
]

MAX_NAKAGAMI_M = 8


class Tier(str, enum.Enum):
    MACRO = "macro"
    MICRO = "micro"

    @property
    def suffix(self) -> str:
        return "m" if self is Tier.MACRO else "s"


def _require(ok: bool, key: str, constraint: str, value) -> None:
    if not ok:
        raise ValueError(f"{key}: requires {constraint}, got {value!r}")


@dataclass(frozen=True)
class TierParams:
    """Parameters of one BS tier.

    ``lambda_los`` is the intensity of LoS BSs seen by the typical UE, i.e.
    the full intensity thinned by ``omega``; `lambda_all` recovers the
    latter.
    """

    tier_id: Tier
    lambda_los: float
    omega: float
    mu: float
    power: float
    g_max: float
    g_min: float
    beamwidth: float
    spectrum: float

    def __post_init__(self):
        object.__setattr__(self, "tier_id", Tier(self.tier_id))
        s = self.tier_id.suffix
        p = self.tier_id.value
        _require(self.lambda_los >= 0 and math.isfinite(self.lambda_los),
                 f"{p}.lambda_los", f"lambda_{s} >= 0", self.lambda_los)
        _require(0.0 <= self.omega <= 1.0, f"{p}.omega",
                 f"omega_{s} ∈ [0,1]", self.omega)
        _require(self.omega > 0 or self.lambda_los == 0, f"{p}.lambda_los",
                 f"lambda_{s} = 0 when omega_{s} = 0", self.lambda_los)
        _require(self.mu > 0 and math.isfinite(self.mu), f"{p}.mu",
                 f"mu_{s} > 0", self.mu)
        _require(self.power > 0, f"{p}.power", f"P_{s} > 0", self.power)
        _require(self.g_min > 0, f"{p}.g_min", f"G_min_{s} > 0", self.g_min)
        _require(self.g_max >= self.g_min, f"{p}.g_max",
                 f"G_max_{s} >= G_min_{s}", self.g_max)
        _require(0 < self.beamwidth <= 2 * math.pi, f"{p}.beamwidth",
                 f"theta_{s} ∈ (0, 2π]", self.beamwidth)
        _require(self.spectrum > 0, f"{p}.spectrum", f"S_{s} > 0",
                 self.spectrum)

    @classmethod
    def from_all(cls, tier_id, lambda_all: float, omega: float, **kw) -> "TierParams":
        """Build a tier from the intensity of all (LoS and NLoS) BSs."""
        return cls(tier_id, lambda_all * omega, omega, **kw)

    @property
    def lambda_all(self) -> float:
        """Intensity of all BSs; 0 for a tier that is never LoS."""
        return self.lambda_los / self.omega if self.omega > 0 else 0.0

    @property
    def mean_los_count(self) -> float:
        """Expected number of LoS BSs inside the LoS ball."""
        return self.lambda_los * math.pi * self.mu ** 2

    def with_lambda_los(self, lambda_los: float) -> "TierParams":
        return replace(self, lambda_los=float(lambda_los))


@dataclass(frozen=True)
class FadingModel:
    """Nakagami-m fading; the power gain is Gamma(m, 1/m) with unit mean."""

    m: int = 1

    def __post_init__(self):
        _require(isinstance(self.m, (int, np.integer)) and not isinstance(self.m, bool)
                 and 1 <= self.m <= MAX_NAKAGAMI_M,
                 "nakagami_m", f"integer m ∈ [1,{MAX_NAKAGAMI_M}]", self.m)
        object.__setattr__(self, "m", int(self.m))

    @property
    def scale(self) -> float:
        return 1.0 / self.m


@dataclass(frozen=True)
class NetworkConfig:
    macro: TierParams
    micro: TierParams
    lambda_u: float
    bias: float
    alpha: float
    noise: float
    fading: FadingModel = field(default_factory=FadingModel)

    def __post_init__(self):
        _require(self.macro.tier_id is Tier.MACRO, "macro", "tier_id macro",
                 self.macro.tier_id)
        _require(self.micro.tier_id is Tier.MICRO, "micro", "tier_id micro",
                 self.micro.tier_id)
        _require(self.lambda_u > 0, "lambda_u", "lambda_u > 0", self.lambda_u)
        _require(self.bias >= 1 and math.isfinite(self.bias), "bias",
                 "A_s ≥ 1", self.bias)
        _require(self.alpha > 2 and math.isfinite(self.alpha), "alpha",
                 "alpha > 2", self.alpha)
        _require(self.noise > 0, "noise", "sigma^2 > 0", self.noise)

    def tier(self, tier: Tier | str) -> TierParams:
        return self.macro if Tier(tier) is Tier.MACRO else self.micro

    def replace(self, **changes) -> "NetworkConfig":
        return replace(self, **changes)

    def with_bias(self, bias: float) -> "NetworkConfig":
        return replace(self, bias=float(bias))

    def with_micro_density(self, lambda_los: float) -> "NetworkConfig":
        return replace(self, micro=self.micro.with_lambda_los(lambda_los))

    def with_beamwidths(self, theta_m: float, theta_s: float) -> "NetworkConfig":
        return replace(self, macro=replace(self.macro, beamwidth=theta_m),
                       micro=replace(self.micro, beamwidth=theta_s))

    @property
    def m(self) -> int:
        return self.fading.m


def table1_config(**overrides) -> NetworkConfig:
    """Network used for the numerical results (A_s = 100, Rayleigh fading)."""
    macro = TierParams(Tier.MACRO, 1e-5, 0.6, mu=1000.0, power=1e4, g_max=4e3,
                       g_min=1.0, beamwidth=0.1, spectrum=1e9)
    micro = TierParams(Tier.MICRO, 1e-4, 0.5, mu=100.0, power=1e2, g_max=1e3,
                       g_min=1.0, beamwidth=0.2, spectrum=1e9)
    cfg = NetworkConfig(macro=macro, micro=micro, lambda_u=0.1, bias=100.0,
                        alpha=2.2, noise=1.0, fading=FadingModel(1))
    return replace(cfg, **overrides) if overrides else cfg


def los_probability(r, tier: TierParams):
    """LoS ball: ``omega`` strictly inside radius ``mu``, zero elsewhere."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(np.isnan(r)):
        raise ValueError("distance must be >= 0")
    out = np.where((r > 0) & (r < tier.mu), tier.omega, 0.0)
    return float(out) if out.ndim == 0 else out


def wrap_angle(theta):
    """Map angles onto (-π, π]."""
    theta = np.asarray(theta, dtype=float)
    inside = (theta > -np.pi) & (theta <= np.pi)
    w = np.where(inside, theta, np.pi - np.mod(np.pi - theta, 2 * np.pi))
    return float(w) if w.ndim == 0 else w


def antenna_gain(theta, tier: TierParams):
    """Sectored pattern; the main-lobe edge ``|θ| = beamwidth/2`` counts as main lobe."""
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise ValueError("angle must be finite")
    off = np.abs(wrap_angle(theta))
    g = np.where(off <= 0.5 * tier.beamwidth, tier.g_max, tier.g_min)
    return float(g) if g.ndim == 0 else g


def fading_cdf(x, m: int):
    """CDF of the Gamma(m, 1/m) power gain via its finite Erlang sum."""
    FadingModel(m)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("fading power gain must be >= 0")
    mx = m * x
    term = np.ones_like(mx)
    acc = np.ones_like(mx)
    for k in range(1, m):
        term = term * mx / k
        acc = acc + term
    out = 1.0 - np.exp(-mx) * acc
    return float(out) if out.ndim == 0 else out


def fading_mgf(s, m: int):
    """E[exp(s h)] = (1 - s/m)^(-m), defined for s < m."""
    FadingModel(m)
    s = np.asarray(s, dtype=float)
    if np.any(s >= m):
        raise ValueError(f"MGF pole: requires s < m = {m}")
    out = (1.0 - s / m) ** (-m)
    return float(out) if out.ndim == 0 else out


def association_ratio(cfg: NetworkConfig) -> float:
    """Distance-ratio threshold ρ: the UE picks macro iff r_min,s > ρ r_min,m."""
    ratio = (cfg.macro.power * cfg.macro.g_max) / (
        cfg.bias * cfg.micro.power * cfg.micro.g_max)
    return ratio ** (-1.0 / cfg.alpha)


@dataclass(frozen=True)
class DistanceStats:
    """Nearest-LoS-BS distance law of one tier, conditioned on a non-empty ball.

    ``b_void`` is Pr(ball non-empty); ``p_empty`` is its complement computed
    without cancellation.
    """

    tier: Tier
    b_void: float
    p_empty: float
    lambda_los: float
    mu: float
    cdf: Callable = field(repr=False, compare=False)
    pdf: Callable = field(repr=False, compare=False)


def distance_stats(tier: TierParams) -> DistanceStats:
    lam, mu = tier.lambda_los, tier.mu
    count = lam * math.pi * mu * mu
    b = -math.expm1(-count)
    p_empty = math.exp(-count)

    if b == 0.0:
        def cdf(x):
            x = np.asarray(x, dtype=float)
            return np.where(x > mu, 1.0, 0.0)

        def pdf(x):
            return np.zeros_like(np.asarray(x, dtype=float))
    else:
        def cdf(x):
            x = np.asarray(x, dtype=float)
            inner = -np.expm1(-lam * math.pi * np.minimum(x, mu) ** 2) / b
            return np.where(x > mu, 1.0, np.where(x < 0, 0.0, inner))

        def pdf(x):
            x = np.asarray(x, dtype=float)
            val = 2 * lam * math.pi * x * np.exp(-lam * math.pi * x * x) / b
            return np.where((x >= 0) & (x <= mu), val, 0.0)

    return DistanceStats(tier.tier_id, b, p_empty, lam, mu, cdf, pdf)


def received_power(tier: TierParams, r, theta, hbar, alpha: float):
    """P G(θ) r^-α ħ."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("received power is singular at r = 0")
    out = tier.power * antenna_gain(theta, tier) * r ** (-alpha) * np.asarray(hbar)
    return float(out) if np.ndim(out) == 0 else out
