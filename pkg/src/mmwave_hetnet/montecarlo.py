"""Monte Carlo simulation of the typical UE.

Each trial draws both LoS processes inside their balls, random boresight
directions for every BS and a fading gain for every link, then applies the
biased nearest-BS association.  Trial ``i`` under seed ``s`` always uses
the Philox stream keyed by ``(s, i)``, so estimates do not depend on how
trials are split across workers.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import NetworkConfig, association_ratio, wrap_angle

__all__ = [
    "Association",
    "NetworkRealization",
    "McEstimate",
    "SinrSample",
    "trial_rng",
    "sample_realization",
    "simulate",
    "estimate_association",
    "estimate_association_sweep",
    "estimate_scenario_coverage",
    "estimate_rate_coverage",
]


class Association(enum.IntEnum):
    NONE = 0
    MACRO = 1
    MICRO = 2


@dataclass(frozen=True)
class NetworkRealization:
    """One sampled topology as seen from the typical UE at the origin.

    Offsets are boresight angles relative to the UE direction, in (-π, π].
    The serving BS (if any) has offset 0.
    """

    macro_r: np.ndarray
    macro_phi: np.ndarray
    micro_r: np.ndarray
    micro_phi: np.ndarray
    macro_offset: np.ndarray
    micro_offset: np.ndarray
    macro_fading: np.ndarray
    micro_fading: np.ndarray
    association: Association
    serving_index: int

    @property
    def scenario(self) -> int:
        """1..5, matching the analysis scenarios."""
        has_m, has_s = self.macro_r.size > 0, self.micro_r.size > 0
        if not (has_m or has_s):
            return 1
        if not has_s:
            return 2
        if not has_m:
            return 3
        return 4 if self.association is Association.MACRO else 5

    def sinr(self, cfg: NetworkConfig) -> float:
        """SINR at the UE; 0 when nothing is associated."""
        if self.association is Association.NONE:
            return 0.0
        alpha = cfg.alpha
        pm = _link_power(cfg.macro, self.macro_r, self.macro_offset,
                         self.macro_fading, alpha)
        ps = _link_power(cfg.micro, self.micro_r, self.micro_offset,
                         self.micro_fading, alpha)
        if self.association is Association.MACRO:
            signal = pm[self.serving_index]
        else:
            signal = ps[self.serving_index]
        interference = pm.sum() + ps.sum() - signal
        return float(signal / (interference + cfg.noise))


def _link_power(tier, r, offset, fading, alpha):
    gain = np.where(np.abs(offset) <= 0.5 * tier.beamwidth, tier.g_max, tier.g_min)
    return tier.power * gain * r ** (-alpha) * fading


@dataclass(frozen=True)
class McEstimate:
    mean: float
    half_width_95: float
    trials: int
    seed: int

    @classmethod
    def from_count(cls, hits: int, trials: int, seed: int) -> "McEstimate":
        p = hits / trials
        return cls(p, 1.96 * math.sqrt(p * (1 - p) / trials), trials, seed)

    @property
    def interval(self) -> tuple[float, float]:
        return self.mean - self.half_width_95, self.mean + self.half_width_95


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent counter-based stream for one trial."""
    if not (0 <= seed < 2 ** 64 and 0 <= trial < 2 ** 64):
        raise ValueError("seed and trial index must fit in 64 bits")
    return np.random.Generator(np.random.Philox(key=int(seed) | (int(trial) << 64)))


def _draw_tier(rng, tier, m):
    n = rng.poisson(tier.mean_los_count)
    r = tier.mu * np.sqrt(rng.random(n))
    phi = wrap_angle(rng.uniform(0.0, 2 * np.pi, n))
    offset = wrap_angle(rng.uniform(0.0, 2 * np.pi, n))
    fading = rng.gamma(m, 1.0 / m, n)
    return r, np.atleast_1d(phi), np.atleast_1d(offset), fading


def _associate(rmin_m, rmin_s, rho):
    """Vectorized association; inputs are nearest distances (inf if empty)."""
    has_m, has_s = np.isfinite(rmin_m), np.isfinite(rmin_s)
    macro = has_m & (~has_s | (rmin_s > rho * rmin_m))
    micro = has_s & ~macro
    return np.where(macro, Association.MACRO,
                    np.where(micro, Association.MICRO, Association.NONE))


def sample_realization(cfg: NetworkConfig, rng: np.random.Generator) -> NetworkRealization:
    """Draw one network realization and associate the typical UE."""
    m = cfg.m
    mr, mphi, moff, mfad = _draw_tier(rng, cfg.macro, m)
    sr, sphi, soff, sfad = _draw_tier(rng, cfg.micro, m)
    rmin_m = mr.min() if mr.size else math.inf
    rmin_s = sr.min() if sr.size else math.inf
    assoc = Association(int(_associate(np.float64(rmin_m), np.float64(rmin_s),
                                       association_ratio(cfg))))
    idx = -1
    if assoc is Association.MACRO:
        idx = int(np.argmin(mr))
        moff = moff.copy()
        moff[idx] = 0.0
    elif assoc is Association.MICRO:
        idx = int(np.argmin(sr))
        soff = soff.copy()
        soff[idx] = 0.0
    return NetworkRealization(mr, mphi, sr, sphi, moff, soff, mfad, sfad, assoc, idx)


@dataclass(frozen=True)
class SinrSample:
    """Per-trial outcomes of a simulation run."""

    scenario: np.ndarray   # 1..5
    sinr: np.ndarray       # 0 where unassociated
    seed: int

    @property
    def trials(self) -> int:
        return self.scenario.size


def _run_chunk(cfg, seed, start, stop):
    scen = np.empty(stop - start, dtype=np.int8)
    sinr = np.empty(stop - start)
    for j, i in enumerate(range(start, stop)):
        real = sample_realization(cfg, trial_rng(seed, i))
        scen[j] = real.scenario
        sinr[j] = real.sinr(cfg)
    return scen, sinr


def _chunks(trials, workers):
    n = max(1, min(workers, trials))
    edges = np.linspace(0, trials, n + 1).astype(int)
    return list(zip(edges[:-1], edges[1:]))


def simulate(cfg: NetworkConfig, trials: int, seed: int, workers: int = 1) -> SinrSample:
    """Run ``trials`` realizations and record scenario and SINR for each."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    parts = _chunks(trials, workers)
    if len(parts) == 1:
        results = [_run_chunk(cfg, seed, 0, trials)]
    else:
        with ThreadPoolExecutor(len(parts)) as ex:
            results = list(ex.map(lambda se: _run_chunk(cfg, seed, *se), parts))
    scen = np.concatenate([r[0] for r in results])
    sinr = np.concatenate([r[1] for r in results])
    return SinrSample(scen, sinr, seed)


def _nearest(cfg, trials, seed):
    """Nearest LoS distance per tier for each trial (inf when empty)."""
    out = np.full((trials, 2), np.inf)
    m = cfg.m
    for i in range(trials):
        rng = trial_rng(seed, i)
        mr = _draw_tier(rng, cfg.macro, m)[0]
        sr = _draw_tier(rng, cfg.micro, m)[0]
        if mr.size:
            out[i, 0] = mr.min()
        if sr.size:
            out[i, 1] = sr.min()
    return out


def estimate_association_sweep(cfg: NetworkConfig, biases: Iterable[float],
                               trials: int, seed: int):
    """Association estimates for several bias values on shared realizations.

    Returns a list of ``(bias, P_tm estimate, P_ts estimate)``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    near = _nearest(cfg, trials, seed)
    rows = []
    for bias in biases:
        rho = association_ratio(cfg.with_bias(bias))
        assoc = _associate(near[:, 0], near[:, 1], rho)
        rows.append((float(bias),
                     McEstimate.from_count(int(np.sum(assoc == Association.MACRO)), trials, seed),
                     McEstimate.from_count(int(np.sum(assoc == Association.MICRO)), trials, seed)))
    return rows


def estimate_association(cfg: NetworkConfig, trials: int, seed: int):
    """Empirical (P_tm, P_ts) with 95% normal-approximation intervals."""
    _, pm, ps = estimate_association_sweep(cfg, [cfg.bias], trials, seed)[0]
    return pm, ps


def estimate_scenario_coverage(cfg: NetworkConfig, tau_macro: float, tau_micro: float,
                               trials: int, seed: int, workers: int = 1,
                               sample: SinrSample | None = None) -> dict:
    """Per-scenario Pr(SINR > τ, scenario) for scenarios 2..5."""
    sample = sample if sample is not None else simulate(cfg, trials, seed, workers)
    out = {}
    for s in (2, 3, 4, 5):
        tau = tau_macro if s in (2, 4) else tau_micro
        hits = int(np.sum((sample.scenario == s) & (sample.sinr > tau)))
        out[s] = McEstimate.from_count(hits, sample.trials, sample.seed)
    return out


def estimate_rate_coverage(cfg: NetworkConfig, delta: float | Sequence[float],
                           trials: int, seed: int, *, loads: tuple | None = None,
                           workers: int = 1, sample: SinrSample | None = None):
    """Empirical rate coverage at one or several rate thresholds.

    Thresholds use mean loads.  ``loads=None`` takes them from the analytic
    association probabilities; pass ``(L_m, L_s)`` to override.  Several
    deltas share one set of realizations.
    """
    from .analysis import association_probabilities, rate_threshold

    if loads is None:
        rep = association_probabilities(cfg)
        loads = (rep.load_macro, rep.load_micro)
    sample = sample if sample is not None else simulate(cfg, trials, seed, workers)
    macro = (sample.scenario == 2) | (sample.scenario == 4)
    micro = (sample.scenario == 3) | (sample.scenario == 5)
    deltas = np.atleast_1d(np.asarray(delta, dtype=float))
    out = []
    for d in deltas:
        tm = rate_threshold(d, loads[0], cfg.macro.spectrum)
        ts = rate_threshold(d, loads[1], cfg.micro.spectrum)
        hits = int(np.sum(macro & (sample.sinr > tm)) + np.sum(micro & (sample.sinr > ts)))
        out.append(McEstimate.from_count(hits, sample.trials, sample.seed))
    return out[0] if np.ndim(delta) == 0 else out
