"""Entanglement-rate models for the three-node repeater link.

Closed forms for the single-device array, the switch-tree architecture and
their hybrid, plus a Bernoulli-trial Monte Carlo engine used to validate the
closed forms, and the superradiance heralding trade-off.

The closed forms count one link attempt per channel per heralding cycle.
A cycle is one photon transit plus one heralding latency (both L/c by
default), so the step-1-limited rate is

    Gamma = min(N, capacity) * p1 / (t_link + t_herald).

They are upper-bound models: pairing latency between the two sides is
absorbed by side-buffering, which the Monte Carlo engine resolves explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError
from .optics import OpticalInterface

C_VACUUM = 299792458.0


@dataclass(frozen=True)
class LinkParams:
    L: float = 1.0                  # km
    gamma_fiber: float = 0.041      # 1/km
    p_d: float = 0.83               # detector efficiency
    p_c: float = 0.33               # frequency-conversion efficiency
    alpha: float = 0.01             # single-photon-scheme bright-state weight
    t_ph: float = 10e-9             # s, photon lifetime
    n_freq: int = 10                # frequency-multiplexing channels
    mzi_eff: float = 0.92           # per-switch transmission
    signal_velocity: float = C_VACUUM  # m/s; fiber-index mode is opt-in
    herald_latency: float | None = None  # s; defaults to t_link
    swap_time: float = 0.0          # s, nuclear-swap cost per ebit
    swap_fidelity: float = 1.0

    def __post_init__(self):
        if self.L <= 0:
            raise ValidationError("link length must be positive")
        for name in ("p_d", "p_c", "alpha", "mzi_eff", "swap_fidelity"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValidationError(f"{name} must be in (0, 1], got {v}")
        if self.n_freq < 1:
            raise ValidationError("n_freq must be >= 1")

    @property
    def t_link(self) -> float:
        return self.L * 1e3 / self.signal_velocity

    @property
    def cycle(self) -> float:
        latency = self.t_link if self.herald_latency is None else self.herald_latency
        return self.t_link + latency

    @property
    def fiber_transmission(self) -> float:
        return math.exp(-self.gamma_fiber * self.L)


@dataclass(frozen=True)
class RateCurve:
    """Gamma_AB versus qubit number with the limiting factor flagged."""

    n_qubits: np.ndarray
    rate: np.ndarray
    limit: list[str]  # "loss" | "capacity" per point


def link_success_p1(lp: LinkParams, eta_wg: float) -> float:
    """Distant-entanglement success probability p1 = 2 alpha eta p_d p_c eta_wg."""
    return 2.0 * lp.alpha * lp.fiber_transmission * lp.p_d * lp.p_c * eta_wg


def local_bk_p2(lp: LinkParams, eta_wg: float) -> float:
    """Local two-photon Barrett-Kok success probability (p_d * eta_wg)^2 / 2."""
    return (lp.p_d * eta_wg) ** 2 / 2.0


def channel_capacity(lp: LinkParams) -> int:
    """Time-frequency channel capacity n_freq * floor(t_link / t_ph)."""
    return lp.n_freq * int(lp.t_link / lp.t_ph)


def rate_efpsa(n: float, lp: LinkParams, optics: OpticalInterface) -> tuple[float, str]:
    """Single-array rate: every qubit adds per-period loss to the device."""
    if n <= 0:
        return 0.0, "loss"
    cap = channel_capacity(lp)
    p1 = link_success_p1(lp, optics.eta_wg(n))
    active = min(n, cap)
    return active * p1 / lp.cycle, ("capacity" if n > cap else "loss")


def rate_mzi(n: float, lp: LinkParams, optics: OpticalInterface) -> tuple[float, str]:
    """Switch-tree rate: single-emitter devices behind ceil(log2 N) lossy stages."""
    if n <= 0:
        return 0.0, "loss"
    cap = channel_capacity(lp)
    p1 = link_success_p1(lp, optics.eta_wg(1))
    depth = math.ceil(math.log2(n)) if n > 1 else 0
    active = min(n, cap)
    return active * p1 * lp.mzi_eff**depth / lp.cycle, ("capacity" if n > cap else "loss")


def rate_hybrid(
    n: float, n_dev: int, lp: LinkParams, optics: OpticalInterface
) -> tuple[float, str]:
    """N qubits split across n_dev arrays connected by a switch tree."""
    if not 1 <= n_dev <= max(n, 1):
        raise ValidationError(f"n_dev must be in [1, {n}], got {n_dev}")
    if n <= 0:
        return 0.0, "loss"
    cap = channel_capacity(lp)
    p1 = link_success_p1(lp, optics.eta_wg(n / n_dev))
    depth = math.ceil(math.log2(n_dev)) if n_dev > 1 else 0
    active = min(n, cap)
    return active * p1 * lp.mzi_eff**depth / lp.cycle, ("capacity" if n > cap else "loss")


def optimize_hybrid(
    n: int, lp: LinkParams, optics: OpticalInterface
) -> tuple[int, float]:
    """Best device split for ``n`` qubits, exhaustive over integer n_dev."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    n_devs = np.arange(1, n + 1)
    per_device = n / n_devs
    eta = np.array([optics.eta_wg(m) for m in per_device])
    depth = np.ceil(np.log2(n_devs)).astype(int)
    p1 = 2.0 * lp.alpha * lp.fiber_transmission * lp.p_d * lp.p_c * eta
    rates = min(n, channel_capacity(lp)) * p1 * lp.mzi_eff**depth / lp.cycle
    best = int(np.argmax(rates))
    return int(n_devs[best]), float(rates[best])


def rate_curve(
    arch: str,
    n_values,
    lp: LinkParams,
    optics: OpticalInterface,
) -> RateCurve:
    """Closed-form rate curve for one architecture ("efpsa" | "mzi" | "hybrid")."""
    n_values = np.asarray(n_values)
    rates = np.zeros(len(n_values))
    limits = []
    for i, n in enumerate(n_values):
        if arch == "efpsa":
            r, flag = rate_efpsa(int(n), lp, optics)
        elif arch == "mzi":
            r, flag = rate_mzi(int(n), lp, optics)
        elif arch == "hybrid":
            _, r = optimize_hybrid(int(n), lp, optics)
            flag = "capacity" if n > channel_capacity(lp) else "loss"
        else:
            raise ValidationError(f"unknown architecture {arch!r}")
        rates[i] = r
        limits.append(flag)
    return RateCurve(n_qubits=n_values, rate=rates, limit=limits)


# ---------------------------------------------------------------------------
# superradiance heralding (photonic-crystal pair emission)

def superradiance_fidelity(t: float, gamma_sp: float) -> float:
    """Heralded-state fidelity for a photon detected at time t:
    F = e^(Gamma t) / (2 + e^(Gamma t))."""
    e = math.exp(gamma_sp * t)
    return e / (2.0 + e)


def herald_density(t: float, gamma_sp: float) -> float:
    """Photon-detection probability density Gamma * e^(-Gamma t)."""
    return gamma_sp * math.exp(-gamma_sp * t)


def tradeoff(fidelity: float) -> float:
    """Post-selection probability achieving a fidelity target: p = (1-F)/(2F)."""
    if not 1.0 / 3.0 < fidelity < 1.0:
        raise ValidationError("superradiance fidelity target must be in (1/3, 1)")
    return (1.0 - fidelity) / (2.0 * fidelity)


def scheme_rates(f_target: float, p_det: float) -> dict[str, float]:
    """Entanglement rates of the heralding schemes at a common fidelity target.

    Combination rule for Barrett-Kok plus superradiance timing: a detection
    after the fidelity-crossing time t0 already heralds at the target
    fidelity, so the second heralding round is skipped for that fraction of
    single detections; the remainder proceeds through standard two-round
    Barrett-Kok.
    """
    if not 0.0 < p_det <= 1.0:
        raise ValidationError("p_det must be in (0, 1]")
    post_t0_mass = tradeoff(f_target)  # integral of p(t) beyond t0 = e^(-Gamma t0)
    return {
        "barrett_kok": p_det**2 / 2.0,
        "single_photon": 2.0 * (1.0 - f_target) * p_det,
        "superradiance": post_t0_mass * p_det,
        "bk_superradiance": p_det**2 / 2.0 + p_det * post_t0_mass,
    }


# ---------------------------------------------------------------------------
# Monte Carlo protocol engine

@dataclass(frozen=True)
class ProtocolStep:
    """Timing bookkeeping for one protocol stage."""

    name: str            # "distant-link" | "local-swap" | "bell-measurement"
    duration: float      # s
    success_probability: float


def protocol_steps(lp: LinkParams, optics: OpticalInterface, n: int) -> list[ProtocolStep]:
    eta = optics.eta_wg(n)
    return [
        ProtocolStep("distant-link", lp.cycle, link_success_p1(lp, eta)),
        ProtocolStep("local-swap", lp.swap_time, local_bk_p2(lp, eta)),
        ProtocolStep("bell-measurement", 0.0, lp.swap_fidelity),
    ]


def monte_carlo_protocol(
    n: int,
    lp: LinkParams,
    optics: OpticalInterface,
    seed: int = 0,
    n_trials: int = 10_000,
) -> tuple[float, float]:
    """Event-driven estimate of the ebit rate, with standard error.

    Each heralding cycle, every active channel attempts a link on the A and
    the B side (Bernoulli p1 each).  Heralded halves are buffered per side
    and matched; matched pairs run local Barrett-Kok attempts (Bernoulli p2,
    repeated, costing swap_time each) before counting as an ebit.  Rates are
    averaged over batches for the error estimate.
    """
    if n_trials < 1000:
        raise ValidationError("n_trials must be >= 1e3")
    rng = np.random.default_rng(seed)
    channels = min(n, channel_capacity(lp))
    eta = optics.eta_wg(n)
    p1 = link_success_p1(lp, eta)
    p2 = local_bk_p2(lp, eta)

    if p2 <= 0:
        raise ValidationError("local Barrett-Kok probability is zero")

    n_batches = 20
    per_batch = n_trials // n_batches
    batch_rates = []
    cum_a = cum_b = delivered = 0
    for _ in range(n_batches):
        cum_a += int(rng.binomial(channels, p1, size=per_batch).sum())
        cum_b += int(rng.binomial(channels, p1, size=per_batch).sum())
        matched = min(cum_a, cum_b) - delivered
        delivered += matched
        # local attempts until success; geometric retry count sets the swap cost
        retries = rng.geometric(p2, size=matched) if matched else np.array([], dtype=int)
        local_time = float(retries.sum()) * lp.swap_time
        elapsed = per_batch * lp.cycle + local_time
        batch_rates.append(matched / elapsed)
    batch_rates = np.asarray(batch_rates)
    rate = float(np.mean(batch_rates))
    stderr = float(np.std(batch_rates, ddof=1) / math.sqrt(n_batches))
    return rate, stderr


def fiber_index_mode(lp: LinkParams, group_index: float = 1.47) -> LinkParams:
    """Variant of the link parameters using the fiber group velocity."""
    return replace(lp, signal_velocity=C_VACUUM / group_index)
