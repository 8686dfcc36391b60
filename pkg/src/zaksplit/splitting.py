"""
Lie-Trotter splitting for the Fourier-collocated Zakharov system

    i psi_t = Omega^2 psi + I(u psi),   u_t = udot,   udot_t = -Omega^2 (u + I(|psi|^2)).

One step composes the exact flow of the potential/wave part over tau with
the free Schroedinger flow e^{-i tau Omega^2}.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Iterator, NamedTuple

import numpy as np

from zaksplit.errors import CFLError, GridMismatchError, NumericBlowupError
from zaksplit.spectral import (
    Grid,
    OmegaSymbol,
    SpectralField,
    abs_squared,
    coeffs_to_values,
    pointwise_product,
    sinc,
    values_to_coeffs,
)

# Largest double below 2*pi: "ratio <= c" is then the strict "ratio < 2*pi".
DEFAULT_CFL_CONSTANT = math.nextafter(2 * math.pi, 0.0)


class CFLWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class ZakharovState:
    psi: SpectralField
    u: SpectralField
    udot: SpectralField
    time: float = 0.0

    def __post_init__(self):
        g = self.psi.grid
        if self.u.grid != g or self.udot.grid != g:
            raise GridMismatchError("psi, u and udot must share one grid")

    @property
    def grid(self) -> Grid:
        return self.psi.grid

    @classmethod
    def zeros(cls, grid: Grid, time: float = 0.0) -> ZakharovState:
        z = SpectralField.zeros(grid)
        return cls(z, z, z, time)

    def is_finite(self) -> bool:
        return all(np.isfinite(f.coeffs).all() for f in (self.psi, self.u, self.udot))


@dataclass(frozen=True)
class StepperConfig:
    tau: float
    cfl_constant: float = DEFAULT_CFL_CONSTANT
    enforce_cfl: bool = False

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"time step must be positive, got {self.tau}")
        if not 0 < self.cfl_constant < 2 * math.pi:
            raise ValueError(f"CFL constant must lie in (0, 2*pi), got {self.cfl_constant}")


class CFLStatus(NamedTuple):
    satisfied: bool
    ratio: float


def cfl_check(grid: Grid, cfg: StepperConfig, warn: bool = True) -> CFLStatus:
    """Evaluate d*tau*K^2 <= c; raise or warn on violation according to ``cfg``."""
    ratio = grid.d * cfg.tau * grid.K**2
    status = CFLStatus(ratio <= cfg.cfl_constant, ratio)
    if not status.satisfied:
        if cfg.enforce_cfl:
            raise CFLError(ratio, cfg.cfl_constant)
        if warn:
            warnings.warn(
                f"CFL condition violated (d*tau*K^2 = {ratio:.6g} > {cfg.cfl_constant:.6g})",
                CFLWarning,
                stacklevel=2,
            )
    return status


# --- mode-wise symbols ----------------------------------------------------


def free_schroedinger(t: float) -> OmegaSymbol:
    return OmegaSymbol(lambda w: np.exp(-1j * t * w * w), f"exp(-i*{t}*Omega^2)")


def sinc_symbol(t: float) -> OmegaSymbol:
    return OmegaSymbol(lambda w: sinc(t * w), f"sinc({t}*Omega)")


class _WaveSymbols:
    """Multiplier arrays that one step of size tau needs on one grid."""

    def __init__(self, grid: Grid, tau: float):
        w = grid.omega
        self.free = np.exp(-1j * tau * grid.omega_sq)
        self.sinc_full = sinc(tau * w)
        self.sinc_half_sq = sinc(0.5 * tau * w) ** 2
        self.cos = np.cos(tau * w)
        self.t_sinc = tau * self.sinc_full
        self.minus_w_sin = -w * np.sin(tau * w)
        for arr in vars(self).values():
            arr.flags.writeable = False


@lru_cache(maxsize=64)
def wave_symbols(grid: Grid, tau: float) -> _WaveSymbols:
    return _WaveSymbols(grid, tau)


# --- exact sub-flows ------------------------------------------------------


def flow_free(state: ZakharovState, t: float) -> ZakharovState:
    """psi <- e^{-i t Omega^2} psi; u, udot untouched."""
    psi = SpectralField(state.grid, np.exp(-1j * t * state.grid.omega_sq) * state.psi.coeffs)
    return replace(state, psi=psi, time=state.time + t)


def wave_rotation(u: SpectralField, udot: SpectralField, t: float):
    """Apply the wave propagator R(t) = [[cos, t sinc], [-Omega sin, cos]] mode-wise."""
    if u.grid != udot.grid:
        raise GridMismatchError("u and udot must share one grid")
    w = u.grid.omega
    c, ts, ms = np.cos(t * w), t * sinc(t * w), -w * np.sin(t * w)
    a, b = u.coeffs, udot.coeffs
    return SpectralField(u.grid, c * a + ts * b), SpectralField(u.grid, ms * a + c * b)


def _v_pre(sym: _WaveSymbols, u, udot, rho, tau):
    return sym.sinc_full * u + 0.5 * tau * sym.sinc_half_sq * udot + (sym.sinc_full - 1.0) * rho


def _v_post(sym: _WaveSymbols, u, udot, rho, tau):
    return sym.sinc_full * u - 0.5 * tau * sym.sinc_half_sq * udot + (sym.sinc_full - 1.0) * rho


def v_pre(state_n: ZakharovState, tau: float) -> SpectralField:
    """Time average of u over the potential/wave sub-step, from the state before it."""
    sym = wave_symbols(state_n.grid, tau)
    rho = abs_squared(state_n.psi).coeffs
    return SpectralField(state_n.grid, _v_pre(sym, state_n.u.coeffs, state_n.udot.coeffs, rho, tau))


def v_post(state_np1: ZakharovState, psi_n: SpectralField, tau: float) -> SpectralField:
    """The same average, recomputed from (u, udot) after the step and psi before it."""
    sym = wave_symbols(state_np1.grid, tau)
    rho = abs_squared(psi_n).coeffs
    return SpectralField(
        state_np1.grid, _v_post(sym, state_np1.u.coeffs, state_np1.udot.coeffs, rho, tau)
    )


def _wave_update(sym: _WaveSymbols, u, udot, rho):
    # (u, udot) <- R (u, udot) + (R - 1)(rho, 0)
    a = u + rho
    return sym.cos * a + sym.t_sinc * udot - rho, sym.minus_w_sin * a + sym.cos * udot


def _raw_step(grid: Grid, psi, u, udot, tau):
    """One splitting step on coefficient arrays; returns the new arrays and v."""
    sym = wave_symbols(grid, tau)
    psi_nodes = coeffs_to_values(psi)
    rho = values_to_coeffs(psi_nodes.real**2 + psi_nodes.imag**2)
    v = _v_pre(sym, u, udot, rho, tau)
    kicked = values_to_coeffs(np.exp(-1j * tau * coeffs_to_values(v)) * psi_nodes)
    u_new, udot_new = _wave_update(sym, u, udot, rho)
    return sym.free * kicked, u_new, udot_new, v


def lie_trotter_step(
    state: ZakharovState, cfg: StepperConfig, step_index: int | None = None
) -> ZakharovState:
    """Advance one step of size ``cfg.tau``."""
    cfl_check(state.grid, cfg)
    return _advance(state, cfg.tau, step_index)


def _advance(state: ZakharovState, tau: float, step_index: int | None) -> ZakharovState:
    grid = state.grid
    psi, u, udot, _ = _raw_step(grid, state.psi.coeffs, state.u.coeffs, state.udot.coeffs, tau)
    time = state.time + tau
    for arr in (psi, u, udot):
        if not np.isfinite(arr).all():
            raise NumericBlowupError(step_index if step_index is not None else -1, time)
    return ZakharovState(
        SpectralField(grid, psi), SpectralField(grid, u), SpectralField(grid, udot), time
    )


def iterate_splitting(state0: ZakharovState, cfg: StepperConfig) -> Iterator[ZakharovState]:
    """Yield states after steps 1, 2, ... (CFL checked once, up front)."""
    cfl_check(state0.grid, cfg)
    state = state0
    n = 0
    while True:
        n += 1
        state = _advance(state, cfg.tau, n)
        yield state


def integrate_splitting(state0: ZakharovState, cfg: StepperConfig, n_steps: int) -> ZakharovState:
    state = state0
    if n_steps <= 0:
        return state
    for n, state in enumerate(iterate_splitting(state0, cfg), start=1):
        if n == n_steps:
            break
    return state


def steps_to_reach(t_span: float, tau: float) -> int:
    """Number of steps of size tau covering t_span; tau must divide t_span."""
    n = round(t_span / tau)
    if n < 0 or not math.isclose(n * tau, t_span, rel_tol=1e-9, abs_tol=1e-14):
        raise ValueError(f"tau = {tau} does not divide the interval {t_span}")
    return n


# --- semi-discretization --------------------------------------------------


def semidiscrete_rhs(state: ZakharovState) -> ZakharovState:
    """Time derivative of (psi, u, udot) under the collocated system; ``time`` is unused."""
    grid = state.grid
    w2 = grid.omega_sq
    dpsi = -1j * (w2 * state.psi.coeffs + pointwise_product(state.u, state.psi).coeffs)
    dudot = -w2 * (state.u.coeffs + abs_squared(state.psi).coeffs)
    return ZakharovState(
        SpectralField(grid, dpsi), state.udot, SpectralField(grid, dudot), state.time
    )


# --- initial data ---------------------------------------------------------


def w_coefficients(grid: Grid, s_prime: float) -> np.ndarray:
    """Coefficients 2 / max(|j|,1)^{s'+0.51} of the test function w_{s'} on the grid's modes."""
    return 2.0 / grid.weight ** (s_prime + 0.51)


def make_initial_w(
    grid: Grid, s_psi: float = 5.0, s_u: float = 4.0, s_udot: float = 3.0, t0: float = 0.0
) -> ZakharovState:
    """State (w_{s_psi}, w_{s_u}, w_{s_udot}), series truncated to the grid's modes."""
    return ZakharovState(
        SpectralField(grid, w_coefficients(grid, s_psi)),
        SpectralField(grid, w_coefficients(grid, s_u)),
        SpectralField(grid, w_coefficients(grid, s_udot)),
        t0,
    )
