"""Classical RK4 for the collocated Zakharov system, used as the temporal reference."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from zaksplit.errors import ConfigurationError, GridMismatchError, NumericBlowupError
from zaksplit.spectral import Grid, SpectralField, coeffs_to_values, sobolev_norm, values_to_coeffs
from zaksplit.splitting import ZakharovState

# |h * lambda| bound on the imaginary axis for classical RK4 is 2*sqrt(2) ~ 2.83.
RK4_STABILITY_LIMIT = 2.8


@dataclass(frozen=True)
class ReferenceConfig:
    tau_ref: float
    t_end: float
    check_stability: bool = True

    def __post_init__(self):
        if not self.tau_ref > 0:
            raise ConfigurationError(f"tau_ref must be positive, got {self.tau_ref}")


def default_tau_ref(tau_min: float) -> float:
    return min(1e-7, tau_min / 100.0)


def stiffness_ratio(grid: Grid, h: float) -> float:
    """h * max |j|^2, the largest |h*lambda| of the linear part."""
    return h * grid.d * grid.K**2


def _rhs(w2: np.ndarray, psi, u, udot):
    # psi and u go through one batched transform each way
    d = psi.ndim
    vals = coeffs_to_values(np.stack((psi, u)), d)
    psi_vals, u_vals = vals[0], vals[1]
    nonlin, rho = values_to_coeffs(
        np.stack((u_vals * psi_vals, psi_vals.real**2 + psi_vals.imag**2)), d
    )
    return -1j * (w2 * psi + nonlin), udot, -w2 * (u + rho)


def _rk4(w2, psi, u, udot, h):
    k1 = _rhs(w2, psi, u, udot)
    k2 = _rhs(w2, psi + 0.5 * h * k1[0], u + 0.5 * h * k1[1], udot + 0.5 * h * k1[2])
    k3 = _rhs(w2, psi + 0.5 * h * k2[0], u + 0.5 * h * k2[1], udot + 0.5 * h * k2[2])
    k4 = _rhs(w2, psi + h * k3[0], u + h * k3[1], udot + h * k3[2])
    h6 = h / 6.0
    return (
        psi + h6 * (k1[0] + 2.0 * (k2[0] + k3[0]) + k4[0]),
        u + h6 * (k1[1] + 2.0 * (k2[1] + k3[1]) + k4[1]),
        udot + h6 * (k1[2] + 2.0 * (k2[2] + k3[2]) + k4[2]),
    )


def rk4_step(state: ZakharovState, h: float) -> ZakharovState:
    grid = state.grid
    psi, u, udot = _rk4(grid.omega_sq, state.psi.coeffs, state.u.coeffs, state.udot.coeffs, h)
    time = state.time + h
    if not all(np.isfinite(a).all() for a in (psi, u, udot)):
        raise NumericBlowupError(1, time)
    return ZakharovState(
        SpectralField(grid, psi), SpectralField(grid, u), SpectralField(grid, udot), time
    )


def integrate_reference(state0: ZakharovState, cfg: ReferenceConfig) -> ZakharovState:
    """RK4 from state0.time to cfg.t_end with steps tau_ref and a shortened final step."""
    span = cfg.t_end - state0.time
    if span < 0:
        raise ConfigurationError(f"t_end = {cfg.t_end} lies before t0 = {state0.time}")
    if span == 0:
        return state0
    grid = state0.grid
    if cfg.check_stability and stiffness_ratio(grid, cfg.tau_ref) > RK4_STABILITY_LIMIT:
        raise ConfigurationError(
            f"tau_ref * d * K^2 = {stiffness_ratio(grid, cfg.tau_ref):.3g} exceeds the RK4 "
            f"stability bound {RK4_STABILITY_LIMIT}"
        )
    n_full = math.floor(span / cfg.tau_ref * (1 + 1e-12))
    rest = span - n_full * cfg.tau_ref
    if rest < 1e-12 * cfg.tau_ref:
        rest = 0.0
    w2 = grid.omega_sq
    y = (state0.psi.coeffs, state0.u.coeffs, state0.udot.coeffs)
    # finiteness is checked every 64 steps; an overflow only grows from there
    for n in range(1, n_full + 1):
        y = _rk4(w2, *y, cfg.tau_ref)
        if n % 64 == 0 or n == n_full:
            if not np.isfinite(y[0]).all() or not np.isfinite(y[1]).all():
                raise NumericBlowupError(n, state0.time + n * cfg.tau_ref)
    if rest > 0:
        y = _rk4(w2, *y, rest)
    if not all(np.isfinite(a).all() for a in y):
        raise NumericBlowupError(n_full + 1, cfg.t_end)
    return ZakharovState(*(SpectralField(grid, a) for a in y), time=cfg.t_end)


class ErrorTriple(NamedTuple):
    e_psi: float
    e_u: float
    e_udot: float


def measure_errors(
    splitting_final: ZakharovState, reference_final: ZakharovState, s: float
) -> ErrorTriple:
    """Errors in H^{s+2} (psi), H^{s+1} (u) and H^s (udot)."""
    if splitting_final.grid != reference_final.grid:
        raise GridMismatchError("states live on different grids")
    if not math.isclose(splitting_final.time, reference_final.time, rel_tol=1e-9, abs_tol=1e-12):
        raise ConfigurationError(
            f"time mismatch: {splitting_final.time} vs {reference_final.time}"
        )
    return ErrorTriple(
        sobolev_norm(splitting_final.psi - reference_final.psi, s + 2),
        sobolev_norm(splitting_final.u - reference_final.u, s + 1),
        sobolev_norm(splitting_final.udot - reference_final.udot, s),
    )
