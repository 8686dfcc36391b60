"""
The splitting rewritten in the discrete time-derivative variable

    phi_{n+1} = (psi_{n+1} - psi_n) / tau,

with psi recovered either by summation (psi_I) or through the discrete
resolvent (Omega^2 phi(i tau Omega^2) + 1)^{-1} (psi_P). This is a
verification view of the scheme: in exact arithmetic psi_I = psi_P = psi_n
of the original recursion, and the tests and the audit check exactly that.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from zaksplit.errors import CFLError, GridMismatchError, NumericBlowupError, SingularRecoveryError
from zaksplit.spectral import (
    Grid,
    OmegaSymbol,
    SpectralField,
    abs_squared,
    coeffs_to_values,
    phi_complex,
    values_to_coeffs,
)
from zaksplit.splitting import (
    StepperConfig,
    ZakharovState,
    _v_post,
    _wave_update,
    cfl_check,
    lie_trotter_step,
    wave_symbols,
)

# Relative size (in units of tau) below which the resolvent denominator counts as singular.
SINGULAR_THRESHOLD = 1e-12


@dataclass(frozen=True)
class TransformedState:
    phi: SpectralField
    u: SpectralField
    udot: SpectralField
    psi_I: SpectralField
    psi_I_prev: SpectralField
    n: int
    time: float

    def __post_init__(self):
        g = self.phi.grid
        if any(f.grid != g for f in (self.u, self.udot, self.psi_I, self.psi_I_prev)):
            raise GridMismatchError("all transformed fields must share one grid")
        if self.n < 1:
            raise ValueError("the two-term recursion starts at n = 1")

    @property
    def grid(self) -> Grid:
        return self.phi.grid

    def as_state(self) -> ZakharovState:
        """Original variables (psi_I, u, udot) at the same time level."""
        return ZakharovState(self.psi_I, self.u, self.udot, self.time)


def resolvent_denominator(omega_sq: np.ndarray, tau: float) -> np.ndarray:
    """e^{i tau |j|^2} - 1 + i tau, so that the resolvent multiplier is i tau / denominator."""
    return np.expm1(1j * tau * omega_sq) + 1j * tau


def resolvent_symbol(tau: float) -> OmegaSymbol:
    """(Omega^2 phi(i tau Omega^2) + 1)^{-1} as a mode-wise multiplier."""
    return OmegaSymbol(
        lambda w: 1j * tau / resolvent_denominator(w * w, tau),
        f"(Omega^2 phi(i*{tau}*Omega^2) + 1)^-1",
    )


def bootstrap(state0: ZakharovState, cfg: StepperConfig) -> TransformedState:
    """Starting values at n = 1 from one step of the original splitting."""
    state1 = lie_trotter_step(state0, cfg, step_index=1)
    phi1 = (state1.psi - state0.psi) / cfg.tau
    return TransformedState(
        phi=phi1,
        u=state1.u,
        udot=state1.udot,
        psi_I=state0.psi + cfg.tau * phi1,
        psi_I_prev=state0.psi,
        n=1,
        time=state1.time,
    )


def _v_n(ts: TransformedState, tau: float) -> np.ndarray:
    sym = wave_symbols(ts.grid, tau)
    rho = abs_squared(ts.psi_I_prev).coeffs
    return _v_post(sym, ts.u.coeffs, ts.udot.coeffs, rho, tau)


def _w_n(ts: TransformedState, tau: float) -> np.ndarray:
    sym = wave_symbols(ts.grid, tau)
    psi_sum = coeffs_to_values(ts.psi_I.coeffs) + coeffs_to_values(ts.psi_I_prev.coeffs)
    phi_vals = coeffs_to_values(ts.phi.coeffs)
    source = values_to_coeffs((psi_sum * np.conj(phi_vals)).real)
    return sym.sinc_half_sq * ts.udot.coeffs + (sym.sinc_full - 1.0) * source


def v_n_transformed(ts: TransformedState, tau: float) -> SpectralField:
    return SpectralField(ts.grid, _v_n(ts, tau))


def w_n_transformed(ts: TransformedState, tau: float) -> SpectralField:
    """Discrete derivative (v_{n+1} - v_n)/tau expressed through phi_n and the psi_I history."""
    return SpectralField(ts.grid, _w_n(ts, tau))


def _recover(ts: TransformedState, tau: float, v: np.ndarray) -> np.ndarray:
    grid = ts.grid
    denom = resolvent_denominator(grid.omega_sq, tau)
    tiny = np.abs(denom) < SINGULAR_THRESHOLD * tau
    if tiny.any():
        mode = grid.mode_of(np.argwhere(tiny)[0])
        raise SingularRecoveryError(f"resolvent singular at mode {mode} for tau = {tau}", mode=mode)
    v_vals = coeffs_to_values(v)
    rotated = coeffs_to_values(np.exp(1j * tau * grid.omega_sq) * ts.psi_I.coeffs)
    nodes = (
        1j * coeffs_to_values(ts.phi.coeffs)
        + coeffs_to_values(ts.psi_I.coeffs)
        - v_vals * phi_complex(1j * tau * v_vals) * rotated
    )
    return (1j * tau / denom) * values_to_coeffs(nodes)


def recover_psi_P(ts: TransformedState, tau: float) -> SpectralField:
    """psi reconstructed through the discrete resolvent; gains two derivatives over phi under CFL."""
    return SpectralField(ts.grid, _recover(ts, tau, _v_n(ts, tau)))


def step_transformed(ts: TransformedState, cfg: StepperConfig) -> TransformedState:
    """Advance the two-term recursion from n to n + 1. Always requires the CFL condition."""
    status = cfl_check(ts.grid, cfg, warn=False)
    if not status.satisfied:
        raise CFLError(status.ratio, cfg.cfl_constant)
    grid, tau = ts.grid, cfg.tau
    sym = wave_symbols(grid, tau)

    v = _v_n(ts, tau)
    w = _w_n(ts, tau)
    psi_P = _recover(ts, tau, v)

    v_vals = coeffs_to_values(v)
    w_vals = coeffs_to_values(w)
    inner = coeffs_to_values(ts.phi.coeffs) - 1j * tau * w_vals * phi_complex(
        -1j * tau * tau * w_vals
    ) * coeffs_to_values(ts.psi_I.coeffs)
    phi_new = sym.free * values_to_coeffs(np.exp(-1j * tau * v_vals) * inner)

    psi_P_nodes = coeffs_to_values(psi_P)
    rho = values_to_coeffs(psi_P_nodes.real**2 + psi_P_nodes.imag**2)
    u_new, udot_new = _wave_update(sym, ts.u.coeffs, ts.udot.coeffs, rho)
    psi_I_new = ts.psi_I.coeffs + tau * phi_new

    time = ts.time + tau
    for arr in (phi_new, u_new, udot_new):
        if not np.isfinite(arr).all():
            raise NumericBlowupError(ts.n + 1, time)
    return TransformedState(
        phi=SpectralField(grid, phi_new),
        u=SpectralField(grid, u_new),
        udot=SpectralField(grid, udot_new),
        psi_I=SpectralField(grid, psi_I_new),
        psi_I_prev=ts.psi_I,
        n=ts.n + 1,
        time=time,
    )
