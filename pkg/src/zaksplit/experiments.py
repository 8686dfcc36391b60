"""
Experiment drivers: temporal convergence sweep, CFL scan and the
transformed-formulation audit, plus their CSV/JSON writers.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

import zaksplit
from zaksplit.errors import AuditFailure, CFLError, ConfigurationError, NumericBlowupError
from zaksplit.reference import (
    ReferenceConfig,
    default_tau_ref,
    integrate_reference,
    measure_errors,
)
from zaksplit.spectral import (
    Grid,
    SpectralField,
    dft_forward,
    evaluate_nodes,
    sobolev_norm,
    write_spectrum_csv,
)
from zaksplit.splitting import (
    DEFAULT_CFL_CONSTANT,
    StepperConfig,
    ZakharovState,
    cfl_check,
    integrate_splitting,
    iterate_splitting,
    make_initial_w,
    steps_to_reach,
    v_pre,
)
from zaksplit.transformed import (
    bootstrap,
    recover_psi_P,
    step_transformed,
    v_n_transformed,
    w_n_transformed,
)

log = logging.getLogger(__name__)

SCAN_TAUS = (9.5e-5, 9.7e-5, 9.5e-6, 9.7e-4)
SLOPE_TOLERANCE = 0.15
GROWTH_THRESHOLD = 10.0
BOUNDARY_BAND = 0.05
NORM_BOUND_FACTOR = 2.0


@dataclass(frozen=True)
class RunConfig:
    d: int = 1
    K: int = 2**7
    taus: tuple[float, ...] = ()
    t0: float = 0.0
    t_end: float = 0.5
    s: float = 1.0
    sigma: float = 2.0
    cfl_constant: float = DEFAULT_CFL_CONSTANT
    enforce_cfl: bool = False
    seed: int = 0
    output_dir: Path | None = None
    tau_ref: float | None = None
    data: str = "w"
    workers: int = 1

    def __post_init__(self):
        if not self.t_end > self.t0:
            raise ConfigurationError(f"t_end = {self.t_end} must exceed t0 = {self.t0}")
        if self.K < 1 or self.K & (self.K - 1):
            raise ConfigurationError(f"K must be a power of two, got {self.K}")
        if not self.s > self.d / 2:
            raise ConfigurationError(f"Sobolev exponent s = {self.s} must exceed d/2")
        if self.data not in ("w", "random"):
            raise ConfigurationError(f"unknown initial data {self.data!r}")
        if any(not t > 0 for t in self.taus):
            raise ConfigurationError("step sizes must be positive")

    @property
    def grid(self) -> Grid:
        return Grid(self.d, self.K)

    def stepper(self, tau: float, enforce: bool | None = None) -> StepperConfig:
        return StepperConfig(
            tau, self.cfl_constant, self.enforce_cfl if enforce is None else enforce
        )

    def to_json(self) -> dict:
        out = dataclasses.asdict(self)
        out["taus"] = list(self.taus)
        out["output_dir"] = None if self.output_dir is None else str(self.output_dir)
        return out


def initial_state(cfg: RunConfig) -> ZakharovState:
    grid = cfg.grid
    if cfg.data == "w":
        return make_initial_w(grid, 5.0, 4.0, 3.0, t0=cfg.t0)
    return random_state(grid, np.random.default_rng(cfg.seed), t0=cfg.t0)


def random_state(
    grid: Grid, rng: np.random.Generator, amplitude: float = 1.0, decay: float = 4.0, t0=0.0
) -> ZakharovState:
    """Random data, real at the nodes for u and udot, coefficients decaying like |j|^-decay."""
    scale = amplitude * grid.weight ** (-decay)

    def sample(real_nodes: bool):
        c = scale * (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))
        f = SpectralField(grid, c)
        if real_nodes:
            f = dft_forward(evaluate_nodes(f).real, grid)
        return f

    return ZakharovState(sample(False), sample(True), sample(True), t0)


# --- convergence ----------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceRecord:
    tau: float
    K: int
    e_psi: float
    e_u: float
    e_udot: float
    wall_time: float


@dataclass
class ConvergenceResult:
    records: list[ConvergenceRecord]
    slopes: dict[str, float]
    tau_ref: float
    reference_wall_time: float


def default_tau_grid(
    grid: Grid, t_span: float, c: float = DEFAULT_CFL_CONSTANT, count: int = 12, decades=1.5
) -> tuple[float, ...]:
    """Geometric step sizes below the CFL limit, each dividing ``t_span`` exactly."""
    tau_max = 0.95 * c / (grid.d * grid.K**2)
    n_min = math.ceil(t_span / tau_max)
    ns = np.unique(np.round(np.geomspace(n_min, n_min * 10**decades, count)).astype(int))
    return tuple(t_span / n for n in ns)


def fit_slope(taus, errors) -> float:
    """Least-squares slope of log(error) against log(tau); NaN with fewer than two step sizes."""
    if len(set(taus)) < 2:
        return math.nan
    return float(np.polyfit(np.log(taus), np.log(errors), 1)[0])


def _convergence_run(args):
    state0, stepper, n_steps, ref, s = args
    start = time.perf_counter()
    final = integrate_splitting(state0, stepper, n_steps)
    # the final time equals t_end up to summation round-off
    final = dataclasses.replace(final, time=ref.time)
    errs = measure_errors(final, ref, s)
    return errs, time.perf_counter() - start


def _map(fn, items, workers: int):
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def run_convergence(cfg: RunConfig) -> ConvergenceResult:
    grid = cfg.grid
    span = cfg.t_end - cfg.t0
    taus = cfg.taus or default_tau_grid(grid, span, cfg.cfl_constant)
    steps = []
    for tau in taus:
        stepper = cfg.stepper(tau, enforce=True)
        try:
            cfl_check(grid, stepper)
        except CFLError as exc:
            raise ConfigurationError(f"convergence runs require CFL: tau = {tau}: {exc}") from exc
        try:
            steps.append(steps_to_reach(span, tau))
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc

    state0 = initial_state(cfg)
    tau_ref = cfg.tau_ref or default_tau_ref(min(taus))
    log.info("reference: RK4 with tau_ref = %.3g over [%g, %g]", tau_ref, cfg.t0, cfg.t_end)
    start = time.perf_counter()
    ref = integrate_reference(state0, ReferenceConfig(tau_ref, cfg.t_end))
    ref_time = time.perf_counter() - start

    jobs = [(state0, cfg.stepper(tau, True), n, ref, cfg.s) for tau, n in zip(taus, steps)]
    records = []
    for tau, (errs, wall) in zip(taus, _map(_convergence_run, jobs, cfg.workers)):
        records.append(ConvergenceRecord(tau, cfg.K, *errs, wall))
        log.info("tau = %.4g: e_psi = %.3e, e_u = %.3e, e_udot = %.3e", tau, *errs)

    t = [r.tau for r in records]
    slopes = {
        name: fit_slope(t, [getattr(r, name) for r in records])
        for name in ("e_psi", "e_u", "e_udot")
    }
    return ConvergenceResult(records, slopes, tau_ref, ref_time)


# --- CFL scan -------------------------------------------------------------


@dataclass
class ScanRun:
    tau: float
    cfl_ratio: float
    cfl_satisfied: bool
    norm_exponents: tuple[float, float, float]
    times: np.ndarray
    norms: np.ndarray  # shape (n_records, 3): psi, u, udot
    initial_psi: SpectralField
    final_psi: SpectralField
    final_time: float
    blowup_step: int | None = None

    def amplitude_ratio(self, baseline: ScanRun | None = None) -> np.ndarray:
        """|psi_j(final)| / |psi_j(0)| mode-wise, or over ``baseline``'s final |psi_j|."""
        ref = self.initial_psi if baseline is None else baseline.final_psi
        a0 = np.abs(ref.coeffs)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.abs(self.final_psi.coeffs) / a0

    def norm_growth(self) -> np.ndarray:
        """Final norms divided by the initial norms."""
        return self.norms[-1] / self.norms[0]


def simulate(state0: ZakharovState, stepper: StepperConfig, n_steps: int, exponents) -> ScanRun:
    """Run the splitting, tracing three Sobolev norms; a blow-up truncates the trace."""
    grid = state0.grid
    status = cfl_check(grid, stepper, warn=False)

    def norms(st):
        return [sobolev_norm(f, e) for f, e in zip((st.psi, st.u, st.udot), exponents)]

    times, rows = [state0.time], [norms(state0)]
    last, blowup = state0, None
    if n_steps > 0:
        try:
            for n, st in enumerate(iterate_splitting(state0, stepper), start=1):
                last = st
                times.append(st.time)
                rows.append(norms(st))
                if n >= n_steps:
                    break
        except NumericBlowupError as exc:
            blowup = exc.step
            log.warning("tau = %g: blow-up at step %d", stepper.tau, exc.step)
    return ScanRun(
        tau=stepper.tau,
        cfl_ratio=status.ratio,
        cfl_satisfied=status.satisfied,
        norm_exponents=tuple(exponents),
        times=np.array(times),
        norms=np.array(rows),
        initial_psi=state0.psi,
        final_psi=last.psi,
        final_time=last.time,
        blowup_step=blowup,
    )


def _scan_job(args):
    state0, stepper, n_steps, exponents = args
    return simulate(state0, stepper, n_steps, exponents)


def run_cfl_scan(cfg: RunConfig) -> list[ScanRun]:
    """Integrate each tau to about t_end with warn-only CFL, tracing H^{s+sigma+2,+1,+0} norms."""
    taus = cfg.taus or SCAN_TAUS
    state0 = initial_state(cfg)
    r = cfg.s + cfg.sigma
    exponents = (r + 2, r + 1, r)
    jobs = []
    for tau in taus:
        stepper = cfg.stepper(tau)
        if not cfl_check(cfg.grid, stepper, warn=False).satisfied:
            log.warning("tau = %g violates the CFL condition; running anyway", tau)
        jobs.append((state0, stepper, round((cfg.t_end - cfg.t0) / tau), exponents))
    return _map(_scan_job, jobs, cfg.workers)


def unstable_modes(grid: Grid, tau: float) -> np.ndarray:
    """Boolean mask of modes with tau*|j|^2 > 2*pi."""
    return tau * grid.omega_sq > 2 * math.pi


def growth_confined(
    run: ScanRun, grid: Grid, threshold=GROWTH_THRESHOLD, band=BOUNDARY_BAND, baseline=None
):
    """Whether every mode grown by ``threshold`` lies in the unstable set, widened by band*K in |j|.

    Growth is measured from the initial spectrum, or against ``baseline``, a
    resolved run to the same time, which factors out the physical dynamics.
    """
    grown = run.amplitude_ratio(baseline) >= threshold
    cutoff = math.sqrt(2 * math.pi / run.tau) - band * grid.K
    allowed = grid.omega > cutoff
    return bool(np.all(allowed[grown])), grown


# --- equivalence audit ----------------------------------------------------


@dataclass
class AuditReport:
    n_steps: int
    tolerance: float
    rows: list[dict] = field(default_factory=list)
    first_failure: int | None = None

    @property
    def max_deviation(self) -> dict[str, float]:
        keys = [k for k in (self.rows[0] if self.rows else {}) if k != "n"]
        return {k: max(r[k] for r in self.rows) for k in keys}

    @property
    def passed(self) -> bool:
        return self.first_failure is None


def _rel(a: SpectralField, b: SpectralField) -> float:
    num = sobolev_norm(a - b, 0)
    if num == 0.0:
        return 0.0
    return num / max(sobolev_norm(b, 0), np.finfo(float).tiny)


def run_equivalence_audit(
    cfg: RunConfig,
    n_steps: int = 100,
    tolerance: float = 1e-8,
    perturb_step: int | None = None,
    perturb_size: float = 1e-6,
    state0: ZakharovState | None = None,
) -> AuditReport:
    """Step the splitting and its transformed form side by side and compare them every step.

    ``perturb_step`` adds ``perturb_size`` to one phi coefficient at that step
    (fault injection); the audit must then fail there. Raises
    :class:`AuditFailure`, carrying the report, on the first deviation above
    ``tolerance``.
    """
    tau = cfg.taus[0] if cfg.taus else 0.9 * cfg.cfl_constant / (cfg.d * cfg.K**2)
    stepper = cfg.stepper(tau, enforce=True)
    try:
        cfl_check(cfg.grid, stepper)
    except CFLError as exc:
        raise ConfigurationError(f"the audit requires the CFL condition: {exc}") from exc
    state = initial_state(cfg) if state0 is None else state0

    report = AuditReport(n_steps, tolerance)
    v_next = v_pre(state, tau)  # v_1, used by the step 0 -> 1
    ts = bootstrap(state, stepper)
    orig = integrate_splitting(state, stepper, 1)
    for n in range(1, n_steps + 1):
        if perturb_step == n:
            bumped = ts.phi.coeffs.copy()
            bumped[(cfg.K,) * cfg.d] += perturb_size
            ts = dataclasses.replace(ts, phi=SpectralField(ts.grid, bumped))
        v_n = v_next
        v_next = v_pre(orig, tau)
        row = {
            "n": n,
            "psi_I": _rel(ts.psi_I, orig.psi),
            "psi_P": _rel(recover_psi_P(ts, tau), orig.psi),
            "u": _rel(ts.u, orig.u),
            "udot": _rel(ts.udot, orig.udot),
            "v": _rel(v_n_transformed(ts, tau), v_n),
            "w": _rel(w_n_transformed(ts, tau), (v_next - v_n) / tau),
        }
        report.rows.append(row)
        worst = max(v for k, v in row.items() if k != "n")
        if worst > tolerance and report.first_failure is None:
            report.first_failure = n
            err = AuditFailure(n, worst, tolerance)
            err.report = report
            raise err
        if n == n_steps:
            break
        ts = step_transformed(ts, stepper)
        orig = integrate_splitting(orig, stepper, 1)
    return report


# --- output ---------------------------------------------------------------

CONVERGENCE_HEADER = ["tau", "K", "e_psi", "e_u", "e_udot", "wall_time_s"]
NORMS_HEADER = ["t", "n_psi", "n_u", "n_udot"]


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def _write_rows(path: Path, header, rows) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(x) for x in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def write_convergence_csv(records, path) -> Path:
    return _write_rows(
        path,
        CONVERGENCE_HEADER,
        ([r.tau, r.K, r.e_psi, r.e_u, r.e_udot, r.wall_time] for r in records),
    )


def write_norms_csv(run: ScanRun, path) -> Path:
    return _write_rows(path, NORMS_HEADER, ([t, *n] for t, n in zip(run.times, run.norms)))


def write_audit_csv(report: AuditReport, path) -> Path:
    keys = list(report.rows[0]) if report.rows else ["n"]
    return _write_rows(path, keys, ([r[k] for k in keys] for r in report.rows))


def tau_tag(tau: float) -> str:
    return f"{tau:g}"


def emit_run_metadata(cfg: RunConfig, path, tau: float | None = None, **extra) -> Path:
    """JSON with the full config, CFL ratio/status for ``tau``, seed and package version."""
    tau = tau if tau is not None else (min(cfg.taus) if cfg.taus else None)
    meta = {"config": cfg.to_json()}
    if tau is not None:
        status = cfl_check(cfg.grid, cfg.stepper(tau, enforce=False), warn=False)
        meta["cfl_ratio"] = status.ratio
        meta["cfl_satisfied"] = bool(status.satisfied)
    else:
        meta["cfl_ratio"] = None
        meta["cfl_satisfied"] = None
    meta["seed"] = cfg.seed
    meta["version"] = zaksplit.__version__
    meta.update(extra)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(meta, indent=2, sort_keys=False, default=_json_default) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write metadata to {path}: {exc}") from exc
    return path


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_scan_outputs(cfg: RunConfig, runs: list[ScanRun], out: Path) -> list[Path]:
    paths = []
    for run in runs:
        tag = tau_tag(run.tau)
        paths.append(write_spectrum_csv(run.final_psi, out / f"spectrum_tau{tag}.csv"))
        paths.append(write_norms_csv(run, out / f"norms_tau{tag}.csv"))
        paths.append(
            emit_run_metadata(
                cfg,
                out / f"metadata_tau{tag}.json",
                tau=run.tau,
                norm_exponents=list(run.norm_exponents),
                final_time=run.final_time,
                blowup_step=run.blowup_step,
                growth_threshold=GROWTH_THRESHOLD,
                boundary_band=BOUNDARY_BAND,
                cfl_enforced=cfg.enforce_cfl,
            )
        )
    return paths
