"""Command-line entry point: ``zaksplit {converge,cfl-scan,audit,simulate,spectrum}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from zaksplit import experiments as ex
from zaksplit.errors import AuditFailure, ConfigurationError, ZakharovError
from zaksplit.spectral import write_spectrum_csv
from zaksplit.splitting import DEFAULT_CFL_CONSTANT, integrate_splitting, steps_to_reach

log = logging.getLogger("zaksplit")

# per-subcommand defaults: (K, t_end); --smoke swaps in the second pair
DEFAULTS = {
    "converge": ((2**7, 0.5), (2**5, 0.5)),
    "cfl-scan": ((2**8, 0.15), (2**5, 0.05)),
    "audit": ((2**5, 0.5), (2**5, 0.5)),
    "simulate": ((2**7, 0.5), (2**5, 0.1)),
    "spectrum": ((2**7, 0.0), (2**5, 0.0)),
}


def _common(p: argparse.ArgumentParser):
    p.add_argument("--dim", type=int, default=1, help="space dimension d (default 1)")
    p.add_argument("--modes", type=int, default=None, help="degree K, a power of two")
    p.add_argument("--tau", type=float, action="append", default=None,
                   help="time step; repeat for several")
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t-end", type=float, default=None)
    p.add_argument("--s", type=float, default=1.0, help="Sobolev exponent s (default 1)")
    p.add_argument("--sigma", type=float, default=2.0, help="regularity offset sigma (default 2)")
    p.add_argument("--cfl-c", type=float, default=DEFAULT_CFL_CONSTANT,
                   help="CFL constant c < 2*pi (default: just below 2*pi)")
    p.add_argument("--enforce-cfl", action="store_true",
                   help="fail instead of warning when d*tau*K^2 > c")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data", choices=("w", "random"), default="w",
                   help="initial data: w_5, w_4, w_3 series or seeded random data")
    p.add_argument("--smoke", action="store_true", help="small K and short runs, for CI")
    p.add_argument("--workers", type=int, default=1, help="parallel processes for sweeps")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zaksplit",
        description="Lie-Trotter/Fourier collocation experiments for the Zakharov system.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("converge", help="temporal convergence sweep against an RK4 reference")
    _common(p)
    p.add_argument("--tau-ref", type=float, default=None, help="RK4 reference step")

    p = sub.add_parser("cfl-scan", help="spectra and norm traces for several step sizes")
    _common(p)

    p = sub.add_parser("audit", help="compare the splitting with its transformed recursion")
    _common(p)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--tolerance", type=float, default=1e-8)
    p.add_argument("--perturb-step", type=int, default=None,
                   help="fault injection: bump one phi coefficient at this step")

    p = sub.add_parser("simulate", help="one run with a norm trace and the final spectrum")
    _common(p)

    p = sub.add_parser("spectrum", help="dump the spectra of psi, u, udot at t_end")
    _common(p)
    return parser


def make_config(args) -> ex.RunConfig:
    full, smoke = DEFAULTS[args.command]
    K, t_end = smoke if args.smoke else full
    t_end = args.t_end if args.t_end is not None else args.t0 + t_end
    if args.command == "spectrum" and t_end <= args.t0:
        t_end = args.t0 + 1.0  # RunConfig wants t_end > t0; the spectrum command ignores it
    return ex.RunConfig(
        d=args.dim,
        K=args.modes or K,
        taus=tuple(args.tau or ()),
        t0=args.t0,
        t_end=t_end,
        s=args.s,
        sigma=args.sigma,
        cfl_constant=args.cfl_c,
        enforce_cfl=args.enforce_cfl,
        seed=args.seed,
        output_dir=args.out,
        tau_ref=getattr(args, "tau_ref", None),
        data=args.data,
        workers=args.workers,
    )


def cmd_converge(cfg: ex.RunConfig, args) -> int:
    result = ex.run_convergence(cfg)
    out = cfg.output_dir
    ex.write_convergence_csv(result.records, out / "convergence.csv")
    ex.emit_run_metadata(
        cfg,
        out / "metadata.json",
        tau=min(r.tau for r in result.records),
        tau_grid=[r.tau for r in result.records],
        tau_ref=result.tau_ref,
        slopes=result.slopes,
        slope_tolerance=ex.SLOPE_TOLERANCE,
        cfl_enforced=True,
    )
    for name, slope in result.slopes.items():
        ok = abs(slope - 1.0) <= ex.SLOPE_TOLERANCE
        print(f"{name:7s} slope {slope:6.3f}  {'ok' if ok else 'OUTSIDE'} [0.85, 1.15]")
    return 0


def cmd_cfl_scan(cfg: ex.RunConfig, args) -> int:
    runs = ex.run_cfl_scan(cfg)
    ex.write_scan_outputs(cfg, runs, cfg.output_dir)
    grid = cfg.grid
    for run in runs:
        growth = run.norm_growth()
        confined, grown = ex.growth_confined(run, grid)
        print(
            f"tau={run.tau:<9g} ratio={run.cfl_ratio:7.4f} cfl={'ok ' if run.cfl_satisfied else 'NO '}"
            f" t={run.final_time:.4f} norm growth={growth[0]:.3g},{growth[1]:.3g},{growth[2]:.3g}"
            f" modes>=10x={int(grown.sum())} confined={confined}"
            + (f" blow-up at step {run.blowup_step}" if run.blowup_step else "")
        )
    return 0


def cmd_audit(cfg: ex.RunConfig, args) -> int:
    out = cfg.output_dir
    try:
        report = ex.run_equivalence_audit(
            cfg, n_steps=args.steps, tolerance=args.tolerance, perturb_step=args.perturb_step
        )
        status = 0
    except AuditFailure as exc:
        report = exc.report
        print(f"audit FAILED: {exc}", file=sys.stderr)
        status = 1
    ex.write_audit_csv(report, out / "audit.csv")
    tau = cfg.taus[0] if cfg.taus else 0.9 * cfg.cfl_constant / (cfg.d * cfg.K**2)
    ex.emit_run_metadata(
        cfg, out / "metadata.json", tau=tau, max_deviation=report.max_deviation,
        tolerance=report.tolerance, first_failure=report.first_failure,
    )
    for key, dev in report.max_deviation.items():
        print(f"{key:6s} max relative deviation {dev:.3e}")
    return status


def cmd_simulate(cfg: ex.RunConfig, args) -> int:
    if len(cfg.taus) != 1:
        raise ConfigurationError("simulate needs exactly one --tau")
    tau = cfg.taus[0]
    r = cfg.s + cfg.sigma
    run = ex.simulate(
        ex.initial_state(cfg), cfg.stepper(tau), round((cfg.t_end - cfg.t0) / tau),
        (r + 2, r + 1, r),
    )
    ex.write_scan_outputs(cfg, [run], cfg.output_dir)
    print(f"t={run.final_time:.6g} norms={run.norms[-1].tolist()}"
          + (f" blow-up at step {run.blowup_step}" if run.blowup_step else ""))
    return 0


def cmd_spectrum(cfg: ex.RunConfig, args) -> int:
    state = ex.initial_state(cfg)
    if args.t_end is not None and args.t_end > cfg.t0:
        if len(cfg.taus) != 1:
            raise ConfigurationError("advancing to --t-end needs exactly one --tau")
        tau = cfg.taus[0]
        state = integrate_splitting(state, cfg.stepper(tau), steps_to_reach(args.t_end - cfg.t0, tau))
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    for name in ("psi", "u", "udot"):
        write_spectrum_csv(getattr(state, name), out / f"spectrum_{name}.csv")
    ex.emit_run_metadata(cfg, out / "metadata.json", time=state.time)
    print(f"spectra at t={state.time:.6g} written to {out}")
    return 0


COMMANDS = {
    "converge": cmd_converge,
    "cfl-scan": cmd_cfl_scan,
    "audit": cmd_audit,
    "simulate": cmd_simulate,
    "spectrum": cmd_spectrum,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = make_config(args)
        return COMMANDS[args.command](cfg, args)
    except ZakharovError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
