"""Command-line front end.

::

    demon-fridge steady|ft-check|sweep|trajectories --config FILE [--set key=value ...] --out PATH

Exit codes: 0 success, 2 domain or configuration error, 3 verification
failure.  JSON reports use Python's shortest round-trip float repr; CSV
floats use 17 significant digits.  The default worker count for ensemble
sampling is read from ``DEMON_FRIDGE_WORKERS``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, fock, oracle
from .config import ConfigError, ExperimentConfig, load_config
from .dynamics import (apply_channel, apply_liouvillian, backward_kraus, dual_kraus, entropy,
                       kraus_step, liouvillian, numeric_steady_state, steady_state,
                       trace_distance)
from .reservoir import derive, mu
from .trajectory import sample_ensemble

__all__ = ["main", "cmd_steady", "cmd_ft_check", "cmd_sweep", "cmd_trajectories",
           "TRAJECTORY_COLUMNS", "SWEEP_COLUMNS", "VerificationFailure"]

EXIT_OK, EXIT_DOMAIN, EXIT_VERIFY = 0, 2, 3

TRAJECTORY_COLUMNS = ("index", "n", "m", "n_left", "n_right",
                      "s_sys", "s_env", "s_tot", "s_na", "s_ad")
SWEEP_COLUMNS = ("parameter", "mu_star", "delta_S_sq", "delta_E_sq", "delta_A_M",
                 "e_max_star", "landauer_lhs", "landauer_rhs", "domain_valid")
SWEEP_PRESETS = {
    "a": ("r2", {"r1": 0.0}),
    "b": ("r1", {"r2": 0.5}),
}
FT_TOL = {"thermal": 1e-10, "squeezed": 1e-8}
FT_DEFAULT_INITIAL = "gibbs:1.0"


class VerificationFailure(RuntimeError):
    """A verification command ran to completion but a check failed."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


def fmt(x) -> str:
    """CSV cell: integers verbatim, floats to 17 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join("" if v is None else fmt(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# -- steady -------------------------------------------------------------------

def cmd_steady(cfg: ExperimentConfig) -> dict:
    """Stationary state of the configured mode with truncation diagnostics."""
    spec, space = cfg.reservoir(), cfg.space
    bath = derive(spec, cfg.mode, cfg.linear_sinh_moments)
    ss = steady_state(spec, space, cfg.mode, bath=bath)
    rho = ss.rho
    n_op = fock.number_operator(space)
    numeric = numeric_steady_state(liouvillian(spec, space, cfg.mode, sparse=True, bath=bath),
                                   space.dim)
    offdiag = rho - np.diag(np.diag(rho))
    truncation = {
        "top_population_frame": float(ss.populations[-1]),
        "top_population_fock": float(rho[-1, -1].real),
        "adequate_n_max": fock.adequate_n_max(1.0 / np.expm1(bath.mu_eff), bath.r),
    }
    if cfg.mode == "squeezed":
        truncation.update(fock.squeeze_quality(space, bath.r, bath.theta))
    return {
        "mode": cfg.mode,
        "mu": mu(spec),
        "mu_eff": bath.mu_eff,
        "r": bath.r,
        "theta": bath.theta,
        "gamma_left": bath.gamma_left,
        "gamma_right": bath.gamma_right,
        "Z": ss.Z,
        "mean_number": float(np.trace(n_op @ rho).real),
        "mean_number_frame": ss.mean_number,
        "entropy": entropy(rho),
        "entropy_analytic": ss.analytic_entropy(),
        "fixed_point_residual": float(np.abs(apply_liouvillian(rho, spec, cfg.mode, bath=bath)).max()),
        "numeric_trace_distance": trace_distance(rho, numeric),
        "max_offdiagonal": float(np.abs(offdiag).max()),
        "n_max": space.n_max,
        "truncation": truncation,
    }


# -- ft-check -----------------------------------------------------------------

def _faulty_tables(kraus):
    """Ledger tables with the left-jump entropy halved (negative control)."""
    sigma = dict(kraus.sigma_table)
    sigma["left"] = 0.5 * sigma["left"]
    return sigma, dict(kraus.phi_table)


def cmd_ft_check(cfg: ExperimentConfig, inject_fault: bool = False) -> dict:
    """Exact enumeration of the fluctuation theorems plus a Monte Carlo IFT.

    The oracle runs ``tau/dt`` Kraus steps on ``n_max + 1`` levels; the
    Monte Carlo estimate samples ``ensemble_size`` trajectories of the same
    channel.  Raises :class:`VerificationFailure` (carrying the report) when
    any check fails.
    """
    spec, space = cfg.reservoir(), cfg.space
    tol = FT_TOL[cfg.mode]
    bath = derive(spec, cfg.mode, cfg.linear_sinh_moments)
    kraus = kraus_step(spec, space, cfg.dt, cfg.mode, cfg.normalization, bath)
    steps = cfg.n_steps
    rho0 = cfg.initial_rho(bath, default=FT_DEFAULT_INITIAL)
    rho_tau = apply_channel(kraus, rho0, steps)
    sigma, phi = _faulty_tables(kraus) if inject_fault else (kraus.sigma_table, kraus.phi_table)

    trajs = oracle.enumerate_forward(rho0, steps, kraus, sigma, phi, rho_final=rho_tau)
    backward = backward_kraus(kraus)
    ft = oracle.verify_detailed_ft(trajs, backward)
    split = oracle.verify_na_ad_split(trajs, kraus, sigma, phi)
    try:
        dual_kraus(kraus, sigma, phi, tol=1e-12)
        dual_ok = True
    except ValueError:
        dual_ok = False

    ens = sample_ensemble(rho0, cfg.tau, cfg.dt, kraus, rho_tau, cfg.master_seed,
                          cfg.ensemble_size, workers=cfg.n_workers,
                          sigma_table=sigma, phi_table=phi)
    summary = analysis.ensemble_statistics(ens)
    mc_band = max(3.0 * summary.ift_tot_se, 1e-12)

    checks = {
        "detailed_ft": ft.detailed_residual < tol and ft.zero_backward == 0,
        "integral_ft_tot": ft.ift_deviation < tol,
        "integral_ft_na": ft.ift_na_deviation < tol,
        "forward_normalization": abs(ft.forward_total - 1.0) < tol,
        "backward_normalization": abs(ft.backward_total - 1.0) < tol,
        "zero_adiabatic": split.max_abs_s_ad == 0.0 and summary.max_abs_s_ad == 0.0,
        "dual_equals_forward": dual_ok and split.dual_max_deviation < tol,
        "dual_reverse": split.dual_reverse_residual < tol,
        "monte_carlo_ift": abs(summary.ift_tot - 1.0) <= mc_band,
    }
    report = {
        "mode": cfg.mode,
        "tolerance": tol,
        "steps": steps,
        "n_max": space.n_max,
        "fault_injected": inject_fault,
        "oracle": {
            "trajectories": ft.count,
            "detailed_residual": ft.detailed_residual,
            "ift_tot": ft.ift_value,
            "ift_tot_deviation": ft.ift_deviation,
            "ift_na": ft.ift_na_value,
            "ift_na_deviation": ft.ift_na_deviation,
            "forward_total": ft.forward_total,
            "backward_total": ft.backward_total,
            "zero_backward": ft.zero_backward,
        },
        "split": {
            "max_abs_s_ad": split.max_abs_s_ad,
            "dual_max_deviation": split.dual_max_deviation,
            "dual_reverse_residual": split.dual_reverse_residual,
            "dual_kraus_ok": dual_ok,
        },
        "monte_carlo": {
            "size": summary.size,
            "master_seed": cfg.master_seed,
            "ift_tot": summary.ift_tot,
            "ift_tot_se": summary.ift_tot_se,
            "ift_na": summary.ift_na,
            "ift_na_se": summary.ift_na_se,
            "band": mc_band,
        },
        "checks": checks,
        "passed": all(checks.values()),
    }
    if not report["passed"]:
        failed = ", ".join(k for k, v in checks.items() if not v)
        raise VerificationFailure(f"fluctuation-theorem checks failed: {failed}", report)
    return report


# -- sweep --------------------------------------------------------------------

def parse_grid(text: str) -> np.ndarray:
    """``"0,0.1,0.5"`` or ``"start:stop:num"`` (inclusive, like ``linspace``)."""
    try:
        if ":" in text:
            start, stop, num = text.split(":")
            return np.linspace(float(start), float(stop), int(num))
        return np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError as exc:
        raise ConfigError(f"cannot parse grid {text!r}") from exc


def cmd_sweep(cfg: ExperimentConfig, param: str | None = None, grid=None,
              preset: str | None = None) -> list[dict]:
    """Closed-form squeezing enhancements along one parameter.

    Presets: ``a`` sets ``r1 = 0`` and sweeps ``r2`` over ``[0, 1]``; ``b``
    sets ``r2 = 0.5`` and sweeps ``r1`` over ``[0, 1]``.  Points outside the
    admissible squeezing domain are returned with ``domain_valid`` false
    and no values.
    """
    base = cfg
    if preset is not None:
        if preset not in SWEEP_PRESETS:
            raise ConfigError(f"unknown preset {preset!r}")
        p_param, fixed = SWEEP_PRESETS[preset]
        if param is not None and param != p_param:
            raise ConfigError(f"preset {preset} sweeps {p_param}, not {param}")
        param = p_param
        base = cfg.with_(**fixed)
        if grid is None:
            grid = np.linspace(0.0, 1.0, 21)
    if param not in ("r1", "r2", "beta1", "beta2"):
        raise ConfigError(f"sweep parameter must be r1, r2, beta1 or beta2, got {param!r}")
    if grid is None or len(grid) == 0:
        raise ConfigError("an explicit --grid is required without a preset")
    rows = []
    for value in np.asarray(grid, dtype=float):
        row = {"parameter": float(value), "domain_valid": False}
        try:
            rep = analysis.enhancements(base.with_(**{param: float(value)}).reservoir())
        except ValueError:
            rows.append(row)
            continue
        row.update(mu_star=rep.mu_star, delta_S_sq=rep.delta_S_sq, delta_E_sq=rep.delta_E_sq,
                   delta_A_M=rep.delta_A_M, e_max_star=rep.e_max_star,
                   landauer_lhs=rep.landauer_lhs, landauer_rhs=rep.landauer_rhs,
                   domain_valid=True)
        rows.append(row)
    return rows


# -- trajectories -------------------------------------------------------------

def cmd_trajectories(cfg: ExperimentConfig):
    """Sample an ensemble; returns ``(rows, summary)``.

    ``rows`` is a list of tuples in :data:`TRAJECTORY_COLUMNS` order.  The
    final measurement basis is that of the channel applied ``tau/dt`` times
    to the initial state.
    """
    spec, space = cfg.reservoir(), cfg.space
    bath = derive(spec, cfg.mode, cfg.linear_sinh_moments)
    kraus = kraus_step(spec, space, cfg.dt, cfg.mode, cfg.normalization, bath)
    rho0 = cfg.initial_rho(bath)
    rho_tau = apply_channel(kraus, rho0, cfg.n_steps)
    ens = sample_ensemble(rho0, cfg.tau, cfg.dt, kraus, rho_tau, cfg.master_seed,
                          cfg.ensemble_size, workers=cfg.n_workers)
    rows = list(zip(ens.index, ens.n, ens.m, ens.n_left, ens.n_right,
                    ens.s_sys, ens.s_env, ens.s_tot, ens.s_na, ens.s_ad))
    summary = analysis.ensemble_statistics(ens).as_dict()
    summary.update(mode=cfg.mode, steps=cfg.n_steps, dt=cfg.dt, tau=cfg.tau,
                   master_seed=cfg.master_seed, initial_state=cfg.initial_state or "steady",
                   delta_S_sys=entropy(rho_tau) - entropy(rho0))
    return rows, summary


def summary_path(out: Path) -> Path:
    return out.with_suffix(".json") if out.suffix == ".csv" else out.with_name(out.name + ".json")


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="demon-fridge",
                                     description="Quantum-jump thermodynamics of a Maxwell refrigerator.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a configuration entry (repeatable)")
        p.add_argument("--out", help="output path (defaults to output_path in the config)")

    common(sub.add_parser("steady", help="stationary state report (JSON)"))
    p = sub.add_parser("ft-check", help="exact and sampled fluctuation-theorem checks (JSON)")
    common(p)
    p.add_argument("--inject-fault", action="store_true",
                   help="corrupt the entropy ledger; the check must then fail")
    p = sub.add_parser("sweep", help="squeezing enhancements along one parameter (CSV)")
    common(p)
    p.add_argument("--param", choices=("r1", "r2", "beta1", "beta2"))
    p.add_argument("--grid", help="comma list or start:stop:num")
    p.add_argument("--preset", choices=tuple(SWEEP_PRESETS))
    common(sub.add_parser("trajectories", help="per-trajectory ledger (CSV) and summary (JSON)"))
    return parser


def run(args) -> int:
    cfg = load_config(args.config, args.set)
    out = args.out or cfg.output_path
    if not out:
        raise ConfigError("no output path: pass --out or set output_path")
    out = Path(out)
    if args.command == "steady":
        write_json(out, cmd_steady(cfg))
    elif args.command == "ft-check":
        try:
            report = cmd_ft_check(cfg, inject_fault=args.inject_fault)
        except VerificationFailure as exc:
            write_json(out, exc.report)
            print(f"demon-fridge: {exc}", file=sys.stderr)
            return EXIT_VERIFY
        write_json(out, report)
    elif args.command == "sweep":
        grid = parse_grid(args.grid) if args.grid else None
        rows = cmd_sweep(cfg, args.param, grid, args.preset)
        write_csv(out, SWEEP_COLUMNS, [tuple(r.get(c) for c in SWEEP_COLUMNS) for r in rows])
    else:
        rows, summary = cmd_trajectories(cfg)
        write_csv(out, TRAJECTORY_COLUMNS, rows)
        write_json(summary_path(out), summary)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except ValueError as exc:
        print(f"demon-fridge: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
