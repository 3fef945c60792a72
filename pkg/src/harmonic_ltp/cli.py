"""Command-line front end wiring the library into reproducible experiments.

Subcommands: floquet, spectrum, lyap, riccati, equilibrium, simulate, repro.

Artifact conventions
--------------------
* Every run writes ``report.json`` (config echo, library versions, scalar
  results) plus command-specific CSV files, all inside ``--out-dir``.
* Outputs are deterministic for a fixed config and seed; the repro
  manifest is the only artifact carrying a timestamp.
* Dense matrix CSVs carry a two-line header: the field names
  ``rows,cols,m,n`` and their values, then one row per matrix row with
  ``re,im`` pairs.  Phasor CSVs are tidy: ``i,j,k,re,im``.
* Exit codes: 0 success, 2 input/schema errors, 3 precondition failures
  (singular or resonant operators, instability), 4 convergence or
  integration failures, 5 internal errors.

``HARMONIC_LTP_THREADS`` caps the process fan-out of ``repro all`` and is
exported to the workers' BLAS thread settings.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import datetime
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import (
    ConvergenceError,
    HarmonicError,
    PreconditionError,
    SchemaError,
)
from .floquet import floquet_factorize, harmonic_spectrum
from .fourier import FourierMatrix, TimeGrid
from .lq import (
    SimulationConfig,
    column_phasors,
    equilibrium_from_input,
    nearest_equilibrium,
    reconstruct_gain,
    simulate_closed_loop,
)
from .lyapunov import (
    solve_adaptive,
    solve_symbol_lyapunov,
    solve_truncated_full,
    time_domain_oracle,
)
from .riccati import (
    KleinmanConfig,
    closed_loop_multipliers,
    full_truncated_riccati,
    kleinman_solve,
    time_domain_riccati_oracle,
)
from .spectra import classification_sweep
from .systems import (
    System,
    bundled_path,
    load_scenario,
    load_system,
    parse_matrix,
    serialize_matrix,
)

# ---------------------------------------------------------------------------
# formatting and artifact helpers
# ---------------------------------------------------------------------------


def _f(x) -> str:
    """Shortest-roundtrip decimal, stable across runs."""
    return format(float(x), ".17g")


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return _f(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def _write_dense_csv(path: Path, arr: np.ndarray, m: int, n: int) -> None:
    arr = np.atleast_2d(np.asarray(arr, dtype=complex))
    with open(path, "w", newline="") as fh:
        fh.write("rows,cols,m,n\n")
        fh.write(f"{arr.shape[0]},{arr.shape[1]},{m},{n}\n")
        for row in arr:
            fh.write(",".join(f"{_f(v.real)},{_f(v.imag)}" for v in row) + "\n")


def _block_map(block_fn, rows: int, cols: int) -> np.ndarray:
    return np.block([[block_fn(i, j) for j in range(cols)]
                     for i in range(rows)])


def _phasor_rows(f: FourierMatrix):
    for i in range(f.rows):
        for j in range(f.cols):
            for k in range(-f.band, f.band + 1):
                c = f.phasor(i, j, k)
                yield (i, j, k, float(c.real), float(c.imag))


def _write_phasor_csv(path: Path, f: FourierMatrix) -> None:
    _write_csv(path, ["i", "j", "k", "re", "im"], _phasor_rows(f))


def _json_ready(obj):
    if isinstance(obj, dict):
        return {str(k): _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.complexfloating, complex)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.ndarray):
        return _json_ready(obj.tolist())
    return obj


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(_json_ready(obj), fh, indent=1, sort_keys=True)
        fh.write("\n")


def _versions() -> dict:
    return {
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "harmonic_ltp": __version__,
    }


def _report(out_dir: Path, command: str, params: dict, results: dict) -> None:
    _write_json(out_dir / "report.json", {
        "command": command,
        "params": params,
        "versions": _versions(),
        "results": results,
    })


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_system_arg(path: str) -> System:
    try:
        return load_system(path)
    except OSError as exc:
        raise SchemaError(f"cannot read system file {path!r}: {exc}") from exc


def _load_target_matrix(path: str, period: float) -> FourierMatrix:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise SchemaError(f"cannot read target file {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON in {path!r}: {exc}") from exc
    return parse_matrix(raw, period)


def _load_gain(path: str) -> FourierMatrix:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise SchemaError(f"cannot read gain file {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON in {path!r}: {exc}") from exc
    if not isinstance(raw, dict) or "K" not in raw or "period" not in raw:
        raise SchemaError("gain file must hold {'period': T, 'K': <matrix>}")
    return parse_matrix(raw["K"], float(raw["period"]))


def _dump_gain(path: Path, k: FourierMatrix) -> None:
    _write_json(path, {"period": float(k.period), "band": int(k.band),
                       "K": serialize_matrix(k)})


def _eigs_json(vals: np.ndarray) -> list:
    return [{"re": float(v.real), "im": float(v.imag)} for v in vals]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_floquet(args) -> None:
    out = _out_dir(args)
    system = _load_system_arg(args.system)
    fac = floquet_factorize(system.a, band=args.band, tol=args.tol)
    spec = harmonic_spectrum(fac)

    grid = np.linspace(0.0, system.period, args.samples, endpoint=False)
    w = fac.w
    header = ["t"]
    for i in range(w.rows):
        for j in range(w.cols):
            header += [f"w{i + 1}{j + 1}_re", f"w{i + 1}{j + 1}_im"]
    rows = []
    for t in grid:
        wt = w.evaluate(t)
        row = [float(t)]
        for i in range(w.rows):
            for j in range(w.cols):
                row += [float(wt[i, j].real), float(wt[i, j].imag)]
        rows.append(row)
    _write_csv(out / "w_samples.csv", header, rows)

    _report(out, "floquet", {
        "system": args.system, "band": args.band, "tol": args.tol,
        "samples": args.samples, "seed": args.seed,
    }, {
        "multipliers": _eigs_json(fac.multipliers),
        "base_eigenvalues": _eigs_json(fac.base_eigenvalues),
        "periodicity_residuals": [float(r) for r in fac.periodicity_residuals],
        "ode_residual": float(fac.ode_residual),
        "identity_residual": float(fac.identity_residual),
        "w_inverse_residual": float(fac.w_inv_residual),
        "w_inverse_ode_residual": float(fac.w_inv_ode_residual),
        "defective": bool(fac.defective),
        "band_used": int(fac.w.band),
        "sigma_plus": float(spec.sigma_plus()),
        "hurwitz": bool(spec.is_hurwitz()),
    })


def cmd_spectrum(args) -> None:
    out = _out_dir(args)
    system = _load_system_arg(args.system)
    ms = args.m or [20, 40]
    fac = floquet_factorize(system.a)
    exact = harmonic_spectrum(fac)
    sweep = classification_sweep(system.a, exact, ms, tol=args.tol)

    rows = []
    per_m = {}
    for m in sorted(sweep):
        cls = sweep[m]
        for i, eig in enumerate(cls.eigs):
            res = cls.matched_residual[i]
            rows.append((float(eig.real), float(eig.imag),
                         str(cls.labels[i]), int(m), float(res)))
        per_m[str(m)] = {
            "lattice": int((cls.labels == "lattice").sum()),
            "upper": int((cls.labels == "upper").sum()),
            "lower": int((cls.labels == "lower").sum()),
            "boundary_layer_width": int(cls.boundary_layer_width()),
            "tol": float(cls.tol),
        }
    _write_csv(out / "spectrum.csv", ["re", "im", "class", "m", "residual"],
               rows)
    _report(out, "spectrum", {
        "system": args.system, "m": sorted(int(m) for m in ms),
        "tol": args.tol, "seed": args.seed,
    }, {
        "base_eigenvalues": _eigs_json(fac.base_eigenvalues),
        "per_m": per_m,
        "hurwitz": bool(exact.is_hurwitz()),
    })


def cmd_lyap(args) -> None:
    out = _out_dir(args)
    system = _load_system_arg(args.system)
    system.require("Q")
    a, q = system.a, system.q
    results: dict = {}

    if args.adaptive:
        sol = solve_adaptive(a, q, eps=args.eps, m0=args.m)
    else:
        m = args.m if args.m is not None else max(8, a.band + q.band)
        sol = solve_symbol_lyapunov(a, q, m)
    _write_phasor_csv(out / "p_phasors.csv", sol.p)
    results["m_used"] = int(sol.m_used)
    results["residual_symbol"] = float(sol.residual_symbol)
    results["residual_time"] = float(sol.residual_time)
    results["positive_definite"] = bool(sol.positive_definite)
    results["asymmetry"] = float(sol.asymmetry)
    results["cond_estimate"] = float(sol.cond_estimate)
    results["history"] = [[int(m_), float(r)] for m_, r in sol.history]

    if args.full_truncated is not None:
        tr = solve_truncated_full(a, q, args.full_truncated, reference=sol)
        n = a.rows
        defect = np.block([[tr.defect_map(i, j) for j in range(n)]
                           for i in range(n)])
        _write_dense_csv(out / "defect_map.csv", defect, tr.m, n)
        _write_dense_csv(out / "delta_map.csv", np.abs(tr.delta), tr.m, n)
        results["full_truncated"] = {
            "m": int(tr.m),
            "residual": float(tr.residual),
            "max_defect": float(defect.max()),
            "max_delta": float(np.abs(tr.delta).max()),
        }

    if args.oracle_check:
        oracle = time_domain_oracle(a, q)
        band = max(sol.p.band, oracle.band)
        gap = (sol.p.pad(band) - oracle.pad(band)).norm()
        results["oracle_gap"] = float(gap)

    _report(out, "lyap", {
        "system": args.system, "m": args.m, "eps": args.eps,
        "adaptive": bool(args.adaptive),
        "full_truncated": args.full_truncated,
        "oracle_check": bool(args.oracle_check), "seed": args.seed,
    }, results)


def cmd_riccati(args) -> None:
    out = _out_dir(args)
    system = _load_system_arg(args.system)
    system.require("B", "Q", "R")
    a, b, q, r = system.a, system.b, system.q, system.r
    k0 = _load_gain(args.k0) if args.k0 else None
    cfg = KleinmanConfig(eps=args.eps, m0=args.m0, m_max=args.m_max,
                         outer_tol=args.outer_tol, k0=k0,
                         fixed_m=args.fixed_m)
    sol = kleinman_solve(a, b, q, r, cfg)
    _write_phasor_csv(out / "s_phasors.csv", sol.s)
    _write_phasor_csv(out / "k_phasors.csv", sol.k)
    _dump_gain(out / "gain.json", sol.k)
    results: dict = {
        "iterations": int(sol.iterations),
        "m_final": int(sol.m_final),
        "residual_riccati": float(sol.residual_riccati),
        "bound_eta_eps2": float(sol.bound_eta_eps2),
        "measurement_floor": float(sol.measurement_floor),
        "eta": float(sol.eta),
        "eps_effective": float(sol.eps),
        "tail_energy": float(sol.tail_energy),
        "inverse_defect": float(sol.inverse_defect),
        "positive_definite": bool(sol.positive_definite),
        "monotone_margins": [
            {"iteration": int(it), "min_eig_drop": float(drop),
             "relative": float(rel)} for it, drop, rel in sol.monotone_log
        ],
        "closed_loop_margins": [float(v) for v in sol.closed_loop_margins],
        "history": [
            {"iteration": int(h["iteration"]), "m": int(h["m"]),
             "lyapunov_residual": float(h["lyapunov_residual"]),
             "change": float(h["change"]),
             "min_eig": float(h["min_eig"]),
             "tail_energy": float(h["tail_energy"])} for h in sol.history
        ],
    }

    if args.full_truncated is not None:
        tr = full_truncated_riccati(a, b, q, r, args.full_truncated,
                                    reference_s=sol.s, reference_k=sol.k)
        defect_s = _block_map(tr.defect_map_s, tr.n, tr.n)
        defect_k = _block_map(tr.defect_map_k, tr.inputs, tr.n)
        _write_dense_csv(out / "s_defect_map.csv", defect_s, tr.m, tr.n)
        _write_dense_csv(out / "k_defect_map.csv", defect_k, tr.m, tr.n)
        _write_dense_csv(out / "s_delta_map.csv", tr.delta_s, tr.m, tr.n)
        _write_dense_csv(out / "k_delta_map.csv", tr.delta_k, tr.m, tr.n)
        results["full_truncated"] = {
            "m": int(tr.m),
            "residual": float(tr.residual),
            "max_s_defect": float(defect_s.max()),
            "max_k_defect": float(defect_k.max()),
            "max_s_delta": float(tr.delta_s.max()),
            "max_k_delta": float(tr.delta_k.max()),
        }

    if args.oracle_check:
        oracle = time_domain_riccati_oracle(a, b, q, r)
        band = max(sol.s.band, oracle.s.band)
        gap_s = (sol.s.pad(band) - oracle.s.pad(band)).norm()
        band_k = max(sol.k.band, oracle.k.band)
        gap_k = (sol.k.pad(band_k) - oracle.k.pad(band_k)).norm()
        results["oracle_gap_s"] = float(gap_s)
        results["oracle_gap_k"] = float(gap_k)
        results["oracle_periods"] = int(oracle.periods)
        results["oracle_fixed_point_gap"] = float(oracle.fixed_point_gap)

    _report(out, "riccati", {
        "system": args.system, "eps": args.eps, "m0": args.m0,
        "m_max": args.m_max, "outer_tol": args.outer_tol,
        "fixed_m": args.fixed_m, "k0": args.k0,
        "full_truncated": args.full_truncated,
        "oracle_check": bool(args.oracle_check), "seed": args.seed,
    }, results)


def cmd_equilibrium(args) -> None:
    out = _out_dir(args)
    system = _load_system_arg(args.system)
    system.require("B")
    a, b = system.a, system.b
    if (args.u_ref is None) == (args.x_d is None):
        raise SchemaError("provide exactly one of --u-ref or --x-d")
    if args.u_ref:
        target = _load_target_matrix(args.u_ref, system.period)
        eq = equilibrium_from_input(a, b, column_phasors(target), args.m)
    else:
        target = _load_target_matrix(args.x_d, system.period)
        eq = nearest_equilibrium(a, b, column_phasors(target), args.m)

    rows = []
    for name, pv in (("x_ref", eq.x_ref), ("u_ref", eq.u_ref)):
        for i in range(pv.n):
            for k in range(-pv.band, pv.band + 1):
                c = pv.coeffs[i, pv.band + k]
                rows.append((name, i, k, float(c.real), float(c.imag)))
    _write_csv(out / "equilibrium.csv",
               ["signal", "component", "k", "re", "im"], rows)
    results = {
        "m": int(eq.m),
        "residual": float(eq.residual),
        "residual_refined": float(eq.residual_refined),
        "rank_deficient": bool(eq.rank_deficient),
    }
    if eq.cost is not None:
        results["cost"] = float(eq.cost)
        results["gradient_norm"] = float(eq.gradient_norm)
        results["rank"] = int(eq.rank)
    _report(out, "equilibrium", {
        "system": args.system, "m": args.m, "u_ref": args.u_ref,
        "x_d": args.x_d, "seed": args.seed,
    }, results)


def cmd_simulate(args) -> None:
    out = _out_dir(args)
    system = _load_system_arg(args.system)
    system.require("B")
    a, b = system.a, system.b
    scenario = load_scenario(args.scenario, system.period)
    if args.x0 is not None:
        scenario.x0 = np.asarray([float(v) for v in args.x0.split(",")])

    if args.gain:
        k_raw = _load_gain(args.gain)
    else:
        system.require("Q", "R")
        sol = kleinman_solve(a, b, system.q, system.r,
                             KleinmanConfig(eps=args.eps))
        k_raw = sol.k
    m0 = args.m0 if args.m0 is not None else k_raw.band
    rec = reconstruct_gain(k_raw, m0)

    cfg = SimulationConfig(m=args.m, rtol=args.rtol,
                           samples_per_period=args.samples)
    res = simulate_closed_loop(a, b, rec.gain, scenario, cfg)

    n, q_dim = a.rows, b.cols
    header = (["t"] + [f"x{i + 1}" for i in range(n)]
              + [f"u{i + 1}" for i in range(q_dim)]
              + [f"xref{i + 1}" for i in range(n)] + ["err"])
    rows = []
    for i in range(res.t.size):
        rows.append([float(res.t[i])] + [float(v) for v in res.x[i]]
                    + [float(v) for v in res.u[i]]
                    + [float(v) for v in res.x_ref[i]]
                    + [float(res.err[i])])
    _write_csv(out / "trajectory.csv", header, rows)

    mults = closed_loop_multipliers(a, b, rec.gain)
    _report(out, "simulate", {
        "system": args.system, "scenario": args.scenario,
        "gain": args.gain, "m0": int(m0), "m": args.m, "rtol": args.rtol,
        "samples": args.samples, "eps": args.eps, "x0": args.x0,
        "seed": args.seed,
    }, {
        "terminal_errors": [float(v) for v in res.terminal_errors],
        "reference_norms": [float(v) for v in res.reference_norms],
        "segment_residuals": [float(eq.residual_refined)
                              for eq in res.equilibria],
        "reference_residuals": [float(v) for v in res.reference_residuals],
        "imag_leakage": float(res.imag_leakage),
        "diverged": bool(res.diverged),
        "t_divergence": (None if res.t_divergence is None
                         else float(res.t_divergence)),
        "gain_tail_energy": float(rec.tail_energy),
        "gain_decay_slope": float(rec.decay_slope),
        "closed_loop_multipliers": _eigs_json(mults),
        "closed_loop_margin": float(1.0 - np.abs(mults).max()),
    })


# ---------------------------------------------------------------------------
# repro registry
# ---------------------------------------------------------------------------


def _repro_fig2(out: Path) -> dict:
    system = load_system(bundled_path("scalar_decay.json"))
    ref = solve_adaptive(system.a, system.q, eps=1e-10)
    files = []
    for m in (8, 16, 32, 64):
        tr = solve_truncated_full(system.a, system.q, m, reference=ref)
        name = f"defect_map_m{m}.csv"
        _write_dense_csv(out / name, tr.defect_map(0, 0), m, 1)
        files.append(name)
    return {"description": "diagonal-drift maps of the dense truncated "
                           "Lyapunov solution, scalar system, m in "
                           "{8,16,32,64}",
            "files": files}


def _repro_fig3(out: Path) -> dict:
    system = load_system(bundled_path("twoband_complex.json"))
    fac = floquet_factorize(system.a)
    exact = harmonic_spectrum(fac)
    sweep = classification_sweep(system.a, exact, [20, 40])
    rows = []
    for m in sorted(sweep):
        cls = sweep[m]
        for i, eig in enumerate(cls.eigs):
            rows.append((float(eig.real), float(eig.imag),
                         str(cls.labels[i]), int(m),
                         float(cls.matched_residual[i])))
    _write_csv(out / "spectrum_clouds.csv",
               ["re", "im", "class", "m", "residual"], rows)
    return {"description": "finite-section eigenvalue clouds at m=20 and "
                           "m=40 for the two-band complex system",
            "files": ["spectrum_clouds.csv"]}


def _repro_fig4(out: Path) -> dict:
    system = load_system(bundled_path("scalar_decay.json"))
    rows = []
    for m in range(4, 33, 2):
        sol = solve_symbol_lyapunov(system.a, system.q, m)
        rows.append((m, float(sol.residual_symbol)))
    _write_csv(out / "residual_vs_m.csv", ["m", "residual"], rows)
    return {"description": "symbol Lyapunov residual versus truncation "
                           "order, scalar system",
            "files": ["residual_vs_m.csv"]}


def _repro_fig5(out: Path) -> dict:
    system = load_system(bundled_path("scalar_decay.json"))
    rows = []
    for m in (8, 12, 16, 20, 24, 28):
        sol = solve_symbol_lyapunov(system.a, system.q, m)
        p = sol.p
        for k in range(-p.band, p.band + 1):
            rows.append((m, k, float(np.abs(p.phasor(0, 0, k)))))
    _write_csv(out / "solution_phasors.csv", ["m", "k", "magnitude"], rows)
    return {"description": "Lyapunov solution phasor magnitudes versus "
                           "truncation order, scalar system",
            "files": ["solution_phasors.csv"]}


def _repro_fig6(out: Path) -> dict:
    system = load_system(bundled_path("scalar_decay.json"))
    ref = solve_adaptive(system.a, system.q, eps=1e-10)
    files = []
    for m in (8, 16, 32, 64):
        tr = solve_truncated_full(system.a, system.q, m, reference=ref)
        name = f"delta_map_m{m}.csv"
        _write_dense_csv(out / name, np.abs(tr.delta), m, 1)
        files.append(name)
    return {"description": "correction |P_m - T_m(P)| between the dense "
                           "truncated and symbol Lyapunov solutions, "
                           "scalar system",
            "files": files}


def _lq_plant() -> System:
    return load_system(bundled_path("squarewave_plant.json"))


def _repro_fig7(out: Path) -> dict:
    system = _lq_plant()
    files = []
    for m in (8, 16, 32, 64):
        tr = full_truncated_riccati(system.a, system.b, system.q, system.r, m)
        s_name, k_name = f"s_defect_m{m}.csv", f"k_defect_m{m}.csv"
        _write_dense_csv(out / s_name, _block_map(tr.defect_map_s, tr.n, tr.n),
                         m, tr.n)
        _write_dense_csv(out / k_name,
                         _block_map(tr.defect_map_k, tr.inputs, tr.n), m, tr.n)
        files += [s_name, k_name]
    return {"description": "diagonal-drift maps of the dense truncated "
                           "Riccati solution and gain, LQ plant, m in "
                           "{8,16,32,64}",
            "files": files}


def _repro_fig8(out: Path) -> dict:
    system = _lq_plant()
    sol = kleinman_solve(system.a, system.b, system.q, system.r,
                         KleinmanConfig(eps=1e-5))
    files = []
    for m in (8, 16, 32):
        tr = full_truncated_riccati(system.a, system.b, system.q, system.r,
                                    m, reference_s=sol.s, reference_k=sol.k)
        name = f"s_delta_m{m}.csv"
        _write_dense_csv(out / name, tr.delta_s, m, tr.n)
        files.append(name)
    return {"description": "correction |S_m - T_m(S)| between dense "
                           "truncated and policy-iteration Riccati "
                           "solutions, LQ plant",
            "files": files}


def _repro_fig9(out: Path) -> dict:
    system = _lq_plant()
    sol = kleinman_solve(system.a, system.b, system.q, system.r,
                         KleinmanConfig(eps=1e-5))
    rec = reconstruct_gain(sol.k, 50)
    scenario = load_scenario(bundled_path("tracking.scenario.json"),
                             system.period)
    res = simulate_closed_loop(system.a, system.b, rec.gain, scenario,
                               SimulationConfig(m=24))
    header = (["t"] + [f"x{i + 1}" for i in range(system.n)]
              + [f"u{i + 1}" for i in range(system.b.cols)]
              + [f"xref{i + 1}" for i in range(system.n)] + ["err"])
    rows = []
    for i in range(res.t.size):
        rows.append([float(res.t[i])] + [float(v) for v in res.x[i]]
                    + [float(v) for v in res.u[i]]
                    + [float(v) for v in res.x_ref[i]]
                    + [float(res.err[i])])
    _write_csv(out / "tracking.csv", header, rows)
    _write_json(out / "tracking_summary.json", {
        "terminal_errors": res.terminal_errors,
        "reference_norms": res.reference_norms,
        "imag_leakage": res.imag_leakage,
    })
    return {"description": "closed-loop tracking time series over the "
                           "three-segment scenario, gain band 50",
            "files": ["tracking.csv", "tracking_summary.json"]}


def _repro_fig10(out: Path) -> dict:
    system = _lq_plant()
    sol = kleinman_solve(system.a, system.b, system.q, system.r,
                         KleinmanConfig(eps=1e-5))
    files = []
    for m in (8, 16, 32):
        tr = full_truncated_riccati(system.a, system.b, system.q, system.r,
                                    m, reference_s=sol.s, reference_k=sol.k)
        name = f"k_delta_m{m}.csv"
        _write_dense_csv(out / name, tr.delta_k, m, tr.n)
        files.append(name)
    return {"description": "correction |K_m - T_m(K)| between dense "
                           "truncated and policy-iteration gains, LQ plant",
            "files": files}


def _repro_fig11(out: Path) -> dict:
    system = _lq_plant()
    sol = kleinman_solve(system.a, system.b, system.q, system.r,
                         KleinmanConfig(eps=1e-5))
    summary = {}
    files = []
    for m0 in (10, 20, 50):
        rec = reconstruct_gain(sol.k, m0)
        mults = closed_loop_multipliers(system.a, system.b, rec.gain)
        summary[f"m0_{m0}"] = {
            "multipliers": _eigs_json(mults),
            "margin": float(1.0 - np.abs(mults).max()),
            "tail_energy": float(rec.tail_energy),
        }
        scenario = load_scenario(bundled_path("tracking.scenario.json"),
                                 system.period)
        scenario.x0 = np.ones(system.n)
        scenario.segments = scenario.segments[:1]
        res = simulate_closed_loop(system.a, system.b, rec.gain, scenario,
                                   SimulationConfig(m=24,
                                                    samples_per_period=64))
        name = f"response_m0_{m0}.csv"
        _write_csv(out / name,
                   ["t"] + [f"x{i + 1}" for i in range(system.n)] + ["err"],
                   ([float(res.t[i])] + [float(v) for v in res.x[i]]
                    + [float(res.err[i])] for i in range(res.t.size)))
        files.append(name)
    _write_json(out / "reconstruction_summary.json", summary)
    return {"description": "closed-loop certificates and first-segment "
                           "responses for gains reconstructed at m0 in "
                           "{10,20,50}",
            "files": files + ["reconstruction_summary.json"]}


_REPRO = {
    "fig2": _repro_fig2,
    "fig3": _repro_fig3,
    "fig4": _repro_fig4,
    "fig5": _repro_fig5,
    "fig6": _repro_fig6,
    "fig7": _repro_fig7,
    "fig8": _repro_fig8,
    "fig9": _repro_fig9,
    "fig10": _repro_fig10,
    "fig11": _repro_fig11,
}


def _thread_cap() -> int:
    raw = os.environ.get("HARMONIC_LTP_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return max(1, os.cpu_count() or 1)


def cmd_repro(args) -> None:
    out = _out_dir(args)
    if args.figure != "all" and args.figure not in _REPRO:
        raise SchemaError(
            f"unknown figure id {args.figure!r}; choose one of "
            f"{sorted(_REPRO)} or 'all'"
        )
    figures = sorted(_REPRO) if args.figure == "all" else [args.figure]
    entries = {}
    if args.figure == "all" and len(figures) > 1:
        cap = _thread_cap()
        env = dict(os.environ)
        env.setdefault("OPENBLAS_NUM_THREADS", "1")
        env.setdefault("OMP_NUM_THREADS", "1")
        with concurrent.futures.ThreadPoolExecutor(max_workers=cap) as pool:
            def run(fig):
                cmd = [sys.executable, "-m", "harmonic_ltp.cli", "repro",
                       fig, "--out-dir", str(out)]
                proc = subprocess.run(cmd, env=env, capture_output=True,
                                      text=True)
                if proc.returncode != 0:
                    raise ConvergenceError(
                        f"repro {fig} failed with exit code "
                        f"{proc.returncode}: {proc.stderr.strip()}"
                    )
                sub = json.loads((out / fig / "manifest.json").read_text())
                return fig, sub["figures"][fig]

            for fig, entry in pool.map(run, figures):
                entries[fig] = entry
    else:
        for fig in figures:
            fig_dir = out / fig
            fig_dir.mkdir(parents=True, exist_ok=True)
            entry = _REPRO[fig](fig_dir)
            entry["files"] = [f"{fig}/{name}" for name in entry["files"]]
            entries[fig] = entry
    manifest = {
        "generated_at": datetime.datetime.now(datetime.timezone.utc)
        .isoformat(),
        "figures": entries,
        "plotting": "each CSV is directly plottable: scatter re/im by "
                    "class for spectra, image maps for dense CSVs, line "
                    "plots over t or m otherwise",
    }
    if args.figure == "all":
        _write_json(out / "manifest.json", manifest)
    else:
        _write_json(out / args.figure / "manifest.json", manifest)


# ---------------------------------------------------------------------------
# parser and entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="harmonic-ltp",
        description="harmonic analysis and LQ control of periodic systems",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default="out",
                        help="artifact directory (default: out)")
    common.add_argument("--seed", type=int, default=0,
                        help="seed echoed into reports for provenance")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("floquet", parents=[common],
                       help="factorize the transition matrix")
    p.add_argument("system", help="system JSON file")
    p.add_argument("--band", type=int, default=None,
                   help="analysis band for the periodic factor")
    p.add_argument("--tol", type=float, default=1e-8,
                   help="periodic-closure tolerance")
    p.add_argument("--samples", type=int, default=256,
                   help="rows in the periodic-factor CSV")
    p.set_defaults(func=cmd_floquet)

    p = sub.add_parser("spectrum", parents=[common],
                       help="classify truncated-operator eigenvalues")
    p.add_argument("system")
    p.add_argument("--m", type=int, action="append",
                   help="truncation order (repeatable; default 20 and 40)")
    p.add_argument("--tol", type=float, default=None,
                   help="lattice matching tolerance (default adaptive)")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("lyap", parents=[common],
                       help="solve the symbol Lyapunov equation")
    p.add_argument("system")
    p.add_argument("--m", type=int, default=None,
                   help="truncation order (initial order when --adaptive)")
    p.add_argument("--eps", type=float, default=1e-8,
                   help="residual target for --adaptive")
    p.add_argument("--adaptive", action="store_true",
                   help="grow m until the residual certificate meets --eps")
    p.add_argument("--full-truncated", type=int, default=None, metavar="M",
                   help="also solve the dense section at order M and dump "
                        "defect maps")
    p.add_argument("--oracle-check", action="store_true",
                   help="compare against the time-domain period-map oracle")
    p.set_defaults(func=cmd_lyap)

    p = sub.add_parser("riccati", parents=[common],
                       help="solve the symbol Riccati equation")
    p.add_argument("system")
    p.add_argument("--eps", type=float, default=1e-6,
                   help="per-step accuracy entering the defect certificate")
    p.add_argument("--m0", type=int, default=None,
                   help="initial truncation order")
    p.add_argument("--m-max", type=int, default=None,
                   help="truncation growth cap")
    p.add_argument("--outer-tol", type=float, default=1e-9,
                   help="outer-iteration change tolerance")
    p.add_argument("--fixed-m", type=int, default=None,
                   help="disable adaptivity and solve at this order")
    p.add_argument("--k0", default=None, metavar="FILE",
                   help="initial stabilizing gain (gain.json format)")
    p.add_argument("--full-truncated", type=int, default=None, metavar="M",
                   help="also run the dense section diagnostic at order M")
    p.add_argument("--oracle-check", action="store_true",
                   help="compare against the time-domain Riccati oracle")
    p.set_defaults(func=cmd_riccati)

    p = sub.add_parser("equilibrium", parents=[common],
                       help="compute a harmonic equilibrium")
    p.add_argument("system")
    p.add_argument("--m", type=int, default=24,
                   help="equilibrium truncation order")
    p.add_argument("--u-ref", default=None, metavar="FILE",
                   help="input phasor column (matrix JSON)")
    p.add_argument("--x-d", default=None, metavar="FILE",
                   help="desired state phasor column (matrix JSON)")
    p.set_defaults(func=cmd_equilibrium)

    p = sub.add_parser("simulate", parents=[common],
                       help="closed-loop tracking simulation")
    p.add_argument("system")
    p.add_argument("--scenario", required=True, metavar="FILE")
    p.add_argument("--gain", default=None, metavar="FILE",
                   help="gain.json from a riccati run (default: solve)")
    p.add_argument("--eps", type=float, default=1e-5,
                   help="Riccati accuracy when solving for the gain")
    p.add_argument("--m0", type=int, default=None,
                   help="gain reconstruction band (default: full)")
    p.add_argument("--m", type=int, default=24,
                   help="equilibrium truncation order")
    p.add_argument("--rtol", type=float, default=1e-9,
                   help="integrator relative tolerance")
    p.add_argument("--samples", type=int, default=128,
                   help="output samples per period")
    p.add_argument("--x0", default=None,
                   help="comma-separated initial state overriding the "
                        "scenario")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("repro", parents=[common],
                       help="regenerate bundled experiment data")
    p.add_argument("figure", help="figure id fig2..fig11, or 'all'")
    p.set_defaults(func=cmd_repro)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
        return 0
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except HarmonicError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
