"""Command-line front end: scans and single-point runs emitting CSV/JSON.

One JSON config file describes a run; every command validates it up front
and writes deterministic artifacts (fixed 17-significant-digit floats,
schema-versioned CSV headers) so the plotting layer can trust the files.

Exit codes: 0 success, 2 config error, 3 at least one grid point failed.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import averaging, bounds, classical, markov, params, quantum, workflows
from .errors import ConfigError, DrivenJJError

CSV_FLOAT = "%.17g"


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return CSV_FLOAT % float(value)


def write_csv(path: str, schema: str, header: list, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# schema={schema}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_phase_grid(path: str, grid) -> None:
    """Write a PhaseSpaceGrid as the flat (x, p, value) CSV the plots read."""
    rows = []
    for j, p in enumerate(grid.ps):
        for i, x in enumerate(grid.xs):
            rows.append([x, p, grid.values[j, i]])
    write_csv(path, "phase-grid-v1", ["x", "p", "value"], rows)


def _require(cfg: dict, key: str, context: str) -> object:
    if key not in cfg:
        raise ConfigError(f"missing key '{key}' in '{context}' section")
    return cfg[key]


def _axis(spec: dict, context: str) -> np.ndarray:
    start = float(_require(spec, "start", context))
    stop = float(_require(spec, "stop", context))
    steps = int(_require(spec, "steps", context))
    if steps < 1:
        raise ConfigError(f"'{context}.steps' must be >= 1")
    if steps > 1 and stop < start:
        raise ConfigError(f"'{context}' range must be ordered")
    return np.linspace(start, stop, steps)


def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return cfg


def model_from_config(cfg: dict) -> params.NormalizedModel:
    model_cfg = _require(cfg, "model", "top level")
    return params.model_from_mapping(model_cfg)


def resonance_from_config(cfg: dict) -> params.ResonanceLabel:
    res = _require(cfg, "resonance", "top level")
    return params.make_resonance(int(_require(res, "n", "resonance")),
                                 int(_require(res, "m", "resonance")))


def quantum_settings(cfg: dict) -> workflows.QuantumSettings:
    q = cfg.get("quantum", {})
    defaults = workflows.QuantumSettings()
    return workflows.QuantumSettings(
        dim=int(q.get("dim", defaults.dim)),
        steps_per_period=int(q.get("steps_per_period", defaults.steps_per_period)),
        n_t=int(q.get("n_t", defaults.n_t)),
        n_keep=int(q.get("n_keep", defaults.n_keep)),
        m_max=int(q.get("m_max", defaults.m_max)),
        j_const=float(q.get("j_const", defaults.j_const)),
        t_bath=float(q.get("t_bath", defaults.t_bath)),
        auto_converge=bool(q.get("auto_converge", defaults.auto_converge)),
        propagator_tol=float(q.get("propagator_tol", defaults.propagator_tol)),
    )


def degeneracy_families(quasi, nu_d: float, legs: int, tol: float = 1e-3):
    """Group modes whose quasienergies agree modulo nu_d / legs.

    Returns one family index per mode (-1 when a mode belongs to no
    complete group of `legs` members).
    """
    quantum_step = nu_d / legs
    phases = np.asarray(quasi) % quantum_step
    families = np.full(phases.size, -1, dtype=int)
    used = np.zeros(phases.size, dtype=bool)
    fam = 0
    for i in range(phases.size):
        if used[i]:
            continue
        dist = np.abs(phases - phases[i])
        dist = np.minimum(dist, quantum_step - dist)
        members = np.where((dist < tol) & ~used)[0]
        if members.size >= legs:
            families[members] = fam
            used[members] = True
            fam += 1
    return families


# --- commands -------------------------------------------------------------


def cmd_floquet_spectrum(cfg: dict, out: str, workers: int, resume: bool) -> int:
    model = model_from_config(cfg)
    settings = quantum_settings(cfg)
    with_steady = bool(cfg.get("steady_state", False))
    if with_steady:
        point = workflows.floquet_markov_point(model, settings)
        decomp = point.decomp
    else:
        decomp, _ = workflows.floquet_decomposition(model, settings)
    rows = []
    families = None
    if "resonance" in cfg:
        label = resonance_from_config(cfg)
        families = degeneracy_families(decomp.quasienergies, model.nu_d,
                                       label.legs)
    for r in range(decomp.quasienergies.size):
        row = [r, decomp.quasienergies[r], decomp.mean_photons[r]]
        if families is not None:
            row.append(int(families[r]))
        rows.append(row)
    header = ["mode_index", "quasienergy", "mean_photons"]
    if families is not None:
        header.append("family")
    write_csv(os.path.join(out, "spectrum.csv"), "floquet-spectrum-v1",
              header, rows)
    if with_steady:
        steady_rows = [
            [r, decomp.quasienergies[r], decomp.mean_photons[r],
             point.steady.probabilities[r]]
            for r in range(point.steady.probabilities.size)
        ]
        write_csv(os.path.join(out, "steady_state.csv"), "steady-state-v1",
                  ["mode_index", "quasienergy", "mean_photons", "p_r"],
                  steady_rows)
    write_json(os.path.join(out, "spectrum_meta.json"), {
        "beta": model.beta, "lambda": model.lambda_, "nu_d": model.nu_d,
        "xi_d": model.xi_d, "dim": settings.dim, "n_t": settings.n_t,
        "converged": bool(decomp.convergence_flag),
    })
    return 0


def _read_done_indices(path: str) -> set:
    done = set()
    if not os.path.exists(path):
        return done
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("index"):
                continue
            done.add(int(line.split(",", 1)[0]))
    return done


_WORKER_CONTEXT = {}


def _nocc_worker_init(model_dict, settings_tuple):
    _WORKER_CONTEXT["model"] = params.NormalizedModel(**model_dict)
    _WORKER_CONTEXT["settings"] = workflows.QuantumSettings(*settings_tuple)
    _WORKER_CONTEXT["ops"] = None


def _nocc_worker(task):
    index, nu_d, xi_d = task
    model = replace(_WORKER_CONTEXT["model"], nu_d=float(nu_d), xi_d=float(xi_d))
    settings = _WORKER_CONTEXT["settings"]
    if _WORKER_CONTEXT["ops"] is None:
        _WORKER_CONTEXT["ops"] = quantum.build_operators(settings.dim,
                                                         model.lambda_)
    try:
        point = workflows.floquet_markov_point(
            model, settings, ops=_WORKER_CONTEXT["ops"]
        )
        return index, nu_d, xi_d, point.steady.n_occ, point.steady.status.value
    except DrivenJJError as exc:
        return index, nu_d, xi_d, math.nan, f"error:{type(exc).__name__}"


def cmd_nocc_map(cfg: dict, out: str, workers: int, resume: bool) -> int:
    model = model_from_config(cfg)
    settings = quantum_settings(cfg)
    scan = _require(cfg, "scan", "top level")
    nu_axis = _axis(_require(scan, "nu_d", "scan"), "scan.nu_d")
    xi_axis = _axis(_require(scan, "xi_d", "scan"), "scan.xi_d")
    path = os.path.join(out, "nocc_map.csv")
    done = _read_done_indices(path) if resume else set()
    existing = {}
    if resume and os.path.exists(path):
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("#") or line.startswith("index"):
                    continue
                parts = line.rstrip("\n").split(",")
                existing[int(parts[0])] = parts

    tasks = []
    index = 0
    for nu in nu_axis:
        for xi in xi_axis:
            if index not in done:
                tasks.append((index, float(nu), float(xi)))
            index += 1

    results = {}
    model_dict = dict(beta=model.beta, lambda_=model.lambda_, nu_d=model.nu_d,
                      xi_d=model.xi_d, q_tilde=model.q_tilde)
    settings_tuple = (
        settings.dim, settings.steps_per_period, settings.n_t,
        settings.n_keep, settings.m_max, settings.j_const, settings.t_bath,
        settings.auto_converge, settings.propagator_tol,
    )
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_nocc_worker_init,
            initargs=(model_dict, settings_tuple),
        ) as pool:
            for res in pool.map(_nocc_worker, tasks):
                results[res[0]] = res
    else:
        _nocc_worker_init(model_dict, settings_tuple)
        for task in tasks:
            res = _nocc_worker(task)
            results[res[0]] = res

    rows = []
    failed = False
    for idx in range(index):
        if idx in results:
            _, nu, xi, n_occ, status = results[idx]
            if status.startswith("error:"):
                failed = True
            rows.append([idx, nu, xi, n_occ, status])
        elif idx in existing:
            parts = existing[idx]
            rows.append(parts)
    write_csv(path, "nocc-map-v1",
              ["index", "nu_d", "xi_d", "n_occ", "status"], rows)
    return 3 if failed else 0


def cmd_poincare(cfg: dict, out: str, workers: int, resume: bool) -> int:
    model = model_from_config(cfg)
    frame = params.to_symmetric_frame(model)
    portrait_cfg = _require(cfg, "portrait", "top level")
    seeds = [np.asarray(s, dtype=float)
             for s in _require(portrait_cfg, "seeds", "portrait")]
    iterations = int(portrait_cfg.get("iterations", 200))
    portraits = classical.phase_portrait(seeds, iterations, frame)
    rows = []
    for i, orbit in enumerate(portraits):
        for j, point in enumerate(orbit.iterates):
            rows.append([i, j, point[0], point[1]])
    write_csv(os.path.join(out, "portrait.csv"), "portrait-v1",
              ["seed_index", "iter", "x", "p"], rows)

    orbit_rows = []
    failed = False
    for spec in cfg.get("orbits", []):
        guess = np.asarray(_require(spec, "guess", "orbits[]"), dtype=float)
        n = int(_require(spec, "n", "orbits[]"))
        try:
            orbit = classical.find_periodic_orbit(guess, n, frame)
            lyapunov = classical.lyapunov_exponent(
                orbit.points[0], int(spec.get("lyapunov_periods", 200)), frame
            )
            mults = orbit.multipliers
            orbit_rows.append([
                orbit.n, orbit.winding_m, orbit.symmetry.value, orbit.residual,
                mults[0].real, mults[0].imag, mults[1].real, mults[1].imag,
                lyapunov,
            ])
        except DrivenJJError:
            failed = True
    if cfg.get("orbits"):
        write_csv(
            os.path.join(out, "orbits.csv"), "orbit-summary-v1",
            ["n", "m", "symmetry", "residual", "mult_re1", "mult_im1",
             "mult_re2", "mult_im2", "lyapunov"],
            orbit_rows,
        )
    return 3 if failed else 0


def _averaged_model(cfg: dict) -> averaging.AveragedModel:
    model = model_from_config(cfg)
    frame = params.to_symmetric_frame(model)
    label = resonance_from_config(cfg)
    avg_cfg = cfg.get("averaged", {})
    kappa = float(avg_cfg.get("kappa", frame.kappa))
    return averaging.AveragedModel(
        label=label, beta_tilde=frame.beta_tilde, kappa=kappa,
        xi_d=frame.xi_d,
    )


def cmd_averaged(cfg: dict, out: str, workers: int, resume: bool) -> int:
    avg = _averaged_model(cfg)
    avg_cfg = cfg.get("averaged", {})
    r_axis = _axis(avg_cfg.get(
        "r_grid", {"start": 0.1, "stop": 8.0, "steps": 120}), "averaged.r_grid")
    scan = averaging.bifurcation_scan(avg, r_axis)
    rows = [
        [eq.r_star, eq.theta_star, eq.delta, eq.stability.value]
        for eq in scan.branches
    ]
    write_csv(os.path.join(out, "branches.csv"), "averaged-branches-v1",
              ["R_star", "theta_star", "delta", "stability"], rows)
    write_json(os.path.join(out, "branches_meta.json"), {
        "delta_min": scan.extremal_deltas[0],
        "delta_max": scan.extremal_deltas[1],
        "beta_tilde": avg.beta_tilde, "kappa": avg.kappa, "xi_d": avg.xi_d,
        "n": avg.label.n, "m": avg.label.m,
    })
    return 0


def cmd_region(cfg: dict, out: str, workers: int, resume: bool) -> int:
    avg = _averaged_model(cfg)
    label = avg.label
    region_cfg = cfg.get("region", {})
    xi_axis = _axis(region_cfg.get(
        "xi_grid", {"start": 0.3, "stop": 2.2, "steps": 20}), "region.xi_grid")
    r_axis = _axis(region_cfg.get(
        "r_grid", {"start": 0.1, "stop": 8.0, "steps": 120}), "region.r_grid")
    rows = []
    for xi, lo, hi in averaging.resonance_region(avg, xi_axis, r_axis):
        nu_lo = float(averaging.delta_to_drive_frequency(label, hi))
        nu_hi = float(averaging.delta_to_drive_frequency(label, lo))
        rows.append([xi, lo, hi, nu_lo, nu_hi])
    write_csv(os.path.join(out, "region.csv"), "region-v1",
              ["xi_d", "delta_min", "delta_max", "nu_d_min", "nu_d_max"], rows)
    return 0


def cmd_bounds(cfg: dict, out: str, workers: int, resume: bool) -> int:
    model = model_from_config(cfg)
    n_bar = int(cfg.get("bounds", {}).get("n_bar", 3))
    report = bounds.classify_point(model, n_bar)
    frame = params.to_symmetric_frame(model)
    tau_bar = 2.0 * math.pi * n_bar / model.nu_d
    payload = {
        "inputs": {
            "beta": model.beta, "lambda": model.lambda_, "nu_d": model.nu_d,
            "xi_d": model.xi_d,
            "q_tilde": "inf" if math.isinf(model.q_tilde) else model.q_tilde,
            "n_bar": n_bar,
        },
        "contracting": report.contracting,
        "pd_excluded_up_to": report.pd_excluded_up_to,
        "invariant_radius": (
            "inf" if math.isinf(report.invariant_radius)
            else report.invariant_radius
        ),
        "beta_bound_contraction": report.beta_bound_contraction,
        "beta_bound_pd": report.beta_bound_pd,
        "combined_bound": bounds.combined_bound(tau_bar),
        "delta_bar_used": report.delta_bar_used,
        "kappa": frame.kappa,
        "zone": (
            "contracting" if report.contracting
            else ("pd-excluded" if report.pd_excluded_up_to >= n_bar
                  else "unprotected")
        ),
    }
    write_json(os.path.join(out, "chaos_bounds.json"), payload)
    return 0


def cmd_gap_scan(cfg: dict, out: str, workers: int, resume: bool) -> int:
    model = model_from_config(cfg)
    label = resonance_from_config(cfg)
    settings = quantum_settings(cfg)
    gap_cfg = _require(cfg, "gap_scan", "top level")
    lambdas = [float(v) for v in _require(gap_cfg, "lambdas", "gap_scan")]
    mean_photons = float(_require(gap_cfg, "mean_photons", "gap_scan"))
    rows = []
    failed = False
    for lam in lambdas:
        try:
            point = workflows.gap_for_mean_photons(
                model.beta, lam, model.xi_d, label, mean_photons, settings
            )
            rows.append([
                lam, point.nu_d, point.delta, point.r_star, point.gap,
                float(np.mean(point.cat_fidelities)),
            ])
        except DrivenJJError:
            failed = True
    write_csv(os.path.join(out, "gap_scan.csv"), "gap-scan-v1",
              ["lambda", "nu_d", "delta", "r_star", "gap", "mean_fidelity"],
              rows)
    return 3 if failed else 0


COMMANDS = {
    "floquet-spectrum": cmd_floquet_spectrum,
    "nocc-map": cmd_nocc_map,
    "poincare": cmd_poincare,
    "averaged-equilibria": cmd_averaged,
    "resonance-region": cmd_region,
    "chaos-bounds": cmd_bounds,
    "gap-scan": cmd_gap_scan,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="drivenjj",
        description="Driven Josephson oscillator: scans and analyses",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="JSON run config")
        cmd.add_argument("--out", default=".", help="output directory")
        cmd.add_argument("--workers", type=int, default=1)
        cmd.add_argument("--resume", action="store_true",
                         help="skip grid points already present in the output")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out, args.workers, args.resume)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DrivenJJError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
