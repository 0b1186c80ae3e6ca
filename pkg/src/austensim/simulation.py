"""Coupled simulation loop and run artifacts.

Per step: update the temperature from the schedule, select the reference
state, evaluate the driving-pressure field from the current concentration
and phase field, assemble the velocity, transport the level sets (with
junction repair, reinitialization and derived-field refresh), then advance
the concentration with the new phase field, and append diagnostics.

Runs stop at t_end or at steady state: once the schedule has reached its
final temperature, the run is steady when the phase-boundary distance field
moves less than h/100 over a trailing window of steps (window length from
the scenario; a per-step threshold would trigger immediately at small dt).
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import FileInitial, PlanarInitial, PolycrystalInitial, Scenario
from .diffusion import DiffusionCoefficients, MassAudit, assemble_cdr, step_concentration
from .grid import ScalarField, write_vtk
from .kinetics import (
    StoredEnergyInput,
    VelocityAssembly,
    assemble_chemical_velocity,
    assemble_stored_energy_velocity,
    capillarity_coefficient,
    class_mobility,
    transport_step,
    zero_velocity,
)
from .levelset import LevelSetEnsemble, _crossings_1d
from .microstructure import (
    build_ensemble,
    compute_stats,
    generate_polycrystal,
    load_microstructure,
    planar_ensemble,
    seed_nuclei,
)
from .oracle import DomainExhausted, advance, initial_state, quadrature_mass
from .thermo import MaterialData, driving_pressure_total, equilibrium_concentrations, partition_ratio


class SimulationError(RuntimeError):
    pass


@dataclass
class RunReport:
    scenario_name: str
    steps: int
    final_time: float
    final_T: float
    fraction_alpha: float
    fraction_alpha_diffuse: float
    c_gamma_plateau: float
    c_alpha_plateau: float
    c_gamma_plateau_raw: float
    c_alpha_plateau_raw: float
    interface_x: float          # nan for 2D runs
    mass_initial: float
    mass_final: float
    max_abs_drift: float
    steady_reached: bool
    n_fields: int
    n_grains_alive: int
    wall_time_s: float
    config_echo: str
    trajectory: np.ndarray = field(default=None, repr=False)  # columns of TRAJECTORY_COLUMNS


TRAJECTORY_COLUMNS = ("t_s", "T_k", "interface_x_um", "c_gamma_int_wtpct", "fraction_alpha")
DIAGNOSTIC_COLUMNS = ("t_s", "T_k", "mass", "drift_rel", "min_c_wtpct", "max_c_wtpct", "cfl_advective")
ORACLE_COLUMNS = ("t_s", "T_k", "interface_x_um", "c_gamma_int_wtpct", "c_alpha_int_wtpct",
                  "c_gamma_far_wtpct", "v_um_per_s", "mass_residual_rel")


def _write_csv(path, columns, rows):
    with open(path, "w") as fp:
        fp.write(",".join(columns) + "\n")
        for row in rows:
            fp.write(",".join(f"{v:.12g}" for v in row) + "\n")


def build_initial_ensemble(scenario: Scenario) -> LevelSetEnsemble:
    num = scenario.numerics
    init = scenario.initial
    if isinstance(init, PlanarInitial):
        return planar_ensemble(scenario.grid, init.interface_x, num.eta, num.epsilon)
    if isinstance(init, PolycrystalInitial):
        side = scenario.grid.lengths[0]
        tess = generate_polycrystal(init.n_grains, side, init.rng_seed)
        gap = 2.0 * max(scenario.grid.spacing)
        nuclei = seed_nuclei(tess, init.n_nuclei, init.nucleus_radius, init.rng_seed + 1, min_gap=gap)
        return build_ensemble(scenario.grid, tess, nuclei, init.nucleus_radius, num.eta, num.epsilon)
    if isinstance(init, FileInitial):
        return load_microstructure(init.path)
    raise SimulationError(f"unsupported initial state {init!r}")


def initial_concentration(ens: LevelSetEnsemble, c_alpha: float, c_gamma: float) -> ScalarField:
    pf = ens.derived.phase_field
    return ScalarField(ens.grid, pf * c_alpha + (1.0 - pf) * c_gamma)


def _interface_position(ens: LevelSetEnsemble) -> float:
    if ens.grid.ndim != 1:
        return float("nan")
    xc = _crossings_1d(ens.derived.phi_alpha_zone, ens.grid)
    return float(xc[0]) if xc.size else float("nan")


def _interface_concentration(ens: LevelSetEnsemble, C: ScalarField, k: float) -> float:
    if ens.grid.ndim != 1:
        return float("nan")
    xc = _crossings_1d(ens.derived.phi_alpha_zone, ens.grid)
    if not xc.size:
        return float("nan")
    c_at = float(np.interp(xc[0], ens.grid.coords(0), C.values))
    return c_at / (1.0 + 0.5 * (k - 1.0))


def plateau_concentrations(ens: LevelSetEnsemble, C: ScalarField, k: float,
                           gamma_cut: float = 0.05, alpha_cut: float = 0.95):
    """Plateau means over the bulk of each phase.

    Returns phase concentrations (the mixture value C re-expressed as
    C_gamma = C / (1 + phi(k-1)), resp. k times it) plus the raw mixture
    means for reference.
    """
    pf = ens.derived.phase_field
    w = ens.grid.node_weights()
    cg_nodes = C.values / (1.0 + pf * (k - 1.0))
    out = []
    for mask, factor in (((pf < gamma_cut), 1.0), ((pf > alpha_cut), k)):
        if np.any(mask):
            out.append(factor * float(np.sum(cg_nodes[mask] * w[mask]) / np.sum(w[mask])))
            out.append(float(np.sum(C.values[mask] * w[mask]) / np.sum(w[mask])))
        else:
            out += [float("nan"), float("nan")]
    c_gamma_plateau, c_gamma_raw, c_alpha_plateau, c_alpha_raw = out
    return c_gamma_plateau, c_alpha_plateau, c_gamma_raw, c_alpha_raw


def _fraction_alpha(ens: LevelSetEnsemble) -> float:
    return float(np.count_nonzero(ens.derived.chi_alpha)) / ens.grid.n_nodes


def _fraction_alpha_diffuse(ens: LevelSetEnsemble) -> float:
    w = ens.grid.node_weights()
    return float(np.sum(ens.derived.phase_field * w) / np.sum(w))


def run_simulation(scenario: Scenario, out_dir, *, stored_energies: StoredEnergyInput | None = None,
                   log=None) -> RunReport:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    grid = scenario.grid
    num = scenario.numerics
    mat = scenario.material
    beta = 3.0 / num.eta
    h = max(grid.spacing)
    steady_tol = h / 100.0

    ens = build_initial_ensemble(scenario)
    C = initial_concentration(ens, scenario.initial.c_alpha, scenario.initial.c_gamma)
    audit = MassAudit.start(C)
    if stored_energies is None:
        stored_energies = StoredEnergyInput({g.id: g.stored_energy for g in ens.grains})

    diagnostics, trajectory, stats_rows = [], [], []
    max_drift = 0.0
    steady = False
    az_snapshot = ens.derived.phi_alpha_zone.copy()
    snapshot_step = 0
    t = 0.0
    step = 0
    n_steps_cap = int(np.ceil(num.t_end / num.dt))
    T_start = scenario.schedule.temperature_at(0.0)
    if not _covered(mat, T_start):
        T_start = scenario.schedule.T_final
    k = partition_ratio(mat.diagram.select(T_start), T_start)

    def record(T, cfl):
        mass, drift = audit.audit(C)
        nonlocal max_drift
        max_drift = max(max_drift, abs(drift))
        diagnostics.append((t, T, mass, drift, float(C.values.min()), float(C.values.max()), cfl))
        trajectory.append((t, T, _interface_position(ens), _interface_concentration(ens, C, k),
                           _fraction_alpha(ens)))

    record(scenario.schedule.temperature_at(0.0), 0.0)
    _dump_fields(out, 0, ens, C)
    stats_rows.append(_stats_row(t, scenario.schedule.temperature_at(0.0), ens))

    try:
        while step < n_steps_cap and not steady:
            step += 1
            t_next = t + num.dt
            T = scenario.schedule.temperature_at(t_next)
            ref = mat.diagram.select(T)
            k = partition_ratio(ref, T)
            derived = ens.derived

            if scenario.features.chemical_pressure:
                dg = driving_pressure_total(ref, T, C.values, derived.phase_field)
                v_chem = assemble_chemical_velocity(
                    ens, derived, dg, mat.interfaces.mobility_alpha_gamma.at(T), beta)
            else:
                v_chem = zero_velocity(grid)
            if scenario.features.stored_energy:
                v_store = assemble_stored_energy_velocity(
                    ens, stored_energies, class_mobility(derived, mat.interfaces, T), beta)
            else:
                v_store = zero_velocity(grid)
            if scenario.features.capillarity:
                b = capillarity_coefficient(derived, mat.interfaces, T, grid)
            else:
                b = ScalarField.full(grid, 0.0)

            assembly = VelocityAssembly(v_chem, v_store, b, beta)
            transport_step(ens, assembly, num.dt, rtol=num.solver_rtol, maxiter=num.solver_maxiter,
                           refresh_labels=(step % num.label_refresh == 0))

            coeffs = DiffusionCoefficients(mat.diffusivity_alpha.at(T), mat.diffusivity_gamma.at(T), k)
            cdr = assemble_cdr(ScalarField(grid, ens.derived.phase_field), coeffs)
            a_max = float(np.max(np.abs(cdr.A_vec.values)))
            cfl = a_max * num.dt / min(grid.spacing)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")  # CFL warning is reported via diagnostics
                C = step_concentration(C, cdr, num.dt, rtol=num.solver_rtol, maxiter=num.solver_maxiter)

            t = t_next
            record(T, cfl)
            if step % scenario.output_cadence == 0:
                _dump_fields(out, step, ens, C)
                stats_rows.append(_stats_row(t, T, ens))
            if log and step % max(1, scenario.output_cadence) == 0:
                log(f"step {step}: t = {t:.4g} s, T = {T:.1f} K, f_alpha = {_fraction_alpha(ens):.4f}")

            if scenario.schedule.settled(t) and step - snapshot_step >= num.steady_window:
                disp = float(np.max(np.abs(ens.derived.phi_alpha_zone - az_snapshot)))
                if disp < steady_tol:
                    steady = True
                az_snapshot = ens.derived.phi_alpha_zone.copy()
                snapshot_step = step
    except Exception as exc:
        _dump_fields(out, step, ens, C, prefix="abort_fields")
        raise SimulationError(f"aborted at step {step}, t = {t:.6g} s: {exc}") from exc

    _dump_fields(out, step, ens, C, prefix="fields_final")
    stats_rows.append(_stats_row(t, scenario.schedule.temperature_at(t), ens))
    _write_csv(out / "diagnostics.csv", DIAGNOSTIC_COLUMNS, diagnostics)
    _write_csv(out / "trajectory.csv", TRAJECTORY_COLUMNS, trajectory)
    _write_csv(out / "stats.csv",
               ("t_s", "T_k", "fraction_alpha", "mean_radius_alpha_um", "mean_radius_gamma_um",
                "mean_area_radius_alpha_um", "mean_area_radius_gamma_um", "n_alive"),
               stats_rows)

    T_final = scenario.schedule.temperature_at(t)
    cg_p, ca_p, cg_raw, ca_raw = plateau_concentrations(ens, C, k)
    mass_final, _ = audit.audit(C)
    report = RunReport(
        scenario_name=scenario.name,
        steps=step,
        final_time=t,
        final_T=T_final,
        fraction_alpha=_fraction_alpha(ens),
        fraction_alpha_diffuse=_fraction_alpha_diffuse(ens),
        c_gamma_plateau=cg_p,
        c_alpha_plateau=ca_p,
        c_gamma_plateau_raw=cg_raw,
        c_alpha_plateau_raw=ca_raw,
        interface_x=_interface_position(ens),
        mass_initial=audit.initial_mass,
        mass_final=mass_final,
        max_abs_drift=max_drift,
        steady_reached=steady,
        n_fields=ens.n_fields,
        n_grains_alive=sum(1 for g in ens.grains if g.alive),
        wall_time_s=time.perf_counter() - t0,
        config_echo=_echo(scenario),
        trajectory=np.array(trajectory),
    )
    _write_report(out / "report.txt", report)
    return report


def _covered(mat: MaterialData, T: float) -> bool:
    lo, hi = mat.diagram.coverage()
    return lo <= T < hi


def _stats_row(t, T, ens):
    stats = compute_stats(ens)
    return (t, T, stats.fraction_alpha, stats.mean_radius_alpha, stats.mean_radius_gamma,
            stats.mean_area_radius_alpha, stats.mean_area_radius_gamma,
            sum(1 for g in ens.grains if g.alive))


def _dump_fields(out: Path, step: int, ens: LevelSetEnsemble, C: ScalarField, prefix="fields") -> None:
    d = ens.derived
    name = f"{prefix}_{step:04d}.vtk" if prefix == "fields" else f"{prefix}.vtk"
    write_vtk(out / name, ens.grid, {
        "carbon_wtpct": C.values,
        "phase_field": d.phase_field,
        "phi_alpha_zone": d.phi_alpha_zone,
        "phi_max": d.phi_max,
        "grain_id": ens.labels,
        "phase_id": d.chi_alpha.astype(int),
        "chi_alpha_gamma": d.chi_ag.astype(int),
        "chi_alpha_alpha": d.chi_aa.astype(int),
        "chi_gamma_gamma": d.chi_gg.astype(int),
    })


def _echo(scenario: Scenario) -> str:
    g = scenario.grid
    n = scenario.numerics
    return (
        f"scenario={scenario.name} grid={'x'.join(str(s) for s in g.shape)} "
        f"spacing={'x'.join(f'{h:.6g}' for h in g.spacing)} dt={n.dt} eta={n.eta} "
        f"epsilon={n.epsilon} t_end={n.t_end} schedule={scenario.schedule.kind} "
        f"Ti={scenario.schedule.T_initial} Tf={scenario.schedule.T_final} "
        f"rate={scenario.schedule.rate} features={scenario.features}"
    )


def _write_report(path, report: RunReport) -> None:
    lines = [f"austensim run report: {report.scenario_name}", ""]
    for key in ("steps", "final_time", "final_T", "fraction_alpha", "fraction_alpha_diffuse",
                "c_gamma_plateau", "c_alpha_plateau", "c_gamma_plateau_raw", "c_alpha_plateau_raw",
                "interface_x", "mass_initial", "mass_final", "max_abs_drift", "steady_reached",
                "n_fields", "n_grains_alive", "wall_time_s"):
        lines.append(f"{key} = {getattr(report, key)}")
    lines.append(f"config = {report.config_echo}")
    with open(path, "w") as fp:
        fp.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# sharp-interface oracle runs


def run_oracle(scenario: Scenario, out_dir) -> np.ndarray:
    """Run the 1D sharp-interface model on a planar scenario; returns the
    trajectory (columns ORACLE_COLUMNS) and writes oracle_trajectory.csv."""
    if not isinstance(scenario.initial, PlanarInitial):
        raise SimulationError("the sharp-interface oracle needs a planar 1D scenario")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    num = scenario.numerics
    mat = scenario.material
    init = scenario.initial
    X = scenario.grid.lengths[0]
    h = max(scenario.grid.spacing)
    steady_tol = h / 100.0

    T0 = scenario.schedule.temperature_at(0.0)
    state = initial_state(init.interface_x, X, init.c_alpha, init.c_gamma, T0)
    rows = [(0.0, T0, state.interface_x, state.c_gamma_int, state.c_alpha_int,
             state.c_gamma_far, 0.0, 0.0)]
    steady = False
    snapshot_x = state.interface_x
    snapshot_step = 0
    n_cap = int(np.ceil(num.t_end / num.dt))
    for step in range(1, n_cap + 1):
        T = scenario.schedule.temperature_at(step * num.dt)
        try:
            new = advance(state, mat, num.dt, T)
        except DomainExhausted:
            break
        v = (new.interface_x - state.interface_x) / num.dt
        state = new
        residual = (quadrature_mass(state) - state.initial_mass) / state.initial_mass
        rows.append((state.t, T, state.interface_x, state.c_gamma_int, state.c_alpha_int,
                     state.c_gamma_far, v, residual))
        if scenario.schedule.settled(state.t) and step - snapshot_step >= num.steady_window:
            if abs(state.interface_x - snapshot_x) < steady_tol:
                steady = True
                break
            snapshot_x = state.interface_x
            snapshot_step = step
    _write_csv(out / "oracle_trajectory.csv", ORACLE_COLUMNS, rows)
    return np.array(rows)


def equilibrium_report(material: MaterialData, T: float, C0: float) -> dict:
    """Linearized equilibrium data and the lever-rule ferrite fraction."""
    ref = material.diagram.select(T)
    c_a, c_g = equilibrium_concentrations(ref, T)
    k = partition_ratio(ref, T)
    f = (c_g - C0) / (c_g - c_a)
    return {
        "T_k": T,
        "reference_T_k": ref.T_ref,
        "c_alpha_eq_wtpct": float(c_a),
        "c_gamma_eq_wtpct": float(c_g),
        "partition_ratio": float(k),
        "c0_wtpct": C0,
        "ferrite_fraction": float(f),
    }
