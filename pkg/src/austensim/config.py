"""Scenario and material configuration files (INI-style key = value).

Every key a run needs must be present: missing keys raise
:class:`ConfigError` naming the key and section. All values carry their
unit in the key name (um, s, K, wt%, J).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from .grid import Grid
from .thermo import (
    ArrheniusLaw,
    CoolingSchedule,
    InterfaceProperties,
    LinearizedPhaseDiagram,
    MaterialData,
    ReferenceState,
)


class ConfigError(ValueError):
    pass


class _Cfg:
    def __init__(self, path):
        self.path = Path(path)
        if not self.path.exists():
            raise ConfigError(f"config file not found: {self.path}")
        self.parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        self.parser.read(self.path)

    def sections(self):
        return self.parser.sections()

    def has(self, section, key=None):
        if key is None:
            return self.parser.has_section(section)
        return self.parser.has_option(section, key)

    def get(self, section, key) -> str:
        if not self.parser.has_section(section):
            raise ConfigError(f"missing section [{section}] in {self.path}")
        if not self.parser.has_option(section, key):
            raise ConfigError(f"missing key '{key}' in section [{section}] of {self.path}")
        return self.parser.get(section, key)

    def get_float(self, section, key) -> float:
        raw = self.get(section, key)
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"key '{key}' in [{section}]: not a number: '{raw}'") from exc

    def get_int(self, section, key) -> int:
        return int(round(self.get_float(section, key)))

    def get_bool(self, section, key) -> bool:
        raw = self.get(section, key).strip().lower()
        if raw in ("true", "yes", "on", "1"):
            return True
        if raw in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"key '{key}' in [{section}]: not a boolean: '{raw}'")

    def opt_float(self, section, key, default):
        return self.get_float(section, key) if self.has(section, key) else default

    def opt_int(self, section, key, default):
        return self.get_int(section, key) if self.has(section, key) else default

    def opt_bool(self, section, key, default):
        return self.get_bool(section, key) if self.has(section, key) else default


def _parse_arrhenius(cfg: _Cfg, section: str, prefix: str) -> ArrheniusLaw:
    return ArrheniusLaw(
        cfg.get_float(section, f"{prefix}_prefactor"),
        cfg.get_float(section, f"{prefix}_activation_j_per_mol"),
    )


def parse_material(path) -> MaterialData:
    cfg = _Cfg(path)
    states = []
    for section in sorted(s for s in cfg.sections() if s.startswith("reference_state")):
        states.append(ReferenceState(
            T_ref=cfg.get_float(section, "t_ref_k"),
            c_alpha_ref=cfg.get_float(section, "c_alpha_ref_wtpct"),
            c_gamma_ref=cfg.get_float(section, "c_gamma_ref_wtpct"),
            m_alpha=cfg.get_float(section, "m_alpha_k_per_wtpct"),
            m_gamma=cfg.get_float(section, "m_gamma_k_per_wtpct"),
            delta_S=cfg.get_float(section, "delta_s_j_per_k_um3"),
            valid_from=cfg.get_float(section, "valid_from_k"),
            valid_to=cfg.get_float(section, "valid_to_k"),
        ))
    if not states:
        raise ConfigError(f"no [reference_state.*] sections in {cfg.path}")
    diagram = LinearizedPhaseDiagram(tuple(states))

    interfaces = InterfaceProperties(
        mobility_alpha_gamma=_parse_arrhenius(cfg, "mobility", "alpha_gamma"),
        mobility_alpha_alpha=_parse_arrhenius(cfg, "mobility", "alpha_alpha"),
        mobility_gamma_gamma=_parse_arrhenius(cfg, "mobility", "gamma_gamma"),
        sigma_alpha_gamma=cfg.get_float("interface_energy", "alpha_gamma_j_per_um2"),
        sigma_alpha_alpha=cfg.get_float("interface_energy", "alpha_alpha_j_per_um2"),
        sigma_gamma_gamma=cfg.get_float("interface_energy", "gamma_gamma_j_per_um2"),
    )
    return MaterialData(
        diagram=diagram,
        diffusivity_alpha=_parse_arrhenius(cfg, "diffusivity", "alpha"),
        diffusivity_gamma=_parse_arrhenius(cfg, "diffusivity", "gamma"),
        interfaces=interfaces,
        composition=cfg.get_float("material", "composition_wtpct"),
    )


@dataclass(frozen=True)
class PlanarInitial:
    interface_x: float
    c_alpha: float
    c_gamma: float


@dataclass(frozen=True)
class PolycrystalInitial:
    n_grains: int
    n_nuclei: int
    nucleus_radius: float
    rng_seed: int
    c_alpha: float
    c_gamma: float


@dataclass(frozen=True)
class FileInitial:
    path: str
    c_alpha: float
    c_gamma: float


@dataclass(frozen=True)
class Features:
    capillarity: bool = True
    stored_energy: bool = False
    chemical_pressure: bool = True


@dataclass(frozen=True)
class Numerics:
    dt: float
    eta: float
    epsilon: float
    t_end: float
    steady_window: int           # steps per steady-state displacement window
    label_refresh: int           # steps between grain-label refreshes
    solver_rtol: float = 1e-10
    solver_maxiter: int = 10_000


@dataclass(frozen=True)
class Scenario:
    name: str
    grid: Grid
    material: MaterialData
    schedule: CoolingSchedule
    numerics: Numerics
    initial: PlanarInitial | PolycrystalInitial | FileInitial
    features: Features
    output_cadence: int

    def validate(self) -> None:
        hmax = max(self.grid.spacing)
        if hmax > self.numerics.eta / 6.0 + 1e-12:
            raise ConfigError(
                f"grid spacing {hmax} um too coarse for eta = {self.numerics.eta} um "
                f"(need h <= eta/6 = {self.numerics.eta / 6.0:.6g})"
            )
        if self.numerics.epsilon < 2.0 * self.numerics.eta:
            raise ConfigError("epsilon must be at least 2*eta")
        if self.numerics.dt <= 0:
            raise ConfigError("dt must be positive")


def parse_scenario(path, full_scale: bool = False) -> Scenario:
    cfg = _Cfg(path)
    if full_scale:
        if not cfg.has("full_scale"):
            raise ConfigError(f"scenario {cfg.path} has no [full_scale] profile")
        for key, value in cfg.parser.items("full_scale"):
            section, _, name = key.partition(".")
            if not name:
                raise ConfigError(f"[full_scale] keys must be 'section.key', got '{key}'")
            if not cfg.parser.has_section(section):
                cfg.parser.add_section(section)
            cfg.parser.set(section, name, value)

    dims = cfg.get_int("domain", "dims")
    if dims == 1:
        grid = Grid.line(cfg.get_float("domain", "length_x_um"), cfg.get_int("domain", "nodes_x"))
    elif dims == 2:
        grid = Grid.box(
            (cfg.get_float("domain", "length_x_um"), cfg.get_float("domain", "length_y_um")),
            (cfg.get_int("domain", "nodes_x"), cfg.get_int("domain", "nodes_y")),
        )
    else:
        raise ConfigError("dims must be 1 or 2")

    material = parse_material(path)

    kind = cfg.get("schedule", "kind").strip().lower()
    if kind == "instantaneous":
        schedule = CoolingSchedule("instantaneous",
                                   cfg.get_float("schedule", "t_initial_k"),
                                   cfg.get_float("schedule", "t_final_k"))
    elif kind == "linear":
        schedule = CoolingSchedule("linear",
                                   cfg.get_float("schedule", "t_initial_k"),
                                   cfg.get_float("schedule", "t_final_k"),
                                   cfg.get_float("schedule", "rate_k_per_s"))
    else:
        raise ConfigError(f"unknown schedule kind '{kind}'")

    eta = cfg.get_float("numerics", "eta_um")
    numerics = Numerics(
        dt=cfg.get_float("numerics", "dt_s"),
        eta=eta,
        epsilon=cfg.opt_float("numerics", "epsilon_um", 2.0 * eta),
        t_end=cfg.get_float("numerics", "t_end_s"),
        steady_window=cfg.opt_int("numerics", "steady_window_steps", 50),
        label_refresh=cfg.opt_int("numerics", "label_refresh_steps", 1),
        solver_rtol=cfg.opt_float("numerics", "solver_rtol", 1e-10),
        solver_maxiter=cfg.opt_int("numerics", "solver_maxiter", 10_000),
    )

    ikind = cfg.get("initial", "kind").strip().lower()
    c_a = cfg.get_float("initial", "c_alpha_wtpct")
    c_g = cfg.get_float("initial", "c_gamma_wtpct")
    if ikind == "planar":
        if dims != 1:
            raise ConfigError("planar initial state requires dims = 1")
        initial = PlanarInitial(cfg.get_float("initial", "interface_x_um"), c_a, c_g)
    elif ikind == "polycrystal":
        if dims != 2:
            raise ConfigError("polycrystal initial state requires dims = 2")
        initial = PolycrystalInitial(
            n_grains=cfg.get_int("initial", "n_grains"),
            n_nuclei=cfg.get_int("initial", "n_nuclei"),
            nucleus_radius=cfg.get_float("initial", "nucleus_radius_um"),
            rng_seed=cfg.get_int("initial", "rng_seed"),
            c_alpha=c_a, c_gamma=c_g,
        )
    elif ikind == "file":
        initial = FileInitial(cfg.get("initial", "path"), c_a, c_g)
    else:
        raise ConfigError(f"unknown initial kind '{ikind}'")

    features = Features(
        capillarity=cfg.opt_bool("features", "capillarity", True),
        stored_energy=cfg.opt_bool("features", "stored_energy", False),
        chemical_pressure=cfg.opt_bool("features", "chemical_pressure", True),
    )

    scenario = Scenario(
        name=cfg.path.stem,
        grid=grid,
        material=material,
        schedule=schedule,
        numerics=numerics,
        initial=initial,
        features=features,
        output_cadence=cfg.opt_int("output", "cadence_steps", 500),
    )
    scenario.validate()
    return scenario
