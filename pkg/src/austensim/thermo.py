"""Thermodynamic and kinetic material data for austenite decomposition.

The phase diagram is linearized around one or more reference temperatures:
each reference state carries the equilibrium concentrations and the local
slopes of the alpha/(alpha+gamma) and gamma/(alpha+gamma) boundary lines,
plus the transformation entropy used to convert undercooling into a
chemical driving pressure.

Unit conventions: temperature K, concentration wt%, length um, energy J.
Slopes m_i are K/wt%, delta_S is J/(K um^3), so driving pressures come out
in J/um^3. Mobilities are um^4/(J s), diffusivities um^2/s.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

R_GAS = 8.314462618  # J/(mol K)


class TemperatureRangeError(ValueError):
    """Temperature outside the declared coverage of the phase diagram."""


class DegenerateDiagramError(ValueError):
    """Linearized boundary produced a non-physical equilibrium concentration."""


@dataclass(frozen=True)
class ReferenceState:
    """Linearization of the two-phase field at one reference temperature.

    ``valid_from``/``valid_to`` bound the half-open temperature interval
    [valid_from, valid_to) on which this state is selected.
    """

    T_ref: float
    c_alpha_ref: float
    c_gamma_ref: float
    m_alpha: float
    m_gamma: float
    delta_S: float
    valid_from: float
    valid_to: float

    def __post_init__(self):
        if not (self.m_alpha < 0 and self.m_gamma < 0):
            raise ValueError("boundary-line slopes must be negative for Fe-C in this range")
        if not (0 < self.c_alpha_ref < self.c_gamma_ref):
            raise ValueError("need 0 < c_alpha_ref < c_gamma_ref")
        if self.delta_S <= 0:
            raise ValueError("delta_S must be positive")
        if not (self.valid_from < self.valid_to):
            raise ValueError("empty validity interval")


@dataclass(frozen=True)
class LinearizedPhaseDiagram:
    """Ordered, non-overlapping reference states covering a thermal path."""

    states: tuple[ReferenceState, ...]

    def __post_init__(self):
        if not self.states:
            raise ValueError("need at least one reference state")
        ordered = tuple(sorted(self.states, key=lambda s: s.valid_from))
        for a, b in zip(ordered, ordered[1:]):
            if a.valid_to > b.valid_from:
                raise ValueError("reference-state validity intervals overlap")
        object.__setattr__(self, "states", ordered)

    def coverage(self) -> tuple[float, float]:
        return self.states[0].valid_from, self.states[-1].valid_to

    def select(self, T: float) -> ReferenceState:
        for s in self.states:
            if s.valid_from <= T < s.valid_to:
                return s
        lo, hi = self.coverage()
        raise TemperatureRangeError(
            f"T = {T} K outside phase-diagram coverage [{lo}, {hi}) K"
        )


def select_reference(diagram: LinearizedPhaseDiagram, T: float) -> ReferenceState:
    return diagram.select(T)


def equilibrium_concentrations(state: ReferenceState, T):
    """Equilibrium phase concentrations c_i_eq = c_i_ref + (T - T_ref)/m_i."""
    dT = np.asarray(T, dtype=float) - state.T_ref
    c_a = state.c_alpha_ref + dT / state.m_alpha
    c_g = state.c_gamma_ref + dT / state.m_gamma
    return c_a, c_g


def partition_ratio(state: ReferenceState, T) -> float:
    """Equilibrium partitioning ratio k = c_alpha_eq / c_gamma_eq."""
    c_a, c_g = equilibrium_concentrations(state, T)
    if np.any(np.asarray(c_g) <= 0):
        raise DegenerateDiagramError(
            f"c_gamma_eq({T} K) = {c_g} <= 0: linearization not usable here"
        )
    return c_a / c_g


def driving_pressure(state: ReferenceState, T, c_alpha, c_gamma):
    """Chemical driving pressure from undercooling and local concentrations.

    delta_S * [(T_ref - T) + 0.5 m_alpha (c_alpha - c_alpha_ref)
                           + 0.5 m_gamma (c_gamma - c_gamma_ref)],
    positive when the transformation to ferrite is favorable.
    """
    return state.delta_S * (
        (state.T_ref - T)
        + 0.5 * state.m_alpha * (np.asarray(c_alpha) - state.c_alpha_ref)
        + 0.5 * state.m_gamma * (np.asarray(c_gamma) - state.c_gamma_ref)
    )


def driving_pressure_total(state: ReferenceState, T, C, phi):
    """Driving pressure from the total concentration and the phase field.

    Splits C into phase concentrations with the equilibrium partitioning
    ratio, c_gamma = C/(1 + phi(k-1)) and c_alpha = k c_gamma, then applies
    :func:`driving_pressure`.
    """
    k = partition_ratio(state, T)
    denom = 1.0 + np.asarray(phi) * (k - 1.0)
    if np.any(denom <= 0):
        raise DegenerateDiagramError("mixture denominator 1 + phi(k-1) <= 0")
    c_gamma = np.asarray(C) / denom
    return driving_pressure(state, T, k * c_gamma, c_gamma)


@dataclass(frozen=True)
class ArrheniusLaw:
    """value(T) = prefactor * exp(-activation_energy / (R T))."""

    prefactor: float
    activation_energy: float

    def __post_init__(self):
        if self.prefactor <= 0:
            raise ValueError("prefactor must be positive")
        if self.activation_energy < 0:
            raise ValueError("activation energy must be non-negative")

    def at(self, T):
        return self.prefactor * np.exp(-self.activation_energy / (R_GAS * np.asarray(T, dtype=float)))


def arrhenius_eval(law: ArrheniusLaw, T):
    if np.any(np.asarray(T) <= 0):
        raise ValueError("temperature must be positive")
    return law.at(T)


@dataclass(frozen=True)
class InterfaceProperties:
    """Mobility laws and interfacial energies per interface class."""

    mobility_alpha_gamma: ArrheniusLaw
    mobility_alpha_alpha: ArrheniusLaw
    mobility_gamma_gamma: ArrheniusLaw
    sigma_alpha_gamma: float  # J/um^2
    sigma_alpha_alpha: float
    sigma_gamma_gamma: float

    def __post_init__(self):
        for s in (self.sigma_alpha_gamma, self.sigma_alpha_alpha, self.sigma_gamma_gamma):
            if s < 0:
                raise ValueError("interfacial energies must be non-negative")


@dataclass(frozen=True)
class CoolingSchedule:
    """Prescribed thermal path T(t), clamped at T_final.

    kinds: ``instantaneous`` (T_initial only at t = 0), ``linear`` (signed
    rate in K/s), ``piecewise`` (interpolation through breakpoints).
    """

    kind: str
    T_initial: float
    T_final: float
    rate: float = 0.0
    breakpoints: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in ("instantaneous", "linear", "piecewise"):
            raise ValueError(f"unknown schedule kind '{self.kind}'")
        if self.kind == "piecewise" and len(self.breakpoints) < 2:
            raise ValueError("piecewise schedule needs at least two breakpoints")

    def temperature_at(self, t: float) -> float:
        if t < 0:
            raise ValueError("time must be non-negative")
        if self.kind == "instantaneous":
            return self.T_initial if t == 0.0 else self.T_final
        if self.kind == "linear":
            T = self.T_initial + self.rate * t
            if self.T_final <= self.T_initial:
                return max(self.T_final, T)
            return min(self.T_final, T)
        ts = [p[0] for p in self.breakpoints]
        Ts = [p[1] for p in self.breakpoints]
        return float(np.interp(t, ts, Ts))

    def settled(self, t: float) -> bool:
        """True once the schedule has reached its final temperature."""
        return self.temperature_at(t) == self.T_final


def temperature_at(schedule: CoolingSchedule, t: float) -> float:
    return schedule.temperature_at(t)


@dataclass(frozen=True)
class MaterialData:
    """Everything the solvers need to know about the alloy."""

    diagram: LinearizedPhaseDiagram
    diffusivity_alpha: ArrheniusLaw  # um^2/s
    diffusivity_gamma: ArrheniusLaw
    interfaces: InterfaceProperties
    composition: float               # nominal carbon content, wt%
