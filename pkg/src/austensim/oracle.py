"""Semi-analytic 1D sharp-interface model of mixed-mode growth.

Independent verification oracle for the level-set solver: ferrite occupies
[0, Gamma), austenite (Gamma, X], and the solute profile in each phase is a
quadratic in x satisfying the interface/far-field values and zero slope at
the walls. The far-field concentration follows in closed form from exact
solute mass balance; the interface concentration solves a scalar nonlinear
equation balancing the migration flux against the diffusion fluxes on both
sides; the interface then moves with v = mu * dG (no capillarity, planar).

Closed forms used here (C_a = k C_g at the interface and far field):

    C_a(x) = C_a0 + (C_a_int - C_a0) (x/Gamma)^2
    C_g(x) = C_g0 + (C_g_int - C_g0) (1 - (x-Gamma)/L_g)^2
    integral = Gamma (2 C_a0 + C_a_int)/3 + L_g (2 C_g0 + C_g_int)/3
    C_g0 = (3 M0 - (k Gamma + L_g) C_g_int) / (2 (k Gamma + L_g))

    f(C_g_int) = mu dG C_g_int (1 - k)
                 - (2 D_a k / Gamma) (C_g_int - C_g0)
                 - (2 D_g / L_g)    (C_g_int - C_g0) = 0
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .thermo import MaterialData, driving_pressure, equilibrium_concentrations, partition_ratio


class DomainExhausted(RuntimeError):
    """Interface left (0, X): the sharp-interface model no longer applies."""


@dataclass
class OracleState:
    interface_x: float      # Gamma, um
    domain_length: float    # X, um
    c_gamma_int: float      # wt%
    c_alpha_int: float
    c_gamma_far: float
    c_alpha_far: float
    t: float
    T: float
    initial_interface_x: float
    c_alpha_init: float
    c_gamma_init: float
    initial_mass: float     # wt% um

    @property
    def l_gamma(self) -> float:
        return self.domain_length - self.interface_x


def initial_state(interface_x: float, domain_length: float,
                  c_alpha_init: float, c_gamma_init: float, T: float) -> OracleState:
    if not 0.0 < interface_x < domain_length:
        raise ValueError("interface must start inside the domain")
    mass = interface_x * c_alpha_init + (domain_length - interface_x) * c_gamma_init
    return OracleState(
        interface_x, domain_length,
        c_gamma_init, c_alpha_init, c_gamma_init, c_alpha_init,
        0.0, T, interface_x, c_alpha_init, c_gamma_init, mass,
    )


def profiles(state: OracleState):
    """Quadratic concentration profiles C_alpha(x), C_gamma(x)."""
    G = state.interface_x
    Lg = state.l_gamma

    def c_alpha(x):
        return state.c_alpha_far + (state.c_alpha_int - state.c_alpha_far) * (np.asarray(x) / G) ** 2

    def c_gamma(x):
        u = 1.0 - (np.asarray(x) - G) / Lg
        return state.c_gamma_far + (state.c_gamma_int - state.c_gamma_far) * u**2

    return c_alpha, c_gamma


def far_field_from_mass_balance(k: float, interface_x: float, domain_length: float,
                                c_gamma_int: float, initial_mass: float) -> float:
    """Far-field austenite concentration making the quadratic profiles carry
    exactly the initial solute mass (with C_alpha = k C_gamma tied at the
    interface and the far field)."""
    lg = domain_length - interface_x
    denom = 2.0 * (k * interface_x + lg)
    if abs(denom) < 1e-300:
        raise ZeroDivisionError("degenerate geometry in the mass-balance closed form")
    return (3.0 * initial_mass - (k * interface_x + lg) * c_gamma_int) / denom


def quadrature_mass(state: OracleState, n: int = 801) -> float:
    """Independent Simpson quadrature of the profiles (exact for quadratics)."""
    from scipy.integrate import simpson

    c_a, c_g = profiles(state)
    xa = np.linspace(0.0, state.interface_x, n)
    xg = np.linspace(state.interface_x, state.domain_length, n)
    return float(simpson(c_a(xa), x=xa) + simpson(c_g(xg), x=xg))


def migration_rate(state: OracleState, mat: MaterialData, c_gamma_int: float) -> float:
    """v = mu * dG at the given interface concentration (planar, no
    capillarity)."""
    ref = mat.diagram.select(state.T)
    k = partition_ratio(ref, state.T)
    dg = driving_pressure(ref, state.T, k * c_gamma_int, c_gamma_int)
    return mat.interfaces.mobility_alpha_gamma.at(state.T) * dg


def interface_balance(state: OracleState, mat: MaterialData, c_gamma_int: float) -> float:
    """Residual of the interfacial solute-flux balance, zero at the
    mixed-mode interface concentration."""
    ref = mat.diagram.select(state.T)
    k = partition_ratio(ref, state.T)
    d_a = mat.diffusivity_alpha.at(state.T)
    d_g = mat.diffusivity_gamma.at(state.T)
    c_g0 = far_field_from_mass_balance(k, state.interface_x, state.domain_length,
                                       c_gamma_int, state.initial_mass)
    v = migration_rate(state, mat, c_gamma_int)
    return (
        v * c_gamma_int * (1.0 - k)
        - (2.0 * d_a * k / state.interface_x) * (c_gamma_int - c_g0)
        - (2.0 * d_g / state.l_gamma) * (c_gamma_int - c_g0)
    )


def solve_interface_concentration(state: OracleState, mat: MaterialData) -> float | None:
    """Root of the flux balance in a safeguarded bracket.

    Returns None when the bracket carries no sign change, signalling that
    the transformation has stalled at (or beyond) local equilibrium.
    """
    ref = mat.diagram.select(state.T)
    k = partition_ratio(ref, state.T)
    c_g0_now = far_field_from_mass_balance(k, state.interface_x, state.domain_length,
                                           state.c_gamma_int, state.initial_mass)
    _, c_g_eq = equilibrium_concentrations(ref, state.T)
    lo = max(c_g0_now, 1e-6)
    hi = 2.0 * c_g_eq
    f = lambda c: interface_balance(state, mat, c)
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        return None
    return brentq(f, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)


def advance(state: OracleState, mat: MaterialData, dt: float, T: float | None = None) -> OracleState:
    """One explicit-Euler migration step of the sharp-interface model.

    Re-evaluates k(T), dG, mu(T) and D(T) at the step temperature, so
    non-isothermal schedules work by passing the current T.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    work = state if T is None else replace(state, T=T)
    c_int = solve_interface_concentration(work, mat)
    if c_int is None:
        c_int = work.c_gamma_int
        v = 0.0
    else:
        v = migration_rate(work, mat, c_int)
    new_x = work.interface_x + v * dt
    if not 0.0 < new_x < work.domain_length:
        raise DomainExhausted(f"interface at {new_x} um left (0, {work.domain_length})")
    ref = mat.diagram.select(work.T)
    k = partition_ratio(ref, work.T)
    c_g0 = far_field_from_mass_balance(k, new_x, work.domain_length, c_int, work.initial_mass)
    return replace(
        work,
        interface_x=new_x,
        c_gamma_int=c_int,
        c_alpha_int=k * c_int,
        c_gamma_far=c_g0,
        c_alpha_far=k * c_g0,
        t=work.t + dt,
    )


def flux_balance_residual(state: OracleState, mat: MaterialData) -> float:
    """|v (C_g_int - C_a_int) - (D_a dC_a/dx - D_g dC_g/dx)| from the
    analytic profile slopes, at the interface concentration the flux balance
    selects for the current geometry (zero up to root-solver precision)."""
    c_int = solve_interface_concentration(state, mat)
    if c_int is None:
        return 0.0
    ref = mat.diagram.select(state.T)
    k = partition_ratio(ref, state.T)
    c_g0 = far_field_from_mass_balance(k, state.interface_x, state.domain_length,
                                       c_int, state.initial_mass)
    d_a = mat.diffusivity_alpha.at(state.T)
    d_g = mat.diffusivity_gamma.at(state.T)
    v = migration_rate(state, mat, c_int)
    slope_a = 2.0 * (k * c_int - k * c_g0) / state.interface_x
    slope_g = -2.0 * (c_int - c_g0) / state.l_gamma
    return abs(v * (c_int - k * c_int) - (d_a * slope_a - d_g * slope_g))
