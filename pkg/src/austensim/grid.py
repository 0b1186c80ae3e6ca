"""Uniform Cartesian grids (1D/2D), nodal fields and discrete operators.

All solvers in this package share the same vertex-centered layout: values
live on nodes, arrays are indexed ``[ix]`` or ``[ix, iy]``, and integration
uses trapezoid weights so that the conservative flux discretizations
conserve exactly the trapezoid mass.

Units are micrometers for lengths throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform node-centered grid with ``shape[a]`` nodes along axis ``a``."""

    shape: tuple[int, ...]
    spacing: tuple[float, ...]
    origin: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.shape) not in (1, 2):
            raise ValueError("only 1D and 2D grids are supported")
        if len(self.spacing) != len(self.shape):
            raise ValueError("spacing must match grid dimensionality")
        if any(n < 3 for n in self.shape):
            raise ValueError("need at least 3 nodes per axis")
        if any(h <= 0 for h in self.spacing):
            raise ValueError("grid spacing must be positive")
        if not self.origin:
            object.__setattr__(self, "origin", (0.0,) * len(self.shape))

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple((n - 1) * h for n, h in zip(self.shape, self.spacing))

    def coords(self, axis: int) -> np.ndarray:
        n, h, x0 = self.shape[axis], self.spacing[axis], self.origin[axis]
        return x0 + h * np.arange(n)

    def meshgrid(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*(self.coords(a) for a in range(self.ndim)), indexing="ij"))

    def node_weights(self) -> np.ndarray:
        """Trapezoid quadrature weights (half cells on the boundary)."""
        w = None
        for a in range(self.ndim):
            wa = np.full(self.shape[a], self.spacing[a])
            wa[0] *= 0.5
            wa[-1] *= 0.5
            w = wa if w is None else np.multiply.outer(w, wa)
        return w

    @classmethod
    def line(cls, length: float, n_nodes: int, origin: float = 0.0) -> "Grid":
        return cls((n_nodes,), (length / (n_nodes - 1),), (origin,))

    @classmethod
    def box(cls, lengths: tuple[float, float], n_nodes: tuple[int, int]) -> "Grid":
        hx = lengths[0] / (n_nodes[0] - 1)
        hy = lengths[1] / (n_nodes[1] - 1)
        return cls(tuple(n_nodes), (hx, hy))


@dataclass
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"field shape {self.values.shape} does not match grid {self.grid.shape}")

    @classmethod
    def full(cls, grid: Grid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "ScalarField":
        return cls(grid, np.asarray(fn(*grid.meshgrid()), dtype=float))

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def integrate(self) -> float:
        """Trapezoid integral over the domain."""
        return float(np.sum(self.values * self.grid.node_weights()))


@dataclass
class VectorField:
    grid: Grid
    values: np.ndarray  # shape (*grid.shape, ndim)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = self.grid.shape + (self.grid.ndim,)
        if self.values.shape != expected:
            raise ValueError(f"vector field shape {self.values.shape}, expected {expected}")

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, np.zeros(grid.shape + (grid.ndim,)))

    def magnitude(self) -> np.ndarray:
        return np.sqrt(np.sum(self.values**2, axis=-1))


def gradient(f: ScalarField) -> VectorField:
    """Second-order central gradient, one-sided second order at boundaries."""
    comps = np.gradient(f.values, *f.grid.spacing)
    if f.grid.ndim == 1:
        comps = [comps]
    return VectorField(f.grid, np.stack(comps, axis=-1))


def laplacian(f: ScalarField) -> ScalarField:
    """3/5-point Laplacian with homogeneous-Neumann (mirror) ghost nodes."""
    out = np.zeros_like(f.values)
    for a in range(f.grid.ndim):
        padded = np.pad(f.values, [(1, 1) if ax == a else (0, 0) for ax in range(f.grid.ndim)], mode="reflect")
        sl_lo = tuple(slice(0, -2) if ax == a else slice(None) for ax in range(f.grid.ndim))
        sl_hi = tuple(slice(2, None) if ax == a else slice(None) for ax in range(f.grid.ndim))
        out += (padded[sl_lo] - 2.0 * f.values + padded[sl_hi]) / f.grid.spacing[a] ** 2
    return ScalarField(f.grid, out)


def unit_normal(phi: ScalarField, tol: float = 1e-10) -> tuple[VectorField, np.ndarray]:
    """Outward unit normal n = -grad(phi)/|grad(phi)|.

    Where the gradient magnitude falls below ``tol`` the normal is set to
    zero and the node is flagged in the returned boolean mask.
    """
    g = gradient(phi).values
    mag = np.sqrt(np.sum(g**2, axis=-1))
    degenerate = mag < tol
    safe = np.where(degenerate, 1.0, mag)
    n = -g / safe[..., None]
    n[degenerate] = 0.0
    return VectorField(phi.grid, n), degenerate


# ---------------------------------------------------------------------------
# flat-index helpers for sparse assembly


def axis_faces(grid: Grid, axis: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flat indices (left, right) of node pairs straddling each face along
    ``axis``, plus the transverse trapezoid area of every face."""
    idx = np.arange(grid.n_nodes).reshape(grid.shape)
    sl_lo = tuple(slice(0, -1) if a == axis else slice(None) for a in range(grid.ndim))
    sl_hi = tuple(slice(1, None) if a == axis else slice(None) for a in range(grid.ndim))
    left = idx[sl_lo].ravel()
    right = idx[sl_hi].ravel()
    if grid.ndim == 1:
        area = np.ones(left.size)
    else:
        other = 1 - axis
        wa = np.full(grid.shape[other], grid.spacing[other])
        wa[0] *= 0.5
        wa[-1] *= 0.5
        if axis == 0:
            area = np.broadcast_to(wa, (grid.shape[0] - 1, grid.shape[1])).ravel()
        else:
            area = np.broadcast_to(wa[:, None], (grid.shape[0], grid.shape[1] - 1)).ravel()
    return left, right, area


# ---------------------------------------------------------------------------
# output primitives


def write_vtk(path, grid: Grid, point_data: dict[str, np.ndarray], title: str = "austensim fields") -> None:
    """Legacy-VTK structured-points dump (ASCII) of nodal fields."""
    nx = grid.shape[0]
    ny = grid.shape[1] if grid.ndim == 2 else 1
    hx = grid.spacing[0]
    hy = grid.spacing[1] if grid.ndim == 2 else 1.0
    ox = grid.origin[0]
    oy = grid.origin[1] if grid.ndim == 2 else 0.0
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {nx} {ny} 1",
        f"ORIGIN {ox:.9g} {oy:.9g} 0",
        f"SPACING {hx:.9g} {hy:.9g} 1",
        f"POINT_DATA {nx * ny}",
    ]
    for name, arr in point_data.items():
        arr = np.asarray(arr)
        flat = arr.ravel(order="F")  # x varies fastest
        if np.issubdtype(arr.dtype, np.integer) or arr.dtype == bool:
            lines.append(f"SCALARS {name} int 1")
            lines.append("LOOKUP_TABLE default")
            body = " ".join(str(int(v)) for v in flat)
        else:
            lines.append(f"SCALARS {name} float 1")
            lines.append("LOOKUP_TABLE default")
            body = " ".join(f"{v:.7g}" for v in flat)
        lines.append(body)
    with open(path, "w") as fp:
        fp.write("\n".join(lines) + "\n")


def write_profile_csv(path, grid: Grid, columns: dict[str, np.ndarray], y_index: int | None = None) -> None:
    """CSV extraction of 1D profiles: the field itself in 1D, or the row
    ``y_index`` (default: mid-row) of a 2D field."""
    x = grid.coords(0)
    rows = {"x_um": x}
    for name, arr in columns.items():
        arr = np.asarray(arr)
        if grid.ndim == 2:
            j = grid.shape[1] // 2 if y_index is None else y_index
            arr = arr[:, j]
        rows[name] = arr
    header = ",".join(rows)
    data = np.column_stack(list(rows.values()))
    with open(path, "w") as fp:
        fp.write(header + "\n")
        for row in data:
            fp.write(",".join(f"{v:.12g}" for v in row) + "\n")
