"""Initial polycrystal generation and morphology statistics.

Parent austenite grains come from a plain Voronoi tessellation of uniform
seeds in a square box (bounded by mirroring the seeds across the walls);
ferrite nuclei are circles placed on randomly chosen grain-boundary edges,
weighted by edge length, with a minimum pairwise separation. Grains are
packed into level-set fields by greedy coloring with a 2*epsilon safety
halo, keeping alpha and gamma grains on disjoint fields so the nodal phase
is always the phase of the owning field.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Voronoi, cKDTree

from .grid import Grid
from .levelset import (
    ALPHA,
    GAMMA,
    GrainRecord,
    LevelSetEnsemble,
    color_grains,
    compute_interface_characteristics,
    junction_repair,
    reinitialize_ensemble,
)


class NucleationError(RuntimeError):
    """Could not place the requested nuclei under the separation constraint."""


@dataclass
class Tessellation:
    side: float
    seeds: np.ndarray                      # (n, 2)
    cells: list[np.ndarray]                # CCW polygon per seed
    adjacency: dict[int, set[int]]
    _edges: list = field(default_factory=list, repr=False)

    @property
    def n_grains(self) -> int:
        return len(self.cells)

    def cell_areas(self) -> np.ndarray:
        return np.array([_polygon_area(c) for c in self.cells])

    def interior_edges(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return self._edges


def _polygon_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def generate_polycrystal(n_grains: int, side: float, rng_seed: int,
                         seeds: np.ndarray | None = None) -> Tessellation:
    """Voronoi tessellation of ``n_grains`` uniform seeds in a square box.

    Deterministic for a fixed ``rng_seed``; explicit ``seeds`` override the
    sampling (used by symmetry fixtures).
    """
    if n_grains < 1:
        raise ValueError("need at least one grain")
    if seeds is None:
        rng = np.random.default_rng(rng_seed)
        seeds = rng.uniform(0.0, side, size=(n_grains, 2))
    else:
        seeds = np.asarray(seeds, dtype=float)
        if seeds.shape != (n_grains, 2):
            raise ValueError("seeds shape must be (n_grains, 2)")

    mirrored = [seeds]
    for axis, value in ((0, 0.0), (0, side), (1, 0.0), (1, side)):
        m = seeds.copy()
        m[:, axis] = 2.0 * value - m[:, axis]
        mirrored.append(m)
    vor = Voronoi(np.vstack(mirrored))

    cells = []
    for i in range(n_grains):
        region = vor.regions[vor.point_region[i]]
        poly = vor.vertices[region]
        ang = np.arctan2(poly[:, 1] - seeds[i, 1], poly[:, 0] - seeds[i, 0])
        cells.append(poly[np.argsort(ang)])

    adjacency: dict[int, set[int]] = {i: set() for i in range(n_grains)}
    edges = []
    for (a, b), verts in zip(vor.ridge_points, vor.ridge_vertices):
        if a < n_grains and b < n_grains and -1 not in verts:
            adjacency[a].add(b)
            adjacency[b].add(a)
            edges.append((vor.vertices[verts[0]], vor.vertices[verts[1]]))

    tess = Tessellation(side, seeds, cells, adjacency)
    tess._edges = edges
    return tess


def seed_nuclei(tess: Tessellation, n_nuclei: int, radius: float, rng_seed: int,
                min_gap: float = 0.0, max_tries: int = 500) -> np.ndarray:
    """Place nuclei centers on grain-boundary edges, length-weighted.

    Enforces pairwise center separation >= 2*radius + min_gap and keeps the
    full circle inside the box. Raises :class:`NucleationError` naming the
    achieved count when placement fails within the retry budget.
    """
    if n_nuclei < 0 or radius <= 0:
        raise ValueError("need n_nuclei >= 0 and radius > 0")
    if n_nuclei == 0:
        return np.empty((0, 2))
    edges = tess.interior_edges()
    if not edges:
        raise NucleationError("tessellation has no interior grain-boundary edges")
    rng = np.random.default_rng(rng_seed)
    lengths = np.array([np.hypot(*(b - a)) for a, b in edges])
    weights = lengths / lengths.sum()
    sep = 2.0 * radius + min_gap
    centers: list[np.ndarray] = []
    for _ in range(n_nuclei * max_tries):
        a, b = edges[rng.choice(len(edges), p=weights)]
        p = a + rng.uniform() * (b - a)
        if not np.all((p >= radius) & (p <= tess.side - radius)):
            continue
        if centers and np.min(np.hypot(*(np.array(centers) - p).T)) < sep:
            continue
        centers.append(p)
        if len(centers) == n_nuclei:
            return np.array(centers)
    raise NucleationError(
        f"placed only {len(centers)} of {n_nuclei} nuclei under separation {sep}"
    )


# ---------------------------------------------------------------------------
# level-set construction


def _point_in_polygon(px, py, poly):
    inside = np.zeros(px.shape, dtype=bool)
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        cond = (y1 > py) != (y2 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (py - y1) / (y2 - y1) * (x2 - x1)
        inside ^= cond & (px < xint)
    return inside


def _polygon_sdf(poly, px, py):
    d = np.full(px.shape, np.inf)
    n = len(poly)
    for i in range(n):
        a = poly[i]
        b = poly[(i + 1) % n]
        ab = b - a
        l2 = ab @ ab
        t = np.clip(((px - a[0]) * ab[0] + (py - a[1]) * ab[1]) / max(l2, 1e-300), 0.0, 1.0)
        d = np.minimum(d, np.hypot(px - (a[0] + t * ab[0]), py - (a[1] + t * ab[1])))
    return np.where(_point_in_polygon(px, py, poly), d, -d)


def _halo_adjacency(polys: list[np.ndarray], base: dict[int, set[int]], halo: float,
                    sample_step: float) -> dict[int, set[int]]:
    """Extend adjacency: grains with boundary samples closer than ``halo``."""
    pts, owner = [], []
    for gid, poly in enumerate(polys):
        for i in range(len(poly)):
            a, b = poly[i], poly[(i + 1) % len(poly)]
            n = max(2, int(np.hypot(*(b - a)) / sample_step) + 1)
            ts = np.linspace(0.0, 1.0, n)
            pts.append(a + ts[:, None] * (b - a))
            owner.append(np.full(n, gid))
    pts = np.vstack(pts)
    owner = np.concatenate(owner)
    tree = cKDTree(pts)
    adj = {g: set(n) for g, n in base.items()}
    for i, j in tree.query_pairs(halo):
        a, b = owner[i], owner[j]
        if a != b:
            adj[a].add(b)
            adj[b].add(a)
    return adj


def build_ensemble(grid: Grid, tess: Tessellation, nuclei: np.ndarray, radius: float,
                   eta: float, epsilon: float) -> LevelSetEnsemble:
    """Assemble the level-set ensemble for a nucleated polycrystal.

    Gamma grains and alpha nuclei are colored independently (alpha fields
    follow the gamma fields), nuclei are carved out of their host cells so
    junction repair starts from matched interfaces.
    """
    band = 2.0 * epsilon
    hmax = max(grid.spacing)
    halo = 2.0 * epsilon + hmax

    g_adj = _halo_adjacency(tess.cells, tess.adjacency, halo, sample_step=hmax)
    g_colors = color_grains(g_adj)
    n_gamma_fields = max(g_colors.values()) + 1

    n_nuc = len(nuclei)
    a_adj: dict[int, set[int]] = {i: set() for i in range(n_nuc)}
    if n_nuc > 1:
        tree = cKDTree(nuclei)
        for i, j in tree.query_pairs(halo + 2.0 * radius):
            a_adj[i].add(j)
            a_adj[j].add(i)
    a_colors = color_grains(a_adj) if n_nuc else {}
    n_alpha_fields = (max(a_colors.values()) + 1) if a_colors else 0

    n_fields = n_gamma_fields + n_alpha_fields
    phi = np.full((n_fields,) + grid.shape, -band)
    winner = np.full((n_fields,) + grid.shape, -1, dtype=int)
    xs, ys = grid.meshgrid()

    grains: list[GrainRecord] = []
    for gid, poly in enumerate(tess.cells):
        c = g_colors[gid]
        grains.append(GrainRecord(gid, GAMMA, c))
        lo = poly.min(axis=0) - band
        hi = poly.max(axis=0) + band
        box = (xs >= lo[0]) & (xs <= hi[0]) & (ys >= lo[1]) & (ys <= hi[1])
        sdf = _polygon_sdf(poly, xs[box], ys[box])
        cur = phi[c][box]
        better = sdf > cur
        phi[c][box] = np.where(better, np.minimum(sdf, band), cur)
        wc = winner[c][box]
        winner[c][box] = np.where(better & (sdf > 0), gid, wc)

    for ni, center in enumerate(nuclei):
        gid = tess.n_grains + ni
        c = n_gamma_fields + a_colors[ni]
        grains.append(GrainRecord(gid, ALPHA, c))
        sdf = radius - np.hypot(xs - center[0], ys - center[1])
        sdf = np.clip(sdf, -band, band)
        better = sdf > phi[c]
        winner[c] = np.where(better & (sdf > 0), gid, winner[c])
        phi[c] = np.maximum(phi[c], sdf)
        for cg in range(n_gamma_fields):  # carve the nucleus out of host cells
            phi[cg] = np.minimum(phi[cg], -sdf)

    ens = LevelSetEnsemble(grid, phi, grains, eta, epsilon)
    if n_fields >= 2:
        junction_repair(ens)
    reinitialize_ensemble(ens)
    owner = ens.phi.argmax(axis=0)
    positive = ens.phi.max(axis=0) > 0
    labels = np.where(positive, np.take_along_axis(winner, owner[None], axis=0)[0], -1)
    ens.labels = labels
    compute_interface_characteristics(ens)
    return ens


def planar_ensemble(grid: Grid, interface_x: float, eta: float, epsilon: float) -> LevelSetEnsemble:
    """Two-grain 1D fixture: ferrite on the left of ``interface_x``."""
    band = 2.0 * epsilon
    x = grid.coords(0)
    phi_a = np.clip(interface_x - x, -band, band)
    phi_g = np.clip(x - interface_x, -band, band)
    grains = [GrainRecord(0, ALPHA, 0), GrainRecord(1, GAMMA, 1)]
    ens = LevelSetEnsemble(grid, np.stack([phi_a, phi_g]), grains, eta, epsilon)
    ens.labels = np.where(phi_a > 0, 0, np.where(phi_g > 0, 1, -1))
    compute_interface_characteristics(ens)
    return ens


# ---------------------------------------------------------------------------
# statistics


@dataclass
class MorphologyStats:
    fraction_alpha: float
    fraction_gamma: float
    grain_areas: dict[int, float]        # um^2 (um in 1D)
    radii_alpha: np.ndarray
    radii_gamma: np.ndarray
    mean_radius_alpha: float             # arithmetic mean of equivalent radii
    mean_radius_gamma: float
    mean_area_radius_alpha: float        # radius of the mean-area grain
    mean_area_radius_gamma: float

    def histogram(self, phase: str, bins=20):
        radii = self.radii_alpha if phase == ALPHA else self.radii_gamma
        return np.histogram(radii, bins=bins)


def compute_stats(ens: LevelSetEnsemble) -> MorphologyStats:
    """Per-grain areas by nodal counting of positive regions, equivalent
    radii and per-phase fractions/means."""
    derived = ens.derived or compute_interface_characteristics(ens)
    n_nodes = ens.grid.n_nodes
    frac_alpha = float(np.count_nonzero(derived.chi_alpha)) / n_nodes
    cell = float(np.prod(ens.grid.spacing))
    flat = ens.labels.ravel()
    counts = np.bincount(flat[flat >= 0], minlength=max((g.id for g in ens.grains), default=-1) + 1)
    areas = {g.id: counts[g.id] * cell for g in ens.grains}

    def phase_radii(phase):
        vals = [areas[g.id] for g in ens.grains if g.phase == phase and areas[g.id] > 0]
        return np.sqrt(np.array(vals) / np.pi) if vals else np.empty(0)

    ra = phase_radii(ALPHA)
    rg = phase_radii(GAMMA)

    def mean_or_nan(v):
        return float(v.mean()) if v.size else float("nan")

    def area_radius(v):
        return float(np.sqrt(np.mean(v**2))) if v.size else float("nan")

    return MorphologyStats(
        frac_alpha, 1.0 - frac_alpha, areas, ra, rg,
        mean_or_nan(ra), mean_or_nan(rg), area_radius(ra), area_radius(rg),
    )


# ---------------------------------------------------------------------------
# snapshot format (text, restartable)


def save_microstructure(path, ens: LevelSetEnsemble) -> None:
    with open(path, "w") as fp:
        fp.write("austensim-microstructure 1\n")
        fp.write(f"ndim {ens.grid.ndim}\n")
        fp.write("shape " + " ".join(str(n) for n in ens.grid.shape) + "\n")
        fp.write("spacing " + " ".join(f"{h:.17g}" for h in ens.grid.spacing) + "\n")
        fp.write("origin " + " ".join(f"{o:.17g}" for o in ens.grid.origin) + "\n")
        fp.write(f"eta {ens.eta:.17g}\n")
        fp.write(f"epsilon {ens.epsilon:.17g}\n")
        fp.write(f"grains {len(ens.grains)}\n")
        for g in ens.grains:
            fp.write(f"{g.id} {g.phase} {g.color} {g.stored_energy:.17g}\n")
        fp.write("labels\n")
        flat = ens.labels.ravel()
        for i in range(0, flat.size, 16):
            fp.write(" ".join(str(v) for v in flat[i:i + 16]) + "\n")


def load_microstructure(path) -> LevelSetEnsemble:
    with open(path) as fp:
        tokens = fp.read().split()
    it = iter(tokens)

    def expect(word):
        got = next(it)
        if got != word:
            raise ValueError(f"bad microstructure file: expected '{word}', got '{got}'")

    expect("austensim-microstructure")
    expect("1")
    expect("ndim")
    ndim = int(next(it))
    expect("shape")
    shape = tuple(int(next(it)) for _ in range(ndim))
    expect("spacing")
    spacing = tuple(float(next(it)) for _ in range(ndim))
    expect("origin")
    origin = tuple(float(next(it)) for _ in range(ndim))
    expect("eta")
    eta = float(next(it))
    expect("epsilon")
    epsilon = float(next(it))
    expect("grains")
    n_grains = int(next(it))
    grains = []
    for _ in range(n_grains):
        gid = int(next(it))
        phase = next(it)
        color = int(next(it))
        energy = float(next(it))
        grains.append(GrainRecord(gid, phase, color, energy))
    expect("labels")
    grid = Grid(shape, spacing, origin)
    labels = np.array([int(next(it)) for _ in range(grid.n_nodes)], dtype=int).reshape(shape)

    band = 2.0 * epsilon
    n_fields = max(g.color for g in grains) + 1
    fog = np.full(max(g.id for g in grains) + 1, -1, dtype=int)
    for g in grains:
        fog[g.id] = g.color
    phi = np.full((n_fields,) + shape, -band)
    h2 = 0.5 * min(spacing)
    for f in range(n_fields):
        member = (labels >= 0) & (fog[np.maximum(labels, 0)] == f)
        phi[f] = np.where(member, h2, -h2)
    ens = LevelSetEnsemble(grid, phi, grains, eta, epsilon, labels=labels.copy())
    reinitialize_ensemble(ens)
    if n_fields >= 2:
        junction_repair(ens)
        reinitialize_ensemble(ens)
    ens.labels = labels
    compute_interface_characteristics(ens)
    return ens
