"""Nine-point finite differences for the non-divergence equation
tr(sigma D2 u) + b . grad u = 0 on masked rectangular grids.

Second-order central differences throughout, including the 4-point cross
stencil for the mixed derivative. The scheme targets the smooth-coefficient
verification regime: a per-instance dominance check refuses instances where
the stencil's sign structure (and with it the discrete maximum principle)
would be lost, rather than returning silently wrong answers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .coefficients import CoefficientField, VectorField2, divergence_of_sigma, require_elliptic
from .errors import MeshError, SolverError

RESIDUAL_TOL = 1e-10

_NEIGHBORS8 = [(di, dj) for dj in (-1, 0, 1) for di in (-1, 0, 1) if (di, dj) != (0, 0)]


@dataclass(frozen=True)
class GridDomain:
    """Masked rectangular grid.

    Masks have shape (ny, nx), indexed [j, i] for the node at
    (origin_x + i*spacing, origin_y + j*spacing). interior and boundary are
    disjoint; every interior node has all 8 neighbors in interior or boundary.
    """

    origin: tuple[float, float]
    spacing: float
    nx: int
    ny: int
    interior_mask: np.ndarray
    boundary_mask: np.ndarray

    def __post_init__(self):
        im = np.asarray(self.interior_mask, dtype=bool)
        bm = np.asarray(self.boundary_mask, dtype=bool)
        if im.shape != (self.ny, self.nx) or bm.shape != (self.ny, self.nx):
            raise MeshError("mask shapes must be (ny, nx)")
        if self.spacing <= 0:
            raise MeshError("grid spacing must be positive")
        if (im & bm).any():
            raise MeshError("interior and boundary masks overlap")
        alive = im | bm
        jj, ii = np.where(im)
        for di, dj in _NEIGHBORS8 if len(jj) else []:
            j2, i2 = jj + dj, ii + di
            ok = (0 <= j2.min()) and (j2.max() < self.ny) and (0 <= i2.min()) and (i2.max() < self.nx)
            if not ok or not alive[j2, i2].all():
                raise MeshError(
                    "an interior node has a neighbor outside interior + boundary"
                )
        im.setflags(write=False)
        bm.setflags(write=False)
        object.__setattr__(self, "interior_mask", im)
        object.__setattr__(self, "boundary_mask", bm)

    def node_coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.origin[0] + self.spacing * np.arange(self.nx)
        y = self.origin[1] + self.spacing * np.arange(self.ny)
        return np.meshgrid(x, y, indexing="xy")

    def points(self, mask) -> np.ndarray:
        X, Y = self.node_coordinates()
        return np.column_stack([X[mask], Y[mask]])


@dataclass(frozen=True)
class GridField:
    grid: GridDomain
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.ny, self.grid.nx):
            raise SolverError("grid field shape must match (ny, nx)")
        alive = self.grid.interior_mask | self.grid.boundary_mask
        if not np.isfinite(vals[alive]).all():
            raise SolverError("non-finite values on interior or boundary nodes")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def interior_values(self) -> np.ndarray:
        return self.values[self.grid.interior_mask]


def grid_from_predicate(
    origin: tuple[float, float],
    spacing: float,
    nx: int,
    ny: int,
    inside: Callable[[np.ndarray, np.ndarray], np.ndarray],
) -> GridDomain:
    """Build masks from a vectorized point membership predicate.

    interior = nodes whose 8 neighbors are all inside; boundary = remaining
    inside nodes adjacent to an interior node. Orphan inside nodes (touching
    no interior node) are dropped.
    """
    x = origin[0] + spacing * np.arange(nx)
    y = origin[1] + spacing * np.arange(ny)
    X, Y = np.meshgrid(x, y, indexing="xy")
    member = np.asarray(inside(X, Y), dtype=bool)
    interior = member.copy()
    interior[0, :] = interior[-1, :] = False
    interior[:, 0] = interior[:, -1] = False
    for di, dj in _NEIGHBORS8:
        interior[1:-1, 1:-1] &= member[1 + dj : ny - 1 + dj, 1 + di : nx - 1 + di]
    near_interior = np.zeros_like(member)
    for di, dj in _NEIGHBORS8:
        lo_j, hi_j = max(0, dj), ny + min(0, dj)
        lo_i, hi_i = max(0, di), nx + min(0, di)
        near_interior[lo_j:hi_j, lo_i:hi_i] |= interior[
            lo_j - dj : hi_j - dj, lo_i - di : hi_i - di
        ]
    boundary = member & ~interior & near_interior
    if not interior.any():
        raise MeshError("predicate leaves no interior nodes at this spacing")
    return GridDomain(origin, spacing, nx, ny, interior, boundary)


def annulus_grid(center: tuple[float, float], r_in: float, r_out: float, spacing: float) -> GridDomain:
    if not (0 < r_in < r_out):
        raise MeshError("need 0 < r_in < r_out")
    half = r_out + 2 * spacing
    n = int(round(2 * half / spacing)) + 1
    origin = (center[0] - half, center[1] - half)

    def inside(X, Y):
        R = np.hypot(X - center[0], Y - center[1])
        return (R >= r_in) & (R <= r_out)

    return grid_from_predicate(origin, spacing, n, n, inside)


def rectangle_grid(corner: tuple[float, float], width: float, height: float, spacing: float) -> GridDomain:
    if width <= 0 or height <= 0:
        raise MeshError("rectangle sides must be positive")
    nx = int(round(width / spacing)) + 1
    ny = int(round(height / spacing)) + 1
    member = np.ones((ny, nx), dtype=bool)
    interior = np.zeros_like(member)
    interior[1:-1, 1:-1] = True
    boundary = member & ~interior
    return GridDomain(corner, spacing, nx, ny, interior, boundary)


def to_nondivergence(
    sigma: CoefficientField, step: float
) -> tuple[CoefficientField, VectorField2]:
    """Convert div(sigma grad u) = 0 to tr(sigma D2 u) + b . grad u = 0.

    The drift is the column-wise divergence b = (d1 s11 + d2 s21,
    d1 s12 + d2 s22), approximated by central differences of the entries.
    """
    b = VectorField2(
        evaluator=lambda x, y: divergence_of_sigma(sigma, (x, y), step),
        descriptor=f"div({sigma.descriptor});step={step}",
    )
    return sigma, b


def zero_drift() -> VectorField2:
    return VectorField2(evaluator=lambda x, y: (0.0, 0.0), descriptor="zero")


def solve_nondivergence(
    grid: GridDomain,
    sigma: CoefficientField,
    b: VectorField2,
    g: Callable[[float, float], float],
) -> GridField:
    """Solve tr(sigma D2 u) + b . grad u = 0 with boundary values g.

    At every interior node the stencil is
    s11 dxx + (s12 + s21) dxy + s22 dyy + b1 dx + b2 dy = 0. Before assembly
    each node must satisfy s11 >= |s12 + s21|/2 + h|b1|/2 and the analogous
    bound for s22; the check failing names the worst node and suggests a
    smaller spacing.
    """
    h = grid.spacing
    jj, ii = np.where(grid.interior_mask)
    n = len(jj)
    if n == 0:
        raise SolverError("grid has no interior nodes")
    X, Y = grid.node_coordinates()
    xs, ys = X[jj, ii], Y[jj, ii]

    require_elliptic(sigma, np.column_stack([xs, ys]))
    S = np.empty((n, 2, 2))
    B = np.empty((n, 2))
    for k in range(n):
        S[k] = sigma.at(xs[k], ys[k])
        B[k] = b.at(xs[k], ys[k])

    cross = 0.5 * (S[:, 0, 1] + S[:, 1, 0])
    slack = np.minimum(
        S[:, 0, 0] - np.abs(cross) - 0.5 * h * np.abs(B[:, 0]),
        S[:, 1, 1] - np.abs(cross) - 0.5 * h * np.abs(B[:, 1]),
    )
    worst = int(np.argmin(slack))
    if slack[worst] < -1e-12:
        raise SolverError(
            "stencil loses diagonal dominance at node "
            f"({xs[worst]:.6g}, {ys[worst]:.6g}): "
            f"sigma={S[worst].tolist()}, b={B[worst].tolist()}, spacing={h}; "
            "reduce the spacing or use a milder coefficient field"
        )

    index = -np.ones((grid.ny, grid.nx), dtype=np.int64)
    index[jj, ii] = np.arange(n)
    h2 = h * h
    q = (S[:, 0, 1] + S[:, 1, 0]) / (4.0 * h2)
    offsets = {
        (0, 0): -2.0 * S[:, 0, 0] / h2 - 2.0 * S[:, 1, 1] / h2,
        (1, 0): S[:, 0, 0] / h2 + B[:, 0] / (2 * h),
        (-1, 0): S[:, 0, 0] / h2 - B[:, 0] / (2 * h),
        (0, 1): S[:, 1, 1] / h2 + B[:, 1] / (2 * h),
        (0, -1): S[:, 1, 1] / h2 - B[:, 1] / (2 * h),
        (1, 1): q,
        (-1, -1): q,
        (1, -1): -q,
        (-1, 1): -q,
    }

    gvals = np.zeros((grid.ny, grid.nx))
    bj, bi = np.where(grid.boundary_mask)
    for j, i in zip(bj, bi):
        gvals[j, i] = g(X[j, i], Y[j, i])
    if not np.isfinite(gvals[grid.boundary_mask]).all():
        raise SolverError("boundary data evaluated to non-finite values")

    rows, cols, vals = [], [], []
    rhs = np.zeros(n)
    for (di, dj), coeff in offsets.items():
        j2, i2 = jj + dj, ii + di
        tgt = index[j2, i2]
        is_unknown = tgt >= 0
        rows.append(np.arange(n)[is_unknown])
        cols.append(tgt[is_unknown])
        vals.append(coeff[is_unknown])
        on_bnd = ~is_unknown
        if on_bnd.any():
            if not grid.boundary_mask[j2[on_bnd], i2[on_bnd]].all():
                raise SolverError("stencil reaches an exterior node")
            np.subtract.at(rhs, np.arange(n)[on_bnd], coeff[on_bnd] * gvals[j2[on_bnd], i2[on_bnd]])

    A = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsc()
    u = spsolve(A, rhs)
    if not np.isfinite(u).all():
        raise SolverError("finite-difference solve produced non-finite values")
    scale = np.abs(rhs).max()
    residual = np.abs(A @ u - rhs).max()
    if scale > 0 and residual / scale > RESIDUAL_TOL:
        raise SolverError(
            f"relative solve residual {residual / scale:.3e} exceeds {RESIDUAL_TOL}"
        )

    out = np.zeros((grid.ny, grid.nx))
    out[jj, ii] = u
    out[grid.boundary_mask] = gvals[grid.boundary_mask]
    return GridField(grid, out)


# ---------------------------------------------------------------------------
# plain-text format: "grid v1"  (masks as 0/1/2 = exterior/interior/boundary)


def grid_field_to_text(f: GridField) -> str:
    g = f.grid
    lines = [
        "grid v1",
        f"origin {float(g.origin[0])!r} {float(g.origin[1])!r}",
        f"spacing {float(g.spacing)!r}",
        f"size {g.nx} {g.ny}",
        "mask",
    ]
    code = np.zeros((g.ny, g.nx), dtype=int)
    code[g.interior_mask] = 1
    code[g.boundary_mask] = 2
    for j in range(g.ny):
        lines.append(" ".join(str(c) for c in code[j]))
    lines.append("values")
    for j in range(g.ny):
        lines.append(" ".join(repr(float(v)) for v in f.values[j]))
    return "\n".join(lines) + "\n"


def grid_field_from_text(text: str) -> GridField:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "grid v1":
        raise MeshError("not a 'grid v1' file")
    o = lines[1].split()
    s = lines[2].split()
    z = lines[3].split()
    if o[0] != "origin" or s[0] != "spacing" or z[0] != "size":
        raise MeshError("malformed grid header")
    origin = (float(o[1]), float(o[2]))
    spacing = float(s[1])
    nx, ny = int(z[1]), int(z[2])
    if lines[4].strip() != "mask":
        raise MeshError("missing mask block")
    code = np.array(
        [[int(c) for c in lines[5 + j].split()] for j in range(ny)], dtype=int
    )
    if lines[5 + ny].strip() != "values":
        raise MeshError("missing values block")
    vals = np.array(
        [[float(c) for c in lines[6 + ny + j].split()] for j in range(ny)]
    )
    grid = GridDomain(origin, spacing, nx, ny, code == 1, code == 2)
    return GridField(grid, vals)


def write_grid_field(f: GridField, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(grid_field_to_text(f))


def read_grid_field(path) -> GridField:
    with open(path, "r", encoding="utf-8") as fh:
        return grid_field_from_text(fh.read())
