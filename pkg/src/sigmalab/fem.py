"""P1 finite elements for the divergence-form Dirichlet problem.

The weak form sums (sigma(centroid) grad u_h) . grad phi over triangles;
centroid quadrature is exact for constant coefficients and consistent at P1
order for continuous ones. Nonsymmetric sigma is assembled as-is, no
symmetrization. The linear system is solved by a sparse direct factorization
so results are deterministic.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from .coefficients import CoefficientField, require_elliptic
from .errors import MeshError, SolverError
from .mesh import Mesh

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class ScalarField:
    """Piecewise-linear nodal function on a mesh."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.mesh.num_vertices,):
            raise SolverError(
                f"field has {values.shape} values for {self.mesh.num_vertices} vertices"
            )
        if not np.isfinite(values).all():
            raise SolverError("field has non-finite nodal values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def interpolate(self, points) -> np.ndarray:
        """Evaluate the interpolant at points; NaN outside the mesh."""
        tri, bary = self.mesh.locate(points)
        out = np.full(len(tri), np.nan)
        ok = tri >= 0
        out[ok] = np.einsum(
            "pi,pi->p", self.values[self.mesh.triangles[tri[ok]]], bary[ok]
        )
        return out


@dataclass(frozen=True)
class TriangleGradientField:
    """One constant gradient vector per triangle."""

    mesh: Mesh
    vectors: np.ndarray

    def norms(self) -> np.ndarray:
        return np.hypot(self.vectors[:, 0], self.vectors[:, 1])


@dataclass(frozen=True)
class DirichletProblem:
    mesh: Mesh
    sigma: CoefficientField
    boundary_data: Callable[[float, float], float]


def _sigma_at_centroids(mesh: Mesh, sigma: CoefficientField) -> np.ndarray:
    require_elliptic(sigma, mesh.centroids)
    return sigma.at_points(mesh.centroids)


def assemble_stiffness(mesh: Mesh, sigma: CoefficientField) -> sparse.csr_matrix:
    """Assemble the P1 stiffness matrix A[i, j] = sum_T area (sigma grad phi_j) . grad phi_i."""
    S = _sigma_at_centroids(mesh, sigma)
    G = mesh.basis_gradients
    K = np.einsum("tia,tab,tjb->tij", G, S, G) * mesh.areas[:, None, None]
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    nv = mesh.num_vertices
    return sparse.coo_matrix((K.ravel(), (rows, cols)), shape=(nv, nv)).tocsr()


def solve_dirichlet(problem: DirichletProblem) -> ScalarField:
    """Galerkin solution of div(sigma grad u) = 0 with nodal boundary data.

    Boundary values are the pointwise interpolation of boundary_data on all
    loops. Raises SolverError when the mesh has no interior vertices, the
    system is singular, or the relative max-norm residual exceeds 1e-10.
    """
    return solve_dirichlet_with_residual(problem)[0]


def solve_dirichlet_with_residual(problem: DirichletProblem) -> tuple[ScalarField, float]:
    """solve_dirichlet plus the achieved relative max-norm residual."""
    mesh = problem.mesh
    interior = mesh.interior_vertices
    if len(interior) == 0:
        raise SolverError("mesh has no interior vertices; nothing to solve for")
    A = assemble_stiffness(mesh, problem.sigma)
    bnd = mesh.boundary_vertices

    u = np.zeros(mesh.num_vertices)
    u[bnd] = [problem.boundary_data(x, y) for x, y in mesh.vertices[bnd]]
    if not np.isfinite(u[bnd]).all():
        raise SolverError("boundary data evaluated to non-finite values")

    rhs = -A[interior][:, bnd] @ u[bnd]
    Aii = A[interior][:, interior].tocsc()
    with warnings.catch_warnings():
        warnings.simplefilter("error", MatrixRankWarning)
        try:
            ui = spsolve(Aii, rhs)
        except (MatrixRankWarning, RuntimeError) as exc:
            raise SolverError(f"stiffness system is singular: {exc}") from exc
    if not np.isfinite(ui).all():
        raise SolverError("linear solve produced non-finite values")

    scale = np.abs(rhs).max()
    residual = np.abs(Aii @ ui - rhs).max()
    relative = residual / scale if scale > 0 else 0.0
    if relative > RESIDUAL_TOL:
        raise SolverError(
            f"relative solve residual {relative:.3e} exceeds {RESIDUAL_TOL}"
        )
    u[interior] = ui
    return ScalarField(mesh, u), float(relative)


def gradient_field(u: ScalarField) -> TriangleGradientField:
    """Exact per-triangle gradient of the piecewise-linear interpolant."""
    g = np.einsum("tid,ti->td", u.mesh.basis_gradients, u.values[u.mesh.triangles])
    return TriangleGradientField(u.mesh, g)


def energy(u: ScalarField, sigma: CoefficientField) -> float:
    """Dirichlet energy sum_T area (sigma grad u) . grad u."""
    mesh = u.mesh
    S = sigma.at_points(mesh.centroids)
    g = gradient_field(u).vectors
    return float(np.sum(mesh.areas * np.einsum("tab,tb,ta->t", S, g, g)))


def relative_l2_error(u: ScalarField, exact: Callable[[float, float], float]) -> float:
    """Relative L2 distance to a reference function, by centroid quadrature."""
    mesh = u.mesh
    uh = u.values[mesh.triangles].mean(axis=1)
    ue = np.array([exact(x, y) for x, y in mesh.centroids])
    den = np.sum(mesh.areas * ue * ue)
    if den == 0.0:
        raise SolverError("reference function is identically zero on centroids")
    return float(np.sqrt(np.sum(mesh.areas * (uh - ue) ** 2) / den))


# ---------------------------------------------------------------------------
# plain-text format: "field v1"


def field_to_text(u: ScalarField) -> str:
    lines = ["field v1", f"values {len(u.values)}"]
    lines.extend(repr(float(v)) for v in u.values)
    return "\n".join(lines) + "\n"


def field_from_text(text: str, mesh: Mesh) -> ScalarField:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "field v1":
        raise MeshError("not a 'field v1' file")
    head = lines[1].split()
    if len(head) != 2 or head[0] != "values":
        raise MeshError("malformed values header")
    n = int(head[1])
    if n != mesh.num_vertices:
        raise MeshError(
            f"field has {n} values but the mesh has {mesh.num_vertices} vertices"
        )
    vals = np.array([float(l) for l in lines[2 : 2 + n]])
    return ScalarField(mesh, vals)


def write_field(u: ScalarField, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(field_to_text(u))


def read_field(path, mesh: Mesh) -> ScalarField:
    with open(path, "r", encoding="utf-8") as f:
        return field_from_text(f.read(), mesh)
