"""Stationary solves and the 1D closed-form quadrature oracle.

The primary solve replaces one row of the singular conservative matrix
(the cell with the largest diagonal magnitude, lowest index on ties) by
the mass-normalization row and factorizes; an inverse-power iteration is
kept as an independent cross-check and as a fallback when the
factorization reports singularity.

The 1D oracles integrate the stationary balance

    (eps^2 / 2) (a u)' - (B + eps^2 b) u = C,
    a = sum |A_i|^2,  b = A_0 + (1/2) sum A_i A_i',

with C = 0 on an interval (zero flux through reflecting ends) and C
fixed by periodicity on the circle.  On the circle the textbook
variation-of-constants form e^{Phi(x)} [w(0) + (2C/eps^2) int e^{-Phi}]
cancels catastrophically once Phi(L) = int 2(B + eps^2 b)/(eps^2 a)
exceeds ~35, so the solution is evaluated in the equivalent
backward-integrated form

    w(x) = N [ J1(x) + J2(x) ],
    J1(x) = int_x^L e^{Phi(x) - Phi(s)} ds,
    J2(x) = int_0^x e^{Phi(x) - Phi(L) - Phi(s)} ds,

whose exponents are all nonpositive for positive drift; N > 0 comes from
normalization and C = -eps^2 N (1 - e^{-Phi(L)}) / 2.  Phi itself is a
cumulative composite Simpson integral on a panel grid aligned with the
cell centers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import BoundaryError, DegenerateError, PositivityError, SolveError
from .fields import ScalarForm, VectorField, add, mul, Const
from .geometry import Circle, Grid, Interval
from .operator import FokkerPlanckOperator

#: Components of a solved density may undershoot zero by at most this.
POSITIVITY_SLACK = 1e-10

#: Quadrature panels per finite-volume cell used by the oracles.
ORACLE_QUAD_FACTOR = 8


@dataclass
class Density:
    """Nonnegative per-cell probability density with unit mass."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        self.values = np.asarray(self.values, float)
        if self.values.shape != (self.grid.ncells,):
            raise ValueError("density shape does not match the grid")
        if np.any(self.values < 0.0):
            raise PositivityError("density has negative components")
        mass = self.mass()
        if abs(mass - 1.0) > 1e-12:
            raise ValueError(f"density mass is {mass!r}, expected 1 within 1e-12")

    @classmethod
    def uniform(cls, grid: Grid) -> "Density":
        return cls(np.full(grid.ncells, 1.0 / grid.total_measure()), grid)

    @classmethod
    def normalized(cls, values, grid: Grid) -> "Density":
        values = np.asarray(values, float)
        return cls(values / (np.sum(values) * grid.cell_volume), grid)

    def mass(self) -> float:
        return float(np.sum(self.values) * self.grid.cell_volume)


@dataclass
class StationaryReport:
    density: Density
    residual: float
    min_u: float
    max_u: float
    w12_seminorm: float
    method: str
    iterations: int


def _normalization_row_solve(matrix: sp.csr_matrix, grid: Grid):
    diag = matrix.diagonal()
    row = int(np.argmax(np.abs(diag)))  # argmax takes the lowest index on ties
    modified = matrix.tolil(copy=True)
    modified[row, :] = grid.cell_volumes
    rhs = np.zeros(grid.ncells)
    rhs[row] = 1.0
    lu = spla.splu(modified.tocsc())
    return lu.solve(rhs)


def _inverse_iteration(matrix: sp.csr_matrix, grid: Grid, tol: float, maxiter: int):
    mat_norm = float(np.max(np.abs(matrix).sum(axis=1)))
    try:
        lu = spla.splu(matrix.tocsc())
    except RuntimeError:
        jitter = 1e-14 * mat_norm
        lu = spla.splu((matrix + jitter * sp.identity(grid.ncells, format="csr")).tocsc())
    v = np.full(grid.ncells, 1.0 / grid.total_measure())
    for it in range(1, maxiter + 1):
        v = lu.solve(v)
        v /= np.sum(np.abs(v)) * grid.cell_volume
        if np.sum(v) < 0:
            v = -v
        residual = float(np.max(np.abs(matrix @ v))) / (mat_norm * float(np.max(np.abs(v))))
        if residual <= tol:
            return v, it
    raise SolveError(f"inverse iteration did not reach tolerance {tol} in {maxiter} iterations")


def solve_stationary(op: FokkerPlanckOperator, method: str = "direct",
                     tol: float = 1e-12, maxiter: int = 500) -> StationaryReport:
    """Solve M u = 0 for the unique unit-mass stationary density.

    ``method`` is "direct" (row replacement + sparse LU, with inverse
    iteration as automatic fallback) or "inverse-iteration" (the
    independent cross-check path).  The residual is measured against the
    unmodified matrix as ||M u||_inf / (||M||_inf ||u||_inf).
    """
    if not op.is_irreducible():
        raise SolveError("operator is reducible; the stationary density is not unique")
    grid = op.grid
    iterations = 0
    used = method
    if method == "direct":
        try:
            u = _normalization_row_solve(op.matrix, grid)
        except RuntimeError:
            u, iterations = _inverse_iteration(op.matrix, grid, tol, maxiter)
            used = "direct+fallback"
    elif method == "inverse-iteration":
        u, iterations = _inverse_iteration(op.matrix, grid, tol, maxiter)
    else:
        raise ValueError(f"unknown method {method!r}")

    min_component = float(u.min())
    if min_component < -POSITIVITY_SLACK:
        raise PositivityError(
            f"solved density has component {min_component}, beyond the {-POSITIVITY_SLACK} slack "
            "(scheme misuse, e.g. cross-diffusion on a coarse grid)"
        )
    u = np.clip(u, 0.0, None)
    u /= np.sum(u) * grid.cell_volume
    residual = float(np.max(np.abs(op.matrix @ u))) / (op.inf_norm() * float(np.max(np.abs(u))))
    if residual > 1e-8:
        raise SolveError(f"stationary residual {residual} is implausibly large")
    density = Density(u, grid)
    return StationaryReport(
        density=density,
        residual=residual,
        min_u=float(u.min()),
        max_u=float(u.max()),
        w12_seminorm=discrete_w12_seminorm(density),
        method=used,
        iterations=iterations,
    )


def discrete_w12_seminorm(u: Density) -> float:
    """Discrete ||grad u||_2 from face differences.

    Each interior face contributes (du/h)^2 times the staggered volume
    area*h; the result converges to the integral of |grad u|^2 for smooth
    densities.
    """
    grid = u.grid
    total = 0.0
    for axis in range(grid.dim):
        left, right, _ = grid.interior_faces(axis)
        h = grid.h[axis]
        diff = (u.values[right] - u.values[left]) / h
        total += float(np.sum(diff ** 2) * grid.face_area(axis) * h)
    return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# 1D closed-form oracles
# ---------------------------------------------------------------------------


def _oracle_coefficients(a0: VectorField, ai: list[VectorField]):
    a_form: ScalarForm = Const(0.0)
    b_form: ScalarForm = a0.components[0]
    for f in ai:
        c = f.components[0]
        a_form = add(a_form, mul(c, c))
        b_form = add(b_form, mul(Const(0.5), mul(c, c.grad(0))))
    return a_form, b_form


def _quad_nodes(origin: float, length: float, panels: int):
    """Panel edges and midpoints for composite Simpson."""
    edges = origin + np.arange(panels + 1) * (length / panels)
    mids = origin + (np.arange(panels) + 0.5) * (length / panels)
    return edges, mids


def _cumulative_simpson(f_edges, f_mids, delta):
    """Cumulative integral at panel edges from edge and midpoint samples."""
    panel = (delta / 6.0) * (f_edges[:-1] + 4.0 * f_mids + f_edges[1:])
    out = np.empty(len(f_edges))
    out[0] = 0.0
    np.cumsum(panel, out=out[1:])
    return out


def _half_panel(f_edges, f_mids, delta):
    """Integral over the first half panel from the same three samples."""
    return (delta / 24.0) * (5.0 * f_edges[:-1] + 8.0 * f_mids - f_edges[1:])


def _simpson_on_edges(values, delta):
    """Composite Simpson treating consecutive edge triples as panels."""
    if len(values) % 2 == 0:
        raise ValueError("need an odd number of edge samples")
    return float(
        (delta / 3.0)
        * (values[0] + values[-1] + 4.0 * np.sum(values[1:-1:2]) + 2.0 * np.sum(values[2:-2:2]))
    )


def _resolve_quad(grid: Grid, quad_n):
    n = grid.n[0]
    if quad_n is None:
        quad_n = ORACLE_QUAD_FACTOR * n
    quad_n = int(quad_n)
    if quad_n % (2 * n) != 0:
        raise ValueError(f"quad_n must be a multiple of 2*n = {2 * n}, got {quad_n}")
    return quad_n


def oracle_1d_circle(drift: VectorField, a0: VectorField, ai: list[VectorField],
                     eps: float, grid: Grid, quad_n: int | None = None):
    """Closed-form stationary density on the circle; returns (u, C_eps).

    ``u`` holds cell-center samples on ``grid``.  Requires B > 0 on the
    whole circle and positive total diffusion a.  The returned constant
    satisfies C_eps = -int (B + eps^2 b) u, which is re-verified against
    the quadrature before returning.
    """
    if not isinstance(grid.kind, Circle):
        raise ValueError("circle oracle needs a Circle grid")
    quad = _resolve_quad(grid, quad_n)
    L = grid.kind.length
    delta = L / quad
    edges, mids = _quad_nodes(0.0, L, quad)

    a_form, b_form = _oracle_coefficients(a0, ai)
    b_edges, b_mids = drift.components[0](edges), drift.components[0](mids)
    if np.any(b_edges <= 0.0) or np.any(b_mids <= 0.0):
        raise PositivityError("circle oracle requires B > 0 everywhere")
    a_edges, a_mids = a_form(edges), a_form(mids)
    if np.any(a_edges <= 0.0) or np.any(a_mids <= 0.0):
        raise PositivityError("total diffusion a must be positive")
    corr_edges, corr_mids = b_form(edges), b_form(mids)
    e2 = eps * eps
    psi_edges = 2.0 * (b_edges + e2 * corr_edges) / (e2 * a_edges)
    psi_mids = 2.0 * (b_mids + e2 * corr_mids) / (e2 * a_mids)

    phi = _cumulative_simpson(psi_edges, psi_mids, delta)
    phi_mid = phi[:-1] + _half_panel(psi_edges, psi_mids, delta)
    phi_total = phi[-1]
    # |1 - e^{Phi(L)}| < 1e-14 iff |Phi(L)| < ~1e-14; test the exponent to
    # avoid overflowing e^{Phi(L)} at small eps
    if abs(phi_total) < 1e-14:
        raise DegenerateError("periodic oracle is singular: net drift integral vanishes")

    # backward recurrence for J1 (exponents scaled to the left panel edge)
    decay = np.exp(-(phi[1:] - phi[:-1]))
    local = (delta / 6.0) * (1.0 + 4.0 * np.exp(-(phi_mid - phi[:-1])) + decay)
    j1 = np.zeros(quad + 1)
    for j in range(quad - 1, -1, -1):
        j1[j] = local[j] + decay[j] * j1[j + 1]

    # forward cumulative of e^{-Phi} for the wrap term J2
    exp_neg = np.exp(-phi)
    exp_neg_mid = np.exp(-phi_mid)
    big_e = _cumulative_simpson(exp_neg, exp_neg_mid, delta)
    j2 = np.exp(phi - phi_total) * big_e

    w_unnorm = j1 + j2
    u_unnorm = w_unnorm / a_edges
    z = _simpson_on_edges(u_unnorm, delta)
    scale = 1.0 / z
    c_eps = -0.5 * e2 * scale * -np.expm1(-phi_total)

    u_edges = scale * u_unnorm
    check = _simpson_on_edges((b_edges + e2 * corr_edges) * u_edges, delta)
    # Simpson's panel error on the boundary-layer kernels scales like
    # (psi delta)^4 / 2880; allow an order of magnitude of headroom
    psi_max = max(float(np.max(np.abs(psi_edges))), float(np.max(np.abs(psi_mids))))
    quad_tol = max(1e-10, 10.0 * (psi_max * delta) ** 4 / 2880.0)
    if abs(c_eps + check) > quad_tol * max(abs(c_eps), 1.0):
        raise SolveError(f"oracle self-check failed: C={c_eps} vs -int (B+eps^2 b) u = {-check}")

    stride = quad // grid.n[0]
    centers_idx = stride * np.arange(grid.n[0]) + stride // 2
    return u_edges[centers_idx], float(c_eps)


def oracle_1d_interval(drift: VectorField, a0: VectorField, ai: list[VectorField],
                       eps: float, grid: Grid, quad_n: int | None = None) -> np.ndarray:
    """Closed-form stationary density on an interval with reflecting ends.

    The stationary flux constant is zero, so u = e^Phi / (Z a) with the
    same Phi as the circle case.  Requires B to vanish at both endpoints
    (compatibility with the zero normal flux of the reflecting SDE).
    """
    if not isinstance(grid.kind, Interval):
        raise ValueError("interval oracle needs an Interval grid")
    kind = grid.kind
    ends = np.array([[kind.a], [kind.b]])
    b_ends = drift.components[0](ends)
    if np.max(np.abs(b_ends)) > 1e-12:
        raise BoundaryError(f"drift must vanish at the endpoints, got B(a), B(b) = {tuple(b_ends)}")
    quad = _resolve_quad(grid, quad_n)
    L = kind.lengths[0]
    delta = L / quad
    edges, mids = _quad_nodes(kind.a, L, quad)

    a_form, b_form = _oracle_coefficients(a0, ai)
    a_edges, a_mids = a_form(edges), a_form(mids)
    if np.any(a_edges <= 0.0) or np.any(a_mids <= 0.0):
        raise PositivityError("total diffusion a must be positive")
    e2 = eps * eps
    psi_edges = 2.0 * (drift.components[0](edges) + e2 * b_form(edges)) / (e2 * a_edges)
    psi_mids = 2.0 * (drift.components[0](mids) + e2 * b_form(mids)) / (e2 * a_mids)
    phi = _cumulative_simpson(psi_edges, psi_mids, delta)
    phi -= phi.max()
    u_unnorm = np.exp(phi) / a_edges
    z = _simpson_on_edges(u_unnorm, delta)
    u_edges = u_unnorm / z
    stride = quad // grid.n[0]
    centers_idx = stride * np.arange(grid.n[0]) + stride // 2
    return u_edges[centers_idx]
