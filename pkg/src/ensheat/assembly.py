"""P1 finite element assembly on the two-domain mesh.

Provides consistent mass, variable-coefficient stiffness, interface trace
operators and load vectors per subdomain, plus discrete L2 / H1-seminorm /
interface norms and quadrature-based errors against smooth reference
solutions.

Coefficients and forcing are callables ``f(x, y, t)`` that broadcast over
numpy arrays.  Stiffness and load use a 3-point degree-2 triangle rule;
error norms use a 6-point degree-4 rule so quadrature does not pollute
measured convergence rates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import DofMap, Mesh, dof_maps
from .sparse import csr_from_triplets


class CoefficientPositivityError(ValueError):
    """A diffusion coefficient sample was nonpositive at a quadrature point."""


class EmptyInterfaceError(ValueError):
    """The mesh exposes no interface edges."""


@dataclass(frozen=True)
class QuadratureRule:
    """Barycentric triangle quadrature; weights sum to one (area factor applied separately)."""

    points: np.ndarray   # (q, 3) barycentric coordinates
    weights: np.ndarray  # (q,)
    degree: int          # polynomial degree integrated exactly


# Edge-midpoint rule, exact for quadratics.
TRI_RULE_DEG2 = QuadratureRule(
    points=np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
    weights=np.array([1.0, 1.0, 1.0]) / 3.0,
    degree=2,
)

# Six-point rule, exact for quartics (two symmetric orbits).
_A1, _W1 = 0.445948490915965, 0.223381589678011
_A2, _W2 = 0.091576213509771, 0.109951743655322
TRI_RULE_DEG4 = QuadratureRule(
    points=np.array(
        [
            [_A1, _A1, 1.0 - 2.0 * _A1],
            [_A1, 1.0 - 2.0 * _A1, _A1],
            [1.0 - 2.0 * _A1, _A1, _A1],
            [_A2, _A2, 1.0 - 2.0 * _A2],
            [_A2, 1.0 - 2.0 * _A2, _A2],
            [1.0 - 2.0 * _A2, _A2, _A2],
        ]
    ),
    weights=np.array([_W1, _W1, _W1, _W2, _W2, _W2]),
    degree=4,
)

# Reference P1 local mass matrix: integral of lambda_a * lambda_b over a
# triangle equals area * _MASS_REF[a, b].
_MASS_REF = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def p1_local_mass(coords: np.ndarray) -> np.ndarray:
    """Exact 3x3 P1 mass matrix of a single triangle given (3, 2) coords."""
    area = 0.5 * abs(
        (coords[1, 0] - coords[0, 0]) * (coords[2, 1] - coords[0, 1])
        - (coords[1, 1] - coords[0, 1]) * (coords[2, 0] - coords[0, 0])
    )
    return area * _MASS_REF


def p1_local_stiffness(coords: np.ndarray, coeff: float = 1.0) -> np.ndarray:
    """3x3 P1 stiffness matrix for a constant coefficient on one triangle."""
    x, y = coords[:, 0], coords[:, 1]
    b = np.array([y[1] - y[2], y[2] - y[0], y[0] - y[1]])
    c = np.array([x[2] - x[1], x[0] - x[2], x[1] - x[0]])
    area = 0.5 * abs(b[0] * c[1] - b[1] * c[0])
    g = np.column_stack([b, c]) / (2.0 * area)
    return coeff * area * (g @ g.T)


def p1_edge_mass(length: float) -> np.ndarray:
    """2x2 P1 mass matrix on a segment of given length."""
    return length * np.array([[1.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 3.0]])


class SubdomainSpace:
    """Precomputed P1 data for one subdomain: dof map, element geometry,
    cached operators.  Instances are immutable after construction and are
    shared through ``space(mesh, subdomain)``.
    """

    def __init__(self, mesh: Mesh, subdomain: int):
        if subdomain not in (1, 2):
            raise ValueError(f"subdomain must be 1 or 2, got {subdomain}")
        self.mesh = mesh
        self.subdomain = subdomain
        dm1, dm2 = dof_maps(mesh)
        self.dofmap: DofMap = dm1 if subdomain == 1 else dm2
        self._other_dofmap: DofMap = dm2 if subdomain == 1 else dm1

        tris_global = mesh.triangles_of(subdomain)
        self.tris = self.dofmap.of_global[tris_global]          # (ntri, 3) local dofs
        self.coords = mesh.nodes[tris_global]                   # (ntri, 3, 2)
        x, y = self.coords[..., 0], self.coords[..., 1]
        # Gradient coefficients of the barycentric basis: grad(lambda_a) =
        # (b_a, c_a) / (2 area) with the classic cyclic differences.
        b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
        c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
        self.area = 0.5 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
        self.gradx = b / (2.0 * self.area[:, None])
        self.grady = c / (2.0 * self.area[:, None])

        self.ndof = self.dofmap.ndof
        self.node_xy = mesh.nodes[self.dofmap.to_global]
        self._ops: dict = {}

    # -- quadrature geometry -------------------------------------------------

    def quad_points(self, rule: QuadratureRule) -> tuple[np.ndarray, np.ndarray]:
        """Physical quadrature points, two (ntri, q) arrays."""
        lam = rule.points  # (q, 3)
        qx = np.einsum("tk,qk->tq", self.coords[..., 0], lam)
        qy = np.einsum("tk,qk->tq", self.coords[..., 1], lam)
        return qx, qy

    def _coeff_at_quad(self, coeff, t: float, rule: QuadratureRule) -> np.ndarray:
        qx, qy = self.quad_points(rule)
        vals = np.broadcast_to(np.asarray(coeff(qx, qy, t), dtype=np.float64), qx.shape)
        return vals

    # -- operators -----------------------------------------------------------

    def mass(self) -> sp.csr_array:
        """Consistent P1 mass matrix (exact integration)."""
        if "mass" not in self._ops:
            data = self.area[:, None, None] * _MASS_REF[None, :, :]
            self._ops["mass"] = self._scatter(data)
        return self._ops["mass"]

    def stiffness(self, coeff, t: float = 0.0, rule: QuadratureRule = TRI_RULE_DEG2) -> sp.csr_array:
        """P1 stiffness with the coefficient sampled at quadrature points.

        Raises CoefficientPositivityError if any coefficient sample is
        nonpositive.
        """
        vals = self._coeff_at_quad(coeff, t, rule)
        if np.any(vals <= 0.0):
            bad = np.argwhere(vals <= 0.0)[0]
            raise CoefficientPositivityError(
                f"coefficient nonpositive at quadrature point "
                f"(triangle {bad[0]}, point {bad[1]}, t={t})"
            )
        cavg = vals @ rule.weights
        gg = (
            np.einsum("ta,tb->tab", self.gradx, self.gradx)
            + np.einsum("ta,tb->tab", self.grady, self.grady)
        )
        data = (cavg * self.area)[:, None, None] * gg
        return self._scatter(data)

    def unit_stiffness(self) -> sp.csr_array:
        """Stiffness with coefficient one (cached; used for norms)."""
        if "k1" not in self._ops:
            self._ops["k1"] = self.stiffness(lambda x, y, t: np.ones_like(x))
        return self._ops["k1"]

    def load(self, f, t: float, rule: QuadratureRule = TRI_RULE_DEG2) -> np.ndarray:
        """Quadrature approximation of the load vector (f(., t), phi_k)."""
        qx, qy = self.quad_points(rule)
        fv = np.broadcast_to(np.asarray(f(qx, qy, t), dtype=np.float64), qx.shape)
        # P1 basis values at barycentric points are the coordinates themselves.
        contrib = np.einsum("tq,q,qa->ta", fv, rule.weights, rule.points) * self.area[:, None]
        out = np.zeros(self.ndof)
        np.add.at(out, self.tris, contrib)
        return out

    def interface_operators(self) -> tuple[sp.csr_array, sp.csr_array]:
        """(B_own, B_cross): interface mass on the own trace, and the same
        trace mass with columns indexed by the other subdomain's dofs.

        On matching traces both matrices carry identical edge-mass entries;
        they differ only in column indexing.
        """
        key = "iface"
        if key in self._ops:
            return self._ops[key]
        edges = self.mesh.interface_edges
        if len(edges) == 0:
            raise EmptyInterfaceError("mesh has no interface edges")
        p = self.mesh.nodes[edges[:, 0]]
        q = self.mesh.nodes[edges[:, 1]]
        length = np.linalg.norm(q - p, axis=1)
        own = self.dofmap.of_global[edges]            # (nE, 2)
        other = self._other_dofmap.of_global[edges]   # (nE, 2)
        loc = np.array([[1.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 3.0]])
        data = length[:, None, None] * loc[None, :, :]
        rows = np.repeat(own, 2, axis=1).ravel()
        cols_own = np.tile(own, (1, 2)).ravel()
        cols_other = np.tile(other, (1, 2)).ravel()
        vals = data.reshape(len(edges), 4).ravel()
        b_own = csr_from_triplets(self.ndof, rows, cols_own, vals)
        b_cross = sp.coo_array(
            (vals, (rows, cols_other)), shape=(self.ndof, self._other_dofmap.ndof)
        ).tocsr()
        b_cross.sum_duplicates()
        b_cross.sort_indices()
        self._ops[key] = (b_own, b_cross)
        return self._ops[key]

    def _scatter(self, data: np.ndarray) -> sp.csr_array:
        """Assemble (ntri, 3, 3) local blocks into a global CSR matrix."""
        rows = np.repeat(self.tris, 3, axis=1).ravel()
        cols = np.tile(self.tris, (1, 3)).ravel()
        return csr_from_triplets(self.ndof, rows, cols, data.ravel())

    # -- matrix-free stiffness application ------------------------------------

    def apply_stiffness(self, coeff, t: float, u: np.ndarray,
                        rule: QuadratureRule = TRI_RULE_DEG2) -> np.ndarray:
        """K(coeff, t) @ u without assembling the matrix.

        ``u`` may be (ndof,) or (ndof, J); the element loop is vectorized
        over triangles with the coefficient evaluated at quadrature points,
        so no per-sample matrix is ever formed.
        """
        vals = self._coeff_at_quad(coeff, t, rule)
        cavg = vals @ rule.weights
        single = u.ndim == 1
        U = u[:, None] if single else u
        out = self._apply_stiffness_cavg(cavg[:, None], U)
        return out[:, 0] if single else out

    def coeff_averages(self, coeffs, t: float,
                       rule: QuadratureRule = TRI_RULE_DEG2) -> np.ndarray:
        """Per-triangle quadrature averages for a list of coefficient fields."""
        qx, qy = self.quad_points(rule)
        cavg = np.empty((len(self.tris), len(coeffs)))
        for j, coeff in enumerate(coeffs):
            vals = np.broadcast_to(np.asarray(coeff(qx, qy, t), dtype=np.float64), qx.shape)
            cavg[:, j] = vals @ rule.weights
        return cavg

    def apply_stiffness_batch(self, cavg: np.ndarray, U: np.ndarray) -> np.ndarray:
        """Per-column stiffness application with per-column coefficients.

        ``cavg`` is (ntri, J) of precomputed per-triangle coefficient
        averages (see ``coeff_averages``); column j of ``U`` is multiplied
        by the stiffness operator with column j's coefficient.
        """
        return self._apply_stiffness_cavg(cavg, U)

    def _apply_stiffness_cavg(self, cavg: np.ndarray, U: np.ndarray) -> np.ndarray:
        ux = np.einsum("ta,taj->tj", self.gradx, U[self.tris])
        uy = np.einsum("ta,taj->tj", self.grady, U[self.tris])
        scale = cavg * self.area[:, None]
        out = np.zeros_like(U)
        for a in range(3):
            np.add.at(
                out,
                self.tris[:, a],
                scale * (self.gradx[:, a:a + 1] * ux + self.grady[:, a:a + 1] * uy),
            )
        return out

    # -- nodal interpolation ---------------------------------------------------

    def interpolate(self, f, t: float | None = None) -> np.ndarray:
        """Nodal interpolant; ``f(x, y)`` or ``f(x, y, t)`` when t given."""
        x, y = self.node_xy[:, 0], self.node_xy[:, 1]
        vals = f(x, y) if t is None else f(x, y, t)
        return np.broadcast_to(np.asarray(vals, dtype=np.float64), x.shape).copy()

    # -- norms and errors -------------------------------------------------------

    def norm_l2(self, v: np.ndarray) -> float:
        v = self._check_vec(v)
        return float(np.sqrt(max(v @ (self.mass() @ v), 0.0)))

    def seminorm_h1(self, v: np.ndarray) -> float:
        v = self._check_vec(v)
        return float(np.sqrt(max(v @ (self.unit_stiffness() @ v), 0.0)))

    def norm_interface(self, v: np.ndarray) -> float:
        v = self._check_vec(v)
        b_own, _ = self.interface_operators()
        return float(np.sqrt(max(v @ (b_own @ v), 0.0)))

    def _check_vec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.ndof,):
            raise ValueError(f"expected vector of length {self.ndof}, got {v.shape}")
        return v

    def error_l2(self, v: np.ndarray, exact, t: float,
                 rule: QuadratureRule = TRI_RULE_DEG4) -> float:
        """L2 norm of (v_h - exact) by elementwise quadrature."""
        v = self._check_vec(v)
        qx, qy = self.quad_points(rule)
        uh = np.einsum("ta,qa->tq", v[self.tris], rule.points)
        ue = np.broadcast_to(np.asarray(exact(qx, qy, t), dtype=np.float64), qx.shape)
        err2 = ((uh - ue) ** 2 @ rule.weights) * self.area
        return float(np.sqrt(err2.sum()))

    def error_h1(self, v: np.ndarray, exact_grad, t: float,
                 rule: QuadratureRule = TRI_RULE_DEG4) -> float:
        """L2 norm of (grad v_h - exact_grad) by elementwise quadrature."""
        v = self._check_vec(v)
        qx, qy = self.quad_points(rule)
        vx = np.einsum("ta,ta->t", self.gradx, v[self.tris])[:, None]
        vy = np.einsum("ta,ta->t", self.grady, v[self.tris])[:, None]
        gx, gy = exact_grad(qx, qy, t)
        gx = np.broadcast_to(np.asarray(gx, dtype=np.float64), qx.shape)
        gy = np.broadcast_to(np.asarray(gy, dtype=np.float64), qx.shape)
        err2 = (((vx - gx) ** 2 + (vy - gy) ** 2) @ rule.weights) * self.area
        return float(np.sqrt(err2.sum()))


def space(mesh: Mesh, subdomain: int) -> SubdomainSpace:
    """Shared SubdomainSpace for (mesh, subdomain); meshes are immutable."""
    key = ("space", subdomain)
    if key not in mesh._cache:
        mesh._cache[key] = SubdomainSpace(mesh, subdomain)
    return mesh._cache[key]


# -- module-level operation surface -------------------------------------------


def assemble_mass(mesh: Mesh, subdomain: int) -> sp.csr_array:
    return space(mesh, subdomain).mass()


def assemble_stiffness(mesh: Mesh, subdomain: int, coeff, t: float = 0.0) -> sp.csr_array:
    return space(mesh, subdomain).stiffness(coeff, t)


def assemble_interface_operators(mesh: Mesh, subdomain: int) -> tuple[sp.csr_array, sp.csr_array]:
    return space(mesh, subdomain).interface_operators()


def assemble_load(mesh: Mesh, subdomain: int, f, t: float) -> np.ndarray:
    return space(mesh, subdomain).load(f, t)


def apply_dirichlet(matrix: sp.csr_array, rhs: np.ndarray, mesh: Mesh,
                    subdomain: int, g, t: float) -> tuple[sp.csr_array, np.ndarray]:
    """Symmetric elimination of Dirichlet rows and columns.

    Column contributions are moved to the right-hand side, the eliminated
    rows/columns are replaced by identity, and ``rhs[k] = g(x_k, t)`` on
    each Dirichlet dof.  Applying the operation twice equals applying it
    once.
    """
    sp_ = space(mesh, subdomain)
    dofs = sp_.dofmap.dirichlet
    values = _dirichlet_values(sp_, g, t)
    A_bc, col_block = eliminate_dirichlet(matrix, dofs)
    rhs_bc = constrain_rhs(rhs, dofs, values, col_block)
    return A_bc, rhs_bc


def _dirichlet_values(sp_: SubdomainSpace, g, t: float) -> np.ndarray:
    xy = sp_.node_xy[sp_.dofmap.dirichlet]
    if np.isscalar(g) or isinstance(g, (int, float)):
        return np.full(len(xy), float(g))
    return np.broadcast_to(
        np.asarray(g(xy[:, 0], xy[:, 1], t), dtype=np.float64), (len(xy),)
    ).copy()


def eliminate_dirichlet(matrix: sp.csr_array, dofs: np.ndarray) -> tuple[sp.csr_array, sp.csr_array]:
    """(constrained matrix, eliminated column block A[:, dofs]).

    The column block retains only rows that stay free, so the right-hand
    side update ``rhs -= col_block @ g`` is exactly the symmetric
    elimination and repeated application is a no-op.
    """
    n = matrix.shape[0]
    coo = matrix.tocoo()
    is_d = np.zeros(n, dtype=bool)
    is_d[dofs] = True
    col_keep = (~is_d[coo.row]) & is_d[coo.col]
    col_block = sp.coo_array(
        (coo.data[col_keep], (coo.row[col_keep], coo.col[col_keep])), shape=(n, n)
    ).tocsr()
    keep = (~is_d[coo.row]) & (~is_d[coo.col])
    rows = np.concatenate([coo.row[keep], dofs])
    cols = np.concatenate([coo.col[keep], dofs])
    vals = np.concatenate([coo.data[keep], np.ones(len(dofs))])
    return csr_from_triplets(n, rows, cols, vals), col_block


def constrain_rhs(rhs: np.ndarray, dofs: np.ndarray, values: np.ndarray,
                  col_block: sp.csr_array | None = None) -> np.ndarray:
    """Apply Dirichlet data to a right-hand side (vector or column block)."""
    out = np.array(rhs, dtype=np.float64, copy=True)
    if col_block is not None and len(dofs):
        g_full = np.zeros(col_block.shape[1])
        g_full[dofs] = values
        shift = col_block @ g_full
        out -= shift[:, None] if out.ndim == 2 else shift
    out[dofs] = values[:, None] if out.ndim == 2 else values
    return out


def norm_l2(mesh: Mesh, subdomain: int, v: np.ndarray) -> float:
    return space(mesh, subdomain).norm_l2(v)


def seminorm_h1(mesh: Mesh, subdomain: int, v: np.ndarray) -> float:
    return space(mesh, subdomain).seminorm_h1(v)


def norm_interface(mesh: Mesh, subdomain: int, v: np.ndarray) -> float:
    return space(mesh, subdomain).norm_interface(v)


def norm_l2_pair(mesh: Mesh, v1: np.ndarray, v2: np.ndarray) -> float:
    """Product-space L2 norm: sqrt of the sum of squared subdomain norms."""
    return float(np.sqrt(norm_l2(mesh, 1, v1) ** 2 + norm_l2(mesh, 2, v2) ** 2))


def error_l2(mesh: Mesh, subdomain: int, v: np.ndarray, exact, t: float) -> float:
    return space(mesh, subdomain).error_l2(v, exact, t)


def error_h1(mesh: Mesh, subdomain: int, v: np.ndarray, exact_grad, t: float) -> float:
    return space(mesh, subdomain).error_h1(v, exact_grad, t)
