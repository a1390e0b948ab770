"""Structured conforming triangulations of the two-domain geometry.

The computational domain is a pair of unit squares, ``Omega_1 = [0,1] x [0,1]``
and ``Omega_2 = [0,1] x [-1,0]``, glued along the interface segment
``Gamma = {(x, 0) : 0 <= x <= 1}``.  Interface nodes are shared between the
two subdomains (one global node id per interface point), so traces match
exactly by construction.

Each unit square is divided into ``n x n`` cells and every cell is split
into two triangles by its SW-NE diagonal, which gives a deterministic,
quasi-uniform mesh with longest edge ``sqrt(2)/n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

# Node classification tags.
INTERIOR_1 = 1
INTERIOR_2 = 2
DIRICHLET = 3
INTERFACE = 4

TAG_NAMES = {
    INTERIOR_1: "interior1",
    INTERIOR_2: "interior2",
    DIRICHLET: "dirichlet",
    INTERFACE: "interface",
}


@dataclass(eq=False)
class Mesh:
    """Immutable two-domain triangulation.

    Attributes
    ----------
    nodes : (N, 2) float array of node coordinates.
    triangles : (M, 3) int array of node triples, counterclockwise.
    tri_subdomain : (M,) int array, 1 or 2.
    node_tags : (N,) int array of INTERIOR_1/INTERIOR_2/DIRICHLET/INTERFACE.
    interface_edges : (nI, 2) int array of node pairs on Gamma, ordered by x.
    h : nominal mesh size (longest triangle edge, sqrt(2)/n).
    n : cells per unit side length.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    tri_subdomain: np.ndarray
    node_tags: np.ndarray
    interface_edges: np.ndarray
    h: float
    n: int

    # Internal caches (assembly spaces attach here; see assembly module).
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    def triangles_of(self, subdomain: int) -> np.ndarray:
        """Triangle connectivity restricted to one subdomain."""
        return self.triangles[self.tri_subdomain == subdomain]

    def signed_areas(self) -> np.ndarray:
        """Signed area of every triangle (positive for CCW orientation)."""
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def build_two_domain_mesh(n: int) -> Mesh:
    """Build the structured two-domain mesh with ``n`` cells per unit length.

    Nodes are laid out row-major on the (n+1) x (2n+1) grid covering
    ``[0,1] x [-1,1]``; row ``n`` (y = 0) is the shared interface.

    Raises
    ------
    ValueError
        If ``n < 1``.
    """
    if n < 1:
        raise ValueError(f"cells-per-unit-length must be >= 1, got {n}")

    cols = n + 1
    rows = 2 * n + 1
    jj, ii = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    x = ii.ravel() / n
    y = (jj.ravel() - n) / n
    nodes = np.column_stack([x, y])

    # Two triangles per cell, split along the SW-NE diagonal.  Both keep
    # counterclockwise orientation: (SW, SE, NE) and (SW, NE, NW).
    ci, cj = np.meshgrid(np.arange(n), np.arange(2 * n), indexing="ij")
    ci = ci.ravel()  # column of the cell
    cj = cj.ravel()  # row of the cell
    sw = cj * cols + ci
    se = sw + 1
    nw = sw + cols
    ne = nw + 1
    lower = np.column_stack([sw, se, ne])
    upper = np.column_stack([sw, ne, nw])
    triangles = np.empty((2 * len(sw), 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper
    cell_sub = np.where(cj < n, 2, 1)
    tri_subdomain = np.repeat(cell_sub, 2)

    # Tags: interface wins on y = 0 (including the two corner nodes that
    # also sit on the lateral outer boundaries); everything else on the
    # outer boundary is Dirichlet.
    row = jj.ravel()
    col = ii.ravel()
    tags = np.where(row > n, INTERIOR_1, INTERIOR_2)
    on_outer = (col == 0) | (col == n) | (row == 0) | (row == rows - 1)
    tags[on_outer] = DIRICHLET
    tags[row == n] = INTERFACE
    node_tags = tags.astype(np.int64)

    iface_start = n * cols + np.arange(n)
    interface_edges = np.column_stack([iface_start, iface_start + 1])

    return Mesh(
        nodes=nodes,
        triangles=triangles,
        tri_subdomain=tri_subdomain,
        node_tags=node_tags,
        interface_edges=interface_edges.astype(np.int64),
        h=np.sqrt(2.0) / n,
        n=n,
    )


@dataclass(eq=False)
class DofMap:
    """Compact DOF numbering of one subdomain's closed node set.

    Covers interior, interface and Dirichlet nodes of the closed subdomain;
    interface nodes appear in the maps of both subdomains.  ``dirichlet``
    is the constrained set: every node on the closure of the outer
    boundary, which includes the two interface endpoints at x = 0 and
    x = 1 (they keep the interface tag and stay in ``interface`` for trace
    quadrature, but the boundary condition pins their values).
    """

    subdomain: int
    to_global: np.ndarray      # local dof -> global node id
    of_global: np.ndarray      # global node id -> local dof, -1 if absent
    interface: np.ndarray      # local dofs on Gamma, ordered by x
    dirichlet: np.ndarray      # constrained dofs (outer-boundary closure)

    @property
    def ndof(self) -> int:
        return self.to_global.shape[0]


def dof_maps(mesh: Mesh) -> tuple[DofMap, DofMap]:
    """Per-subdomain DOF maps (subdomain 1, subdomain 2)."""
    maps = []
    row = np.round(mesh.nodes[:, 1] * mesh.n).astype(np.int64) + mesh.n
    for sub in (1, 2):
        member = (row >= mesh.n) if sub == 1 else (row <= mesh.n)
        to_global = np.flatnonzero(member)
        of_global = np.full(mesh.num_nodes, -1, dtype=np.int64)
        of_global[to_global] = np.arange(len(to_global))
        tags = mesh.node_tags[to_global]
        interface = np.flatnonzero(tags == INTERFACE)
        # Order interface dofs by x coordinate along Gamma.
        xi = mesh.nodes[to_global[interface], 0]
        interface = interface[np.argsort(xi, kind="stable")]
        xi = mesh.nodes[to_global[interface], 0]
        # Constrain the full outer-boundary closure: leaving the interface
        # endpoints free leaks flux through the corner basis functions and
        # costs an O(h^2) consistency error that dominates the field error.
        endpoints = interface[(xi == 0.0) | (xi == 1.0)]
        dirichlet = np.sort(
            np.concatenate([np.flatnonzero(tags == DIRICHLET), endpoints])
        )
        maps.append(
            DofMap(
                subdomain=sub,
                to_global=to_global,
                of_global=of_global,
                interface=interface,
                dirichlet=dirichlet,
            )
        )
    return maps[0], maps[1]


def dump_mesh(mesh: Mesh, stream: TextIO) -> None:
    """Plain-text node/triangle listing for debugging."""
    stream.write(f"# nodes {mesh.num_nodes}\n")
    for i, (x, y) in enumerate(mesh.nodes):
        stream.write(f"{i} {x!r} {y!r} {TAG_NAMES[mesh.node_tags[i]]}\n")
    stream.write(f"# triangles {mesh.num_triangles}\n")
    for k, tri in enumerate(mesh.triangles):
        stream.write(
            f"{k} {tri[0]} {tri[1]} {tri[2]} sub={mesh.tri_subdomain[k]}\n"
        )
    stream.write(f"# interface_edges {len(mesh.interface_edges)}\n")
    for a, b in mesh.interface_edges:
        stream.write(f"{a} {b}\n")
