"""Oriented 2-complexes built from edge lists: incidence matrices and Hodge Laplacians.

Graphs are stored with a canonical orientation (edge tail < head under the
vertex ordering, triangles in their ascending-vertex class) so that every
construction is deterministic.  The orientation itself is arbitrary and
nothing downstream depends on the convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ContractError, StructuralError


@dataclass(frozen=True)
class OrientedComplex:
    """A graph with oriented edges, its 3-cliques as oriented triangles,
    and the signed incidence matrices between the three levels.

    ``B1`` is vertex-by-edge (column: -1 at the tail, +1 at the head),
    ``B2`` is edge-by-triangle (column: boundary of the triangle's cycle).
    Both are small signed integer matrices; ``B1 @ B2 == 0`` exactly.
    """

    num_vertices: int
    edges: tuple[tuple[int, int], ...]
    triangles: tuple[tuple[int, int, int], ...]
    B1: np.ndarray
    B2: np.ndarray

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    def validate(self, canonical: bool = True) -> None:
        """Check incidence-structure invariants; raises StructuralError.

        With ``canonical=False`` the tail<head convention is not enforced,
        which permits deliberately re-oriented copies used in invariance
        checks.
        """
        if self.B1.shape != (self.num_vertices, self.num_edges):
            raise StructuralError("B1 shape does not match vertex/edge counts")
        if self.B2.shape != (self.num_edges, self.num_triangles):
            raise StructuralError("B2 shape does not match edge/triangle counts")
        seen = set()
        for tail, head in self.edges:
            if tail == head:
                raise StructuralError(f"self-loop on vertex {tail}")
            if canonical and not tail < head:
                raise StructuralError(f"edge ({tail}, {head}) not canonically oriented")
            key = frozenset((tail, head))
            if key in seen:
                raise StructuralError(f"duplicate edge {{{tail}, {head}}}")
            seen.add(key)
        for j, (tail, head) in enumerate(self.edges):
            col = self.B1[:, j]
            if col[tail] != -1 or col[head] != 1 or np.count_nonzero(col) != 2:
                raise StructuralError(f"B1 column {j} is not a (-1, +1) edge boundary")
        for t in range(self.num_triangles):
            col = self.B2[:, t]
            if np.count_nonzero(col) != 3 or not np.all(np.isin(col[col != 0], (-1, 1))):
                raise StructuralError(f"B2 column {t} is not a signed triangle boundary")
        prod = self.B1.astype(np.int64) @ self.B2.astype(np.int64)
        if np.any(prod != 0):
            raise StructuralError("B1 @ B2 != 0")


@dataclass(frozen=True)
class LabeledComplex:
    """An oriented complex with per-vertex and per-edge feature matrices and a class label.

    Features are stored dimension-major: ``vertex_features`` is (D_v, N_v)
    and ``edge_features`` is (D_e, N_e); either may have zero rows.  Edge
    feature signs follow the stored edge orientation.
    """

    complex: OrientedComplex
    vertex_features: np.ndarray
    edge_features: np.ndarray
    label: int

    @property
    def num_vertex_dims(self) -> int:
        return self.vertex_features.shape[0]

    @property
    def num_edge_dims(self) -> int:
        return self.edge_features.shape[0]

    def validate(self, canonical: bool = True) -> None:
        self.complex.validate(canonical=canonical)
        if self.vertex_features.shape[1:] != (self.complex.num_vertices,):
            raise StructuralError("vertex_features must be (D_v, N_v)")
        if self.edge_features.shape[1:] != (self.complex.num_edges,):
            raise StructuralError("edge_features must be (D_e, N_e)")
        if self.num_vertex_dims == 0 and self.num_edge_dims == 0:
            raise StructuralError("a labeled complex needs features on at least one domain")


def build_complex(
    num_vertices: int,
    edge_list,
    detect_triangles: bool = True,
) -> OrientedComplex:
    """Build a canonically oriented complex from an unordered edge list.

    Edges are deduplicated, oriented tail < head and sorted
    lexicographically; triangles are all 3-cliques, oriented in the
    ascending-vertex class.  ``detect_triangles=False`` leaves the triangle
    level empty (B2 has zero columns).

    Parameters
    ----------
    num_vertices : int
        Number of vertices; edge endpoints must lie in [0, num_vertices).
    edge_list : iterable of (int, int)
        Unordered vertex pairs.  Duplicates (in either order) are merged.
    detect_triangles : bool
        Whether to enumerate 3-cliques and assemble B2.

    Raises
    ------
    StructuralError
        On self-loops or out-of-range vertex indices.
    """
    if num_vertices < 0:
        raise StructuralError("num_vertices must be non-negative")
    canon = set()
    for u, v in edge_list:
        u, v = int(u), int(v)
        if u == v:
            raise StructuralError(f"self-loop on vertex {u}")
        if not (0 <= u < num_vertices and 0 <= v < num_vertices):
            raise StructuralError(f"edge ({u}, {v}) outside vertex range [0, {num_vertices})")
        canon.add((u, v) if u < v else (v, u))
    edges = tuple(sorted(canon))
    num_edges = len(edges)
    edge_index = {e: j for j, e in enumerate(edges)}

    B1 = np.zeros((num_vertices, num_edges), dtype=np.int8)
    for j, (tail, head) in enumerate(edges):
        B1[tail, j] = -1
        B1[head, j] = 1

    triangles: tuple[tuple[int, int, int], ...] = ()
    if detect_triangles and num_edges:
        neighbors = [set() for _ in range(num_vertices)]
        for u, v in edges:
            neighbors[u].add(v)
            neighbors[v].add(u)
        found = []
        for u, v in edges:  # u < v; close each edge with a common neighbor above v
            for w in sorted(neighbors[u] & neighbors[v]):
                if w > v:
                    found.append((u, v, w))
        triangles = tuple(sorted(found))

    B2 = np.zeros((num_edges, len(triangles)), dtype=np.int8)
    for t, (a, b, c) in enumerate(triangles):
        # cycle a -> b -> c -> a against the stored tail<head orientations
        B2[edge_index[(a, b)], t] = 1
        B2[edge_index[(b, c)], t] = 1
        B2[edge_index[(a, c)], t] = -1

    return OrientedComplex(num_vertices, edges, triangles, B1, B2)


def hodge_laplacian(cx: OrientedComplex, k: int) -> np.ndarray:
    """Hodge Laplacian of degree ``k``: L0 = B1 B1^T on vertices,
    L1 = B1^T B1 + B2 B2^T on edges.  Returned as float64."""
    B1 = cx.B1.astype(np.float64)
    if k == 0:
        return B1 @ B1.T
    if k == 1:
        B2 = cx.B2.astype(np.float64)
        return B1.T @ B1 + B2 @ B2.T
    raise ContractError(f"unsupported Laplacian degree k={k}; expected 0 or 1")


def line_graph(graph: LabeledComplex, detect_triangles: bool = True) -> LabeledComplex:
    """Transform edge features into vertex features of the line graph.

    Line-graph vertices are the input edges (in stored order); two are
    adjacent when the edges share an endpoint.  The input edge features
    become vertex features verbatim (signs under the stored orientation);
    the result carries no edge features.
    """
    if graph.num_edge_dims < 1:
        raise ContractError("line_graph requires edge features (D_e >= 1)")
    cx = graph.complex
    if cx.num_edges == 0:
        raise StructuralError("line_graph of an edgeless complex")

    incident = [[] for _ in range(cx.num_vertices)]
    for j, (u, v) in enumerate(cx.edges):
        incident[u].append(j)
        incident[v].append(j)
    lg_edges = set()
    for members in incident:
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                lg_edges.add((members[a], members[b]))
    lg = build_complex(cx.num_edges, lg_edges, detect_triangles=detect_triangles)
    return LabeledComplex(
        complex=lg,
        vertex_features=graph.edge_features.copy(),
        edge_features=np.zeros((0, lg.num_edges)),
        label=graph.label,
    )


def permute_complex(graph: LabeledComplex, perm: np.ndarray) -> LabeledComplex:
    """Relabel vertices by ``perm`` (new_label = perm[old_label]) and rebuild
    canonically, carrying features along with consistent sign flips.

    Edge features flip sign where the canonical orientation of the relabeled
    edge reverses the original tail->head direction.  Useful for isomorphism-
    invariance checks.
    """
    cx = graph.complex
    perm = np.asarray(perm)
    if sorted(perm.tolist()) != list(range(cx.num_vertices)):
        raise ContractError("perm must be a permutation of range(num_vertices)")
    new_edges = [(int(perm[u]), int(perm[v])) for u, v in cx.edges]
    # a complex without stored triangles rebuilds identically with or without
    # detection, so keying on num_triangles preserves the original setting
    rebuilt = build_complex(cx.num_vertices, new_edges, detect_triangles=cx.num_triangles > 0)
    # map old edge index -> (new index, sign)
    new_index = {e: j for j, e in enumerate(rebuilt.edges)}
    vertex_features = np.zeros_like(graph.vertex_features)
    if graph.num_vertex_dims:
        vertex_features[:, perm] = graph.vertex_features
    edge_features = np.zeros_like(graph.edge_features)
    for j, (pu, pv) in enumerate(new_edges):
        key, sign = ((pu, pv), 1.0) if pu < pv else ((pv, pu), -1.0)
        if graph.num_edge_dims:
            edge_features[:, new_index[key]] = sign * graph.edge_features[:, j]
    return LabeledComplex(rebuilt, vertex_features, edge_features, graph.label)


def flip_edge_orientations(graph: LabeledComplex, edge_indices) -> LabeledComplex:
    """Reverse the stored orientation of the given edges, negating the
    matching B1/B2 rows and edge-feature columns.

    The result is a valid complex under a non-canonical orientation; use
    ``validate(canonical=False)`` on it.
    """
    cx = graph.complex
    flip = np.zeros(cx.num_edges, dtype=bool)
    flip[np.asarray(list(edge_indices), dtype=int)] = True
    edges = tuple(
        (head, tail) if flip[j] else (tail, head) for j, (tail, head) in enumerate(cx.edges)
    )
    B1 = cx.B1.copy()
    B1[:, flip] *= -1
    B2 = cx.B2.copy()
    B2[flip, :] *= -1
    flipped = OrientedComplex(cx.num_vertices, edges, cx.triangles, B1, B2)
    edge_features = graph.edge_features.copy()
    if graph.num_edge_dims:
        edge_features[:, flip] *= -1.0
    return LabeledComplex(flipped, graph.vertex_features, edge_features, graph.label)


def connected_components(cx: OrientedComplex) -> int:
    """Number of connected components (union-find over the edge list)."""
    parent = list(range(cx.num_vertices))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in cx.edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
    return len({find(x) for x in range(cx.num_vertices)})
