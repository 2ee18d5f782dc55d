import threading
from functools import cached_property

import numpy as np

from smoothfem.errors import MeshError
from smoothfem.utils.geometry import PointLocator, corner_crosses

ELEMENT_NODES = {'T3': 3, 'Q4': 4, 'Q9': 9}
CORNER_COUNT = {'T3': 3, 'Q4': 4, 'Q9': 4}


def _frozen(array, dtype):
    array = np.array(array, dtype=dtype)
    array.setflags(write=False)
    return array


class Mesh:
    """Conforming mesh of a single element kind with tagged boundary edges.

    Vertices are (n, 2) coordinates, elements (m, k) vertex indices in
    counterclockwise order. Boundary edges are corner pairs tagged 'D'
    (Dirichlet) or 'N' (Neumann). Arrays are read-only after construction.
    """

    def __init__(self, vertices, elements, kind, boundary_edges, boundary_tags, validate=True):
        if kind not in ELEMENT_NODES:
            raise MeshError(f"unknown element kind {kind!r}")
        self.kind = kind
        self.vertices = _frozen(vertices, float).reshape(-1, 2)
        self.elements = _frozen(elements, int).reshape(-1, ELEMENT_NODES[kind])
        self.boundary_edges = _frozen(boundary_edges, int).reshape(-1, 2)
        self.boundary_tags = tuple(boundary_tags)
        # Derived subdivisions and operators, filled lazily by the services.
        # Reads may go straight to the dict; writes go through cached/remember.
        self.cache = {}
        self._cache_lock = threading.RLock()
        if len(self.boundary_tags) != len(self.boundary_edges):
            raise MeshError("every boundary edge needs exactly one tag")
        if validate:
            self.validate()

    def __repr__(self):
        return f"<Mesh {self.kind} vertices={self.n_vertices} elements={self.n_elements}>"

    def cached(self, key, build):
        """Value under key, calling build() once per mesh even across threads"""
        with self._cache_lock:
            if key not in self.cache:
                self.cache[key] = build()
            return self.cache[key]

    def remember(self, key, value):
        """Store value unless another thread got there first; returns the stored one"""
        with self._cache_lock:
            return self.cache.setdefault(key, value)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def n_dofs(self):
        return 2 * self.n_vertices

    @property
    def corner_count(self):
        return CORNER_COUNT[self.kind]

    @property
    def corners(self):
        return self.elements[:, :self.corner_count]

    @cached_property
    def corner_coords(self):
        return self.vertices[self.corners]

    @cached_property
    def element_areas(self):
        c = self.corner_coords
        x = c[:, :, 0]
        y = c[:, :, 1]
        return 0.5 * (np.sum(x * np.roll(y, -1, axis=1), axis=1) - np.sum(np.roll(x, -1, axis=1) * y, axis=1))

    @cached_property
    def element_centers(self):
        """Centroid for triangles, corner average for quads"""
        return self.corner_coords.mean(axis=1)

    @property
    def area(self):
        return float(np.sum(self.element_areas))

    @cached_property
    def _topology(self):
        nc = self.corner_count
        edge_ids = {}
        edges = []
        edge_elements = []
        element_edges = np.zeros((self.n_elements, nc), dtype=int)
        for e, corners in enumerate(self.corners.tolist()):
            for k in range(nc):
                p, q = corners[k], corners[(k + 1) % nc]
                key = (min(p, q), max(p, q))
                index = edge_ids.get(key)
                if index is None:
                    index = len(edges)
                    edge_ids[key] = index
                    edges.append((p, q))
                    edge_elements.append([e, k, -1, -1])
                else:
                    record = edge_elements[index]
                    if record[2] != -1:
                        raise MeshError(f"edge ({p}, {q}) is shared by more than two elements",
                                        element=e)
                    if edges[index] != (q, p):
                        raise MeshError(f"element {e} traverses edge ({p}, {q}) in the same direction "
                                        f"as element {record[0]}", element=e)
                    record[2], record[3] = e, k
                element_edges[e, k] = index
        return edge_ids, np.array(edges, dtype=int).reshape(-1, 2), \
            np.array(edge_elements, dtype=int).reshape(-1, 4), element_edges

    @property
    def edges(self):
        """Edges (E, 2) oriented as traversed by their first element"""
        return self._topology[1]

    @property
    def edge_elements(self):
        """Per edge: (element, local edge, neighbor element or -1, neighbor local edge or -1)"""
        return self._topology[2]

    @property
    def element_edges(self):
        """Edge index of local edge k (corner k to corner k+1) of every element"""
        return self._topology[3]

    @property
    def n_edges(self):
        return len(self.edges)

    def edge_index(self, p, q):
        return self._topology[0].get((min(p, q), max(p, q)))

    @cached_property
    def neighbors(self):
        """Element across local edge k, or -1 on the boundary"""
        table = np.full((self.n_elements, self.corner_count), -1, dtype=int)
        for e, k, f, j in self.edge_elements.tolist():
            if f >= 0:
                table[e, k] = f
                table[f, j] = e
        return table

    @cached_property
    def midside_nodes(self):
        """Q9 only: edge index -> midside vertex"""
        if self.kind != 'Q9':
            return {}
        nodes = {}
        for e in range(self.n_elements):
            for k in range(4):
                nodes[int(self.element_edges[e, k])] = int(self.elements[e, 4 + k])
        return nodes

    @cached_property
    def dirichlet_vertices(self):
        vertices = set()
        for (p, q), tag in zip(self.boundary_edges.tolist(), self.boundary_tags):
            if tag != 'D':
                continue
            vertices.update((p, q))
            if self.kind == 'Q9':
                vertices.add(self.midside_nodes[self.edge_index(p, q)])
        return np.array(sorted(vertices), dtype=int)

    @cached_property
    def boundary_vertices(self):
        vertices = set(self.boundary_edges.ravel().tolist())
        if self.kind == 'Q9':
            for p, q in self.boundary_edges.tolist():
                vertices.add(self.midside_nodes[self.edge_index(p, q)])
        return np.array(sorted(vertices), dtype=int)

    @cached_property
    def vertex_elements(self):
        """Elements incident to each vertex, ascending"""
        incident = [[] for _ in range(self.n_vertices)]
        for e, nodes in enumerate(self.elements.tolist()):
            for v in nodes:
                incident[v].append(e)
        return incident

    @cached_property
    def locator(self):
        return PointLocator(self.vertices, self.corners)

    @cached_property
    def bounding_box(self):
        return tuple(self.vertices.min(axis=0).tolist() + self.vertices.max(axis=0).tolist())

    def validate(self):
        """Check orientation, convexity, conformity and boundary coverage"""
        if self.n_elements == 0:
            raise MeshError("mesh has no elements")
        if self.elements.min() < 0 or self.elements.max() >= self.n_vertices:
            raise MeshError("element references a vertex that does not exist")

        scale = max(float(np.ptp(self.vertices, axis=0).max()), 1e-300)
        areas = self.element_areas
        for e in np.flatnonzero(areas <= 1e-14 * scale * scale):
            raise MeshError(f"element {e} has nonpositive area {areas[e]!r}", element=int(e))
        if self.corner_count == 4:
            for e, quad in enumerate(self.corner_coords):
                if not np.all(corner_crosses(quad) > 0):
                    raise MeshError(f"quadrilateral element {e} is not convex", element=e)

        topological = {tuple(sorted(self.edges[i])) for i in range(self.n_edges)
                       if self.edge_elements[i, 2] < 0}
        tagged = [tuple(sorted(edge)) for edge in self.boundary_edges.tolist()]
        if len(set(tagged)) != len(tagged):
            raise MeshError("a boundary edge is tagged more than once")
        if set(tagged) != topological:
            missing = sorted(topological - set(tagged))
            extra = sorted(set(tagged) - topological)
            raise MeshError(f"boundary edges do not match the mesh boundary "
                            f"(untagged {missing[:3]}, not on boundary {extra[:3]})")
        for tag in self.boundary_tags:
            if tag not in ('D', 'N'):
                raise MeshError(f"boundary tag must be D or N, got {tag!r}")

        if self.kind == 'Q9':
            seen = {}
            for e in range(self.n_elements):
                for k in range(4):
                    edge = int(self.element_edges[e, k])
                    node = int(self.elements[e, 4 + k])
                    if seen.setdefault(edge, node) != node:
                        raise MeshError(f"element {e} disagrees with its neighbor on a midside node",
                                        element=e)
        return True

    def with_vertices(self, vertices):
        """Same topology, new coordinates"""
        return Mesh(vertices, self.elements, self.kind, self.boundary_edges, self.boundary_tags)

    def to_dict(self):
        """Convert to dictionary"""
        return {
            'kind': self.kind,
            'vertices': self.vertices.tolist(),
            'elements': self.elements.tolist(),
            'boundary_edges': self.boundary_edges.tolist(),
            'boundary_tags': list(self.boundary_tags),
        }
