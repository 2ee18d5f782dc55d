import numpy as np
import scipy.sparse as sp

from smoothfem.errors import MeshError, SmoothingError
from smoothfem.utils.geometry import is_convex, triangle_areas

KINDS = ('elementwise', 'subtriangle', 'edge_based', 'interior', 'node_based')


class Subdivision:
    """Partition of the domain into cells built from convex triangular pieces.

    Cells that are convex also keep an `outline` polygon (CCW); node-based
    cells are unions of pieces and carry no outline. `parents` records the
    provenance of every cell, e.g. (element,) or (edge, element, neighbor).
    """

    def __init__(self, kind, triangles, piece_cell, n_cells=None, outlines=None, parents=None,
                 domain_area=None):
        if kind not in KINDS:
            raise MeshError(f"unknown subdivision kind {kind!r}")
        self.kind = kind
        self.triangles = np.array(triangles, dtype=float).reshape(-1, 3, 2)
        self.piece_cell = np.array(piece_cell, dtype=int)
        self.n_cells = int(n_cells if n_cells is not None else self.piece_cell.max() + 1)
        self.outlines = list(outlines) if outlines is not None else [None] * self.n_cells
        self.parents = list(parents) if parents is not None else [()] * self.n_cells
        self.triangles.setflags(write=False)
        self.piece_cell.setflags(write=False)

        self.piece_areas = triangle_areas(self.triangles)
        bad = np.flatnonzero(self.piece_areas <= 0)
        if len(bad):
            cell = int(self.piece_cell[bad[0]])
            raise MeshError(f"{kind} cell {cell} has a degenerate or inverted piece", cell=cell)
        self.areas = np.bincount(self.piece_cell, weights=self.piece_areas, minlength=self.n_cells)
        if np.any(self.areas <= 0):
            cell = int(np.flatnonzero(self.areas <= 0)[0])
            raise MeshError(f"{kind} cell {cell} has no area", cell=cell)
        if domain_area is not None:
            total = float(np.sum(self.areas))
            if abs(total - domain_area) > 1e-12 * abs(domain_area):
                raise MeshError(f"{kind} cells cover area {total!r}, expected {domain_area!r}")

    def __repr__(self):
        return f"<Subdivision {self.kind} cells={self.n_cells} pieces={len(self.triangles)}>"

    def __len__(self):
        return self.n_cells

    @property
    def cells(self):
        """Cell polygons; pieces stand in where a cell has no single outline"""
        return [outline if outline is not None else self.cell_pieces(i)
                for i, outline in enumerate(self.outlines)]

    @property
    def total_area(self):
        return float(np.sum(self.areas))

    def cell_pieces(self, cell):
        return self.triangles[self.piece_cell == cell]

    def is_quad_cell(self, cell):
        outline = self.outlines[cell]
        return outline is not None and len(outline) == 4 and is_convex(outline)

    def matches(self, other):
        """Same cells in the same order"""
        if self is other:
            return True
        return (isinstance(other, Subdivision) and self.kind == other.kind
                and self.n_cells == other.n_cells
                and self.triangles.shape == other.triangles.shape
                and np.array_equal(self.triangles, other.triangles)
                and np.array_equal(self.piece_cell, other.piece_cell))


class OverlapTable:
    """Sparse table of overlap areas between the cells of two subdivisions."""

    def __init__(self, matrix, fine, coarse, check=True):
        self.matrix = sp.csr_matrix(matrix)
        self.fine = fine
        self.coarse = coarse
        if self.matrix.shape != (fine.n_cells, coarse.n_cells):
            raise SmoothingError(f"overlap table has shape {self.matrix.shape}, "
                                 f"expected ({fine.n_cells}, {coarse.n_cells})")
        if check:
            self.check_marginals()

    def __repr__(self):
        return f"<OverlapTable {self.fine.kind}->{self.coarse.kind} nnz={self.matrix.nnz}>"

    @property
    def entries(self):
        coo = self.matrix.tocoo()
        return {(int(i), int(j)): float(v) for i, j, v in zip(coo.row, coo.col, coo.data)}

    def check_marginals(self, rel_tol=1e-12):
        """Row sums reproduce fine areas, column sums coarse areas"""
        if self.matrix.nnz and self.matrix.data.min() < 0:
            raise SmoothingError("overlap table has negative entries")
        rows = np.asarray(self.matrix.sum(axis=1)).ravel()
        cols = np.asarray(self.matrix.sum(axis=0)).ravel()
        for name, sums, areas in (('row', rows, self.fine.areas), ('column', cols, self.coarse.areas)):
            gap = np.abs(sums - areas) / areas
            if gap.max(initial=0.0) > rel_tol:
                cell = int(np.argmax(gap))
                raise SmoothingError(f"overlap {name} sum for cell {cell} misses its area by "
                                     f"{gap[cell]:.3e} relative", cell=cell)
        return True

    def transpose(self):
        return OverlapTable(self.matrix.T, self.coarse, self.fine, check=False)
