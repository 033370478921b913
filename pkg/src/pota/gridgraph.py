"""Lattice adjacency over raster cells in CSR form.

Node ``i`` is the cell at ``(i // width, i % width)``. Every undirected edge is
stored twice (once per endpoint row), so ``n_stored == 2 * n_edges``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import EdgeLookupError, ShapeError

_OFFSETS = {
    4: ((-1, 0), (0, -1), (0, 1), (1, 0)),
    8: ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)),
}


@dataclass(frozen=True)
class GridGraph:
    width: int
    height: int
    indptr: np.ndarray  # (n+1,)
    indices: np.ndarray  # (n_stored,) neighbor j of row i
    rows: np.ndarray  # (n_stored,) row i of each stored entry
    degrees: np.ndarray  # (n,) int
    norm: np.ndarray  # (n_stored,) 1/sqrt(deg_i deg_j)
    reverse: np.ndarray  # (n_stored,) position of (j, i) for entry (i, j)
    offsets: tuple = ()  # (j - i, stored positions, their rows i) per lattice direction

    @property
    def n(self) -> int:
        return self.width * self.height

    @property
    def n_stored(self) -> int:
        return int(self.indices.size)

    @property
    def n_edges(self) -> int:
        return self.n_stored // 2

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def edge_position(self, i: int, j: int) -> int:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        k = lo + int(np.searchsorted(self.indices[lo:hi], j))
        if k >= hi or self.indices[k] != j:
            raise EdgeLookupError(f"({i}, {j}) is not an edge")
        return k

    def edge_dots(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """``a[i] . b[j]`` for every stored entry ``(i, j)``.

        Each lattice direction is a constant index offset, so the products are
        taken over contiguous slices rather than gathered rows.
        """
        out = np.empty(self.n_stored)
        n = self.n
        for d, pos, src in self.offsets:
            lo = max(0, -d)
            prod = np.einsum("ij,ij->i", a[lo:n - max(0, d)], b[lo + d:n - max(0, d) + d])
            out[pos] = prod[src - lo]
        return out

    def matrix(self, values: np.ndarray) -> sp.csr_matrix:
        """Sparse n x n matrix with ``values`` on the stored entries."""
        return sp.csr_matrix((values, self.indices, self.indptr), shape=(self.n, self.n))

    def adjacency(self) -> sp.csr_matrix:
        return self.matrix(np.ones(self.n_stored))


def build_grid_graph(width: int, height: int, connectivity: int = 4) -> GridGraph:
    if width < 1 or height < 1:
        raise ShapeError(f"grid must be at least 1x1, got {width}x{height}")
    if connectivity not in _OFFSETS:
        raise ShapeError(f"connectivity must be 4 or 8, got {connectivity}")
    n = width * height
    r, c = np.divmod(np.arange(n), width)
    src, dst = [], []
    # offsets are sorted, so neighbor lists come out in ascending node order
    for dr, dc in _OFFSETS[connectivity]:
        rr, cc = r + dr, c + dc
        ok = (rr >= 0) & (rr < height) & (cc >= 0) & (cc < width)
        src.append(np.flatnonzero(ok))
        dst.append(rr[ok] * width + cc[ok])
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    order = np.lexsort((dst, src))
    rows, indices = src[order], dst[order]
    degrees = np.bincount(rows, minlength=n)
    indptr = np.concatenate([[0], np.cumsum(degrees)])
    norm = 1.0 / np.sqrt(degrees[rows].astype(np.float64) * degrees[indices])
    # key (i, j) -> position; reverse is where (j, i) sits
    keys = rows * n + indices
    reverse = np.searchsorted(keys, indices * n + rows)
    delta = indices - rows
    offsets = tuple(
        (int(d), np.flatnonzero(delta == d), rows[delta == d]) for d in np.unique(delta)
    )
    return GridGraph(width, height, indptr, indices, rows, degrees, norm, reverse, offsets)


def edge_norm(graph: GridGraph, i: int, j: int) -> float:
    return float(graph.norm[graph.edge_position(i, j)])
