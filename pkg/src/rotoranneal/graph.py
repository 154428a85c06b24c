"""Circulant ring topology and O(N) neighbor-window sums.

Adjacency is never materialized: vertex i couples to the r nearest sites on
each side of a periodic ring, so every windowed quantity reduces to index
arithmetic plus a prefix-sum sliding window.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError


@dataclass(frozen=True)
class CirculantGraph:
    """Ring of ``n_vertices`` sites, each coupled to ``interaction_range``
    neighbors per side (2r-regular). Immutable; safe to share across threads.
    """

    n_vertices: int
    interaction_range: int

    def __post_init__(self) -> None:
        n, r = self.n_vertices, self.interaction_range
        if n < 3:
            raise InvalidParameterError(f"n_vertices must be >= 3, got {n}")
        r_max = (n - 1) // 2
        if not 1 <= r <= r_max:
            raise InvalidParameterError(
                f"interaction_range must satisfy 1 <= r <= floor((N-1)/2) = {r_max}, got {r}"
            )

    @property
    def n(self) -> int:
        return self.n_vertices

    @property
    def r(self) -> int:
        return self.interaction_range

    @property
    def degree(self) -> int:
        return 2 * self.interaction_range

    @property
    def n_edges(self) -> int:
        return self.n_vertices * self.interaction_range


def new_circulant(n_vertices: int, interaction_range: int) -> CirculantGraph:
    """Validated constructor for a circulant ring graph."""
    return CirculantGraph(n_vertices, interaction_range)


def connectance(g: CirculantGraph) -> float:
    """Edge density 2r/(N-1); 1.0 is the complete graph (odd N)."""
    return 2.0 * g.interaction_range / (g.n_vertices - 1)


class NeighborWindow:
    """Preallocated scratch for repeated neighbor sums of one (batch, N) shape.

    The window total over [i-r, i+r] is read off a prefix sum of the
    periodically padded row; the center element is subtracted afterwards.
    One fresh prefix pass per call keeps the accumulated rounding bounded
    without a separate periodic refresh.
    """

    def __init__(self, g: CirculantGraph, batch_shape: tuple[int, ...] = ()):
        self.n = g.n_vertices
        self.r = g.interaction_range
        self._pad = np.empty(batch_shape + (self.n + 2 * self.r,), dtype=np.float64)
        self._csum = np.empty_like(self._pad)

    def apply(self, values: np.ndarray, out: np.ndarray) -> np.ndarray:
        """out[..., i] = sum_{m=1..r} values[..., (i+m) % N] + values[..., (i-m) % N]."""
        n, r = self.n, self.r
        pad, csum = self._pad, self._csum
        pad[..., :r] = values[..., n - r:]
        pad[..., r:r + n] = values
        pad[..., r + n:] = values[..., :r]
        np.cumsum(pad, axis=-1, out=csum)
        out[..., 0] = csum[..., 2 * r]
        np.subtract(csum[..., 2 * r + 1:], csum[..., :n - 1], out=out[..., 1:])
        out -= values
        return out


def neighbor_sums(g: CirculantGraph, values: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Windowed neighbor sum around every site, excluding the site itself.

    ``values`` may carry leading batch axes; the ring axis is the last one.
    Cost is O(N) per row (prefix-sum sliding window) after O(r) padding.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape[-1] != g.n_vertices:
        raise InvalidParameterError(
            f"values must have length N = {g.n_vertices} on the last axis, got {values.shape[-1]}"
        )
    if out is None:
        out = np.empty_like(values)
    scratch = NeighborWindow(g, values.shape[:-1])
    return scratch.apply(values, out)


def quadratic_form(g: CirculantGraph, x: np.ndarray, y: np.ndarray) -> float:
    """sum_{ij} A_ij x_i y_j, contracted as x . neighbor_sums(y).

    Symmetric in (x, y) up to rounding; matches the dense-matrix evaluation.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != (g.n_vertices,) or y.shape != (g.n_vertices,):
        raise InvalidParameterError(
            f"x and y must both have shape ({g.n_vertices},), got {x.shape} and {y.shape}"
        )
    return float(np.dot(x, neighbor_sums(g, y)))


def quadratic_form_rows(g: CirculantGraph, values: np.ndarray,
                        scratch: NeighborWindow, ns_buf: np.ndarray) -> np.ndarray:
    """Batched sum_{ij} A_ij v_i v_j per row of a (batch, N) array."""
    scratch.apply(values, ns_buf)
    return np.einsum("...i,...i->...", values, ns_buf)
