"""Centered cardinal B-spline shapes.

A shape of order m is the centered B-spline of degree m, supported on m + 1
mesh cells. On the mesh it gives deposit/gather weights, and its analytic
Fourier transform gives the PIF multiplier S_k.
"""

from __future__ import annotations

from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np
from scipy.interpolate import BSpline

from ..errors import ArgumentError
from .transforms import ModeSet

NodeWeight = Tuple[Tuple[int, int, int], float]


@lru_cache(maxsize=16)
def _basis(order: int) -> BSpline:
    knots = np.arange(order + 2, dtype=np.float64) - (order + 1) / 2.0
    return BSpline.basis_element(knots, extrapolate=False)


def _check_order(order: int) -> None:
    if order < 1:
        raise ArgumentError(f"shape order must be at least 1, got {order}")


def spline_values(order: int, offsets: np.ndarray) -> np.ndarray:
    """B(offsets) for the centered spline, zero outside its support."""
    _check_order(order)
    offsets = np.asarray(offsets, dtype=np.float64)
    values = _basis(order)(offsets.ravel()).reshape(offsets.shape)
    return np.nan_to_num(values, nan=0.0)


def axis_weights(
    points: np.ndarray,
    order: int,
    spacing: float,
    nodes: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """Per-axis node indices and weights, both shaped (N_p, 3, order + 1).

    Indices are wrapped into [0, nodes).
    """
    _check_order(order)
    if not spacing > 0:
        raise ArgumentError(f"mesh spacing must be positive, got {spacing}")
    u = np.asarray(points, dtype=np.float64) / spacing
    first = np.floor(u - (order + 1) / 2.0).astype(np.int64) + 1
    index = first[..., None] + np.arange(order + 1)
    weights = spline_values(order, u[..., None] - index)
    return np.mod(index, nodes), weights


def stencil(
    points: np.ndarray,
    order: int,
    spacing: float,
    nodes: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """Flat node indices and tensor-product weights, shaped (N_p, m+1, m+1, m+1)."""
    index, weights = axis_weights(points, order, spacing, nodes)
    flat = (
        index[:, 0, :, None, None] * nodes + index[:, 1, None, :, None]
    ) * nodes + index[:, 2, None, None, :]
    product = weights[:, 0, :, None, None] * weights[:, 1, None, :, None] * weights[:, 2, None, None, :]
    return flat, product


def deposit_weights(
    x: np.ndarray,
    order: int,
    spacing: float,
    nodes: int,
) -> List[NodeWeight]:
    """The (order + 1)^3 (node, weight) pairs one particle deposits onto."""
    index, weights = axis_weights(np.asarray(x, dtype=np.float64)[None, :], order, spacing, nodes)
    index, weights = index[0], weights[0]
    entries: List[NodeWeight] = []
    for a in range(order + 1):
        for b in range(order + 1):
            for c in range(order + 1):
                node = (int(index[0, a]), int(index[1, b]), int(index[2, c]))
                entries.append((node, float(weights[0, a] * weights[1, b] * weights[2, c])))
    return entries


def fourier_multiplier(
    order: int,
    modes: ModeSet,
    width: Optional[float] = None,
) -> np.ndarray:
    """S_k = prod_d sinc(k_d h' / 2)^(order + 1) over the mode set; h' defaults to L/N."""
    _check_order(order)
    if width is None:
        width = modes.length / modes.modes
    # np.sinc is the normalized sin(pi x) / (pi x).
    factor = np.sinc(modes.wavenumbers * width / (2.0 * np.pi)) ** (order + 1)
    return factor[:, None, None] * factor[None, :, None] * factor[None, None, :]
