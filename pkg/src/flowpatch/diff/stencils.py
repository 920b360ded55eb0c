"""Replicate-boundary shift/derivative stencils and their exact adjoints.

Every forward operator here is linear, so its backward is the matrix
transpose.  The adjoints are hand-derived from the clamped index maps and are
verified against explicit Jacobians in the test suite.
"""

from __future__ import annotations

import numpy as np


def shift(x: np.ndarray, axis: int, step: int) -> np.ndarray:
    """out[i] = x[clip(i + step, 0, n-1)] along `axis`; step in {-1, +1}."""
    n = x.shape[axis]
    idx = np.clip(np.arange(n) + step, 0, n - 1)
    return np.take(x, idx, axis=axis)


def shift_adjoint(g: np.ndarray, axis: int, step: int) -> np.ndarray:
    """Transpose of `shift`: scatter g[i] into slot clip(i + step, 0, n-1)."""
    g = np.moveaxis(g, axis, 0)
    out = np.zeros_like(g)
    n = g.shape[0]
    if step == 1:
        out[1:] += g[: n - 1]
        out[n - 1] += g[n - 1]
    elif step == -1:
        out[: n - 1] += g[1:]
        out[0] += g[0]
    else:
        raise ValueError("step must be -1 or +1")
    return np.moveaxis(out, 0, axis)


def diff_x(x: np.ndarray) -> np.ndarray:
    """Central difference along columns: (x[i,j+1] - x[i,j-1]) / 2, replicated."""
    return 0.5 * (shift(x, 1, 1) - shift(x, 1, -1))


def diff_x_adjoint(g: np.ndarray) -> np.ndarray:
    return 0.5 * (shift_adjoint(g, 1, 1) - shift_adjoint(g, 1, -1))


def diff_y(x: np.ndarray) -> np.ndarray:
    """Central difference along rows, replicated boundary."""
    return 0.5 * (shift(x, 0, 1) - shift(x, 0, -1))


def diff_y_adjoint(g: np.ndarray) -> np.ndarray:
    return 0.5 * (shift_adjoint(g, 0, 1) - shift_adjoint(g, 0, -1))


def laplacian(x: np.ndarray) -> np.ndarray:
    """5-point stencil with replicated boundary."""
    return (
        shift(x, 0, 1) + shift(x, 0, -1) + shift(x, 1, 1) + shift(x, 1, -1) - 4.0 * x
    )


def laplacian_adjoint(g: np.ndarray) -> np.ndarray:
    return (
        shift_adjoint(g, 0, 1)
        + shift_adjoint(g, 0, -1)
        + shift_adjoint(g, 1, 1)
        + shift_adjoint(g, 1, -1)
        - 4.0 * g
    )


def neighbor_average(x: np.ndarray) -> np.ndarray:
    """4-neighbor mean with replicated boundary."""
    return 0.25 * (shift(x, 0, 1) + shift(x, 0, -1) + shift(x, 1, 1) + shift(x, 1, -1))


def neighbor_average_adjoint(g: np.ndarray) -> np.ndarray:
    return 0.25 * (
        shift_adjoint(g, 0, 1)
        + shift_adjoint(g, 0, -1)
        + shift_adjoint(g, 1, 1)
        + shift_adjoint(g, 1, -1)
    )


def _extrapolate_pad(x: np.ndarray) -> np.ndarray:
    """Pad by one with linear extrapolation on both axes (2*edge - inner)."""
    p = np.pad(x, 1, mode="edge").astype(np.float64)
    p[0, 1:-1] = 2.0 * x[0] - x[1]
    p[-1, 1:-1] = 2.0 * x[-1] - x[-2]
    p[1:-1, 0] = 2.0 * x[:, 0] - x[:, 1]
    p[1:-1, -1] = 2.0 * x[:, -1] - x[:, -2]
    return p


def _extrapolate_pad_adjoint(gp: np.ndarray) -> np.ndarray:
    """Transpose of `_extrapolate_pad` (corners of the pad are never read)."""
    g = gp[1:-1, 1:-1].copy()
    g[0] += 2.0 * gp[0, 1:-1]
    g[1] -= gp[0, 1:-1]
    g[-1] += 2.0 * gp[-1, 1:-1]
    g[-2] -= gp[-1, 1:-1]
    g[:, 0] += 2.0 * gp[1:-1, 0]
    g[:, 1] -= gp[1:-1, 0]
    g[:, -1] += 2.0 * gp[1:-1, -1]
    g[:, -2] -= gp[1:-1, -1]
    return g


def diff_x_extrapolated(x: np.ndarray) -> np.ndarray:
    """Central difference whose borders use linear extrapolation, so a ramp has
    a constant derivative and zero curvature everywhere (used by the patch
    smoothness penalties)."""
    p = _extrapolate_pad(x)
    return 0.5 * (p[1:-1, 2:] - p[1:-1, :-2])


def diff_x_extrapolated_adjoint(g: np.ndarray) -> np.ndarray:
    gp = np.zeros((g.shape[0] + 2, g.shape[1] + 2))
    gp[1:-1, 2:] += 0.5 * g
    gp[1:-1, :-2] -= 0.5 * g
    return _extrapolate_pad_adjoint(gp)


def diff_y_extrapolated(x: np.ndarray) -> np.ndarray:
    p = _extrapolate_pad(x)
    return 0.5 * (p[2:, 1:-1] - p[:-2, 1:-1])


def diff_y_extrapolated_adjoint(g: np.ndarray) -> np.ndarray:
    gp = np.zeros((g.shape[0] + 2, g.shape[1] + 2))
    gp[2:, 1:-1] += 0.5 * g
    gp[:-2, 1:-1] -= 0.5 * g
    return _extrapolate_pad_adjoint(gp)


def laplacian_extrapolated(x: np.ndarray) -> np.ndarray:
    p = _extrapolate_pad(x)
    return p[2:, 1:-1] + p[:-2, 1:-1] + p[1:-1, 2:] + p[1:-1, :-2] - 4.0 * x


def laplacian_extrapolated_adjoint(g: np.ndarray) -> np.ndarray:
    gp = np.zeros((g.shape[0] + 2, g.shape[1] + 2))
    gp[2:, 1:-1] += g
    gp[:-2, 1:-1] += g
    gp[1:-1, 2:] += g
    gp[1:-1, :-2] += g
    return _extrapolate_pad_adjoint(gp) - 4.0 * g
