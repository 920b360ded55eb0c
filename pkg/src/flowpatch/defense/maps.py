"""Gradient-magnitude maps and per-image normalization.

Both defenses score anomalies on a scalar map: luminance is differentiated
with central differences (first order) or the 5-point Laplacian (second
order), replicate boundaries, then min-max normalized per image.
"""

from __future__ import annotations

import numpy as np

from ..core.raster import GradientMap, Image, LUMA_WEIGHTS, grayscale
from ..diff.stage import Arrays, Stage
from ..diff import stencils


class GradientMagnitudeStage(Stage):
    """image -> HxW derivative-magnitude map; exact backward.

    order="first": sqrt(Ix^2 + Iy^2); order="second": |Laplacian|.  The
    subgradient at zero magnitude is taken as 0.
    """

    def __init__(self, order: str):
        if order not in ("first", "second"):
            raise ValueError(f"unknown derivative order {order!r}")
        self.order = order
        self.name = f"gradient-magnitude-{order}"

    def forward(self, ctx, inputs: Arrays) -> Arrays:
        (image,) = inputs
        gray = grayscale(image)
        ctx["shape"] = image.shape
        if self.order == "first":
            gx = stencils.diff_x(gray)
            gy = stencils.diff_y(gray)
            g = np.sqrt(gx * gx + gy * gy)
            ctx["gx"], ctx["gy"], ctx["g"] = gx, gy, g
        else:
            lap = stencils.laplacian(gray)
            g = np.abs(lap)
            ctx["lap"] = lap
        return (g,)

    def backward(self, ctx, cotangents: Arrays) -> Arrays:
        (u,) = cotangents
        if self.order == "first":
            g = ctx["g"]
            safe = np.where(g > 0, g, 1.0)
            scale = np.where(g > 0, u / safe, 0.0)
            ugray = stencils.diff_x_adjoint(scale * ctx["gx"]) + stencils.diff_y_adjoint(
                scale * ctx["gy"]
            )
        else:
            ugray = stencils.laplacian_adjoint(u * np.sign(ctx["lap"]))
        shape = ctx["shape"]
        if len(shape) == 2:
            return (ugray,)
        if shape[2] == 1:
            return (ugray[:, :, None],)
        w = np.asarray(LUMA_WEIGHTS)
        return (ugray[:, :, None] * w,)


class NormalizeMapStage(Stage):
    """(G - min) / (max - min); a constant map normalizes to all zeros.

    Exact backward almost everywhere (assumes the min/max locations are
    unique, which random inputs satisfy); the degenerate constant case has
    zero gradient.
    """

    name = "normalize-map"

    def forward(self, ctx, inputs: Arrays) -> Arrays:
        (g,) = inputs
        lo, hi = float(g.min()), float(g.max())
        ctx["degenerate"] = hi <= lo
        if ctx["degenerate"]:
            return (np.zeros_like(g),)
        out = (g - lo) / (hi - lo)
        ctx["range"] = hi - lo
        ctx["argmin"] = np.unravel_index(int(np.argmin(g)), g.shape)
        ctx["argmax"] = np.unravel_index(int(np.argmax(g)), g.shape)
        ctx["out"] = out
        return (out,)

    def backward(self, ctx, cotangents: Arrays) -> Arrays:
        (u,) = cotangents
        if ctx["degenerate"]:
            return (np.zeros_like(u),)
        r = ctx["range"]
        total = float(u.sum())
        weighted = float((u * ctx["out"]).sum())
        grad = u / r
        grad = grad.copy()
        grad[ctx["argmin"]] += (weighted - total) / r
        grad[ctx["argmax"]] -= weighted / r
        return (grad,)


def gradient_magnitude(image: Image, order: str) -> GradientMap:
    stage = GradientMagnitudeStage(order)
    return GradientMap(stage(image.data))


def normalize_map(gradient_map: GradientMap) -> GradientMap:
    return GradientMap(NormalizeMapStage()(gradient_map.data))
