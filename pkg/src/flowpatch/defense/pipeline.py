"""Detect-and-remove defense pipelines and their tape (BPDA) form.

LGS: first-order gradient map -> normalize -> block vote -> multiplicative
darkening of voted pixels.  ILP: second-order map -> normalize -> block vote
-> pixel-wise reevaluation -> fast-marching inpainting of surviving pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..core.raster import Image, PixelMask
from ..diff.elementwise import ClipStage
from ..diff.stage import StageTape, TapeValue
from .inpaint import TeleaInpaintStage
from .maps import GradientMagnitudeStage, NormalizeMapStage
from .smoothing import DarkenStage, SmoothingFactorStage
from .voting import BlockVoteStage, IlpReevaluateStage

LGS = "lgs"
ILP = "ilp"


@dataclass(frozen=True)
class DefenseConfig:
    """Hyperparameters for either defense; defaults are the tuned values
    (K=16, O=8, t=0.15, t_ilp=0.5, s_ilp=15, b_lgs=15, r_telea=5)."""

    kind: str
    block: int = 16
    overlap: int = 8
    threshold: float = 0.15
    b_lgs: float = 15.0
    s_ilp: float = 15.0
    t_ilp: float = 0.5
    r_telea: int = 5

    def __post_init__(self):
        if self.kind not in (LGS, ILP):
            raise ValueError(f"unknown defense kind {self.kind!r}")
        if not 0 < self.overlap < self.block:
            raise ValueError("block overlap must satisfy 0 < O < K")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("vote threshold must lie in [0, 1]")
        if not 0.0 <= self.t_ilp <= 1.0:
            raise ValueError("t_ilp must lie in [0, 1]")
        if self.b_lgs <= 0 or self.s_ilp <= 0:
            raise ValueError("b_lgs and s_ilp must be positive")
        if self.r_telea < 1:
            raise ValueError("r_telea must be >= 1")


def lgs_config(**overrides) -> DefenseConfig:
    return DefenseConfig(kind=LGS, **overrides)


def ilp_config(**overrides) -> DefenseConfig:
    return DefenseConfig(kind=ILP, **overrides)


def defend_on_tape(tape: StageTape, image: TapeValue, cfg: DefenseConfig):
    """Record the defense's forward pass on a tape (BPDA surrogates included).

    Returns (defended image value, final mask value).
    """
    order = "first" if cfg.kind == LGS else "second"
    gmap = tape.apply(GradientMagnitudeStage(order), image)
    gbar = tape.apply(NormalizeMapStage(), gmap)
    mask = tape.apply(BlockVoteStage(cfg.block, cfg.overlap, cfg.threshold), gbar)
    if cfg.kind == LGS:
        factor = tape.apply(SmoothingFactorStage(cfg.b_lgs), gbar, mask)
        clipped = tape.apply(ClipStage(0.0, 1.0), factor)
        defended = tape.apply(DarkenStage(), clipped, image)
        return defended, mask
    final_mask = tape.apply(IlpReevaluateStage(cfg.s_ilp, cfg.t_ilp), mask, gbar)
    defended = tape.apply(TeleaInpaintStage(cfg.r_telea), image, final_mask)
    return defended, final_mask


def defend(image: Image, cfg: DefenseConfig) -> tuple[Image, PixelMask]:
    """Apply a defense outside any tape; returns (defended image, final mask)."""
    tape = StageTape()
    defended, mask = defend_on_tape(tape, tape.source(image.data), cfg)
    return Image(defended.array), PixelMask(mask.array)
