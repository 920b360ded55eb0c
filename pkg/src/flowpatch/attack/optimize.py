"""Patch training: sign/plain gradient steps under clip or tanh box handling.

One training step samples a frame pair and a random pose, composites the
patch into both frames, pushes the result through the (optionally defended)
estimator on a stage tape, and takes one optimizer step on the patch
parameters from the reverse pass.  Reference flows are computed once per
frame pair on the defended clean pair and cached.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..core.raster import Image
from ..defense.pipeline import DefenseConfig, defend, defend_on_tape
from ..diff.elementwise import AddWeightedStage, CovMaterializeStage
from ..diff.stage import StageTape
from ..errors import DivergenceError
from ..flow.horn_schunck import FlowEstimator
from .losses import AcsLossStage, ILP_AWARE, LGS_AWARE, PatchPenaltyStage, VANILLA
from .patch import CLIP, COV, Patch, random_patch
from .placement import PlacePatchStage, placement_geometry, sample_pose

IFGSM = "ifgsm"
SGD = "sgd"


@dataclass(frozen=True)
class AttackConfig:
    awareness: str = VANILLA
    optimizer: str = IFGSM
    learning_rate: float = 0.1
    box: str = CLIP
    steps: int = 2500
    alpha_penalty: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.awareness not in (VANILLA, LGS_AWARE, ILP_AWARE):
            raise ValueError(f"unknown awareness {self.awareness!r}")
        if self.optimizer not in (IFGSM, SGD):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.box not in (CLIP, COV):
            raise ValueError(f"unknown box constraint {self.box!r}")
        if self.learning_rate < 0:
            raise ValueError("learning rate must be >= 0")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")


def optimizer_step(patch: Patch, gradient: np.ndarray, cfg: AttackConfig) -> Patch:
    """One descent step on the patch parameter; clip mode re-projects to [0,1]."""
    if cfg.optimizer == IFGSM:
        updated = patch.param - cfg.learning_rate * np.sign(gradient)
    else:
        updated = patch.param - cfg.learning_rate * gradient
    if patch.parameterization == CLIP:
        updated = np.clip(updated, 0.0, 1.0)
    return patch.with_param(updated)


@dataclass
class TrainResult:
    patch: Patch
    losses: list[float] = field(default_factory=list)


def _reference_flow(
    estimator: FlowEstimator, pair: tuple[Image, Image], defense: DefenseConfig | None
) -> np.ndarray:
    frame1, frame2 = pair
    if defense is not None:
        frame1, _ = defend(frame1, defense)
        frame2, _ = defend(frame2, defense)
    return estimator.estimate(frame1, frame2).data


def train_patch(
    estimator: FlowEstimator,
    defense: DefenseConfig | None,
    dataset: Sequence[tuple[Image, Image]],
    cfg: AttackConfig,
    patch_side: int = 100,
    initial_patch: Patch | None = None,
) -> TrainResult:
    """Optimize a patch for `cfg.steps` steps; raises DivergenceError on a
    non-finite loss.  Deterministic for a fixed config (seeded poses and
    initialization)."""
    if not dataset:
        raise ValueError("dataset is empty")
    rng = np.random.default_rng(cfg.seed)
    patch = initial_patch or random_patch(patch_side, cfg.box, rng)
    if patch.parameterization != cfg.box:
        raise ValueError("patch parameterization does not match cfg.box")
    validity = patch.validity

    references: dict[int, np.ndarray] = {}
    losses: list[float] = []

    for step in range(cfg.steps):
        idx = int(rng.integers(len(dataset)))
        frame1, frame2 = dataset[idx]
        if idx not in references:
            references[idx] = _reference_flow(estimator, dataset[idx], defense)
        pose = sample_pose(rng, patch.side, (frame1.height, frame1.width))
        geometry = placement_geometry(pose, patch.side, (frame1.height, frame1.width))

        tape = StageTape()
        param = tape.source(patch.param)
        if cfg.box == COV:
            values = tape.apply(CovMaterializeStage(), param)
        else:
            values = param
        attacked1, attacked2 = tape.apply(
            PlacePatchStage(geometry, patch.side),
            tape.source(frame1.data),
            tape.source(frame2.data),
            values,
        )
        if defense is not None:
            attacked1, _ = defend_on_tape(tape, attacked1, defense)
            attacked2, _ = defend_on_tape(tape, attacked2, defense)
        flow = estimator.forward_on_tape(tape, attacked1, attacked2)
        loss = tape.apply(AcsLossStage(references[idx], geometry.mask), flow)
        if cfg.awareness != VANILLA:
            order = "first" if cfg.awareness == LGS_AWARE else "second"
            penalty = tape.apply(PatchPenaltyStage(order, validity), values)
            loss = tape.apply(AddWeightedStage(cfg.alpha_penalty), loss, penalty)

        value = float(loss.array)
        if not np.isfinite(value):
            raise DivergenceError(
                f"optimization diverged at step {step}: loss {value!r} "
                f"(awareness={cfg.awareness}, optimizer={cfg.optimizer}, "
                f"lr={cfg.learning_rate})"
            )
        losses.append(value)

        tape.backward(loss, 1.0)
        patch = optimizer_step(patch, tape.grad(param), cfg)

    return TrainResult(patch=patch, losses=losses)
