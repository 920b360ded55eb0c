"""Endpoint-error metrics and pipeline evaluation.

Quality compares a method's unattacked prediction to the ground truth over
all (valid) pixels; robustness compares the unattacked and attacked
predictions of the same defended method over the pixels outside the patch
footprint.  Lower is better for both.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .attack.patch import Patch
from .attack.placement import place_patch, sample_pose
from .core.raster import FlowField, Image, PixelMask
from .defense.pipeline import DefenseConfig, defend
from .flow.horn_schunck import FlowEstimator


def epe(reference: FlowField, flow: FlowField, valid: PixelMask | None = None) -> float:
    """Mean endpoint error; an optional validity mask restricts the mean to
    pixels where ground truth exists (sparse annotations)."""
    if reference.data.shape != flow.data.shape:
        raise ValueError("flow shapes differ")
    errors = np.linalg.norm(reference.data - flow.data, axis=2)
    if valid is None:
        return float(errors.mean())
    keep = valid.data == 1
    if not keep.any():
        raise ValueError("validity mask excludes every pixel")
    return float(errors[keep].mean())


def epe_excl(flow_a: FlowField, flow_b: FlowField, patch_mask: PixelMask) -> float:
    """Mean endpoint error over pixels outside the patch footprint."""
    if flow_a.data.shape != flow_b.data.shape:
        raise ValueError("flow shapes differ")
    outside = patch_mask.data == 0
    if not outside.any():
        raise ValueError("patch mask covers every pixel")
    errors = np.linalg.norm(flow_a.data - flow_b.data, axis=2)
    return float(errors[outside].mean())


@dataclass(frozen=True)
class EvalRecord:
    frame_id: str
    defense: str
    attack: str
    epe_quality: float | None
    epe_robustness: float | None

    def __post_init__(self):
        for value in (self.epe_quality, self.epe_robustness):
            if value is not None and not (np.isfinite(value) and value >= 0):
                raise ValueError(f"metric value {value!r} must be finite and >= 0")


@dataclass(frozen=True)
class EvalFrame:
    """One dataset item for evaluation."""

    frame_id: str
    frame1: Image
    frame2: Image
    ground_truth: FlowField | None = None
    valid: PixelMask | None = None


@dataclass
class EvalAggregate:
    defense: str
    attack: str
    mean_quality: float | None
    mean_robustness: float | None
    count: int


def evaluate_pipeline(
    estimator: FlowEstimator,
    defense: DefenseConfig | None,
    patch: Patch | None,
    dataset: Sequence[EvalFrame],
    seed: int = 0,
    attack_label: str = "none",
    require_quality: bool = True,
) -> tuple[list[EvalRecord], EvalAggregate]:
    """Per frame: quality EPE of the defended unattacked flow against ground
    truth, and (with a patch) robustness EPE of attacked vs unattacked flow
    outside a seeded random footprint."""
    defense_label = defense.kind if defense is not None else "none"
    rng = np.random.default_rng(seed)
    records = []
    for item in dataset:
        frame1, frame2 = item.frame1, item.frame2
        if defense is not None:
            frame1, _ = defend(frame1, defense)
            frame2, _ = defend(frame2, defense)
        flow_clean = estimator.estimate(frame1, frame2)

        quality = None
        if item.ground_truth is not None:
            quality = epe(item.ground_truth, flow_clean, item.valid)
        elif require_quality and patch is None:
            raise ValueError(f"frame {item.frame_id} has no ground-truth flow")

        robustness = None
        if patch is not None:
            pose = sample_pose(rng, patch.side, (item.frame1.height, item.frame1.width))
            attacked1, attacked2, footprint = place_patch(
                item.frame1, item.frame2, patch, pose
            )
            if defense is not None:
                attacked1, _ = defend(attacked1, defense)
                attacked2, _ = defend(attacked2, defense)
            flow_attacked = estimator.estimate(attacked1, attacked2)
            robustness = epe_excl(flow_clean, flow_attacked, footprint)

        records.append(
            EvalRecord(item.frame_id, defense_label, attack_label, quality, robustness)
        )
    return records, aggregate_records(records, defense_label, attack_label)


def aggregate_records(
    records: Sequence[EvalRecord], defense: str, attack: str
) -> EvalAggregate:
    qualities = [r.epe_quality for r in records if r.epe_quality is not None]
    robustness = [r.epe_robustness for r in records if r.epe_robustness is not None]
    return EvalAggregate(
        defense=defense,
        attack=attack,
        mean_quality=float(np.mean(qualities)) if qualities else None,
        mean_robustness=float(np.mean(robustness)) if robustness else None,
        count=len(records),
    )


def quality_robustness_table(records: Sequence[EvalRecord]) -> list[dict]:
    """One row per (defense, attack) cell with arithmetic means and counts."""
    if not records:
        raise ValueError("no records to tabulate")
    cells: dict[tuple[str, str], list[EvalRecord]] = {}
    for record in records:
        cells.setdefault((record.defense, record.attack), []).append(record)
    rows = []
    for (defense, attack) in sorted(cells):
        agg = aggregate_records(cells[(defense, attack)], defense, attack)
        rows.append(
            {
                "defense": defense,
                "attack": attack,
                "mean_quality": agg.mean_quality,
                "mean_robustness": agg.mean_robustness,
                "count": agg.count,
            }
        )
    return rows


def write_records_csv(records: Sequence[EvalRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "defense", "attack", "quality_epe", "robustness_epe"])
        for r in records:
            writer.writerow(
                [
                    r.frame_id,
                    r.defense,
                    r.attack,
                    _fmt(r.epe_quality),
                    _fmt(r.epe_robustness),
                ]
            )


def write_scatter_csv(rows: Sequence[dict], path) -> None:
    """Plot-ready (quality, robustness, label) triples; log-log recommended."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quality_epe", "robustness_epe", "label"])
        for row in rows:
            writer.writerow(
                [_fmt(row["mean_quality"]), _fmt(row["mean_robustness"]), row["label"]]
            )


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"
