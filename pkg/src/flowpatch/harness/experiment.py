"""Experiment orchestration: train a grid of patches, evaluate the full
defense x attack matrix, and emit deterministic CSV summaries.

Grid cells are (awareness, optimizer, learning rate, box, seed).  Each cell
trains one patch against the awareness-matched defense; every trained patch
is then evaluated against every configured defense.  Diverged cells are
recorded as "div" and the run continues; unexpected errors mark the cell
"fail" without touching other cells.  Identical configs (seeds included)
produce byte-identical CSVs.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..attack.losses import ILP_AWARE, LGS_AWARE, VANILLA
from ..attack.optimize import AttackConfig, train_patch
from ..attack.patch import Patch
from ..core.ppm import write_ppm
from ..core.raster import Image
from ..defense.pipeline import DefenseConfig, ilp_config, lgs_config
from ..errors import DivergenceError
from ..flow.horn_schunck import HornSchunck, HornSchunckConfig
from ..metrics import EvalFrame, evaluate_pipeline
from .dataset import ingest_dataset, load_frames, synth_dataset

NO_DEFENSE = "none"


@dataclass(frozen=True)
class GridCell:
    optimizer: str
    learning_rate: float
    box: str


@dataclass(frozen=True)
class ExperimentConfig:
    """Desk-scale defaults: 64x128 synthetic frames, patch side 24, 300
    training steps, 2 seeds."""

    output_dir: str
    data_dir: str | None = None
    synthetic: dict = field(
        default_factory=lambda: {"count": 3, "height": 64, "width": 128, "seed": 7}
    )
    estimator: dict = field(default_factory=lambda: {"alpha": 15.0, "iterations": 200})
    defenses: tuple[str, ...] = (NO_DEFENSE, "lgs", "ilp")
    defense_overrides: dict = field(default_factory=dict)
    awareness: tuple[str, ...] = (VANILLA, LGS_AWARE, ILP_AWARE)
    attack_grid: tuple[GridCell, ...] = (GridCell("ifgsm", 0.1, "clip"),)
    steps: int = 300
    alpha_penalty: float = 1e-8
    patch_side: int = 24
    seeds: tuple[int, ...] = (0, 1)
    eval_seed: int = 1234
    workers: int = 1

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["attack_grid"] = [dataclasses.asdict(c) for c in self.attack_grid]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        if "attack_grid" in data:
            data["attack_grid"] = tuple(
                GridCell(**c) if isinstance(c, dict) else c for c in data["attack_grid"]
            )
        for key in ("defenses", "awareness", "seeds"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)

    def config_hash(self) -> str:
        """Hash of the result-determining fields (where outputs land and how
        many workers ran do not change any produced value)."""
        data = self.to_dict()
        data.pop("output_dir")
        data.pop("workers")
        canonical = json.dumps(data, sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:12]

    def defense_config(self, name: str) -> DefenseConfig | None:
        if name == NO_DEFENSE:
            return None
        overrides = self.defense_overrides.get(name, {})
        return lgs_config(**overrides) if name == "lgs" else ilp_config(**overrides)

    def make_estimator(self) -> HornSchunck:
        return HornSchunck(
            HornSchunckConfig(
                alpha=self.estimator.get("alpha", 15.0),
                iterations=self.estimator.get("iterations", 200),
            )
        )


def _awareness_defense(cfg: ExperimentConfig, awareness: str) -> DefenseConfig | None:
    return cfg.defense_config(NO_DEFENSE if awareness == VANILLA else awareness)


def _train_task(args) -> dict:
    """Worker for one training cell; returns a plain picklable result."""
    (cfg_dict, awareness, cell, seed, pair_arrays) = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    pairs = [(Image(a), Image(b)) for a, b in pair_arrays]
    try:
        attack_cfg = AttackConfig(
            awareness=awareness,
            optimizer=cell.optimizer,
            learning_rate=cell.learning_rate,
            box=cell.box,
            steps=cfg.steps,
            alpha_penalty=cfg.alpha_penalty,
            seed=seed,
        )
        result = train_patch(
            cfg.make_estimator(),
            _awareness_defense(cfg, awareness),
            pairs,
            attack_cfg,
            patch_side=cfg.patch_side,
        )
        return {
            "status": "ok",
            "param": result.patch.param,
            "box": cell.box,
            "losses": result.losses,
        }
    except DivergenceError as exc:
        return {"status": "div", "error": str(exc)}
    except Exception as exc:  # noqa: BLE001 - crash isolation per grid cell
        return {"status": "fail", "error": f"{type(exc).__name__}: {exc}"}


@dataclass
class ExperimentResult:
    output_dir: Path
    hard_failures: int
    report: list[str]


def _fmt(value) -> str:
    return "" if value is None else f"{value:.6f}"


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "patches").mkdir(exist_ok=True)
    config_hash = cfg.config_hash()
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))

    if cfg.data_dir is not None:
        index = ingest_dataset(cfg.data_dir)
    else:
        index = ingest_dataset(synth_dataset(out_dir=out / "dataset", **cfg.synthetic))
    report = list(index.report)
    frames = load_frames(index)
    if not frames:
        raise ValueError("experiment dataset is empty")
    pairs = [(f.frame1, f.frame2) for f in frames]
    pair_arrays = [(a.data, b.data) for a, b in pairs]
    estimator = cfg.make_estimator()

    # Quality of each defended pipeline on unattacked frames (Table-1 axis).
    quality: dict[str, float | None] = {}
    for name in cfg.defenses:
        gt_frames = [f for f in frames if f.ground_truth is not None]
        if gt_frames:
            _, agg = evaluate_pipeline(
                estimator, cfg.defense_config(name), None, gt_frames
            )
            quality[name] = agg.mean_quality
        else:
            quality[name] = None

    tasks = [
        (awareness, cell, seed)
        for awareness in cfg.awareness
        for cell in cfg.attack_grid
        for seed in cfg.seeds
    ]
    worker_args = [
        (cfg.to_dict(), awareness, cell, seed, pair_arrays)
        for (awareness, cell, seed) in tasks
    ]
    workers = int(os.environ.get("FLOWPATCH_WORKERS", cfg.workers))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_train_task, worker_args))
    else:
        outcomes = [_train_task(a) for a in worker_args]

    # Robustness of every trained patch against every configured defense.
    per_seed_rows: list[dict] = []
    hard_failures = 0
    for (awareness, cell, seed), outcome in zip(tasks, outcomes):
        tag = f"{awareness}_{cell.optimizer}_{cell.learning_rate:g}_{cell.box}_seed{seed}"
        if outcome["status"] != "ok":
            report.append(f"{tag}: {outcome['status']} ({outcome.get('error', '')})")
            if outcome["status"] == "fail":
                hard_failures += 1
            for defense in cfg.defenses:
                per_seed_rows.append(
                    {
                        "awareness": awareness,
                        "cell": cell,
                        "seed": seed,
                        "defense": defense,
                        "status": outcome["status"],
                        "robustness": None,
                    }
                )
            continue
        patch = Patch(cfg.patch_side, outcome["box"], outcome["param"])
        _save_patch(out / "patches" / tag, patch, cfg, awareness, cell, seed)
        for defense in cfg.defenses:
            try:
                _, agg = evaluate_pipeline(
                    estimator,
                    cfg.defense_config(defense),
                    patch,
                    frames,
                    seed=cfg.eval_seed,
                    attack_label=awareness,
                    require_quality=False,
                )
                per_seed_rows.append(
                    {
                        "awareness": awareness,
                        "cell": cell,
                        "seed": seed,
                        "defense": defense,
                        "status": "ok",
                        "robustness": agg.mean_robustness,
                    }
                )
            except Exception as exc:  # noqa: BLE001 - crash isolation
                hard_failures += 1
                report.append(f"{tag}/eval/{defense}: {type(exc).__name__}: {exc}")
                per_seed_rows.append(
                    {
                        "awareness": awareness,
                        "cell": cell,
                        "seed": seed,
                        "defense": defense,
                        "status": "fail",
                        "robustness": None,
                    }
                )

    _write_per_seed(out / "per_seed.csv", per_seed_rows, quality, config_hash)
    mean_rows = _mean_rows(cfg, per_seed_rows)
    _write_seed_mean(out / "seed_mean.csv", mean_rows, quality, config_hash)
    headline = _write_headline(out / "headline.csv", cfg, mean_rows, quality, config_hash)
    _write_scatter(out / "scatter.csv", cfg, headline, quality)
    if report:
        (out / "report.txt").write_text("\n".join(report) + "\n")
    return ExperimentResult(out, hard_failures, report)


def _save_patch(prefix: Path, patch: Patch, cfg, awareness, cell, seed) -> None:
    write_ppm(patch.to_image(), prefix.with_suffix(".ppm"))
    sidecar = {
        "side": patch.side,
        "parameterization": patch.parameterization,
        "awareness": awareness,
        "optimizer": cell.optimizer,
        "learning_rate": cell.learning_rate,
        "box": cell.box,
        "steps": cfg.steps,
        "alpha_penalty": cfg.alpha_penalty,
        "seed": seed,
    }
    prefix.with_suffix(".txt").write_text(
        "".join(f"{k}={v}\n" for k, v in sidecar.items())
    )


def _write_per_seed(path, rows, quality, config_hash) -> None:
    lines = ["config,awareness,optimizer,lr,box,seed,defense,status,quality_epe,robustness_epe"]
    for r in rows:
        lines.append(
            ",".join(
                [
                    config_hash,
                    r["awareness"],
                    r["cell"].optimizer,
                    f"{r['cell'].learning_rate:g}",
                    r["cell"].box,
                    str(r["seed"]),
                    r["defense"],
                    r["status"],
                    _fmt(quality.get(r["defense"])),
                    _fmt(r["robustness"]),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def _mean_rows(cfg, per_seed_rows) -> list[dict]:
    rows = []
    for awareness in cfg.awareness:
        for cell in cfg.attack_grid:
            for defense in cfg.defenses:
                group = [
                    r
                    for r in per_seed_rows
                    if r["awareness"] == awareness
                    and r["cell"] == cell
                    and r["defense"] == defense
                ]
                ok = [r for r in group if r["status"] == "ok"]
                if ok:
                    status = "ok" if len(ok) == len(group) else "partial"
                    robustness = float(np.mean([r["robustness"] for r in ok]))
                else:
                    status = group[0]["status"] if group else "fail"
                    robustness = None
                rows.append(
                    {
                        "awareness": awareness,
                        "cell": cell,
                        "defense": defense,
                        "status": status,
                        "n_seeds": len(ok),
                        "robustness": robustness,
                    }
                )
    return rows


def _write_seed_mean(path, mean_rows, quality, config_hash) -> None:
    lines = ["config,awareness,optimizer,lr,box,defense,status,n_seeds,quality_epe,robustness_epe"]
    for r in mean_rows:
        lines.append(
            ",".join(
                [
                    config_hash,
                    r["awareness"],
                    r["cell"].optimizer,
                    f"{r['cell'].learning_rate:g}",
                    r["cell"].box,
                    r["defense"],
                    r["status"],
                    str(r["n_seeds"]),
                    _fmt(quality.get(r["defense"])),
                    _fmt(r["robustness"]),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def _write_headline(path, cfg, mean_rows, quality, config_hash) -> dict:
    """Per (defense, attack awareness): the grid cell with the largest mean
    robustness, i.e. the strongest adversarial configuration."""
    headline: dict[tuple[str, str], dict] = {}
    for r in mean_rows:
        if r["robustness"] is None:
            continue
        key = (r["defense"], r["awareness"])
        if key not in headline or r["robustness"] > headline[key]["robustness"]:
            headline[key] = r
    lines = ["config,defense,attack,optimizer,lr,box,quality_epe,robustness_epe"]
    for (defense, awareness) in sorted(headline):
        r = headline[(defense, awareness)]
        lines.append(
            ",".join(
                [
                    config_hash,
                    defense,
                    awareness,
                    r["cell"].optimizer,
                    f"{r['cell'].learning_rate:g}",
                    r["cell"].box,
                    _fmt(quality.get(defense)),
                    _fmt(r["robustness"]),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")
    return headline


def _write_scatter(path, cfg, headline, quality) -> None:
    """Full-pipeline points: each defense with the attack aware of it."""
    pipeline_attack = {NO_DEFENSE: VANILLA, "lgs": LGS_AWARE, "ilp": ILP_AWARE}
    lines = ["quality_epe,robustness_epe,label"]
    for defense in cfg.defenses:
        attack = pipeline_attack.get(defense)
        entry = headline.get((defense, attack))
        if entry is None:
            continue
        lines.append(
            ",".join([_fmt(quality.get(defense)), _fmt(entry["robustness"]), defense])
        )
    Path(path).write_text("\n".join(lines) + "\n")
