from .stage import Stage, StageTape, TapeValue, run_forward, run_backward, EXACT, BPDA
from .check import grad_check, GradCheckReport
from .elementwise import (
    ScaleStage,
    ClipStage,
    TanhStage,
    CovMaterializeStage,
    AddWeightedStage,
)

__all__ = [
    "Stage",
    "StageTape",
    "TapeValue",
    "run_forward",
    "run_backward",
    "EXACT",
    "BPDA",
    "grad_check",
    "GradCheckReport",
    "ScaleStage",
    "ClipStage",
    "TanhStage",
    "CovMaterializeStage",
    "AddWeightedStage",
]
