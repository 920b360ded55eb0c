from .horn_schunck import (
    FlowEstimator,
    FrameDerivativesStage,
    HornSchunck,
    HornSchunckConfig,
    JacobiIterationStage,
    LuminanceStage,
    PackFlowStage,
    estimator_backward,
)

__all__ = [
    "FlowEstimator",
    "FrameDerivativesStage",
    "HornSchunck",
    "HornSchunckConfig",
    "JacobiIterationStage",
    "LuminanceStage",
    "PackFlowStage",
    "estimator_backward",
]
