from .gradcheck import grad_check
from .graphops import Batch
from .layers import gcn_forward, gin_forward, readout_mean, sage_forward
from .model import (
    Examples,
    Model,
    ModelSpec,
    forward,
    graph_examples,
    load_model,
    node_examples,
    predict,
    save_model,
)
from .train import TrainConfig, TrainingDiverged, train

__all__ = [
    "Batch", "Examples", "Model", "ModelSpec", "TrainConfig", "TrainingDiverged",
    "forward", "gcn_forward", "gin_forward", "grad_check", "graph_examples", "load_model",
    "node_examples", "predict", "readout_mean", "sage_forward", "save_model", "train",
]
