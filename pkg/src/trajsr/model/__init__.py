"""GCN + transformer trajectory super-resolution model."""

from .checkpoint import Checkpoint
from .network import ModelConfig, decode, encode, gcn_embed, init_params, param_manifest, predict
from .softdtw import softdtw, softdtw_loss
from .training import reconstruct, reconstruct_many, train

__all__ = [
    "Checkpoint", "ModelConfig", "decode", "encode", "gcn_embed", "init_params", "param_manifest",
    "predict", "reconstruct", "reconstruct_many", "softdtw", "softdtw_loss", "train",
]
