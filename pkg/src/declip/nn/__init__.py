from .checkpoint import load_checkpoint, save_checkpoint
from .deftan import DeclipModel, ModelConfig, assemble_input, declip_forward
from .module import Module
from .tgram import TgramConfig, TgramNet

__all__ = [
    "DeclipModel",
    "ModelConfig",
    "Module",
    "TgramConfig",
    "TgramNet",
    "assemble_input",
    "declip_forward",
    "load_checkpoint",
    "save_checkpoint",
]
