from .corpus import CorpusSpec, generate_split, load_split, make_clip, materialize
from .loop import TrainConfig, TrainReport, clip_grad_norm, sample_clip_pair, select_best, smoothed, train
from .optim import AdamW

__all__ = [
    "AdamW",
    "CorpusSpec",
    "TrainConfig",
    "TrainReport",
    "clip_grad_norm",
    "generate_split",
    "load_split",
    "make_clip",
    "materialize",
    "sample_clip_pair",
    "select_best",
    "smoothed",
    "train",
]
