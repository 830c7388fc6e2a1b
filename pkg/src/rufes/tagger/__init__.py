"""Multitask Transformer + CRF sequence tagger."""

from .config import FINE_TUNING_LR, FROM_SCRATCH_LR, TaggerConfig
from .crf import crf_log_partition, crf_marginals, crf_path_score, viterbi_decode
from .layers import embed, layer_norm, multi_head_attention, transformer_block
from .model import TaggerModel
from .predict import predict, tag_sequence
from .serialize import load_model, save_model
from .train import TrainingDiverged, build_label_sets, train
from .vocab import Vocab

__all__ = [
    "FINE_TUNING_LR", "FROM_SCRATCH_LR", "TaggerConfig", "TaggerModel", "TrainingDiverged", "Vocab",
    "build_label_sets", "crf_log_partition", "crf_marginals", "crf_path_score", "embed", "layer_norm",
    "load_model", "multi_head_attention", "predict", "save_model", "tag_sequence", "train",
    "transformer_block", "viterbi_decode",
]
