from __future__ import annotations

from pathlib import Path

import torch

from ..container import load_container, save_container
from .config import TaggerConfig
from .model import TaggerModel

KIND = "tagger"


def save_model(model: TaggerModel, path: str | Path) -> None:
    arrays = {name: p.detach().numpy().copy() for name, p in model.named_parameters()}
    meta = {"config": model.config.to_dict(), "label_sets": model.label_sets}
    save_container(path, KIND, meta, arrays)


def load_model(path: str | Path) -> TaggerModel:
    meta, arrays = load_container(path, KIND)
    model = TaggerModel(TaggerConfig.from_dict(meta["config"]), meta["label_sets"])
    state = {name: torch.from_numpy(arr) for name, arr in arrays.items()}
    model.load_state_dict(state, strict=True)
    model.eval()
    return model
