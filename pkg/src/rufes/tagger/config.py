from __future__ import annotations

from dataclasses import asdict, dataclass, fields

# From-scratch default; the fine-tuning rate suits a pretrained encoder only.
FROM_SCRATCH_LR = 1e-3
FINE_TUNING_LR = 2e-5


@dataclass(frozen=True)
class TaggerConfig:
    vocab_size: int
    hidden: int = 128
    num_layers: int = 2
    num_heads: int = 8
    ffn_dims: int | None = None
    epochs: int = 10
    learning_rate: float = FROM_SCRATCH_LR
    weight_decay: float = 0.01
    batch_size: int = 8
    max_seq_len: int = 128
    seed: int = 0
    layer_norm_eps: float = 1e-5
    dropout: float = 0.1
    word_dropout: float = 0.1
    init_std: float = 0.1

    def __post_init__(self) -> None:
        if self.ffn_dims is None:
            object.__setattr__(self, "ffn_dims", 4 * self.hidden)
        for name in ("vocab_size", "hidden", "num_layers", "num_heads", "ffn_dims", "epochs",
                     "batch_size", "max_seq_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.hidden % self.num_heads:
            raise ValueError(
                f"hidden ({self.hidden}) must be divisible by num_heads ({self.num_heads})"
            )
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        for name in ("dropout", "word_dropout"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must be in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")

    @property
    def head_dim(self) -> int:
        return self.hidden // self.num_heads

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> TaggerConfig:
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})
