"""Model and training configuration."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field as dc_field

from fieldmeta.errors import ShapeMismatch


@dataclass(frozen=True)
class EncoderDims:
    layers: int = 2
    heads: int = 8
    d_tok: int = 192
    d_ent: int = 100
    d_h: int = 64

    def __post_init__(self) -> None:
        if min(self.layers, self.heads, self.d_tok, self.d_ent, self.d_h) <= 0:
            raise ShapeMismatch("encoder dimensions must be positive")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 64
    lr: float = 1e-4
    weight_decay: float = 0.001
    seed: int = 0


@dataclass(frozen=True)
class KdfConfig:
    subtoken: EncoderDims = dc_field(default_factory=lambda: EncoderDims(d_tok=192))
    column: EncoderDims = dc_field(default_factory=lambda: EncoderDims(d_tok=128))
    m: float = 0.5  # half-visible weight for same-row/column entities
    knowledge_on: bool = True
    distribution_on: bool = True
    attention_scale: bool = False  # fusion attention is unscaled as written; opt-in
    dropout: float = 0.0
    max_rows: int = 8
    max_tokens_per_cell: int = 2
    n_stats: int = 31
    training: TrainConfig = dc_field(default_factory=TrainConfig)

    def __post_init__(self) -> None:
        if not 0.0 < self.m < 1.0:
            raise ShapeMismatch(f"m must lie strictly in (0, 1), got {self.m}")
        if self.subtoken_width % self.subtoken.heads != 0:
            raise ShapeMismatch(
                f"sub-token encoder width {self.subtoken_width} not divisible "
                f"by {self.subtoken.heads} heads"
            )

    @property
    def subtoken_width(self) -> int:
        return self.subtoken.d_tok + (self.subtoken.d_h if self.knowledge_on else 0)

    @property
    def column_fused_width(self) -> int:
        width = self.column.d_tok
        if self.distribution_on:
            width += self.n_stats
        if self.knowledge_on:
            width += self.column.d_h
        return width

    @property
    def column_encoder_width(self) -> int:
        # fused width rounded up to the next multiple of the head count
        heads = self.column.heads
        return ((self.column_fused_width + heads - 1) // heads) * heads

    def to_json_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_json_dict(doc: dict) -> "KdfConfig":
        doc = dict(doc)
        doc["subtoken"] = EncoderDims(**doc["subtoken"])
        doc["column"] = EncoderDims(**doc["column"])
        doc["training"] = TrainConfig(**doc["training"])
        return KdfConfig(**doc)
