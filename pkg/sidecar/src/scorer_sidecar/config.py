"""Service configuration."""

from __future__ import annotations

from dataclasses import dataclass

DEFAULT_NLI_MODEL = "tals/albert-base-vitaminc-mnli"
DEFAULT_EMBED_MODEL = "sentence-transformers/all-mpnet-base-v2"


@dataclass(frozen=True, slots=True)
class SidecarConfig:
    """Checkpoints, bind address, and the per-request batch ceiling.

    The model ids are deployment configuration: the defaults name public
    checkpoints, and whatever actually loads is what /healthz reports.
    """

    nli_model_id: str = DEFAULT_NLI_MODEL
    embed_model_id: str = DEFAULT_EMBED_MODEL
    host: str = "127.0.0.1"
    port: int = 8600
    max_batch: int = 64

    def __post_init__(self) -> None:
        if not self.nli_model_id:
            raise ValueError("nli_model_id must be a nonempty string")
        if not self.embed_model_id:
            raise ValueError("embed_model_id must be a nonempty string")
        if not self.host:
            raise ValueError("host must be a nonempty string")
        if not 0 < self.port < 65536:
            raise ValueError(f"port must be in 1..65535, got {self.port}")
        if self.max_batch < 1:
            raise ValueError(f"max_batch must be at least 1, got {self.max_batch}")
