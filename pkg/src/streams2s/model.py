from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Union

import numpy as np

from .binary.reader import BytesLike, ContainerError, read_weight_container
from .binary.writer import write_weight_container
from .decoder import DecoderWeights
from .encoders import EncoderLayer, EncoderWeights
from .kernels import RecurrentCellParams
from .models.config import ModelConfig

log = logging.getLogger(__name__)


def _cell_tensors(prefix: str, cell: RecurrentCellParams) -> Dict[str, np.ndarray]:
    return {
        f"{prefix}.w_input": cell.w_input,
        f"{prefix}.w_recurrent": cell.w_recurrent,
        f"{prefix}.bias": cell.bias,
    }


def _cell(tensors: Dict[str, np.ndarray], prefix: str) -> RecurrentCellParams:
    try:
        return RecurrentCellParams(
            w_input=tensors[f"{prefix}.w_input"],
            w_recurrent=tensors[f"{prefix}.w_recurrent"],
            bias=tensors[f"{prefix}.bias"],
        )
    except KeyError as e:
        raise ContainerError(f"missing tensor {e.args[0]!r}") from e


@dataclass(frozen=True)
class ModelWeights:
    """Encoder and decoder weights plus the config they were built for."""

    config: ModelConfig
    encoder: EncoderWeights
    decoder: DecoderWeights

    def check(self) -> None:
        self.encoder.check(self.config.encoder, self.config.feature_dim)
        self.decoder.check()

    def to_tensors(self) -> Dict[str, np.ndarray]:
        out: Dict[str, np.ndarray] = {"enc.skip": self.encoder.skip, "enc.out": self.encoder.out}
        for i, layer in enumerate(self.encoder.layers):
            out.update(_cell_tensors(f"enc.{i}.fwd", layer.forward))
            if layer.backward is not None:
                out.update(_cell_tensors(f"enc.{i}.bwd", layer.backward))
        d = self.decoder
        out.update({
            "dec.embedding": d.embedding,
            "dec.query": d.query,
            "dec.positions": d.positions,
            "dec.emb_proj": d.emb_proj,
            "dec.out_w": d.out_w,
            "dec.out_b": d.out_b,
        })
        for i, cell in enumerate(d.layers):
            out.update(_cell_tensors(f"dec.{i}", cell))
        return out

    @classmethod
    def from_tensors(cls, config: ModelConfig, tensors: Dict[str, np.ndarray]) -> "ModelWeights":
        enc_cfg = config.encoder
        layers = tuple(
            EncoderLayer(
                forward=_cell(tensors, f"enc.{i}.fwd"),
                backward=_cell(tensors, f"enc.{i}.bwd") if enc_cfg.directions == 2 else None,
            )
            for i in range(enc_cfg.layers)
        )
        try:
            encoder = EncoderWeights(skip=tensors["enc.skip"], layers=layers, out=tensors["enc.out"])
            decoder = DecoderWeights(
                embedding=tensors["dec.embedding"],
                layers=tuple(_cell(tensors, f"dec.{i}") for i in range(config.decoder_layers)),
                query=tensors["dec.query"],
                positions=tensors["dec.positions"],
                emb_proj=tensors["dec.emb_proj"],
                out_w=tensors["dec.out_w"],
                out_b=tensors["dec.out_b"],
            )
        except KeyError as e:
            raise ContainerError(f"missing tensor {e.args[0]!r}") from e
        model = cls(config=config, encoder=encoder, decoder=decoder)
        model.check()
        return model

    def to_bytes(self) -> bytes:
        return write_weight_container(self.config.model_dump_json(), self.to_tensors())

    @classmethod
    def from_bytes(cls, data: BytesLike) -> "ModelWeights":
        config_json, tensors = read_weight_container(data)
        return cls.from_tensors(ModelConfig.model_validate_json(config_json), tensors)

    def save(self, path: Union[str, Path]) -> str:
        """Writes the container and returns its sha256."""
        data = self.to_bytes()
        Path(path).write_bytes(data)
        digest = hashlib.sha256(data).hexdigest()
        log.info("wrote model %s (%d bytes, sha256 %s)", path, len(data), digest[:12])
        return digest

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ModelWeights":
        return cls.from_bytes(Path(path))
