"""Checkpoint container.

Layout::

    b"TRAJSR1\\n"                magic
    uint64 little-endian         header length in bytes
    header                       UTF-8 JSON (config, norm stats, hex grid, bbox,
                                 training log, weight manifest)
    payload                      little-endian float64 arrays, concatenated

Each manifest entry is ``{"name", "shape", "offset"}`` with ``offset`` in bytes
from the start of the payload. The header is written with sorted keys so equal
checkpoints serialise to equal bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from ..degrade import HexGrid, NormStats
from ..errors import CheckpointError
from .network import ModelConfig, param_manifest

MAGIC = b"TRAJSR1\n"


@dataclass
class Checkpoint:
    config: ModelConfig
    weights: dict[str, np.ndarray]
    norm_stats: NormStats
    hexgrid: HexGrid | None = None
    bbox: tuple[tuple[float, float], tuple[float, float]] | None = None
    training_log: list[float] = field(default_factory=list)

    def validate(self) -> None:
        for name, shape in param_manifest(self.config):
            if name not in self.weights:
                raise CheckpointError(f"missing weight {name!r}")
            if tuple(self.weights[name].shape) != tuple(shape):
                raise CheckpointError(f"weight {name!r} has shape {self.weights[name].shape}, expected {shape}")

    def to_bytes(self) -> bytes:
        self.validate()
        manifest, chunks, offset = [], [], 0
        for name, shape in param_manifest(self.config):
            arr = np.ascontiguousarray(self.weights[name], dtype="<f8")
            manifest.append({"name": name, "shape": list(shape), "offset": offset})
            chunks.append(arr.tobytes())
            offset += arr.nbytes
        header = {
            "format": "TRAJSR1",
            "config": self.config.to_dict(),
            "norm_stats": self.norm_stats.to_dict(),
            "hexgrid": self.hexgrid.to_dict() if self.hexgrid else None,
            "bbox": [list(self.bbox[0]), list(self.bbox[1])] if self.bbox else None,
            "training_log": [float(x) for x in self.training_log],
            "weights": manifest,
        }
        hb = json.dumps(header, sort_keys=True).encode("utf-8")
        return MAGIC + struct.pack("<Q", len(hb)) + hb + b"".join(chunks)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Checkpoint":
        if not blob.startswith(MAGIC):
            raise CheckpointError("not a TRAJSR1 checkpoint (bad magic)")
        pos = len(MAGIC)
        try:
            (hlen,) = struct.unpack_from("<Q", blob, pos)
            header = json.loads(blob[pos + 8: pos + 8 + hlen].decode("utf-8"))
        except (struct.error, ValueError) as exc:
            raise CheckpointError(f"corrupt checkpoint header: {exc}") from None
        payload = memoryview(blob)[pos + 8 + hlen:]
        weights = {}
        for ent in header["weights"]:
            shape = tuple(ent["shape"])
            n = int(np.prod(shape)) if shape else 1
            start = ent["offset"]
            if start + 8 * n > len(payload):
                raise CheckpointError(f"payload too short for weight {ent['name']!r}")
            weights[ent["name"]] = np.frombuffer(payload[start:start + 8 * n], dtype="<f8").reshape(shape).astype(np.float64)
        bbox = header.get("bbox")
        ck = cls(
            config=ModelConfig.from_dict(header["config"]),
            weights=weights,
            norm_stats=NormStats.from_dict(header["norm_stats"]),
            hexgrid=HexGrid.from_dict(header["hexgrid"]) if header.get("hexgrid") else None,
            bbox=(tuple(bbox[0]), tuple(bbox[1])) if bbox else None,
            training_log=list(header.get("training_log", [])),
        )
        ck.validate()
        return ck

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Checkpoint":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())
