"""Training loop and inference for the super-resolution model."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .. import tensor as T
from ..degrade import HexGrid, NormStats, fit_norm_stats, normalize, normalize_coords, denormalize
from ..errors import EmptySubgraph, InvalidArgument, NumericError, ReconstructionError, SequenceTooLong, TrainingError
from ..roadnet import RoadGraph, inverse_distance_weights, local_subgraph
from ..seeding import stage_rng
from ..trajectory import Trajectory
from .checkpoint import Checkpoint
from .network import ModelConfig, init_params, normalized_adjacency, predict
from .softdtw import softdtw_loss

log = logging.getLogger(__name__)


@dataclass
class Sample:
    traj_id: str
    x: np.ndarray  # (L, 3) normalised degraded lat, lon, t
    a_hat: np.ndarray  # (N, N) normalised adjacency of the local subgraph
    node_feats: np.ndarray  # (N, 2) normalised node lat, lon
    target: np.ndarray | None = None  # (L', 2) normalised original lat, lon

    @property
    def mask(self) -> np.ndarray:
        return np.ones(len(self.x), dtype=bool)


def prepare_sample(g: RoadGraph, degraded: Trajectory, stats: NormStats, cfg: ModelConfig,
                   original: Trajectory | None = None) -> Sample:
    if len(degraded) > cfg.max_len:
        raise SequenceTooLong(f"trajectory {degraded.id!r} has {len(degraded)} points; max_len is {cfg.max_len}")
    sg = local_subgraph(g, degraded, cfg.subgraph_radius_km)
    a_hat = normalized_adjacency(inverse_distance_weights(sg))
    feats = normalize_coords(sg.graph.lat, sg.graph.lon, stats)
    target = None if original is None else normalize_coords(original.lat, original.lon, stats)
    return Sample(degraded.id, normalize(degraded, stats), a_hat, feats, target)


def params_from_weights(weights: dict[str, np.ndarray], trainable: bool = False) -> dict[str, T.Tensor]:
    return {k: T.Tensor(v, requires_grad=trainable, name=k) for k, v in weights.items()}


def sample_loss(s: Sample, params, cfg: ModelConfig, rng=None) -> T.Tensor:
    pred = predict(s.x, s.mask, s.a_hat, s.node_feats, params, cfg, rng)
    return softdtw_loss(pred, s.target, cfg.softdtw_gamma)


def train(g: RoadGraph, pairs: list[tuple[Trajectory, Trajectory]], cfg: ModelConfig,
          hexgrid: HexGrid | None = None,
          on_epoch: Callable[[int, float], None] | None = None) -> Checkpoint:
    """Fit on (degraded, original) pairs. Deterministic for a given ``cfg.seed``."""
    if not pairs:
        raise TrainingError("no training pairs")
    for deg, orig in pairs:
        if len(deg) < 2 or len(orig) < 2:
            raise InvalidArgument(f"trajectory {deg.id!r} is shorter than 2 points")
    originals = [o for _, o in pairs]
    stats = fit_norm_stats(originals)
    samples = [prepare_sample(g, d, stats, cfg, o) for d, o in pairs]

    params = init_params(cfg, stage_rng(cfg.seed, "init"))
    shuffle_rng = stage_rng(cfg.seed, "shuffle")
    drop_rng = stage_rng(cfg.seed, "dropout") if cfg.dropout_p > 0 else None
    opt = T.AdamState(lr=cfg.lr)
    history: list[float] = []

    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(len(samples))
        total = 0.0
        for b, start in enumerate(range(0, len(order), cfg.batch_size)):
            batch = [samples[k] for k in order[start:start + cfg.batch_size]]
            try:
                losses = [sample_loss(s, params, cfg, drop_rng) for s in batch]
                loss = T.scale(losses[0] if len(losses) == 1 else _sum(losses), 1.0 / len(losses))
                loss.backward()
                T.adam_step(params, opt)
            except NumericError as exc:
                raise TrainingError(f"non-finite value at epoch {epoch}, batch {b}: {exc}") from None
            T.zero_grad(params)
            total += loss.item() * len(batch)
        mean_loss = total / len(samples)
        history.append(mean_loss)
        log.info("epoch %d loss %.6f", epoch, mean_loss)
        if on_epoch is not None:
            on_epoch(epoch, mean_loss)

    lat = np.concatenate([o.lat for o in originals])
    lon = np.concatenate([o.lon for o in originals])
    bbox = ((float(lat.min()), float(lon.min())), (float(lat.max()), float(lon.max())))
    return Checkpoint(cfg, {k: p.data.copy() for k, p in params.items()}, stats, hexgrid, bbox, history)


def _sum(ts):
    out = ts[0]
    for t in ts[1:]:
        out = out + t
    return out


def reconstruct(ckpt: Checkpoint, g: RoadGraph, degraded: Trajectory, params=None) -> Trajectory:
    """Refined copy of ``degraded``: same id, length and timestamps."""
    cfg = ckpt.config
    if not 2 <= len(degraded) <= cfg.max_len:
        raise InvalidArgument(f"trajectory length {len(degraded)} outside [2, {cfg.max_len}]")
    try:
        s = prepare_sample(g, degraded, ckpt.norm_stats, cfg)
    except EmptySubgraph as exc:
        raise ReconstructionError(f"{exc}; increase subgraph_radius_km (now {cfg.subgraph_radius_km})") from None
    params = params if params is not None else params_from_weights(ckpt.weights)
    pred = predict(s.x, s.mask, s.a_hat, s.node_feats, params, cfg)
    lat, lon = denormalize(pred.data, ckpt.norm_stats)
    if ckpt.bbox is not None:
        (la0, lo0), (la1, lo1) = ckpt.bbox
        mla, mlo = 0.1 * (la1 - la0), 0.1 * (lo1 - lo0)
        lat = np.clip(lat, la0 - mla, la1 + mla)
        lon = np.clip(lon, lo0 - mlo, lo1 + mlo)
    return degraded.with_coords(lat, lon)


def reconstruct_many(ckpt: Checkpoint, g: RoadGraph, trajs: list[Trajectory]) -> list[Trajectory]:
    params = params_from_weights(ckpt.weights)
    return [reconstruct(ckpt, g, tr, params) for tr in trajs]
