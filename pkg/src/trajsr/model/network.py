"""GCN road embedding + transformer encoder/decoder, written on the tape in ``trajsr.tensor``.

Shapes (one trajectory at a time):

* encoder input: (L, 3) normalised lat, lon, t plus a length-L real-position mask
* GCN input: (N, N) inverse-distance adjacency and (N, 2) normalised node lat/lon
* decoder output: (L, 2) normalised lat/lon offsets

The decoder runs non-autoregressively: its queries are the encoder outputs and
it cross-attends over the encoder memory concatenated with the GCN node
embeddings. ``predict`` adds the offsets to the degraded input coordinates.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .. import tensor as T
from ..errors import InvalidArgument, SequenceTooLong, ShapeError
from ..tensor import Tensor


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 32
    n_heads: int = 2
    n_enc_layers: int = 2
    n_dec_layers: int = 2
    ff_mult: int = 4
    gcn_layers: int = 2
    gcn_hidden: int = 32
    dropout_p: float = 0.2
    softdtw_gamma: float = 0.1
    max_len: int = 128
    subgraph_radius_km: float = 0.5
    lr: float = 1e-3
    batch_size: int = 16
    epochs: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.d_model < 1 or self.n_heads < 1 or self.d_model % self.n_heads:
            raise InvalidArgument(f"d_model {self.d_model} must be divisible by n_heads {self.n_heads}")
        if self.max_len < 2:
            raise InvalidArgument("max_len must be >= 2")
        if not self.softdtw_gamma > 0:
            raise InvalidArgument("softdtw_gamma must be positive")
        if not 0.0 <= self.dropout_p < 1.0:
            raise InvalidArgument("dropout_p must lie in [0, 1)")
        if self.n_enc_layers < 0 or self.n_dec_layers < 0 or self.gcn_layers < 1 or self.ff_mult < 1:
            raise InvalidArgument("layer counts must be non-negative (gcn_layers >= 1)")
        if self.batch_size < 1 or self.epochs < 0 or not self.lr > 0 or not self.subgraph_radius_km > 0:
            raise InvalidArgument("batch_size, lr and subgraph_radius_km must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        names = {f.name: f.type for f in fields(cls)}
        unknown = set(d) - set(names)
        if unknown:
            raise InvalidArgument(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


# ---------------------------------------------------------------- parameters


def _attn_shapes(prefix: str, d: int) -> list[tuple[str, tuple[int, ...]]]:
    out = []
    for w in ("q", "k", "v", "o"):
        out += [(f"{prefix}.W{w}", (d, d)), (f"{prefix}.b{w}", (d,))]
    return out


def _ln_shapes(prefix: str, d: int):
    return [(f"{prefix}.g", (d,)), (f"{prefix}.b", (d,))]


def _ff_shapes(prefix: str, d: int, h: int):
    return [(f"{prefix}.W1", (d, h)), (f"{prefix}.b1", (h,)), (f"{prefix}.W2", (h, d)), (f"{prefix}.b2", (d,))]


def param_manifest(cfg: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Every parameter name and shape, in a fixed order."""
    d, h = cfg.d_model, cfg.d_model * cfg.ff_mult
    m: list[tuple[str, tuple[int, ...]]] = []
    dims = [2] + [cfg.gcn_hidden] * (cfg.gcn_layers - 1) + [d]
    for k in range(cfg.gcn_layers):
        m += [(f"gcn.{k}.W", (dims[k], dims[k + 1])), (f"gcn.{k}.b", (dims[k + 1],))]
    m += [("enc.in.W", (3, d)), ("enc.in.b", (d,))]
    for k in range(cfg.n_enc_layers):
        p = f"enc.{k}"
        m += _ln_shapes(f"{p}.ln1", d) + _attn_shapes(f"{p}.attn", d)
        m += _ln_shapes(f"{p}.ln2", d) + _ff_shapes(f"{p}.ff", d, h)
    m += _ln_shapes("enc.ln_f", d)
    for k in range(cfg.n_dec_layers):
        p = f"dec.{k}"
        m += _ln_shapes(f"{p}.ln1", d) + _attn_shapes(f"{p}.self", d)
        m += _ln_shapes(f"{p}.ln2", d) + _attn_shapes(f"{p}.cross", d)
        m += _ln_shapes(f"{p}.ln3", d) + _ff_shapes(f"{p}.ff", d, h)
    m += _ln_shapes("dec.ln_f", d)
    m += [("head.W", (d, 2)), ("head.b", (2,))]
    return m


def init_params(cfg: ModelConfig, rng: np.random.Generator) -> dict[str, Tensor]:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases; LayerNorm at (1, 0)."""
    params: dict[str, Tensor] = {}
    fan_in = 1
    for name, shape in param_manifest(cfg):
        leaf = name.rsplit(".", 1)[-1]
        is_ln = ".ln" in name
        if is_ln:
            data = np.ones(shape) if leaf == "g" else np.zeros(shape)
        else:
            if len(shape) == 2:
                fan_in = shape[0]
            bound = 1.0 / math.sqrt(fan_in)
            data = rng.uniform(-bound, bound, size=shape)
        params[name] = Tensor(data, requires_grad=True, name=name)
    return params


# ---------------------------------------------------------------- building blocks


def linear(x: Tensor, params, prefix: str, w: str = "W", b: str = "b") -> Tensor:
    return T.matmul(x, params[f"{prefix}.{w}"]) + params[f"{prefix}.{b}"]


def _ln(x: Tensor, params, prefix: str) -> Tensor:
    return T.layer_norm(x, params[f"{prefix}.g"], params[f"{prefix}.b"])


def attention(q_in: Tensor, kv_in: Tensor, key_mask: np.ndarray, params, prefix: str,
              n_heads: int) -> Tensor:
    """Multi-head scaled dot-product attention; ``key_mask`` is True at visible keys."""
    lq, d = q_in.shape
    lk = kv_in.shape[0]
    dh = d // n_heads

    def heads(x: Tensor, n: int) -> Tensor:
        return T.transpose(T.reshape(x, (n, n_heads, dh)), (1, 0, 2))

    q = heads(linear(q_in, params, prefix, "Wq", "bq"), lq)
    k = heads(linear(kv_in, params, prefix, "Wk", "bk"), lk)
    v = heads(linear(kv_in, params, prefix, "Wv", "bv"), lk)
    logits = T.scale(T.matmul(q, T.transpose(k)), 1.0 / math.sqrt(dh))
    w = T.softmax(logits, mask=np.asarray(key_mask, dtype=bool)[None, None, :])
    ctx = T.reshape(T.transpose(T.matmul(w, v), (1, 0, 2)), (lq, d))
    return linear(ctx, params, prefix, "Wo", "bo")


def feed_forward(x: Tensor, params, prefix: str) -> Tensor:
    return linear(T.gelu(linear(x, params, prefix, "W1", "b1")), params, prefix, "W2", "b2")


def positional_encoding(length: int, d: int) -> np.ndarray:
    pos = np.arange(length)[:, None]
    div = np.exp(np.arange(0, d, 2) * (-math.log(10000.0) / d))
    pe = np.zeros((length, d))
    pe[:, 0::2] = np.sin(pos * div)
    pe[:, 1::2] = np.cos(pos * div)[:, : d // 2]
    return pe


def normalized_adjacency(adj: np.ndarray) -> np.ndarray:
    """D^-1/2 (A + I) D^-1/2 with D the degree of A + I."""
    adj = np.asarray(adj, dtype=np.float64)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise InvalidArgument(f"adjacency must be square, got {adj.shape}")
    if not np.array_equal(adj, adj.T):
        raise InvalidArgument("adjacency must be symmetric")
    if np.any(adj < 0):
        raise InvalidArgument("adjacency must be non-negative")
    a = adj + np.eye(len(adj))
    dinv = 1.0 / np.sqrt(a.sum(axis=1))
    return a * dinv[:, None] * dinv[None, :]


def _drop(x: Tensor, cfg: ModelConfig, rng) -> Tensor:
    return T.dropout(x, cfg.dropout_p, rng)


# ---------------------------------------------------------------- model pieces


def gcn_embed(adj_inv: np.ndarray, node_feats: np.ndarray, params, cfg: ModelConfig,
              a_hat: np.ndarray | None = None) -> Tensor:
    """Stacked graph convolutions H <- relu(Â H W + b); the last layer is linear."""
    if a_hat is None:
        a_hat = normalized_adjacency(adj_inv)
    a = Tensor(a_hat)
    h = Tensor(node_feats)
    if h.shape != (a_hat.shape[0], 2):
        raise ShapeError(f"node features {h.shape} do not match adjacency {a_hat.shape}")
    for k in range(cfg.gcn_layers):
        h = T.matmul(a, T.matmul(h, params[f"gcn.{k}.W"])) + params[f"gcn.{k}.b"]
        if k < cfg.gcn_layers - 1:
            h = T.relu(h)
    return h


def _mask_rows(x: Tensor, pad_mask: np.ndarray) -> Tensor:
    if pad_mask.all():
        return x
    return T.mul(x, Tensor(pad_mask.astype(np.float64)[:, None]))


def _check_mask(pad_mask, length: int) -> np.ndarray:
    pad_mask = np.asarray(pad_mask, dtype=bool)
    if pad_mask.shape != (length,):
        raise ShapeError(f"pad mask shape {pad_mask.shape} does not match sequence length {length}")
    if not pad_mask.any():
        raise InvalidArgument("pad mask has no real positions")
    return pad_mask


def encode(traj_norm: np.ndarray, pad_mask, params, cfg: ModelConfig, rng=None) -> Tensor:
    traj_norm = np.asarray(traj_norm, dtype=np.float64)
    if traj_norm.ndim != 2 or traj_norm.shape[1] != 3:
        raise ShapeError(f"encoder input must be (L, 3), got {traj_norm.shape}")
    length = traj_norm.shape[0]
    if length > cfg.max_len:
        raise SequenceTooLong(f"sequence length {length} exceeds max_len {cfg.max_len}")
    pad_mask = _check_mask(pad_mask, length)
    x = linear(Tensor(traj_norm), params, "enc.in") + positional_encoding(length, cfg.d_model)
    for k in range(cfg.n_enc_layers):
        p = f"enc.{k}"
        h = _ln(x, params, f"{p}.ln1")
        x = x + _drop(attention(h, h, pad_mask, params, f"{p}.attn", cfg.n_heads), cfg, rng)
        x = x + _drop(feed_forward(_ln(x, params, f"{p}.ln2"), params, f"{p}.ff"), cfg, rng)
    return _mask_rows(_ln(x, params, "enc.ln_f"), pad_mask)


def decode(memory: Tensor, gcn_embeds: Tensor, pad_mask, params, cfg: ModelConfig, rng=None) -> Tensor:
    if memory.ndim != 2 or gcn_embeds.ndim != 2 or memory.shape[1] != gcn_embeds.shape[1]:
        raise ShapeError(f"memory {memory.shape} and GCN embeddings {gcn_embeds.shape} disagree on d_model")
    if gcn_embeds.shape[0] < 1:
        raise ShapeError("need at least one GCN node")
    pad_mask = _check_mask(pad_mask, memory.shape[0])
    keys = T.concat([memory, gcn_embeds], axis=0)
    key_mask = np.concatenate([pad_mask, np.ones(gcn_embeds.shape[0], dtype=bool)])
    x = memory
    for k in range(cfg.n_dec_layers):
        p = f"dec.{k}"
        h = _ln(x, params, f"{p}.ln1")
        x = x + _drop(attention(h, h, pad_mask, params, f"{p}.self", cfg.n_heads), cfg, rng)
        h = _ln(x, params, f"{p}.ln2")
        x = x + _drop(attention(h, keys, key_mask, params, f"{p}.cross", cfg.n_heads), cfg, rng)
        x = x + _drop(feed_forward(_ln(x, params, f"{p}.ln3"), params, f"{p}.ff"), cfg, rng)
    out = linear(_ln(x, params, "dec.ln_f"), params, "head")
    return _mask_rows(out, pad_mask)


def predict(traj_norm: np.ndarray, pad_mask, a_hat: np.ndarray, node_feats: np.ndarray, params,
            cfg: ModelConfig, rng=None) -> Tensor:
    """Full forward pass: normalised refined lat/lon, (L, 2)."""
    traj_norm = np.asarray(traj_norm, dtype=np.float64)
    pad_mask = np.asarray(pad_mask, dtype=bool)
    memory = encode(traj_norm, pad_mask, params, cfg, rng)
    nodes = gcn_embed(None, node_feats, params, cfg, a_hat=a_hat)
    offsets = decode(memory, nodes, pad_mask, params, cfg, rng)
    base = traj_norm[:, :2] * pad_mask[:, None]
    return offsets + base
