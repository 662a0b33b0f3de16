"""Multi-layer graph convolutional encoder with hand-derived gradients.

Layer rule per graph: H_{i+1} = act(A_hat @ H_i @ W_i), where the weight
product is skipped entirely in the weightless variant. ReLU on every
layer except the last, identity on the last. Node features are re-scaled
to unit Euclidean row length at the start of every forward pass (when
enabled), so the trainable features parameterize directions only.

Both graphs run through the same layer stack; the weight matrices, when
present, are shared between them. In the weightless variant the encoder
has no parameters of its own: the node feature matrices are the only
trainable state.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError
from .linalg import SparseMatrix, row_l2_normalize, row_norms, spmm

INIT_PRESETS = ("unit", "scaled")


def resolve_init_std(preset: str, dim: int) -> float:
    """Embedding initialization std for a named preset.

    'unit' is the standard normal; 'scaled' shrinks with the embedding
    width as dim**-0.5 (reading the width as the scaling variable and
    the quantity as a standard deviation).
    """
    if preset == "unit":
        return 1.0
    if preset == "scaled":
        return float(dim) ** -0.5
    raise ConfigError(f"unknown init preset {preset!r}; expected one of {INIT_PRESETS}")


@dataclass(frozen=True)
class EncoderConfig:
    n_layers: int = 2
    dim: int = 200
    use_weights: bool = False
    init_std: float = 1.0
    init_preset: str | None = "unit"  # informational; recorded in reports
    normalize_features: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.dim <= 0:
            raise ConfigError(f"dim must be positive, got {self.dim}")
        if not 1 <= self.n_layers <= 4:
            raise ConfigError(f"n_layers must be in 1..4, got {self.n_layers}")

    @classmethod
    def with_preset(cls, preset: str, **kwargs) -> EncoderConfig:
        dim = kwargs.get("dim", 200)
        return cls(init_std=resolve_init_std(preset, dim), init_preset=preset, **kwargs)


@dataclass
class EmbeddingState:
    """Trainable parameters: per-graph node features, plus the shared
    layer weights when the weighted variant is in use."""

    features_left: np.ndarray
    features_right: np.ndarray
    weights: list[np.ndarray] | None = None

    def parameters(self) -> list[np.ndarray]:
        params = [self.features_left, self.features_right]
        if self.weights is not None:
            params.extend(self.weights)
        return params

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def copy(self) -> EmbeddingState:
        return EmbeddingState(
            features_left=self.features_left.copy(),
            features_right=self.features_right.copy(),
            weights=None if self.weights is None else [w.copy() for w in self.weights],
        )


@dataclass
class Gradients:
    """Gradients mirroring EmbeddingState's parameter layout."""

    features_left: np.ndarray
    features_right: np.ndarray
    weights: list[np.ndarray] | None = None

    def parameters(self) -> list[np.ndarray]:
        params = [self.features_left, self.features_right]
        if self.weights is not None:
            params.extend(self.weights)
        return params


def init_state(cfg: EncoderConfig, n_left: int, n_right: int) -> EmbeddingState:
    """Fresh trainable state, fully determined by cfg.seed.

    Features are i.i.d. normal with std cfg.init_std; weight matrices,
    when enabled, use the uniform(-s, s) fan-based range
    s = sqrt(6 / (fan_in + fan_out)).
    """
    rng = np.random.default_rng(cfg.seed)
    fl = rng.normal(0.0, cfg.init_std, size=(n_left, cfg.dim))
    fr = rng.normal(0.0, cfg.init_std, size=(n_right, cfg.dim))
    weights = None
    if cfg.use_weights:
        s = np.sqrt(6.0 / (cfg.dim + cfg.dim))
        weights = [
            rng.uniform(-s, s, size=(cfg.dim, cfg.dim)) for _ in range(cfg.n_layers)
        ]
    return EmbeddingState(features_left=fl, features_right=fr, weights=weights)


@dataclass
class _GraphTape:
    norms: np.ndarray | None  # feature row norms (None when not normalizing)
    h0: np.ndarray  # layer-0 input (normalized features)
    relu_masks: list[np.ndarray]  # one bool mask per non-final layer
    propagated: list[np.ndarray] | None  # A_hat @ H_i per layer, weighted runs only
    adj: SparseMatrix


@dataclass
class ForwardTape:
    cfg: EncoderConfig
    left: _GraphTape
    right: _GraphTape


def _forward_one(
    adj: SparseMatrix, features: np.ndarray, weights, cfg: EncoderConfig
) -> tuple[np.ndarray, _GraphTape]:
    if adj.n_cols != features.shape[0]:
        raise ValueError(
            f"adjacency is {adj.shape} but features have {features.shape[0]} rows"
        )
    if features.shape[1] != cfg.dim:
        raise ValueError(f"features have width {features.shape[1]}, config says {cfg.dim}")

    if cfg.normalize_features:
        norms = row_norms(features)
        h = row_l2_normalize(features)
    else:
        norms = None
        h = features
    h0 = h

    masks: list[np.ndarray] = []
    propagated: list[np.ndarray] | None = [] if cfg.use_weights else None
    for layer in range(cfg.n_layers):
        p = spmm(adj, h)
        if cfg.use_weights:
            propagated.append(p)
            p = p @ weights[layer]
        if layer < cfg.n_layers - 1:
            mask = p > 0.0
            masks.append(mask)
            h = np.where(mask, p, 0.0)
        else:
            h = p
    if not np.all(np.isfinite(h)):
        raise NumericError("encoder produced non-finite embeddings")
    return h, _GraphTape(norms=norms, h0=h0, relu_masks=masks, propagated=propagated, adj=adj)


def forward(
    adj_left: SparseMatrix,
    adj_right: SparseMatrix,
    state: EmbeddingState,
    cfg: EncoderConfig,
    keep_tape: bool = False,
) -> tuple[np.ndarray, np.ndarray, ForwardTape | None]:
    """Encode both graphs; returns (emb_left, emb_right, tape).

    The tape is None unless keep_tape is set; backward() requires it.
    """
    if cfg.use_weights and (state.weights is None or len(state.weights) != cfg.n_layers):
        raise ConfigError("config expects weights but state carries none (or wrong count)")
    if not cfg.use_weights and state.weights is not None:
        raise ConfigError("state carries weights but config disables them")
    out_l, tape_l = _forward_one(adj_left, state.features_left, state.weights, cfg)
    out_r, tape_r = _forward_one(adj_right, state.features_right, state.weights, cfg)
    tape = ForwardTape(cfg=cfg, left=tape_l, right=tape_r) if keep_tape else None
    return out_l, out_r, tape


def _backward_one(
    grad_out: np.ndarray, tape: _GraphTape, weights, grad_weights, cfg: EncoderConfig
) -> np.ndarray:
    if grad_out.shape != (tape.adj.n_rows, cfg.dim):
        raise ValueError(
            f"upstream gradient shape {grad_out.shape} does not match "
            f"forward output ({tape.adj.n_rows}, {cfg.dim})"
        )
    adj_t = tape.adj.transpose()
    g = grad_out
    for layer in range(cfg.n_layers - 1, -1, -1):
        if layer < cfg.n_layers - 1:
            g = np.where(tape.relu_masks[layer], g, 0.0)
        if cfg.use_weights:
            grad_weights[layer] += tape.propagated[layer].T @ g
            g = g @ weights[layer].T
        g = spmm(adj_t, g)

    if tape.norms is None:
        return g
    # through row normalization x -> x / |x|: g -> (g - (g . xhat) xhat) / |x|
    xhat = tape.h0
    dots = np.einsum("ij,ij->i", g, xhat)
    g = g - dots[:, None] * xhat
    safe = np.where(tape.norms > 0.0, tape.norms, 1.0)
    g = g / safe[:, None]
    g[tape.norms == 0.0] = 0.0
    return g


def backward(
    grad_out_left: np.ndarray,
    grad_out_right: np.ndarray,
    tape: ForwardTape,
    cfg: EncoderConfig,
    state: EmbeddingState,
) -> Gradients:
    """Exact reverse-mode gradients of forward() wrt all parameters.

    The tape must come from a forward() call with the same config and
    state; the shared weight matrices accumulate gradient from both
    graphs.
    """
    if tape is None:
        raise ValueError("backward requires the tape from forward(..., keep_tape=True)")
    if tape.cfg != cfg:
        raise ConfigError("tape was produced under a different encoder config")
    grad_weights = None
    if cfg.use_weights:
        grad_weights = [np.zeros_like(w) for w in state.weights]
    gl = _backward_one(grad_out_left, tape.left, state.weights, grad_weights, cfg)
    gr = _backward_one(grad_out_right, tape.right, state.weights, grad_weights, cfg)
    return Gradients(features_left=gl, features_right=gr, weights=grad_weights)
