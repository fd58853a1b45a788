"""Deterministic forward pass of the recurrent + hypergraph fusion stage.

Operates on a three-scale feature pyramid with externally supplied
constant weights (no training here). Two gated stages compose:

1. temporal evolution — a single ConvLSTM cell per scale whose hidden
   output enters as a residual scaled by a per-scale gate ``alpha``;
2. hypergraph refinement — tokens from all scales are projected to a
   common width, spectral amplitude statistics along the token axis
   modulate prototype anchors, a row-stochastic soft incidence matrix
   associates tokens with anchors, and dual-hop message passing
   (aggregate to hyperedges, broadcast back) adds a channel-gated
   residual.

Both gates default to zero, making the whole block an exact identity on
the pyramid; the scatter-back projects only the refinement delta so this
holds for arbitrary projection weights. External tensors are float32;
internal arithmetic runs in float64 for reproducibility against the
golden fixtures.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .formats import read_fhw1, write_fhw1

KERNEL_SIZE = 3  # recurrent cell convolution kernel


@dataclass
class FeatureMapSet:
    """Three feature tensors, scale i shaped (C_i, H_i, W_i), float32."""

    maps: list[np.ndarray]
    timestep: int = 0

    def __post_init__(self):
        if len(self.maps) != 3:
            raise ValueError(f"expected exactly 3 scales, got {len(self.maps)}")
        for m in self.maps:
            if m.ndim != 3 or m.shape[1] < 1 or m.shape[2] < 1:
                raise ValueError(f"bad scale shape {m.shape}")

    @property
    def shapes(self) -> list[tuple[int, int, int]]:
        return [m.shape for m in self.maps]


@dataclass
class RecurrentState:
    """Per-scale hidden and cell maps, shapes matching the pyramid."""

    hidden: list[np.ndarray]
    cell: list[np.ndarray]

    @classmethod
    def zeros(cls, shapes: list[tuple[int, int, int]]) -> "RecurrentState":
        return cls(hidden=[np.zeros(s, np.float32) for s in shapes],
                   cell=[np.zeros(s, np.float32) for s in shapes])


@dataclass
class FHTFParams:
    """Constant weights for both stages.

    Per scale: ``alphas`` residual gates, ``cell_weight``/``cell_bias``
    the fused 4-gate convolution of the recurrent cell, ``align_*`` the
    projection into the common token width, ``out_weight`` the bias-free
    delta projection back. Shared: ``prototypes`` (n_hyperedges x d_k),
    the modulation/key/aggregation/broadcast affine maps, the channel
    gate ``gamma``, and the incidence softmax temperature.
    """

    alphas: list[float]
    cell_weight: list[np.ndarray]      # (4*C_i, 2*C_i, k, k)
    cell_bias: list[np.ndarray]        # (4*C_i,)
    align_weight: list[np.ndarray]     # (C, C_i)
    align_bias: list[np.ndarray]       # (C,)
    out_weight: list[np.ndarray]       # (C_i, C)
    prototypes: np.ndarray             # (n_hyperedges, d_k)
    mod_weight: np.ndarray             # (2*d_k, 4*C)
    mod_bias: np.ndarray               # (2*d_k,)
    key_weight: np.ndarray             # (d_k, C)
    key_bias: np.ndarray               # (d_k,)
    agg_weight: np.ndarray             # (C, C)
    agg_bias: np.ndarray               # (C,)
    bcast_weight: np.ndarray           # (C, C)
    bcast_bias: np.ndarray             # (C,)
    gamma: np.ndarray                  # (C,)
    temperature: float = 1.0

    @property
    def node_width(self) -> int:
        return self.align_weight[0].shape[0]

    @property
    def n_hyperedges(self) -> int:
        return self.prototypes.shape[0]

    @property
    def d_k(self) -> int:
        return self.prototypes.shape[1]

    def validate(self) -> None:
        if self.temperature <= 0:
            raise ValueError("incidence temperature must be > 0")
        if self.n_hyperedges < 1 or self.d_k < 1:
            raise ValueError("need n_hyperedges >= 1 and d_k >= 1")
        for arr in (self.prototypes, self.gamma, *self.cell_weight):
            if not np.all(np.isfinite(arr)):
                raise ValueError("non-finite weight tensor")


# ---------------------------------------------------------------------------
# temporal stage


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def _conv2d_same(x: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """Zero-padded same-size conv, (Cin,H,W) x (Cout,Cin,k,k) -> (Cout,H,W)."""
    k = weight.shape[-1]
    pad = k // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    windows = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(1, 2))
    return np.einsum("oikl,ihwkl->ohw", weight, windows, optimize=True)


def convlstm_step(x: np.ndarray, hidden: np.ndarray, cell: np.ndarray,
                  weight: np.ndarray, bias: np.ndarray
                  ) -> tuple[np.ndarray, np.ndarray]:
    """One recurrent cell step; returns the new (hidden, cell) maps.

    Gate order in the fused convolution is input, forget, output,
    candidate.
    """
    x64 = x.astype(np.float64)
    h64 = hidden.astype(np.float64)
    c64 = cell.astype(np.float64)
    gates = _conv2d_same(np.concatenate([x64, h64], axis=0),
                         weight.astype(np.float64))
    gates += bias.astype(np.float64)[:, None, None]
    ch = x.shape[0]
    gate_i = _sigmoid(gates[:ch])
    gate_f = _sigmoid(gates[ch:2 * ch])
    gate_o = _sigmoid(gates[2 * ch:3 * ch])
    cand = np.tanh(gates[3 * ch:])
    new_cell = gate_f * c64 + gate_i * cand
    new_hidden = gate_o * np.tanh(new_cell)
    return new_hidden.astype(np.float32), new_cell.astype(np.float32)


def temporal_evolve(features: FeatureMapSet, state: RecurrentState,
                    params: FHTFParams) -> tuple[FeatureMapSet, RecurrentState]:
    """Residual-gated recurrent update per scale; the state always advances
    even when a gate is zero."""
    new_maps, new_hidden, new_cell = [], [], []
    for i, fmap in enumerate(features.maps):
        if fmap.shape != state.hidden[i].shape:
            raise ValueError(
                f"scale {i}: state shape {state.hidden[i].shape} does not "
                f"match features {fmap.shape}")
        hidden, cell = convlstm_step(fmap, state.hidden[i], state.cell[i],
                                     params.cell_weight[i], params.cell_bias[i])
        new_maps.append(fmap + np.float32(params.alphas[i]) * hidden)
        new_hidden.append(hidden)
        new_cell.append(cell)
    return (FeatureMapSet(maps=new_maps, timestep=features.timestep + 1),
            RecurrentState(hidden=new_hidden, cell=new_cell))


# ---------------------------------------------------------------------------
# hypergraph stage


def spectral_descriptor(tokens: np.ndarray) -> np.ndarray:
    """Per-channel mean and max DFT amplitude along the token axis.

    Un-normalized forward transform; returns a length-2C vector
    [mean(|F|) per channel, max(|F|) per channel].
    """
    if tokens.shape[0] < 1:
        raise ValueError("need at least one token")
    amp = np.abs(np.fft.fft(tokens.astype(np.float64), axis=0))
    return np.concatenate([amp.mean(axis=0), amp.max(axis=0)])


def pooled_descriptor(tokens: np.ndarray) -> np.ndarray:
    """Global mean and max over tokens, per channel (length 2C)."""
    t64 = tokens.astype(np.float64)
    return np.concatenate([t64.mean(axis=0), t64.max(axis=0)])


def build_anchors(descriptor: np.ndarray, pooled: np.ndarray,
                  params: FHTFParams) -> np.ndarray:
    """Feature-wise affine modulation of the prototype matrix.

    The concatenated 4C statistics vector is projected to per-feature
    (scale, shift); anchors = prototypes * (1 + scale) + shift.
    """
    stats = np.concatenate([descriptor, pooled])
    if not np.all(np.isfinite(stats)):
        raise ValueError("non-finite descriptor statistics")
    mod = params.mod_weight.astype(np.float64) @ stats \
        + params.mod_bias.astype(np.float64)
    scale, shift = mod[:params.d_k], mod[params.d_k:]
    return params.prototypes.astype(np.float64) * (1.0 + scale) + shift


def build_incidence(tokens: np.ndarray, anchors: np.ndarray,
                    params: FHTFParams) -> np.ndarray:
    """Row-stochastic soft assignment of tokens to hyperedge anchors.

    Row n is a softmax over hyperedges of key(X_n) . anchor_h scaled by
    1 / (sqrt(d_k) * temperature).
    """
    keys = tokens.astype(np.float64) @ params.key_weight.astype(np.float64).T \
        + params.key_bias.astype(np.float64)
    logits = keys @ anchors.T / (np.sqrt(params.d_k) * params.temperature)
    logits -= logits.max(axis=1, keepdims=True)
    weights = np.exp(logits)
    return weights / weights.sum(axis=1, keepdims=True)


def hypergraph_refine(tokens: np.ndarray, incidence: np.ndarray,
                      params: FHTFParams) -> np.ndarray:
    """Dual-hop message passing with a channel-wise residual gate.

    Hyperedge features are the un-normalized aggregation incidence^T X;
    both hops go through affine channel maps.
    """
    if tokens.shape[0] != incidence.shape[0]:
        raise ValueError("token and incidence row counts differ")
    x64 = tokens.astype(np.float64)
    edge_feats = incidence.T @ x64
    edge_feats = edge_feats @ params.agg_weight.astype(np.float64).T \
        + params.agg_bias.astype(np.float64)
    back = incidence @ edge_feats
    back = back @ params.bcast_weight.astype(np.float64).T \
        + params.bcast_bias.astype(np.float64)
    return x64 + params.gamma.astype(np.float64) * back


# ---------------------------------------------------------------------------
# full forward


def _flatten_tokens(maps: list[np.ndarray], params: FHTFParams) -> np.ndarray:
    blocks = []
    for i, fmap in enumerate(maps):
        c = fmap.shape[0]
        flat = fmap.reshape(c, -1).astype(np.float64).T      # (H*W, C_i)
        blocks.append(flat @ params.align_weight[i].astype(np.float64).T
                      + params.align_bias[i].astype(np.float64))
    return np.concatenate(blocks, axis=0)


def fhtf_forward(features: FeatureMapSet, state: RecurrentState,
                 params: FHTFParams) -> tuple[FeatureMapSet, RecurrentState]:
    """Temporal evolution, token alignment, spectral-modulated hypergraph
    refinement, and delta scatter-back. Output shapes equal input shapes."""
    evolved, new_state = temporal_evolve(features, state, params)
    tokens = _flatten_tokens(evolved.maps, params)
    descriptor = spectral_descriptor(tokens)
    pooled = pooled_descriptor(tokens)
    anchors = build_anchors(descriptor, pooled, params)
    incidence = build_incidence(tokens, anchors, params)
    refined = hypergraph_refine(tokens, incidence, params)
    delta = refined - tokens

    out_maps = []
    offset = 0
    for i, fmap in enumerate(evolved.maps):
        c, h, w = fmap.shape
        n_i = h * w
        back = delta[offset:offset + n_i] @ params.out_weight[i].astype(np.float64).T
        out_maps.append(fmap + back.T.reshape(c, h, w).astype(np.float32))
        offset += n_i
    return (FeatureMapSet(maps=out_maps, timestep=evolved.timestep), new_state)


# ---------------------------------------------------------------------------
# weight (de)serialization and generation


def params_to_tensors(params: FHTFParams) -> dict[str, np.ndarray]:
    tensors: dict[str, np.ndarray] = {}
    for i in range(3):
        tensors[f"alpha.{i}"] = np.float32(params.alphas[i])
        tensors[f"cell.{i}.weight"] = params.cell_weight[i]
        tensors[f"cell.{i}.bias"] = params.cell_bias[i]
        tensors[f"align.{i}.weight"] = params.align_weight[i]
        tensors[f"align.{i}.bias"] = params.align_bias[i]
        tensors[f"out.{i}.weight"] = params.out_weight[i]
    tensors["prototypes"] = params.prototypes
    tensors["mod.weight"] = params.mod_weight
    tensors["mod.bias"] = params.mod_bias
    tensors["key.weight"] = params.key_weight
    tensors["key.bias"] = params.key_bias
    tensors["agg.weight"] = params.agg_weight
    tensors["agg.bias"] = params.agg_bias
    tensors["broadcast.weight"] = params.bcast_weight
    tensors["broadcast.bias"] = params.bcast_bias
    tensors["gamma"] = params.gamma
    tensors["temperature"] = np.float32(params.temperature)
    return tensors


def params_from_tensors(tensors: dict[str, np.ndarray]) -> FHTFParams:
    try:
        params = FHTFParams(
            alphas=[float(tensors[f"alpha.{i}"]) for i in range(3)],
            cell_weight=[tensors[f"cell.{i}.weight"] for i in range(3)],
            cell_bias=[tensors[f"cell.{i}.bias"] for i in range(3)],
            align_weight=[tensors[f"align.{i}.weight"] for i in range(3)],
            align_bias=[tensors[f"align.{i}.bias"] for i in range(3)],
            out_weight=[tensors[f"out.{i}.weight"] for i in range(3)],
            prototypes=tensors["prototypes"],
            mod_weight=tensors["mod.weight"],
            mod_bias=tensors["mod.bias"],
            key_weight=tensors["key.weight"],
            key_bias=tensors["key.bias"],
            agg_weight=tensors["agg.weight"],
            agg_bias=tensors["agg.bias"],
            bcast_weight=tensors["broadcast.weight"],
            bcast_bias=tensors["broadcast.bias"],
            gamma=tensors["gamma"],
            temperature=float(tensors["temperature"]),
        )
    except KeyError as e:
        raise ValueError(f"weight file is missing tensor {e.args[0]!r}") from None
    params.validate()
    return params


def save_params(path, params: FHTFParams) -> None:
    write_fhw1(path, params_to_tensors(params))


def load_params(path) -> FHTFParams:
    return params_from_tensors(read_fhw1(path))


def random_params(rng: np.random.Generator, channels: tuple[int, int, int],
                  node_width: int, n_hyperedges: int, d_k: int,
                  alphas: tuple[float, float, float] = (0.1, 0.1, 0.1),
                  gamma_value: float = 0.05,
                  scale: float = 0.2) -> FHTFParams:
    """Seeded constant weights for tests and the invariant checker.

    The prototype matrix is drawn last so every other tensor is identical
    across different hyperedge counts under one seed.
    """
    def draw(*shape):
        return (scale * rng.standard_normal(shape)).astype(np.float32)

    cw, cb, aw, ab, ow = [], [], [], [], []
    for c in channels:
        cw.append(draw(4 * c, 2 * c, KERNEL_SIZE, KERNEL_SIZE))
        cb.append(np.zeros(4 * c, np.float32))
        aw.append(draw(node_width, c))
        ab.append(draw(node_width))
        ow.append(draw(c, node_width))
    params = FHTFParams(
        alphas=list(alphas),
        cell_weight=cw, cell_bias=cb,
        align_weight=aw, align_bias=ab, out_weight=ow,
        mod_weight=draw(2 * d_k, 4 * node_width),
        mod_bias=draw(2 * d_k),
        key_weight=draw(d_k, node_width),
        key_bias=draw(d_k),
        agg_weight=draw(node_width, node_width),
        agg_bias=draw(node_width),
        bcast_weight=draw(node_width, node_width),
        bcast_bias=draw(node_width),
        gamma=np.full(node_width, gamma_value, np.float32),
        prototypes=draw(n_hyperedges, d_k),
        temperature=1.0,
    )
    params.validate()
    return params


def random_pyramid(rng: np.random.Generator,
                   shapes: list[tuple[int, int, int]]) -> FeatureMapSet:
    return FeatureMapSet(
        maps=[rng.standard_normal(s).astype(np.float32) for s in shapes])


def fixture_path(name: str) -> Path:
    """Path of a packaged golden/weight fixture file."""
    return Path(str(resources.files("evhta"))) / "fhtf_fixtures" / name
