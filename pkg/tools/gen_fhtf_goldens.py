#!/usr/bin/env python3
"""Regenerate the fusion-stage golden fixtures.

The forward math here is written from scratch on purpose — explicit
convolution loops, scalar gate functions, a direct DFT sum — so the
packaged golden tensors come from an implementation that shares nothing
with the library's vectorized path. Weight drawing and file writing
reuse library plumbing; only the computed values matter.

Run from the repository root:

    python3 tools/gen_fhtf_goldens.py
"""

from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from evhta import fhtf  # noqa: E402
from evhta.fhtf_checks import (  # noqa: E402
    GOLDEN_DK,
    GOLDEN_HYPEREDGES,
    GOLDEN_NODE_WIDTH,
    GOLDEN_SHAPES,
    SMALL_SHAPES,
    GOLDEN_ANCHORS,
    GOLDEN_FORWARD,
    GOLDEN_TEMPORAL,
    SMALL_WEIGHTS_FIXTURE,
    WEIGHTS_FIXTURE,
)
from evhta.formats import write_fhw1  # noqa: E402

OUT_DIR = Path(__file__).resolve().parents[1] / "src" / "evhta" / "fhtf_fixtures"


# ----- naive building blocks (float64 everywhere, loops not vectorization)


def sigmoid(v: float) -> float:
    return 1.0 / (1.0 + math.exp(-v))


def conv_same(x: np.ndarray, weight: np.ndarray) -> np.ndarray:
    cin, h, w = x.shape
    cout, cin2, k, _ = weight.shape
    assert cin == cin2
    pad = k // 2
    out = np.zeros((cout, h, w))
    for o in range(cout):
        for i in range(h):
            for j in range(w):
                acc = 0.0
                for ci in range(cin):
                    for ky in range(k):
                        for kx in range(k):
                            yy, xx = i + ky - pad, j + kx - pad
                            if 0 <= yy < h and 0 <= xx < w:
                                acc += weight[o, ci, ky, kx] * x[ci, yy, xx]
                out[o, i, j] = acc
    return out


def lstm_cell(x32, h32, c32, weight32, bias32):
    x = x32.astype(np.float64)
    hidden = h32.astype(np.float64)
    cell = c32.astype(np.float64)
    gates = conv_same(np.concatenate([x, hidden]), weight32.astype(np.float64))
    gates += bias32.astype(np.float64)[:, None, None]
    ch = x.shape[0]
    new_c = np.zeros_like(cell)
    new_h = np.zeros_like(hidden)
    for i in range(cell.shape[1]):
        for j in range(cell.shape[2]):
            for c in range(ch):
                gi = sigmoid(gates[c, i, j])
                gf = sigmoid(gates[ch + c, i, j])
                go = sigmoid(gates[2 * ch + c, i, j])
                cand = math.tanh(gates[3 * ch + c, i, j])
                new_c[c, i, j] = gf * cell[c, i, j] + gi * cand
                new_h[c, i, j] = go * math.tanh(new_c[c, i, j])
    return new_h.astype(np.float32), new_c.astype(np.float32)


def dft_amplitudes(x: np.ndarray) -> np.ndarray:
    n, c = x.shape
    amp = np.zeros((n, c))
    for k in range(n):
        for ch in range(c):
            re = im = 0.0
            for t in range(n):
                angle = -2.0 * math.pi * k * t / n
                re += x[t, ch] * math.cos(angle)
                im += x[t, ch] * math.sin(angle)
            amp[k, ch] = math.hypot(re, im)
    return amp


def matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = np.zeros(m.shape[0])
    for i in range(m.shape[0]):
        acc = 0.0
        for j in range(m.shape[1]):
            acc += m[i, j] * v[j]
        out[i] = acc
    return out


def affine_rows(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    out = np.zeros((x.shape[0], weight.shape[0]))
    for r in range(x.shape[0]):
        out[r] = matvec(weight, x[r]) + bias
    return out


def naive_anchors(tokens: np.ndarray, params: fhtf.FHTFParams) -> np.ndarray:
    x = np.asarray(tokens, dtype=np.float64)
    amp = dft_amplitudes(x)
    spec = np.concatenate([amp.mean(axis=0), amp.max(axis=0)])
    pooled = np.concatenate([x.mean(axis=0), x.max(axis=0)])
    stats = np.concatenate([spec, pooled])
    mod = matvec(params.mod_weight.astype(np.float64), stats) \
        + params.mod_bias.astype(np.float64)
    dk = params.d_k
    anchors = np.zeros((params.n_hyperedges, dk))
    proto = params.prototypes.astype(np.float64)
    for hh in range(params.n_hyperedges):
        for d in range(dk):
            anchors[hh, d] = proto[hh, d] * (1.0 + mod[d]) + mod[dk + d]
    return anchors


def naive_forward(pyramid, state, params: fhtf.FHTFParams):
    evolved, feats32 = [], []
    for i, fmap in enumerate(pyramid.maps):
        new_h, new_c = lstm_cell(fmap, state.hidden[i], state.cell[i],
                                 params.cell_weight[i], params.cell_bias[i])
        f_hat = fmap + np.float32(params.alphas[i]) * new_h
        evolved.append((new_h, new_c))
        feats32.append(f_hat)

    blocks = []
    for i, f_hat in enumerate(feats32):
        c = f_hat.shape[0]
        flat = f_hat.reshape(c, -1).astype(np.float64).T
        blocks.append(affine_rows(flat, params.align_weight[i].astype(np.float64),
                                  params.align_bias[i].astype(np.float64)))
    tokens = np.concatenate(blocks, axis=0)

    anchors = naive_anchors(tokens, params)
    # keys and row-wise softmax over hyperedges
    keys = affine_rows(tokens, params.key_weight.astype(np.float64),
                       params.key_bias.astype(np.float64))
    n, nh = tokens.shape[0], params.n_hyperedges
    incidence = np.zeros((n, nh))
    denom = math.sqrt(params.d_k) * params.temperature
    for r in range(n):
        logits = [sum(keys[r, d] * anchors[hh, d] for d in range(params.d_k)) / denom
                  for hh in range(nh)]
        peak = max(logits)
        expo = [math.exp(v - peak) for v in logits]
        total = sum(expo)
        incidence[r] = [e / total for e in expo]

    edge = np.zeros((nh, tokens.shape[1]))
    for hh in range(nh):
        for c in range(tokens.shape[1]):
            edge[hh, c] = sum(incidence[r, hh] * tokens[r, c] for r in range(n))
    edge = affine_rows(edge, params.agg_weight.astype(np.float64),
                       params.agg_bias.astype(np.float64))
    back = np.zeros_like(tokens)
    for r in range(n):
        for c in range(tokens.shape[1]):
            back[r, c] = sum(incidence[r, hh] * edge[hh, c] for hh in range(nh))
    back = affine_rows(back, params.bcast_weight.astype(np.float64),
                       params.bcast_bias.astype(np.float64))
    gamma = params.gamma.astype(np.float64)
    refined = tokens + gamma[None, :] * back
    delta = refined - tokens

    outs = []
    offset = 0
    for i, f_hat in enumerate(feats32):
        c, h, w = f_hat.shape
        n_i = h * w
        proj = affine_rows(delta[offset:offset + n_i],
                           params.out_weight[i].astype(np.float64),
                           np.zeros(c))
        outs.append(f_hat + proj.T.reshape(c, h, w).astype(np.float32))
        offset += n_i
    return outs


def naive_anchor_tokens(seed: int, n: int, width: int) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal((n, width)).astype(np.float32)


def main() -> None:
    OUT_DIR.mkdir(parents=True, exist_ok=True)

    # constant weights, drawn once and frozen
    rng = np.random.default_rng(2024)
    params = fhtf.random_params(rng, tuple(s[0] for s in GOLDEN_SHAPES),
                                node_width=GOLDEN_NODE_WIDTH,
                                n_hyperedges=GOLDEN_HYPEREDGES, d_k=GOLDEN_DK)
    fhtf.save_params(OUT_DIR / WEIGHTS_FIXTURE, params)

    rng_small = np.random.default_rng(2025)
    small = fhtf.random_params(rng_small, tuple(s[0] for s in SMALL_SHAPES),
                               node_width=GOLDEN_NODE_WIDTH,
                               n_hyperedges=GOLDEN_HYPEREDGES, d_k=GOLDEN_DK)
    fhtf.save_params(OUT_DIR / SMALL_WEIGHTS_FIXTURE, small)

    # temporal golden: one recurrent step from zero state, seed-42 inputs
    pyramid = fhtf.random_pyramid(np.random.default_rng(42), SMALL_SHAPES)
    state = fhtf.RecurrentState.zeros(SMALL_SHAPES)
    tensors = {}
    for i, fmap in enumerate(pyramid.maps):
        new_h, new_c = lstm_cell(fmap, state.hidden[i], state.cell[i],
                                 small.cell_weight[i], small.cell_bias[i])
        tensors[f"features.{i}"] = fmap + np.float32(small.alphas[i]) * new_h
        tensors[f"hidden.{i}"] = new_h
        tensors[f"cell.{i}"] = new_c
    write_fhw1(OUT_DIR / GOLDEN_TEMPORAL, tensors)

    # anchor golden: seed-7 tokens through the modulation path
    tokens = naive_anchor_tokens(7, 84, GOLDEN_NODE_WIDTH)
    write_fhw1(OUT_DIR / GOLDEN_ANCHORS,
               {"anchors": naive_anchors(tokens, params).astype(np.float32)})

    # end-to-end golden: seed-123 pyramid through the full block
    pyramid = fhtf.random_pyramid(np.random.default_rng(123), GOLDEN_SHAPES)
    state = fhtf.RecurrentState.zeros(GOLDEN_SHAPES)
    outs = naive_forward(pyramid, state, params)
    write_fhw1(OUT_DIR / GOLDEN_FORWARD,
               {f"output.{i}": outs[i] for i in range(3)})

    for name in (WEIGHTS_FIXTURE, SMALL_WEIGHTS_FIXTURE, GOLDEN_TEMPORAL,
                 GOLDEN_ANCHORS, GOLDEN_FORWARD):
        print(f"wrote {OUT_DIR / name}")


if __name__ == "__main__":
    main()
