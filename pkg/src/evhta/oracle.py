"""Brute-force reference encoder used as ground truth.

Everything here is recomputed from first principles with no code shared
with the streaming encoder: windows are re-derived from timestamps,
accumulation walks events one by one in plain Python, the box mean scans
explicit neighborhood offsets, and each projection formula is transcribed
independently. It is slow on purpose; its only job is to disagree with
the fast path when the fast path is wrong.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .events import EventArray, SensorGeometry, WindowSpec
from .params import EncoderConfig


@dataclass
class OracleFrame:
    window: WindowSpec
    float_frame: np.ndarray   # (H, W, 3) float64 in [0, 1]
    pixels: np.ndarray        # (H, W, 3) uint8


def oracle_histogram2d(events: EventArray,
                       geometry: SensorGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Raw per-pixel polarity counts: the unweighted baseline representation."""
    pos = np.zeros(geometry.shape, np.int64)
    neg = np.zeros(geometry.shape, np.int64)
    for i in range(len(events)):
        if events.p[i] > 0:
            pos[events.y[i], events.x[i]] += 1
        else:
            neg[events.y[i], events.x[i]] += 1
    return pos, neg


def _box_mean(field: np.ndarray, radius: int) -> np.ndarray:
    # mean over the clipped neighborhood; divisor counts in-bounds pixels
    if radius == 0:
        return field.astype(np.float64)
    h, w = field.shape
    acc = np.zeros((h, w))
    hits = np.zeros((h, w))
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            src_y0, src_y1 = max(0, -dy), min(h, h - dy)
            src_x0, src_x1 = max(0, -dx), min(w, w - dx)
            acc[src_y0:src_y1, src_x0:src_x1] += field[src_y0 + dy:src_y1 + dy,
                                                       src_x0 + dx:src_x1 + dx]
            hits[src_y0:src_y1, src_x0:src_x1] += 1.0
    return acc / hits


def oracle_encode(events: EventArray, config: EncoderConfig,
                  t0_us: int | None = None) -> list[OracleFrame]:
    """Encode the whole stream from scratch; one frame per window.

    Pure function of its inputs: repeated calls with identical arguments
    return identical frames.
    """
    p = config.params
    geometry = config.geometry
    dt_us = config.dt_us
    dt_s = dt_us * 1e-6
    h, w = geometry.shape

    n = len(events)
    if n == 0:
        return []
    if t0_us is None:
        t0_us = (int(events.t[0]) // dt_us) * dt_us
    n_windows = (int(events.t[-1]) - t0_us) // dt_us + 1

    m_pos = np.zeros((h, w))
    m_neg = np.zeros((h, w))
    frames: list[OracleFrame] = []
    i = 0
    for k in range(n_windows):
        start = t0_us + k * dt_us
        end = start + dt_us
        acc_pos = np.zeros((h, w))
        acc_neg = np.zeros((h, w))
        while i < n and int(events.t[i]) < end:
            t = int(events.t[i])
            frac = (t - start) / dt_us
            weight = p.lam + (1.0 - p.lam) * frac ** p.gamma_t
            if int(events.p[i]) > 0:
                acc_pos[events.y[i], events.x[i]] += weight
            else:
                acc_neg[events.y[i], events.x[i]] += weight
            i += 1

        local_act = _box_mean(acc_pos + acc_neg, p.blur_radius)
        local_sgn = _box_mean(acc_pos - acc_neg, p.blur_radius)
        rel = (local_act / (local_act + p.tau)) * (np.abs(local_sgn) / (local_act + p.eps))
        rel = np.minimum(np.maximum(rel, 0.0), 1.0)
        rate = np.minimum(np.maximum(p.kappa0 * (1.0 + p.alpha * (1.0 - rel)),
                                     p.kappa_min), p.kappa_max)

        keep = (1.0 - rate * dt_s) ** p.b
        pre_pos = keep * m_pos + p.c * acc_pos
        pre_neg = keep * m_neg + p.c * acc_neg

        m_pos = p.cap * np.tanh(np.maximum(pre_pos - p.beta * pre_neg, 0.0) / p.cap)
        m_neg = p.cap * np.tanh(np.maximum(pre_neg - p.beta * pre_pos, 0.0) / p.cap)

        bias = (m_pos - m_neg) / (m_pos + m_neg + p.eps)
        intensity = (1.0 - p.eta) * np.maximum(m_pos, m_neg) + p.eta * np.abs(m_pos - m_neg)
        lum = np.log(1.0 + p.g * intensity) / math.log(1.0 + p.g * p.sigma)
        lum = np.minimum(np.maximum(lum, 0.0), 1.0)

        red = np.minimum(np.maximum(lum + p.mu * np.maximum(bias, 0.0), 0.0), 1.0)
        blue = np.minimum(np.maximum(lum + p.mu * np.maximum(-bias, 0.0), 0.0), 1.0)
        float_frame = np.stack([red ** p.gamma_c, lum ** p.gamma_c,
                                blue ** p.gamma_c], axis=-1)
        pixels = np.floor(float_frame * 255.0 + 0.5).astype(np.uint8)
        frames.append(OracleFrame(
            window=WindowSpec(index=k, start_us=start, duration_us=dt_us),
            float_frame=float_frame, pixels=pixels))
    return frames


@dataclass
class FrameComparison:
    max_divergence: float
    lsb_disagreements: int
    hard_failures: int


def compare_frames(float_a: np.ndarray, pixels_a: np.ndarray,
                   float_b: np.ndarray, pixels_b: np.ndarray,
                   tol: float = 1e-6) -> FrameComparison:
    """Check two encodings of one window for equivalence.

    Pre-quantization frames must agree within ``tol``. Quantized frames
    must be identical except where both pre-quantization values straddle
    a rounding threshold within ``tol``; those count as LSB disagreements,
    anything else is a hard failure.
    """
    max_div = float(np.max(np.abs(float_a - float_b))) if float_a.size else 0.0
    diff = pixels_a.astype(np.int16) - pixels_b.astype(np.int16)
    lsb = 0
    hard = int(np.count_nonzero(np.abs(diff) > 1))
    if max_div > tol:
        hard += 1
    ys, xs, cs = np.nonzero(np.abs(diff) == 1)
    for yy, xx, cc in zip(ys, xs, cs):
        lo = min(int(pixels_a[yy, xx, cc]), int(pixels_b[yy, xx, cc]))
        boundary = (lo + 0.5) / 255.0
        near_a = abs(float(float_a[yy, xx, cc]) - boundary) <= tol
        near_b = abs(float(float_b[yy, xx, cc]) - boundary) <= tol
        if near_a and near_b:
            lsb += 1
        else:
            hard += 1
    return FrameComparison(max_divergence=max_div, lsb_disagreements=lsb,
                           hard_failures=hard)
