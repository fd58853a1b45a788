"""Synthetic event streams with known foreground structure.

The canonical stimulus is a vertical bar sweeping horizontally: its
leading edge fires positive events, its trailing edge negative ones,
while a spatially uniform polarity-balanced background process supplies
noise. Everything is driven by independent Poisson processes from one
seeded generator, so streams are byte-for-byte reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoder import Encoder
from .events import EventArray, SensorGeometry, window_iter
from .oracle import oracle_histogram2d
from .params import EncoderConfig


@dataclass(frozen=True)
class BarSpec:
    width_px: int = 12
    speed_px_s: float = 300.0
    direction: int = 1               # +1 sweeps toward +x, -1 toward -x
    edge_rate_hz: float = 400.0      # events/s per edge pixel
    start_x: int = 0

    def __post_init__(self):
        if self.width_px < 1:
            raise ValueError("bar width must be >= 1 px")
        if self.direction not in (-1, 1):
            raise ValueError("direction must be +1 or -1")
        if self.edge_rate_hz < 0 or self.speed_px_s < 0:
            raise ValueError("rates and speeds must be >= 0")


@dataclass(frozen=True)
class NoiseSpec:
    rate_hz: float = 5.0             # events/s per pixel, polarity ~ Bernoulli(0.5)

    def __post_init__(self):
        if self.rate_hz < 0:
            raise ValueError("noise rate must be >= 0")


@dataclass(frozen=True)
class SceneSpec:
    geometry: SensorGeometry = SensorGeometry(width=304, height=240)
    duration_us: int = 2_500_000
    dt_us: int = 50_000
    bar: BarSpec = field(default_factory=BarSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0
    # windows of sweep history a mask covers; >1 matches the encoder's
    # intentional persistence of recent motion
    mask_history: int = 1

    def __post_init__(self):
        if self.duration_us <= 0 or self.dt_us <= 0:
            raise ValueError("duration and dt must be positive")
        if self.mask_history < 1:
            raise ValueError("mask_history must be >= 1")

    @property
    def n_windows(self) -> int:
        return -(-self.duration_us // self.dt_us)


def _bar_lead_position(scene: SceneSpec, t_us: np.ndarray) -> np.ndarray:
    travel = scene.bar.speed_px_s * (t_us.astype(np.float64) * 1e-6)
    return np.mod(scene.bar.start_x + scene.bar.direction * travel,
                  scene.geometry.width)


def _edge_events(scene: SceneSpec, rng: np.random.Generator,
                 trailing: bool) -> tuple[np.ndarray, ...]:
    geom = scene.geometry
    duration_s = scene.duration_us * 1e-6
    expected = scene.bar.edge_rate_hz * duration_s * geom.height
    count = int(rng.poisson(expected))
    t = rng.integers(0, scene.duration_us, count, dtype=np.uint64)
    lead = _bar_lead_position(scene, t)
    if trailing:
        col = np.mod(lead - scene.bar.direction * scene.bar.width_px, geom.width)
    else:
        col = lead
    x = np.floor(col).astype(np.uint16) % geom.width
    y = rng.integers(0, geom.height, count, dtype=np.uint16)
    p = np.full(count, -1 if trailing else 1, np.int8)
    return t, x, y, p


def _noise_events(scene: SceneSpec, rng: np.random.Generator) -> tuple[np.ndarray, ...]:
    geom = scene.geometry
    duration_s = scene.duration_us * 1e-6
    expected = scene.noise.rate_hz * duration_s * geom.width * geom.height
    count = int(rng.poisson(expected))
    t = rng.integers(0, scene.duration_us, count, dtype=np.uint64)
    x = rng.integers(0, geom.width, count, dtype=np.uint16)
    y = rng.integers(0, geom.height, count, dtype=np.uint16)
    p = np.where(rng.random(count) < 0.5, -1, 1).astype(np.int8)
    return t, x, y, p


def generate(scene: SceneSpec) -> tuple[EventArray, np.ndarray]:
    """Draw the scene's event stream and its per-window foreground masks.

    Events are merged and sorted by timestamp with ties broken by
    (y, x, p); masks mark every pixel the bar body swept during each
    window, shaped (n_windows, H, W) uint8.
    """
    rng = np.random.default_rng(scene.seed)
    parts = [_edge_events(scene, rng, trailing=False),
             _edge_events(scene, rng, trailing=True),
             _noise_events(scene, rng)]
    t = np.concatenate([part[0] for part in parts])
    x = np.concatenate([part[1] for part in parts])
    y = np.concatenate([part[2] for part in parts])
    p = np.concatenate([part[3] for part in parts])
    order = np.lexsort((p, x, y, t))
    events = EventArray.from_arrays(t[order], x[order], y[order], p[order])
    return events, foreground_masks(scene)


def foreground_masks(scene: SceneSpec) -> np.ndarray:
    """Per-window masks of bar-swept pixels (columns are swept full-height).

    With ``mask_history`` > 1, window k's mask covers the sweep of windows
    max(0, k - history + 1) .. k.
    """
    geom = scene.geometry
    masks = np.zeros((scene.n_windows, geom.height, geom.width), np.uint8)
    step_us = 1000
    per_window_cols: list[set[int]] = []
    for k in range(scene.n_windows):
        sample_t = np.arange(k * scene.dt_us,
                             min((k + 1) * scene.dt_us, scene.duration_us),
                             step_us, dtype=np.uint64)
        lead = _bar_lead_position(scene, sample_t)
        cols: set[int] = set()
        for pos in lead:
            for back in range(scene.bar.width_px + 1):
                cols.add(int(np.floor(pos - scene.bar.direction * back)) % geom.width)
        per_window_cols.append(cols)
    for k in range(scene.n_windows):
        merged: set[int] = set()
        for j in range(max(0, k - scene.mask_history + 1), k + 1):
            merged |= per_window_cols[j]
        masks[k, :, list(merged)] = 1
    return masks


def snr_metric(pixels: np.ndarray, mask: np.ndarray, guard: float = 1e-6) -> float:
    """Foreground/background ratio of mean luminance-channel intensity.

    ``pixels`` is an (H, W, 3) uint8 frame (channel 1 is luminance) or an
    (H, W) intensity map. An all-zero foreground returns 0 by convention;
    the background mean is epsilon-guarded.
    """
    intensity = pixels[..., 1].astype(np.float64) / 255.0 if pixels.ndim == 3 \
        else pixels.astype(np.float64)
    fg = mask.astype(bool)
    if not fg.any():
        raise ValueError("empty foreground mask")
    inside = float(intensity[fg].mean())
    outside = float(intensity[~fg].mean()) if (~fg).any() else 0.0
    if inside == 0.0:
        return 0.0
    return inside / (outside + guard)


def noise_suppression_ratios(scene: SceneSpec,
                             config: EncoderConfig) -> tuple[float, float]:
    """Mean per-window foreground/background ratio for the aggregating
    encoder versus the plain 2-D histogram baseline, on identical events."""
    if config.geometry != scene.geometry or config.dt_us != scene.dt_us:
        raise ValueError("scene and encoder config disagree on geometry or dt")
    events, masks = generate(scene)
    encoder = Encoder(config)
    hta_ratios, baseline_ratios = [], []
    for window, chunk in window_iter(events, scene.dt_us, t0_us=0):
        frame = encoder.encode_window(window, chunk)
        mask = masks[window.index]
        hta_ratios.append(snr_metric(frame.pixels, mask))
        pos, neg = oracle_histogram2d(chunk, scene.geometry)
        counts = (pos + neg).astype(np.float64)
        peak = counts.max()
        baseline = counts / peak if peak > 0 else counts
        baseline_ratios.append(snr_metric(baseline, mask))
    return float(np.mean(hta_ratios)), float(np.mean(baseline_ratios))
