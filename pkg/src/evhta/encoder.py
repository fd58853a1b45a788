"""Streaming pseudo-RGB encoder.

Per window the pipeline is: weighted polarity accumulation ->
local-activity reliability -> adaptive decay -> state update ->
polarity-competitive inhibition with smooth saturation -> pseudo-RGB
projection -> 8-bit quantization. State maps carry across windows, so
encoding is strictly sequential per stream; empty windows still decay
the state and emit a frame.

All maps are float64 (H, W). Channel order in the output frame is
[R = positive-polarity bias, G = luminance, B = negative-polarity bias].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import kernels
from .errors import SinkWriteError
from .events import EventArray, SensorGeometry, WindowSpec
from .params import EncoderConfig, HTAParams


@dataclass
class WindowResponse:
    """Weighted per-polarity accumulation maps for one window."""

    pos: np.ndarray
    neg: np.ndarray

    @property
    def activity(self) -> np.ndarray:
        return self.pos + self.neg

    @property
    def signed(self) -> np.ndarray:
        return self.pos - self.neg


@dataclass
class ReliabilityFields:
    r: np.ndarray
    kappa: np.ndarray


@dataclass
class ProjectionFields:
    pi: np.ndarray   # polarity bias, in [-1, 1]
    u: np.ndarray    # structural intensity, >= 0
    y: np.ndarray    # log-compressed luminance, >= 0


@dataclass
class PseudoRGBFrame:
    pixels: np.ndarray  # (H, W, 3) uint8
    window: WindowSpec


@dataclass
class EncoderState:
    """Polarity state maps carried across windows."""

    m_plus: np.ndarray
    m_minus: np.ndarray
    last_window_index: int | None = None

    @classmethod
    def zeros(cls, geometry: SensorGeometry) -> "EncoderState":
        return cls(np.zeros(geometry.shape), np.zeros(geometry.shape))


def intra_weight(t_us: int, window: WindowSpec, params: HTAParams) -> float:
    """Recency weight of one event inside its window, in [lam, 1]."""
    if not window.contains(t_us):
        raise ValueError(f"t={t_us} outside window [{window.start_us}, {window.end_us})")
    u = (t_us - window.start_us) / window.duration_us
    return params.lam + (1.0 - params.lam) * u ** params.gamma_t


def accumulate_window(events: EventArray, window: WindowSpec,
                      geometry: SensorGeometry, params: HTAParams) -> WindowResponse:
    """Scatter-add recency weights into per-polarity maps, in arrival order."""
    if len(events):
        if not window.contains(int(events.t[0])) or not window.contains(int(events.t[-1])):
            raise ValueError("events outside the window")
    pos = np.zeros(geometry.shape)
    neg = np.zeros(geometry.shape)
    kernels.accumulate(events.t, events.x, events.y, events.p,
                       window.start_us, window.duration_us,
                       params.lam, params.gamma_t, pos, neg)
    return WindowResponse(pos=pos, neg=neg)


def box_average(field: np.ndarray, radius: int) -> np.ndarray:
    """Border-aware mean over the (2r+1)^2 neighborhood.

    The window is clipped at image borders and the divisor is the count of
    in-bounds pixels, so constants stay constant out to the edge. Radius 0
    is the identity.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return field.copy()
    h, w = field.shape
    padded = np.zeros((h + 2 * radius, w + 2 * radius))
    padded[radius:radius + h, radius:radius + w] = field
    total = np.zeros((h, w))
    count = np.zeros((h, w), np.int64)
    ones = np.zeros((h + 2 * radius, w + 2 * radius), np.int64)
    ones[radius:radius + h, radius:radius + w] = 1
    for dy in range(2 * radius + 1):
        for dx in range(2 * radius + 1):
            total += padded[dy:dy + h, dx:dx + w]
            count += ones[dy:dy + h, dx:dx + w]
    return total / count


def reliability(response: WindowResponse, params: HTAParams) -> np.ndarray:
    """Per-pixel confidence from local activity level and polarity consistency."""
    ba = box_average(response.activity, params.blur_radius)
    bs = box_average(response.signed, params.blur_radius)
    r = (ba / (ba + params.tau)) * (np.abs(bs) / (ba + params.eps))
    return np.clip(r, 0.0, 1.0)


def adaptive_decay(r: np.ndarray, params: HTAParams) -> np.ndarray:
    """Decay rate field: low reliability decays faster, bounded both ways."""
    return np.clip(params.kappa0 * (1.0 + params.alpha * (1.0 - r)),
                   params.kappa_min, params.kappa_max)


def update_state(state: EncoderState, response: WindowResponse,
                 kappa: np.ndarray, dt_s: float,
                 params: HTAParams) -> tuple[np.ndarray, np.ndarray]:
    """Decay the previous state maps and inject the window response.

    Returns the pre-inhibition maps; ``state`` is not modified.
    """
    mp = state.m_plus.copy()
    mn = state.m_minus.copy()
    kernels.decay_update(mp, mn, response.pos, response.neg, kappa,
                         dt_s, params.b, params.c)
    return mp, mn


def inhibit_and_saturate(mp_tilde: np.ndarray, mn_tilde: np.ndarray,
                         params: HTAParams) -> tuple[np.ndarray, np.ndarray]:
    """Suppress the weaker polarity at each pixel, then cap smoothly.

    With beta >= 1 at most one polarity survives per pixel; tanh keeps
    both maps in [0, cap].
    """
    cap = params.cap
    m_plus = cap * np.tanh(np.maximum(mp_tilde - params.beta * mn_tilde, 0.0) / cap)
    m_minus = cap * np.tanh(np.maximum(mn_tilde - params.beta * mp_tilde, 0.0) / cap)
    return m_plus, m_minus


def project_pseudo_rgb(state: EncoderState,
                       params: HTAParams) -> tuple[ProjectionFields, np.ndarray]:
    """Map the polarity states to a float frame in [0, 1]^3.

    The luminance term is clipped to [0, 1] before entering any channel
    (it can exceed 1 when the intensity passes sigma); gamma applies
    elementwise to each clipped channel.
    """
    mp, mn = state.m_plus, state.m_minus
    pi = (mp - mn) / (mp + mn + params.eps)
    u = (1.0 - params.eta) * np.maximum(mp, mn) + params.eta * np.abs(mp - mn)
    y = np.log1p(params.g * u) / np.log1p(params.g * params.sigma)
    yc = np.clip(y, 0.0, 1.0)
    red = np.clip(yc + params.mu * np.maximum(pi, 0.0), 0.0, 1.0) ** params.gamma_c
    green = yc ** params.gamma_c
    blue = np.clip(yc + params.mu * np.maximum(-pi, 0.0), 0.0, 1.0) ** params.gamma_c
    frame = np.stack([red, green, blue], axis=-1)
    return ProjectionFields(pi=pi, u=u, y=y), frame


def quantize(frame: np.ndarray) -> np.ndarray:
    """8-bit quantization with round-half-away-from-zero.

    Channels are non-negative here, so half-away rounding is
    floor(v * 255 + 0.5).
    """
    return np.floor(frame * 255.0 + 0.5).astype(np.uint8)


class Encoder:
    """Stateful per-window encoder; windows must arrive in index order."""

    def __init__(self, config: EncoderConfig, state: EncoderState | None = None):
        self.config = config
        self.state = state if state is not None else EncoderState.zeros(config.geometry)

    def reset(self) -> None:
        self.state = EncoderState.zeros(self.config.geometry)

    def encode_window(self, window: WindowSpec, events: EventArray) -> PseudoRGBFrame:
        float_frame, _ = self.encode_window_float(window, events)
        return PseudoRGBFrame(pixels=quantize(float_frame), window=window)

    def encode_window_float(
        self, window: WindowSpec, events: EventArray
    ) -> tuple[np.ndarray, ProjectionFields]:
        """Run one full window step and return the pre-quantization frame."""
        cfg = self.config
        last = self.state.last_window_index
        if last is not None and window.index != last + 1:
            raise ValueError(
                f"window {window.index} out of order; expected {last + 1}")
        response = accumulate_window(events, window, cfg.geometry, cfg.params)
        r = reliability(response, cfg.params)
        kappa = adaptive_decay(r, cfg.params)
        mp_tilde, mn_tilde = update_state(self.state, response, kappa,
                                          cfg.dt_seconds, cfg.params)
        m_plus, m_minus = inhibit_and_saturate(mp_tilde, mn_tilde, cfg.params)
        self.state = EncoderState(m_plus=m_plus, m_minus=m_minus,
                                  last_window_index=window.index)
        fields, frame = project_pseudo_rgb(self.state, cfg.params)
        return frame, fields


def encode_stream(
    windows: Iterable[tuple[WindowSpec, EventArray]],
    config: EncoderConfig,
    sink: Callable[[PseudoRGBFrame], None],
    state: EncoderState | None = None,
) -> int:
    """Encode every window in order, emitting one frame each to the sink.

    Returns the frame count. Sink failures propagate as SinkWriteError
    with the offending window index attached.
    """
    encoder = Encoder(config, state=state)
    count = 0
    for window, events in windows:
        frame = encoder.encode_window(window, events)
        try:
            sink(frame)
        except Exception as e:
            raise SinkWriteError(window.index, e) from e
        count += 1
    if state is not None:
        state.m_plus = encoder.state.m_plus
        state.m_minus = encoder.state.m_minus
        state.last_window_index = encoder.state.last_window_index
    return count
