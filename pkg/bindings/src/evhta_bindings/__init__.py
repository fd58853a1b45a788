"""In-process encode-to-array binding over the core encoder.

Lets training pipelines pull pseudo-RGB frames window by window without
any file round-trip:

    enc = open_encoder({"width": 304, "height": 240})
    frame = encode_window(enc, events)   # (H, W, 3) uint8
    ...
    close(enc)

``events`` is an (N, 4) integer array with columns (t_us, x, y, p),
sorted by t and confined to the next window; successive calls advance
the window sequence, so frames are byte-identical to what the CLI
produces for the same stream. Each call returns a freshly quantized
array (one copy out of the encoder's float state; the ndarray is owned
by the caller).

Encoders are single-owner handles: use after ``close`` raises, and
concurrent calls into one encoder raise instead of racing.
"""

from __future__ import annotations

import threading
from pathlib import Path
from typing import Mapping

import numpy as np
from evhta import __version__ as _core_version
from evhta.encoder import Encoder
from evhta.errors import ConfigError
from evhta.events import EventArray, WindowSpec, default_origin
from evhta.params import EncoderConfig, config_from_mapping, load_config

__version__ = _core_version

__all__ = ["BoundEncoder", "open_encoder", "encode_window", "reset", "close",
           "__version__"]


class BoundEncoder:
    """Handle owning encoder state plus the window clock."""

    def __init__(self, config: EncoderConfig):
        self._config = config
        self._encoder = Encoder(config)
        self._origin_us: int | None = None
        self._next_index = 0
        self._closed = False
        self._gate = threading.Lock()

    @property
    def geometry(self):
        return self._config.geometry

    @property
    def dt_us(self) -> int:
        return self._config.dt_us

    @property
    def next_window_index(self) -> int:
        return self._next_index

    def _check_open(self) -> None:
        if self._closed:
            raise RuntimeError("encoder is closed")


def open_encoder(config: str | Path | Mapping | None = None) -> BoundEncoder:
    """Create a fresh encoder from a config-file path or a key mapping.

    Validation matches the CLI: unknown keys, out-of-range values, and a
    decay product kappa_max * dt > 1 all raise ConfigError.
    """
    if config is None:
        cfg = config_from_mapping({})
    elif isinstance(config, (str, Path)):
        cfg = load_config(config)
    elif isinstance(config, Mapping):
        cfg = config_from_mapping(dict(config))
    else:
        raise ConfigError(f"config must be a path or mapping, got {type(config)!r}")
    return BoundEncoder(cfg)


def _as_event_array(raw, encoder: BoundEncoder) -> EventArray:
    arr = np.asarray(raw)
    if arr.size == 0:
        return EventArray.empty()
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValueError(f"expected an (N, 4) array of (t, x, y, p), "
                         f"got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.round(arr)):
            raise ValueError("event fields must be integers")
        arr = arr.astype(np.int64)
    t, x, y, p = arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]
    if np.any(t[1:] < t[:-1]):
        raise ValueError("events must be sorted by timestamp")
    if np.any(t < 0):
        raise ValueError("negative timestamp")
    geom = encoder.geometry
    if np.any((x < 0) | (x >= geom.width) | (y < 0) | (y >= geom.height)):
        raise ValueError(f"coordinates outside {geom.width}x{geom.height}")
    if not np.all((p == 1) | (p == -1)):
        raise ValueError("polarity must be +1 or -1")
    return EventArray.from_arrays(t, x, y, p)


def encode_window(encoder: BoundEncoder, events) -> np.ndarray:
    """Encode the next window from its event slice; returns (H, W, 3) uint8.

    The first non-empty call pins the window origin (first timestamp
    rounded down to a dt multiple, matching the CLI); every event must
    fall inside the window being encoded.
    """
    if not encoder._gate.acquire(blocking=False):
        raise RuntimeError("encoder is in use by another thread")
    try:
        encoder._check_open()
        arr = _as_event_array(events, encoder)
        dt = encoder.dt_us
        if encoder._origin_us is None and len(arr):
            origin = default_origin(int(arr.t[0]), dt) - encoder._next_index * dt
            if origin < 0:
                raise ValueError(
                    f"first event at {int(arr.t[0])} us cannot belong to "
                    f"window {encoder._next_index}")
            encoder._origin_us = origin
        start = ((encoder._origin_us or 0) + encoder._next_index * dt)
        window = WindowSpec(index=encoder._next_index, start_us=start,
                            duration_us=dt)
        if len(arr) and not (window.contains(int(arr.t[0]))
                             and window.contains(int(arr.t[-1]))):
            raise ValueError(
                f"events [{int(arr.t[0])}, {int(arr.t[-1])}] us fall outside "
                f"window {window.index} [{window.start_us}, {window.end_us}) us")
        frame = encoder._encoder.encode_window(window, arr)
        encoder._next_index += 1
        return frame.pixels
    finally:
        encoder._gate.release()


def reset(encoder: BoundEncoder) -> None:
    """Clear state maps and the window clock; parameters are kept."""
    with encoder._gate:
        encoder._check_open()
        encoder._encoder.reset()
        encoder._origin_us = None
        encoder._next_index = 0


def close(encoder: BoundEncoder) -> None:
    """Release the handle; any later call on it raises."""
    with encoder._gate:
        encoder._closed = True
        encoder._encoder = None
