"""Hot per-event and per-pixel kernels with two interchangeable backends.

The default backend compiles the inner loops with numba's @njit; setting
``EVHTA_BACKEND=numpy`` (or a missing numba install) selects pure-numpy
fallbacks. Both backends accumulate in float64 in event arrival order, so
outputs agree to the last few ulps; ``evhta bench --compare-backends``
reports the throughput of each.

Accumulation: each event adds its recency weight
``lam + (1 - lam) * ((t - t0) / dt) ** gamma_t`` to the positive or
negative response map at its pixel.

Decay-update: per pixel, ``m = (1 - kappa * dt_s) ** b * m + c * e`` for
both polarity maps, sharing one decay field.
"""

from __future__ import annotations

import os

import numpy as np

_requested = os.environ.get("EVHTA_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise RuntimeError(
        f"EVHTA_BACKEND={_requested!r} not recognized; use 'numba' or 'numpy'")

try:
    if _requested == "numpy":
        raise ImportError("numpy backend forced via EVHTA_BACKEND")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False
    if _requested == "numba":
        raise RuntimeError("EVHTA_BACKEND=numba but numba is not importable")

BACKEND = "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# pure-numpy reference implementations (always available)


def accumulate_numpy(t, x, y, p, t0_us: int, dt_us: int,
                     lam: float, gamma_t: float,
                     pos: np.ndarray, neg: np.ndarray) -> None:
    if len(t) == 0:
        return
    u = (t - np.uint64(t0_us)).astype(np.float64) / float(dt_us)
    w = lam + (1.0 - lam) * u ** gamma_t
    sel = p > 0
    # add.at is unbuffered: repeated pixels accumulate in arrival order
    np.add.at(pos, (y[sel], x[sel]), w[sel])
    np.add.at(neg, (y[~sel], x[~sel]), w[~sel])


def decay_update_numpy(m_plus, m_minus, pos, neg, kappa,
                       dt_s: float, b: float, c: float) -> None:
    decay = (1.0 - kappa * dt_s) ** b
    np.multiply(m_plus, decay, out=m_plus)
    m_plus += c * pos
    np.multiply(m_minus, decay, out=m_minus)
    m_minus += c * neg


# ---------------------------------------------------------------------------
# numba backend

if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _accumulate_nb(t, x, y, p, t0_us, dt_us, lam, gamma_t, pos, neg):
        dt = float(dt_us)
        for i in range(t.shape[0]):
            u = (t[i] - t0_us) / dt
            w = lam + (1.0 - lam) * u ** gamma_t
            if p[i] > 0:
                pos[y[i], x[i]] += w
            else:
                neg[y[i], x[i]] += w

    @njit(cache=True, nogil=True)
    def _decay_update_nb(m_plus, m_minus, pos, neg, kappa, dt_s, b, c):
        h, w = m_plus.shape
        plain = b == 1.0
        for i in range(h):
            for j in range(w):
                base = 1.0 - kappa[i, j] * dt_s
                decay = base if plain else base ** b
                m_plus[i, j] = decay * m_plus[i, j] + c * pos[i, j]
                m_minus[i, j] = decay * m_minus[i, j] + c * neg[i, j]

    def accumulate_numba(t, x, y, p, t0_us, dt_us, lam, gamma_t, pos, neg):
        _accumulate_nb(t, x, y, p, np.uint64(t0_us), np.int64(dt_us),
                       float(lam), float(gamma_t), pos, neg)

    def decay_update_numba(m_plus, m_minus, pos, neg, kappa, dt_s, b, c):
        _decay_update_nb(m_plus, m_minus, pos, neg, kappa,
                         float(dt_s), float(b), float(c))

    accumulate = accumulate_numba
    decay_update = decay_update_numba
else:
    accumulate = accumulate_numpy
    decay_update = decay_update_numpy


def warmup() -> None:
    """Trigger JIT compilation so timed sections exclude it. No-op on numpy."""
    if not HAVE_NUMBA:
        return
    pos = np.zeros((2, 2), np.float64)
    neg = np.zeros((2, 2), np.float64)
    accumulate(np.array([1], np.uint64), np.array([0], np.uint16),
               np.array([0], np.uint16), np.array([1], np.int8),
               0, 10, 0.2, 2.0, pos, neg)
    decay_update(pos, neg, pos.copy(), neg.copy(),
                 np.full((2, 2), 8.0), 0.05, 1.0, 1.0)
