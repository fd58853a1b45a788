import subprocess
import sys
import threading
from pathlib import Path

import numpy as np
import pytest

from evhta import formats
from evhta.errors import ConfigError
from evhta.events import EventArray, SensorGeometry, window_iter
from evhta.synth import BarSpec, NoiseSpec, SceneSpec, generate

import evhta_bindings as bind

GEOMETRY = SensorGeometry(width=96, height=64)
CFG = {"width": "96", "height": "64"}


def scene_events(seed):
    scene = SceneSpec(geometry=GEOMETRY, duration_us=700_000,
                      bar=BarSpec(width_px=6, speed_px_s=100.0,
                                  edge_rate_hz=200.0),
                      noise=NoiseSpec(rate_hz=4.0), seed=seed)
    events, _ = generate(scene)
    return events


def window_arrays(events: EventArray, dt_us=50_000):
    """(t,x,y,p) array per window, matching the CLI's slicing."""
    out = []
    for _, chunk in window_iter(events, dt_us):
        out.append(np.stack([chunk.t.astype(np.int64), chunk.x.astype(np.int64),
                             chunk.y.astype(np.int64), chunk.p.astype(np.int64)],
                            axis=1))
    return out


def cli_frames(tmp_path: Path, events: EventArray, tag: str) -> list[np.ndarray]:
    src = tmp_path / f"{tag}.evh"
    out = tmp_path / f"{tag}_frames"
    formats.write_evh1(src, events, GEOMETRY)
    proc = subprocess.run(
        [sys.executable, "-m", "evhta.cli", "encode", "--input", str(src),
         "--out", str(out), "--frame-format", "htf1",
         "--set", "width=96", "--set", "height=64"],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    frames = []
    for path in sorted(out.glob("frame_*.htf1")):
        frames.append(formats.read_htf1(path).transpose(1, 2, 0))
    return frames


class TestOpen:
    def test_defaults(self):
        enc = bind.open_encoder()
        assert enc.geometry.width == 304 and enc.dt_us == 50_000
        bind.close(enc)

    def test_invalid_decay_product_rejected(self):
        with pytest.raises(ConfigError, match="kappa_max"):
            bind.open_encoder({"kappa_max": "25.0"})

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="wavelength"):
            bind.open_encoder({"wavelength": "3"})

    def test_config_file_path(self, tmp_path):
        cfg = tmp_path / "enc.cfg"
        cfg.write_text("width = 10\nheight = 8\nlam = 0.4\n")
        enc = bind.open_encoder(cfg)
        assert enc.geometry.width == 10
        bind.close(enc)

    def test_version_mirrors_core(self):
        import evhta

        assert bind.__version__ == evhta.__version__


class TestEncodeWindow:
    def test_empty_on_fresh_state_is_black(self):
        enc = bind.open_encoder(CFG)
        frame = bind.encode_window(enc, np.empty((0, 4), np.int64))
        assert frame.shape == (64, 96, 3) and frame.dtype == np.uint8
        assert not frame.any()
        bind.close(enc)

    def test_unsorted_rejected(self):
        enc = bind.open_encoder(CFG)
        with pytest.raises(ValueError, match="sorted"):
            bind.encode_window(enc, [[100, 0, 0, 1], [50, 0, 0, 1]])
        bind.close(enc)

    def test_out_of_bounds_rejected(self):
        enc = bind.open_encoder(CFG)
        with pytest.raises(ValueError, match="outside"):
            bind.encode_window(enc, [[10, 300, 0, 1]])
        bind.close(enc)

    def test_bad_polarity_rejected(self):
        enc = bind.open_encoder(CFG)
        with pytest.raises(ValueError, match="polarity"):
            bind.encode_window(enc, [[10, 0, 0, 2]])
        bind.close(enc)

    def test_event_beyond_window_rejected(self):
        enc = bind.open_encoder(CFG)
        with pytest.raises(ValueError, match="outside"):
            bind.encode_window(enc, [[10, 0, 0, 1], [60_000, 0, 0, 1]])
        bind.close(enc)

    def test_state_persistence_witness(self):
        """Two successive calls differ from two independent fresh calls."""
        burst = [[10_000, 5, 5, 1], [20_000, 5, 5, 1], [30_000, 5, 5, 1]]
        stateful = bind.open_encoder(CFG)
        bind.encode_window(stateful, burst)
        second_carried = bind.encode_window(stateful, np.empty((0, 4)))
        bind.close(stateful)

        fresh = bind.open_encoder(CFG)
        first_fresh = bind.encode_window(fresh, np.empty((0, 4)))
        bind.close(fresh)

        assert second_carried.any(), "decaying state must still be visible"
        assert not np.array_equal(second_carried, first_fresh)

    def test_reset_restores_fresh_behavior(self):
        burst = [[10_000, 5, 5, 1]]
        enc = bind.open_encoder(CFG)
        first = bind.encode_window(enc, burst)
        bind.reset(enc)
        again = bind.encode_window(enc, burst)
        assert np.array_equal(first, again)
        bind.close(enc)

    def test_no_hidden_global_state(self):
        burst = [[10_000, 5, 5, 1]]
        solo = bind.open_encoder(CFG)
        expected = [bind.encode_window(solo, burst),
                    bind.encode_window(solo, np.empty((0, 4)))]
        bind.close(solo)

        a = bind.open_encoder(CFG)
        b = bind.open_encoder(CFG)
        got_a = [bind.encode_window(a, burst)]
        got_b = [bind.encode_window(b, burst)]
        got_a.append(bind.encode_window(a, np.empty((0, 4))))
        got_b.append(bind.encode_window(b, np.empty((0, 4))))
        bind.close(a), bind.close(b)
        for got in (got_a, got_b):
            assert all(np.array_equal(x, y) for x, y in zip(got, expected))


class TestLifecycle:
    def test_use_after_close_raises(self):
        enc = bind.open_encoder(CFG)
        bind.close(enc)
        with pytest.raises(RuntimeError, match="closed"):
            bind.encode_window(enc, np.empty((0, 4)))
        with pytest.raises(RuntimeError, match="closed"):
            bind.reset(enc)

    def test_concurrent_use_raises(self):
        enc = bind.open_encoder(CFG)
        n = 40_000
        t = np.sort(np.random.default_rng(0).integers(0, 50_000, n))
        big = np.stack([t, np.zeros(n, np.int64), np.zeros(n, np.int64),
                        np.ones(n, np.int64)], axis=1)
        errors = []

        def worker():
            try:
                for _ in range(10):
                    bind.encode_window(enc, big[:0])
            except RuntimeError as e:
                errors.append(e)

        # hold the gate from the main thread while another thread calls in
        assert enc._gate.acquire()
        thread = threading.Thread(target=worker)
        thread.start()
        thread.join()
        enc._gate.release()
        bind.close(enc)
        assert errors, "concurrent call must raise rather than race"


class TestCrossInterfaceEquivalence:
    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_binding_matches_cli_byte_identical(self, tmp_path, seed):
        """[SECONDARY] acceptance: binding frames == CLI frames, 5 seeds."""
        events = scene_events(seed)
        expected = cli_frames(tmp_path, events, f"s{seed}")
        enc = bind.open_encoder(CFG)
        got = [bind.encode_window(enc, chunk)
               for chunk in window_arrays(events)]
        bind.close(enc)
        assert len(got) == len(expected) >= 10
        for mine, ref in zip(got, expected):
            assert np.array_equal(mine, ref)
        print(f"ACCEPTANCE binding-equivalence[seed={seed}]: PASS "
              f"({len(got)} frames byte-identical)")

    def test_reopen_same_params_same_hashes(self, tmp_path):
        events = scene_events(9)
        chunks = window_arrays(events)
        digests = []
        for _ in range(2):
            enc = bind.open_encoder(CFG)
            import hashlib

            h = hashlib.blake2b(digest_size=8)
            for chunk in chunks:
                h.update(bind.encode_window(enc, chunk).tobytes())
            bind.close(enc)
            digests.append(h.hexdigest())
        assert digests[0] == digests[1]
