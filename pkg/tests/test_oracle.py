import numpy as np
import pytest

from evhta.encoder import Encoder, accumulate_window, quantize
from evhta.events import Event, EventArray, SensorGeometry, WindowSpec, window_iter
from evhta.oracle import compare_frames, oracle_encode, oracle_histogram2d
from evhta.params import EncoderConfig, HTAParams

GEOM = SensorGeometry(width=24, height=18)


def random_stream(seed, n=2000, span_us=400_000):
    rng = np.random.default_rng(seed)
    return EventArray.from_arrays(
        np.sort(rng.integers(0, span_us, n).astype(np.uint64)),
        rng.integers(0, GEOM.width, n),
        rng.integers(0, GEOM.height, n),
        rng.choice(np.array([-1, 1], np.int8), n))


class TestHistogram:
    def test_single_event(self):
        pos, neg = oracle_histogram2d(
            EventArray.from_events([Event(0, 0, 5, 1)]), GEOM)
        assert pos[0, 0] == 1 and pos.sum() == 1 and neg.sum() == 0

    def test_duplicates_count_multiplicity(self):
        events = EventArray.from_events([Event(2, 3, 1, -1)] * 4)
        pos, neg = oracle_histogram2d(events, GEOM)
        assert neg[3, 2] == 4

    def test_matches_unit_weight_accumulation(self):
        events = random_stream(21, n=800, span_us=50_000)
        window = WindowSpec(index=0, start_us=0, duration_us=50_000)
        resp = accumulate_window(events, window, GEOM, HTAParams(lam=1.0))
        pos, neg = oracle_histogram2d(events, GEOM)
        assert np.array_equal(resp.pos, pos.astype(np.float64))
        assert np.array_equal(resp.neg, neg.astype(np.float64))


class TestOracleEncode:
    def test_empty_stream(self):
        assert oracle_encode(EventArray.empty(), EncoderConfig(geometry=GEOM)) == []

    def test_pure_and_stateless(self):
        events = random_stream(22, n=500)
        config = EncoderConfig(geometry=GEOM)
        a = oracle_encode(events, config)
        b = oracle_encode(events, config)
        assert len(a) == len(b)
        for fa, fb in zip(a, b):
            assert np.array_equal(fa.float_frame, fb.float_frame)
            assert np.array_equal(fa.pixels, fb.pixels)

    def test_window_layout_matches_streaming_side(self):
        events = random_stream(23, n=300)
        config = EncoderConfig(geometry=GEOM)
        frames = oracle_encode(events, config)
        specs = [w for w, _ in window_iter(events, config.dt_us)]
        assert [f.window for f in frames] == specs

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_equivalence_with_streaming_encoder(self, seed):
        events = random_stream(seed, n=3000)
        config = EncoderConfig(geometry=GEOM)
        self._assert_equivalent(events, config)

    @pytest.mark.parametrize("params", [
        HTAParams(b=2.0),                      # non-unit decay exponent branch
        HTAParams(beta=0.4),                   # non-exclusive inhibition
        HTAParams(blur_radius=0),
        HTAParams(blur_radius=3),
        HTAParams(lam=0.0, gamma_t=0.7),
        HTAParams(gamma_c=1.0, mu=0.9),
        HTAParams(kappa0=4.0, alpha=3.0, kappa_min=1.0, kappa_max=18.0, c=0.3),
    ])
    def test_equivalence_across_parameter_space(self, params):
        events = random_stream(11, n=4000)
        config = EncoderConfig(geometry=GEOM, params=params)
        self._assert_equivalent(events, config)

    @staticmethod
    def _assert_equivalent(events, config):
        encoder = Encoder(config)
        worst, hard = 0.0, 0
        reference = oracle_encode(events, config)
        for (window, chunk), ref in zip(window_iter(events, config.dt_us),
                                        reference):
            float_frame, _ = encoder.encode_window_float(window, chunk)
            cmp = compare_frames(float_frame, quantize(float_frame),
                                 ref.float_frame, ref.pixels)
            worst = max(worst, cmp.max_divergence)
            hard += cmp.hard_failures
        assert worst <= 1e-6
        assert hard == 0

    def test_histogram_path_agrees_at_unit_floor(self):
        # lam=1, one window: frame equals the plain-histogram projection
        events = random_stream(24, n=400, span_us=50_000)
        config = EncoderConfig(geometry=GEOM, params=HTAParams(lam=1.0))
        ref = oracle_encode(events, config)
        assert len(ref) == 1
        encoder = Encoder(config)
        window = WindowSpec(index=0, start_us=0, duration_us=config.dt_us)
        frame = encoder.encode_window(window, events)
        assert np.array_equal(frame.pixels, ref[0].pixels)


class TestCompareFrames:
    def test_detects_divergence(self):
        a = np.zeros((2, 2, 3))
        b = a.copy()
        b[0, 0, 0] = 0.001
        cmp = compare_frames(a, quantize(a), b, quantize(b))
        assert cmp.max_divergence == pytest.approx(0.001)
        assert cmp.hard_failures > 0

    def test_boundary_straddle_tolerated(self):
        boundary = 127.5 / 255.0
        a = np.full((1, 1, 3), boundary + 2e-7)
        b = np.full((1, 1, 3), boundary - 2e-7)
        cmp = compare_frames(a, quantize(a), b, quantize(b))
        assert cmp.hard_failures == 0
        assert cmp.lsb_disagreements == 3

    def test_non_straddle_lsb_is_hard(self):
        a = np.full((1, 1, 3), 0.4)            # quantizes to 102
        b = np.full((1, 1, 3), 0.4)
        qa = quantize(a)
        qb = qa.copy() + 1                      # fake a 1-LSB offset
        cmp = compare_frames(a, qa, b, qb)
        assert cmp.hard_failures == 3
