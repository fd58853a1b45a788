"""Command-line interface.

Subcommands: encode, verify, bench, synth, inspect, fhtf-check.
Exit codes: 0 success, 1 input parse error, 2 configuration error,
3 I/O error. The default config file comes from ``EVHTA_CONFIG`` when
set; explicit ``--set key=value`` overrides win over the file.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, fhtf, formats, kernels, oracle, synth
from .encoder import Encoder, EncoderState, quantize
from .errors import ConfigError, EvhtaError, ParseError
from .events import EventArray, SensorGeometry, window_iter
from .params import EncoderConfig, dump_config, load_config

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_CONFIG = 2
EXIT_IO = 3


class FrameHasher:
    """64-bit streaming hash over raw frame bytes, for cheap regression diffs."""

    def __init__(self):
        self._h = hashlib.blake2b(digest_size=8)

    def update(self, pixels: np.ndarray) -> None:
        self._h.update(np.ascontiguousarray(pixels).tobytes())

    def hexdigest(self) -> str:
        return self._h.hexdigest()


def _parse_overrides(pairs: list[str] | None) -> dict[str, str]:
    overrides: dict[str, str] = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip() or not value.strip():
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        overrides[key.strip()] = value.strip()
    return overrides


def _resolve_config(args) -> EncoderConfig:
    path = getattr(args, "config", None) or os.environ.get("EVHTA_CONFIG") or None
    return load_config(path, _parse_overrides(getattr(args, "set", None)))


def _load_events(path: Path, config: EncoderConfig, args) -> EventArray:
    fmt = getattr(args, "format", None)
    if fmt is None:
        fmt = "text" if path.suffix in (".txt", ".csv") else "evh1"
    if fmt == "text":
        return formats.parse_text_stream(
            path, config.geometry,
            polarity_zero_neg=getattr(args, "polarity_zero_neg", False),
            allow_unsorted=getattr(args, "allow_unsorted", False))
    events, _ = formats.parse_evh1(
        path, config.geometry,
        allow_unsorted=getattr(args, "allow_unsorted", False))
    return events


def _write_frame(out_dir: Path, index: int, pixels: np.ndarray, kinds: str) -> None:
    if kinds in ("png", "both"):
        from PIL import Image

        Image.fromarray(pixels, mode="RGB").save(out_dir / f"frame_{index:06}.png")
    if kinds in ("htf1", "both"):
        formats.write_htf1(out_dir / f"frame_{index:06}.htf1",
                           np.ascontiguousarray(pixels.transpose(2, 0, 1)))


def _encode_one(path: Path, out_dir: Path, config: EncoderConfig, args) -> str:
    events = _load_events(path, config, args)
    out_dir.mkdir(parents=True, exist_ok=True)

    state = EncoderState.zeros(config.geometry)
    first_index = 0
    if args.load_state:
        m_plus, m_minus, last = formats.read_hts1(args.load_state)
        if m_plus.shape != config.geometry.shape:
            raise ConfigError("checkpoint geometry does not match configuration")
        state = EncoderState(m_plus.astype(np.float64), m_minus.astype(np.float64),
                             last)
        first_index = 0 if last is None else last + 1
        if first_index > 0 and args.t0 is None:
            raise ConfigError(
                "resuming mid-stream requires --t0 (the original window origin)")

    encoder = Encoder(config, state=state)
    hasher = FrameHasher()
    kernels.warmup()
    n_frames = 0
    started = time.perf_counter()
    for window, chunk in window_iter(events, config.dt_us, t0_us=args.t0,
                                     first_index=first_index):
        frame = encoder.encode_window(window, chunk)
        _write_frame(out_dir, window.index, frame.pixels, args.frame_format)
        hasher.update(frame.pixels)
        n_frames += 1
    elapsed = time.perf_counter() - started

    if args.save_state:
        formats.write_hts1(args.save_state, encoder.state.m_plus,
                           encoder.state.m_minus, encoder.state.last_window_index)
    rate = len(events) / elapsed if elapsed > 0 else float("inf")
    return (f"{path}: windows={n_frames} events={len(events)} "
            f"wall_s={elapsed:.3f} events_per_s={rate:.0f} "
            f"frames_hash={hasher.hexdigest()}")


def cmd_encode(args) -> int:
    config = _resolve_config(args)
    if args.dump_config:
        sys.stdout.write(dump_config(config))
        return EXIT_OK
    inputs = [Path(p) for p in args.input]
    for path in inputs:
        if not path.exists():
            raise FileNotFoundError(f"input not found: {path}")
    out_root = Path(args.out)
    jobs = [(p, out_root if len(inputs) == 1 else out_root / p.stem) for p in inputs]
    if args.threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            lines = list(pool.map(lambda j: _encode_one(j[0], j[1], config, args),
                                  jobs))
    else:
        lines = [_encode_one(p, d, config, args) for p, d in jobs]
    for line in lines:
        print(line)
    return EXIT_OK


def cmd_verify(args) -> int:
    config = _resolve_config(args)
    path = Path(args.input)
    if not path.exists():
        raise FileNotFoundError(f"input not found: {path}")
    events = _load_events(path, config, args)

    oracle_config = config
    if args.oracle_override:
        merged = dict(pair.split("=", 1) for pair in args.oracle_override)
        from .params import config_from_mapping, parse_config_text

        base = parse_config_text(dump_config(config))
        base.update({k.strip(): v.strip() for k, v in merged.items()})
        oracle_config = config_from_mapping(base)

    encoder = Encoder(config)
    reference = oracle.oracle_encode(events, oracle_config)
    worst = 0.0
    lsb_total = 0
    hard_total = 0
    for (window, chunk), ref in zip(window_iter(events, config.dt_us), reference):
        float_frame, _ = encoder.encode_window_float(window, chunk)
        cmp = oracle.compare_frames(float_frame, quantize(float_frame),
                                    ref.float_frame, ref.pixels, tol=args.tolerance)
        worst = max(worst, cmp.max_divergence)
        lsb_total += cmp.lsb_disagreements
        hard_total += cmp.hard_failures
    print(f"verify: windows={len(reference)} max_divergence={worst:.3e} "
          f"lsb_boundary_cases={lsb_total} hard_failures={hard_total}")
    return EXIT_OK if (worst <= args.tolerance and hard_total == 0) else EXIT_PARSE


def cmd_bench(args) -> int:
    config = _resolve_config(args)
    scene = synth.SceneSpec(
        geometry=config.geometry, dt_us=config.dt_us,
        duration_us=args.windows * config.dt_us,
        bar=synth.BarSpec(edge_rate_hz=2000.0),
        noise=synth.NoiseSpec(rate_hz=args.noise_rate), seed=args.seed)
    events, _ = synth.generate(scene)
    slices = list(window_iter(events, config.dt_us, t0_us=0))

    kernels.warmup()
    encoder = Encoder(config)
    started = time.perf_counter()
    hasher = FrameHasher()
    for window, chunk in slices:
        frame = encoder.encode_window(window, chunk)
        hasher.update(frame.pixels)
    full_elapsed = time.perf_counter() - started

    kernel_rate = _kernel_bench(slices, config, kernels.accumulate,
                                kernels.decay_update)
    events_per_s = len(events) / full_elapsed
    ms_per_frame = 1000.0 * full_elapsed / max(1, len(slices))
    print(f"bench: events_per_s={events_per_s:.0f} ms_per_frame={ms_per_frame:.3f}")
    print(f"bench-kernel: backend={kernels.BACKEND} events_per_s={kernel_rate:.0f} "
          f"events={len(events)} windows={len(slices)} "
          f"frames_hash={hasher.hexdigest()}")

    if args.compare_backends:
        numpy_rate = _kernel_bench(slices, config, kernels.accumulate_numpy,
                                   kernels.decay_update_numpy)
        print(f"bench-kernel: backend=numpy events_per_s={numpy_rate:.0f}")
        if kernels.HAVE_NUMBA:
            print(f"bench-kernel-speedup: {kernel_rate / numpy_rate:.2f}x")

    if args.check_baseline:
        import json

        baseline = json.loads(Path(args.check_baseline).read_text())
        recorded = baseline["kernel_events_per_s"]
        if isinstance(recorded, dict):
            recorded = recorded[kernels.BACKEND]
        floor_rate = 0.8 * float(recorded)
        ok = kernel_rate >= floor_rate
        print(f"bench-baseline: measured={kernel_rate:.0f} floor={floor_rate:.0f} "
              f"{'ok' if ok else 'REGRESSION'}")
        if not ok:
            return EXIT_PARSE
    return EXIT_OK


def _kernel_bench(slices, config: EncoderConfig, accumulate, decay_update) -> float:
    """Time the accumulate+update stages alone over pre-sliced windows."""
    from .encoder import accumulate_window, adaptive_decay, reliability

    shape = config.geometry.shape
    p = config.params
    # representative decay field, computed outside the timed region
    kappas = []
    for window, chunk in slices:
        response = accumulate_window(chunk, window, config.geometry, p)
        kappas.append(adaptive_decay(reliability(response, p), p))
    m_plus = np.zeros(shape)
    m_minus = np.zeros(shape)
    n_events = sum(len(chunk) for _, chunk in slices)
    started = time.perf_counter()
    for (window, chunk), kappa in zip(slices, kappas):
        pos = np.zeros(shape)
        neg = np.zeros(shape)
        accumulate(chunk.t, chunk.x, chunk.y, chunk.p, window.start_us,
                   window.duration_us, p.lam, p.gamma_t, pos, neg)
        decay_update(m_plus, m_minus, pos, neg, kappa,
                     config.dt_seconds, p.b, p.c)
    elapsed = time.perf_counter() - started
    return n_events / elapsed if elapsed > 0 else float("inf")


def cmd_synth(args) -> int:
    config = _resolve_config(args)
    scene = synth.SceneSpec(
        geometry=config.geometry, dt_us=config.dt_us,
        duration_us=args.duration_us,
        bar=synth.BarSpec(width_px=args.bar_width, speed_px_s=args.bar_speed,
                          edge_rate_hz=args.edge_rate),
        noise=synth.NoiseSpec(rate_hz=args.noise_rate), seed=args.seed)
    events, masks = synth.generate(scene)
    out = Path(args.out)
    formats.write_evh1(out, events, scene.geometry)
    formats.write_htf1(out.with_suffix(out.suffix + ".mask.htf1"), masks)
    print(f"synth: events={len(events)} windows={scene.n_windows} "
          f"seed={scene.seed} out={out}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    config = _resolve_config(args)
    path = Path(args.input)
    if not path.exists():
        raise FileNotFoundError(f"input not found: {path}")
    if (getattr(args, "format", None) == "text") or path.suffix in (".txt", ".csv"):
        events = formats.parse_text_stream(path, config.geometry,
                                           allow_unsorted=True)
        geometry = config.geometry
        print(f"format=text width={geometry.width} height={geometry.height}")
    else:
        events, geometry = formats.parse_evh1(path, allow_unsorted=True)
        print(f"format=EVH1 width={geometry.width} height={geometry.height} "
              f"records={len(events)}")
    if len(events) == 0:
        print("events=0")
        return EXIT_OK
    t_lo, t_hi = int(events.t[0]), int(events.t[-1])
    print(f"events={len(events)} t_first_us={t_lo} t_last_us={t_hi} "
          f"span_us={t_hi - t_lo}")
    print(f"window_histogram dt_us={config.dt_us}:")
    for window, chunk in window_iter(events, config.dt_us):
        print(f"  window {window.index}: {len(chunk)}")
    return EXIT_OK


def cmd_fhtf_check(args) -> int:
    from .fhtf_checks import run_all_checks

    sweep = [args.hyperedges] if args.hyperedges else [1, 4, 8, 16, 32, 64]
    failures = run_all_checks(seed=args.seed, hyperedge_counts=sweep,
                              verbose=True)
    if failures:
        print("fhtf-check: FAILED " + ", ".join(failures))
        return EXIT_PARSE
    print("fhtf-check: all invariants hold")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evhta",
        description="Event-stream pseudo-RGB encoder and verification tools")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_args(p):
        p.add_argument("--config", help="config file (default: $EVHTA_CONFIG)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one config key (repeatable; wins over file)")

    p = sub.add_parser("encode", help="encode event files into frames")
    add_config_args(p)
    p.add_argument("--input", nargs="+", required=True)
    p.add_argument("--out", required=True, help="output directory")
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--text", dest="format", action="store_const", const="text",
                     help="force text input format")
    fmt.add_argument("--evh1", dest="format", action="store_const", const="evh1",
                     help="force EVH1 input format")
    p.add_argument("--frame-format", choices=("png", "htf1", "both"), default="png")
    p.add_argument("--polarity-zero-neg", action="store_true",
                   help="text polarity is 1/0 with 0 meaning -1")
    p.add_argument("--allow-unsorted", action="store_true",
                   help="stable-sort events instead of rejecting regressions")
    p.add_argument("--t0", type=int, default=None,
                   help="window origin in us (default: first event rounded down)")
    p.add_argument("--threads", type=int, default=1,
                   help="parallelism across input files (streams stay ordered)")
    p.add_argument("--save-state", help="write an HTS1 checkpoint after encoding")
    p.add_argument("--load-state", help="resume from an HTS1 checkpoint")
    p.add_argument("--dump-config", action="store_true",
                   help="print the effective configuration and exit")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("verify", help="compare encoder against the brute-force oracle")
    add_config_args(p)
    p.add_argument("--input", required=True)
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--text", dest="format", action="store_const", const="text")
    fmt.add_argument("--evh1", dest="format", action="store_const", const="evh1")
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--oracle-override", action="append", metavar="KEY=VALUE",
                   help="perturb the oracle's parameters (self-test aid)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="measure encoder throughput on a seeded stream")
    add_config_args(p)
    p.add_argument("--windows", type=int, default=50)
    p.add_argument("--noise-rate", type=float, default=25.0)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--compare-backends", action="store_true",
                   help="also time the pure-numpy kernel fallback")
    p.add_argument("--check-baseline", metavar="JSON",
                   help="fail if the kernel rate regresses >20%% below baseline")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="generate a synthetic event stream")
    add_config_args(p)
    p.add_argument("--out", required=True, help="output EVH1 path")
    p.add_argument("--duration-us", type=int, default=2_500_000)
    p.add_argument("--bar-width", type=int, default=12)
    p.add_argument("--bar-speed", type=float, default=300.0)
    p.add_argument("--edge-rate", type=float, default=400.0)
    p.add_argument("--noise-rate", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("inspect", help="print header and per-window statistics")
    add_config_args(p)
    p.add_argument("--input", required=True)
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--text", dest="format", action="store_const", const="text")
    fmt.add_argument("--evh1", dest="format", action="store_const", const="evh1")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("fhtf-check", help="run the fusion-stage invariant suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hyperedges", type=int, default=None,
                   help="check a single hyperedge count instead of the sweep")
    p.set_defaults(func=cmd_fhtf_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except EvhtaError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
