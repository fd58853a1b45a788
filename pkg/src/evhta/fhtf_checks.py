"""Invariant suite for the fusion stage, shared by the CLI and tests.

Each check returns None on success or a short failure description.
Golden fixtures live in the packaged ``fhtf_fixtures`` directory; the
weight fixture doubles as the constant-weight set for the golden runs.
"""

from __future__ import annotations

import numpy as np

from . import fhtf
from .formats import read_fhw1

GOLDEN_SHAPES = [(8, 8, 8), (16, 4, 4), (32, 2, 2)]
GOLDEN_NODE_WIDTH = 16
GOLDEN_HYPEREDGES = 8
GOLDEN_DK = 8

SMALL_SHAPES = [(8, 4, 4), (8, 4, 4), (8, 4, 4)]

WEIGHTS_FIXTURE = "fhtf_weights.fhw1"
SMALL_WEIGHTS_FIXTURE = "fhtf_weights_small.fhw1"
GOLDEN_TEMPORAL = "golden_temporal_seed42.fhw1"
GOLDEN_ANCHORS = "golden_anchors_seed7.fhw1"
GOLDEN_FORWARD = "golden_forward_seed123.fhw1"


def _zero_gate_params(params: fhtf.FHTFParams) -> fhtf.FHTFParams:
    import dataclasses

    return dataclasses.replace(
        params, alphas=[0.0, 0.0, 0.0],
        gamma=np.zeros_like(params.gamma))


def check_gate_identities(seed: int) -> str | None:
    rng = np.random.default_rng(seed)
    params = fhtf.random_params(rng, (8, 16, 32), node_width=16,
                                n_hyperedges=8, d_k=8)
    pyramid = fhtf.random_pyramid(rng, [(8, 6, 6), (16, 3, 3), (32, 2, 2)])
    state = fhtf.RecurrentState.zeros(pyramid.shapes)
    zeroed = _zero_gate_params(params)

    evolved, new_state = fhtf.temporal_evolve(pyramid, state, zeroed)
    for a, b in zip(evolved.maps, pyramid.maps):
        if not np.array_equal(a, b):
            return "alpha=0 temporal stage is not the identity"
    if all(np.array_equal(h, z) for h, z in
           zip(new_state.hidden, state.hidden)):
        return "state failed to advance under alpha=0"

    tokens = rng.standard_normal((24, 16)).astype(np.float32)
    incidence = fhtf.build_incidence(
        tokens, np.zeros((8, 8)) + rng.standard_normal((8, 8)), zeroed)
    refined = fhtf.hypergraph_refine(tokens, incidence, zeroed)
    if not np.array_equal(refined, tokens.astype(np.float64)):
        return "gamma=0 hypergraph stage is not the identity"

    out, _ = fhtf.fhtf_forward(pyramid, state, zeroed)
    for a, b in zip(out.maps, pyramid.maps):
        if not np.array_equal(a, b):
            return "alpha=0, gamma=0 full forward is not the identity"
    return None


def check_incidence_stochastic(seed: int, n_hyperedges: int) -> str | None:
    rng = np.random.default_rng(seed)
    params = fhtf.random_params(rng, (8, 16, 32), node_width=16,
                                n_hyperedges=n_hyperedges, d_k=8)
    tokens = rng.standard_normal((40, 16)).astype(np.float32)
    anchors = fhtf.build_anchors(
        fhtf.spectral_descriptor(tokens), fhtf.pooled_descriptor(tokens), params)
    incidence = fhtf.build_incidence(tokens, anchors, params)
    if incidence.min() < 0.0 or incidence.max() > 1.0:
        return f"H={n_hyperedges}: incidence entries leave [0, 1]"
    if np.abs(incidence.sum(axis=1) - 1.0).max() > 1e-6:
        return f"H={n_hyperedges}: incidence rows do not sum to 1"
    if n_hyperedges == 1 and not np.all(incidence == 1.0):
        return "H=1: singleton softmax is not exactly 1"
    return None


def check_shape_preservation(seed: int, n_hyperedges: int) -> str | None:
    rng = np.random.default_rng(seed)
    shapes = [(8, 6, 6), (16, 3, 3), (32, 2, 2)]
    params = fhtf.random_params(rng, (8, 16, 32), node_width=16,
                                n_hyperedges=n_hyperedges, d_k=8)
    pyramid = fhtf.random_pyramid(rng, shapes)
    state = fhtf.RecurrentState.zeros(shapes)
    out, out_state = fhtf.fhtf_forward(pyramid, state, params)
    if out.shapes != pyramid.shapes:
        return f"H={n_hyperedges}: output shapes {out.shapes} != input"
    if [h.shape for h in out_state.hidden] != shapes:
        return f"H={n_hyperedges}: state shapes changed"
    return None


def check_spectral_shift_invariance(seed: int) -> str | None:
    rng = np.random.default_rng(seed)
    tokens = rng.standard_normal((48, 16)).astype(np.float32)
    base = fhtf.spectral_descriptor(tokens)
    if base.min() < 0:
        return "negative spectral amplitude statistic"
    for shift in (1, 7, 23):
        rolled = fhtf.spectral_descriptor(np.roll(tokens, shift, axis=0))
        if np.abs(rolled - base).max() > 1e-5 * max(1.0, np.abs(base).max()):
            return f"token shift {shift} changed amplitude statistics"
    return None


def check_determinism(seed: int) -> str | None:
    rng1 = np.random.default_rng(seed)
    rng2 = np.random.default_rng(seed)

    def run(rng):
        params = fhtf.random_params(rng, (8, 16, 32), node_width=16,
                                    n_hyperedges=8, d_k=8)
        pyramid = fhtf.random_pyramid(rng, [(8, 6, 6), (16, 3, 3), (32, 2, 2)])
        state = fhtf.RecurrentState.zeros(pyramid.shapes)
        out, _ = fhtf.fhtf_forward(pyramid, state, params)
        return out

    out1, out2 = run(rng1), run(rng2)
    for a, b in zip(out1.maps, out2.maps):
        if not np.array_equal(a, b):
            return "identical seeds produced different outputs"
    return None


def check_parameter_count(seed: int) -> str | None:
    sizes = {}
    for n_hyperedges in (4, 32):
        rng = np.random.default_rng(seed)
        params = fhtf.random_params(rng, (8, 16, 32), node_width=16,
                                    n_hyperedges=n_hyperedges, d_k=8)
        tensors = fhtf.params_to_tensors(params)
        sizes[n_hyperedges] = {k: v.size for k, v in
                               ((k, np.asarray(v)) for k, v in tensors.items())}
        if params.prototypes.size != n_hyperedges * params.d_k:
            return "prototype matrix size is not H*d_k"
    a, b = sizes[4], sizes[32]
    diff = {k for k in a if a[k] != b[k]}
    if diff != {"prototypes"}:
        return f"tensors besides prototypes vary with H: {sorted(diff)}"
    return None


def golden_inputs(seed: int, shapes) -> fhtf.FeatureMapSet:
    rng = np.random.default_rng(seed)
    return fhtf.random_pyramid(rng, shapes)


def check_golden_temporal() -> str | None:
    name = GOLDEN_TEMPORAL
    try:
        params = fhtf.load_params(fhtf.fixture_path(SMALL_WEIGHTS_FIXTURE))
        golden = read_fhw1(fhtf.fixture_path(name))
    except Exception as e:
        return f"fixture {name}: {e}"
    pyramid = golden_inputs(42, SMALL_SHAPES)
    state = fhtf.RecurrentState.zeros(SMALL_SHAPES)
    evolved, new_state = fhtf.temporal_evolve(pyramid, state, params)
    for i in range(3):
        for label, got in (("features", evolved.maps[i]),
                           ("hidden", new_state.hidden[i]),
                           ("cell", new_state.cell[i])):
            want = golden[f"{label}.{i}"]
            if np.abs(got - want).max() > 1e-5:
                return (f"fixture {name}: {label}.{i} deviates by "
                        f"{np.abs(got - want).max():.2e}")
    return None


def check_golden_anchors() -> str | None:
    name = GOLDEN_ANCHORS
    try:
        params = fhtf.load_params(fhtf.fixture_path(WEIGHTS_FIXTURE))
        golden = read_fhw1(fhtf.fixture_path(name))
    except Exception as e:
        return f"fixture {name}: {e}"
    rng = np.random.default_rng(7)
    tokens = rng.standard_normal((84, GOLDEN_NODE_WIDTH)).astype(np.float32)
    anchors = fhtf.build_anchors(fhtf.spectral_descriptor(tokens),
                                 fhtf.pooled_descriptor(tokens), params)
    if np.abs(anchors - golden["anchors"]).max() > 1e-5:
        return (f"fixture {name}: anchors deviate by "
                f"{np.abs(anchors - golden['anchors']).max():.2e}")
    return None


def check_golden_forward() -> str | None:
    name = GOLDEN_FORWARD
    try:
        params = fhtf.load_params(fhtf.fixture_path(WEIGHTS_FIXTURE))
        golden = read_fhw1(fhtf.fixture_path(name))
    except Exception as e:
        return f"fixture {name}: {e}"
    pyramid = golden_inputs(123, GOLDEN_SHAPES)
    state = fhtf.RecurrentState.zeros(GOLDEN_SHAPES)
    out, _ = fhtf.fhtf_forward(pyramid, state, params)
    for i in range(3):
        want = golden[f"output.{i}"]
        if np.abs(out.maps[i] - want).max() > 1e-5:
            return (f"fixture {name}: output.{i} deviates by "
                    f"{np.abs(out.maps[i] - want).max():.2e}")
    return None


def run_all_checks(seed: int = 0,
                   hyperedge_counts: list[int] | None = None,
                   verbose: bool = False) -> list[str]:
    """Run every invariant; returns the list of failure descriptions."""
    sweep = hyperedge_counts or [1, 4, 8, 16, 32, 64]
    named: list[tuple[str, str | None]] = [
        ("gate-identities", check_gate_identities(seed)),
        ("spectral-shift-invariance", check_spectral_shift_invariance(seed)),
        ("determinism", check_determinism(seed)),
        ("parameter-count", check_parameter_count(seed)),
        ("golden-temporal", check_golden_temporal()),
        ("golden-anchors", check_golden_anchors()),
        ("golden-forward", check_golden_forward()),
    ]
    for n in sweep:
        named.append((f"incidence-stochastic-H{n}",
                      check_incidence_stochastic(seed, n)))
        named.append((f"shape-preservation-H{n}",
                      check_shape_preservation(seed, n)))

    failures = []
    for name, result in named:
        ok = result is None
        if verbose:
            print(f"  {name}: {'ok' if ok else result}")
        if not ok:
            failures.append(f"{name} ({result})")
    return failures
