"""Event-stream pseudo-RGB encoding and hypergraph fusion reference."""

from .encoder import (
    Encoder,
    EncoderState,
    PseudoRGBFrame,
    WindowResponse,
    accumulate_window,
    adaptive_decay,
    box_average,
    encode_stream,
    inhibit_and_saturate,
    intra_weight,
    project_pseudo_rgb,
    quantize,
    reliability,
    update_state,
)
from .errors import ConfigError, EvhtaError, ParseError, SinkWriteError
from .events import Event, EventArray, SensorGeometry, WindowSpec, window_iter
from .params import EncoderConfig, HTAParams, load_config
from .formats import parse_evh1, parse_text_stream, read_htf1, write_evh1, write_htf1

__version__ = "0.1.0"

__all__ = [
    "Encoder", "EncoderState", "PseudoRGBFrame", "WindowResponse",
    "accumulate_window", "adaptive_decay", "box_average", "encode_stream",
    "inhibit_and_saturate", "intra_weight", "project_pseudo_rgb", "quantize",
    "reliability", "update_state",
    "ConfigError", "EvhtaError", "ParseError", "SinkWriteError",
    "Event", "EventArray", "SensorGeometry", "WindowSpec", "window_iter",
    "EncoderConfig", "HTAParams", "load_config",
    "parse_evh1", "parse_text_stream", "read_htf1", "write_evh1", "write_htf1",
    "__version__",
]
