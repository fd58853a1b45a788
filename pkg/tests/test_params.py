import pytest

from evhta.errors import ConfigError
from evhta.params import (
    EncoderConfig,
    HTAParams,
    config_from_mapping,
    dump_config,
    load_config,
    parse_config_text,
    validate,
)


def test_defaults_validate():
    config = validate(EncoderConfig())
    assert config.params.lam == 0.2
    assert config.dt_us == 50_000
    assert config.geometry.width == 304


def test_decay_product_bound():
    # kappa_max * dt must stay <= 1 so the decay base stays in [0, 1]
    with pytest.raises(ConfigError, match="kappa_max"):
        validate(EncoderConfig(params=HTAParams(kappa_max=25.0)))
    validate(EncoderConfig(params=HTAParams(kappa_max=25.0), dt_us=40_000))


@pytest.mark.parametrize("field,value", [
    ("lam", -0.1), ("lam", 1.5), ("gamma_t", 0.0), ("tau", 0.0),
    ("eps", 0.0), ("alpha", -1.0), ("kappa_min", -1.0), ("b", 0.0),
    ("c", 0.0), ("beta", -0.5), ("cap", 0.0), ("eta", 2.0), ("g", 0.0),
    ("sigma", 0.0), ("mu", -0.1), ("gamma_c", 0.0), ("blur_radius", -1),
])
def test_range_violations(field, value):
    with pytest.raises(ConfigError):
        validate(EncoderConfig(params=HTAParams(**{field: value})))


def test_kappa_ordering():
    with pytest.raises(ConfigError, match="kappa_min"):
        validate(EncoderConfig(params=HTAParams(kappa_min=5.0, kappa_max=3.0)))


def test_unknown_key_named():
    with pytest.raises(ConfigError, match="wavelength"):
        config_from_mapping({"wavelength": "3"})


def test_config_text_parsing():
    values = parse_config_text("lam = 0.5 # floor\n\n# comment\ndt_us = 10000\n")
    assert values == {"lam": "0.5", "dt_us": "10000"}
    config = config_from_mapping(values)
    assert config.params.lam == 0.5 and config.dt_us == 10_000


def test_config_text_errors():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("just words\n")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text("lam = 0.5\nlam = 0.6\n")
    with pytest.raises(ConfigError, match="empty"):
        parse_config_text("lam =\n")


def test_bad_value_parse():
    with pytest.raises(ConfigError, match="lam"):
        config_from_mapping({"lam": "zero point two"})


def test_dump_round_trips(tmp_path):
    config = validate(EncoderConfig(params=HTAParams(lam=0.35, gamma_c=1 / 1.2)))
    path = tmp_path / "hta.cfg"
    path.write_text(dump_config(config))
    again = load_config(path)
    assert again == config


def test_overrides_win_over_file(tmp_path):
    path = tmp_path / "hta.cfg"
    path.write_text("lam = 0.5\nwidth = 100\nheight = 80\n")
    config = load_config(path, {"lam": "0.9"})
    assert config.params.lam == 0.9
    assert config.geometry.width == 100
