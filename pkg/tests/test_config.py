import pytest
from hypothesis import given, strategies as st

from sl2approx.config import ConfigError, ExperimentConfig, config_from_mapping, load_config


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_include_and_override_order(tmp_path):
    _write(tmp_path, "base.cfg", "d = 3\nprecision = 128\nseed = 1\n")
    top = _write(tmp_path, "top.cfg", "include = base.cfg\nprecision = 512  # wins over base\n")
    cfg = load_config(top, {"seed": 9, "out": None})
    assert (cfg.d, cfg.precision, cfg.seed) == (3, 512, 9)


def test_nested_include_rejected(tmp_path):
    _write(tmp_path, "a.cfg", "d = 1\n")
    _write(tmp_path, "b.cfg", "include = a.cfg\n")
    top = _write(tmp_path, "c.cfg", "include = b.cfg\n")
    with pytest.raises(ConfigError, match="nested"):
        load_config(top)


@pytest.mark.parametrize("text", ["bogus = 1\n", "d = 5\n", "precision = many\n", "no equals sign\n",
                                  "omega = 1\n", "precision = 512\nprecision_cap = 256\n",
                                  "target = sideways\n"])
def test_bad_configs(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "x.cfg", text))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")


def test_scientific_integers():
    assert config_from_mapping({"budget": "1e6"}).budget == 10**6


@given(st.integers(32, 4096), st.integers(0, 10**9), st.text(max_size=20))
def test_hash_ignores_output_path(prec, seed, out):
    a = ExperimentConfig(precision=prec, precision_cap=8192, seed=seed)
    b = ExperimentConfig(precision=prec, precision_cap=8192, seed=seed, out=out)
    assert a.sha256() == b.sha256()
    assert a.sha256() != ExperimentConfig(precision=prec, precision_cap=8192, seed=seed + 1).sha256()
