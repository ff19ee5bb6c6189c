import pytest

from twrbf.bench.config import (
    RunConfig,
    RunMode,
    build_config,
    load_config,
    read_config_file,
)
from twrbf.errors import ConfigError


def write(tmp_path, text):
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return path


def test_defaults():
    config = RunConfig(mode=RunMode.MAXMIN)
    assert config.pairs == 1
    assert config.snr_db == [10.0]
    assert config.resolved_schemes() == [
        "maxmin",
        "bisection",
        "identity",
        "antenna-selection",
    ]
    assert config.resolved_targets() == [1.0, 1.0]
    assert config.resolved_weights() == [0.2, 0.8]


def test_four_user_weights():
    config = build_config(mode="wsr", pairs=2)
    assert config.resolved_weights() == [0.2, 0.8, 0.5, 0.5]
    assert build_config(mode="wsr", pairs=3).resolved_weights() == [1.0] * 6


def test_file(tmp_path):
    path = write(
        tmp_path,
        "# two pairs\n"
        "pairs = 2\n"
        "antennas = 4\n"
        "snr-db = 0, 10, 20\n"
        "schemes = wsr, maxmin  # comment\n",
    )
    raw = read_config_file(path)
    assert raw["snr_db"] == "0, 10, 20"
    config = load_config(path, mode="wsr")
    assert config.pairs == 2
    assert config.snr_db == [0.0, 10.0, 20.0]
    assert config.schemes == ["wsr", "maxmin"]


def test_overrides_win(tmp_path):
    path = write(tmp_path, "pairs = 2\ntrials = 5\n")
    config = load_config(path, mode="maxmin", trials=3, seed=None)
    assert config.trials == 3
    assert config.pairs == 2
    assert config.seed == 0


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        read_config_file(tmp_path / "nope.cfg")


def test_malformed_file(tmp_path):
    path = write(tmp_path, "pairs\n")
    with pytest.raises(ConfigError):
        read_config_file(path)


@pytest.mark.parametrize(
    "values",
    [
        dict(pairs=0),
        dict(trials=0),
        dict(eps=-1),
        dict(snr_db=""),
        dict(weights="1, 2, 3"),
        dict(targets="1, -1"),
        dict(schemes="wsr"),
        dict(utility="capacity"),
        dict(modulation="16qam"),
        dict(colour="blue"),
    ],
)
def test_invalid(values):
    with pytest.raises(ConfigError):
        build_config(mode="maxmin", **values)


def test_unknown_mode():
    with pytest.raises(ConfigError):
        build_config(mode="broadcast")


def test_scheme_error_names_choices():
    with pytest.raises(ConfigError, match="antenna-selection"):
        build_config(mode="maxmin", schemes="collab-total")


def test_user_antennas():
    config = build_config(mode="mimo", user_antennas="1, 2")
    assert config.resolved_user_antennas() == [1, 2]
    assert build_config(mode="mimo").resolved_user_antennas() == [2, 2]
    with pytest.raises(ConfigError):
        build_config(mode="mimo", user_antennas="0, 2")


def test_poly_seconds():
    assert build_config(mode="wsr").poly_seconds is None
    assert build_config(mode="wsr", poly_seconds="2.5").poly_seconds == 2.5
    with pytest.raises(ConfigError):
        build_config(mode="wsr", poly_seconds=0)
