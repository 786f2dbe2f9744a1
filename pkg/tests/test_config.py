"""key=value config parsing and typed access."""

import pytest

from cascadefwm.config import ConfigError, RunConfig, parse_scalar


def test_parse_scalar_types():
    assert parse_scalar("42") == 42 and isinstance(parse_scalar("42"), int)
    assert parse_scalar("-3") == -3
    assert parse_scalar("2.5e3") == 2500.0 and isinstance(parse_scalar("2.5e3"), float)
    assert parse_scalar("true") is True
    assert parse_scalar("FALSE") is False
    assert parse_scalar("  tags.bin ") == "tags.bin"


def test_file_parsing(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "# comment\n"
        "\n"
        "tau_ns = 27.0   # trailing comment\n"
        "seed=5\n"
        "label = fig2\n"
        "plot = false\n"
    )
    cfg = RunConfig.from_file(path)
    assert cfg.get_float("tau_ns") == 27.0
    assert cfg.get_int("seed") == 5
    assert cfg.get_str("label") == "fig2"
    assert cfg.get_bool("plot") is False
    assert "seed" in cfg and "missing" not in cfg


def test_file_errors_carry_line_numbers(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("tau_ns = 27\nnonsense line\n")
    with pytest.raises(ConfigError, match="line 2"):
        RunConfig.from_file(bad)

    dup = tmp_path / "dup.cfg"
    dup.write_text("seed = 1\nseed = 2\n")
    with pytest.raises(ConfigError, match="line 2.*duplicate"):
        RunConfig.from_file(dup)

    key = tmp_path / "key.cfg"
    key.write_text("bad key! = 3\n")
    with pytest.raises(ConfigError, match="bad key"):
        RunConfig.from_file(key)


def test_overrides_win_and_skip_none(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("seed = 1\ntau_ns = 27\n")
    cfg = RunConfig.load(path, overrides={"seed": 9, "tau_ns": None})
    assert cfg.get_int("seed") == 9
    assert cfg.get_float("tau_ns") == 27.0


def test_load_without_file():
    cfg = RunConfig.load(None, overrides={"seed": 2})
    assert cfg.get_int("seed") == 2


def test_ensure_known_rejects_strays():
    cfg = RunConfig({"seed": 1, "tyop": 2})
    with pytest.raises(ConfigError, match="tyop"):
        cfg.ensure_known(["seed", "tau_ns"])
    cfg2 = RunConfig({"seed": 1})
    cfg2.ensure_known(["seed"])  # no error


def test_typed_access_errors():
    cfg = RunConfig({"word": "hello", "flag": True, "n": 3, "x": 1.5})
    with pytest.raises(ConfigError, match="missing required"):
        cfg.get_float("absent")
    with pytest.raises(ConfigError, match="must be a number"):
        cfg.get_float("word")
    with pytest.raises(ConfigError, match="must be an integer"):
        cfg.get_int("x")
    with pytest.raises(ConfigError, match="must be an integer"):
        cfg.get_int("flag")  # bools are not integers here
    with pytest.raises(ConfigError, match="must be true or false"):
        cfg.get_bool("n")
    with pytest.raises(ConfigError, match="must be a string"):
        cfg.get_str("n")
    assert cfg.get_float("n") == 3.0  # ints promote to float
    assert cfg.get_int("absent", 7) == 7
