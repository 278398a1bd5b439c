"""Config file parsing, layered precedence, and type coercion."""

import pytest

from temporalex import ConfigError, RunConfig, load_run_config
from temporalex.config import parse_config_file


def config_file(tmp_path, text):
    path = tmp_path / "run.conf"
    path.write_text(text, encoding="utf-8")
    return str(path)


# --- file syntax -------------------------------------------------------------

def test_parse_skips_comments_and_blanks(tmp_path):
    path = config_file(tmp_path, """
# run settings
workers = 2   # inline comment

output_dir = out
""")
    assert parse_config_file(path) == {"workers": "2", "output_dir": "out"}


def test_parse_rejects_lines_without_equals(tmp_path):
    path = config_file(tmp_path, "workers 2\n")
    with pytest.raises(ConfigError, match="line 1: expected 'key = value'"):
        parse_config_file(path)


def test_values_may_contain_equals(tmp_path):
    path = config_file(tmp_path, "search_endpoint = https://s.example/q?mode=x\n")
    assert parse_config_file(path)["search_endpoint"] == "https://s.example/q?mode=x"


# --- precedence --------------------------------------------------------------------

def test_defaults_apply_without_any_source():
    config = load_run_config(environ={})
    assert config.workers == 4
    assert config.tool_mode == "fixture"
    assert config.retrieval.top_k == 10
    assert config.limits.max_turns == 15
    assert config.shaping.alpha == 0.1


def test_file_beats_defaults(tmp_path):
    config = load_run_config(config_file(tmp_path, "workers = 2\n"), environ={})
    assert config.workers == 2


def test_environment_beats_the_file(tmp_path):
    path = config_file(tmp_path, "workers = 2\n")
    config = load_run_config(path, environ={"TEMPORALEX_WORKERS": "3"})
    assert config.workers == 3


def test_overrides_beat_everything(tmp_path):
    path = config_file(tmp_path, "workers = 2\n")
    config = load_run_config(path, overrides={"workers": 5},
                             environ={"TEMPORALEX_WORKERS": "3"})
    assert config.workers == 5


def test_none_overrides_are_skipped():
    config = load_run_config(overrides={"workers": None}, environ={})
    assert config.workers == 4


def test_config_path_can_come_from_the_environment(tmp_path):
    path = config_file(tmp_path, "output_dir = elsewhere\n")
    config = load_run_config(environ={"TEMPORALEX_CONFIG": path})
    assert config.output_dir == "elsewhere"


def test_missing_config_file_is_an_error():
    with pytest.raises(ConfigError, match="config file not found"):
        load_run_config("/nonexistent/run.conf", environ={})


# --- nested tables -------------------------------------------------------------------

def test_keys_route_to_the_owning_dataclass(tmp_path):
    path = config_file(tmp_path, "top_k = 3\nmax_turns = 7\nalpha = 0.25\n")
    config = load_run_config(path, environ={})
    assert config.retrieval.top_k == 3
    assert config.limits.max_turns == 7
    assert config.shaping.alpha == 0.25


def test_environment_reaches_nested_keys():
    config = load_run_config(environ={"TEMPORALEX_TOP_K": "2",
                                      "TEMPORALEX_TEMPORAL_FILTERING": "off"})
    assert config.retrieval.top_k == 2
    assert config.retrieval.temporal_filtering is False


# --- coercion and validation ----------------------------------------------------------

def test_int_coercion_failure_names_the_key(tmp_path):
    path = config_file(tmp_path, "workers = soon\n")
    with pytest.raises(ConfigError, match="config key 'workers'"):
        load_run_config(path, environ={})


@pytest.mark.parametrize("raw,expected", [
    ("1", True), ("true", True), ("YES", True), ("on", True),
    ("0", False), ("false", False), ("No", False), ("off", False),
])
def test_bool_spellings(tmp_path, raw, expected):
    path = config_file(tmp_path, f"temporal_filtering = {raw}\n")
    config = load_run_config(path, environ={})
    assert config.retrieval.temporal_filtering is expected


def test_unrecognized_bool_is_an_error(tmp_path):
    path = config_file(tmp_path, "temporal_filtering = maybe\n")
    with pytest.raises(ConfigError, match="not a boolean: 'maybe'"):
        load_run_config(path, environ={})


def test_float_keys_coerce(tmp_path):
    path = config_file(tmp_path, "rrf_k = 30.5\n")
    assert load_run_config(path, environ={}).retrieval.rrf_k == 30.5


def test_unknown_file_key_is_an_error(tmp_path):
    path = config_file(tmp_path, "warp_speed = 9\n")
    with pytest.raises(ConfigError, match="unknown config key 'warp_speed'"):
        load_run_config(path, environ={})


def test_unknown_override_key_is_an_error():
    with pytest.raises(ConfigError, match="unknown config key 'warp_speed'"):
        load_run_config(overrides={"warp_speed": 9}, environ={})


def test_unrelated_environment_keys_are_ignored():
    config = load_run_config(environ={"TEMPORALEX_FAVORITE_COLOR": "green",
                                      "PATH": "/bin"})
    assert config.workers == 4


def test_invalid_merged_values_surface_as_config_errors(tmp_path):
    path = config_file(tmp_path, "max_turns = 0\n")
    with pytest.raises(ConfigError, match="max_turns must be at least 1"):
        load_run_config(path, environ={})


# --- RunConfig itself ------------------------------------------------------------------

def test_run_config_validates_mode_and_workers():
    with pytest.raises(ConfigError, match="tool_mode must be 'fixture' or 'live'"):
        RunConfig(tool_mode="psychic")
    with pytest.raises(ConfigError, match="workers must be at least 1"):
        RunConfig(workers=0)


def test_live_mode_requires_the_search_key(monkeypatch):
    config = RunConfig(tool_mode="live")
    monkeypatch.delenv("SEARCH_API_KEY", raising=False)
    with pytest.raises(ConfigError, match="requires SEARCH_API_KEY"):
        config.require_live_key()
    monkeypatch.setenv("SEARCH_API_KEY", "k")
    config.require_live_key()
    RunConfig(tool_mode="fixture").require_live_key()  # never needs the key
