"""Tests for configuration loading and the output helpers in qmunu.utils."""

import json
import math
import os
from fractions import Fraction

import numpy as np
import pytest

from qmunu.utils import (
    ConfigurationError,
    RngStream,
    RunConfig,
    apply_overrides,
    load_config,
    parse_int_list,
    parse_number,
    parse_number_list,
    read_csv_rows,
    to_jsonable,
    write_csv_file,
    write_json_file,
)
from qmunu.utils.plotting import plot_pmf_comparison, plot_series


def write_config(path, **changes):
    config = load_config()
    config.update(changes)
    path.write_text(json.dumps(config), encoding="utf-8")
    return path


class TestLoadConfig:
    def test_default_file(self):
        config = load_config()
        assert 0 <= config["nu"] <= config["mu"] < 1
        assert config["output_format"] in ("csv", "json")

    def test_max_workers_defaults_to_cpu_count(self, tmp_path):
        assert load_config()["max_workers"] == (os.cpu_count() or 1)
        config = load_config(write_config(tmp_path / "config.json", max_workers=None))
        assert config["max_workers"] == (os.cpu_count() or 1)

    def test_explicit_max_workers(self, tmp_path):
        assert load_config(write_config(tmp_path / "config.json", max_workers=3))["max_workers"] == 3

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="not found"):
            load_config(tmp_path / "absent.json")

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigurationError, match="Invalid JSON"):
            load_config(path)

    def test_extra_key(self, tmp_path):
        with pytest.raises(ConfigurationError, match="schema"):
            load_config(write_config(tmp_path / "config.json", unknown=1))

    @pytest.mark.parametrize(
        "changes",
        [
            {"nu": 0.6},
            {"q": 1.0},
            {"tol": 0},
            {"replicas": 1},
            {"contour_nodes": 63},
            {"nystrom_nodes": 1024},
            {"nystrom_nodes": 512},
            {"output_format": "xml"},
            {"max_workers": 0},
        ],
    )
    def test_invalid_values(self, tmp_path, changes):
        with pytest.raises(ConfigurationError):
            load_config(write_config(tmp_path / "config.json", **changes))


class TestOverrides:
    def test_none_ignored(self):
        config = load_config()
        merged = apply_overrides(config, {"q": None, "seed": 7})
        assert merged["q"] == config["q"]
        assert merged["seed"] == 7

    def test_invalid_override(self):
        with pytest.raises(ConfigurationError):
            apply_overrides(load_config(), {"mu": 0.05, "nu": 0.1})

    def test_config_hash(self):
        first = RunConfig("exact", {"q": 0.5})
        assert first.config_hash() == RunConfig("exact", {"q": 0.5}).config_hash()
        assert first.config_hash() != RunConfig("exact", {"q": 0.25}).config_hash()


class TestFileOps:
    def test_to_jsonable(self):
        value = {
            "fraction": Fraction(3, 8),
            "complex": 1 - 2j,
            "inf": math.inf,
            "array": np.array([1.5, 2.5]),
            "scalar": np.float64(0.25),
            1: (1, 2),
        }
        assert to_jsonable(value) == {
            "fraction": "3/8",
            "complex": {"re": 1.0, "im": -2.0},
            "inf": "inf",
            "array": [1.5, 2.5],
            "scalar": 0.25,
            "1": [1, 2],
        }

    def test_write_json(self, tmp_path):
        path = write_json_file(str(tmp_path / "nested"), "report", {"b": Fraction(1, 2), "a": 1})
        assert path.name == "report.json"
        text = path.read_text(encoding="utf-8")
        assert json.loads(text) == {"a": 1, "b": "1/2"}
        assert text.index('"a"') < text.index('"b"')

    def test_write_csv(self, tmp_path):
        path = write_csv_file(str(tmp_path), "table", ["s", "p"], [[0, Fraction(1, 3)], [1, 0.1]], "abc")
        assert path.read_text(encoding="utf-8").splitlines()[0] == "# config_hash=abc"
        assert read_csv_rows(path) == [["s", "p"], ["0", "1/3"], ["1", "0.1"]]


class TestTextUtils:
    def test_int_list(self):
        assert parse_int_list("3, 2,1") == [3, 2, 1]
        assert parse_int_list(None) is None

    def test_number(self):
        assert parse_number("1/4") == 0.25
        assert parse_number("0.1", exact=True) == Fraction(1, 10)
        assert parse_number_list("1/2,1/3", exact=True) == [Fraction(1, 2), Fraction(1, 3)]

    def test_bad_number(self):
        with pytest.raises(ValueError):
            parse_number("half")


class TestRngStream:
    def test_replay(self):
        assert np.array_equal(RngStream(5, 3).uniform(10), RngStream(5, 3).uniform(10))

    def test_distinct_streams(self):
        assert not np.array_equal(RngStream(5, 3).uniform(10), RngStream(5, 4).uniform(10))
        assert not np.array_equal(RngStream(5, 3).uniform(10), RngStream(6, 3).uniform(10))


class TestPlotting:
    def test_series_deterministic(self, tmp_path):
        kwargs = dict(x=[1, 2, 3], series={"a": [1e-3, 1e-5, 1e-7]}, xlabel="n", ylabel="r", logy=True)
        first = plot_series(str(tmp_path), "first", **kwargs)
        second = plot_series(str(tmp_path), "second", **kwargs)
        assert first.suffix == ".svg"
        assert first.read_bytes() == second.read_bytes()

    def test_pmf_comparison(self, tmp_path):
        path = plot_pmf_comparison(str(tmp_path / "figures"), "pmf", [0.5, 0.3, 0.2], [0.5, 0.25, 0.25])
        assert path.exists()
