"""Tests for result writers and experiment manifests."""

import json

import numpy as np
import pandas as pd
import pytest

from vhetnet import ExperimentManifest, write_csv, write_json, write_pgm
from vhetnet.outputs import load_schema, read_pgm, schema_violations

HASH = "a" * 64


class TestWriters:
    """Tests for CSV, JSON and PGM output."""

    def test_csv(self, tmp_path):
        """Test header, separators and nested directory creation."""
        path = write_csv(pd.DataFrame({"h": [30.0, 60.0], "p_abs": [0.5, 0.25]}), tmp_path / "a" / "assoc.csv")
        assert path.read_text(encoding="utf-8") == "h,p_abs\n30,0.5\n60,0.25\n"

    def test_json_numpy_and_infinity(self, tmp_path):
        """Test numpy values and non-finite floats."""
        path = write_json({"sir": float("inf"), "n": np.int64(3), "xs": np.array([1.5])}, tmp_path / "r.json")
        assert json.loads(path.read_text()) == {"n": 3, "sir": "inf", "xs": [1.5]}

    def test_json_unserializable(self, tmp_path):
        """Test that unknown objects are rejected."""
        with pytest.raises(TypeError, match="not JSON serializable"):
            write_json({"x": object()}, tmp_path / "bad.json")

    def test_pgm(self, tmp_path):
        """Test pixel values, row order and the extents sidecar."""
        values = np.array([[0.0, 0.5], [1.0, 2.0]])
        path, sidecar = write_pgm(values, tmp_path / "map.pgm", (0.0, 10.0, 0.0, 20.0))
        pixels = read_pgm(path)
        np.testing.assert_array_equal(pixels, [[255, 255], [0, 128]])
        meta = json.loads(sidecar.read_text())
        assert sidecar.name == "map.pgm.json"
        assert (meta["nx"], meta["ny"], meta["ymax"]) == (2, 2, 20.0)

    def test_pgm_invalid(self, tmp_path):
        """Test shape and range checks."""
        with pytest.raises(ValueError, match="2-D"):
            write_pgm(np.zeros(4), tmp_path / "x.pgm", (0, 1, 0, 1))
        with pytest.raises(ValueError, match="vmax"):
            write_pgm(np.zeros((2, 2)), tmp_path / "x.pgm", (0, 1, 0, 1), vmin=1.0, vmax=1.0)


class TestSchemas:
    """Tests for schema checks."""

    def test_missing_and_extra(self):
        """Test required keys and additional properties."""
        schema = {"required": ["a"], "properties": {"a": {"type": "number"}}, "additionalProperties": False}
        assert schema_violations({"b": 1}, schema) == ["missing 'a'", "unexpected 'b'"]

    def test_types(self):
        """Test that booleans are not numbers."""
        schema = {"properties": {"a": {"type": "number"}}}
        assert schema_violations({"a": True}, schema) == ["'a' must be number"]
        assert schema_violations({"a": 3}, schema) == []

    def test_shipped_schemas(self):
        """Test that both schemas load."""
        assert "subcommand" in load_schema("manifest")["required"]
        assert "env" in load_schema("config")["properties"]


class TestExperimentManifest:
    """Tests for ExperimentManifest."""

    def test_write(self, tmp_path):
        """Test writing a valid manifest."""
        manifest = ExperimentManifest("simulate", HASH, 7, "0.1.0", parameters={"policy": "comp3-same-tier"})
        manifest.add_output(tmp_path / "simulate.json")
        path = manifest.write(tmp_path)
        data = json.loads(path.read_text())
        assert path.name == "simulate.manifest.json"
        assert data["outputs"] == ["simulate.json"]
        assert data["seed"] == 7

    def test_invalid(self, tmp_path):
        """Test that a wrongly typed field blocks the write."""
        manifest = ExperimentManifest("simulate", HASH, 7, "0.1.0")
        manifest.seed = "seven"
        assert manifest.validate() == ["'seed' must be integer"]
        with pytest.raises(ValueError, match="Invalid manifest"):
            manifest.write(tmp_path)
