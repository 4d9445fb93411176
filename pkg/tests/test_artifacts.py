import json

import numpy as np
import pandas as pd
import pytest

from src.core.exceptions import ArtifactError
from src.services.artifacts import read_csv, read_json, to_json_text, write_csv, write_json


def test_csv_provenance_header(tmp_path):
    frame = pd.DataFrame({"beta_fs2": [-1.5, 1.5], "pl_cps": [50.5, 60.25]})
    path = write_csv(frame, tmp_path / "nested" / "trace.csv", {"command": "trace", "seed": 7,
                                                                "betas": np.array([1.0, 2.0])})
    lines = path.read_text().splitlines()
    assert lines[0] == '# command: "trace"'
    assert lines[1] == "# seed: 7"
    assert lines[3] == "beta_fs2,pl_cps"

    loaded, provenance = read_csv(path)
    assert provenance == {"command": "trace", "seed": 7, "betas": [1.0, 2.0]}
    pd.testing.assert_frame_equal(loaded, frame)


def test_write_leaves_no_temporary_files(tmp_path):
    write_csv(pd.DataFrame({"a": [1]}), tmp_path / "a.csv")
    write_json({"a": 1}, tmp_path / "a.json")
    assert sorted(p.name for p in tmp_path.iterdir()) == ["a.csv", "a.json"]


def test_json_handles_numpy(tmp_path):
    path = write_json({"w": np.arange(3.0), "n": np.int64(4), "nan": float("nan")}, tmp_path / "m.json")
    payload = read_json(path)
    assert payload["w"] == [0.0, 1.0, 2.0]
    assert payload["n"] == 4
    assert payload["nan"] is None


def test_non_finite_values_are_written_as_null(tmp_path):
    payload = {"x": float("nan"), "rows": [[1.0, float("inf")]], "v": np.array([np.nan, 2.0]),
               "g": np.float64("-inf")}
    text = to_json_text(payload)
    assert "NaN" not in text and "Infinity" not in text
    assert json.loads(text) == {"x": None, "rows": [[1.0, None]], "v": [None, 2.0], "g": None}

    path = write_csv(pd.DataFrame({"a": [1]}), tmp_path / "p.csv", {"best": float("nan")})
    assert path.read_text().splitlines()[0] == "# best: null"
    assert read_csv(path)[1] == {"best": None}


def test_missing_artifacts(tmp_path):
    with pytest.raises(ArtifactError, match="not found"):
        read_csv(tmp_path / "nope.csv")
    with pytest.raises(ArtifactError, match="not found"):
        read_json(tmp_path / "nope.json")


def test_malformed_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ArtifactError):
        read_json(path)
