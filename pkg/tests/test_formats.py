import json

import numpy as np
import pytest

from qstkit import formats
from qstkit.design import haar_random_design, qubit_bloch_design, rebit_design, uniform_angles
from qstkit.mub import build_mub


def test_csv_roundtrip_is_exact(tmp_path):
    rows = [[1, 0.1 + 0.2, True, "lse"], [2, 1e-300, False, "x"]]
    p = formats.write_csv(tmp_path / "t.csv", "runs", ["rep", "v", "flag", "name"], rows)
    name, header, back = formats.read_csv(p, "runs")
    assert name == "runs" and header == ["rep", "v", "flag", "name"]
    assert float(back[0]["v"]) == 0.1 + 0.2 and back[1]["flag"] == "0"


def test_csv_rejects_unknown_version(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("#schema,runs,2\na\n1\n")
    with pytest.raises(formats.SchemaError):
        formats.read_csv(p)
    p.write_text("a,b\n1,2\n")
    with pytest.raises(formats.SchemaError):
        formats.read_csv(p)
    formats.write_csv(p, "aggregate", ["a"], [[1]])
    with pytest.raises(formats.SchemaError):
        formats.read_csv(p, "runs")


@pytest.mark.parametrize("make", [
    lambda: build_mub(2).to_design(),
    lambda: rebit_design(uniform_angles(5)),
    lambda: haar_random_design(3, "complex", 4, 1, np.diag([0.0, 1.0, 2.0])),
])
def test_design_json_roundtrip(make, tmp_path):
    d = make()
    path = formats.save_json(tmp_path / "d.json", formats.design_to_json(d))
    back = formats.design_from_json(json.loads(path.read_text()))
    assert back.n == d.n and back.field == d.field
    assert np.allclose(back.gram.matrix, d.gram.matrix, atol=1e-12)


def test_interleaved_layout():
    M = np.array([[1, 2 - 3j], [2 + 3j, 4]])
    flat = formats.flatten_matrix(M, "complex")
    assert flat == [1, 0, 2, -3, 2, 3, 4, 0]
    assert np.array_equal(formats.unflatten_matrix(flat, 2, "complex"), M)


def test_design_schema_checked():
    with pytest.raises(formats.SchemaError):
        formats.design_from_json({"schema": "qstkit.design/9"})


def test_counts_roundtrip(tmp_path, rng):
    d = qubit_bloch_design(np.eye(3))
    c = d.sample(np.eye(2) / 2, 25, rng)
    formats.write_counts(tmp_path / "c.csv", d, c)
    back = formats.read_counts(tmp_path / "c.csv", d)
    assert back.shots == 25 and np.array_equal(back.flat(), c.flat())
    e = d.exact_counts(np.diag([1.0, 0.0]))
    formats.write_counts(tmp_path / "e.csv", d, e)
    assert formats.read_counts(tmp_path / "e.csv", d).exact
    with pytest.raises(formats.ShapeError):
        formats.read_counts(tmp_path / "c.csv", build_mub(2).to_design())


def test_estimate_document():
    doc = formats.estimate_to_json("lse", np.eye(2) / 2, "complex", loss=np.float64(0.5), alpha=None)
    assert doc["schema"] == "qstkit.estimate/1" and doc["trace"] == 1.0 and doc["loss"] == 0.5
    json.dumps(doc)
