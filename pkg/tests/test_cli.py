import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from wassalign.cli import main
from wassalign.dataio import parse_cost, parse_family, read_points_csv

REPORT_KEYS = {"value", "thetaStar", "iCurve", "gapCurve", "psi", "planNnz", "timingsMs"}


def write_cloud(path, points, weights=None, header=None):
    with open(path, "w") as fh:
        if header:
            fh.write(",".join(header) + "\n")
        for i, p in enumerate(points):
            row = list(p) + ([weights[i]] if weights is not None else [])
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


@pytest.fixture
def cloud_pair(tmp_path):
    rng = np.random.default_rng(42)
    pts = rng.normal(size=(10, 2))
    mu = tmp_path / "mu.csv"
    nu = tmp_path / "nu.csv"
    write_cloud(mu, pts)
    write_cloud(nu, pts)
    return mu, nu, pts


def test_align_identical_clouds(tmp_path, cloud_pair):
    mu, nu, pts = cloud_pair
    out = tmp_path / "report.json"
    svg = tmp_path / "aligned.svg"
    curve = tmp_path / "curve.csv"
    rc = main([
        "align", "--mu", str(mu), "--nu", str(nu),
        "--family", "rotations2d:8", "--out", str(out),
        "--svg", str(svg), "--curve", str(curve),
    ])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert set(doc.keys()) == REPORT_KEYS
    assert set(doc["thetaStar"].keys()) == {"index", "label"}
    assert doc["value"] <= 1e-7
    assert doc["thetaStar"]["index"] == 0  # the zero angle reproduces nu
    assert len(doc["iCurve"]) == 8 and len(doc["gapCurve"]) == 8
    assert len(doc["psi"]) == len(pts)
    assert doc["planNnz"] >= len(pts)
    # SVG: well-formed, one marker per support point
    root = ET.parse(svg).getroot()
    circles = [e for e in root.iter() if e.tag.endswith("circle")]
    assert len(circles) == 2 * len(pts)
    rows, _ = read_points_csv(str(curve))
    assert rows.shape == (8, 3)


def test_align_reports_are_deterministic(tmp_path, cloud_pair):
    mu, nu, _ = cloud_pair
    out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
    for out in (out1, out2):
        assert main([
            "align", "--mu", str(mu), "--nu", str(nu),
            "--family", "rotations2d:6", "--out", str(out),
        ]) == 0
    d1, d2 = json.loads(out1.read_text()), json.loads(out2.read_text())
    d1.pop("timingsMs"); d2.pop("timingsMs")
    assert d1 == d2


def test_align_with_weights_and_whiten(tmp_path):
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(9, 2)) @ np.array([[2.0, 0.3], [0.0, 0.5]])
    w = rng.dirichlet(np.ones(9))
    mu = tmp_path / "mu.csv"
    nu = tmp_path / "nu.csv"
    write_cloud(mu, pts, weights=w, header=["x", "y", "weight"])
    write_cloud(nu, pts, weights=w, header=["x", "y", "weight"])
    out = tmp_path / "r.json"
    rc = main([
        "align", "--mu", str(mu), "--nu", str(nu), "--whiten",
        "--family", "rotations2d:4", "--out", str(out),
    ])
    assert rc == 0
    assert json.loads(out.read_text())["value"] <= 1e-7


def test_align_missing_input(tmp_path, capsys):
    rc = main([
        "align", "--mu", str(tmp_path / "absent.csv"), "--nu", str(tmp_path / "absent.csv"),
        "--family", "rotations2d:4", "--out", str(tmp_path / "r.json"),
    ])
    assert rc == 1
    assert "absent.csv" in capsys.readouterr().err


def test_align_bad_family_spec(tmp_path, cloud_pair, capsys):
    mu, nu, _ = cloud_pair
    rc = main([
        "align", "--mu", str(mu), "--nu", str(nu),
        "--family", "spins:9", "--out", str(tmp_path / "r.json"),
    ])
    assert rc == 1
    assert "family" in capsys.readouterr().err


def test_align_matrix_family_with_penalties(tmp_path):
    rng = np.random.default_rng(5)
    pts2 = rng.normal(size=(6, 2))
    pts1 = rng.normal(size=(5, 1))
    mu = tmp_path / "mu.csv"
    nu = tmp_path / "nu.csv"
    write_cloud(mu, pts2)
    write_cloud(nu, pts1)
    fam_csv = tmp_path / "maps.csv"
    with open(fam_csv, "w") as fh:
        fh.write("1.0,0.0,0.25\n")  # project to x, penalty 0.25
        fh.write("0.0,1.0,0.0\n")  # project to y
    out = tmp_path / "r.json"
    rc = main([
        "align", "--mu", str(mu), "--nu", str(nu),
        "--family", f"matrices:{fam_csv}", "--out", str(out),
    ])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert len(doc["iCurve"]) == 2


def test_ot_command(tmp_path, capsys):
    mu = tmp_path / "mu.csv"
    nu = tmp_path / "nu.csv"
    write_cloud(mu, np.array([[0.0]]))
    write_cloud(nu, np.array([[0.0], [1.0]]))
    prefix = tmp_path / "ot"
    rc = main(["ot", "--mu", str(mu), "--nu", str(nu), "--out", str(prefix)])
    assert rc == 0
    assert "value=0.5" in capsys.readouterr().out
    plan, _ = read_points_csv(str(prefix) + ".plan.csv")
    np.testing.assert_allclose(plan, [[0.5, 0.5]], atol=1e-8)
    np.testing.assert_allclose(plan.sum(axis=1), [1.0], atol=1e-8)
    pots, _ = read_points_csv(str(prefix) + ".potentials.csv")
    assert pots.shape == (3, 3)


def test_mixture_demo_command(tmp_path, capsys):
    out = tmp_path / "mix.json"
    curve = tmp_path / "F.csv"
    rc = main([
        "mixture-demo", "--a", "1.0", "0.0", "--samples", "300",
        "--grid", "4", "--seed", "5", "--out", str(out), "--curve", str(curve),
    ])
    assert rc == 0
    assert "coarse" in capsys.readouterr().err  # grid-resolution warning
    doc = json.loads(out.read_text())
    assert set(doc.keys()) == REPORT_KEYS
    data, header = read_points_csv(str(curve))
    assert data.shape == (2001, 5)
    # the zero-separation displacement curve is identically zero
    assert np.max(np.abs(data[:, 1])) <= 1e-9


def test_validate_command_passes():
    assert main(["validate"]) == 0


def test_parse_cost_specs():
    assert parse_cost("sq-euclidean").kind == "sq-euclidean"
    assert parse_cost("power:1.5").p == 1.5
    assert parse_cost("inner:-8").scale == -8.0
    with pytest.raises(ValueError):
        parse_cost("manhattan")


def test_parse_family_igw(tmp_path):
    path = tmp_path / "igw.csv"
    with open(path, "w") as fh:
        fh.write("1.0,0.0\n")  # 2x1 matrix e1
    fam = parse_family(f"igw:{path}", 2, 1)
    assert fam[0].penalty == pytest.approx(8.0)
    assert fam[0].matrix.shape == (1, 2)
