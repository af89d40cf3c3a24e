import math

from meeql.inference import SweepCell
from meeql.plots import inference_figure, mse_figure

ROWS = {
    0.51: {"oat": 2e-5, "es": 4e-5, "meanfield": 3e-2, "oat_single": 1e-4},
    1.01: {"oat": 1e-5, "es": 6e-5, "meanfield": 4e-2, "oat_single": 2e-4},
    2.01: {"oat": 3e-5, "es": 9e-5, "meanfield": 5e-2, "oat_single": 8e-4},
}

CELLS = [
    SweepCell(0.01, "meanfield", 0.081, 0.01, 10),
    SweepCell(0.01, "oat", 0.52, 0.2, 10),
    SweepCell(2.51, "meanfield", 0.31, 0.05, 10),
    SweepCell(2.51, "oat", 0.142, 0.04, 10),
]


def test_mse_figure_bytes_are_deterministic(tmp_path):
    a = tmp_path / "a.svg"
    b = tmp_path / "b.svg"
    assert mse_figure(ROWS, [0.51, 1.01], a, provenance="hash=abc") == []
    mse_figure(ROWS, [0.51, 1.01], b, provenance="hash=abc")
    data = a.read_bytes()
    assert data == b.read_bytes()
    assert len(data) > 1000
    assert b"hash=abc" in data


def test_mse_figure_reports_gapped_models(tmp_path):
    rows = {rp: dict(vals) for rp, vals in ROWS.items()}
    rows[2.01]["es"] = math.inf
    rows[1.01]["oat_single"] = None
    gapped = mse_figure(rows, [0.51], tmp_path / "g.svg")
    assert sorted(gapped) == ["es", "oat_single"]


def test_mse_figure_skips_absent_models(tmp_path):
    rows = {rp: {"meanfield": vals["meanfield"]} for rp, vals in ROWS.items()}
    assert mse_figure(rows, [], tmp_path / "m.svg") == []


def test_inference_figure_deterministic(tmp_path):
    a = tmp_path / "a.svg"
    b = tmp_path / "b.svg"
    inference_figure(CELLS, a, provenance="hash=xyz")
    inference_figure(CELLS, b, provenance="hash=xyz")
    assert a.read_bytes() == b.read_bytes()
    assert b"hash=xyz" in a.read_bytes()


def test_svg_has_no_embedded_date(tmp_path):
    path = tmp_path / "nodate.svg"
    inference_figure(CELLS, path)
    text = path.read_text()
    assert "dc:date" not in text
