import csv
import json
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from flyby_guidance.cli import main


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def assert_svg(path):
    root = ET.parse(path).getroot()
    assert root.tag.endswith("svg")
    assert root.findall(".//{*}polyline") or root.findall(".//{*}circle")


@pytest.fixture(scope="module")
def campaign_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("campaign")
    assert main(["campaign", "--samples", "2", "--seed", "3", "--out", str(out)]) == 0
    return out


def test_solve_writes_outputs(tmp_path):
    out = tmp_path / "solve"
    assert main(["solve", "--scenario", "comet-interceptor", "--out", str(out)]) == 0
    rows = read_rows(out / "trajectory.csv")
    header = rows[0]
    assert header[:8] == ["t", "q1", "q2", "q3", "q4", "wx", "wy", "wz"]
    for col in ("h4", "tau4", "tau_x", "h_z", "comet_angle_deg", "gamma", "zeta"):
        assert col in header
    assert len(rows) == 41
    angles = np.array([float(r[header.index("comet_angle_deg")]) for r in rows[1:]])
    assert angles.max() < 0.46
    summary = json.loads((out / "solve_summary.json").read_text())
    assert summary["termination"] == "converged"
    assert summary["visual_outage_s"] == 0.0 and summary["infrared_outage_s"] == 0.0
    assert len(read_rows(out / "iterations.csv")) > 1
    for name in ("angle", "torque", "momentum", "angle_iterations"):
        assert_svg(out / f"{name}.svg")


def test_solve_faulty_near_saturation(tmp_path):
    out = tmp_path / "fault"
    code = main(["solve", "--fault", "4", "--h0", "near-saturation", "--out", str(out)])
    assert code in (0, 2)
    summary = json.loads((out / "solve_summary.json").read_text())
    assert summary["fault"] == 4
    assert np.isfinite(summary["visual_outage_s"]) and np.isfinite(summary["infrared_outage_s"])
    assert (out / "trajectory.csv").is_file()
    assert "h4" not in read_rows(out / "trajectory.csv")[0]


def test_missing_scenario_writes_nothing(tmp_path):
    out = tmp_path / "none"
    assert main(["solve", "--scenario", str(tmp_path / "nope.json"), "--out", str(out)]) == 1
    assert not out.exists()


@pytest.mark.parametrize("h0", ["1,2", "a,b,c,d", "3.1,0,0,0"])
def test_bad_h0_is_rejected(tmp_path, h0):
    out = tmp_path / "bad"
    assert main(["solve", "--h0", h0, "--out", str(out)]) == 1
    assert not out.exists()


def test_zero_samples_is_a_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["campaign", "--samples", "0", "--out", str(tmp_path / "c")])
    assert exc.value.code == 1
    assert "usage:" in capsys.readouterr().err
    assert not (tmp_path / "c").exists()


def test_campaign_outputs(campaign_dir):
    rows = read_rows(campaign_dir / "runs.csv")
    assert len(rows) == 3
    summary = json.loads((campaign_dir / "summary.json").read_text())
    assert summary["config"]["sample_count"] == 2 and summary["config"]["seed"] == 3
    assert summary["csv_columns"] == rows[0]
    assert "zero_outage_fraction" in summary["aggregates"]
    # timing columns stay empty unless requested, keeping the file reproducible
    assert rows[1][-3:] == ["nan", "nan", "nan"]
    for name in ("outage_vs_h0", "outage_cdf", "iterations", "hbody_scatter"):
        assert_svg(campaign_dir / f"{name}.svg")


def test_report_reproduces_aggregates(campaign_dir, tmp_path):
    out = tmp_path / "report"
    assert main(["report", "--in", str(campaign_dir), "--out", str(out)]) == 0
    assert (out / "aggregates.json").read_bytes() == (campaign_dir / "aggregates.json").read_bytes()
    assert_svg(out / "outage_cdf.svg")


def test_report_rejects_truncated_csv(campaign_dir, tmp_path, capsys):
    broken = tmp_path / "broken"
    broken.mkdir()
    (broken / "summary.json").write_bytes((campaign_dir / "summary.json").read_bytes())
    text = (campaign_dir / "runs.csv").read_text()
    (broken / "runs.csv").write_text(text[:len(text) // 2])
    assert main(["report", "--in", str(broken)]) == 1
    assert "runs.csv" in capsys.readouterr().err


def test_report_rejects_missing_row(campaign_dir, tmp_path):
    broken = tmp_path / "short"
    broken.mkdir()
    (broken / "summary.json").write_bytes((campaign_dir / "summary.json").read_bytes())
    lines = (campaign_dir / "runs.csv").read_text().splitlines(keepends=True)
    (broken / "runs.csv").write_text("".join(lines[:-1]))
    assert main(["report", "--in", str(broken)]) == 1


def test_report_on_empty_dir(tmp_path):
    assert main(["report", "--in", str(tmp_path)]) == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "flyby_guidance", "--help"], capture_output=True,
                         text=True)
    assert res.returncode == 0
    assert "campaign" in res.stdout
