import json
import re

import pytest

from featpress.errors import DataError
from featpress.experiment import PipelineConfig, core_sweep_configs, operating_region, run_config, sweep
from featpress.forest import ForestParams
from featpress.report import REPORT_COLUMNS, render_svg, report_rows, write_report

HEADER = (
    "selection_k,pca_target,bits,f1,lossy_bytes,baseline_csv_bytes,"
    "reduction_vs_csv,reduction_vs_f32,bits_per_second,wall_time_seconds"
)


@pytest.fixture(scope="module")
def small_sweep(reference_split):
    train, test = reference_split
    cfgs = core_sweep_configs(forest=ForestParams(n_trees=10, seed=4), seed=4)
    return sweep(train, test, cfgs)


def test_header_golden():
    assert ",".join(REPORT_COLUMNS) == HEADER


def test_single_point(reference_split):
    train, test = reference_split
    p = run_config(train, test, PipelineConfig(bits=8, forest=ForestParams(n_trees=3)))
    lines = report_rows([p])
    assert len(lines) == 2 and lines[0] == HEADER
    cells = lines[1].split(",")
    assert len(cells) == 10
    assert cells[0] == "" and cells[1] == "" and cells[2] == "8"
    assert float(cells[3]) == p.f1
    assert int(cells[4]) == p.storage.lossy_bytes
    assert float(cells[6]) == p.storage.reduction_vs_csv
    assert float(cells[9]) >= 0
    assert report_rows([p], include_timing=False)[1].endswith(",")


def test_write_report(tmp_path, small_sweep):
    region = operating_region(small_sweep, 0.02)
    paths = write_report(small_sweep, region, tmp_path / "out", include_timing=False)
    assert [p.name for p in paths] == ["report.csv", "summary.json", "report.svg"]
    text = (tmp_path / "out" / "report.csv").read_text()
    assert text.splitlines() == report_rows(small_sweep, include_timing=False)
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert len(summary["points"]) == 18
    assert summary["region"]["members"] == [p.config.label() for p in region.members]
    svg = (tmp_path / "out" / "report.svg").read_text()
    assert len(re.findall(r'<circle class="point"', svg)) == 18
    assert len(re.findall(r'<rect class="region"', svg)) == 1
    assert svg.count("<polyline") == 3


def test_svg_without_region(small_sweep):
    svg = render_svg(small_sweep[:6], None)
    assert 'class="region"' not in svg
    assert svg.count('class="point"') == 6


def test_empty_report(tmp_path):
    with pytest.raises(DataError):
        write_report([], None, tmp_path)
