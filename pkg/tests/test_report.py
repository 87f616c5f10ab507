import numpy as np
import pytest

from conduel.errors import DataFormatError
from conduel.harness import RegretTrace
from conduel.report import (
    read_aggregate_csv,
    render_chart,
    write_aggregate_csv,
    write_trace_csv,
)


def toy_trace():
    inst = np.array([[0.5, 0.25, 0.0], [1.0, 0.5, 0.5]])
    return RegretTrace("conduel", "dueling", [(0, 0), (0, 1)], inst, fingerprint="abc")


def test_trace_csv_layout(tmp_path):
    path = tmp_path / "conduel.csv"
    write_trace_csv(path, toy_trace())
    lines = path.read_text().splitlines()
    assert lines[0] == "t,seed,instant_regret,cum_regret"
    assert len(lines) == 1 + 2 * 3
    assert lines[1].startswith("1,0:0,0.5,")
    ts = [int(line.split(",")[0]) for line in lines[1:4]]
    assert ts == [1, 2, 3]


def test_aggregate_round_trip(tmp_path):
    path = tmp_path / "conduel_agg.csv"
    trace = toy_trace()
    write_aggregate_csv(path, trace)
    t, mean, err = read_aggregate_csv(path)
    np.testing.assert_array_equal(t, [1, 2, 3])
    np.testing.assert_allclose(mean, trace.mean_cum)
    np.testing.assert_allclose(err, trace.stderr_cum)


def test_read_aggregate_rejects_malformed(tmp_path):
    with pytest.raises(DataFormatError, match="not found"):
        read_aggregate_csv(tmp_path / "nope.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("wrong,header\n")
    with pytest.raises(DataFormatError, match="not an aggregate"):
        read_aggregate_csv(bad)
    short = tmp_path / "short.csv"
    short.write_text("t,mean_cum,stderr_cum\n1,2\n")
    with pytest.raises(DataFormatError, match="3 columns"):
        read_aggregate_csv(short)
    empty = tmp_path / "empty.csv"
    empty.write_text("t,mean_cum,stderr_cum\n")
    with pytest.raises(DataFormatError, match="no data rows"):
        read_aggregate_csv(empty)


def curve(label, n=20, lift=0.0):
    t = np.arange(1, n + 1)
    mean = np.sqrt(t) + lift
    err = 0.1 * np.ones(n)
    return (label, t, mean, err)


def test_chart_single_curve_structure(tmp_path):
    path = tmp_path / "one.svg"
    render_chart([curve("conduel")], path)
    svg = path.read_text()
    assert svg.count("<polyline") == 1
    assert svg.count("<polygon") == 1
    assert "conduel" in svg
    assert svg.startswith("<svg")


def test_chart_seven_curves(tmp_path):
    labels = [
        "conduel",
        "conduel-random",
        "conduel-maxinp",
        "maxinp",
        "random-opt",
        "rconucb-posneg",
        "rconucb-diff",
    ]
    path = tmp_path / "seven.svg"
    render_chart(
        [curve(lbl, lift=i) for i, lbl in enumerate(labels)],
        path,
        absolute_labels=("rconucb-posneg", "rconucb-diff"),
    )
    svg = path.read_text()
    assert svg.count("<polyline") == 7
    assert svg.count("<polygon") == 7
    # the absolute-regret curves live on their own panel
    assert svg.count("<rect") == 1 + 2  # background plus two panel frames
    for lbl in labels:
        assert lbl in svg


def test_chart_deterministic_bytes(tmp_path):
    p1, p2 = tmp_path / "a.svg", tmp_path / "b.svg"
    curves = [curve("conduel"), curve("maxinp", lift=0.5)]
    render_chart(curves, p1)
    render_chart(curves, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_chart_rejects_mismatched_horizons(tmp_path):
    with pytest.raises(DataFormatError, match="horizon"):
        render_chart([curve("a", n=10), curve("b", n=12)], tmp_path / "x.svg")
    with pytest.raises(DataFormatError, match="nothing"):
        render_chart([], tmp_path / "y.svg")
