import orjson
import pandas as pd
import pytest
from hypothesis import given

from model.schemas import ExperimentReport, StatisticRecord
from model.trees import LabeledTree
from services.cvs_service import cvs_service
from services.errors import FormatError
from services.format_service import format_service
from services.metric_service import metric_service
from strategies import labeled_trees


# ==========================================
# 트리 텍스트
# ==========================================
def test_tree_text_example():
    tree = LabeledTree.from_arrays([-1, 0, 1, 0], [0, 1, 1, -1])
    assert format_service.tree_to_text(tree) == "tree 0 3 (+(0)-)"
    assert format_service.tree_from_text("tree 0 3 (+(0)-)") == tree


def test_single_vertex_text():
    assert format_service.tree_to_text(LabeledTree.single(-4)) == "tree -4 0 ()"
    assert format_service.tree_from_text("tree -4 0 ()") == LabeledTree.single(-4)


@given(labeled_trees(max_edges=20, root_label=3))
def test_tree_text_round_trip(tree):
    assert format_service.tree_from_text(format_service.tree_to_text(tree)) == tree


@pytest.mark.parametrize(
    "text",
    [
        "branch 0 1 (+)",
        "tree x 1 (+)",
        "tree 0 1 +",
        "tree 0 1 (+",
        "tree 0 2 (+)",
        "tree 0 1 (*)",
        "tree 0 1 (+))",
        "tree 0 1 ((+))",
    ],
)
def test_tree_text_errors(text):
    with pytest.raises(FormatError) as info:
        format_service.tree_from_text(text, line_no=7)
    assert info.value.line == 7


def test_read_trees_skips_comments_and_reports_line():
    lines = ["# header", "tree 0 1 (+)", "", "tree 0 1 (?)"]
    reader = format_service.read_trees(lines)
    assert next(reader).edge_count == 1
    with pytest.raises(FormatError) as info:
        next(reader)
    assert info.value.line == 4


# ==========================================
# 맵 텍스트
# ==========================================
def test_map_text_round_trip(trees_3_edges):
    for tree in trees_3_edges[:40]:
        quad = cvs_service.cvs_finite(tree).quad
        parsed, center, radius = format_service.map_from_text(format_service.map_to_text(quad))
        assert center is None and radius is None
        assert parsed.tails == quad.tails
        assert parsed.rotation == quad.rotation
        assert parsed.labels == quad.labels
        assert parsed.root == quad.root and parsed.marked == quad.marked
        assert metric_service.maps_equal(parsed, quad)


def test_ball_text_carries_center_and_radius(trees_3_edges):
    quad = cvs_service.cvs_finite(trees_3_edges[10]).quad
    text = format_service.ball_to_text(metric_service.ball(quad, 0, 1))
    _, center, radius = format_service.map_from_text(text)
    assert (center, radius) == (0, 1)


@pytest.mark.parametrize(
    "text",
    [
        "",
        "graph 2 1",
        "quad 2 1 root 0 1\n0 5\nlabels: 0:0 1:-1\nrotation: 0:0 1:1\n",
        "quad 2 1 root 1 0 dart 0\n0 1\nlabels: 0:0 1:-1\nrotation: 0:0 1:1\n",
        "quad 2 1 root 0 1\n0 1\nlabels: 0:0 1:-1\nrotation: 0:0 1:\n",
        "quad 2 1 colour 3\n0 1\n",
        "quad 2 2 root 0 1\n0 1\n",
        "quad 2 1 root 0 1\n0 1\nweights: 0:1\n",
    ],
)
def test_map_text_errors(text):
    with pytest.raises(FormatError):
        format_service.map_from_text(text)


def test_incomplete_vertices_survive_text():
    text = "quad 2 1 root 0 1\n0 1\nlabels: 0:0 1:?\nrotation: 0:0 1:1\nincomplete: 1\n"
    quad, _, _ = format_service.map_from_text(text)
    assert quad.labels == (0, None)
    assert quad.is_complete(0) and not quad.is_complete(1)
    assert format_service.map_to_text(quad) == text


# ==========================================
# CSV / JSON
# ==========================================
def test_contour_frame_rows():
    tree = LabeledTree.from_arrays([-1, 0, 1, 0], [0, 1, 1, -1])
    frame = format_service.contour_frame(tree)
    assert list(frame.columns) == ["contour", "label"]
    assert len(frame) == 7
    assert frame["label"].tolist() == [0, 1, 1, 1, 0, -1, 0]


def test_histogram_csv_has_one_row_per_bin(tmp_path):
    path = format_service.write_histogram_csv([0.1, 0.2, 0.25, 0.9], 5, tmp_path / "h.csv")
    frame = pd.read_csv(path)
    assert len(frame) == 5
    assert frame["count"].sum() == 4


def _report(**kw):
    return ExperimentReport(
        experiment_id="verify:green",
        run_id="r-1",
        master_seed=42,
        statistics=[StatisticRecord(name="G(1,2)", value=0.3, reference=0.3, provenance="reference",
                                    tolerance=1e-9, passed=True)],
        **kw,
    )


def test_report_json_carries_verdict_and_fingerprint():
    report = _report(parameters={"k_max": 10})
    payload = orjson.loads(format_service.report_to_json(report))
    assert payload["passed"] is True
    assert payload["fingerprint"] == report.fingerprint()
    back = format_service.report_from_json(format_service.report_to_json(report))
    assert back == report


def test_fingerprint_ignores_run_id_and_wall_clock():
    a = _report(wall_clock_seconds=1.0)
    b = _report(wall_clock_seconds=9.0).model_copy(update={"run_id": "r-2"})
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != _report(parameters={"k_max": 11}).fingerprint()


def test_invalid_report_json():
    with pytest.raises(FormatError):
        format_service.report_from_json(b"{not json")


def test_report_schema_lists_required_fields():
    schema = orjson.loads(format_service.report_schema())
    assert {"experiment_id", "run_id", "master_seed"} <= set(schema["required"])
    assert "StatisticRecord" in schema["$defs"]
