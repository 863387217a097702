import orjson
import pytest
from typer.testing import CliRunner

from logging_config import setup_logging
from main import app
from routers.export_router import split_maps
from services.format_service import format_service

runner = CliRunner()


@pytest.fixture(autouse=True)
def restore_logging():
    yield
    # CliRunner 가 닫은 stderr 를 잡고 있는 핸들러 교체
    setup_logging("WARNING")


def invoke(*args, **kw):
    return runner.invoke(app, ["--log-level", "WARNING", *args], **kw)


# ==========================================
# sample
# ==========================================
def test_sample_is_deterministic_for_a_seed():
    a = invoke("--seed", "3", "sample", "rho", "--count", "3", "--budget-edges", "50000")
    b = invoke("--seed", "3", "sample", "rho", "--count", "3", "--budget-edges", "50000")
    assert a.exit_code == 0, a.stderr
    assert a.stdout == b.stdout
    lines = a.stdout.splitlines()
    assert len(lines) == 3
    assert all(line.startswith("tree 0 ") for line in lines)
    assert "count=3" in a.stderr


def test_sample_command_seed_overrides_global_seed():
    a = invoke("--seed", "3", "sample", "rho", "--seed", "8", "--budget-edges", "50000")
    b = invoke("--seed", "8", "sample", "rho", "--budget-edges", "50000")
    assert a.stdout == b.stdout


def test_sample_edge_list_parses_back():
    result = invoke("--format", "edge_list", "sample", "rho", "--x", "2", "--count", "2",
                    "--seed", "1", "--budget-edges", "50000")
    assert result.exit_code == 0, result.stderr
    blocks = split_maps(result.stdout)
    assert len(blocks) == 2
    for block in blocks:
        quad, _, _ = format_service.map_from_text(block)
        assert quad.marked == quad.n_vertices - 1
        assert quad.labels[0] == 0


def test_sample_theta_n_summary_shows_exact_tail():
    result = invoke("sample", "theta_n", "--n", "2", "--count", "4", "--seed", "2", "--budget-edges", "50000")
    assert result.exit_code == 0, result.stderr
    assert "P(min<-1)=" in result.stderr


def test_sample_invalid_law_parameter_exits_with_2():
    result = invoke("sample", "rho_plus", "--x", "0")
    assert result.exit_code == 2
    assert "error:" in result.stderr


def test_sample_unknown_format_exits_with_2():
    assert invoke("--format", "csv_processes", "sample", "rho").exit_code == 2


# ==========================================
# export
# ==========================================
def test_export_schema():
    result = invoke("export", "--to", "schema")
    assert result.exit_code == 0
    schema = orjson.loads(result.stdout)
    assert {"experiment_id", "run_id", "master_seed"} <= set(schema["required"])


def test_export_tree_file_to_maps(tmp_path):
    src = tmp_path / "trees.txt"
    src.write_text("tree 0 3 (+(0)-)\ntree 2 1 (-)\n", encoding="utf-8")
    result = invoke("export", str(src), "--to", "edge_list")
    assert result.exit_code == 0, result.stderr
    quads = [format_service.map_from_text(b)[0] for b in split_maps(result.stdout)]
    assert [q.n_vertices for q in quads] == [5, 3]
    assert [q.edge_count for q in quads] == [6, 2]


def test_export_csv_processes_from_stdin():
    result = invoke("export", "--to", "csv_processes", input="tree 0 3 (+(0)-)\n")
    assert result.exit_code == 0, result.stderr
    lines = result.stdout.splitlines()
    assert lines[0] == "tree,contour,label"
    assert len(lines) == 1 + 7


def test_export_uses_global_format_and_out_dir(tmp_path):
    result = invoke("--out", str(tmp_path), "--format", "tree", "export", "-", input="tree 1 1 (0)\n")
    assert result.exit_code == 0, result.stderr
    assert (tmp_path / "trees.txt").read_text(encoding="utf-8") == "tree 1 1 (0)\n"


def test_export_rejects_unknown_input():
    result = invoke("export", "--to", "tree", input="hello world\n")
    assert result.exit_code == 2


def test_export_map_as_csv_is_refused():
    text = "quad 2 1 root 0 1\n0 1\nlabels: 0:0 1:-1\nrotation: 0:0 1:1\n"
    assert invoke("export", "--to", "csv_processes", input=text).exit_code == 2


def test_export_bad_global_format_exits_with_2():
    assert invoke("--format", "pdf", "export", input="tree 0 0 ()\n").exit_code == 2


# ==========================================
# verify
# ==========================================
def test_verify_green_report(tmp_path):
    result = invoke("--out", str(tmp_path), "verify", "green", "--seed", "4")
    assert result.exit_code == 0, result.stderr
    payload = orjson.loads((tmp_path / "verify_green.json").read_bytes())
    assert payload["passed"] is True
    assert payload["master_seed"] == 4
    assert (tmp_path / "green_table.csv").exists()


def test_stats_unknown_mode_is_a_usage_error():
    result = invoke("stats", "scaling", "--mode", "fast")
    assert result.exit_code not in (0, 1)
