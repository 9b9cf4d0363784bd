"""
Command-line harness tests: exit codes, output formats and configuration precedence
"""
import io
import json
import re
import sys
from pathlib import Path

import pandas as pd
import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from lcp_app import (
    DEFAULT_RUN, EXIT_CONFIG, EXIT_DIVERGED, EXIT_MAX_ITERS, EXIT_NOT_CERTIFIED, EXIT_OK,
    format_residual, main, parse_method_entry,
)
from lcp_problem import gen_example1
from modulus_solver_engine import SolverConfig, solve
from splitting_methods import Variant, make_spec


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestSolveCommand:

    @pytest.mark.smoke
    @pytest.mark.cli
    def test_namgs_row(self, capsys):
        code, out, err = run_cli(capsys, "solve", "--example", "1", "--m", "10", "--delta", "4",
                                 "--method", "namgs", "--omega", "diag", "--repeats", "1",
                                 "--format", "json")
        assert code == EXIT_OK
        row = json.loads(out)
        assert row["n"] == 100 and row["method"] == "namgs"
        assert 14 <= row["IT"] <= 18
        assert row["Res"] <= 1e-5
        assert "[OK]" in err

    @pytest.mark.cli
    def test_namsor_table_setting(self, capsys):
        code, out, _ = run_cli(capsys, "solve", "--example", "2", "--m", "10", "--method", "namsor",
                               "--alpha", "0.88", "--omega", "bench", "--repeats", "1",
                               "--format", "json")
        assert code == EXIT_OK
        assert 6 <= json.loads(out)["IT"] <= 10

    @pytest.mark.cli
    def test_missing_alpha(self, capsys):
        code, _, err = run_cli(capsys, "solve", "--example", "1", "--m", "4", "--method", "namsor")
        assert code == EXIT_CONFIG
        assert "requires --alpha" in err

    @pytest.mark.cli
    def test_bad_flag_value_exits_one(self, capsys):
        code, _, err = run_cli(capsys, "solve", "--example", "3")
        assert code == EXIT_CONFIG
        assert "usage" in err

    @pytest.mark.cli
    def test_unknown_method(self, capsys):
        code, _, err = run_cli(capsys, "solve", "--method", "gmres", "--m", "4")
        assert code == EXIT_CONFIG
        assert "unknown method" in err

    @pytest.mark.cli
    def test_max_iters_exit(self, capsys):
        code, _, _ = run_cli(capsys, "solve", "--m", "10", "--method", "mgs", "--max-iters", "3",
                             "--repeats", "1")
        assert code == EXIT_MAX_ITERS

    @pytest.mark.cli
    def test_diverged_exit(self, capsys):
        code, _, err = run_cli(capsys, "solve", "--m", "10", "--method", "msor", "--alpha", "4",
                               "--omega", "bench", "--repeats", "1")
        assert code == EXIT_DIVERGED
        assert "DIVERGED" in err

    @pytest.mark.cli
    def test_markdown_row(self, capsys):
        code, out, _ = run_cli(capsys, "solve", "--m", "4", "--method", "namgs", "--repeats", "1")
        assert code == EXIT_OK
        lines = out.strip().splitlines()
        assert lines[0].startswith("| method | n | alpha | IT | CPU | Res |")
        assert re.search(r"\| \d\.\de-\d\d \|", lines[2])

    @pytest.mark.cli
    def test_history(self, capsys):
        code, out, _ = run_cli(capsys, "solve", "--m", "4", "--method", "namgs", "--repeats", "1",
                               "--format", "json", "--history")
        row = json.loads(out)
        assert len(row["residual_history"]) == row["IT"] + 1

    @pytest.mark.cli
    def test_n_flag(self, capsys):
        code, out, _ = run_cli(capsys, "solve", "--n", "16", "--repeats", "1", "--format", "json")
        assert code == EXIT_OK and json.loads(out)["n"] == 16
        code, _, err = run_cli(capsys, "solve", "--n", "15")
        assert code == EXIT_CONFIG and "perfect square" in err

    @pytest.mark.cli
    def test_zero_start(self, capsys):
        code, out, _ = run_cli(capsys, "solve", "--m", "4", "--start", "zero", "--repeats", "1",
                               "--format", "json")
        assert code == EXIT_OK


class TestTableCommand:

    @pytest.mark.cli
    def test_accelerated_below_baseline(self, capsys):
        code, out, _ = run_cli(capsys, "table", "--example", "1", "--methods", "mgs,namgs",
                               "--sizes", "100,900", "--omega", "bench", "--repeats", "1",
                               "--format", "csv")
        assert code == EXIT_OK
        df = pd.read_csv(io.StringIO(out))
        its = df[df["Metric"] == "IT"].set_index("Method")
        assert list(its.columns[1:]) == ["n=100", "n=900"]
        for col in ("n=100", "n=900"):
            assert float(its.loc["NAMGS", col]) < float(its.loc["MGS", col])

    @pytest.mark.cli
    def test_csv_round_trip(self, capsys):
        """CSV cells parse back to the exact solver values"""
        code, out, _ = run_cli(capsys, "table", "--methods", "namgs", "--ms", "4",
                               "--repeats", "1", "--format", "csv")
        assert code == EXIT_OK
        df = pd.read_csv(io.StringIO(out), float_precision="round_trip")
        problem = gen_example1(4, 4.0)
        report = solve(problem, make_spec("namgs", problem.A), SolverConfig())
        res = df[df["Metric"] == "Res"]["n=16"].iloc[0]
        it = df[df["Metric"] == "IT"]["n=16"].iloc[0]
        assert float(res) == report.final_residual
        assert int(it) == report.iterations

    @pytest.mark.cli
    def test_markdown_layout(self, capsys):
        code, out, _ = run_cli(capsys, "table", "--methods", "mgs,namsor:0.9", "--ms", "4,6",
                               "--repeats", "1")
        assert code == EXIT_OK
        lines = out.strip().splitlines()
        assert lines[0] == "| Method | Metric | n=16 | n=36 |"
        assert len(lines) == 2 + 2 * 3
        assert lines[2].startswith("| MGS | IT |")
        assert lines[5].startswith("| NAMSOR(0.9) | IT |")
        assert re.match(r"\| MGS \| Res \| \d\.\de-\d\d \| \d\.\de-\d\d \|", lines[4])

    @pytest.mark.cli
    def test_failed_cell_marked(self, capsys):
        code, out, _ = run_cli(capsys, "table", "--methods", "namgs,msor:4", "--ms", "10",
                               "--omega", "bench", "--repeats", "1")
        assert code == EXIT_OK
        assert "—(DIVERGED)" in out
        assert "| NAMGS | IT |" in out

    @pytest.mark.cli
    def test_alpha_flag_fills_bare_entry(self, capsys):
        code, out, _ = run_cli(capsys, "table", "--methods", "namsor", "--alpha", "0.88",
                               "--example", "2", "--ms", "10", "--omega", "bench",
                               "--repeats", "1", "--format", "csv")
        assert code == EXIT_OK
        df = pd.read_csv(io.StringIO(out))
        its = df[df["Metric"] == "IT"].set_index("Method")
        assert list(its.index) == ["NAMSOR(0.88)"]

        code, out, _ = run_cli(capsys, "table", "--methods", "namsor:0.88", "--example", "2",
                               "--ms", "10", "--omega", "bench", "--repeats", "1",
                               "--format", "csv")
        assert code == EXIT_OK
        explicit = pd.read_csv(io.StringIO(out))
        assert int(its.loc["NAMSOR(0.88)", "n=100"]) == \
            int(explicit[explicit["Metric"] == "IT"]["n=100"].iloc[0])

    @pytest.mark.cli
    def test_entry_alpha_wins_over_flag(self, capsys):
        code, out, _ = run_cli(capsys, "table", "--methods", "namsor:0.9,namaor", "--alpha", "0.8",
                               "--beta", "0.7", "--ms", "4", "--repeats", "1", "--format", "csv")
        assert code == EXIT_OK
        labels = pd.read_csv(io.StringIO(out))["Method"].unique().tolist()
        assert labels == ["NAMSOR(0.9)", "NAMAOR(0.8,0.7)"]

    @pytest.mark.cli
    def test_missing_alpha_fails_before_sweep(self, capsys):
        code, out, err = run_cli(capsys, "table", "--methods", "namgs,namsor", "--ms", "4",
                                 "--repeats", "1")
        assert code == EXIT_CONFIG
        assert "requires --alpha" in err
        assert out == ""

    @pytest.mark.cli
    def test_empty_sweep(self, capsys):
        code, _, err = run_cli(capsys, "table", "--methods", "namgs")
        assert code == EXIT_CONFIG
        assert "at least one method and one size" in err

    @pytest.mark.cli
    @pytest.mark.file_io
    def test_exports(self, capsys, tmp_path):
        from openpyxl import load_workbook

        xlsx = tmp_path / "table.xlsx"
        pdf = tmp_path / "table.pdf"
        code, _, _ = run_cli(capsys, "table", "--methods", "namgs", "--ms", "4", "--repeats", "1",
                             "--xlsx", str(xlsx), "--pdf", str(pdf))
        assert code == EXIT_OK
        ws = load_workbook(xlsx).active
        assert [c.value for c in ws[1]] == ["Method", "Metric", "n=16"]
        assert pdf.read_bytes().startswith(b"%PDF")


class TestCertifyCommand:

    @pytest.mark.smoke
    @pytest.mark.cli
    def test_certified(self, capsys):
        code, out, _ = run_cli(capsys, "certify", "--example", "1", "--m", "4", "--method", "namgs",
                               "--omega", "diag")
        assert code == EXIT_OK
        report = json.loads(out)
        assert report["omega_case1"] is True
        assert report["rho_T"] < 1.0
        assert report["splitting"]["method"] == "namgs"

    @pytest.mark.cli
    def test_small_omega(self, capsys):
        code, out, _ = run_cli(capsys, "certify", "--m", "4", "--omega", "scalar:0.1")
        assert code == EXIT_NOT_CERTIFIED
        assert json.loads(out)["certified"] is False

    @pytest.mark.cli
    def test_non_square_file(self, capsys, tmp_path):
        a_path = tmp_path / "A.mtx"
        a_path.write_text("%%MatrixMarket matrix coordinate real general\n2 3 1\n1 1 1.0\n")
        q_path = tmp_path / "q.txt"
        q_path.write_text("1\n1\n")
        code, _, err = run_cli(capsys, "certify", "--matrix", str(a_path), "--q", str(q_path))
        assert code == EXIT_CONFIG
        assert "square" in err


class TestGenAndFiles:

    @pytest.mark.cli
    @pytest.mark.file_io
    def test_gen_then_solve_from_files(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "gen", "--example", "2", "--m", "3", "--out", str(tmp_path))
        assert code == EXIT_OK
        a_path = tmp_path / "example2-m3-d4_A.mtx"
        q_path = tmp_path / "example2-m3-d4_q.mtx"
        assert a_path.exists() and q_path.exists()
        code, out, _ = run_cli(capsys, "solve", "--matrix", str(a_path), "--q", str(q_path),
                               "--repeats", "1", "--format", "json")
        assert code == EXIT_OK
        assert json.loads(out)["n"] == 9

    @pytest.mark.cli
    def test_both_sources_rejected(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "solve", "--example", "1", "--matrix", "A.mtx", "--q", "q.mtx")
        assert code == EXIT_CONFIG
        assert "not both" in err

    @pytest.mark.cli
    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run_cli(capsys, "solve", "--matrix", str(tmp_path / "none.mtx"),
                             "--q", str(tmp_path / "none.txt"))
        assert code == EXIT_CONFIG


class TestConfiguration:
    """Flags over --config file over DEFAULT_RUN"""

    @pytest.mark.cli
    def test_file_then_flags(self, capsys, run_config_file, sample_runs):
        path = run_config_file(dict(sample_runs["namgs_quick"], method="mgs"))
        code, out, _ = run_cli(capsys, "solve", "--config", str(path))
        assert code == EXIT_OK
        assert json.loads(out)["method"] == "mgs"
        code, out, _ = run_cli(capsys, "solve", "--config", str(path), "--method", "namgs")
        assert json.loads(out)["method"] == "namgs"

    @pytest.mark.cli
    def test_table_config(self, capsys, run_config_file, sample_runs):
        path = run_config_file(sample_runs["small_table"])
        code, out, _ = run_cli(capsys, "table", "--config", str(path))
        assert code == EXIT_OK
        assert out.splitlines()[0] == "Method,Metric,n=100,n=900"

    @pytest.mark.cli
    @pytest.mark.file_io
    def test_file_flags_replace_config_example(self, capsys, tmp_path, run_config_file,
                                               sample_runs):
        code, _, _ = run_cli(capsys, "gen", "--example", "2", "--m", "3", "--out", str(tmp_path))
        assert code == EXIT_OK
        path = run_config_file(sample_runs["namgs_quick"])
        code, out, _ = run_cli(capsys, "solve", "--config", str(path),
                               "--matrix", str(tmp_path / "example2-m3-d4_A.mtx"),
                               "--q", str(tmp_path / "example2-m3-d4_q.mtx"))
        assert code == EXIT_OK
        assert json.loads(out)["n"] == 9

    @pytest.mark.cli
    @pytest.mark.file_io
    def test_example_flag_replaces_config_files(self, capsys, tmp_path, run_config_file):
        path = run_config_file({"matrix": str(tmp_path / "A.mtx"), "q": str(tmp_path / "q.mtx"),
                                "repeats": 1, "format": "json"})
        code, out, _ = run_cli(capsys, "solve", "--config", str(path), "--example", "1",
                               "--m", "4")
        assert code == EXIT_OK
        assert json.loads(out)["n"] == 16

    @pytest.mark.cli
    def test_unknown_key(self, capsys, run_config_file, sample_runs):
        path = run_config_file(sample_runs["bad_key"])
        code, _, err = run_cli(capsys, "solve", "--config", str(path))
        assert code == EXIT_CONFIG
        assert "max_iterations" in err

    @pytest.mark.cli
    def test_benchmark_configs_parse(self):
        for path in (project_root / "benchmarks").glob("*.json"):
            with open(path) as f:
                obj = json.load(f)
            assert set(obj) <= set(DEFAULT_RUN)
            for entry in obj.get("methods", []):
                parse_method_entry(entry)

    @pytest.mark.unit
    def test_method_entries(self):
        assert parse_method_entry("namsor:0.88") == (Variant.NAMSOR, 0.88, None)
        assert parse_method_entry("namaor:0.9:0.8") == (Variant.NAMAOR, 0.9, 0.8)
        assert parse_method_entry({"method": "mgs"}) == (Variant.MGS, None, None)

    @pytest.mark.unit
    def test_residual_style(self):
        assert format_residual(9.7e-06) == "9.7e-06"
        assert format_residual(6.3e-06) == "6.3e-06"
