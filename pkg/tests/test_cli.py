import csv
import io
import json
import math

import pytest

from qubitgain.cli import SCHEMA_VERSION, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


class TestSpectrum:
    def test_three_copies(self, capsys):
        code, out, _ = run(capsys, "spectrum", "--n", "3")
        assert code == 0
        table = rows(out)
        assert table[0][:3] == ["j", "copies", "block_dim"]
        assert table[1][:3] == ["3/2", "1", "16"]
        assert table[2][:3] == ["1/2", "2", "4"]

    def test_single_copy(self, capsys):
        code, out, _ = run(capsys, "spectrum", "--n", "1", "--b", "0.4")
        table = rows(out)
        assert code == 0 and len(table) == 2
        assert table[1] == ["1/2", "1", "4", "1.000000", "0.250000"]

    @pytest.mark.parametrize("argv", [["spectrum", "--n", "0"], ["spectrum", "--n", "2", "--b", "1.5"],
                                      ["spectrum", "--n", "2", "--b", "x"]])
    def test_validation(self, capsys, argv):
        code, out, err = run(capsys, *argv)
        assert code == 2
        assert out == ""
        assert err.startswith("error:")


class TestTable:
    def test_two_copies(self, capsys):
        code, out, _ = run(capsys, "table", "--n", "2")
        assert code == 0
        assert rows(out)[0] == ["N", "gain_bits", "quad_error"]
        assert abs(float(rows(out)[1][1]) - 0.03751) < 1e-4

    def test_nats(self, capsys):
        _, out, _ = run(capsys, "table", "--n", "2", "--nats")
        table = rows(out)
        assert table[0][1] == "gain_nats"
        assert abs(float(table[1][1]) - 0.03751 * math.log(2)) < 1e-4

    def test_default_list(self, capsys):
        _, out, _ = run(capsys, "table")
        expected = [0, 0.03751, 0.08397, 0.13259, 0.18059, 0.39245, 0.69639, 1.07422, 1.32005, 1.50261]
        got = [float(r[1]) for r in rows(out)[1:]]
        assert [int(r[0]) for r in rows(out)[1:]] == [1, 2, 3, 4, 5, 10, 20, 40, 60, 80]
        assert max(abs(a - b) for a, b in zip(got, expected)) < 1e-4

    @pytest.mark.parametrize("argv", [["--n", ""], ["--n", ",,"], ["--n", "0"], ["--prior", "bogus"],
                                      ["--prior", "poly:0,0,2"], ["--nodes", "1"]])
    def test_validation(self, capsys, argv):
        assert run(capsys, "table", *argv)[0] == 2

    def test_json_schema(self, capsys):
        _, out, _ = run(capsys, "table", "--n", "1,2", "--format", "json")
        doc = json.loads(out)
        assert doc["schema_version"] == SCHEMA_VERSION
        assert doc["command"] == "table"
        assert doc["columns"] == ["N", "gain_bits", "quad_error"]
        assert doc["config"]["N"] == [1, 2]
        assert doc["rows"][0]["gain_bits"] == 0.0
        assert set(doc) >= {"generator", "config", "rows"}

    def test_polynomial_prior(self, capsys):
        code, out, _ = run(capsys, "table", "--n", "2", "--prior", "poly:0,0,3")
        assert code == 0
        assert abs(float(rows(out)[1][1]) - 0.03751) < 1e-4


class TestFit:
    def test_computed(self, capsys):
        code, out, _ = run(capsys, "fit")
        slope = float(rows(out)[1][0])
        assert code == 0 and 0.41 <= slope <= 0.47

    def test_from_table_file(self, capsys, tmp_path):
        path = tmp_path / "t.csv"
        assert main(["table", "--n", "20,40,60,80", "-o", str(path)]) == 0
        code, out, _ = run(capsys, "fit", "--input", str(path))
        table = rows(out)
        assert code == 0
        assert table[1][2:] == ["40", "80"]

    def test_too_few_points(self, capsys):
        assert run(capsys, "fit", "--n", "40")[0] == 2


class TestOracle:
    def test_quadrature_passes(self, capsys):
        code, out, _ = run(capsys, "oracle", "--n", "2", "--format", "json")
        doc = json.loads(out)
        assert code == 0
        assert doc["meta"]["passed"] is True
        assert doc["meta"]["max_deviation"] < 1e-8
        assert len(doc["rows"]) == 8

    def test_failure_exit_code(self, capsys):
        # too few polar nodes cannot reach an absurdly tight tolerance
        code, _, _ = run(capsys, "oracle", "--n", "2", "--budget", "2", "--tolerance", "1e-30")
        assert code == 1

    def test_guard(self, capsys):
        assert run(capsys, "oracle", "--n", "5")[0] == 2
        assert run(capsys, "oracle", "--n", "2", "--budget", "0")[0] == 2

    def test_workers_do_not_change_output(self, capsys):
        argv = ["oracle", "--n", "2", "--method", "monte-carlo", "--budget", "60000", "--b", "0.5"]
        _, one, _ = run(capsys, *argv)
        _, many, _ = run(capsys, *argv, "--workers", "3")
        assert one == many


class TestLocal:
    def test_two_copies(self, capsys):
        code, out, _ = run(capsys, "local", "--n", "2", "--format", "json")
        doc = json.loads(out)
        assert code == 0
        assert abs(doc["meta"]["average_gain_bits"] - 0.03751) < 1e-4
        assert [r["j"] for r in doc["rows"]] == ["1", "0"]
        assert doc["rows"][0]["marginal"] == "9/10"

    def test_single_copy(self, capsys):
        _, out, _ = run(capsys, "local", "--n", "1", "--prior", "uniform", "--format", "json")
        assert json.loads(out)["meta"]["average_gain_bits"] == 0.0


class TestSimulate:
    def test_byte_identical_files(self, tmp_path, monkeypatch):
        monkeypatch.setenv("QUBITGAIN_OUTPUT_DIR", str(tmp_path))
        argv = ["simulate", "--n", "3", "--trials", "5000", "--seed", "9", "--format", "json"]
        assert main(argv + ["-o", "a.json", "--trace", "ta.csv"]) == 0
        assert main(argv + ["-o", "b.json", "--trace", "tb.csv"]) == 0
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
        assert (tmp_path / "ta.csv").read_bytes() == (tmp_path / "tb.csv").read_bytes()
        doc = json.loads((tmp_path / "a.json").read_text())
        assert doc["meta"]["seed"] == 9
        assert len((tmp_path / "ta.csv").read_text().splitlines()) == 5001

    def test_different_seed_differs(self, capsys):
        _, a, _ = run(capsys, "simulate", "--n", "2", "--trials", "2000", "--seed", "1")
        _, b, _ = run(capsys, "simulate", "--n", "2", "--trials", "2000", "--seed", "2")
        assert a != b

    def test_product_state(self, capsys):
        _, out, _ = run(capsys, "simulate", "--n", "4", "--trials", "10000", "--b-true", "1")
        freqs = [float(r[2]) for r in rows(out)[1:]]
        assert freqs == [1.0, 0.0, 0.0]

    @pytest.mark.parametrize("argv", [["--trials", "0"], ["--b-true", "2"], ["--n", "0"]])
    def test_validation(self, capsys, argv):
        base = {"--n": "2", "--trials": "10"}
        for k in range(0, len(argv), 2):
            base[argv[k]] = argv[k + 1]
        flat = [x for kv in base.items() for x in kv]
        assert run(capsys, "simulate", *flat)[0] == 2


def test_absolute_output_ignores_env(tmp_path, monkeypatch):
    monkeypatch.setenv("QUBITGAIN_OUTPUT_DIR", str(tmp_path / "elsewhere"))
    target = tmp_path / "abs.csv"
    assert main(["spectrum", "--n", "2", "-o", str(target)]) == 0
    assert target.exists()
    assert not (tmp_path / "elsewhere").exists()


def test_csv_header_stable(capsys):
    _, out, _ = run(capsys, "simulate", "--n", "2", "--trials", "10")
    assert rows(out)[0] == ["outcome", "j", "frequency", "marginal", "posterior_mean", "gain_bits"]
