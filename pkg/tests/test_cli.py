import json
import subprocess
import sys

import pytest

import oracles
from isocg import default_data_dir, load_sampleset, save_sampleset
from isocg.cli import run
from isocg.iso import ISO_REPORT_COLUMNS


def run_cli(capsys, *argv):
    code = run(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_cli_json(capsys, *argv):
    code, out, err = run_cli(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


class TestSolve:
    def test_generated_system_converges(self, capsys):
        code, out, _ = run_cli(capsys, "solve", "--size", "64", "--seed", "7")
        assert code == 0
        assert "converged: yes" in out
        assert "flops: 65536" in out.replace("flops: ", "flops: ") or "flops:" in out

    def test_hand_2x2_fixture(self, capsys):
        path = str(default_data_dir() / "hand2x2.json")
        doc = run_cli_json(capsys, "solve", "--size", "2", "--matrix", path, "--json")
        expected = oracles.solve_2x2([[4.0, 1.0], [1.0, 3.0]], [1.0, 2.0])
        assert doc["converged"] is True
        assert doc["solution"][0] == pytest.approx(expected[0], abs=1e-10)
        assert doc["solution"][1] == pytest.approx(expected[1], abs=1e-10)
        assert doc["solution"][0] == pytest.approx(0.090909, abs=1e-6)
        assert doc["solution"][1] == pytest.approx(0.636364, abs=1e-6)

    def test_missing_size_and_matrix_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            run(["solve"])
        assert excinfo.value.code == 64

    def test_unknown_flag_rejected(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            run(["solve", "--size", "8", "--frobnicate"])
        assert excinfo.value.code == 64

    def test_missing_matrix_file(self, capsys):
        code, _, err = run_cli(capsys, "solve", "--matrix", "/no/such/file.json")
        assert code == 66
        assert "cannot read" in err

    def test_malformed_matrix_file(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code, _, err = run_cli(capsys, "solve", "--matrix", str(bad))
        assert code == 65

    def test_size_mismatch_with_matrix(self, capsys):
        path = str(default_data_dir() / "hand2x2.json")
        code, _, err = run_cli(capsys, "solve", "--size", "3", "--matrix", path)
        assert code == 65

    def test_nonconvergence_exits_2(self, capsys):
        code, out, _ = run_cli(capsys, "solve", "--size", "32", "--max-iter", "1",
                               "--tol", "1e-30")
        assert code == 2
        assert "converged: no" in out

    def test_json_runs_are_byte_identical(self, capsys):
        _, out1, _ = run_cli(capsys, "solve", "--size", "48", "--seed", "3", "--json")
        _, out2, _ = run_cli(capsys, "solve", "--size", "48", "--seed", "3", "--json")
        assert out1 == out2


class TestSolveSs:
    def test_rate_zero_overhead_zero(self, capsys):
        doc = run_cli_json(capsys, "solve-ss", "--size", "64", "--seed", "2",
                           "--fault-rate", "0", "--json")
        assert doc["converged"] is True
        assert doc["overhead_percent"] == 0.0
        assert doc["fault_events"] == []

    def test_injected_run_reports_overhead_and_events(self, capsys):
        doc = run_cli_json(
            capsys, "solve-ss", "--size", "128", "--fault-rate", "0.1",
            "--fault-bits", "sign-mantissa", "--fault-seed", "3", "--json",
        )
        assert doc["converged"] is True
        assert doc["overhead_percent"] >= 0.0
        assert doc["rng_algorithm"] == "pcg64"
        for event in doc["fault_events"]:
            assert event["iteration"] is not None

    def test_invalid_bit_domain_is_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            run(["solve-ss", "--size", "16", "--fault-bits", "parity"])
        assert excinfo.value.code == 64

    def test_human_output_mentions_overhead(self, capsys):
        code, out, _ = run_cli(capsys, "solve-ss", "--size", "32", "--fault-rate", "0")
        assert code == 0
        assert "iteration overhead: 0.0%" in out


class TestIso:
    def test_perf_xeon_vs_a15(self, capsys):
        doc = run_cli_json(capsys, "iso", "--mode", "perf", "--ref", "xeon:8:2.0",
                           "--target", "a15:1.6", "--json")
        assert doc["cluster_count"] == pytest.approx(9.1, rel=1e-12)
        assert doc["ratios"]["power_vs_ref"] == pytest.approx(1.001, abs=0.01)

    def test_perf_xeon_vs_a7(self, capsys):
        doc = run_cli_json(capsys, "iso", "--mode", "perf", "--ref", "xeon:8:2.0",
                           "--target", "a7:0.5", "--json")
        assert doc["cluster_count"] == pytest.approx(50.2, rel=0.02)
        assert doc["ratios"]["power_vs_ref"] == pytest.approx(0.14, abs=0.01)

    def test_power_xeon_vs_a7(self, capsys):
        doc = run_cli_json(capsys, "iso", "--mode", "power", "--ref", "xeon:8:2.0",
                           "--target", "a7:0.5", "--json")
        assert doc["ratios"]["perf_vs_ref"] == pytest.approx(7.0, abs=0.2)

    def test_capacity_names_only(self, capsys):
        code, out, _ = run_cli(capsys, "iso", "--mode", "capacity",
                               "--ref", "xeon", "--target", "a7")
        assert code == 0
        assert "clusters: 40.0000" in out

    def test_capacity_hybrid(self, capsys):
        doc = run_cli_json(capsys, "iso", "--mode", "capacity", "--ref", "a15:4:1.6",
                           "--target", "a7:0.5", "--hybrid", "--json")
        assert doc["cluster_count"] == 4.0
        assert doc["achieved_gflops"] == pytest.approx(1.57, abs=0.02)
        assert doc["achieved_watts"] == pytest.approx(1.05, abs=0.02)
        assert doc["ratios"]["ref_perf_vs_target"] == pytest.approx(1.33, abs=0.02)
        assert doc["ratios"]["ref_power_vs_target"] == pytest.approx(5.22, rel=0.02)

    def test_perf_hybrid(self, capsys):
        doc = run_cli_json(capsys, "iso", "--mode", "perf", "--ref", "a15:4:1.6",
                           "--target", "a7:0.5", "--hybrid", "--json")
        assert doc["cluster_count"] == pytest.approx(5.51, rel=0.01)

    def test_unknown_machine_exits_65(self, capsys):
        code, _, err = run_cli(capsys, "iso", "--mode", "perf", "--ref", "epyc:8:2.0",
                               "--target", "a15:1.6")
        assert code == 65
        assert "epyc" in err
        assert "available:" in err

    def test_unknown_sample_exits_65(self, capsys):
        code, _, err = run_cli(capsys, "iso", "--mode", "perf", "--ref", "xeon:8:1.5",
                               "--target", "a15:1.6")
        assert code == 65

    def test_csv_output(self, capsys):
        code, out, _ = run_cli(capsys, "iso", "--mode", "perf", "--ref", "xeon:8:2.0",
                               "--target", "a15:1.6", "--csv")
        assert code == 0
        lines = out.strip().split("\n")
        assert lines[0] == ",".join(ISO_REPORT_COLUMNS)
        assert len(lines) == 2

    def test_bad_ss_fraction_is_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            run(["iso", "--mode", "perf", "--ref", "a15:4:1.6", "--target", "a7:0.5",
                 "--hybrid", "--ss-fraction", "1.5"])
        assert excinfo.value.code == 64

    def test_data_dir_override(self, capsys, tmp_path, monkeypatch):
        data = load_sampleset(default_data_dir())
        save_sampleset(data, tmp_path)
        text = (tmp_path / "samples.csv").read_text()
        # double the a15 throughput in the override directory
        text = text.replace("a15,4,1.6,on_chip,2.1,5.49,paper",
                            "a15,4,1.6,on_chip,4.2,5.49,paper")
        (tmp_path / "samples.csv").write_text(text)
        monkeypatch.setenv("ISOCG_DATA_DIR", str(tmp_path))
        doc = run_cli_json(capsys, "iso", "--mode", "perf", "--ref", "xeon:8:2.0",
                           "--target", "a15:1.6", "--json")
        assert doc["cluster_count"] == pytest.approx(19.11 / 4.2, rel=1e-12)

    def test_explicit_data_csv_path(self, capsys, tmp_path):
        save_sampleset(load_sampleset(default_data_dir()), tmp_path)
        doc = run_cli_json(capsys, "iso", "--mode", "perf", "--ref", "xeon:8:2.0",
                           "--target", "a15:1.6", "--data", str(tmp_path / "samples.csv"),
                           "--json")
        assert doc["cluster_count"] == pytest.approx(9.1, rel=1e-12)


class TestEts:
    def test_default_curve_breakeven(self, capsys):
        doc = run_cli_json(capsys, "ets", "--json")
        assert doc["mode"] == "iso_performance"
        assert abs(doc["breakeven_percent"] - 340.0) <= 10.0
        # the crossing point is included as a curve row
        crossing = [
            p for p in doc["points"]
            if p["degradation_percent"] == pytest.approx(doc["breakeven_percent"])
        ]
        assert crossing
        assert crossing[0]["ets_hybrid_joules"] == pytest.approx(
            crossing[0]["ets_reference_joules"], rel=1e-9
        )

    def test_single_point_ratio(self, capsys):
        code, out, _ = run_cli(capsys, "ets", "--degradation", "0:0:1")
        assert code == 0
        lines = out.strip().split("\n")
        assert lines[0] == "degradation_percent,ets_reference_joules,ets_hybrid_joules"
        first = lines[1].split(",")
        assert float(first[0]) == 0.0
        ratio = float(first[2]) / float(first[1])
        assert ratio == pytest.approx(0.226, abs=0.005)

    def test_reference_flat_and_hybrid_affine(self, capsys):
        doc = run_cli_json(capsys, "ets", "--degradation", "0:100:50", "--json")
        pts = [p for p in doc["points"]]
        refs = {p["ets_reference_joules"] for p in pts}
        assert len(refs) == 1

    def test_iso_power_mode_breakeven_tracks_throughput_gain(self, capsys):
        doc = run_cli_json(capsys, "ets", "--mode", "iso-power", "--json")
        expected = (doc["hybrid"]["gflops"] / doc["reference"]["gflops"] - 1.0) * 100.0
        assert doc["breakeven_percent"] == pytest.approx(expected, rel=1e-9)

    def test_iso_capacity_mode(self, capsys):
        doc = run_cli_json(capsys, "ets", "--mode", "iso-capacity", "--json")
        assert doc["cluster_count"] == 4.0

    def test_malformed_range_is_usage_error(self):
        for bad in ("5", "10:0:5", "0:10:0", "a:b:c"):
            with pytest.raises(SystemExit) as excinfo:
                run(["ets", "--degradation", bad])
            assert excinfo.value.code == 64

    def test_csv_runs_are_byte_identical(self, capsys):
        _, out1, _ = run_cli(capsys, "ets", "--degradation", "0:50:10")
        _, out2, _ = run_cli(capsys, "ets", "--degradation", "0:50:10")
        assert out1 == out2


class TestSubprocessEntryPoints:
    def test_python_m_isocg(self):
        result = subprocess.run(
            [sys.executable, "-m", "isocg", "solve", "--size", "16", "--seed", "1", "--json"],
            capture_output=True, text=True,
        )
        assert result.returncode == 0
        doc = json.loads(result.stdout)
        assert doc["converged"] is True

    def test_repeated_invocations_byte_identical(self):
        cmd = [sys.executable, "-m", "isocg", "ets", "--degradation", "0:30:10", "--json"]
        first = subprocess.run(cmd, capture_output=True, text=True)
        second = subprocess.run(cmd, capture_output=True, text=True)
        assert first.returncode == second.returncode == 0
        assert first.stdout == second.stdout
