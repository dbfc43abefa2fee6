"""End-to-end tests of the command-line interface via ``main(argv)``."""

import numpy as np
import pytest

import blocktime as bt
from blocktime import kv
from blocktime.cli import main

NS = 10**9


def _simulate(tmp_path, name="sim.csv", runs="5000", extra=()):
    out = tmp_path / name
    rc = main(
        [
            "simulate",
            "--validators", "40",
            "--delta-t", "0.0011",
            "--phases", "3",
            "--runs", runs,
            "--seed", "2",
            "--out", str(out),
            *extra,
        ]
    )
    assert rc == 0
    return out


def _read_kv(path):
    return kv.parse_key_values(path.read_text(encoding="utf-8"))


class TestSimulateCommand:
    def test_writes_samples_summary_manifest(self, tmp_path):
        out = _simulate(tmp_path)
        lines = out.read_text().splitlines()
        assert lines[0] == "interval_seconds"
        assert len(lines) == 5001
        summary = _read_kv(tmp_path / "sim.csv.summary.txt")
        assert int(summary["samples"]) == 5000
        assert float(summary["mean"]) > 0.0
        manifest = _read_kv(tmp_path / "sim.csv.manifest")
        assert manifest["command"] == "simulate"
        assert manifest["seed"] == "2"
        assert "output.samples.sha256" in manifest

    def test_byte_deterministic_rerun(self, tmp_path):
        first = _simulate(tmp_path, "a.csv")
        second = _simulate(tmp_path, "b.csv")
        assert first.read_bytes() == second.read_bytes()
        # Manifests differ only through the out path in argv/config.
        assert (
            _read_kv(tmp_path / "a.csv.manifest")["output.samples.sha256"]
            == _read_kv(tmp_path / "b.csv.manifest")["output.samples.sha256"]
        )

    def test_samples_match_library_run(self, tmp_path):
        out = _simulate(tmp_path)
        _, intervals = bt.read_intervals_csv(out.open())
        config = bt.SimConfig(n_validators=40, delta_t=0.0011, phases=3, seed=2)
        np.testing.assert_array_equal(
            intervals, bt.run_monte_carlo(config, 5000).samples
        )

    def test_two_thirds_quorum_flag(self, tmp_path):
        out = tmp_path / "tt.csv"
        rc = main(
            [
                "simulate", "--validators", "40", "--delta-t", "1.0",
                "--phases", "1", "--quorum", "two-thirds",
                "--runs", "2000", "--seed", "0", "--out", str(out),
            ]
        )
        assert rc == 0
        _, intervals = bt.read_intervals_csv(out.open())
        expected = bt.analytic_broadcast_mean(40, states=bt.quorum_threshold(40))
        assert abs(intervals.mean() - expected) / expected < 0.05


class TestConfigResolution:
    def test_config_file_supplies_flags(self, tmp_path):
        config = tmp_path / "sim.conf"
        out = tmp_path / "from_config.csv"
        config.write_text(
            "validators = 40\ndelta_t = 0.0011\nphases = 3\n"
            f"runs = 500\nseed = 2\nout = {out}\n"
        )
        assert main(["simulate", "--config", str(config)]) == 0
        assert out.exists()

    def test_flag_overrides_config(self, tmp_path):
        config = tmp_path / "sim.conf"
        config.write_text("seed = 5\n")
        out = _simulate(tmp_path, extra=["--config", str(config)])
        assert _read_kv(tmp_path / "sim.csv.manifest")["seed"] == "2"

    def test_unknown_config_key_rejected(self, tmp_path):
        config = tmp_path / "sim.conf"
        config.write_text("valiadtors = 40\n")
        rc = main(
            [
                "simulate", "--config", str(config), "--validators", "40",
                "--delta-t", "0.0011", "--runs", "10", "--out",
                str(tmp_path / "x.csv"),
            ]
        )
        assert rc == 2

    def test_malformed_config_rejected(self, tmp_path):
        config = tmp_path / "sim.conf"
        config.write_text("this line has no equals sign\n")
        rc = main(["simulate", "--config", str(config)])
        assert rc == 2

    def test_missing_required_flag(self, tmp_path, capsys):
        rc = main(["simulate", "--validators", "40"])
        assert rc == 2
        assert "--delta-t" in capsys.readouterr().err

    def test_bad_integer_flag(self, tmp_path):
        rc = main(
            [
                "simulate", "--validators", "forty", "--delta-t", "0.0011",
                "--runs", "10", "--out", str(tmp_path / "x.csv"),
            ]
        )
        assert rc == 2


class TestFitCommand:
    def test_fit_report_and_curve(self, tmp_path):
        samples = _simulate(tmp_path, runs="20000")
        report = tmp_path / "fit.txt"
        rc = main(
            [
                "fit", "--input", str(samples), "--k", "3",
                "--validators", "40", "--out", str(report),
            ]
        )
        assert rc == 0
        values = _read_kv(report)
        assert values["fit.primary"] == "free"
        assert float(values["fit.free.mu_hat"]) > 0.0
        assert float(values["transfer.delta_t_from_mu"]) > 0.0
        assert values["transfer.quorum_adjusted"] == "false"
        assert values["transfer_adjusted.quorum_adjusted"] == "true"
        assert float(values["goodness.ks"]) < 0.1
        curve_lines = (tmp_path / "fit.txt.curve.csv").read_text().splitlines()
        assert curve_lines[0] == "t,data_density,model_density"
        assert len(curve_lines) >= 5
        manifest = _read_kv(tmp_path / "fit.txt.manifest")
        assert "input.intervals.sha256" in manifest
        assert "output.report.sha256" in manifest

    def test_recovers_transfer_time_loosely(self, tmp_path):
        samples = _simulate(tmp_path, runs="20000")
        report = tmp_path / "fit.txt"
        assert (
            main(
                [
                    "fit", "--input", str(samples), "--k", "3",
                    "--validators", "40", "--out", str(report),
                ]
            )
            == 0
        )
        dt = float(_read_kv(report)["transfer.delta_t_from_mu"])
        assert abs(dt - 0.0011) / 0.0011 < 0.30

    def test_all_amplitude_modes_reported(self, tmp_path):
        samples = _simulate(tmp_path, runs="20000")
        report = tmp_path / "fit.txt"
        assert (
            main(
                [
                    "fit", "--input", str(samples), "--k", "3",
                    "--validators", "40", "--amplitude", "renorm",
                    "--out", str(report),
                ]
            )
            == 0
        )
        values = _read_kv(report)
        assert values["fit.primary"] == "renorm"
        for mode in ("raw", "free", "renorm"):
            assert (
                f"fit.{mode}.mu_hat" in values or f"fit.{mode}.error" in values
            )

    def test_degenerate_input_exits_three(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text(
            "interval_seconds\n1.0\n1.05\n1.1\n5.0\n5.05\n"
        )
        rc = main(
            [
                "fit", "--input", str(bad), "--k", "3",
                "--validators", "40", "--out", str(tmp_path / "r.txt"),
            ]
        )
        assert rc == 3

    def test_constant_samples_exit_two(self, tmp_path):
        bad = tmp_path / "const.csv"
        bad.write_text("interval_seconds\n2.0\n2.0\n2.0\n2.0\n")
        rc = main(
            [
                "fit", "--input", str(bad), "--k", "1",
                "--validators", "40", "--out", str(tmp_path / "r.txt"),
            ]
        )
        assert rc == 2

    def test_missing_input_file(self, tmp_path):
        rc = main(
            [
                "fit", "--input", str(tmp_path / "nope.csv"), "--k", "1",
                "--validators", "40", "--out", str(tmp_path / "r.txt"),
            ]
        )
        assert rc == 2


class TestFetchCommand:
    def _stage(self, fx, start, stop):
        for height in range(start, stop + 1):
            fx.timestamps[height] = bt.format_rfc3339_ns(
                1_700_000_000 * NS + (height - start) * 7 * NS
            )

    def test_fetch_writes_intervals_and_droplog(self, tmp_path, rpc_server):
        self._stage(rpc_server, 100, 104)
        # Stage one backwards timestamp so a drop entry appears.
        rpc_server.timestamps[103] = rpc_server.timestamps[101]
        out = tmp_path / "chain.csv"
        rc = main(
            [
                "fetch", "--endpoint", rpc_server.url, "--from", "100",
                "--to", "104", "--rate", "1000", "--out", str(out),
            ]
        )
        assert rc == 0
        pairs, intervals = bt.read_intervals_csv(out.open())
        assert pairs == [(100, 101), (101, 102), (103, 104)]
        droplog = (tmp_path / "chain.csv.droplog.txt").read_text()
        assert "non-positive interval 102->103" in droplog

    def test_token_from_environment(self, tmp_path, rpc_server, monkeypatch):
        self._stage(rpc_server, 7, 8)
        monkeypatch.setenv("BLOCKTIME_RPC_TOKEN", "tok123")
        out = tmp_path / "chain.csv"
        rc = main(
            [
                "fetch", "--endpoint", rpc_server.url, "--from", "7",
                "--to", "8", "--rate", "1000", "--out", str(out),
            ]
        )
        assert rc == 0
        assert all(auth == "Bearer tok123" for _, auth in rpc_server.requests)

    def test_unreachable_endpoint_exits_four(self, tmp_path):
        rc = main(
            [
                "fetch", "--endpoint", "http://127.0.0.1:9", "--from", "1",
                "--to", "1", "--rate", "1000", "--retries", "0",
                "--out", str(tmp_path / "x.csv"),
            ]
        )
        assert rc == 4

    def test_rpc_height_mismatch_exits_four(self, tmp_path, rpc_server):
        self._stage(rpc_server, 5, 5)
        rpc_server.report_height[5] = "6"
        rc = main(
            [
                "fetch", "--endpoint", rpc_server.url, "--from", "5",
                "--to", "5", "--rate", "1000",
                "--out", str(tmp_path / "x.csv"),
            ]
        )
        assert rc == 4


class TestPlotCommand:
    def test_histogram_only_svg(self, tmp_path):
        samples = _simulate(tmp_path)
        out = tmp_path / "plot.svg"
        rc = main(["plot", "--hist", str(samples), "--out", str(out)])
        assert rc == 0
        svg = out.read_text()
        assert svg.startswith("<svg")
        assert "<rect" in svg
        assert "<path" not in svg

    def test_with_fitted_curve(self, tmp_path):
        samples = _simulate(tmp_path, runs="20000")
        report = tmp_path / "fit.txt"
        assert (
            main(
                [
                    "fit", "--input", str(samples), "--k", "3",
                    "--validators", "40", "--out", str(report),
                ]
            )
            == 0
        )
        out = tmp_path / "plot.svg"
        rc = main(
            [
                "plot", "--hist", str(samples), "--curve",
                str(tmp_path / "fit.txt.curve.csv"), "--title", "fit check",
                "--out", str(out),
            ]
        )
        assert rc == 0
        svg = out.read_text()
        assert "<path" in svg
        assert "fit check" in svg

    def test_byte_deterministic(self, tmp_path):
        samples = _simulate(tmp_path)
        first = tmp_path / "one.svg"
        second = tmp_path / "two.svg"
        assert main(["plot", "--hist", str(samples), "--out", str(first)]) == 0
        assert main(["plot", "--hist", str(samples), "--out", str(second)]) == 0
        assert first.read_bytes() == second.read_bytes()

    def test_out_of_range_curve_warns(self, tmp_path, capsys):
        samples = _simulate(tmp_path)
        curve = tmp_path / "curve.csv"
        curve.write_text("t,model_density\n-50.0,0.1\n1000.0,0.2\n")
        out = tmp_path / "plot.svg"
        rc = main(
            ["plot", "--hist", str(samples), "--curve", str(curve), "--out", str(out)]
        )
        assert rc == 0
        assert "clipped" in capsys.readouterr().err

    def test_empty_curve_file_gives_histogram_only(self, tmp_path):
        samples = _simulate(tmp_path)
        curve = tmp_path / "curve.csv"
        curve.write_text("")
        out = tmp_path / "plot.svg"
        rc = main(
            ["plot", "--hist", str(samples), "--curve", str(curve), "--out", str(out)]
        )
        assert rc == 0
        assert "<path" not in out.read_text()

    def test_unknown_curve_header_exits_two(self, tmp_path):
        samples = _simulate(tmp_path)
        curve = tmp_path / "curve.csv"
        curve.write_text("x,y\n1,2\n")
        rc = main(
            [
                "plot", "--hist", str(samples), "--curve", str(curve),
                "--out", str(tmp_path / "plot.svg"),
            ]
        )
        assert rc == 2


class TestTopLevel:
    def test_version_flag(self, capsys):
        assert main(["--version"]) == 0
        assert bt.__version__ in capsys.readouterr().out

    def test_no_arguments_is_usage_error(self):
        assert main([]) == 2

    def test_unknown_subcommand(self):
        assert main(["frobnicate"]) == 2
