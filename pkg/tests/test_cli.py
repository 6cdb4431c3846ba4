import numpy as np
import pytest
from click.testing import CliRunner

from efpsa.cli import _load_gmatrix_csv, main

RUNNER = CliRunner()


def _run(args):
    return RUNNER.invoke(main, args, catch_exceptions=False)


def _data_rows(path):
    rows = []
    header = None
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            continue
        if header is None:
            header = line.split(",")
            continue
        rows.append(line.split(","))
    return header, rows


class TestErrorReporting:
    def test_bad_sweep_is_single_line_validation_error(self):
        result = RUNNER.invoke(main, ["gate-fidelity", "--omega-sweep", "oops"])
        assert result.exit_code == 2
        err = [l for l in result.output.splitlines() if l.startswith("error:")]
        assert len(err) == 1 and err[0].startswith("error: validation:")

    def test_fig2_imported_without_map_fails(self):
        result = RUNNER.invoke(main, ["fig2", "--imported"])
        assert result.exit_code == 2
        assert "field-map" in result.output

    def test_synthesize_requires_exactly_one_mode(self):
        result = RUNNER.invoke(main, ["synthesize"])
        assert result.exit_code == 2


class TestManifestHeaders:
    def test_every_csv_embeds_subcommand_and_outputs(self, tmp_path):
        result = _run(["--out", str(tmp_path), "--no-plots", "schemes",
                       "--points", "5"])
        assert result.exit_code == 0
        text = (tmp_path / "schemes.csv").read_text()
        assert "# subcommand: schemes" in text
        assert "# output.0: schemes.csv" in text
        assert "# seed: 0" in text

    def test_config_digest_recorded(self, tmp_path):
        cfg = tmp_path / "device.toml"
        cfg.write_text("n_sites = 6\n")
        result = _run(["--config", str(cfg), "--out", str(tmp_path),
                       "--no-plots", "gate-fidelity", "--points", "3",
                       "--samples", "2000"])
        assert result.exit_code == 0
        text = (tmp_path / "gate_fidelity.csv").read_text()
        assert "# input.config.sha256:" in text


class TestGMatrixRoundTrip:
    def test_saved_matrix_reloads_exactly(self, tmp_path):
        result = _run(["--out", str(tmp_path), "gmatrix"])
        assert result.exit_code == 0
        g = _load_gmatrix_csv(tmp_path / "gmatrix.csv")
        assert g.matrix.shape == (20, 20)
        assert g.col_labels[0] == "e0t"
        # reuse through --gmatrix for a synthesis run
        target = tmp_path / "target.json"
        target.write_text('{"n_sites": 10, "fields": {"5": [1e7, 0]}}')
        result = _run(["--out", str(tmp_path), "--gmatrix",
                       str(tmp_path / "gmatrix.csv"), "synthesize",
                       "--target", str(target)])
        assert result.exit_code == 0
        header, rows = _data_rows(tmp_path / "voltages.csv")
        assert header == ["electrode", "voltage_v"]
        assert len(rows) == 20

    def test_component_mismatch_detected(self, tmp_path):
        _run(["--out", str(tmp_path), "gmatrix", "--components", "full3"])
        plan_g = str(tmp_path / "gmatrix.csv")
        target = tmp_path / "target.json"
        target.write_text('{"n_sites": 10, "fields": {"5": [1e7, 0]}}')
        result = RUNNER.invoke(main, ["--gmatrix", plan_g, "--out", str(tmp_path),
                                      "synthesize", "--target", str(target)])
        assert result.exit_code == 2
        assert "components" in result.output


class TestSynthesize:
    def test_channel_plan_mode(self, tmp_path):
        plan = tmp_path / "plan.json"
        plan.write_text(
            '{"0":"ch0","1":"ch1","2":"ch2","3":"ch3","4":"ch0",'
            '"5":"ch1","6":"ch2","7":"ch3","8":"ch0","9":"ch1"}'
        )
        result = _run(["--out", str(tmp_path), "synthesize", "--channels", str(plan)])
        assert result.exit_code == 0
        header, rows = _data_rows(tmp_path / "voltages.csv")
        v = {r[0]: float(r[1]) for r in rows}
        assert v["e0t"] == pytest.approx(-v["e0b"], rel=1e-12)


class TestFig2:
    def test_emits_three_csvs_with_rabi_column(self, tmp_path):
        result = _run(["--out", str(tmp_path), "--no-plots", "fig2"])
        assert result.exit_code == 0
        for name in ("fig2_single_electrode.csv", "fig2_crosstalk_eliminated.csv",
                     "fig2_site_summary.csv"):
            assert (tmp_path / name).exists()
        header, _ = _data_rows(tmp_path / "fig2_single_electrode.csv")
        assert header == ["z_m", "e_perp_v_per_m", "rabi_hz"]

    def test_ce_suppresses_non_target_sites(self, tmp_path):
        _run(["--out", str(tmp_path), "--no-plots", "fig2"])
        header, rows = _data_rows(tmp_path / "fig2_site_summary.csv")
        field = {int(r[0]): float(r[1]) for r in rows}
        target = max(field, key=field.get)
        others = [v for k, v in field.items() if k != target]
        assert max(others) <= 1e-3 * field[target]


class TestRatesAndFigures:
    def test_rates_csv_schema(self, tmp_path):
        result = _run(["--out", str(tmp_path), "--no-plots", "rates",
                       "--arch", "efpsa", "--nmax", "4000", "--points", "25"])
        assert result.exit_code == 0
        header, rows = _data_rows(tmp_path / "rates.csv")
        assert header == ["n_qubits", "rate_ebit_per_s", "limit"]
        assert {r[2] for r in rows} == {"loss", "capacity"}

    def test_fig4_envelope_dominates(self, tmp_path):
        result = _run(["--out", str(tmp_path), "--no-plots", "fig4",
                       "--nmax", "2000", "--points", "20", "--l-grid", "1"])
        assert result.exit_code == 0
        _, rows = _data_rows(tmp_path / "fig4_rates.csv")
        for r in rows:
            hybrid = float(r[3])
            assert hybrid >= max(float(r[1]), float(r[2])) - 1e-9

    def test_report_paths_render_figures(self, tmp_path):
        result = _run(["--out", str(tmp_path), "rates", "--arch", "mzi",
                       "--nmax", "500", "--points", "10"])
        assert result.exit_code == 0
        png = tmp_path / "rates.png"
        assert png.exists() and png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


class TestFieldMaps:
    def test_export_then_import_matches_surrogate(self, tmp_path):
        result = _run(["--out", str(tmp_path), "export-map",
                       "--electrode", "e5t", "--grid", "7:5:31"])
        assert result.exit_code == 0
        assert (tmp_path / "map_e5t.txt").exists()

    def test_unknown_electrode_rejected(self, tmp_path):
        result = RUNNER.invoke(main, ["--out", str(tmp_path), "export-map",
                                      "--electrode", "e99x"])
        assert result.exit_code == 2


class TestDeterminism:
    def test_identical_manifests_give_identical_bytes(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            args = ["--out", str(out)]
            assert _run(args + ["appendix"]).exit_code == 0
            assert _run(args + ["gate-fidelity", "--points", "4",
                                "--samples", "2000"]).exit_code == 0
        files1 = sorted(p.name for p in out1.iterdir())
        files2 = sorted(p.name for p in out2.iterdir())
        assert files1 == files2
        for name in files1:
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
