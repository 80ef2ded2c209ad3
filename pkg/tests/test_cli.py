"""End-to-end command-line tests driving main() with argv lists."""

import json
import math
import subprocess
import sys

import pytest

from cardfolio.calibration import MarketParams, build_factor_covariance
from cardfolio.cli import main, parse_band, parse_grid, parse_seeds
from cardfolio.derivatives import OptionSpec, bs_call_price
from cardfolio.experiments import make_random_universe
from cardfolio.io import RunConfig, save_config, verify_manifest, write_universe_csv
from cardfolio.metrics import ConstraintSet
from cardfolio.solvers import SolverConfig, solve

MKT = ["--rf", "0.0397", "--erp", "0.0423", "--sigma-m", "0.17"]


@pytest.fixture(scope="module")
def universe():
    return make_random_universe(10, seed=5)


@pytest.fixture(scope="module")
def data_csv(tmp_path_factory, universe):
    path = tmp_path_factory.mktemp("data") / "universe.csv"
    write_universe_csv(path, universe)
    return str(path)


def run_cli(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestFlagParsing:
    def test_seed_range(self):
        assert parse_seeds("1..4") == (1, 2, 3, 4)

    def test_seed_list_and_single(self):
        assert parse_seeds("3,5,9") == (3, 5, 9)
        assert parse_seeds("7") == (7,)

    def test_empty_seed_range_rejected(self):
        from cardfolio.cli import CLIError

        with pytest.raises(CLIError):
            parse_seeds("5..2")

    def test_band(self):
        assert parse_band("0.8,1.2") == (0.8, 1.2)

    def test_grid(self):
        assert parse_grid("k=6,8,10") == ("k", (6, 8, 10))
        assert parse_grid("cap=0.1,0.2") == ("cap", (0.1, 0.2))

    def test_bad_grid_key_rejected(self):
        from cardfolio.cli import CLIError

        with pytest.raises(CLIError, match="grid"):
            parse_grid("draws=10,20")


class TestCalibrate:
    def test_reports_universe_and_eigenvalue(self, capsys, data_csv):
        code, out, err = run_cli(capsys, ["calibrate", "--data", data_csv] + MKT)
        assert code == 0
        assert "assets: 10" in out
        assert "smallest eigenvalue" in out

    def test_missing_data_is_structured_error(self, capsys):
        code, out, err = run_cli(capsys, ["calibrate"] + MKT)
        assert code != 0
        assert err.startswith("cardfolio: error:")

    def test_missing_sigma_m_blocks_covariance_export(self, capsys, data_csv, tmp_path):
        code, out, err = run_cli(
            capsys,
            ["calibrate", "--data", data_csv, "--rf", "0.0397", "--erp", "0.0423",
             "--out", str(tmp_path / "x")],
        )
        assert code != 0
        assert "sigma-m" in err or "sigma_m" in err


class TestSolve:
    def test_summary_output(self, capsys, data_csv):
        code, out, err = run_cli(
            capsys,
            ["solve", "--data", data_csv] + MKT
            + ["--method", "mc", "--k", "4", "--draws", "300", "--seed", "3"],
        )
        assert code == 0
        assert "method=mc" in out
        assert "best sharpe" in out
        assert "evaluations: 300" in out

    def test_json_output_is_canonical_and_deterministic(self, capsys, data_csv):
        argv = (
            ["solve", "--data", data_csv] + MKT
            + ["--method", "mc", "--k", "4", "--draws", "200", "--seed", "1", "--json"]
        )
        code1, out1, _ = run_cli(capsys, argv)
        code2, out2, _ = run_cli(capsys, argv)
        assert code1 == code2 == 0
        assert out1 == out2
        record = json.loads(out1)
        assert record["method"] == "mc"
        assert record["rng"]["seed"] == 1

    def test_matches_library_result(self, capsys, data_csv, universe):
        code, out, _ = run_cli(
            capsys,
            ["solve", "--data", data_csv] + MKT
            + ["--method", "exact", "--k", "3", "--json"],
        )
        assert code == 0
        fc = build_factor_covariance(universe)
        run = solve("exact", universe, fc, SolverConfig(constraints=ConstraintSet(k=3)))
        assert json.loads(out) == run.canonical_dict()

    def test_missing_budget_fails_structured(self, capsys, data_csv):
        code, out, err = run_cli(
            capsys,
            ["solve", "--data", data_csv] + MKT + ["--method", "mc", "--k", "4"],
        )
        assert code != 0
        assert "n_draws" in err

    def test_unknown_method_rejected_by_parser(self, data_csv):
        with pytest.raises(SystemExit) as excinfo:
            main(["solve", "--data", data_csv, "--method", "anneal"])
        assert excinfo.value.code != 0

    def test_constraint_flags_are_applied(self, capsys, data_csv):
        code, out, _ = run_cli(
            capsys,
            ["solve", "--data", data_csv] + MKT
            + ["--method", "exact", "--k", "5", "--cap", "0.25",
               "--beta-band", "0.5,1.6", "--json"],
        )
        assert code == 0
        record = json.loads(out)
        assert record["config"]["constraints"]["k"] == 5
        assert record["config"]["constraints"]["weight_cap"] == 0.25
        assert record["config"]["constraints"]["beta_band"] == [0.5, 1.6]
        assert len(record["best"]["support"]) == 5

    def test_writes_bundle_when_out_given(self, capsys, data_csv, tmp_path):
        out_dir = tmp_path / "run_bundle"
        code, out, _ = run_cli(
            capsys,
            ["solve", "--data", data_csv] + MKT
            + ["--method", "greedy", "--k", "3", "--out", str(out_dir)],
        )
        assert code == 0
        assert verify_manifest(out_dir) == []
        assert (out_dir / "run-greedy-seed1.json").exists()


class TestConfigFile:
    @pytest.fixture()
    def config_path(self, tmp_path, data_csv):
        config = RunConfig(
            market=MarketParams(rf=0.0397, erp=0.0423, sigma_m=0.17),
            data_path=data_csv,
            method="mc",
            seeds=(11,),
            n_draws=250,
            constraints=ConstraintSet(k=4),
        )
        path = tmp_path / "run.json"
        save_config(config, path)
        return str(path)

    def test_config_supplies_everything(self, capsys, config_path):
        code, out, _ = run_cli(capsys, ["solve", "--config", config_path, "--json"])
        assert code == 0
        record = json.loads(out)
        assert record["rng"]["seed"] == 11
        assert record["config"]["n_draws"] == 250

    def test_flags_override_config(self, capsys, config_path):
        code, out, _ = run_cli(
            capsys,
            ["solve", "--config", config_path, "--json", "--seed", "2", "--k", "3"],
        )
        assert code == 0
        record = json.loads(out)
        assert record["rng"]["seed"] == 2
        assert record["config"]["constraints"]["k"] == 3

    def test_unknown_config_key_is_structured_error(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"market": {"rf": 0.03, "erp": 0.04}, "n_draw": 10}')
        code, out, err = run_cli(capsys, ["solve", "--config", str(path)])
        assert code != 0
        assert "n_draw" in err


class TestFrontier:
    def test_emits_point_cloud(self, capsys, data_csv):
        code, out, _ = run_cli(
            capsys,
            ["frontier", "--data", data_csv] + MKT
            + ["--k", "4", "--draws", "50", "--seed", "2"],
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "sigma,mu,sharpe"
        assert len(lines) == 51
        sigma, mu, sharpe = map(float, lines[1].split(","))
        assert sharpe == pytest.approx((mu - 0.0397) / sigma, rel=1e-12)

    def test_deterministic_for_seed(self, capsys, data_csv):
        argv = (
            ["frontier", "--data", data_csv] + MKT
            + ["--k", "3", "--draws", "20", "--seed", "9"]
        )
        _, out1, _ = run_cli(capsys, argv)
        _, out2, _ = run_cli(capsys, argv)
        assert out1 == out2


class TestDiagnose:
    def test_dependence_report_json(self, capsys, data_csv):
        code, out, _ = run_cli(
            capsys, ["diagnose", "--data", data_csv] + MKT + ["--report", "dependence"]
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["n"] == 10
        assert 0.0 <= payload["median_offdiag_rho"] <= 1.0
        assert payload["min_eig"] > -1e-10

    def test_cluster_order_is_permutation(self, capsys, data_csv, universe):
        code, out, _ = run_cli(
            capsys,
            ["diagnose", "--data", data_csv] + MKT
            + ["--report", "cluster", "--top-by-firms", "6"],
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "rank,id"
        ids = [line.split(",")[1] for line in lines[1:]]
        assert len(ids) == 6
        assert len(set(ids)) == 6
        assert set(ids) <= set(universe.ids)


class TestOptionCommands:
    PRICE_ARGS = [
        "--s0", "100", "--strike", "100", "--t", "0.5",
        "--vol", "0.526", "--rate", "0.0397",
    ]

    def test_price_row_matches_library(self, capsys):
        code, out, _ = run_cli(capsys, ["option", "price"] + self.PRICE_ARGS)
        assert code == 0
        header, row = out.strip().splitlines()
        cells = dict(zip(header.split(","), row.split(",")))
        diag = bs_call_price(
            OptionSpec(
                underlying_id="underlying",
                s0=100.0,
                strike=100.0,
                maturity=0.5,
                rate=0.0397,
                vol=0.526,
            )
        )
        assert float(cells["price"]) == diag.price
        assert float(cells["delta"]) == diag.delta
        assert float(cells["leverage"]) == diag.leverage

    def test_embed_uses_universe_asset(self, capsys, data_csv, universe):
        code, out, _ = run_cli(
            capsys,
            ["option", "embed", "--data", data_csv] + MKT
            + ["--underlying", universe.ids[0], "--s0", "100", "--t", "0.5"],
        )
        assert code == 0
        header, row = out.strip().splitlines()
        cells = dict(zip(header.split(","), row.split(",")))
        assert cells["underlying"] == universe.ids[0]
        leverage = float(cells["leverage"])
        assert float(cells["beta_opt"]) == pytest.approx(
            leverage * universe.assets[0].beta, rel=1e-12
        )
        assert cells["counts_toward_k"] == "true"

    def test_grid_emits_nine_rows(self, capsys):
        code, out, _ = run_cli(
            capsys,
            ["option", "grid", "--underlying", "x", "--vol", "0.526",
             "--beta", "1.689", "--s0", "100"] + MKT,
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert len(lines) == 10
        assert lines[0].split(",")[0] == "moneyness"

    def test_bump_alias_matches_option_bump(self, capsys):
        argv_tail = self.PRICE_ARGS + ["--bump", "0.01"]
        code1, out1, _ = run_cli(capsys, ["option", "bump"] + argv_tail)
        code2, out2, _ = run_cli(capsys, ["bump"] + argv_tail)
        assert code1 == code2 == 0
        assert out1 == out2
        header, row = out1.strip().splitlines()
        cells = dict(zip(header.split(","), row.split(",")))
        assert float(cells["relerr_up"]) <= 0.0
        assert float(cells["relerr_dn"]) <= 0.0

    def test_missing_vol_is_structured_error(self, capsys):
        code, out, err = run_cli(
            capsys, ["option", "price", "--s0", "100", "--t", "0.5"]
        )
        assert code != 0
        assert "vol" in err


class TestSweep:
    def test_grid_over_k(self, capsys, data_csv, tmp_path):
        out_path = tmp_path / "sweep.json"
        code, out, _ = run_cli(
            capsys,
            ["sweep", "--data", data_csv] + MKT
            + ["--grid", "k=3,4", "--seeds", "1..2", "--method", "mc",
               "--draws", "150", "--out", str(out_path)],
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0].startswith("scenario,")
        assert lines[1].startswith("k=3,")
        assert lines[2].startswith("k=4,")
        payload = json.loads(out_path.read_text())
        assert payload["parameters"]["grid"] == "k=3,4"
        assert payload["parameters"]["seeds"] == [1, 2]
        names = [s["name"] for s in payload["result"]["scenarios"]]
        assert names == ["k=3", "k=4"]
        overlap = payload["result"]["overlap_matrix"]
        assert overlap[0][0] == 1.0 and overlap[1][1] == 1.0


class TestBenchmark:
    def test_counts_all_subsets_and_reports_gaps(self, capsys, tmp_path):
        out_path = tmp_path / "bench.json"
        code, out, _ = run_cli(
            capsys,
            ["benchmark", "--n", "9", "--k", "3", "--draws", "300",
             "--pop", "10", "--gens", "5", "--out", str(out_path)],
        )
        assert code == 0
        assert f"over {math.comb(9, 3)} subsets" in out
        payload = json.loads(out_path.read_text())
        assert payload["result"]["subsets_visited"] == math.comb(9, 3)
        for row in payload["result"]["rows"]:
            assert row["gap_percent"] >= -1e-9

    def test_reduced_data_instance(self, capsys, data_csv):
        code, out, _ = run_cli(
            capsys,
            ["benchmark", "--data", data_csv] + MKT
            + ["--n", "8", "--k", "3", "--draws", "200", "--pop", "8", "--gens", "4"],
        )
        assert code == 0
        assert f"over {math.comb(8, 3)} subsets" in out
        assert "first 8 assets" in out

    def test_n_larger_than_data_rejected(self, capsys, data_csv):
        code, out, err = run_cli(
            capsys, ["benchmark", "--data", data_csv] + MKT + ["--n", "40", "--k", "3"]
        )
        assert code != 0
        assert "exceeds" in err


class TestProfile:
    def test_rows_per_method(self, capsys):
        code, out, _ = run_cli(
            capsys,
            ["profile", "--methods", "greedy,mc", "--n", "9", "--k", "3",
             "--seeds", "1..2", "--draws", "150"],
        )
        assert code == 0
        lines = out.strip().splitlines()
        table_start = next(i for i, l in enumerate(lines) if l.startswith("method,"))
        methods = [line.split(",")[0] for line in lines[table_start + 1 :]]
        assert methods == ["greedy", "mc"]
        assert any(line.startswith("environment:") for line in lines)


class TestExport:
    def test_full_bundle_with_runs(self, capsys, data_csv, tmp_path):
        out_dir = tmp_path / "bundle"
        code, out, _ = run_cli(
            capsys,
            ["export", "--data", data_csv] + MKT
            + ["--method", "mc", "--k", "3", "--draws", "200",
               "--seeds", "1..2", "--out", str(out_dir)],
        )
        assert code == 0
        manifest = json.loads(out)
        assert "run-mc-seed1.json" in manifest["files"]
        assert "run-mc-seed2.json" in manifest["files"]
        assert verify_manifest(out_dir) == []

    def test_export_requires_out(self, capsys, data_csv):
        code, out, err = run_cli(
            capsys, ["export", "--data", data_csv] + MKT + ["--method", "greedy"]
        )
        assert code != 0
        assert "--out" in err

    def test_reexport_hashes_stable(self, capsys, data_csv, tmp_path):
        argv = lambda d: (
            ["export", "--data", data_csv] + MKT
            + ["--method", "greedy", "--k", "4", "--seeds", "5", "--out", d]
        )
        code1, out1, _ = run_cli(capsys, argv(str(tmp_path / "a")))
        code2, out2, _ = run_cli(capsys, argv(str(tmp_path / "b")))
        assert code1 == code2 == 0
        assert json.loads(out1)["files"] == json.loads(out2)["files"]


def test_console_entry_point_reports_version():
    result = subprocess.run(
        [sys.executable, "-m", "cardfolio.cli", "--version"],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0
    assert "cardfolio" in result.stdout
