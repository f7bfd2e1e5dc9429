"""End-to-end tests of the command line through main()."""

import json

import pytest

from qmunu.__main__ import main, parse_arguments
from qmunu.utils import EXIT_PASS, EXIT_USAGE_ERROR, load_config, read_csv_rows


def run(argv):
    with pytest.raises(SystemExit) as excinfo:
        main(argv)
    return excinfo.value.code


def load(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


class TestArguments:
    def test_defaults(self):
        args = parse_arguments(["moments", "--n-vec", "2,1"])
        assert args.subcommand == "moments"
        assert (args.n, args.k, args.t) == (1, 1, 1)
        assert not args.exact

    def test_subcommand_required(self):
        with pytest.raises(SystemExit) as excinfo:
            parse_arguments([])
        assert excinfo.value.code == 2

    def test_unknown_suite(self):
        with pytest.raises(SystemExit):
            parse_arguments(["verify", "nothing"])


class TestSubcommands:
    """Each subcommand writes its report and exits with the verdict."""

    def test_moments_at_time_zero(self, tmp_path):
        assert run(["moments", "--n-vec", "1", "--t", "0", "--out", str(tmp_path)]) == EXIT_PASS
        report = load(tmp_path / "moments.json")
        assert report["passed"]
        assert abs(report["result"]["result"]["value"] - 1) < 1e-10
        assert len(report["config_hash"]) == 32

    def test_exact_rational(self, tmp_path):
        argv = ["exact", "--n-vec", "1", "--t", "1", "--q", "1/3", "--mu", "1/2", "--nu", "1/5",
                "--exact", "--out", str(tmp_path)]
        assert run(argv) == EXIT_PASS
        assert load(tmp_path / "exact.json")["result"]["value"] == "5/8"

    def test_exact_table_csv(self, tmp_path):
        argv = ["exact", "--n", "2", "--k", "1", "--t", "1", "--format", "csv", "--out", str(tmp_path)]
        assert run(argv) == EXIT_PASS
        path = tmp_path / "exact.csv"
        assert path.read_text(encoding="utf-8").startswith("# config_hash=")
        rows = read_csv_rows(path)
        assert rows[0] == ["nvec", "value"]
        assert [row[0] for row in rows[1:]] == ["0", "1", "2"]

    def test_simulate(self, tmp_path):
        argv = ["simulate", "--n", "2", "--t", "2", "--replicas", "200", "--out", str(tmp_path)]
        assert run(argv) == EXIT_PASS
        estimate = load(tmp_path / "simulate.json")["result"]["estimate"]
        assert estimate["replicas"] == 200
        assert estimate["mean"] >= -2

    def test_simulate_boson(self, tmp_path):
        argv = ["simulate", "--process", "boson", "--observable", "occupation", "--initial", "0,1,2",
                "--t", "3", "--replicas", "100", "--out", str(tmp_path)]
        assert run(argv) == EXIT_PASS
        mean = load(tmp_path / "simulate.json")["result"]["estimate"]["mean"]
        assert abs(sum(mean) - 3) < 1e-12

    def test_simulate_ring(self, tmp_path):
        argv = ["simulate", "--process", "ring", "--observable", "occupation", "--initial", "1,2,0",
                "--t", "3", "--replicas", "100", "--format", "csv", "--out", str(tmp_path)]
        assert run(argv) == EXIT_PASS
        rows = read_csv_rows(tmp_path / "simulate.csv")
        assert rows[0] == ["component", "mean", "stderr"]
        assert len(rows) == 4
        assert abs(sum(float(row[1]) for row in rows[1:]) - 3) < 1e-12

    def test_fredholm(self, tmp_path):
        argv = ["fredholm", "--type", "cauchy", "--zeta-re", "-0.1", "--n", "1", "--t", "1",
                "--out", str(tmp_path)]
        assert run(argv) == EXIT_PASS
        assert load(tmp_path / "fredholm.json")["result"]["result"]["config"]["kind"] == "cauchy"

    def test_fredholm_nodes_from_config(self, tmp_path):
        config = load_config()
        config["nystrom_nodes"] = 16
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config), encoding="utf-8")
        argv = ["fredholm", "--type", "cauchy", "--zeta-re", "-0.1", "--n", "1", "--t", "1",
                "--config", str(path), "--out", str(tmp_path)]
        assert run(argv) == EXIT_PASS
        result = load(tmp_path / "fredholm.json")["result"]["result"]
        assert result["nodes"] == 16 * 2 ** (len(result["history"]) - 1)

    def test_invert_point_mass(self, tmp_path):
        assert run(["invert", "--n", "1", "--t", "0", "--out", str(tmp_path)]) == EXIT_PASS
        assert load(tmp_path / "invert.json")["result"]["exact_pmf"] == ["1/1"]

    def test_verify_with_plot(self, tmp_path):
        argv = ["verify", "qseries", "--threads", "2", "--out", str(tmp_path),
                "--plot", str(tmp_path / "figures" / "qseries.svg")]
        assert run(argv) == EXIT_PASS
        assert load(tmp_path / "verify_qseries.json")["result"]["passed"]
        assert (tmp_path / "figures" / "qseries.svg").exists()

    def test_stationarity(self, tmp_path):
        argv = ["stationarity", "--sites", "3", "--t", "2", "--replicas", "2000", "--out", str(tmp_path)]
        assert run(argv) == EXIT_PASS
        assert load(tmp_path / "stationarity.json")["result"]["report"]["replicas"] == 2000


class TestErrors:
    """Usage errors exit with code 2 and leave a failure report when settings exist."""

    def test_invalid_config_file(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"tol": 2}), encoding="utf-8")
        assert run(["moments", "--n-vec", "1", "--config", str(config), "--out", str(tmp_path)]) == EXIT_USAGE_ERROR
        assert not (tmp_path / "moments_failure.json").exists()

    def test_invalid_parameters(self, tmp_path):
        argv = ["moments", "--n-vec", "1", "--mu", "0.05", "--nu", "0.1", "--out", str(tmp_path)]
        assert run(argv) == EXIT_USAGE_ERROR

    def test_domain_error_writes_failure(self, tmp_path):
        assert run(["exact", "--n-vec", "1,2", "--out", str(tmp_path)]) == EXIT_USAGE_ERROR
        failure = load(tmp_path / "exact_failure.json")
        assert failure["error"] == "DomainError"

    def test_occupation_needs_boson(self, tmp_path):
        argv = ["simulate", "--observable", "occupation", "--replicas", "10", "--out", str(tmp_path)]
        assert run(argv) == EXIT_USAGE_ERROR

    def test_ring_rejects_position(self, tmp_path):
        argv = ["simulate", "--process", "ring", "--initial", "1,1", "--replicas", "10",
                "--out", str(tmp_path)]
        assert run(argv) == EXIT_USAGE_ERROR

    @pytest.mark.parametrize(
        "flag, value",
        [("--q", "abc"), ("--mu", "1/0"), ("--nu", ""), ("--a", "1,x"), ("--n-vec", "2,one")],
    )
    def test_unparsable_flag_is_named(self, tmp_path, caplog, flag, value):
        argv = ["moments", "--n-vec", "1", flag, value, "--out", str(tmp_path)]
        assert run(argv) == EXIT_USAGE_ERROR
        assert f"{flag}: cannot parse '{value}'" in caplog.text

    def test_infeasible_radii(self, tmp_path):
        argv = ["moments", "--n-vec", "2,1", "--radii", "0.3,0.9", "--out", str(tmp_path)]
        assert run(argv) == EXIT_USAGE_ERROR
