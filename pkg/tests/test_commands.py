import json
import math
import os

import pytest
from pydantic import ValidationError

from fraclap import config as config_module
from fraclap.commands import run_audits, run_mesh_refine, run_rates, run_seminorm, run_solve
from fraclap.commands.models import RATES_COLUMNS, AuditReport, ConvergenceRecord, RatesOutcome
from fraclap.commands.rates import running_slopes
from fraclap.commands.seminorm import parse_parameters
from fraclap.config import Settings
from fraclap.core.audits import AuditResult
from fraclap.core.exceptions import ConfigError
from fraclap.core.mesh.io import load_mesh, save_mesh
from fraclap.core.solution import closed_form_energy
from fraclap.core.utils import solver_manager as solver_manager_module
from fraclap.core.utils.tables import read_table
from fraclap.main import build_parser, main

from tests.test_io import HANGING_NODE


@pytest.fixture
def isolated_globals():
    """main() installs global settings and a solver manager; drop them afterwards."""
    yield
    config_module._settings = None
    solver_manager_module._solver_manager = None


def read_json(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


class TestMain:
    def test_parser(self):
        args = build_parser().parse_args(["audits", "--only", "conformity", "bbm", "--seed", "3"])
        assert args.command == "audits"
        assert args.only == ["conformity", "bbm"]
        assert args.seed == 3

    def test_parser_requires_a_command(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    @pytest.mark.parametrize("argv", [
        ["solve", "--theta", "0.5"],
        ["solve", "--s", "1.5"],
        ["solve", "--domain", "triangle"],
    ])
    def test_bad_configuration(self, argv, tmp_path, isolated_globals):
        assert main(argv + ["--out", str(tmp_path)]) == 1

    def test_missing_config_file(self, tmp_path, isolated_globals):
        assert main(["solve", "--config", str(tmp_path / "none.env"), "--out", str(tmp_path)]) == 1

    def test_solve_interval(self, tmp_path, isolated_globals):
        out = tmp_path / "out"
        code = main(["solve", "--domain", "interval", "--s", "0.5", "--out", str(out), "--log-level", "WARNING"])

        assert code == 0
        summary = read_json(out / "solve_summary.json")
        assert summary["metadata"]["command"] == "solve"
        solution = summary["solutions"][0]
        assert solution["s"] == 0.5
        assert solution["method"] == "cholesky"
        assert "nodal_deviation" in solution["checks"]
        assert os.path.exists(out / "solution_s0.5.csv")

    def test_audits_only_conformity(self, tmp_path, isolated_globals):
        code = main(["audits", "--only", "conformity", "--out", str(tmp_path)])

        assert code == 0
        report = read_json(tmp_path / "audits_report.json")
        assert report["success"] is True
        assert list(report["results"]) == ["conformity"]

    def test_audits_unknown_name(self, tmp_path, isolated_globals):
        assert main(["audits", "--only", "nonexistent", "--out", str(tmp_path)]) == 1

    def test_audits_on_broken_mesh(self, tmp_path, isolated_globals):
        path = tmp_path / "hanging.txt"
        path.write_text(HANGING_NODE)

        code = main(["audits", "--mesh", str(path), "--out", str(tmp_path)])

        assert code == 1
        report = read_json(tmp_path / "audits_report.json")
        assert report["results"]["conformity"]["success"] is False


class TestSolveCommand:
    def test_lshape(self, settings, solver_manager):
        summaries = run_solve(settings)
        assert len(summaries) == 1
        assert summaries[0].dofs == 5
        assert summaries[0].checks == {}
        metadata, rows = read_table(summaries[0].solution_path)
        assert metadata["domain"] == "lshape"
        assert set(rows[0]) == {"x", "y", "u"}

    def test_mesh_file_and_dump(self, settings, solver_manager, fine_lshape_mesh, tmp_path):
        path = save_mesh(fine_lshape_mesh, tmp_path / "mesh.txt")
        settings = settings.model_copy(update={"dump_system": True})

        run_solve(settings, mesh_path=str(path))

        assert os.path.exists(os.path.join(settings.out, "system_s0.5.bin"))


class TestMeshRefineCommand:
    def test_uniform_sweeps(self, settings):
        path = run_mesh_refine(settings, sweeps=1)
        mesh = load_mesh(path)
        assert mesh.n_elements >= 48
        summary = read_json(os.path.join(settings.out, "mesh_summary.json"))
        assert summary["sweeps"] == 1
        assert summary["initial_elements"] == 24

    def test_greedy(self, settings):
        run_mesh_refine(settings)
        metadata, rows = read_table(os.path.join(settings.out, "trace.csv"))
        assert metadata["strategy"] == "practical"
        assert int(rows[0]["n_elements"]) == 24
        summary = read_json(os.path.join(settings.out, "mesh_summary.json"))
        assert summary["minimum_angle"] > 0.0


class TestSeminormCommand:
    def test_parameters(self):
        assert parse_parameters(["exponent=0.25", "levels=3", "label=x"]) == \
            {"exponent": 0.25, "levels": 3, "label": "x"}
        assert parse_parameters(None) == {}
        with pytest.raises(ConfigError):
            parse_parameters(["exponent"])

    def test_value(self, settings):
        path = run_seminorm(settings, study="value", model="linear", sigma=0.5, p=2.0)
        metadata, rows = read_table(path)
        assert float(rows[0]["value"]) == pytest.approx(0.398942, rel=1e-5)
        assert metadata["model"] == "linear"

    def test_distance(self, settings):
        settings = settings.model_copy(update={"domain": "unit_square"})
        _, rows = read_table(run_seminorm(settings, study="distance"))
        assert [float(r["alpha"]) for r in rows] == [0.5, 0.9, 0.99]
        assert float(rows[0]["integral"]) == pytest.approx(3.77124, rel=1e-5)

    def test_unknown_study(self, settings):
        with pytest.raises(ConfigError):
            run_seminorm(settings, study="spectrum")

    def test_unknown_model(self, settings):
        with pytest.raises(ConfigError):
            run_seminorm(settings, model="sawtooth")


class TestAuditsCommand:
    def test_unknown_audit(self, settings):
        with pytest.raises(ConfigError):
            run_audits(settings, only=["conformity", "bogus"])

    def test_mesh_restricts_to_conformity(self, settings, fine_lshape_mesh, tmp_path):
        path = save_mesh(fine_lshape_mesh, tmp_path / "mesh.txt")
        report = run_audits(settings, mesh_path=str(path), only=["bbm"])
        assert list(report.results) == ["conformity"]
        assert report.success
        assert report.failed == []


class TestModels:
    def test_negative_error(self):
        with pytest.raises(ValidationError):
            ConvergenceRecord(step=0, n_elements=6, dofs=0, error=-1.0)

    def test_records_must_grow(self):
        records = [ConvergenceRecord(step=0, n_elements=6, dofs=0, error=1.0),
                   ConvergenceRecord(step=1, n_elements=6, dofs=1, error=0.5)]
        with pytest.raises(ValidationError):
            RatesOutcome(s=0.5, records=records, reference="closed_form")

    def test_record_row(self):
        record = ConvergenceRecord(step=2, n_elements=40, dofs=11, error=0.1, slope=None, cumulative_marked=12)
        assert record.as_row() == (2, 40, 11, 0.1, "", 12, 0.0)

    def test_failed_audits(self):
        report = AuditReport(success=False, version="1", config_hash="abc", seed=0, results={
            "conformity": AuditResult(success=True),
            "bbm": AuditResult(success=False, error="ratio"),
        })
        assert report.failed == ["bbm"]

    def test_running_slopes(self):
        slopes = running_slopes([10, 20, 40], [1.0, 0.5, 0.25])
        assert slopes[0] is None
        assert slopes[1] == pytest.approx(-1.0)
        assert slopes[2] == pytest.approx(-1.0)


@pytest.mark.slow
class TestRatesAcceptance:
    def test_interval_closed_form(self, tmp_path, solver_manager):
        settings = Settings(domain="interval", s_values="0.5", target_h=0.25, cap=200, max_workers=1,
                            out=str(tmp_path), fine_sweeps=1)
        outcome = run_rates(settings)[0.5]

        assert outcome.reference == "closed_form"
        assert len(outcome.records) >= 2
        assert outcome.records[-1].error < outcome.records[0].error
        metadata, rows = read_table(outcome.csv_path)
        assert tuple(rows[0]) == RATES_COLUMNS
        assert metadata["reference"] == "closed_form"
        assert os.path.exists(os.path.join(str(tmp_path), "plot_rates.py"))

    def test_lshape_surrogate(self, tmp_path, solver_manager):
        settings = Settings(domain="lshape", s_values="0.5", target_h=0.5, cap=120, max_workers=2,
                            out=str(tmp_path), fine_sweeps=1, quad_order=4)
        outcome = run_rates(settings)[0.5]

        assert outcome.reference == "uniform_refinement_x1"
        assert all(r.error > 0.0 for r in outcome.records)
        assert outcome.lambda0 is not None

    def test_interval_greedy_reaches_one_percent(self, tmp_path, solver_manager):
        settings = Settings(domain="interval", s_values="0.5", target_h=0.25, cap=2000, max_workers=1,
                            out=str(tmp_path), quad_order=5, far_order=4, near_factor=4.0)
        outcome = run_rates(settings)[0.5]

        errors = [r.error for r in outcome.records]
        assert all(b < a for a, b in zip(errors, errors[1:]))
        assert errors[-1] / math.sqrt(closed_form_energy(1, 0.5)) <= 0.01
        assert outcome.lambda0 <= 50.0

    def test_lshape_rate(self, tmp_path, solver_manager):
        settings = Settings(domain="lshape", s_values="0.5", target_h=1.0, cap=8000, max_workers=4,
                            out=str(tmp_path), fine_sweeps=2)
        outcome = run_rates(settings)[0.5]

        assert not outcome.partial
        assert -0.65 <= outcome.final_slope <= -0.38
        assert outcome.lambda0 <= 50.0
