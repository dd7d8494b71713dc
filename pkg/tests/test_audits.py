import pytest
from unittest.mock import patch

from fraclap.core.audits import AuditResult, BaseAudit, ClosedFormAudit, ConformityAudit, audit_registry
from fraclap.core.audits.structural import StructuralAudit
from fraclap.core.exceptions import MeshError, SeminormDivergenceError
from fraclap.core.mesh import refine
from fraclap.core.mesh.io import save_mesh

from tests.test_io import HANGING_NODE

AUDIT_ORDER = [
    "conformity", "closedform", "distancepower", "gradientblowup", "bbm",
    "regularity", "structural", "localization", "complexity", "seminormmarking",
]


class FailingAudit(BaseAudit):
    """Raises whatever it is given."""

    def __init__(self, error):
        super().__init__()
        self.error = error

    def run(self, settings, **kwargs) -> AuditResult:
        raise self.error


class TestAuditRegistry:
    def test_registration_order(self):
        assert [audit.key for audit in audit_registry.get_all_audits()] == AUDIT_ORDER

    def test_lookup(self):
        assert isinstance(audit_registry.get_audit("conformity"), ConformityAudit)
        assert audit_registry.get_audit("nonexistent") is None

    def test_every_audit_has_a_schema(self):
        for schema in audit_registry.get_audit_schemas():
            assert schema["description"]
            assert isinstance(schema["thresholds"], dict)

    def test_schema_thresholds(self):
        audit = audit_registry.get_audit("closedform")
        assert audit.thresholds["tolerance"] == 1e-4
        assert audit.get_schema()["name"] == "closedform"


class TestAuditCheck:
    @pytest.mark.parametrize("error", [
        MeshError("broken mesh"),
        SeminormDivergenceError("no convergence", 1.0, 2.0),
        ZeroDivisionError("division by zero"),
    ])
    def test_errors_become_failed_results(self, mock_settings, error):
        audit = FailingAudit(error)

        result = audit.check(mock_settings)

        assert result.success is False
        assert result.error.startswith(type(error).__name__)
        assert result.metadata["audit"] == "failing"
        assert "seconds" in result.metadata

    def test_programming_errors_propagate(self, mock_settings):
        with pytest.raises(KeyError):
            FailingAudit(KeyError("missing")).check(mock_settings)

    def test_plain_value_error_propagates(self, mock_settings):
        with pytest.raises(ValueError):
            FailingAudit(ValueError("bad shape")).check(mock_settings)

    def test_missing_schema(self):
        audit = FailingAudit(MeshError("x"))
        assert audit.thresholds == {}
        assert audit.description == "Raises whatever it is given."

    def test_run_is_patched_through(self, mock_settings):
        audit = ClosedFormAudit()
        with patch.object(audit, "run", return_value=AuditResult(success=True, data={"ok": 1})) as run:
            result = audit.check(mock_settings, mesh_path=None)
        run.assert_called_once_with(mock_settings, mesh_path=None)
        assert result.success
        assert result.metadata["thresholds"] == audit.thresholds


class TestConformityAudit:
    def test_random_refinements(self, settings):
        result = ConformityAudit().check(settings)
        assert result.success, result.error
        assert set(result.data) == {"lshape", "square", "disk_polygon", "interval"}
        assert len(result.data["lshape"]["elements"]) == 7

    def test_hanging_node_file(self, settings, tmp_path):
        path = tmp_path / "hanging.txt"
        path.write_text(HANGING_NODE)

        result = ConformityAudit().check(settings, mesh_path=str(path))

        assert not result.success
        assert result.data["edge"]
        assert "Non-conforming" in result.error

    def test_valid_file(self, settings, fine_lshape_mesh, tmp_path):
        mesh = refine(fine_lshape_mesh, fine_lshape_mesh.element_ids()[:2])
        path = save_mesh(mesh, tmp_path / "mesh.txt")
        result = ConformityAudit().check(settings, mesh_path=str(path))
        assert result.success
        assert result.data["elements"] == mesh.n_elements

    def test_unreadable_file(self, settings, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("2 3 1\n0 0\n")
        result = ConformityAudit().check(settings, mesh_path=str(path))
        assert not result.success
        assert "Invalid mesh" in result.error


class TestNumericalAudits:
    def test_closed_form(self, settings):
        result = ClosedFormAudit().check(settings)
        assert result.success
        assert result.data["deviations"][0.5] < 1e-4

    def test_structural(self, settings, solver_manager):
        result = StructuralAudit().check(settings)
        assert result.success, result.error
        assert all(entry["positive"] for entry in result.data.values())
