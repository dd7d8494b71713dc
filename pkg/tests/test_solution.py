import math
import os

import numpy as np
import pytest

from fraclap.core.assembly import DofMap, assemble
from fraclap.core.exceptions import NestingError, QuadratureError
from fraclap.core.mesh import make_initial_mesh, uniform_refine
from fraclap.core.solution import (
    GalerkinSolution,
    closed_form_1d,
    closed_form_constant,
    closed_form_energy,
    closed_form_energy_error,
    export_solution,
    nodal_deviation,
    prolongate,
    prolongated_energy_error,
    solve,
    surrogate_energy_error,
    validate_closed_form_1d,
)
from fraclap.core.utils.tables import read_table


def fake_solution(fingerprint, energy, lineage=(), s=0.5, source="1"):
    return GalerkinSolution(coefficients=np.zeros(1), fingerprint=fingerprint, s=s, energy=energy,
                            dofmap=None, source=source, lineage=lineage)


class TestClosedForm:
    def test_half_laplacian_constants(self):
        assert closed_form_constant(1, 0.5) == pytest.approx(1.0)
        assert closed_form_energy(1, 0.5) == pytest.approx(math.pi / 2.0)

    def test_disk_energy(self):
        s = 0.5
        constant = closed_form_constant(2, s)
        assert closed_form_energy(2, s) == pytest.approx(constant * math.pi / (1.0 + s))

    @pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
    def test_validation(self, s):
        assert validate_closed_form_1d(s) < 1e-4

    def test_profile(self):
        exact = closed_form_1d(0.5)
        values = exact(np.array([[0.0], [0.6], [1.0], [1.5]]))
        np.testing.assert_allclose(values, [1.0, 0.8, 0.0, 0.0])

    def test_rejects_bad_s(self):
        with pytest.raises(QuadratureError):
            closed_form_constant(1, 1.0)


class TestGalerkinSolve:
    def test_interval_energy_approaches_closed_form(self, interval, small_config, solver_manager):
        exact = closed_form_energy(1, 0.5)
        energies = []
        for h in (1.0 / 16.0, 1.0 / 64.0):
            system = assemble(make_initial_mesh(interval, h), 0.5, config=small_config)
            energies.append(solve(system).energy)
        assert energies[0] < energies[1] < exact
        assert energies[1] == pytest.approx(exact, rel=0.1)

    def test_solution_is_positive_and_symmetric(self, interval_mesh, small_config, solver_manager):
        solution = solve(assemble(interval_mesh, 0.5, config=small_config))
        assert solution.method == "cholesky"
        assert np.all(solution.coefficients > 0.0)
        np.testing.assert_allclose(solution.coefficients, solution.coefficients[::-1], rtol=1e-4)
        assert solution.nodal_values[0] == 0.0
        assert solution.nodal_values[8] == 0.0

    def test_energy_identity(self, fine_lshape_mesh, small_config, solver_manager):
        system = assemble(fine_lshape_mesh, 0.5, config=small_config)
        solution = solve(system)
        quadratic = solution.coefficients @ system.matrix @ solution.coefficients
        assert solution.energy == pytest.approx(quadratic, rel=1e-10)
        assert solution.fingerprint == fine_lshape_mesh.fingerprint

    def test_nodal_deviation(self, interval_mesh, small_config, solver_manager):
        solution = solve(assemble(interval_mesh, 0.5, config=small_config))
        assert nodal_deviation(solution, closed_form_1d(0.5)) < 0.2


class TestIntervalAccuracy:
    def test_energy_with_127_dofs(self, interval, small_config, solver_manager):
        system = assemble(make_initial_mesh(interval, 1.0 / 64.0), 0.5, config=small_config)
        solution = solve(system)
        assert system.n_dofs == 127
        assert solution.energy == pytest.approx(closed_form_energy(1, 0.5), rel=0.02)

    @pytest.mark.slow
    def test_nodal_deviation_with_255_dofs(self, interval, small_config, solver_manager):
        system = assemble(make_initial_mesh(interval, 1.0 / 128.0), 0.5, config=small_config)
        assert system.n_dofs == 255
        assert nodal_deviation(solve(system), closed_form_1d(0.5)) <= 0.05

    def test_surrogate_tracks_closed_form_error(self, interval, small_config, solver_manager):
        coarse_mesh = make_initial_mesh(interval, 1.0 / 16.0)
        fine_mesh = uniform_refine(coarse_mesh, 2)
        coarse = solve(assemble(coarse_mesh, 0.5, config=small_config))
        fine_system = assemble(fine_mesh, 0.5, config=small_config)
        fine = solve(fine_system)

        surrogate = prolongated_energy_error(coarse, fine, fine_system)
        exact = closed_form_energy_error(coarse, closed_form_energy(1, 0.5))

        assert exact / 1.5 <= surrogate <= 1.5 * exact

    def test_three_quarter_laplacian(self, interval, small_config, solver_manager):
        exact = closed_form_energy(1, 0.75)
        solution = solve(assemble(make_initial_mesh(interval, 1.0 / 64.0), 0.75, config=small_config))
        assert 0.0 < solution.energy < exact
        assert solution.energy == pytest.approx(exact, rel=0.1)


class TestEnergyErrors:
    def test_surrogate(self):
        coarse = fake_solution("a", 1.50)
        fine = fake_solution("b", 1.56, lineage=("a",))
        assert surrogate_energy_error(coarse, fine) == pytest.approx(math.sqrt(0.06))

    def test_same_mesh(self):
        assert surrogate_energy_error(fake_solution("a", 1.5), fake_solution("a", 1.5)) == 0.0

    def test_small_negative_difference_is_clamped(self):
        coarse = fake_solution("a", 1.5)
        fine = fake_solution("b", 1.5 - 1e-14, lineage=("a",))
        assert surrogate_energy_error(coarse, fine) == 0.0

    @pytest.mark.parametrize("fine", [
        fake_solution("b", 1.56),
        fake_solution("b", 1.56, lineage=("a",), s=0.25),
        fake_solution("b", 1.56, lineage=("a",), source="x"),
        fake_solution("b", 1.40, lineage=("a",)),
    ])
    def test_incompatible_pairs(self, fine):
        with pytest.raises(NestingError):
            surrogate_energy_error(fake_solution("a", 1.50), fine)

    def test_closed_form_error(self):
        assert closed_form_energy_error(fake_solution("a", 0.96), 1.0) == pytest.approx(0.2)
        with pytest.raises(NestingError):
            closed_form_energy_error(fake_solution("a", 1.1), 1.0)


class TestProlongation:
    def test_midpoint_values(self, interval):
        coarse_mesh = make_initial_mesh(interval, 0.5)
        coarse = GalerkinSolution(coefficients=np.array([1.0, 2.0, 3.0]), fingerprint=coarse_mesh.fingerprint,
                                  s=0.5, energy=1.0, dofmap=DofMap.from_mesh(coarse_mesh), mesh=coarse_mesh)
        fine_mesh = uniform_refine(coarse_mesh)

        values = prolongate(coarse, fine_mesh)

        np.testing.assert_array_equal(values[:5], [0.0, 1.0, 2.0, 3.0, 0.0])
        for vid in range(5, fine_mesh.n_vertices):
            a, b = fine_mesh.vertex_parents[vid]
            assert values[vid] == pytest.approx(0.5 * (values[a] + values[b]))
            assert fine_mesh.vertices[vid][0] == pytest.approx(0.5 * (fine_mesh.vertices[a][0] + fine_mesh.vertices[b][0]))

    def test_unrelated_mesh(self, interval, fine_lshape_mesh):
        coarse_mesh = make_initial_mesh(interval, 0.5)
        coarse = GalerkinSolution(coefficients=np.zeros(3), fingerprint=coarse_mesh.fingerprint, s=0.5,
                                  energy=0.0, dofmap=DofMap.from_mesh(coarse_mesh), mesh=coarse_mesh)
        with pytest.raises(NestingError):
            prolongate(coarse, fine_lshape_mesh)

    def test_matches_surrogate(self, interval_mesh, small_config, solver_manager):
        fine_mesh = uniform_refine(interval_mesh)
        coarse = solve(assemble(interval_mesh, 0.5, config=small_config))
        fine_system = assemble(fine_mesh, 0.5, config=small_config)
        fine = solve(fine_system)

        surrogate = surrogate_energy_error(coarse, fine)
        direct = prolongated_energy_error(coarse, fine, fine_system)

        assert surrogate > 0.0
        assert direct == pytest.approx(surrogate, rel=0.1)


class TestExport:
    def test_csv(self, interval_mesh, small_config, solver_manager, tmp_path):
        solution = solve(assemble(interval_mesh, 0.5, config=small_config))
        path = export_solution(solution, str(tmp_path / "out" / "u.csv"), {"h": 0.25})

        assert os.path.exists(path)
        metadata, rows = read_table(path)
        assert metadata["s"] == "0.5"
        assert metadata["h"] == "0.25"
        assert metadata["fingerprint"] == interval_mesh.fingerprint
        assert len(rows) == interval_mesh.n_vertices
        assert set(rows[0]) == {"x", "u"}
        assert float(rows[0]["u"]) == 0.0

    def test_requires_mesh(self, tmp_path):
        with pytest.raises(NestingError):
            export_solution(fake_solution("a", 1.0), str(tmp_path / "u.csv"))
