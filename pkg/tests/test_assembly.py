import math

import numpy as np
import pytest

from fraclap.core.assembly import AssemblyConfig, DofMap, assemble, assemble_bilinear, lambda_constant
from fraclap.core.assembly.dump import dump_system, load_system
from fraclap.core.assembly.stiffness import near_pairs
from fraclap.core.audits.structural import dilate
from fraclap.core.exceptions import AssemblyError, QuadratureError


class TestLambdaConstant:
    def test_known_values(self):
        assert lambda_constant(1, 0.5) == pytest.approx(1.0 / math.pi)
        assert lambda_constant(2, 0.5) == pytest.approx(1.0 / (2.0 * math.pi))

    @pytest.mark.parametrize("s", [0.0, 1.0, -0.5])
    def test_rejects_s(self, s):
        with pytest.raises(QuadratureError):
            lambda_constant(2, s)


class TestDofMap:
    def test_interior_numbering(self, interval_mesh):
        dofmap = DofMap.from_mesh(interval_mesh)
        assert dofmap.n_dofs == 7
        assert list(dofmap.dof_to_vertex) == list(range(1, 8))
        assert dofmap.vertex_to_dof[0] == -1

    def test_extend_and_restrict(self, fine_lshape_mesh):
        dofmap = DofMap.from_mesh(fine_lshape_mesh)
        values = np.arange(1.0, dofmap.n_dofs + 1.0)
        nodal = dofmap.extend(values)
        assert nodal[sorted(fine_lshape_mesh.boundary_vertex_ids())].sum() == 0.0
        np.testing.assert_array_equal(dofmap.restrict(nodal), values)


class TestAssembly:
    def test_near_pairs_include_neighbours(self, fine_lshape_mesh):
        near = near_pairs(fine_lshape_mesh, 0.0)
        assert (near != near.T).nnz == 0
        assert all(near[k, k] for k in range(fine_lshape_mesh.n_elements))

    def test_symmetric_positive_definite(self, fine_lshape_mesh, small_config):
        system = assemble(fine_lshape_mesh, 0.5, config=small_config)
        assert system.n_dofs == 5
        assert system.symmetry_error() < 1e-12
        assert np.linalg.eigvalsh(system.matrix).min() > 0.0

    @pytest.mark.parametrize("s", [0.5, 0.75])
    def test_interval_large_s(self, interval_mesh, small_config, s):
        system = assemble(interval_mesh, s, config=small_config)
        assert system.n_dofs == 7
        assert np.all(np.isfinite(system.matrix))
        assert system.symmetry_error() < 1e-12
        assert np.linalg.eigvalsh(system.matrix).min() > 0.0

    def test_load_of_constant_source(self, interval_mesh, small_config):
        system = assemble(interval_mesh, 0.25, f="1", config=small_config)
        np.testing.assert_allclose(system.load, 0.25)

    def test_load_of_callable_source(self, interval_mesh, small_config):
        system = assemble(interval_mesh, 0.25, f=lambda x: 2.0 * np.ones(len(x)), config=small_config)
        np.testing.assert_allclose(system.load, 0.5)

    @pytest.mark.parametrize("s", [0.25, 0.75])
    def test_dilation_law_interval(self, interval_mesh, small_config, s):
        t = 2.0
        raw = assemble_bilinear(interval_mesh, s, small_config)
        scaled = assemble_bilinear(dilate(interval_mesh, t), s, small_config)
        np.testing.assert_allclose(scaled, t ** (1.0 - 2.0 * s) * raw, rtol=1e-9)

    def test_dilation_law_lshape(self, fine_lshape_mesh, small_config):
        t, s = 0.5, 0.5
        raw = assemble_bilinear(fine_lshape_mesh, s, small_config)
        scaled = assemble_bilinear(dilate(fine_lshape_mesh, t), s, small_config)
        np.testing.assert_allclose(scaled, t ** (2.0 - 2.0 * s) * raw, rtol=1e-8)

    def test_independent_of_worker_count(self, fine_lshape_mesh, small_config):
        serial = assemble_bilinear(fine_lshape_mesh, 0.5, small_config)
        parallel = assemble_bilinear(fine_lshape_mesh, 0.5, AssemblyConfig(
            quad_order=small_config.quad_order, far_order=small_config.far_order, max_workers=3,
            block_size=8, tail=small_config.tail))
        np.testing.assert_allclose(parallel, serial, rtol=1e-10, atol=1e-12 * np.abs(serial).max())

    def test_no_dofs(self, lshape_mesh, small_config):
        system = assemble(lshape_mesh, 0.5, config=small_config)
        assert system.n_dofs == 0
        assert system.matrix.shape == (0, 0)

    def test_memory_budget(self, fine_lshape_mesh):
        with pytest.raises(AssemblyError):
            assemble_bilinear(fine_lshape_mesh, 0.5, AssemblyConfig(memory_budget_mb=1e-9))

    def test_fingerprint(self, fine_lshape_mesh, small_config):
        system = assemble(fine_lshape_mesh, 0.5, config=small_config)
        assert system.fingerprint == fine_lshape_mesh.fingerprint
        assert system.source == "1"


class TestSystemDump:
    def test_dump_and_load(self, interval_mesh, small_config, tmp_path):
        system = assemble(interval_mesh, 0.5, config=small_config)
        path = str(tmp_path / "system.bin")
        dump_system(system, path)

        matrix, load, s, fingerprint = load_system(path)

        np.testing.assert_array_equal(matrix, system.matrix)
        np.testing.assert_array_equal(load, system.load)
        assert s == 0.5
        assert fingerprint == system.fingerprint

    def test_rejects_other_files(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"not a system dump")
        with pytest.raises(AssemblyError):
            load_system(str(path))

    def test_rejects_truncated_files(self, interval_mesh, small_config, tmp_path):
        system = assemble(interval_mesh, 0.5, config=small_config)
        path = tmp_path / "system.bin"
        dump_system(system, str(path))
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(AssemblyError):
            load_system(str(path))
