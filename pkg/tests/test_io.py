import numpy as np
import pytest

from fraclap.core.exceptions import MeshError, NonConformingMeshError
from fraclap.core.mesh import refine
from fraclap.core.mesh.io import format_mesh, load_mesh, parse_mesh, save_mesh

HANGING_NODE = """2 5 3
0 0
1 0
1 1
0 1
0.5 0.5
0 1 2 0 0
0 4 3 0 0
4 2 3 0 0
"""


class TestMeshFiles:
    def test_header(self, lshape_mesh):
        first = format_mesh(lshape_mesh).splitlines()[0]
        assert first == "2 8 6"

    def test_save_and_load(self, fine_lshape_mesh, tmp_path):
        mesh = refine(fine_lshape_mesh, fine_lshape_mesh.element_ids()[:3])
        path = save_mesh(mesh, tmp_path / "meshes" / "mesh.txt")

        loaded = load_mesh(path)

        assert loaded.n_elements == mesh.n_elements
        np.testing.assert_array_equal(loaded.vertices, mesh.vertices)
        assert loaded.domain.area == pytest.approx(3.0)
        assert loaded.is_conforming()
        assert loaded.lineage == ()

    def test_loaded_interval(self, interval_mesh, tmp_path):
        loaded = load_mesh(save_mesh(interval_mesh, tmp_path / "interval.txt"))
        assert loaded.dim == 1
        assert loaded.domain.vertices == ((-1.0,), (1.0,))

    def test_generations_survive(self, fine_lshape_mesh, tmp_path):
        mesh = refine(fine_lshape_mesh, fine_lshape_mesh.element_ids()[:1])
        loaded = load_mesh(save_mesh(mesh, tmp_path / "mesh.txt"))
        assert sorted(e.generation for e in loaded.elements.values()) == \
            sorted(e.generation for e in mesh.elements.values())

    def test_missing_file(self, tmp_path):
        with pytest.raises(MeshError):
            load_mesh(tmp_path / "nothing.txt")

    @pytest.mark.parametrize("text", [
        "",
        "3 1 1\n0 0 0\n0 0 0 0 0\n",
        "2 3 1\n0 0\n1 0\n",
        "2 3 1\n0 0\n1 0\n0 1\n0 1 7 0 0\n",
        "2 3 1\n0 0\n1 0\n0 1\n0 1 2 5 0\n",
        "2 3 1\n0 0\n1 nan\n0 1\n0 1 2 0 0\n",
        "2 3 1\n0 0\n1 0\n0 1\n0 1 b 0 0\n",
    ])
    def test_malformed(self, text):
        with pytest.raises(MeshError):
            parse_mesh(text)

    def test_hanging_node_is_reported(self, unit_square):
        with pytest.raises(NonConformingMeshError) as info:
            parse_mesh(HANGING_NODE, domain=unit_square)
        assert info.value.edge == (0, 2)

    def test_hanging_node_without_domain(self):
        with pytest.raises(NonConformingMeshError) as info:
            parse_mesh(HANGING_NODE)
        assert info.value.edge is not None

    def test_unvalidated_load(self, unit_square):
        mesh = parse_mesh(HANGING_NODE, domain=unit_square, validate=False)
        assert mesh.n_elements == 3
