import math

import pytest
from unittest.mock import Mock

from fraclap.core.adapt import (
    GreedyStop,
    PracticalMarking,
    equidistribution_ratio,
    grading_statistics,
    greedy,
    practical_indicators,
    theta_schedule,
)
from fraclap.core.adapt.greedy import TRACE_COLUMNS
from fraclap.core.exceptions import ConfigError, MeshError
from fraclap.core.utils.tables import read_table


@pytest.fixture
def mark_all():
    """Strategy that marks every element."""
    strategy = Mock()
    strategy.get_strategy_name.return_value = "all"
    strategy.parameter.return_value = 2.0
    strategy.mark.side_effect = lambda mesh, j: set(mesh.element_ids())
    return strategy


@pytest.fixture
def mark_none():
    strategy = Mock()
    strategy.get_strategy_name.return_value = "none"
    strategy.parameter.return_value = 2.0
    strategy.mark.return_value = set()
    return strategy


class TestGreedyStop:
    def test_requires_a_bound(self):
        with pytest.raises(ConfigError):
            GreedyStop()

    def test_single_bound(self):
        assert GreedyStop(time_max=10.0).time_max == 10.0


class TestGreedy:
    def test_iteration_bound(self, lshape_mesh, mark_all):
        meshes, trace = greedy(lshape_mesh, mark_all, GreedyStop(max_iterations=2))

        assert len(meshes) == 3
        assert trace.stopped_by == "max_iterations"
        assert trace.strategy == "all"
        assert [r.j for r in trace.records] == [0, 1, 2]
        assert trace.records[-1].n_marked == 0
        assert trace.records[-1].n_elements == meshes[-1].n_elements
        assert trace.is_consistent()
        assert trace.lambda0 >= 1.0

    def test_meshes_are_nested(self, lshape_mesh, mark_all):
        meshes, _ = greedy(lshape_mesh, mark_all, GreedyStop(max_iterations=2))
        for coarse, fine in zip(meshes, meshes[1:]):
            assert fine.is_refinement_of(coarse)
            assert fine.is_conforming()
            assert fine.n_elements > coarse.n_elements

    def test_element_bound(self, lshape_mesh):
        meshes, trace = greedy(lshape_mesh, PracticalMarking(theta=2.0), GreedyStop(max_elements=60))
        assert trace.stopped_by in ("max_elements", "empty_marking")
        assert all(m.n_elements < 60 for m in meshes[:-1])
        assert trace.is_consistent()

    def test_empty_marking(self, lshape_mesh, mark_none):
        meshes, trace = greedy(lshape_mesh, mark_none, GreedyStop(max_iterations=5))
        assert meshes == [lshape_mesh]
        assert trace.stopped_by == "empty_marking"
        assert len(trace.records) == 1
        assert trace.lambda0 is None

    def test_hard_cap(self, lshape_mesh, mark_all):
        with pytest.raises(MeshError):
            greedy(lshape_mesh, mark_all, GreedyStop(max_iterations=3), hard_cap=7)

    def test_unknown_marked_element(self, lshape_mesh):
        strategy = Mock()
        strategy.get_strategy_name.return_value = "broken"
        strategy.parameter.return_value = 2.0
        strategy.mark.return_value = {999}
        with pytest.raises(MeshError):
            greedy(lshape_mesh, strategy, GreedyStop(max_iterations=1))

    def test_trace_csv(self, lshape_mesh, mark_all, tmp_path):
        _, trace = greedy(lshape_mesh, mark_all, GreedyStop(max_iterations=1))
        path = trace.write_csv(str(tmp_path / "greedy.csv"), {"theta": 2.0})

        metadata, rows = read_table(path)

        assert metadata["strategy"] == "all"
        assert metadata["stopped_by"] == "max_iterations"
        assert metadata["theta"] == "2"
        assert tuple(rows[0]) == TRACE_COLUMNS
        assert rows[0]["lambda0"] == ""
        assert float(rows[0]["seconds"]) == 0.0
        assert int(rows[1]["n_elements"]) > int(rows[0]["n_elements"])


class TestLambdaExplosion:
    def test_flat_sequence(self, lshape_mesh, mark_all):
        _, trace = greedy(lshape_mesh, mark_all, GreedyStop(max_iterations=2))
        assert not trace.lambda0_exploded(after=0)


class TestGradingDiagnostics:
    def test_uniform_mesh(self, fine_lshape_mesh):
        stats = grading_statistics(fine_lshape_mesh)
        assert len(stats.bands) == 8
        assert sum(count for _, _, count, _ in stats.bands) <= fine_lshape_mesh.n_elements
        assert stats.monotone
        assert math.isnan(stats.ratio)

    def test_equidistribution_matches_indicators(self, fine_lshape_mesh):
        ratio = equidistribution_ratio(fine_lshape_mesh, 2.0)
        assert ratio == pytest.approx(max(i.value for i in practical_indicators(fine_lshape_mesh, 2.0)))

    def test_equidistribution_without_marking(self, fine_lshape_mesh):
        assert equidistribution_ratio(fine_lshape_mesh, 1e6) <= 1.0


class TestThetaSchedule:
    def test_values(self):
        assert theta_schedule([3, "2.5"]) == [3.0, 2.5]

    @pytest.mark.parametrize("values", [[], [2.0, 1.0]])
    def test_rejects(self, values):
        with pytest.raises(ConfigError):
            theta_schedule(values)


@pytest.mark.slow
class TestBisectionComplexity:
    @pytest.mark.parametrize("mesh_fixture, cap", [("lshape_mesh", 8000), ("interval_mesh", 2000)])
    def test_lambda0_stays_bounded(self, request, mesh_fixture, cap):
        mesh0 = request.getfixturevalue(mesh_fixture)
        _, trace = greedy(mesh0, PracticalMarking(theta=2.0), GreedyStop(max_elements=cap))

        assert trace.lambda0 is not None
        assert trace.lambda0 <= 50.0
        assert not trace.lambda0_exploded(after=5, factor=2.0)
