import math

import numpy as np
import pytest

from fraclap.core.assembly import DofMap
from fraclap.core.exceptions import ConfigError, MeshError, QuadratureError
from fraclap.core.sobolev.audits import (
    bbm_limit_check,
    distance_power_integral,
    distance_power_table,
    fit_slope,
    gradient_blowup,
    gradient_power_exact,
    gradient_power_integral,
    inradius,
    level_set_length,
    localization_audit,
    localization_study,
    regularity_blowup,
)
from fraclap.core.sobolev.constants import optimal_indices, scaling_constant
from fraclap.core.sobolev.models import ConstantModel, HatModel, LinearModel, PowerModel, model_registry
from fraclap.core.sobolev.seminorm import Region, SeminormQuery, evaluate, graded_partition, seminorm


class TestConstants:
    def test_quadratic_case(self):
        assert scaling_constant(0.5, 1, 2.0) == pytest.approx(1.0 / (2.0 * math.pi))

    def test_small_sigma_limit(self):
        sigma = 1e-6
        expected = 1.5 / (4.0 * math.pi)
        assert scaling_constant(sigma, 2, 1.5) / sigma == pytest.approx(expected, rel=1e-5)

    @pytest.mark.parametrize("sigma, p", [(0.0, 2.0), (1.0, 2.0), (0.5, 1.0)])
    def test_rejects(self, sigma, p):
        with pytest.raises(QuadratureError):
            scaling_constant(sigma, 2, p)

    def test_optimal_indices(self):
        indices = optimal_indices(2, 0.5, 0.1)
        assert indices.p == 1.0
        assert indices.r == pytest.approx(1.5)
        assert indices.lam == pytest.approx(0.0818182, rel=1e-5)
        assert indices.epsilon_bound == pytest.approx(0.05)
        assert indices.epsilon_max == pytest.approx(1.0 / 3.0)
        assert indices.rate == pytest.approx(-0.5)
        assert indices.admissible

    def test_optimal_indices_need_two_dimensions(self):
        with pytest.raises(ConfigError):
            optimal_indices(1, 0.5, 0.1)


class TestModels:
    def test_registry(self):
        model = model_registry.create("power", exponent=0.25)
        assert isinstance(model, PowerModel)
        assert model.describe()["exponent"] == 0.25
        assert "boundary_layer" in model_registry.available()

    def test_unknown_model(self):
        with pytest.raises(ConfigError):
            model_registry.create("sawtooth")

    def test_bad_parameters(self):
        with pytest.raises(ConfigError):
            model_registry.create("linear", gradient=2.0)

    def test_derivative_norm(self):
        assert LinearModel(slope=3.0).derivative_norm(2.0, 0.0, 1.0) == pytest.approx(3.0)


class TestIntervalSeminorm:
    def test_graded_partition(self):
        nodes = graded_partition(0.0, 1.0, [0.5], 3, 0.25)
        assert nodes[0] == 0.0 and nodes[-1] == 1.0
        assert 0.5 in nodes
        assert np.all(np.diff(nodes) > 0.0)
        assert nodes[1] == pytest.approx(0.25 * 0.25 ** 3)

    def test_partition_stops_at_float_resolution(self):
        nodes = graded_partition(0.0, 1.0, [0.5], 480, 0.25)
        widths = np.diff(nodes)
        assert widths.min() >= 0.5e-12
        assert 0.5 in nodes

    def test_kink_at_high_order(self):
        query = SeminormQuery(target=HatModel(), sigma=0.98, p=2.0, region=Region.interval(0.0, 1.0))
        result = evaluate(query)
        assert math.isfinite(result.integral)
        assert result.value > 0.0

    def test_linear_function(self):
        query = SeminormQuery(target=LinearModel(), sigma=0.5, p=2.0, region=Region.interval(0.0, 1.0))
        assert seminorm(query) == pytest.approx(1.0 / math.sqrt(2.0 * math.pi), rel=1e-8)

    def test_constant_function(self):
        query = SeminormQuery(target=ConstantModel(2.0), sigma=0.5, p=2.0, region=Region.interval(0.0, 1.0))
        assert seminorm(query) == pytest.approx(0.0, abs=1e-14)

    @pytest.mark.parametrize("sigma", [0.2, 0.3])
    def test_zero_extension_of_constant(self, sigma):
        query = SeminormQuery(target=ConstantModel(), sigma=sigma, p=2.0,
                              region=Region.interval(0.0, 1.0, zero_extension=True))
        expected = scaling_constant(sigma, 1, 2.0) * 2.0 / (sigma * (1.0 - 2.0 * sigma))
        assert evaluate(query).integral == pytest.approx(expected, rel=1e-6)

    def test_query_validation(self):
        with pytest.raises(QuadratureError):
            SeminormQuery(target=LinearModel(), sigma=0.5, p=2.0, region=Region.interval(1.0, 0.0))
        with pytest.raises(QuadratureError):
            SeminormQuery(target=LinearModel(dim=2), sigma=0.5, p=2.0, region=Region.interval(0.0, 1.0))
        with pytest.raises(QuadratureError):
            SeminormQuery(target=LinearModel(), sigma=0.5, p=2.0, region=Region.interval(0.0, 1.0), derivative=2)


class TestMeshSeminorm:
    def test_nodal_values_match_model(self, square_mesh):
        model = LinearModel(slope=2.0, intercept=1.0, dim=2)
        nodal = model(square_mesh.vertices)
        by_model = evaluate(SeminormQuery(target=model, sigma=0.4, p=2.0, region=Region.interval(0.0, 1.0),
                                          mesh=square_mesh, order=4))
        by_nodes = evaluate(SeminormQuery(target=nodal, sigma=0.4, p=2.0, region=Region.interval(0.0, 1.0),
                                          mesh=square_mesh, order=4))
        assert by_model.integral > 0.0
        assert by_nodes.integral == pytest.approx(by_model.integral, rel=1e-8)

    def test_gradient_of_linear_function(self, square_mesh):
        nodal = 3.0 * square_mesh.vertices[:, 1]
        query = SeminormQuery(target=nodal, sigma=0.5, p=1.5, region=Region.interval(0.0, 1.0),
                              mesh=square_mesh, derivative=1, order=3)
        assert seminorm(query) == pytest.approx(0.0, abs=1e-12)

    def test_nodal_length(self, square_mesh):
        with pytest.raises(QuadratureError):
            SeminormQuery(target=np.zeros(3), sigma=0.5, p=2.0, region=Region.ring(()), mesh=square_mesh)


class TestStudies:
    def test_fit_slope(self):
        assert fit_slope([1.0, 2.0, 4.0], [3.0, 12.0, 48.0]) == pytest.approx(2.0)
        assert fit_slope([1.0, 2.0], [3.0, float("nan")]) is None

    def test_bbm_limit(self):
        rows = bbm_limit_check(LinearModel())
        ratios = [row.ratio for row in rows]
        assert all(a < b for a, b in zip(ratios, ratios[1:]))
        assert ratios[1] == pytest.approx(0.8289, rel=2e-2)
        assert ratios[-1] > 0.9

    def test_bbm_hat(self):
        rows = bbm_limit_check(HatModel(), 2.0)
        assert [row.epsilon for row in rows] == [0.2, 0.1, 0.05, 0.02]
        assert all(math.isfinite(row.ratio) for row in rows)
        assert abs(rows[-1].ratio - 1.0) <= 0.1

    def test_bbm_constant(self):
        rows = bbm_limit_check(ConstantModel(), epsilons=(0.2,))
        assert math.isnan(rows[0].ratio)

    @pytest.mark.parametrize("s, p", [(0.5, 1.5), (0.5, 1.9), (0.25, 1.2)])
    def test_gradient_integral(self, s, p):
        assert gradient_power_integral(s, p) == pytest.approx(gradient_power_exact(s, p), rel=1e-6)

    def test_gradient_integrability(self):
        with pytest.raises(ConfigError):
            gradient_power_integral(0.5, 2.0)

    def test_gradient_blowup_slope(self):
        table = gradient_blowup(0.5)
        assert [row.factor for row in table.rows] == pytest.approx([4.0, 10.0, 20.0, 40.0])
        assert 0.9 < table.slope < 1.1

    def test_distance_power(self, unit_square):
        assert inradius(unit_square) == pytest.approx(0.5, rel=1e-5)
        assert level_set_length(unit_square, 0.25) == pytest.approx(2.0)
        assert level_set_length(unit_square, 0.6) == 0.0
        assert distance_power_integral(unit_square, 0.5) == pytest.approx(3.77124, rel=1e-5)

    def test_distance_power_interval(self, interval):
        assert distance_power_integral(interval, 0.5) == pytest.approx(4.0)

    def test_distance_power_table(self, unit_square):
        table = distance_power_table(unit_square, (0.5,))
        value, scaled = table[0.5]
        assert scaled == pytest.approx(0.5 * value)

    def test_distance_power_rejects_alpha(self, unit_square):
        with pytest.raises(ConfigError):
            distance_power_integral(unit_square, 1.0)

    def test_regularity_grid(self):
        with pytest.raises(ConfigError):
            regularity_blowup(s=0.25, r_grid=(0.8,))

    @pytest.mark.slow
    def test_regularity_blowup(self):
        table = regularity_blowup(s=0.25, r_grid=(0.55, 0.65, 0.70, 0.73))
        values = [row.value for row in table.rows if row.converged]

        assert not table.partial
        assert len(values) == 4
        assert all(a < b for a, b in zip(values, values[1:]))
        assert 0.8 <= table.slope <= 1.2


class TestLocalization:
    def test_terms(self, fine_lshape_mesh, small_config):
        nodal = DofMap.from_mesh(fine_lshape_mesh).extend(np.ones(5))

        result = localization_audit(fine_lshape_mesh, nodal, 0.5, small_config)

        assert result.lhs > 0.0
        assert result.patch > 0.0
        assert result.zero_order > 0.0
        assert not result.flagged
        assert result.rhs == pytest.approx(result.patch + result.zero_order)

    def test_boundary_values_must_vanish(self, fine_lshape_mesh, small_config):
        with pytest.raises(MeshError):
            localization_audit(fine_lshape_mesh, np.ones(fine_lshape_mesh.n_vertices), 0.5, small_config)

    def test_study(self, fine_lshape_mesh, small_config):
        study = localization_study(fine_lshape_mesh, 0.5, levels=2, samples=3, sweeps=1, config=small_config)

        assert study.levels[0] == 24
        assert study.levels[1] > 24
        assert all(len(r) == 3 for r in study.ratios)
        assert study.violations == 0
        assert study.spread >= 1.0
