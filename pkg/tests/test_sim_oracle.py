import math

import numpy as np
import pytest

from backend.chain_core import validate_chain
from backend.errors import CapExceeded, DegenerateVariance, InvalidArgument, KindMismatch, KindOther
from backend.exact_field import SQRT2, QSqrt2
from backend.lattice_classify import LatticeKind
from backend.observable_decomp import build_observable
from backend.path_sampler import PathSampler, block_stream
from backend.sim_oracle import (SimConfig, build_instance, characteristic_function, clt_check,
                                distribution_from_samples, empirical_distribution, evaluate_path,
                                exact_distribution, llt_check, llt_trend, sample_S_N)
from backend.variance_engine import covariance_from_samples
from tests.helpers import STICKY, make_instance


@pytest.fixture
def sqrt2_instance():
    chain = validate_chain([["1/3"] * 3] * 3, [0, 1, 2])
    floats = [0.0, 1.0, SQRT2] * 3
    return build_instance(chain, build_observable(2, floats, chain, ["0", "1", ["0", "1"]] * 3))


def _law(dist):
    return dict(zip(dist.support.tolist(), dist.mass.tolist()))


def test_exact_law_of_one_step(instance_a):
    law = exact_distribution(instance_a, 1)
    assert _law(law) == pytest.approx({-2.0: 0.25, 0.0: 0.5, 2.0: 0.25})
    assert law.exact_support == tuple(QSqrt2.coerce(v) for v in (-2, 0, 2))


def test_exact_law_of_two_steps(instance_a):
    # S_2 = xi_1 + 2 xi_2 + xi_4
    law = exact_distribution(instance_a, 2)
    assert _law(law) == pytest.approx({-4.0: 0.125, -2.0: 0.25, 0.0: 0.25, 2.0: 0.25, 4.0: 0.125})
    assert law.mass.sum() == pytest.approx(1.0, abs=1e-14)


def test_float_and_exact_enumeration_agree(instance_b):
    floats = make_instance(STICKY, lambda x, y: x + y, 2, exact=False)
    assert exact_distribution(floats, 3).total_variation(exact_distribution(instance_b, 3)) < 1e-12


def test_zero_observable_is_a_point_mass(zero_instance):
    law = exact_distribution(zero_instance, 3)
    assert _law(law) == pytest.approx({0.0: 1.0})


def test_enumeration_cap(instance_a):
    with pytest.raises(CapExceeded, match="NLLT_MAX_ENUM"):
        exact_distribution(instance_a, 20)
    with pytest.raises(CapExceeded):
        exact_distribution(instance_a, 2, max_enum=16)


def test_evaluate_path_sums_the_right_coordinates(instance_b):
    total, comps = evaluate_path(instance_b, [1, 1, 1, 0, 1])
    assert total == 4.0
    np.testing.assert_allclose(comps, [2.0, 2.0])

    total, comps = evaluate_path(instance_b, [0, 1, 0, 1, 1])
    assert total == pytest.approx(1 + 2 * -1 + 1)
    assert comps.sum() == pytest.approx(total)


def test_evaluate_path_rejects_bad_paths(instance_b):
    with pytest.raises(InvalidArgument):
        evaluate_path(instance_b, [0, 1, 0, 1])
    with pytest.raises(InvalidArgument):
        evaluate_path(instance_b, [0, 1, 5])


def test_single_draw(instance_b):
    total, comps = sample_S_N(instance_b, 8, block_stream(3, 0))
    assert total == pytest.approx(comps.sum())
    assert total % 2 == 0


def test_samples_do_not_depend_on_worker_count(instance_b):
    one = PathSampler(instance_b, workers=1, block_size=256).sample(16, 2000, 42)
    three = PathSampler(instance_b, workers=3, block_size=256).sample(16, 2000, 42)
    np.testing.assert_array_equal(one[0], three[0])
    np.testing.assert_array_equal(one[1], three[1])

    other = PathSampler(instance_b, workers=1, block_size=256).sample(16, 2000, 43)
    assert not np.array_equal(one[0], other[0])


def test_sim_config_validation():
    SimConfig(10, 10, 0)
    with pytest.raises(InvalidArgument):
        SimConfig(10, 10, 0, workers=0)
    with pytest.raises(InvalidArgument):
        SimConfig(10, 10, 2 ** 64)
    with pytest.raises(InvalidArgument):
        SimConfig(0, 10, 0)
    with pytest.raises(InvalidArgument):
        SimConfig(10, 0, 0)
    with pytest.raises(InvalidArgument):
        SimConfig(10, 10, -1)


def test_sim_config_draws_the_sampler_paths(instance_b):
    totals, comps = SimConfig(8, 1500, 6, workers=2).draw(instance_b)
    expected = PathSampler(instance_b, workers=1).sample(8, 1500, 6)
    np.testing.assert_array_equal(totals, expected[0])
    np.testing.assert_array_equal(comps, expected[1])
    law = empirical_distribution(instance_b, 8, 1500, 6, workers=3)
    assert law.total_variation(distribution_from_samples(instance_b, totals)) == 0.0


def test_empirical_law_is_close_to_the_exact_law(instance_b):
    empirical = empirical_distribution(instance_b, 6, 20000, 9, workers=2)
    assert empirical.sample_count == 20000
    assert empirical.mass.sum() == pytest.approx(1.0)
    assert empirical.total_variation(exact_distribution(instance_b, 6)) < 0.03


def test_single_sample_is_a_point_mass(instance_a):
    empirical = empirical_distribution(instance_a, 4, 1, 0, workers=1)
    assert empirical.mass.tolist() == [1.0]
    assert empirical.stderr.tolist() == [0.0]


def test_off_lattice_samples_are_rejected(instance_a):
    with pytest.raises(KindMismatch):
        distribution_from_samples(instance_a, np.array([0.0, 1.0]))


@pytest.mark.slow
@pytest.mark.parametrize("fixture", ["instance_a", "instance_b"])
@pytest.mark.parametrize("N", [2, 5])
def test_empirical_law_with_a_million_samples(fixture, N, request):
    instance = request.getfixturevalue(fixture)
    empirical = empirical_distribution(instance, N, 10 ** 6, 2024)
    assert empirical.total_variation(exact_distribution(instance, N)) <= 0.005


def test_characteristic_function_of_one_step(instance_a):
    cf = characteristic_function(instance_a, 1, [0.0, 1.0, -1.0])
    assert cf.phi_values[0, 0] == 1.0
    assert cf.phi_values[0, 1] == pytest.approx(math.cos(1.0) ** 2, abs=1e-14)
    assert cf.phi_values[0, 2] == pytest.approx(np.conj(cf.phi_values[0, 1]), abs=1e-14)


def test_characteristic_function_periodicity(instance_b):
    cf = characteristic_function(instance_b, [2, 3, 4], np.linspace(0.1, 1.5, 8))
    assert cf.phi_values.shape == (3, 8)
    assert cf.periodicity_error < 1e-10
    assert np.all(np.abs(cf.phi_values) <= 1.0 + 1e-12)


def test_characteristic_function_modes(instance_a):
    with pytest.raises(InvalidArgument):
        characteristic_function(instance_a, 2, [0.5], mode="fft")
    with pytest.raises(InvalidArgument):
        characteristic_function(instance_a, 2, [0.5], mode="monte_carlo")
    cf = characteristic_function(instance_a, 2, [0.0, 0.5], mode="monte_carlo", M=5000, seed=1, workers=1)
    assert cf.phi_values[0, 0] == 1.0
    assert cf.periodicity_error is None
    assert cf.sample_count == 5000
    exact = characteristic_function(instance_a, 2, [0.5]).phi_values[0, 0]
    assert abs(cf.phi_values[0, 1] - exact) < 0.05


def test_clt_of_a_point_mass(zero_instance):
    report = clt_check(zero_instance, 16, 500, 1, 1.0, workers=1)
    assert report.statistic == pytest.approx(0.5)


def test_clt_needs_positive_variance(zero_instance):
    with pytest.raises(DegenerateVariance):
        clt_check(zero_instance, 16, 500, 1, 0.0)


def test_clt_of_simple_random_walk(coin_walk):
    report = clt_check(coin_walk, 256, 4000, 5, 1.0, workers=1)
    # half of the atom at zero sits inside the statistic on a lattice
    assert report.statistic < 0.06
    assert report.M == 4000


@pytest.mark.slow
def test_central_limit_at_full_scale(instance_a):
    N, M, seed = 2 ** 10, 10 ** 5, 2718
    totals, comps = PathSampler(instance_a).sample(N, M, seed)
    cov = covariance_from_samples(totals, comps, N, seed)
    assert clt_check(instance_a, N, M, seed, 3.0, samples=totals).statistic <= 0.02
    assert clt_check(instance_a, N, M, seed, cov.sigma2_hat, samples=totals).statistic <= 0.02

    # S_{1,N} and S_{2,N} share the N/2 even-indexed coordinates
    expected = np.array([[1.0, 0.5], [0.5, 0.5]])
    assert np.all(np.abs(cov.D - expected) <= 3.0 * cov.D_stderr)
    assert cov.reconciles
    assert abs(cov.total - cov.sigma2_hat) <= 3.0 * cov.sigma2_stderr


def test_lattice_local_limit(instance_a):
    report = llt_check(instance_a, 64, 20000, 17, 3.0, workers=2)
    assert report.kind is LatticeKind.LATTICE
    assert report.h == 2.0
    assert report.u.size == 27
    assert np.all(np.mod(report.u, 2.0) == 0.0)
    assert report.R.max() == pytest.approx(2.0)
    assert report.max_deviation < 0.35
    assert report.bias_share == max(0.0, report.max_deviation - report.noise_share)


def test_local_limit_undefined_for_other(product_instance):
    with pytest.raises(KindOther):
        llt_check(product_instance, 8, 100, 1, 1.0)


def test_local_limit_needs_positive_variance(instance_a):
    with pytest.raises(DegenerateVariance):
        llt_check(instance_a, 8, 100, 1, 0.0)


def test_non_lattice_local_limit_uses_the_triangle(sqrt2_instance):
    assert sqrt2_instance.lattice.kind is LatticeKind.NON_LATTICE
    report = llt_check(sqrt2_instance, 16, 2000, 4, 1.0, workers=1)
    assert report.u.size == 41
    assert report.half_width == 0.5
    assert report.R[20] == pytest.approx(0.5)
    assert report.u[0] == pytest.approx(-8.0) and report.u[-1] == pytest.approx(8.0)
    assert np.all(report.L >= 0.0)


@pytest.mark.slow
def test_lattice_local_limit_bias_shrinks(instance_a):
    trend = llt_trend(instance_a, [64, 256, 1024], 10 ** 6, 99, 3.0)
    assert trend.non_increasing
    at_256 = trend.reports[1]
    assert at_256.max_deviation <= 0.1
    assert at_256.noise_share <= 0.05
