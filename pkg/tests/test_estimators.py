"""Monte Carlo estimators checked against closed forms and against each other"""

import math

import numpy as np
import pytest

import recmax.estimators as estimators_module
from recmax.estimators import (
    DIVERGENCE_SLOPE, EMPIRICAL_TOLERANCE, champion_survival, champion_survival_empirical, chi_bar,
    concurrence_empirical, concurrence_via_eta, concurrence_via_generator, default_checkpoints,
    expected_complete_records_exact, expected_N2, expected_records_growth, finiteness_criterion, norm_estimate,
    record_prob_maxstable_exact, second_record_df, simple_record_df_empirical, simple_record_limit,
    simple_record_limit_df, tail_slope,
)
from recmax.models import CopulaModel, DependenceModel, DimensionError, ModelError
from recmax.models.results import EstimationError
from recmax.samplers import sample_copulas

SEED = 20240611

PRODUCT_COMPLETE_10 = sum(1.0 / i ** 2 for i in range(1, 11))
HARMONIC_10 = sum(1.0 / i for i in range(1, 11))


def _joint_within(a, b, sigmas=4.0, slack=0.0):
    return abs(a.value - b.value) <= sigmas * math.hypot(a.std_error, b.std_error) + slack


def _uniform_generator(rng, n):
    return 2.0 * rng.random((n, 2))


class TestConcurrence:

    @pytest.mark.parametrize('model, expected', [
        (DependenceModel.logistic(2.0, 2), 0.5),
        (DependenceModel.logistic(2.0, 3), 0.375),
        (DependenceModel.marshall_olkin(0.5, 2), 1.0 / 3.0),
        (DependenceModel.bernoulli(0.5, 2), 1.0 / 3.0),
    ], ids=lambda v: getattr(v, 'descriptor', str(v)))
    def test_generator_route(self, model, expected):
        est = concurrence_via_generator(model, 100_000, SEED)
        assert est.within(expected)
        assert est.details['closed_form'] == pytest.approx(expected)

    def test_generator_route_degenerate_models(self):
        como = concurrence_via_generator(DependenceModel.comonotone(3), 1_000, SEED)
        assert como.value == 1.0 and como.std_error == 0.0
        indep = concurrence_via_generator(DependenceModel.independence(3), 1_000, SEED)
        assert indep.value == 0.0

    def test_bernoulli_reports_binomial_sum(self):
        est = concurrence_via_generator(DependenceModel.bernoulli(0.5, 2), 10_000, SEED)
        assert est.details['binomial_subset_sum'] == pytest.approx(4.0 / 3.0)
        assert abs(est.value - 4.0 / 3.0) > 0.5

    @pytest.mark.parametrize('model, expected', [
        (DependenceModel.logistic(2.0, 3), 0.375),
        (DependenceModel.bernoulli(0.5, 2), 1.0 / 3.0),
        (DependenceModel.marshall_olkin(0.3, 3), 0.3 / (0.3 + 3 * 0.7)),
    ], ids=lambda v: getattr(v, 'descriptor', str(v)))
    def test_eta_route(self, model, expected):
        est = concurrence_via_eta(model, 100_000, SEED)
        assert est.within(expected)
        assert est.bias_note is None

    @pytest.mark.parametrize('beta', [0.3, 0.5, 1.0])
    @pytest.mark.parametrize('d', [2, 3])
    def test_bernoulli_routes_match_closed_form(self, beta, d):
        model = DependenceModel.bernoulli(beta, d)
        expected = beta ** d / (1.0 - (1.0 - beta) ** d)
        gen = concurrence_via_generator(model, 50_000, SEED)
        eta = concurrence_via_eta(model, 50_000, SEED)
        emp = concurrence_empirical(CopulaModel.max_stable(model), 200, 10_000, SEED)
        assert gen.within(expected, slack=1e-12)
        assert eta.within(expected, slack=1e-12)
        assert emp.within(expected, slack=EMPIRICAL_TOLERANCE)

    def test_eta_route_independence_is_zero(self):
        est = concurrence_via_eta(DependenceModel.independence(2), 1_000, SEED)
        assert est.value == 0.0 and est.std_error == 0.0

    def test_routes_agree(self):
        model = DependenceModel.marshall_olkin(0.7, 2)
        gen = concurrence_via_generator(model, 50_000, SEED)
        eta = concurrence_via_eta(model, 50_000, SEED)
        emp = concurrence_empirical(CopulaModel.max_stable(model), 200, 20_000, SEED)
        assert _joint_within(gen, eta)
        assert _joint_within(gen, emp, slack=EMPIRICAL_TOLERANCE)

    def test_empirical_product_is_one_over_n(self):
        est = concurrence_empirical(CopulaModel.product(2), 5, 50_000, SEED)
        assert est.within(0.2)
        companion = est.details['n_times_complete_record_prob']
        assert abs(companion - 0.2) <= 4 * est.details['n_times_complete_record_prob_se']
        assert est.details['limit_closed_form'] == 0.0

    def test_empirical_gumbel_approaches_limit(self):
        est = concurrence_empirical(CopulaModel.gumbel(2.0, 2), 200, 20_000, SEED)
        assert est.within(0.5, slack=EMPIRICAL_TOLERANCE)

    def test_empirical_comonotone_always_has_champion(self):
        est = concurrence_empirical(CopulaModel.comonotone(2), 50, 1_000, SEED)
        assert est.value == 1.0

    def test_empirical_product_decreases_in_n(self):
        values = [concurrence_empirical(CopulaModel.product(2), n, 20_000, SEED).value for n in (10, 100)]
        assert values[0] > values[1]

    def test_empirical_needs_two_draws(self):
        with pytest.raises(ValueError):
            concurrence_empirical(CopulaModel.product(2), 1, 10, SEED)


class TestCompleteRecords:

    def test_first_draw_is_always_a_record(self):
        est = record_prob_maxstable_exact(DependenceModel.logistic(2.0, 3), 1, 10, SEED)
        assert est.value == 1.0 and est.std_error == 0.0

    def test_comonotone_record_probability(self):
        est = record_prob_maxstable_exact(DependenceModel.comonotone(2), 10, 100_000, SEED)
        assert est.within(0.1)

    def test_independence_record_probability(self):
        est = record_prob_maxstable_exact(DependenceModel.independence(2), 4, 100_000, SEED)
        assert est.within(1.0 / 16.0)

    def test_matches_empirical_complete_record_rate(self):
        model = DependenceModel.logistic(2.0, 2)
        exact = record_prob_maxstable_exact(model, 20, 100_000, SEED)
        emp = concurrence_empirical(CopulaModel.max_stable(model), 20, 40_000, SEED)
        # n times the complete-record probability of the last draw
        target = emp.details['n_times_complete_record_prob'] / 20
        se = emp.details['n_times_complete_record_prob_se'] / 20
        assert abs(exact.value - target) <= 4 * math.hypot(exact.std_error, se)

    def test_expected_complete_records(self):
        como = expected_complete_records_exact(DependenceModel.comonotone(2), 10, 100_000, SEED)
        assert como.within(HARMONIC_10)
        indep = expected_complete_records_exact(DependenceModel.independence(2), 10, 100_000, SEED)
        assert indep.within(PRODUCT_COMPLETE_10)
        assert indep.details['k'] == 10

    def test_simulated_counts_match_eta_identity(self):
        model = DependenceModel.logistic(2.0, 2)
        growth = expected_records_growth(CopulaModel.max_stable(model), 100, 4_000, SEED, checkpoints=[10, 100])
        for row in growth.rows:
            exact = expected_complete_records_exact(model, row['k'], 200_000, SEED)
            gap = abs(row['complete_mean'] - exact.value)
            assert gap <= 4 * math.hypot(row['complete_se'], exact.std_error), row['k']

    def test_rejects_bad_counts(self):
        with pytest.raises(ValueError):
            record_prob_maxstable_exact(DependenceModel.comonotone(2), 0, 10, SEED)
        with pytest.raises(ValueError):
            expected_complete_records_exact(DependenceModel.comonotone(2), 0, 10, SEED)


class TestRecordGrowth:

    def test_default_checkpoints(self):
        assert default_checkpoints(10_000) == [10, 100, 1_000, 10_000]
        assert default_checkpoints(50) == [10, 50]

    def test_product_counts(self):
        growth = expected_records_growth(CopulaModel.product(2), 10, 20_000, SEED, checkpoints=[1, 10])
        first, tenth = growth.rows
        assert first['simple_mean'] == 1.0 and first['complete_mean'] == 1.0
        assert 'simple_ratio' not in first
        simple = 2 * HARMONIC_10 - PRODUCT_COMPLETE_10
        assert abs(tenth['simple_mean'] - simple) <= 4 * tenth['simple_se']
        assert abs(tenth['complete_mean'] - PRODUCT_COMPLETE_10) <= 4 * tenth['complete_se']
        assert tenth['complete_ratio'] == pytest.approx(tenth['complete_mean'] / math.log(10))

    def test_comonotone_matches_univariate(self):
        growth = expected_records_growth(CopulaModel.comonotone(3), 100, 5_000, SEED)
        row = growth.rows[-1]
        assert row['k'] == 100
        assert row['simple_mean'] == row['complete_mean']
        harmonic = sum(1.0 / i for i in range(1, 101))
        assert abs(row['simple_mean'] - harmonic) <= 4 * row['simple_se']

    def test_checkpoints_must_fit(self):
        with pytest.raises(ValueError):
            expected_records_growth(CopulaModel.product(2), 10, 10, SEED, checkpoints=[20])


class TestSimpleRecords:

    def test_logistic_limit_routes(self):
        model = DependenceModel.logistic(2.0, 2)
        eta = simple_record_limit(model, 100_000, SEED)
        weibull = simple_record_limit(model, 100_000, SEED, route='weibull-generator')
        assert eta.within(1.5)
        assert weibull.within(1.5)
        assert _joint_within(eta, weibull)
        assert eta.details['closed_form'] == pytest.approx(1.5)

    def test_inclusion_exclusion_route(self):
        est = simple_record_limit(DependenceModel.logistic(4.0, 2), 100_000, SEED, route='generator-ie')
        assert est.within(1.25)

    def test_independence_limit(self):
        assert simple_record_limit(DependenceModel.independence(3), 100_000, SEED).within(3.0)

    def test_weibull_defaults_to_generator_route(self):
        model = DependenceModel.weibull(2.0, 2)
        est = simple_record_limit(model, 50_000, SEED)
        assert est.method.startswith('generator-ie')
        assert est.bias_note is None
        eta = simple_record_limit(model, 50_000, SEED, route='eta')
        assert eta.bias_note is not None
        assert _joint_within(est, eta)

    def test_route_validation(self):
        with pytest.raises(ValueError):
            simple_record_limit(DependenceModel.logistic(2.0, 2), 10, SEED, route='magic')
        with pytest.raises(ModelError):
            simple_record_limit(DependenceModel.marshall_olkin(0.5, 2), 10, SEED, route='weibull-generator')

    @pytest.mark.parametrize('model, x, expected', [
        (DependenceModel.independence(2), [-1.0, -2.0], (math.exp(-1) + math.exp(-2)) / 2),
        (DependenceModel.comonotone(2), [-0.7, -0.7], math.exp(-0.7)),
    ], ids=['sum-norm', 'max-norm'])
    def test_limit_df_special_cases(self, model, x, expected):
        est = simple_record_limit_df(model, x, 100_000, SEED)
        assert est.within(expected)

    def test_limit_df_at_zero_is_one(self):
        est = simple_record_limit_df(DependenceModel.logistic(2.0, 2), [0.0, 0.0], 10_000, SEED)
        assert est.value == pytest.approx(1.0)

    def test_limit_df_is_monotone(self):
        model = DependenceModel.logistic(2.0, 2)
        values = [simple_record_limit_df(model, [t, t], 20_000, SEED) for t in (-2.0, -1.0, -0.5)]
        for est in values:
            assert -4 * est.std_error <= est.value <= 1 + 4 * est.std_error
        assert values[0].value <= values[1].value + 4 * values[1].std_error
        assert values[1].value <= values[2].value + 4 * values[2].std_error

    def test_empirical_df_matches_limit(self):
        x = [-1.0, -2.0]
        est = simple_record_df_empirical(CopulaModel.product(2), x, 500, 10_000, SEED)
        expected = (math.exp(-1) + math.exp(-2)) / 2
        assert est.within(expected, slack=EMPIRICAL_TOLERANCE)
        assert est.details['conditioning_events'] > 10_000

    def test_points_must_be_nonpositive(self):
        with pytest.raises(ModelError):
            simple_record_limit_df(DependenceModel.logistic(2.0, 2), [0.5, -1.0], 10, SEED)
        with pytest.raises(DimensionError):
            simple_record_limit_df(DependenceModel.logistic(2.0, 2), [-1.0], 10, SEED)


class TestChampionSurvival:

    def test_marshall_olkin(self):
        est = champion_survival(DependenceModel.marshall_olkin(0.5, 2), [-1.0, -0.5], 100_000, SEED)
        expected = 1 - math.exp(-0.75)
        assert est.within(expected)
        gen = est.details['generator_route']
        assert abs(gen['value'] - expected) <= 4 * gen['std_error'] + 1e-9

    def test_comonotone(self):
        est = champion_survival(DependenceModel.comonotone(2), [-1.0, -1.0], 100_000, SEED)
        assert est.within(1 - math.exp(-1))

    def test_boundary_values(self):
        model = DependenceModel.logistic(2.0, 2)
        assert champion_survival(model, [0.0, 0.0], 5_000, SEED).value == pytest.approx(0.0)
        far = champion_survival(model, [-50.0, -50.0], 5_000, SEED)
        assert far.value == pytest.approx(1.0, abs=1e-6)

    def test_routes_agree_for_logistic(self):
        est = champion_survival(DependenceModel.logistic(2.0, 3), [-1.0, -0.5, -0.8], 50_000, SEED)
        eta, gen = est.details['eta_route'], est.details['generator_route']
        assert abs(eta['value'] - gen['value']) <= 4 * math.hypot(eta['std_error'], gen['std_error'])

    def test_weibull_uses_generator_route(self):
        est = champion_survival(DependenceModel.weibull(1.5, 2), [-1.0, -1.0], 20_000, SEED)
        assert est.method.startswith('generator')
        assert 0.0 <= est.value <= 1.0

    def test_independence_is_rejected(self):
        with pytest.raises(EstimationError):
            champion_survival(DependenceModel.independence(2), [-1.0, -1.0], 100, SEED)

    def test_empirical_matches_limit(self):
        copula = CopulaModel.max_stable(DependenceModel.marshall_olkin(0.5, 2))
        est = champion_survival_empirical(copula, [-1.0, -0.5], 500, 20_000, SEED)
        assert est.within(1 - math.exp(-0.75), slack=EMPIRICAL_TOLERANCE)

    def test_empirical_comonotone(self):
        est = champion_survival_empirical(CopulaModel.comonotone(2), [-1.0, -1.0], 200, 20_000, SEED)
        assert est.within(1 - math.exp(-1), slack=EMPIRICAL_TOLERANCE)
        assert est.details['conditioning_events'] == 20_000

    def test_empirical_without_champions(self):
        with pytest.raises(EstimationError):
            champion_survival_empirical(CopulaModel.product(3), [-1.0, -1.0, -1.0], 2_000, 5, 3)


class TestSecondRecordTime:

    def test_product_tail_and_mean(self):
        est = expected_N2(CopulaModel.product(2), 100_000, SEED, cap=1_000)
        assert est.divergence_flag is False
        assert est.method.startswith('integral')
        assert abs(est.value - (1 + math.pi ** 2 / 6)) <= 4 * est.std_error + 0.05
        tail = {row['k']: row for row in est.details['tail']}
        for k in (1, 2, 3, 5, 10, 20):
            p = 1.0 / k ** 2
            assert abs(tail[k]['p_exceed'] - p) <= 4 * math.sqrt(p * (1 - p) / 100_000)
        assert est.details['tail_slope'] < DIVERGENCE_SLOPE

    @pytest.mark.parametrize('copula', [CopulaModel.comonotone(2), CopulaModel.gumbel(2.0, 2)],
                             ids=lambda c: c.descriptor)
    def test_divergent_expectations_are_flagged(self, copula):
        est = expected_N2(copula, 20_000, SEED, cap=1_000)
        assert est.divergence_flag is True
        assert est.method.startswith('direct')
        assert est.value == est.details['truncated_mean']

    def test_without_closed_form_only_direct(self):
        est = expected_N2(CopulaModel.gaussian(0.3, 3), 5_000, SEED, cap=200)
        assert 'integral_route' not in est.details
        assert est.method.startswith('direct')
        assert est.divergence_flag is False

    def test_gaussian_mean_is_finite_despite_heavy_tail(self):
        # the fitted slope sits near the -1.3 threshold for strong correlation
        est = expected_N2(CopulaModel.gaussian(0.7, 2), 20_000, SEED, cap=1_000)
        assert est.divergence_flag is False
        assert est.method.startswith('integral')
        criterion = est.details['criterion']
        assert criterion['source'] == 'analytic'
        assert criterion['infinite_mean'] is False
        assert 'chi_bar' in criterion['reason']

    @pytest.mark.parametrize('copula, infinite', [
        (CopulaModel.comonotone(2), True),
        (CopulaModel.gumbel(2.0, 3), True),
        (CopulaModel.max_stable(DependenceModel.marshall_olkin(0.3, 2)), True),
        (CopulaModel.max_stable(DependenceModel.weibull(1.5, 2)), True),
        (CopulaModel.product(1), True),
        (CopulaModel.product(3), False),
        (CopulaModel.max_stable(DependenceModel.independence(2)), False),
        (CopulaModel.gaussian(-0.4, 2), False),
        (CopulaModel.gaussian(0.9, 4), False),
    ], ids=lambda v: v.descriptor if isinstance(v, CopulaModel) else str(v))
    def test_finiteness_criterion(self, copula, infinite):
        verdict, reason = finiteness_criterion(copula)
        assert verdict is infinite
        assert reason

    def test_custom_model_has_no_analytic_verdict(self):
        model = DependenceModel.custom(_uniform_generator, 2, bound=2.0)
        verdict, reason = finiteness_criterion(CopulaModel.max_stable(model))
        assert verdict is None
        assert 'no analytic' in reason

    def test_tail_slope_decides_without_verdict(self, monkeypatch):
        monkeypatch.setattr(estimators_module, 'finiteness_criterion', lambda c: (None, 'unknown'))
        est = expected_N2(CopulaModel.product(2), 100_000, SEED, cap=1_000)
        criterion = est.details['criterion']
        assert criterion['source'] == 'tail slope'
        assert criterion['slope_agrees'] is None
        assert criterion['slope_infinite_mean'] is False
        assert est.divergence_flag is False

    def test_slope_disagreement_is_reported(self, monkeypatch, caplog):
        monkeypatch.setattr(estimators_module, 'finiteness_criterion', lambda c: (True, 'forced'))
        with caplog.at_level('WARNING', logger='recmax.estimators'):
            est = expected_N2(CopulaModel.product(2), 100_000, SEED, cap=1_000)
        assert est.divergence_flag is True
        assert est.method.startswith('direct')
        assert est.details['criterion']['slope_agrees'] is False
        assert 'disagrees' in caplog.text

    def test_tail_slope(self):
        k = np.arange(1, 2_001)
        # exact 1/k^2 tail: #{gap >= k} = n / k^2
        n = 4_000_000
        counts = np.round(n / k ** 2.0).astype(int)
        gaps = np.repeat(k, counts - np.append(counts[1:], 0))
        slope, _, k_max = tail_slope(gaps, 2_000, n)
        assert slope == pytest.approx(-2.0, abs=0.05)
        assert k_max >= 20

    def test_tail_slope_needs_exceedances(self):
        slope, _, _ = tail_slope(np.ones(100, dtype=int), 1_000, 100)
        assert math.isnan(slope)


class TestChiBar:

    def test_comonotone_is_one(self):
        table = chi_bar(CopulaModel.comonotone(2), [0.5, 0.9], 20_000, SEED)
        for row in table.rows:
            assert row['chi_bar'] == pytest.approx(1.0)

    def test_product_is_zero(self):
        table = chi_bar(CopulaModel.product(2), [0.5, 0.8], 200_000, SEED)
        for row in table.rows:
            assert abs(row['chi_bar']) <= 4 * row['std_error']

    def test_gaussian_in_range(self):
        table = chi_bar(CopulaModel.gaussian(0.5, 2), [0.95], 200_000, SEED)
        row = table.rows[0]
        assert 0.2 < row['chi_bar'] < 0.8

    def test_data_source(self, rng):
        u = sample_copulas(CopulaModel.comonotone(3), rng, 5_000)
        table = chi_bar(u * 10.0, [0.5], pair=(0, 2))
        assert table.source == 'data'
        assert table.rows[0]['chi_bar'] == pytest.approx(1.0)

    def test_low_count_flag(self):
        table = chi_bar(CopulaModel.product(2), [0.99], 1_000, SEED)
        assert table.rows[0]['low_count'] is True

    def test_validation(self):
        with pytest.raises(ValueError):
            chi_bar(CopulaModel.product(2), [0.0, 0.5], 100, SEED)
        with pytest.raises(ValueError):
            chi_bar(CopulaModel.product(2), [0.5], 100, SEED, pair=(1, 1))
        with pytest.raises(DimensionError):
            chi_bar(CopulaModel.product(2), [0.5], 100, SEED, pair=(0, 2))


class TestSecondRecordDf:

    def test_comonotone_diagonal(self):
        est = second_record_df(CopulaModel.comonotone(2), [0.7, 0.7], 50_000, SEED)
        expected = 0.7 - 0.3 * math.log(1 / 0.3)
        assert est.within(expected)
        direct = est.details['direct_route']
        assert abs(direct['value'] - expected) <= 4 * direct['std_error']

    def test_product_routes_agree(self):
        est = second_record_df(CopulaModel.product(2), [0.8, 0.8], 50_000, SEED)
        direct = est.details['direct_route']
        assert abs(est.value - direct['value']) <= 4 * math.hypot(est.std_error, direct['std_error'])

    def test_upper_endpoint(self):
        est = second_record_df(CopulaModel.gumbel(2.0, 2), [1.0, 1.0], 5_000, SEED, cap=1_000)
        assert est.value == pytest.approx(1.0)

    def test_nested_route_is_labelled(self):
        est = second_record_df(CopulaModel.gaussian(0.3, 3), [0.8, 0.8, 0.8], 500, SEED, cap=1_000, inner=256)
        assert 'nested' in est.method
        assert 0.0 <= est.value <= 1.0


class TestReproducibility:

    def test_norm_estimate(self):
        model = DependenceModel.marshall_olkin(0.5, 2)
        est = norm_estimate(model, [1.0, 2.0], 100_000, SEED)
        assert est.within(2.5)
        assert est.details['closed_form'] == pytest.approx(2.5)

    def test_same_seed_same_value(self):
        model = DependenceModel.logistic(2.0, 2)
        a = concurrence_via_eta(model, 5_000, SEED)
        b = concurrence_via_eta(model, 5_000, SEED)
        c = concurrence_via_eta(model, 5_000, SEED + 1)
        assert a == b
        assert a.value != c.value

    def test_worker_count_does_not_change_values(self, monkeypatch):
        monkeypatch.setenv('RECMAX_CHUNK_SIZE', '1000')
        model = DependenceModel.marshall_olkin(0.5, 2)
        one = concurrence_via_generator(model, 5_000, SEED, workers=1)
        two = concurrence_via_generator(model, 5_000, SEED, workers=2)
        assert one.value == two.value and one.std_error == two.std_error
        grow_one = expected_records_growth(CopulaModel.product(2), 20, 3_000, SEED, workers=1)
        grow_two = expected_records_growth(CopulaModel.product(2), 20, 3_000, SEED, workers=3)
        assert grow_one.to_dict() == grow_two.to_dict()

    def test_standard_error_scaling(self):
        model = DependenceModel.marshall_olkin(0.5, 2)
        small = concurrence_via_eta(model, 10_000, SEED)
        large = concurrence_via_eta(model, 1_000_000, SEED)
        ratio = small.std_error / large.std_error
        assert 10 / 1.5 <= ratio <= 10 * 1.5


@pytest.mark.slow
class TestAcceptanceScale:

    @pytest.mark.parametrize('model', [
        DependenceModel.logistic(1.5, 2), DependenceModel.logistic(2.0, 3), DependenceModel.marshall_olkin(0.3, 2),
        DependenceModel.marshall_olkin(0.7, 3), DependenceModel.bernoulli(0.5, 3), DependenceModel.comonotone(2),
    ], ids=lambda m: m.descriptor)
    def test_concurrence_routes_agree(self, model):
        gen = concurrence_via_generator(model, 1_000_000, SEED)
        eta = concurrence_via_eta(model, 1_000_000, SEED)
        emp = concurrence_empirical(CopulaModel.max_stable(model), 1_000, 100_000, SEED)
        assert _joint_within(gen, eta)
        assert _joint_within(gen, emp, slack=EMPIRICAL_TOLERANCE)

    @pytest.mark.parametrize('beta', [0.3, 1.0])
    @pytest.mark.parametrize('d', [2, 3])
    def test_bernoulli_concurrence(self, beta, d):
        model = DependenceModel.bernoulli(beta, d)
        expected = beta ** d / (1.0 - (1.0 - beta) ** d)
        assert concurrence_via_generator(model, 1_000_000, SEED).within(expected, slack=1e-12)
        assert concurrence_via_eta(model, 1_000_000, SEED).within(expected, slack=1e-12)
        emp = concurrence_empirical(CopulaModel.max_stable(model), 1_000, 100_000, SEED)
        assert emp.within(expected, slack=EMPIRICAL_TOLERANCE)

    @pytest.mark.parametrize('k', [100, 1_000])
    def test_complete_record_count_at_scale(self, k):
        model = DependenceModel.logistic(2.0, 2)
        growth = expected_records_growth(CopulaModel.max_stable(model), k, 20_000, SEED, checkpoints=[k])
        row = growth.rows[0]
        exact = expected_complete_records_exact(model, k, 1_000_000, SEED)
        assert abs(row['complete_mean'] - exact.value) <= 4 * math.hypot(row['complete_se'], exact.std_error)

    def test_gumbel_concurrence_at_large_n(self):
        est = concurrence_empirical(CopulaModel.gumbel(2.0, 2), 1_000, 100_000, SEED)
        assert est.within(0.5, slack=EMPIRICAL_TOLERANCE)

    def test_univariate_growth_ratio(self):
        growth = expected_records_growth(CopulaModel.comonotone(1), 10_000, 2_000, SEED)
        row = growth.rows[-1]
        assert abs(row['simple_ratio'] - 1.0627) <= 4 * row['simple_ratio_se'] + 1e-3

    def test_gaussian_second_record_mean_is_finite(self):
        est = expected_N2(CopulaModel.gaussian(0.5, 2), 1_000_000, SEED, cap=1_000)
        assert est.divergence_flag is False

    def test_gaussian_chi_bar_at_high_level(self):
        table = chi_bar(CopulaModel.gaussian(0.5, 2), [0.999], 10_000_000, SEED)
        assert abs(table.rows[0]['chi_bar'] - 0.5) <= 0.15
