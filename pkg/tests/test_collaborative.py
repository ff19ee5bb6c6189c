import numpy as np
import pytest

from twrbf.collaborative import (
    CollabInstance,
    build_collab_forms,
    collab_beamformer,
    collab_constraints,
    collab_initial_vertex,
    collab_maxmin,
    collab_utility_maximize,
)
from twrbf.errors import DimensionError, DomainError
from twrbf.model import generate_channels, relay_power_of_A, sinr_of_A
from twrbf.solvers.monotonic import maximize_utility
from twrbf.solvers.rounding import usage
from twrbf.util import complex_normal, make_rng
from twrbf.utility import Utility


def scalar_collab(budget=3.0):
    return CollabInstance(
        channels=[[1.0], [1.0]],
        user_powers=1.0,
        relay_noise=1.0,
        user_noise=1.0,
        relay_budgets=budget,
        sinr_targets=1.0,
    )


def random_collab(seed, pairs=1, relays=3, snr_db=10.0):
    return CollabInstance.from_snr_db(generate_channels(seed, pairs, relays), snr_db)


class TestInstance:
    def test_from_snr_db_splits_budget(self):
        inst = random_collab(0, relays=4)
        np.testing.assert_allclose(inst.relay_budgets, np.full(4, 2.5))
        assert inst.total_budget == pytest.approx(10.0)

    def test_rejects_nonpositive(self):
        with pytest.raises(DomainError):
            CollabInstance([[1.0], [1.0]], 1.0, 1.0, 1.0, 0.0, 1.0)

    def test_rejects_odd_users(self):
        with pytest.raises(DimensionError):
            CollabInstance([[1.0]], 1.0, 1.0, 1.0, 1.0, 1.0)

    def test_as_system(self):
        inst = random_collab(1)
        system = inst.as_system()
        np.testing.assert_allclose(system.relay_noise, np.eye(3))
        assert system.power_budget == pytest.approx(inst.total_budget)


class TestForms:
    @pytest.mark.parametrize("seed", range(5))
    def test_match_diagonal_relay(self, seed):
        inst = random_collab(seed, pairs=2, relays=3)
        forms = build_collab_forms(inst)
        gains = complex_normal(make_rng(seed + 1), 3)
        a = collab_beamformer(gains)
        np.testing.assert_allclose(
            forms.ratios_of_vector(gains),
            sinr_of_A(inst.as_system(), a),
            rtol=1e-9,
        )

    def test_per_relay_power(self):
        inst = random_collab(3)
        forms = build_collab_forms(inst)
        gains = complex_normal(make_rng(0), 3)
        x = np.outer(gains, gains.conj())
        per_relay = forms.powers(x)
        np.testing.assert_allclose(per_relay, inst.thetas * np.abs(gains) ** 2)
        assert np.sum(per_relay) == pytest.approx(
            relay_power_of_A(inst.as_system(), collab_beamformer(gains))
        )

    def test_power_form_shape(self):
        forms = build_collab_forms(random_collab(4))
        for m, e in enumerate(forms.power):
            assert np.count_nonzero(e) == 1
            assert e[m, m].real > 0

    def test_single_relay_is_scalar_case(self):
        forms = build_collab_forms(scalar_collab())
        np.testing.assert_allclose(forms.power[0], [[3.0]])


class TestMaxMin:
    def test_single_relay(self):
        res = collab_maxmin(scalar_collab())
        assert res.lambda_opt == pytest.approx(0.5, abs=1e-6)

    def test_symmetric_relays(self):
        inst = CollabInstance(
            channels=np.ones((2, 2)),
            user_powers=1.0,
            relay_noise=1.0,
            user_noise=1.0,
            relay_budgets=1.0,
            sinr_targets=1.0,
        )
        res = collab_maxmin(inst)
        gains = res.rounded[0]
        assert abs(gains[0]) == pytest.approx(abs(gains[1]), rel=1e-4)

    @pytest.mark.parametrize("seed", range(3))
    def test_halved_budgets(self, seed):
        inst = random_collab(seed)
        half = CollabInstance(
            inst.channels,
            inst.user_powers,
            inst.relay_noise,
            inst.user_noise,
            inst.relay_budgets / 2,
            inst.sinr_targets,
        )
        assert collab_maxmin(half).lambda_opt < collab_maxmin(inst).lambda_opt

    @pytest.mark.parametrize("seed", range(3))
    def test_rounded_respects_every_budget(self, seed):
        inst = random_collab(seed, pairs=2)
        res = collab_maxmin(inst)
        forms = build_collab_forms(inst)
        u = usage(res.rounded[0], collab_constraints(inst, forms))
        assert np.all(u <= 1 + 1e-9)
        assert np.max(u) == pytest.approx(1.0)


class TestUtility:
    @pytest.mark.parametrize("seed", range(3))
    def test_initial_vertex_dominates(self, seed):
        inst = random_collab(seed, pairs=2)
        forms = build_collab_forms(inst)
        d = collab_initial_vertex(inst)
        d_total = collab_initial_vertex(inst, total_budget=True)
        rng = make_rng(seed)
        for _ in range(100):
            gains = complex_normal(rng, 3)
            # Full individual budgets.
            gains *= np.sqrt(inst.relay_budgets / inst.thetas) / np.abs(gains)
            z = 1.0 + forms.ratios_of_vector(gains)
            assert np.all(z <= d * (1 + 1e-9))
            assert np.all(z <= d_total * (1 + 1e-9))

    def test_single_relay_matches_relay_array(self):
        eps = 0.01
        utility = Utility.sum_rate([1.0, 1.0])
        collab = collab_utility_maximize(scalar_collab(), utility, eps=eps)
        single = maximize_utility(scalar_collab().as_system(), utility, eps=eps)
        assert collab.cbv == pytest.approx(single.cbv, rel=2 * eps)

    @pytest.mark.parametrize("seed", range(2))
    def test_total_budget_dominates(self, seed):
        eps = 0.01
        inst = random_collab(seed, relays=2)
        utility = Utility.sum_rate([0.2, 0.8])
        individual = collab_utility_maximize(inst, utility, eps=eps)
        total = collab_utility_maximize(inst, utility, eps=eps, total_budget=True)
        assert total.cbv * (1 + eps) >= individual.cbv - 1e-6

    @pytest.mark.slow
    def test_reaches_tolerance_in_few_projections(self):
        eps = 0.01
        utility = Utility.sum_rate([0.2, 0.8])
        counts = []
        for seed in range(5):
            res = collab_utility_maximize(random_collab(seed, relays=2), utility, eps)
            assert res.ub <= res.cbv + eps * abs(res.cbv) + 1e-9
            counts.append(res.iterations)
        assert np.median(counts) <= 10
