import time

import numpy as np
import pytest

from twrbf.errors import DomainError
from twrbf.model import (
    SystemInstance,
    build_forms,
    generate_channels,
    relay_power_of_A,
    sinr_of_A,
)
from twrbf.solvers.monotonic import (
    NormalRegion,
    PolyblockStatus,
    Projection,
    Vertex,
    WarmStart,
    children,
    dominated,
    initial_vertex,
    maximize_utility,
    polyblock_maximize,
    project,
    proper,
    region_corner,
    relay_region,
)
from twrbf.util import complex_normal, make_rng
from twrbf.utility import Utility


class BallRegion(NormalRegion):
    """{z >= 0 : ||z||_p <= radius} seen from the positive orthant."""

    def __init__(self, radius, order=2, dim=2):
        self.radius = radius
        self.order = order
        self.dim = dim

    def dimension(self):
        return self.dim

    def upper_corner(self):
        return np.full(self.dim, float(self.radius))

    def project(self, z, hint=None):
        lam = self.radius / np.linalg.norm(z, self.order)
        return Projection(lam, lam * np.asarray(z), None)

    def contains(self, z):
        return np.linalg.norm(z, self.order) <= self.radius * (1 + 1e-12)


class BoxRegion(NormalRegion):
    def __init__(self, upper):
        self.upper = np.asarray(upper, dtype=float)

    def dimension(self):
        return len(self.upper)

    def upper_corner(self):
        return self.upper.copy()

    def project(self, z, hint=None):
        lam = float(np.min(self.upper / np.asarray(z)))
        return Projection(lam, lam * np.asarray(z), None)


def total(z):
    return float(np.sum(z))


def scalar_instance():
    return SystemInstance(
        channels=[[1.0], [1.0]],
        user_powers=1.0,
        relay_noise=1.0,
        user_noise=1.0,
        power_budget=3.0,
        sinr_targets=1.0,
    )


class TestProjection:
    def test_simplex(self):
        res = project([4.0, 4.0], BallRegion(4.0, order=1))
        assert res.lam == pytest.approx(0.5)
        np.testing.assert_allclose(res.point, [2.0, 2.0])

    def test_boundary_is_fixed(self):
        region = BallRegion(4.0, order=1)
        y = project([4.0, 3.0], region).point
        assert project(y, region).lam == pytest.approx(1.0)

    def test_below_one_rejected(self):
        with pytest.raises(DomainError):
            project([0.5, 2.0], BallRegion(4.0))

    def test_scalar_relay(self):
        region = relay_region(scalar_instance())
        res = project(initial_vertex(scalar_instance()), region)
        # SINR 0.5 for both users at the optimum |a|^2 = 1.
        np.testing.assert_allclose(res.point, [1.5, 1.5], rtol=1e-5)


class TestVertices:
    def test_children(self):
        got = children([4.0, 4.0], [2.0, 3.0])
        assert [c.tolist() for c in got] == [[2.0, 4.0], [4.0, 3.0]]

    def test_no_progress(self):
        assert children([4.0, 4.0], [4.0, 4.0]) == []

    def test_projection_above_vertex(self):
        with pytest.raises(DomainError):
            children([4.0, 4.0], [5.0, 3.0])

    def test_proper(self):
        pts = [np.array([2.0, 4.0]), np.array([4.0, 3.0]), np.array([3.0, 3.0])]
        got = proper(pts)
        assert [p.tolist() for p in got] == [[2.0, 4.0], [4.0, 3.0]]

    def test_dominated(self):
        assert dominated(np.array([1.0, 1.0]), [np.array([1.0, 2.0])])
        assert not dominated(np.array([1.0, 3.0]), [np.array([1.0, 2.0])])


class TestInitialVertex:
    def test_scalar(self):
        np.testing.assert_allclose(initial_vertex(scalar_instance()), [4.0, 4.0])

    def test_shape(self):
        inst = SystemInstance.from_snr_db(generate_channels(0, 2, 3), 10.0)
        assert initial_vertex(inst).shape == (4,)

    @pytest.mark.parametrize("seed", range(3))
    def test_dominates_achievable(self, seed):
        inst = SystemInstance.from_snr_db(generate_channels(seed, 2, 3), 10.0)
        d = initial_vertex(inst)
        corner = region_corner(
            build_forms(inst), [(build_forms(inst).e0, inst.power_budget)]
        )
        rng = make_rng(seed + 50)
        for _ in range(100):
            a = complex_normal(rng, (3, 3))
            a *= np.sqrt(inst.power_budget / relay_power_of_A(inst, a))
            z = 1.0 + sinr_of_A(inst, a)
            assert np.all(z <= d * (1 + 1e-9))
            assert np.all(z <= corner * (1 + 1e-9))


class TestPolyblock:
    def test_ball_sum(self):
        eps = 0.01
        utility = Utility.custom(total, 2)
        res = polyblock_maximize(BallRegion(np.sqrt(8.0)), utility, eps=eps)
        assert res.status is PolyblockStatus.CONVERGED
        assert res.cbv >= 4.0 / (1 + eps)
        assert res.cbv <= 4.0 + 1e-9
        assert res.ub >= 4.0 - 1e-9

    def test_traces(self):
        utility = Utility.custom(total, 2)
        res = polyblock_maximize(BallRegion(np.sqrt(8.0)), utility, eps=0.01)
        for row in res.trace:
            assert row.cbv <= row.ub + 1e-12
        assert np.all(np.diff(res.ub_trace) <= 1e-12)
        cbv = [c for c in res.cbv_trace if np.isfinite(c)]
        assert np.all(np.diff(cbv) >= 0)
        assert res.rounded is None
        assert res.feasible_value == res.cbv

    def test_containment(self):
        region = BallRegion(3.0)
        utility = Utility.custom(total, 2)
        eps = 0.01
        rng = make_rng(0)
        samples = []
        while len(samples) < 200:
            z = rng.uniform(1.0, 3.0, 2)
            if region.contains(z):
                samples.append(z)

        def check(it, vertices, cbv, ub):
            zs = [v.z for v in vertices]
            for v in zs:
                assert not dominated(v, zs)
            threshold = cbv + eps * abs(cbv) if np.isfinite(cbv) else -np.inf
            for z in samples:
                if total(z) > threshold:
                    assert any(np.all(z <= v + 1e-12) for v in zs)

        res = polyblock_maximize(region, utility, eps=eps, on_iteration=check)
        assert res.status is PolyblockStatus.CONVERGED

    def test_corner_achievable(self):
        utility = Utility.custom(total, 2)
        res = polyblock_maximize(BoxRegion([3.0, 2.0]), utility)
        assert res.status is PolyblockStatus.CONVERGED
        assert res.cbv == pytest.approx(5.0)
        assert res.ub == pytest.approx(5.0)
        np.testing.assert_allclose(res.z_best, [3.0, 2.0])

    def test_max_iter(self):
        utility = Utility.custom(total, 2)
        res = polyblock_maximize(BallRegion(3.0), utility, eps=1e-6, max_iter=2)
        assert res.status is PolyblockStatus.MAX_ITER
        assert res.iterations == 2

    def test_vertex_overflow(self):
        utility = Utility.custom(total, 3)
        region = BallRegion(3.0, dim=3)
        res = polyblock_maximize(region, utility, eps=1e-6, vertex_cap=2)
        assert res.status is PolyblockStatus.VERTEX_OVERFLOW

    def test_bad_eps(self):
        with pytest.raises(DomainError):
            polyblock_maximize(BallRegion(3.0), Utility.custom(total, 2), eps=0.0)


class TestRelayUtility:
    def test_scalar_sum_rate(self):
        eps = 0.01
        res = maximize_utility(scalar_instance(), Utility.sum_rate([1.0, 1.0]), eps)
        assert res.status is PolyblockStatus.CONVERGED
        # Both users at SINR 0.5.
        optimum = np.log2(1.5)
        assert res.cbv >= optimum / (1 + eps) - 1e-6
        assert res.ub >= optimum - 1e-6
        assert res.ub <= res.cbv + eps * abs(res.cbv) + 1e-9

    @pytest.mark.parametrize("seed", range(2))
    def test_beats_random_beamformers(self, seed):
        eps = 0.01
        inst = SystemInstance.from_snr_db(generate_channels(seed, 1, 2), 10.0)
        utility = Utility.sum_rate([0.2, 0.8])
        res = maximize_utility(inst, utility, eps)
        assert res.status is PolyblockStatus.CONVERGED
        rng = make_rng(seed + 100)
        best = -np.inf
        for _ in range(300):
            a = complex_normal(rng, (2, 2))
            a *= np.sqrt(inst.power_budget / relay_power_of_A(inst, a))
            value = utility(1.0 + sinr_of_A(inst, a))
            assert value <= res.ub + 1e-4
            best = max(best, value)
        assert res.feasible_value >= best / (1 + eps) - 1e-6
        vector, value = res.rounded
        a = vector.reshape((2, 2), order="F")
        assert relay_power_of_A(inst, a) <= inst.power_budget * (1 + 1e-6)
        assert value == pytest.approx(utility(1.0 + sinr_of_A(inst, a)))


class RecordingRegion(BallRegion):
    """A ball whose projections carry a payload and remember their hints."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.hints = []

    def project(self, z, hint=None):
        self.hints.append(hint)
        proj = super().project(z, hint)
        return Projection(proj.lam, proj.point, f"x{len(self.hints)}")


class SlowRegion(BallRegion):
    def project(self, z, hint=None):
        time.sleep(0.02)
        return super().project(z, hint)


class TestVertexSelection:
    def test_vertices_compare_by_identity(self):
        a = Vertex(np.array([2.0, 3.0]), 5.0)
        b = Vertex(np.array([2.0, 3.0]), 5.0)
        assert a != b
        items = [a, b]
        items.remove(b)
        assert items == [a]

    def test_best_vertex_not_first(self):
        # Weighting the first coordinate makes the second child the best.
        eps = 0.01
        utility = Utility.custom(lambda z: float(3 * z[0] + z[1]), 2)
        res = polyblock_maximize(BallRegion(5.0), utility, eps=eps)
        assert res.status is PolyblockStatus.CONVERGED
        # max 3 z0 + z1 over the disc of radius 5 is 5 sqrt(10).
        optimum = 5.0 * np.sqrt(10.0)
        assert res.cbv >= optimum / (1 + eps) - 1e-9
        assert res.cbv <= optimum + 1e-9
        assert res.ub >= optimum - 1e-9


class TestBudget:
    def test_projection_budget(self):
        utility = Utility.custom(total, 3)
        region = BallRegion(3.0, dim=3)
        res = polyblock_maximize(region, utility, eps=1e-6, max_projections=4)
        assert res.status is PolyblockStatus.BUDGET
        assert res.iterations == 4
        assert np.isfinite(res.cbv)
        assert res.cbv <= res.ub
        assert res.z_best is not None

    def test_time_budget(self):
        utility = Utility.custom(total, 3)
        res = polyblock_maximize(
            SlowRegion(3.0, dim=3), utility, eps=1e-6, max_seconds=0.05
        )
        assert res.status is PolyblockStatus.BUDGET
        assert 1 <= res.iterations < 20
        assert np.isfinite(res.cbv)

    def test_bad_budgets(self):
        utility = Utility.custom(total, 2)
        with pytest.raises(DomainError):
            polyblock_maximize(BallRegion(3.0), utility, max_seconds=0.0)
        with pytest.raises(DomainError):
            polyblock_maximize(BallRegion(3.0), utility, max_projections=0)

    def test_relay_budget_returns_incumbent(self):
        inst = SystemInstance.from_snr_db(generate_channels(1, 2, 4), 10.0)
        utility = Utility.sum_rate([0.2, 0.8, 0.5, 0.5])
        res = maximize_utility(inst, utility, eps=1e-3, max_projections=3)
        assert res.status is PolyblockStatus.BUDGET
        assert res.iterations == 3
        assert res.cbv <= res.ub
        if res.rounded is not None:
            vector, value = res.rounded
            a = vector.reshape((4, 4), order="F")
            assert relay_power_of_A(inst, a) <= inst.power_budget * (1 + 1e-6)
            assert value <= res.ub + 1e-6


class TestWarmStart:
    def test_children_inherit_parent_projection(self):
        region = RecordingRegion(3.0, dim=3)
        polyblock_maximize(region, Utility.custom(total, 3), eps=1e-3, max_iter=6)
        assert region.hints[0] is None
        for hint in region.hints[1:]:
            assert isinstance(hint, WarmStart)
            assert hint.x.startswith("x")
            assert 0.0 < hint.lam < 1.0

    def test_relay_projection_respects_floor(self):
        inst = SystemInstance.from_snr_db(generate_channels(2, 1, 2), 10.0)
        region = relay_region(inst)
        corner = initial_vertex(inst)
        parent = project(corner, region)
        child = corner.copy()
        child[0] = parent.point[0]
        warm = project(child, region, WarmStart(parent.payload, parent.lam))
        cold = project(child, relay_region(inst))
        assert warm.lam >= parent.lam * (1 - 1e-9)
        assert warm.lam == pytest.approx(cold.lam, rel=1e-4)


def ray_oracle(region, utility, rays=40):
    """Best utility at boundary points on rays through the corner faces."""
    corner = region.upper_corner()
    best = -np.inf
    for s in np.linspace(0.0, 1.0, rays):
        for z in (
            np.array([corner[0], 1.0 + s * (corner[1] - 1.0)]),
            np.array([1.0 + s * (corner[0] - 1.0), corner[1]]),
        ):
            y = project(z, region).point
            if np.all(y >= 1.0):
                best = max(best, utility(y))
    return best


@pytest.mark.slow
class TestRelayOracles:
    @pytest.mark.parametrize("seed", range(2))
    def test_matches_ray_oracle(self, seed):
        eps = 0.01
        inst = SystemInstance.from_snr_db(generate_channels(seed, 1, 2), 10.0)
        utility = Utility.sum_rate([0.2, 0.8])
        oracle = ray_oracle(relay_region(inst), utility)
        res = maximize_utility(inst, utility, eps)
        assert res.status is PolyblockStatus.CONVERGED
        assert res.ub >= oracle - 1e-6
        assert res.cbv >= oracle / (1 + eps) - 1e-6

    def test_vertices_cover_achievable_points(self):
        eps = 0.01
        inst = SystemInstance.from_snr_db(generate_channels(3, 1, 2), 10.0)
        utility = Utility.sum_rate([0.2, 0.8])
        rng = make_rng(7)
        samples = []
        for _ in range(300):
            a = complex_normal(rng, (2, 2))
            a *= np.sqrt(inst.power_budget / relay_power_of_A(inst, a))
            samples.append(1.0 + sinr_of_A(inst, a))

        def check(it, vertices, cbv, ub):
            zs = [v.z for v in vertices]
            threshold = cbv + eps * abs(cbv) if np.isfinite(cbv) else -np.inf
            for z in samples:
                if utility(z) > threshold:
                    assert any(np.all(z <= v * (1 + 1e-5)) for v in zs)

        res = maximize_utility(inst, utility, eps, on_iteration=check)
        assert res.status is PolyblockStatus.CONVERGED
