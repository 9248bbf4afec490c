import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from languidpso.swarm import (
    LANGUID,
    STANDARD,
    InertiaPolicy,
    ParticleState,
    StepHooks,
    SwarmConfig,
    Topology,
    batched,
    best_informers,
    enforce_bounds,
    gbest_topology,
    inertial_velocity,
    init_swarm,
    neighborhood_best,
    neighborhood_best_indices,
    position_update,
    randomize_topology,
    step,
    velocity_update,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)


def sphere(X):
    return np.sum(X * X, axis=1)


# ---------------------------------------------------------------------------
# inertia
# ---------------------------------------------------------------------------


class TestInertia:
    def test_standard(self):
        np.testing.assert_array_equal(inertial_velocity(STANDARD, 0.7, [1.0, -2.0], False, 5), [0.7, -1.4])

    def test_languid_improved(self):
        np.testing.assert_allclose(inertial_velocity(LANGUID, 0.7, [1.0, -2.0], True, 5), [0.75, -1.5], rtol=1e-15)

    def test_languid_not_improved_is_exact_zero(self):
        out = inertial_velocity(LANGUID, 0.7, [1.0, -2.0], False, 5)
        assert np.all(out == 0.0) and not np.any(np.signbit(out))

    def test_languid_keeps_inertia_before_second_iteration(self):
        np.testing.assert_allclose(inertial_velocity(LANGUID, 0.7, [1.0, -2.0], False, 1), [0.75, -1.5])

    def test_batched_mask(self):
        v = np.arange(12.0).reshape(2, 3, 2)
        improved = np.array([[True, False, True], [False, False, True]])
        out = inertial_velocity(LANGUID, 0.5, v, improved, 3)
        np.testing.assert_array_equal(out[~improved], 0.0)
        np.testing.assert_array_equal(out[improved], 0.55 * v[improved])

    def test_bonus_is_fixed(self):
        with pytest.raises(ValueError):
            InertiaPolicy("languid", 0.1)
        with pytest.raises(ValueError):
            InertiaPolicy("lazy")

    @given(arrays(float, 4, elements=finite), st.floats(0, 1.5), st.integers(2, 10**6),
           st.floats(-1e3, 1e3), st.floats(0, 1e3))
    def test_zero_inertia_whenever_not_improved(self, v, w, t, f_prev, delta):
        state = ParticleState(np.zeros(4), v, np.zeros(4), 0.0, f_curr=f_prev + delta, f_prev=f_prev)
        assert not state.improved
        assert np.all(inertial_velocity(LANGUID, w, state.v, state.improved, t) == 0.0)

    @given(arrays(float, 3, elements=finite), st.floats(0, 1.5), st.integers(0, 100))
    def test_improving_languid_equals_standard_with_bonus(self, v, w, t):
        np.testing.assert_array_equal(
            inertial_velocity(LANGUID, w, v, True, t), inertial_velocity(STANDARD, w + 0.05, v, False, t)
        )


# ---------------------------------------------------------------------------
# velocity / position / bounds
# ---------------------------------------------------------------------------


class _Fixed:
    def __init__(self, r):
        self.r = np.asarray(r, dtype=float)

    def random(self, size):
        return np.broadcast_to(self.r, size).copy()


class TestKinematics:
    def test_velocity_hand_value(self):
        state = ParticleState(np.array([0.0]), np.array([2.0]), np.array([1.0]), 0.0, 0.0)
        v = velocity_update(state, np.array([3.0]), 0.5, 1.0, 1.0, STANDARD, 3, _Fixed(0.5))
        np.testing.assert_allclose(v, [3.0])

    def test_zero_draws_leave_inertia(self):
        state = ParticleState(np.array([1.0, 2.0]), np.array([0.3, -0.1]), np.array([5.0, 5.0]), 0.0, 0.0)
        v = velocity_update(state, np.array([-4.0, 9.0]), 0.7, 2.0, 2.0, STANDARD, 3, _Fixed(0.0))
        np.testing.assert_allclose(v, 0.7 * state.v)

    def test_coincident_attractors_leave_inertia(self):
        x = np.array([1.0, 2.0])
        state = ParticleState(x, np.array([0.3, -0.1]), x.copy(), 0.0, 0.0)
        v = velocity_update(state, x.copy(), 0.7, 2.0, 2.0, STANDARD, 3, np.random.default_rng(0))
        np.testing.assert_allclose(v, 0.7 * state.v)

    def test_position(self):
        np.testing.assert_array_equal(position_update([0.0, 0.0], [1.0, -1.0]), [1.0, -1.0])
        np.testing.assert_array_equal(position_update([2.5], [-2.5]), [0.0])
        with pytest.raises(ValueError):
            position_update([1.0], [1.0, 2.0])

    def test_bounds(self):
        x, v = enforce_bounds(np.array([150.0]), np.array([60.0]), -100.0, 100.0)
        assert x[0] == 100.0 and v[0] == 0.0
        x, v = enforce_bounds(np.array([-100.0]), np.array([-5.0]), -100.0, 100.0)
        assert x[0] == -100.0 and v[0] == -5.0

    @given(arrays(float, 5, elements=st.floats(-1e4, 1e4)), arrays(float, 5, elements=finite))
    def test_bounds_property(self, x, v):
        xb, vb = enforce_bounds(x, v, -100.0, 100.0)
        assert np.all((xb >= -100.0) & (xb <= 100.0))
        inside = (x >= -100.0) & (x <= 100.0)
        np.testing.assert_array_equal(xb[inside], x[inside])
        np.testing.assert_array_equal(vb[inside], v[inside])
        assert np.all(vb[~inside] == 0.0)


# ---------------------------------------------------------------------------
# topologies
# ---------------------------------------------------------------------------


class TestTopology:
    def test_complete_when_n_is_k_plus_one(self):
        topo = randomize_topology(4, 3, np.random.default_rng(0))
        for k in range(4):
            assert sorted(topo.informers[k]) == [j for j in range(4) if j != k]

    @settings(max_examples=50)
    @given(st.integers(3, 60), st.integers(0, 2**32 - 1))
    def test_informers_distinct_and_not_self(self, n, seed):
        K = min(3, n - 1)
        topo = randomize_topology(n, K, np.random.default_rng(seed))
        for k in range(n):
            row = topo.informers[k]
            assert len(set(row.tolist())) == K and k not in row

    def test_deterministic(self):
        a = randomize_topology(30, 3, np.random.default_rng(5)).informers
        b = randomize_topology(30, 3, np.random.default_rng(5)).informers
        np.testing.assert_array_equal(a, b)

    def test_rejects_bad_k(self):
        with pytest.raises(ValueError):
            randomize_topology(4, 4, np.random.default_rng(0))

    def test_gbest_argmin(self):
        pbs = [(np.array([float(k)]), f) for k, f in enumerate((3.0, 1.0, 2.0))]
        assert neighborhood_best(0, gbest_topology(3), pbs)[0] == 1.0

    def test_lbest_self_included(self):
        topo = Topology("lbest-random", 2, 1, np.array([[1], [0]]))
        pbs = [(np.array([0.0]), 0.5), (np.array([1.0]), 1.0)]
        assert neighborhood_best(0, topo, pbs)[0] == 0.0

    def test_ties_go_to_lowest_index(self):
        topo = randomize_topology(10, 3, np.random.default_rng(1))
        f_p = np.ones(10)
        idx = neighborhood_best_indices(topo, f_p)
        for k in range(10):
            assert idx[k] == min(topo.neighbors(k))

    @settings(max_examples=50)
    @given(st.integers(5, 40), st.integers(0, 2**32 - 1))
    def test_vectorized_matches_scalar(self, n, seed):
        rng = np.random.default_rng(seed)
        topo = randomize_topology(n, 3, rng)
        f_p = rng.integers(0, 4, n).astype(float)  # many ties
        pbs = [(np.array([float(k)]), f_p[k]) for k in range(n)]
        idx = neighborhood_best_indices(topo, f_p)
        for k in range(n):
            assert neighborhood_best(k, topo, pbs)[0] == idx[k]

    def test_batched_best_informers(self):
        rng = np.random.default_rng(3)
        cands = np.stack([randomize_topology(8, 3, rng).candidates() for _ in range(4)])
        f_p = rng.random((4, 8))
        out = best_informers(cands, f_p)
        for r in range(4):
            np.testing.assert_array_equal(out[r], best_informers(cands[r], f_p[r]))


# ---------------------------------------------------------------------------
# swarm
# ---------------------------------------------------------------------------


def _config(**kw):
    base = dict(n=10, D=3, w0=0.7, c1=1.5, c2=1.5, eval_max=1000)
    base.update(kw)
    return SwarmConfig(**base)


class TestSwarm:
    def test_init(self):
        swarm = init_swarm(_config(), sphere, np.random.default_rng(0))
        assert np.all((swarm.x >= -100) & (swarm.x <= 100))
        np.testing.assert_array_equal(swarm.f_p, swarm.f_curr)
        assert swarm.evals.tolist() == [10]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            _config(n=1)
        with pytest.raises(ValueError):
            _config(eval_max=5)
        with pytest.raises(ValueError):
            _config(lower=1.0, upper=1.0)
        with pytest.raises(ValueError):
            _config(topology="ring")

    def test_objective_shape_checked(self):
        with pytest.raises(ValueError):
            init_swarm(_config(), lambda X: np.zeros(3), np.random.default_rng(0))

    @pytest.mark.parametrize("topology", ["gbest", "lbest"])
    def test_same_seed_same_state(self, topology):
        states = []
        for _ in range(2):
            swarm = init_swarm(_config(topology=topology), sphere, np.random.default_rng(9))
            for _ in range(20):
                step(swarm, StepHooks(0.7, 1.5, 1.5), sphere)
            states.append((swarm.x.copy(), swarm.v.copy(), swarm.f_p.copy()))
        for a, b in zip(*states):
            np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("topology", ["gbest", "lbest"])
    def test_batch_equals_solo(self, topology):
        config = _config(topology=topology, eval_max=537, policy=LANGUID)
        seeds = [1, 2, 3, 4]
        batch = init_swarm(config, sphere, [np.random.default_rng(s) for s in seeds])
        while np.any(batch.remaining > 0):
            step(batch, StepHooks(0.7, 1.5, 1.5), sphere)
        for r, s in enumerate(seeds):
            solo = init_swarm(config, sphere, [np.random.default_rng(s)])
            while np.any(solo.remaining > 0):
                step(solo, StepHooks(0.7, 1.5, 1.5), sphere)
            np.testing.assert_array_equal(batch.x[r], solo.x[0])
            assert batch.best_f[r] == solo.best_f[0]

    def test_partial_final_iteration(self):
        swarm = init_swarm(_config(eval_max=37), sphere, np.random.default_rng(0))
        used = [step(swarm, StepHooks(0.7, 1.5, 1.5), sphere) for _ in range(4)]
        assert used == [10, 10, 7, 0]
        assert swarm.evals[0] == 37

    def test_personal_best_monotone_and_best_tracks_min(self):
        swarm = init_swarm(_config(policy=LANGUID), sphere, np.random.default_rng(4))
        prev = swarm.f_p.copy()
        while np.any(swarm.remaining > 0):
            step(swarm, StepHooks(0.7, 1.5, 1.5), sphere)
            assert np.all(swarm.f_p <= prev)
            prev = swarm.f_p.copy()
            assert swarm.best_f[0] == swarm.f_p[0].min()
        assert swarm.best_f[0] == pytest.approx(float(sphere(swarm.best_x)[0]), abs=0)

    def test_lbest_redrawn_only_on_stall(self):
        class Flat:
            def __call__(self, X):
                return np.ones(X.shape[0])

        swarm = init_swarm(_config(topology="lbest"), Flat(), np.random.default_rng(2))
        before = swarm.neighborhoods.copy()
        step(swarm, StepHooks(0.7, 1.5, 1.5), Flat())
        assert not np.array_equal(before, swarm.neighborhoods)

    def test_batched_wrapper(self):
        f = batched(lambda x: float(np.sum(x)))
        np.testing.assert_array_equal(f(np.ones((3, 2))), [2.0, 2.0, 2.0])
