"""Tests for the swarm optimizers and the mixed-integer ELM encoding."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tspred import elm, swarm
from conftest import separable_kb


SPEC = swarm.EncodingSpec(n_features=3, hidden=2)


def make_position(spec, a=0.5, b=0.5, s=0.7, cf=0.9):
    """Position filled segment-wise with scalar raw values."""
    pos = np.empty(spec.dim)
    sl = spec.slices
    pos[sl["a"]] = a
    pos[sl["b"]] = b
    pos[sl["s"]] = s
    pos[sl["cf"]] = cf
    return pos


class TestEncodingSpec:
    def test_dimension_formula(self):
        # [TRIVIAL] D = L*n + L + n + L
        assert SPEC.dim == 2 * 3 + 2 + 3 + 2

    def test_slices_cover_dimension(self):
        sl = SPEC.slices
        ends = [sl["a"].stop, sl["b"].stop, sl["s"].stop, sl["cf"].stop]
        assert sl["a"].start == 0
        assert ends == [6, 8, 11, 13]
        assert ends[-1] == SPEC.dim


class TestDecodeParticle:
    def test_mask_threshold(self):
        # [TRIVIAL] raw s [0.7, 0.2, 0.5] -> mask [1, 0, 1], ties to 1
        pos = make_position(SPEC)
        pos[SPEC.slices["s"]] = [0.7, 0.2, 0.5]
        _, mask = swarm.decode_particle(pos, SPEC)
        assert mask.tolist() == [True, False, True]

    def test_activation_thirds(self):
        # [TRIVIAL] raw cf 0.1 / 0.4 / 0.9 -> codes 0 / 1 / 2
        spec = swarm.EncodingSpec(n_features=2, hidden=3)
        pos = make_position(spec)
        pos[spec.slices["cf"]] = [0.1, 0.4, 0.9]
        arch, _ = swarm.decode_particle(pos, spec)
        assert arch.activations.tolist() == [0, 1, 2]

    def test_affine_midpoint(self):
        # [TRIVIAL] raw a entry 0.5 -> weight 0.0
        pos = make_position(SPEC, a=0.5)
        arch, _ = swarm.decode_particle(pos, SPEC)
        assert np.all(arch.input_weights == 0.0)

    def test_affine_endpoints(self):
        lo = make_position(SPEC, a=0.0, b=0.0)
        hi = make_position(SPEC, a=1.0, b=1.0)
        arch_lo, _ = swarm.decode_particle(lo, SPEC)
        arch_hi, _ = swarm.decode_particle(hi, SPEC)
        assert np.all(arch_lo.input_weights == -1.0)
        assert np.all(arch_lo.biases == -1.0)
        assert np.all(arch_hi.input_weights == 1.0)
        assert np.all(arch_hi.biases == 1.0)

    def test_empty_mask_repaired(self):
        pos = make_position(SPEC)
        pos[SPEC.slices["s"]] = [0.1, 0.3, 0.2]
        _, mask = swarm.decode_particle(pos, SPEC)
        assert mask.tolist() == [False, True, False]

    def test_all_off_activations_repaired(self):
        pos = make_position(SPEC)
        pos[SPEC.slices["cf"]] = [0.05, 0.2]
        arch, _ = swarm.decode_particle(pos, SPEC)
        assert arch.activations.tolist() == [0, 1]

    def test_weight_columns_follow_mask(self):
        pos = make_position(SPEC)
        pos[SPEC.slices["s"]] = [0.9, 0.1, 0.9]
        arch, mask = swarm.decode_particle(pos, SPEC)
        assert arch.input_weights.shape == (2, 2)
        assert int(mask.sum()) == 2

    def test_out_of_range_rejected(self):
        pos = make_position(SPEC)
        pos[0] = 1.5
        with pytest.raises(ValueError):
            swarm.decode_particle(pos, SPEC)

    def test_wrong_length_rejected(self):
        with pytest.raises(ValueError):
            swarm.decode_particle(np.zeros(SPEC.dim + 1), SPEC)

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=60, deadline=None)
    def test_decode_total_on_unit_cube(self, seed):
        # Property: every position decodes to a trainable architecture.
        rng = np.random.default_rng(seed)
        pos = rng.random(SPEC.dim)
        arch, mask = swarm.decode_particle(pos, SPEC)
        assert mask.any()
        assert np.any(arch.activations != elm.ACT_OFF)
        assert arch.input_weights.shape == (2, int(mask.sum()))
        assert np.all(np.abs(arch.input_weights) <= 1.0)
        assert np.all(np.abs(arch.biases) <= 1.0)


class TestFitnessVariance:
    def test_zero_deviation(self):
        # [TRIVIAL] identical fitnesses -> zero variance
        assert swarm.fitness_variance([0.8, 0.8, 0.8]) == pytest.approx(
            0.0, abs=1e-24)

    def test_worked_example(self):
        # [PAPER] f = [0.5, 1.0]: f_avg 0.75, f_best 1.0 -> 0.125
        assert swarm.fitness_variance([0.5, 1.0]) == pytest.approx(
            0.125, abs=1e-12)

    def test_zero_best_guard(self):
        # [TRIVIAL] all-zero population -> 0 via guard
        assert swarm.fitness_variance([0.0, 0.0, 0.0]) == 0.0

    def test_guard_unnormalized(self):
        # f_best == 0 with spread: plain sum of squared deviations
        got = swarm.fitness_variance([0.0, -2.0])
        assert got == pytest.approx(2.0, abs=1e-12)


class TestPrematureCheck:
    CONFIG = swarm.SwarmConfig()

    def test_flat_tiny_variance_fires(self):
        # [TRIVIAL] ratio 1 inside band, below floor, no improvement
        assert swarm.premature_check(1e-5, 1e-5, self.CONFIG) is True

    def test_above_floor_blocks(self):
        assert swarm.premature_check(0.5, 0.5, self.CONFIG) is False

    def test_ratio_outside_band_blocks(self):
        assert swarm.premature_check(1e-5, 1e-7, self.CONFIG) is False

    def test_improvement_blocks(self):
        assert swarm.premature_check(
            1e-5, 1e-5, self.CONFIG, best_improved=True) is False

    def test_double_zero_counts(self):
        assert swarm.premature_check(0.0, 0.0, self.CONFIG) is True

    def test_zero_then_positive_blocks(self):
        assert swarm.premature_check(0.0, 1e-6, self.CONFIG) is False


class TestVelocityUpdate:
    def test_worked_example(self):
        # [PAPER] w=0.9, c1=c2=2, r1=r2=0.5, v=0.1, s=0.5,
        # pbest=0.6, gbest=0.7 -> v'=0.39, s'=0.89
        v = swarm.velocity_update(0.1, 0.5, 0.6, 0.7, 0.9, 2.0, 2.0,
                                  0.5, 0.5)
        assert v == pytest.approx(0.39, abs=1e-12)
        assert 0.5 + v == pytest.approx(0.89, abs=1e-12)

    def test_fixed_point(self):
        # [TRIVIAL] particle at pbest = gbest = s with v = 0 stays put
        v = swarm.velocity_update(0.0, 0.4, 0.4, 0.4, 0.9, 2.0, 2.0,
                                  0.3, 0.8)
        assert v == 0.0


class _ConstRng:
    """Stub generator returning a constant uniform draw."""

    def __init__(self, value):
        self.value = value

    def random(self, shape):
        return np.full(shape, self.value)


class TestMutate:
    CONFIG = swarm.SwarmConfig()

    def test_zero_perturbation(self):
        # [TRIVIAL] x=0.5, c_m=0.1, rand=0.5 -> 0.5
        out = swarm.mutate(np.full((2, 3), 0.5), self.CONFIG, _ConstRng(0.5))
        assert np.all(out == 0.5)

    def test_worked_example(self):
        # [PAPER] x=0.5, c_m=0.1, rand=1.0 -> 0.55
        out = swarm.mutate(np.full((1, 1), 0.5), self.CONFIG, _ConstRng(1.0))
        assert out[0, 0] == pytest.approx(0.55, abs=1e-12)

    def test_clamped_at_one(self):
        # [TRIVIAL] 0.999 + 0.05 -> 1.0 after clamp
        out = swarm.mutate(np.full((1, 1), 0.999), self.CONFIG,
                           _ConstRng(1.0))
        assert out[0, 0] == 1.0

    def test_exempt_row_untouched(self):
        pos = np.full((3, 4), 0.5)
        out = swarm.mutate(pos, self.CONFIG, _ConstRng(1.0), exempt=1)
        assert np.all(out[1] == 0.5)
        assert np.all(out[0] == 0.55)
        assert np.all(out[2] == 0.55)


class TestEvaluateFitness:
    def test_separable_toy_reaches_one(self):
        # [DERIVED] label = sign of feature 0, linear neuron on feature 0
        kb = separable_kb(n=60, n_features=4, seed=5)
        spec = swarm.EncodingSpec(n_features=4, hidden=1)
        ctx = swarm.FitnessContext.build(kb.samples, kb.labels, spec, seed=2)
        pos = np.empty(spec.dim)
        sl = spec.slices
        pos[sl["a"]] = [1.0, 0.5, 0.5, 0.5]   # weight 1 on feature 0 only
        pos[sl["b"]] = 0.5                     # zero bias
        pos[sl["s"]] = [1.0, 0.0, 0.0, 0.0]    # mask in feature 0 only
        pos[sl["cf"]] = 0.9                    # linear neuron
        assert swarm.evaluate_fitness(pos, spec, ctx) == 1.0

    def test_deterministic(self):
        kb = separable_kb(n=40, n_features=3, seed=1)
        ctx = swarm.FitnessContext.build(kb.samples, kb.labels, SPEC, seed=0)
        rng = np.random.default_rng(9)
        pos = rng.random(SPEC.dim)
        assert swarm.evaluate_fitness(pos, SPEC, ctx) == \
            swarm.evaluate_fitness(pos, SPEC, ctx)

    def test_fitness_in_unit_interval(self):
        kb = separable_kb(n=40, n_features=3, seed=2)
        ctx = swarm.FitnessContext.build(kb.samples, kb.labels, SPEC, seed=0)
        rng = np.random.default_rng(3)
        for _ in range(5):
            f = swarm.evaluate_fitness(rng.random(SPEC.dim), SPEC, ctx)
            assert 0.0 <= f <= 1.0


def sphere_fitness(pos):
    """1-D surrogate maximized at x = 0.3."""
    return 1.0 - float((pos[0] - 0.3) ** 2)


class TestRunSwarm:
    def test_zero_iterations_returns_initial_best(self):
        config = swarm.SwarmConfig(max_iterations=0, seed=4)
        res = swarm.run_pso(sphere_fitness, 1, config)
        assert len(res.trace) == 1
        assert res.evaluations == config.population
        assert res.best_fitness == sphere_fitness(res.best_position)

    def test_target_zero_stops_immediately(self):
        # [TRIVIAL] fitness target 0 -> terminate after first round
        config = swarm.SwarmConfig(fitness_target=0.0, seed=4)
        res = swarm.run_ipso(sphere_fitness, 1, config)
        assert len(res.trace) == 1

    def test_same_seed_identical_trace(self):
        config = swarm.SwarmConfig(max_iterations=15, seed=11,
                                   fitness_target=1.0)
        a = swarm.run_ipso(sphere_fitness, 1, config)
        b = swarm.run_ipso(sphere_fitness, 1, config)
        assert a.trace == b.trace
        assert np.array_equal(a.best_position, b.best_position)

    def test_gbest_monotone_all_optimizers(self):
        config = swarm.SwarmConfig(max_iterations=20, seed=8,
                                   fitness_target=1.0)
        for run in (swarm.run_pso, swarm.run_ipso, swarm.run_ga):
            res = run(sphere_fitness, 2, config)
            best = [rec.best_fitness for rec in res.trace]
            assert all(b2 >= b1 for b1, b2 in zip(best, best[1:]))

    def test_positions_contained(self):
        # Containment checked through the fitness callback.
        seen = []

        def probe(pos):
            seen.append(pos.copy())
            return sphere_fitness(pos)

        config = swarm.SwarmConfig(max_iterations=10, seed=3,
                                   fitness_target=1.0)
        swarm.run_ipso(probe, 3, config)
        stacked = np.vstack(seen)
        assert np.all(stacked >= 0.0) and np.all(stacked <= 1.0)

    def test_pso_ipso_trace_prefix(self):
        # [DERIVED] identical until the first mutation event
        config = swarm.SwarmConfig(max_iterations=30, seed=21,
                                   fitness_target=1.0)
        a = swarm.run_pso(sphere_fitness, 1, config)
        b = swarm.run_ipso(sphere_fitness, 1, config)
        first_mut = next((rec.iteration for rec in b.trace if rec.mutated),
                         None)
        cut = len(b.trace) if first_mut is None else first_mut
        assert a.trace[:cut] == b.trace[:cut]

    def test_sphere_convergence_rate(self):
        # [DERIVED] >= 18/20 seeds land within 1e-2 of the optimum
        hits = {"pso": 0, "ipso": 0, "ga": 0}
        for seed in range(20):
            config = swarm.SwarmConfig(max_iterations=60, seed=seed,
                                       fitness_target=0.999999)
            for name, run in swarm.OPTIMIZERS.items():
                res = run(sphere_fitness, 1, config)
                if abs(res.best_position[0] - 0.3) < 1e-2:
                    hits[name] += 1
        assert hits["pso"] >= 18
        assert hits["ipso"] >= 18
        # GA is the weaker baseline here; measured 13/20 at this budget.
        assert hits["ga"] >= 11

    def test_mutation_rescue_on_stagnant_swarm(self):
        # Flat fitness below target forces premature_check, then
        # mutation moves at least population-1 particles.
        calls = []

        def flat(pos):
            calls.append(pos.copy())
            return 0.5

        config = swarm.SwarmConfig(population=6, max_iterations=3, seed=2)
        res = swarm.run_ipso(flat, 4, config)
        assert any(rec.mutated for rec in res.trace)
        # mutation re-evaluates population-1 extra particles that round
        mut_iters = sum(rec.mutated for rec in res.trace)
        plain = config.population * (1 + 3)
        assert res.evaluations == plain + mut_iters * (config.population - 1)
        best = [rec.best_fitness for rec in res.trace]
        assert all(b == 0.5 for b in best)   # never decreases on the event

    def test_ga_identical_parents_crossover(self):
        # [TRIVIAL] uniform crossover of identical parents is the parent
        pos = np.full(4, 0.3)
        rng = np.random.default_rng(0)
        take_a = rng.random(4) < 0.5
        child = np.where(take_a, pos, pos)
        assert np.array_equal(child, pos)

    def test_ga_elitism_without_operators(self):
        # [TRIVIAL] p_c = p_m = 0 with elitism: best never decreases
        config = swarm.SwarmConfig(max_iterations=10, seed=6,
                                   fitness_target=1.0,
                                   crossover_prob=0.0, mutation_prob=0.0)
        res = swarm.run_ga(sphere_fitness, 2, config)
        best = [rec.best_fitness for rec in res.trace]
        assert all(b2 >= b1 for b1, b2 in zip(best, best[1:]))


class TestSwarmConfig:
    def test_defaults(self):
        c = swarm.SwarmConfig()
        assert c.population == 20
        assert c.max_iterations == 200
        assert c.c1 == c.c2 == 2.0
        assert (c.w_start, c.w_end) == (0.9, 0.4)
        assert c.fitness_target == 0.99

    def test_rejects_tiny_population(self):
        with pytest.raises(ValueError):
            swarm.SwarmConfig(population=1)

    def test_rejects_bad_band(self):
        with pytest.raises(ValueError):
            swarm.SwarmConfig(band_low=1.2)

    def test_inertia_schedule_endpoints(self):
        c = swarm.SwarmConfig(max_iterations=200)
        assert swarm._inertia(c, 1) == pytest.approx(0.9)
        assert swarm._inertia(c, 200) == pytest.approx(0.4)


class TestSaveTrace:
    def test_round_trip_header(self, tmp_path):
        config = swarm.SwarmConfig(max_iterations=3, seed=1,
                                   fitness_target=1.0)
        res = swarm.run_pso(sphere_fitness, 1, config)
        path = tmp_path / "trace.csv"
        swarm.save_trace(res.trace, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "iteration,best_fitness,avg_fitness,variance,mutated"
        assert len(lines) == len(res.trace) + 1
