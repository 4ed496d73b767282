"""Swarm and genetic optimization of the ELM parameterization.

Particles live in the unit cube; a flat position vector packs the hidden
input weights, biases, a binary feature-selection mask, and per-neuron
activation codes. IPSO augments plain PSO with fitness-variance
monitoring and a mutation rescue when the swarm stagnates below target.
"""

import csv
import logging
from dataclasses import dataclass

import numpy as np

from . import elm
from .features import kfold_partition

logger = logging.getLogger(__name__)

_STREAM_INIT = 0
_STREAM_UPDATE = 1
_STREAM_MUTATE = 2
_STREAM_GA = 3


@dataclass(frozen=True)
class EncodingSpec:
    """Layout of the flat position vector [a | b | s | cf] in [0,1]^D."""

    n_features: int
    hidden: int

    @property
    def dim(self):
        n, L = self.n_features, self.hidden
        return L * n + L + n + L

    @property
    def slices(self):
        n, L = self.n_features, self.hidden
        a_end = L * n
        b_end = a_end + L
        s_end = b_end + n
        return {
            "a": slice(0, a_end),
            "b": slice(a_end, b_end),
            "s": slice(b_end, s_end),
            "cf": slice(s_end, s_end + L),
        }


@dataclass(frozen=True)
class SwarmConfig:
    population: int = 20
    max_iterations: int = 200
    c1: float = 2.0
    c2: float = 2.0
    w_start: float = 0.9
    w_end: float = 0.4
    v_max: float = 0.2              # fraction of the unit range
    mutation_coeff: float = 0.1
    band_low: float = 0.9           # premature-convergence ratio band
    band_high: float = 1.1
    variance_floor: float = 1e-4
    fitness_target: float = 0.99
    seed: int = 0
    # GA-only operator probabilities
    crossover_prob: float = 0.85
    mutation_prob: float = 0.01

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be at least 2")
        if not 0 < self.band_low < 1 < self.band_high:
            raise ValueError("premature band must straddle 1")
        if self.mutation_coeff <= 0:
            raise ValueError("mutation coefficient must be positive")
        if not 0 <= self.fitness_target <= 1:
            raise ValueError("fitness target must be in [0, 1]")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    best_fitness: float
    avg_fitness: float
    variance: float
    mutated: bool


@dataclass(frozen=True)
class OptimizationResult:
    best_position: np.ndarray
    best_fitness: float
    trace: tuple                 # of IterationRecord
    evaluations: int


def decode_particle(position, spec):
    """Map a unit-cube position to (architecture, feature mask).

    Weights and biases go affinely to [−1, 1]; mask bits switch at 0.5;
    activation codes split [0,1] into thirds. Empty masks and all-off
    activation vectors are repaired by promoting the largest raw entry.
    """
    position = np.asarray(position, dtype=float)
    if position.shape != (spec.dim,):
        raise ValueError(f"position length {position.shape} != {spec.dim}")
    if np.any(position < 0.0) or np.any(position > 1.0):
        raise ValueError("position outside the unit cube")
    sl = spec.slices
    a = 2.0 * position[sl["a"]].reshape(spec.hidden, spec.n_features) - 1.0
    b = 2.0 * position[sl["b"]] - 1.0
    raw_s = position[sl["s"]]
    raw_cf = position[sl["cf"]]
    mask = raw_s >= 0.5
    if not mask.any():
        mask = mask.copy()
        mask[int(np.argmax(raw_s))] = True
    cf = np.minimum(np.floor(raw_cf * 3.0).astype(int), elm.ACT_LINEAR)
    if not np.any(cf != elm.ACT_OFF):
        cf = cf.copy()
        cf[int(np.argmax(raw_cf))] = elm.ACT_SIGMOID
    arch = elm.ElmArchitecture(input_weights=a[:, mask], biases=b,
                               activations=cf)
    return arch, mask


@dataclass(frozen=True)
class FitnessContext:
    """Cross-validation fitness over a fixed fold partition."""

    samples: np.ndarray
    labels: np.ndarray
    spec: EncodingSpec
    folds: tuple

    @classmethod
    def build(cls, samples, labels, spec, n_folds=5, seed=0):
        folds = tuple(kfold_partition(labels, n_folds, seed))
        return cls(samples=samples, labels=labels, spec=spec, folds=folds)

    def __call__(self, position):
        return evaluate_fitness(position, self.spec, self)


def evaluate_fitness(position, spec, ctx):
    """Fraction of held-out samples classified correctly over all folds.

    A degenerate particle that breaks training scores 0 (logged) so the
    optimizer never crashes mid-run.
    """
    try:
        arch, mask = decode_particle(position, spec)
        x = ctx.samples[:, mask]
        correct = 0
        for fold in ctx.folds:
            train_rows = np.setdiff1d(np.arange(len(ctx.labels)), fold,
                                      assume_unique=False)
            model = elm.train(arch, x[train_rows], ctx.labels[train_rows])
            pred = elm.predict_label(model, x[fold])
            correct += int(np.sum(pred == ctx.labels[fold]))
        return correct / len(ctx.labels)
    except (elm.ElmError, np.linalg.LinAlgError) as exc:
        logger.warning("degenerate particle scored 0: %s", exc)
        return 0.0


def fitness_variance(fitnesses):
    """Population fitness variance normalized by the best fitness.

    σ² = Σ((f_i − f_avg)/f_best)²; when |f_best| is (numerically) zero
    the un-normalized sum of squares is returned instead.
    """
    f = np.asarray(fitnesses, dtype=float)
    f_avg = f.mean()
    f_best = f.max()
    dev = f - f_avg
    if abs(f_best) < 1e-12:
        return float(np.sum(dev ** 2))
    return float(np.sum((dev / f_best) ** 2))


def premature_check(var_prev, var_cur, config, best_improved=False):
    """Stagnation detector for the mutation rescue.

    Fires when the variance ratio sits inside (band_low, band_high), the
    current variance is below the stagnation floor, and the global best
    did not improve this iteration. Two consecutive zero variances count
    as a ratio of one.
    """
    if best_improved or var_cur >= config.variance_floor:
        return False
    if var_prev == 0.0:
        return var_cur == 0.0
    ratio = var_cur / var_prev
    return config.band_low < ratio < config.band_high


def velocity_update(v, s, p_best, g_best, w, c1, c2, r1, r2):
    """One PSO velocity step (elementwise; no clamping)."""
    return w * v + c1 * r1 * (p_best - s) + c2 * r2 * (g_best - s)


def mutate(positions, config, rng, exempt=None):
    """Perturb positions by c_m·(rand − 0.5) per entry, clamped to [0,1].

    Row `exempt` (the global-best particle) is left untouched.
    """
    positions = np.array(positions, dtype=float)
    rand = rng.random(positions.shape)
    moved = positions + config.mutation_coeff * (rand - 0.5)
    if exempt is not None:
        moved[exempt] = positions[exempt]
    return np.clip(moved, 0.0, 1.0)


def _rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


def _inertia(config, k):
    """Linear 0.9 → 0.4 schedule over the iteration budget."""
    if config.max_iterations <= 1:
        return config.w_start
    frac = (k - 1) / (config.max_iterations - 1)
    return config.w_start + (config.w_end - config.w_start) * frac


def _run_swarm(fitness, dim, config, mutation_enabled):
    n = config.population
    positions = np.empty((n, dim))
    for i in range(n):
        positions[i] = _rng(config.seed, _STREAM_INIT, i).random(dim)
    velocities = np.zeros((n, dim))
    fits = np.array([fitness(positions[i]) for i in range(n)])
    evaluations = n
    pbest = positions.copy()
    pbest_fit = fits.copy()
    g_idx = int(np.argmax(pbest_fit))
    gbest = pbest[g_idx].copy()
    gbest_fit = float(pbest_fit[g_idx])

    var = fitness_variance(fits)
    trace = [IterationRecord(0, gbest_fit, float(fits.mean()), var, False)]
    k = 0
    while k < config.max_iterations and gbest_fit <= config.fitness_target:
        k += 1
        w = _inertia(config, k)
        for i in range(n):
            rng = _rng(config.seed, _STREAM_UPDATE, k, i)
            r1 = rng.random(dim)
            r2 = rng.random(dim)
            v = velocity_update(velocities[i], positions[i], pbest[i],
                                gbest, w, config.c1, config.c2, r1, r2)
            np.clip(v, -config.v_max, config.v_max, out=v)
            velocities[i] = v
            positions[i] = np.clip(positions[i] + v, 0.0, 1.0)
            fits[i] = fitness(positions[i])
            evaluations += 1
            if fits[i] > pbest_fit[i]:
                pbest_fit[i] = fits[i]
                pbest[i] = positions[i].copy()
        new_idx = int(np.argmax(pbest_fit))
        improved = pbest_fit[new_idx] > gbest_fit
        if improved:
            g_idx = new_idx
            gbest = pbest[g_idx].copy()
            gbest_fit = float(pbest_fit[g_idx])

        var_prev = var
        var = fitness_variance(fits)
        mutated = False
        if (mutation_enabled
                and premature_check(var_prev, var, config, improved)):
            mutated = True
            rng = _rng(config.seed, _STREAM_MUTATE, k)
            positions = mutate(positions, config, rng, exempt=g_idx)
            for i in range(n):
                if i == g_idx:
                    continue
                fits[i] = fitness(positions[i])
                evaluations += 1
                if fits[i] > pbest_fit[i]:
                    pbest_fit[i] = fits[i]
                    pbest[i] = positions[i].copy()
            new_idx = int(np.argmax(pbest_fit))
            if pbest_fit[new_idx] > gbest_fit:
                g_idx = new_idx
                gbest = pbest[g_idx].copy()
                gbest_fit = float(pbest_fit[g_idx])
            var = fitness_variance(fits)
        trace.append(IterationRecord(k, gbest_fit, float(fits.mean()),
                                     var, mutated))
    return OptimizationResult(best_position=gbest, best_fitness=gbest_fit,
                              trace=tuple(trace), evaluations=evaluations)


def run_pso(fitness, dim, config):
    """Plain particle swarm (no stagnation monitoring)."""
    return _run_swarm(fitness, dim, config, mutation_enabled=False)


def run_ipso(fitness, dim, config):
    """PSO plus variance monitoring and mutation rescue."""
    return _run_swarm(fitness, dim, config, mutation_enabled=True)


def run_ga(fitness, dim, config):
    """Real-coded GA baseline on the same encoding and fitness.

    Tournament selection of size 2, uniform crossover, per-gene uniform
    reset mutation, elitism of one.
    """
    n = config.population
    positions = np.empty((n, dim))
    for i in range(n):
        positions[i] = _rng(config.seed, _STREAM_INIT, i).random(dim)
    fits = np.array([fitness(positions[i]) for i in range(n)])
    evaluations = n
    best_idx = int(np.argmax(fits))
    gbest = positions[best_idx].copy()
    gbest_fit = float(fits[best_idx])
    trace = [IterationRecord(0, gbest_fit, float(fits.mean()),
                             fitness_variance(fits), False)]
    k = 0
    while k < config.max_iterations and gbest_fit <= config.fitness_target:
        k += 1
        rng = _rng(config.seed, _STREAM_GA, k)
        children = np.empty_like(positions)
        children[0] = gbest  # elitism
        for c in range(1, n):
            pa = _tournament(fits, rng)
            pb = _tournament(fits, rng)
            if rng.random() < config.crossover_prob:
                take_a = rng.random(dim) < 0.5
                child = np.where(take_a, positions[pa], positions[pb])
            else:
                child = positions[pa].copy()
            reset = rng.random(dim) < config.mutation_prob
            if reset.any():
                child = np.where(reset, rng.random(dim), child)
            children[c] = child
        positions = children
        fits = np.array([fitness(positions[i]) for i in range(n)])
        evaluations += n
        best_idx = int(np.argmax(fits))
        if fits[best_idx] > gbest_fit:
            gbest = positions[best_idx].copy()
            gbest_fit = float(fits[best_idx])
        trace.append(IterationRecord(k, gbest_fit, float(fits.mean()),
                                     fitness_variance(fits), False))
    return OptimizationResult(best_position=gbest, best_fitness=gbest_fit,
                              trace=tuple(trace), evaluations=evaluations)


def _tournament(fits, rng):
    a, b = rng.integers(0, len(fits), size=2)
    return int(a if fits[a] >= fits[b] else b)


OPTIMIZERS = {"ipso": run_ipso, "pso": run_pso, "ga": run_ga}


def save_trace(trace, path):
    """Trace CSV: iteration, best/avg fitness, variance, mutated flag."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "best_fitness", "avg_fitness",
                         "variance", "mutated"])
        for rec in trace:
            writer.writerow([rec.iteration, repr(rec.best_fitness),
                             repr(rec.avg_fitness), repr(rec.variance),
                             int(rec.mutated)])
