import numpy as np
import pytest

from tspred import features, fixtures, simkit


@pytest.fixture(scope="session")
def smib():
    return fixtures.smib_model()


@pytest.fixture(scope="session")
def three_machine():
    return fixtures.three_machine_model()


def make_trajectory(delta_deg, dt=1.0 / 240.0, f0=60.0, inertia=None,
                    clearing_cycles=0.0, speed=None, pm=None, pe=None):
    """Synthetic Trajectory for tests that only need some of the series."""
    delta_deg = np.atleast_2d(np.asarray(delta_deg, dtype=float))
    n_t, ng = delta_deg.shape
    if inertia is None:
        inertia = np.ones(ng)
    scenario = simkit.SimulationScenario(
        fault="fault", clearing_cycles=clearing_cycles,
        step=dt, horizon=(n_t - 1) * dt)
    return simkit.Trajectory(
        time=np.arange(n_t) * dt,
        delta_deg=delta_deg,
        speed_dev=np.zeros((n_t, ng)) if speed is None else speed,
        pm=np.zeros(ng) if pm is None else pm,
        pe=np.zeros((n_t, ng)) if pe is None else pe,
        inertia=inertia,
        f0=f0,
        scenario=scenario,
    )


def separable_kb(n=60, n_features=6, seed=0):
    """Toy knowledge base whose label is the sign of feature 0."""
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, n_features))
    labels = np.where(x[:, 0] >= 0, 1, -1)
    # guarantee both classes
    labels[0], labels[1] = 1, -1
    x[0, 0], x[1, 0] = abs(x[0, 0]), -abs(x[1, 0])
    return features.KnowledgeBase(
        samples=x, labels=labels,
        names=[f"f{j}" for j in range(n_features)], seed=seed)


@pytest.fixture(scope="session")
def smib_kb(smib):
    """Small simulated knowledge base from the SMIB fixture."""
    scenarios = simkit.build_scenario_grid(
        faults=["fault"],
        clearing_cycles=[5.0, 7.5, 10.0],
        load_levels=[0.8, 0.9, 1.0, 1.1, 1.2, 1.25, 1.3],
        seed=3)
    trajectories = [simkit.simulate_trajectory(smib, sc) for sc in scenarios]
    return features.build_knowledge_base(trajectories, smib.n_generators, 3)
