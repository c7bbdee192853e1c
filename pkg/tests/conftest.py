import numpy as np
import pytest

from kinemds.scenario import paper_scenario, relative_state


@pytest.fixture(scope="session")
def scenario():
    return paper_scenario()


@pytest.fixture(scope="session")
def rel(scenario):
    return relative_state(scenario)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_centered(rng, P, N, scale=100.0):
    X = rng.normal(scale=scale, size=(P, N))
    return X - X.mean(axis=1, keepdims=True)


@pytest.fixture(scope="session")
def noiseless(scenario):
    """Ranging, grams and truth-aligned MDS positions from exact polynomial delays."""
    from kinemds.gtwr import generate_timestamps
    from kinemds.ranging import build_centered_grams, dynamic_ranging
    from kinemds.rel_position import mds_position, procrustes_align

    table = generate_timestamps(scenario, 10, delay_model="polynomial", order_L=3)
    params = dynamic_ranging(table, 3)
    grams = build_centered_grams(params)
    X_rel = relative_state(scenario).X_rel
    Xa, Q = procrustes_align(mds_position(grams.B0, 2).X_hat, X_rel)
    return {"table": table, "params": params, "grams": grams, "X": Xa, "Q": Q}
