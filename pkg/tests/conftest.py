import numpy as np
import pytest

from mmsde import (
    convex_prox,
    indicator_ball,
    indicator_box,
    indicator_halfspace,
    indicator_polyhedron,
    linear_monotone,
)


def soft_threshold(lam, z):
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


def make_zoo():
    """Named built-in operators with (alpha, beta) graph pairs for verification."""
    halfline = indicator_halfspace([-1.0], 0.0)
    box2 = indicator_box([0.0, 0.0], [1.0, 1.0])
    ball2 = indicator_ball([0.0, 0.0], 1.0)
    wedge = indicator_polyhedron([([1.0, -1.0], 0.0), ([-1.0, -1.0], 0.0)])
    linear1 = linear_monotone([[1.0]])
    linear2 = linear_monotone([[2.0, 0.0], [0.0, 0.5]])
    rotation2 = linear_monotone([[0.5, 1.0], [-1.0, 0.5]])
    prox_abs = convex_prox(soft_threshold, 1,
                           graph_sample=lambda z: np.sign(z))
    zoo = {
        "halfline": halfline,
        "box2": box2,
        "ball2": ball2,
        "wedge": wedge,
        "linear1": linear1,
        "linear2": linear2,
        "rotation2": rotation2,
        "prox_abs": prox_abs,
    }
    pairs = {
        "halfline": [(np.array([0.5]), np.array([0.0])),
                     (np.array([0.0]), np.array([-1.0]))],
        "box2": [(np.array([0.5, 0.5]), np.array([0.0, 0.0])),
                 (np.array([1.0, 0.5]), np.array([1.0, 0.0])),
                 (np.array([0.0, 0.0]), np.array([-1.0, -1.0]))],
        "ball2": [(np.array([0.0, 0.0]), np.array([0.0, 0.0])),
                  (np.array([1.0, 0.0]), np.array([2.0, 0.0]))],
        "wedge": [(np.array([0.0, 1.0]), np.array([0.0, 0.0])),
                  (np.array([1.0, 1.0]), np.array([1.0, -1.0]))],
        "linear1": [(np.array([0.7]), np.array([0.7])),
                    (np.array([-2.0]), np.array([-2.0]))],
        "linear2": [(np.array([1.0, 1.0]), np.array([2.0, 0.5]))],
        "rotation2": [(np.array([1.0, 2.0]), np.array([2.5, 0.0]))],
        "prox_abs": [(np.array([1.0]), np.array([1.0])),
                     (np.array([-0.5]), np.array([-1.0]))],
    }
    return zoo, pairs


@pytest.fixture(scope="session")
def zoo():
    return make_zoo()[0]


@pytest.fixture(scope="session")
def zoo_pairs():
    return make_zoo()[1]


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
