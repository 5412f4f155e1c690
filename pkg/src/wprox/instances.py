"""Seeded random instances for batch checks.

All randomness goes through ``numpy.random.default_rng(seed)``, i.e. the
PCG64 bit generator with numpy's SeedSequence seeding.  Draw order inside
each generator is fixed, so a seed always yields the same instances.
"""

from __future__ import annotations

import numpy as np

from .functionals import Functional, distance_potential, quadratic_interaction, quadratic_potential
from .measures import DiscreteMeasure, make_discrete


def rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_measure(gen: np.random.Generator, n: int, d: int, *, uniform: bool = False,
                   scale: float = 1.0, shift=None) -> DiscreteMeasure:
    """``n`` Gaussian atoms in R^d; Dirichlet(1) weights unless ``uniform``."""
    pts = gen.normal(scale=scale, size=(n, d))
    if shift is not None:
        pts = pts + np.asarray(shift, dtype=float)
    w = None if uniform else gen.dirichlet(np.ones(n))
    return make_discrete(pts, w)


def random_pair(gen: np.random.Generator, n_max: int = 20, d_max: int = 3, *,
                uniform: bool = False, same_size: bool = False) -> tuple[DiscreteMeasure, DiscreteMeasure]:
    d = int(gen.integers(1, d_max + 1))
    n = int(gen.integers(1, n_max + 1))
    m = n if same_size else int(gen.integers(1, n_max + 1))
    mu = random_measure(gen, n, d, uniform=uniform)
    nu = random_measure(gen, m, d, uniform=uniform, scale=1.5, shift=gen.normal(size=d))
    return mu, nu


def random_triple(gen: np.random.Generator, n_max: int = 6, d_max: int = 3) -> tuple:
    d = int(gen.integers(1, d_max + 1))
    return tuple(random_measure(gen, int(gen.integers(1, n_max + 1)), d) for _ in range(3))


def random_spd(gen: np.random.Generator, d: int) -> np.ndarray:
    B = gen.normal(size=(d, d))
    return B @ B.T / d + 0.1 * np.eye(d)


BUILTIN_NAMES = ("quadratic_potential", "distance_potential", "quadratic_interaction")


def builtin_functional(name: str, gen: np.random.Generator, d: int) -> Functional:
    """A randomly parametrized built-in functional on R^d."""
    if name == "quadratic_potential":
        a = gen.normal(size=d)
        A = random_spd(gen, d) if gen.random() < 0.5 else None
        return quadratic_potential(a, A)
    if name == "distance_potential":
        return distance_potential(gen.normal(size=d))
    if name == "quadratic_interaction":
        return quadratic_interaction(float(gen.uniform(0.2, 2.0)))
    raise KeyError(name)


def random_tau(gen: np.random.Generator, lo: float = 0.1, hi: float = 2.0) -> float:
    return float(gen.uniform(lo, hi))
