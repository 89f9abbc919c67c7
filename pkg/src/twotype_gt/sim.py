"""Ground truth, noiseless pool evaluation and the noisy test channel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pooling import IncidenceMatrix, PoolingDesign


def _prob(name: str, value: float, lo_open: bool = False) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0) or (lo_open and value == 0.0):
        raise ValueError(f"{name} must lie in {'(0, 1]' if lo_open else '[0, 1]'}, got {value}")
    return value


@dataclass(frozen=True)
class NoiseModel:
    """Test accuracy shared by A, B and AB pools.

    ``sensitivity`` is Pr(S=1 | Z=1), ``specificity`` is Pr(S=0 | Z=0).
    """

    sensitivity: float
    specificity: float

    def __post_init__(self):
        object.__setattr__(self, "sensitivity", _prob("sensitivity", self.sensitivity, lo_open=True))
        object.__setattr__(self, "specificity", _prob("specificity", self.specificity, lo_open=True))

    @classmethod
    def from_error_rates(cls, false_positive: float, false_negative: float) -> "NoiseModel":
        return cls(1.0 - false_negative, 1.0 - false_positive)

    @property
    def false_positive(self) -> float:
        return 1.0 - self.specificity

    @property
    def false_negative(self) -> float:
        return 1.0 - self.sensitivity

    def likelihood(self, s, z):
        """Pr(S=s | Z=z), elementwise over arrays."""
        s = np.asarray(s, dtype=bool)
        z = np.asarray(z, dtype=bool)
        p1 = np.where(z, self.sensitivity, self.false_positive)
        return np.where(s, p1, 1.0 - p1)


NOISELESS = NoiseModel(1.0, 1.0)


@dataclass(frozen=True)
class Priors:
    """Independent per-item defective rates for types A and B."""

    p_A: float
    p_B: float

    def __post_init__(self):
        object.__setattr__(self, "p_A", _prob("p_A", self.p_A))
        object.__setattr__(self, "p_B", _prob("p_B", self.p_B))

    def joint(self) -> np.ndarray:
        """Prior over the states ``(0,0), (0,1), (1,0), (1,1)`` of ``(X^A, X^B)``."""
        a, b = self.p_A, self.p_B
        return np.array([(1 - a) * (1 - b), (1 - a) * b, a * (1 - b), a * b])

    def swapped(self) -> "Priors":
        return Priors(self.p_B, self.p_A)


@dataclass(frozen=True)
class GroundTruth:
    x_A: np.ndarray
    x_B: np.ndarray

    def __post_init__(self):
        x_A = np.asarray(self.x_A, dtype=bool)
        x_B = np.asarray(self.x_B, dtype=bool)
        if x_A.shape != x_B.shape or x_A.ndim != 1:
            raise ValueError("x_A and x_B must be 1-d vectors of equal length")
        object.__setattr__(self, "x_A", x_A)
        object.__setattr__(self, "x_B", x_B)

    @property
    def n(self) -> int:
        return self.x_A.size

    @property
    def x_AB(self) -> np.ndarray:
        return self.x_A | self.x_B


@dataclass(frozen=True)
class Observations:
    s_A: np.ndarray
    s_B: np.ndarray
    s_AB: np.ndarray

    def __post_init__(self):
        for name in ("s_A", "s_B", "s_AB"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=bool).reshape(-1))

    def check(self, design: PoolingDesign):
        for name, s, M in (("s_A", self.s_A, design.M_A), ("s_B", self.s_B, design.M_B),
                           ("s_AB", self.s_AB, design.M_AB)):
            if s.size != M.n_rows:
                raise ValueError(f"{name} has length {s.size}, design has {M.n_rows} pools")

    def swapped(self) -> "Observations":
        return Observations(self.s_B, self.s_A, self.s_AB)


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    """Independent stream for replication ``rep`` of experiment ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(rep)]))


def plant_fixed(n: int, count_A: int, count_B: int, rng: np.random.Generator) -> GroundTruth:
    """Exactly ``count_A`` A-defectives and ``count_B`` B-defectives, placed
    uniformly and independently (an item may carry both)."""
    for name, c in (("count_A", count_A), ("count_B", count_B)):
        if not 0 <= c <= n:
            raise ValueError(f"{name}={c} outside [0, {n}]")
    x_A = np.zeros(n, dtype=bool)
    x_B = np.zeros(n, dtype=bool)
    x_A[rng.choice(n, size=count_A, replace=False)] = True
    x_B[rng.choice(n, size=count_B, replace=False)] = True
    return GroundTruth(x_A, x_B)


def plant_bernoulli(n: int, priors: Priors, rng: np.random.Generator) -> GroundTruth:
    return GroundTruth(rng.random(n) < priors.p_A, rng.random(n) < priors.p_B)


def pool_or(M: IncidenceMatrix, x: np.ndarray) -> np.ndarray:
    """OR of ``x`` over the members of each row of ``M``."""
    x = np.asarray(x, dtype=bool)
    if x.size != M.n_cols:
        raise ValueError(f"vector of length {x.size} does not match {M.n_cols} items")
    return np.array([bool(x[list(r)].any()) if r else False for r in M.rows], dtype=bool)


def true_pool_states(design: PoolingDesign, truth: GroundTruth):
    """Noiseless outcomes ``(z_A, z_B, z_AB)``; AB pools react to either type."""
    if truth.n != design.n_items:
        raise ValueError(f"truth has {truth.n} items, design has {design.n_items}")
    return (pool_or(design.M_A, truth.x_A), pool_or(design.M_B, truth.x_B),
            pool_or(design.M_AB, truth.x_AB))


def apply_noise(z, noise: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    z = np.asarray(z, dtype=bool)
    p_positive = np.where(z, noise.sensitivity, noise.false_positive)
    return rng.random(z.shape) < p_positive


def observe(design: PoolingDesign, truth: GroundTruth, noise: NoiseModel,
            rng: np.random.Generator) -> Observations:
    z_A, z_B, z_AB = true_pool_states(design, truth)
    return Observations(apply_noise(z_A, noise, rng), apply_noise(z_B, noise, rng),
                        apply_noise(z_AB, noise, rng))
