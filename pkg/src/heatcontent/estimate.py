"""Value-with-error container and seeded Monte Carlo plumbing."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

CLOSED_FORM = "closed_form"
QUADRATURE = "quadrature"
MONTE_CARLO = "monte_carlo"
METHODS = (CLOSED_FORM, QUADRATURE, MONTE_CARLO)

# Relative radius attached to closed-form values (floating point only).
CLOSED_FORM_RTOL = 1e-13
SIGMAS = 3.0
BATCH = 1 << 16


@dataclass(frozen=True)
class Estimate:
    """A number with an error radius.

    For Monte Carlo results the radius is three sample standard errors; for
    quadrature it is the integrator's error estimate. ``value`` may be
    ``math.inf`` to record a divergent quantity.
    """

    value: float
    error_radius: float
    method: str
    samples: int = 0

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "error_radius", float(self.error_radius))
        object.__setattr__(self, "samples", int(self.samples))
        if self.method not in METHODS:
            raise ValueError(f"unknown method tag {self.method!r}")
        if not self.error_radius >= 0:
            raise ValueError("error_radius must be non-negative")

    @classmethod
    def exact(cls, value: float) -> "Estimate":
        value = float(value)
        radius = 0.0 if math.isinf(value) else CLOSED_FORM_RTOL * abs(value)
        return cls(value, radius, CLOSED_FORM)

    @classmethod
    def infinite(cls, method: str = CLOSED_FORM) -> "Estimate":
        return cls(math.inf, 0.0, method)

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)

    @property
    def lo(self) -> float:
        return self.value - self.error_radius

    @property
    def hi(self) -> float:
        return self.value + self.error_radius

    def scaled(self, c: float) -> "Estimate":
        return Estimate(self.value * c, self.error_radius * abs(c), self.method,
                        self.samples)

    def to_dict(self) -> dict:
        return asdict(self)


def combine_method(*methods: str) -> str:
    """Weakest method tag among the inputs (mc > quadrature > closed form)."""
    for tag in (MONTE_CARLO, QUADRATURE):
        if tag in methods:
            return tag
    return CLOSED_FORM


def round_samples(n: int) -> int:
    """Smallest power of two >= n."""
    n = int(n)
    if n <= 0:
        raise ValueError("sample budget must be positive")
    return 1 << (n - 1).bit_length()


def seed_sequence(seed, *key: int) -> np.random.SeedSequence:
    """Child seed sequence for task ``key`` under the top-level ``seed``."""
    if isinstance(seed, np.random.SeedSequence):
        base = seed
        return np.random.SeedSequence(base.entropy, spawn_key=tuple(base.spawn_key) + tuple(key))
    return np.random.SeedSequence(0 if seed is None else int(seed), spawn_key=tuple(key))


def mc_mean(draw: Callable[[np.random.Generator, int], np.ndarray], samples: int,
            seed, *key: int) -> tuple[float, float, int]:
    """Sample mean and standard error of ``draw`` over ``samples`` points.

    Samples are rounded up to a power of two and generated in fixed-size
    batches, each from its own child seed, so the result does not depend on
    how batches are scheduled.
    """
    n = round_samples(samples)
    ss = seed_sequence(seed, *key)
    sums = []
    sqs = []
    done = 0
    for i, child in enumerate(ss.spawn((n + BATCH - 1) // BATCH)):
        k = min(BATCH, n - done)
        rng = np.random.Generator(np.random.PCG64(child))
        vals = np.asarray(draw(rng, k), dtype=float)
        sums.append(float(np.sum(vals)))
        sqs.append(float(np.sum(vals * vals)))
        done += k
    mean = math.fsum(sums) / n
    var = max(math.fsum(sqs) / n - mean * mean, 0.0) * n / max(n - 1, 1)
    return mean, math.sqrt(var / n), n
