"""Model parameters and the constants derived from them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_K = 5


class ParameterError(ValueError):
    """Raised for an invalid (k, delta) pair."""


@dataclass(frozen=True)
class ModelParams:
    """The pair (k, delta) with the exponents ``b[m]`` and ``tau``.

    ``b[m] = k - m + 1 + delta * (k - m)`` for ``m = 0..k`` and
    ``tau = k + 2 + delta * (k + 1)``.
    """

    k: int
    delta: float
    max_k: int = MAX_K
    b: tuple[float, ...] = field(init=False, repr=False)
    tau: float = field(init=False, repr=False)

    def __post_init__(self):
        if isinstance(self.k, bool) or int(self.k) != self.k:
            raise ParameterError(f"k must be an integer, got {self.k!r}")
        k = int(self.k)
        delta = float(self.delta)
        if k < 0:
            raise ParameterError(f"k must be nonnegative, got {k}")
        if k > self.max_k:
            raise ParameterError(f"k={k} exceeds the supported maximum {self.max_k}")
        if not np.isfinite(delta) or delta <= -1.0:
            raise ParameterError(f"delta must satisfy delta > -1, got {delta}")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "delta", delta)
        b = tuple(k - m + 1 + delta * (k - m) for m in range(k + 1))
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "tau", k + 2 + delta * (k + 1))

    @property
    def alpha(self) -> float:
        """Pareto index ``tau / b[0]`` of the mixing variable."""
        return self.tau / self.b[0]

    def nb_shape(self, m: int) -> float:
        """Shape ``(1 + delta) / b[m]`` of the negative binomial ``T_m``."""
        return (1.0 + self.delta) / self.b[m]

    def marginal_shape(self, i: int) -> float:
        """Shape ``(k - i + 1)(1 + delta) / b[i]`` of coordinate ``i``."""
        return (self.k - i + 1) * (1.0 + self.delta) / self.b[i]

    def tail_index(self, m: int) -> float:
        """Marginal power-law exponent ``tau / b[m]`` of coordinate ``m``."""
        return self.tau / self.b[m]

    def total_weight(self, n: int) -> float:
        """Selection denominator after ``n`` steps: ``(n+1)(k+2) + delta(1 + (n+1)(k+1))``."""
        return (n + 1) * (self.k + 2) + self.delta * (1 + (n + 1) * (self.k + 1))

    def n_simplices(self, n: int) -> int:
        return 1 + (n + 1) * (self.k + 1)

    def degree_sum(self, n: int) -> int:
        return (n + 1) * (self.k + 2)

    def minimal_vector(self) -> tuple[int, ...]:
        """Degree vector ``(k+1, k, ..., 1)`` of a newly created k-simplex."""
        return tuple(self.k - m + 1 for m in range(self.k + 1))

    def as_dict(self) -> dict:
        return {"k": self.k, "delta": self.delta}
