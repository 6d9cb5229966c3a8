from typing import Any, Optional

import numpy as np
from scipy import integrate, stats

from py9audit.core import (
    InvalidArgument,
    PY9Mechanism,
    Space,
    as_vector,
    check_positive,
)
from py9audit.statcore import Rng, laplace_inverse_cdf


def _max_density(t: np.ndarray, locs: np.ndarray, b: float) -> np.ndarray:
    """
    Density of max_i (locs_i + L_i) with L_i ~ Lap(b) i.i.d.:
    sum_i f_i(t) prod_{j != i} F_j(t).
    """

    t = np.asarray(t, dtype=float)[..., None]
    pdf = stats.laplace.pdf(t, loc=locs, scale=b)
    cdf = stats.laplace.cdf(t, loc=locs, scale=b)

    out = np.zeros(t.shape[:-1])
    for i in range(len(locs)):
        others = np.prod(np.delete(cdf, i, axis=-1), axis=-1)
        out = out + pdf[..., i] * others

    return out


class PY9NoisyMax(PY9Mechanism):
    """
    Continuous Noisy Max: adds independent Lap(1/lam) noise to each entry of
    a statistic vector in [0, 1]^k and publishes the largest noisy value.

    Private at level k * lam. `epsilon0` sets lam = epsilon0 / k.
    """

    PARAMS = {
        "epsilon0": (float, "Targeted privacy level, sets lam = epsilon0/k."),
        "lam": (float, "Inverse noise scale; overrides epsilon0."),
        "k": (int, "Length of the statistic vector."),
    }

    DEFAULTS = {
        "n": 20_000,
        "N": 50_000,
        "C": (-1.0, 1.0),
        "pairs": "noisy_max_steps",
    }

    def __init__(
        self,
        epsilon0: Optional[float] = None,
        lam: Optional[float] = None,
        k: int = 3,
        **kwargs,
    ) -> None:
        super().__init__(**kwargs)

        if int(k) < 1:
            raise InvalidArgument(f"k must be at least 1, not {k}")
        self.k = int(k)

        if lam is None and epsilon0 is not None:
            lam = epsilon0 / self.k
        check_positive(lam=lam)

        self.lam = float(lam)
        self.epsilon0 = epsilon0

    @property
    def space(self) -> Space:
        return Space.continuous(1)

    def sample(self, x: Any, rng: Rng, size: Optional[int] = None) -> Any:
        s = as_vector(x, self.k, "statistic vector")
        shape = (1 if size is None else size, self.k)

        noisy = s + laplace_inverse_cdf(rng.uniform(shape), 1.0 / self.lam)
        out = noisy.max(axis=1)

        return float(out[0]) if size is None else out

    def density(self, x: Any, t: Any) -> np.ndarray:
        s = as_vector(x, self.k, "statistic vector")
        return _max_density(t, s, 1.0 / self.lam)

    def true_epsilon(self) -> float:
        return self.k * self.lam


class PY9ReportNoisyMax(PY9Mechanism):
    """
    Report Noisy Max: adds independent Lap(2/epsilon0) noise to each of d
    counting queries and reports the (1-based) index of the largest noisy
    answer. Exact ties go to the smallest index.
    """

    PARAMS = {
        "epsilon0": (float, "Privacy level."),
        "d": (int, "Number of counting queries."),
    }

    DEFAULTS = {
        "n": 20_000,
        "N": 50_000,
        "pairs": "table1",
    }

    def __init__(self, epsilon0: float = 1.0, d: int = 6, **kwargs) -> None:
        super().__init__(**kwargs)

        if int(d) < 2:
            raise InvalidArgument(f"d must be at least 2, not {d}")
        check_positive(epsilon0=epsilon0)

        self.epsilon0 = float(epsilon0)
        self.d = int(d)

    @property
    def scale(self) -> float:
        return 2.0 / self.epsilon0

    @property
    def space(self) -> Space:
        return Space.discrete()

    def alphabet(self, x: Any) -> tuple[int, ...]:
        return tuple(range(1, self.d + 1))

    def sample(self, x: Any, rng: Rng, size: Optional[int] = None) -> Any:
        q = as_vector(x, self.d, "query vector")
        shape = (1 if size is None else size, self.d)

        noisy = q + laplace_inverse_cdf(rng.uniform(shape), self.scale)
        # argmax returns the first maximum
        out = np.argmax(noisy, axis=1).astype(np.int64) + 1

        return int(out[0]) if size is None else out

    def probabilities(self, x: Any) -> np.ndarray:
        """
        P(output = i) for i = 1..d, by quadrature of
        f_i(t) prod_{j != i} F_j(t).
        """

        q = as_vector(x, self.d, "query vector")
        b = self.scale
        lo, hi = q.min() - 60 * b, q.max() + 60 * b
        kinks = sorted(set(q.tolist()))

        def integrand(t: float, i: int) -> float:
            cdf = stats.laplace.cdf(t, loc=q, scale=b)
            cdf[i] = 1.0
            return stats.laplace.pdf(t, loc=q[i], scale=b) * np.prod(cdf)

        probs = np.array(
            [
                integrate.quad(integrand, lo, hi, args=(i,), points=kinks)[0]
                for i in range(self.d)
            ]
        )
        return probs / probs.sum()

    def density(self, x: Any, t: Any) -> np.ndarray:
        t = np.asarray(t)
        probs = self.probabilities(x)
        inside = (t >= 1) & (t <= self.d)
        ix = np.clip(t, 1, self.d).astype(int) - 1

        return np.where(inside, probs[ix], 0.0)

    def true_epsilon(self) -> float:
        return self.epsilon0

