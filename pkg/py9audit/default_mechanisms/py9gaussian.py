from math import inf
from typing import Any, Optional

import numpy as np
from scipy import stats

from py9audit.core import PY9Mechanism, Space, check_positive
from py9audit.statcore import Rng


class PY9Gaussian(PY9Mechanism):
    """
    Adds centered normal noise of standard deviation `sigma` to a real
    statistic.

    Its loss function grows linearly in |t|, so the mechanism is not
    epsilon-DP for any finite epsilon; restricted to a bounded set C the
    violation is finite.
    """

    PARAMS = {
        "sigma": (float, "Noise standard deviation."),
    }

    def __init__(self, sigma: float = 1.0, **kwargs) -> None:
        super().__init__(**kwargs)

        check_positive(sigma=sigma)
        self.sigma = float(sigma)

    @property
    def space(self) -> Space:
        return Space.continuous(1)

    def sample(self, x: Any, rng: Rng, size: Optional[int] = None) -> Any:
        out = float(x) + self.sigma * rng.generator.standard_normal(size)
        return float(out) if size is None else out

    def density(self, x: Any, t: Any) -> np.ndarray:
        return stats.norm.pdf(t, loc=float(x), scale=self.sigma)

    def true_epsilon(self) -> float:
        return inf
