from typing import Any, Optional

import numpy as np
from scipy import stats

from py9audit.core import PY9Mechanism, Space, check_positive
from py9audit.statcore import Rng, sample_laplace


class PY9Laplace(PY9Mechanism):
    """
    Publishes a real statistic s in [0, 1] plus centered Laplace noise of
    scale 1 / lam.

    Private at level lam over the domain [0, 1]. `epsilon0` sets lam
    directly.
    """

    PARAMS = {
        "epsilon0": (float, "Targeted privacy level, sets lam."),
        "lam": (float, "Inverse noise scale; overrides epsilon0."),
    }

    DEFAULTS = {
        "n": 20_000,
        "N": 50_000,
        "C": (-1.0, 1.0),
        "pairs": "laplace_steps",
    }

    def __init__(
        self,
        epsilon0: Optional[float] = None,
        lam: Optional[float] = None,
        **kwargs,
    ) -> None:
        super().__init__(**kwargs)

        self.lam = lam if lam is not None else epsilon0
        check_positive(lam=self.lam)
        self.epsilon0 = epsilon0

    @property
    def space(self) -> Space:
        return Space.continuous(1)

    def sample(self, x: Any, rng: Rng, size: Optional[int] = None) -> Any:
        return float(x) + sample_laplace(1.0 / self.lam, rng, size)

    def density(self, x: Any, t: Any) -> np.ndarray:
        return stats.laplace.pdf(t, loc=float(x), scale=1.0 / self.lam)

    def true_epsilon(self) -> float:
        return self.lam
