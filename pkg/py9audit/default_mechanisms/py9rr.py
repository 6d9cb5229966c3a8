from math import exp
from typing import Any, Optional

import numpy as np

from py9audit.core import InvalidArgument, PY9Mechanism, Space, check_positive
from py9audit.statcore import Rng


def _as_bit(x: Any) -> int:
    if x not in (0, 1):
        raise InvalidArgument(f"randomized response takes a bit, not {x!r}")
    return int(x)


class PY9RandomizedResponse(PY9Mechanism):
    """
    Answers a private bit truthfully with probability
    e^epsilon0 / (1 + e^epsilon0) and flips it otherwise.
    """

    PARAMS = {
        "epsilon0": (float, "Log-odds of a truthful answer."),
    }

    DEFAULTS = {
        "n": 20_000,
        "N": 50_000,
        "pairs": "unit_pair",
    }

    def __init__(self, epsilon0: float = 1.0, **kwargs) -> None:
        super().__init__(**kwargs)

        check_positive(epsilon0=epsilon0)
        self.epsilon0 = float(epsilon0)

    @property
    def p_truth(self) -> float:
        # 1 / (1 + e^-eps) stays finite for large eps
        return 1.0 / (1.0 + exp(-self.epsilon0))

    @property
    def space(self) -> Space:
        return Space.discrete()

    def alphabet(self, x: Any) -> tuple[int, ...]:
        return (0, 1)

    def sample(self, x: Any, rng: Rng, size: Optional[int] = None) -> Any:
        bit = _as_bit(x)
        truthful = rng.uniform(size) < self.p_truth

        out = np.where(truthful, bit, 1 - bit).astype(np.int64)
        return int(out) if size is None else out

    def density(self, x: Any, t: Any) -> np.ndarray:
        bit = _as_bit(x)
        t = np.asarray(t)
        p = self.p_truth

        return np.where(t == bit, p, np.where(t == 1 - bit, 1.0 - p, 0.0))

    def true_epsilon(self) -> float:
        return self.epsilon0
