from math import exp, log
from typing import Any, Optional

import numpy as np
from scipy.optimize import brentq

from py9audit.core import InvalidArgument, PY9Mechanism, Space, check_positive
from py9audit.statcore import Rng


def exponential_epsilon(lam: float) -> float:
    """
    The global privacy level of the exponential mechanism on statistics in
    [1, 2]: lam + ln(2 - e^(-2 lam)) - ln(2 - e^(-lam)).
    """

    check_positive(lam=lam)
    return lam + log(2.0 - exp(-2.0 * lam)) - log(2.0 - exp(-lam))


def calibrate_lambda(epsilon0: float) -> float:
    """
    The lam at which `exponential_epsilon(lam) == epsilon0`.
    """

    check_positive(epsilon0=epsilon0)

    # eps(lam) >= lam - ln 2, so epsilon0 + 1 brackets the root
    return brentq(
        lambda lam: exponential_epsilon(lam) - epsilon0,
        1e-12,
        epsilon0 + 1.0,
        xtol=1e-14,
    )


class PY9Exponential(PY9Mechanism):
    """
    Publishes t >= 0 drawn from the density proportional to
    exp(-lam |s - t|), for a statistic s in [1, 2].

    The normalising constant on [0, inf) is (2 - e^(-lam s)) / lam. Sampling
    inverts the CDF branch by branch, left and right of s.
    """

    PARAMS = {
        "epsilon0": (float, "Targeted privacy level, calibrates lam."),
        "lam": (float, "Concentration; overrides epsilon0."),
    }

    DEFAULTS = {
        "n": 20_000,
        "N": 50_000,
        "C": (0.0, 2.0),
        "pairs": "exponential_steps",
    }

    def __init__(
        self,
        epsilon0: Optional[float] = None,
        lam: Optional[float] = None,
        **kwargs,
    ) -> None:
        super().__init__(**kwargs)

        if lam is None and epsilon0 is not None:
            lam = calibrate_lambda(epsilon0)
        check_positive(lam=lam)

        self.lam = float(lam)
        self.epsilon0 = epsilon0

    @staticmethod
    def _statistic(x: Any) -> float:
        s = float(x)
        if not 1.0 <= s <= 2.0:
            raise InvalidArgument(f"statistic must lie in [1, 2], not {s}")
        return s

    @property
    def space(self) -> Space:
        return Space.continuous(1)

    def inverse_cdf(self, x: Any, u: Any) -> Any:
        s = self._statistic(x)
        lam = self.lam
        e = exp(-lam * s)
        u = np.asarray(u, dtype=float)

        p_left = (1.0 - e) / (2.0 - e)
        with np.errstate(divide="ignore", invalid="ignore"):
            left = s + np.log(u * (2.0 - e) + e) / lam
            right = s - np.log((1.0 - u) * (2.0 - e)) / lam

        out = np.where(u < p_left, left, right)
        return float(out) if out.ndim == 0 else out

    def cdf(self, x: Any, t: Any) -> np.ndarray:
        s = self._statistic(x)
        lam = self.lam
        e = exp(-lam * s)
        t = np.asarray(t, dtype=float)

        with np.errstate(over="ignore"):
            left = (np.exp(-lam * (s - t)) - e) / (2.0 - e)
            right = 1.0 - np.exp(-lam * (t - s)) / (2.0 - e)

        out = np.where(t < s, left, right)
        return np.where(t < 0, 0.0, out)

    def sample(self, x: Any, rng: Rng, size: Optional[int] = None) -> Any:
        return self.inverse_cdf(x, rng.uniform(size))

    def density(self, x: Any, t: Any) -> np.ndarray:
        s = self._statistic(x)
        t = np.asarray(t, dtype=float)
        z = (2.0 - exp(-self.lam * s)) / self.lam

        return np.where(t >= 0, np.exp(-self.lam * np.abs(s - t)) / z, 0.0)

    def true_epsilon(self) -> float:
        return exponential_epsilon(self.lam)
