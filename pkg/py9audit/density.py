from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import log, sqrt
from typing import Any, Optional

import numpy as np

from py9audit.core import InvalidArgument, Space
from py9audit.statcore import GAUSSIAN, Kernel, kernel_eval

logger = logging.getLogger(__name__)

ESTIMATION = "estimation"
INFERENCE = "inference"

SILVERMAN_FACTOR = 1.06

# (n, tau) pairs at which the default floors are pinned
FLOOR_ANCHORS = {
    "discrete": (100_000, 1e-4),
    "continuous": (20_000, 1e-3),
}

# max number of kernel evaluations held in memory at once
_KDE_BLOCK = 1 << 22


@dataclass(frozen=True, eq=False)
class Sample:
    """
    i.i.d. outputs of one mechanism run on one input.

    `values` has shape (n,) for scalar and symbol outputs, (n, d) for
    vector outputs.
    """

    values: np.ndarray
    space: Space

    def __post_init__(self) -> None:
        values = np.asarray(self.values)
        if values.ndim == 0 or len(values) == 0:
            raise InvalidArgument("a sample must hold at least one value")

        if self.space.is_discrete:
            if values.ndim != 1:
                raise InvalidArgument("discrete samples hold scalar symbols")
        else:
            values = values.astype(float)
            d = 1 if values.ndim == 1 else values.shape[1]
            if d != self.space.dim:
                raise InvalidArgument(
                    f"sample of dimension {d} tagged as {self.space}"
                )

        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    def points(self) -> np.ndarray:
        """
        The values as an (n, d) array (continuous samples only).
        """
        return self.values.reshape(len(self.values), self.space.dim)


@dataclass(frozen=True, eq=False)
class DensityEstimate:
    """
    An immutable, floor-truncated density estimate built from one sample.

    Calling the estimate evaluates f_hat(t) = max(f_tilde(t), tau), where
    f_tilde is the untruncated estimate available through `raw`.
    """

    kind: str
    n: int
    tau: float
    space: Space
    h: Optional[float] = None
    kernel: Optional[Kernel] = None
    # TKDE: the (n, d) sample; TDDE: sorted symbols and their counts
    _points: Optional[np.ndarray] = field(default=None, repr=False)
    _symbols: Optional[np.ndarray] = field(default=None, repr=False)
    _counts: Optional[np.ndarray] = field(default=None, repr=False)

    def raw(self, t: Any) -> Any:
        """
        The untruncated estimate at `t` (a point or an array of points).
        """

        if self.kind == "TDDE":
            out = self._raw_discrete(np.asarray(t))
        else:
            out = self._raw_kernel(np.asarray(t, dtype=float))

        if np.ndim(out) == 0:
            return float(out)
        return out

    def __call__(self, t: Any) -> Any:
        out = np.maximum(self.raw(t), self.tau)

        if np.ndim(out) == 0:
            return float(out)
        return out

    @property
    def symbols(self) -> tuple[int, ...]:
        """
        The observed symbols, in canonical (sorted) order. TDDE only.
        """
        if self._symbols is None:
            return ()
        return tuple(self._symbols.tolist())

    @property
    def counts(self) -> dict[int, int]:
        """
        Symbol counts; they sum to n exactly. TDDE only.
        """
        if self._symbols is None:
            return {}
        return dict(zip(self._symbols.tolist(), self._counts.tolist()))

    def _raw_discrete(self, t: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self._symbols, t)
        safe = np.minimum(idx, len(self._symbols) - 1)
        hit = (idx < len(self._symbols)) & (self._symbols[safe] == t)

        return np.where(hit, self._counts[safe] / self.n, 0.0)

    def _raw_kernel(self, t: np.ndarray) -> np.ndarray:
        d = self.space.dim
        scalar_query = t.ndim == 0 or (d > 1 and t.ndim == 1)
        grid = t.reshape(-1, d)

        out = np.empty(len(grid))
        step = max(1, _KDE_BLOCK // self.n)

        for lo in range(0, len(grid), step):
            z = (grid[lo : lo + step, None, :] - self._points[None, :, :]) / (
                self.h
            )
            out[lo : lo + step] = kernel_eval(self.kernel, z).sum(axis=1)

        out /= self.n * self.h**d

        if scalar_query:
            return out[0]
        return out.reshape(t.shape[: t.ndim - (d > 1)])


def tdde_build(sample: Sample, tau: float) -> DensityEstimate:
    """
    Truncated discrete density estimator: f_hat(t) = max(#{X_i = t} / n, tau).
    """

    if not sample.space.is_discrete:
        raise InvalidArgument("TDDE needs a discrete sample")
    if tau < 0:
        raise InvalidArgument(f"floor must be non-negative, not {tau}")

    symbols, counts = np.unique(sample.values, return_counts=True)

    return DensityEstimate(
        kind="TDDE",
        n=len(sample),
        tau=float(tau),
        space=sample.space,
        _symbols=symbols,
        _counts=counts,
    )


def tkde_build(
    sample: Sample, h: float, kernel: Kernel = GAUSSIAN, tau: float = 0.0
) -> DensityEstimate:
    """
    Truncated kernel density estimator:
    f_hat(t) = max(sum_i K((t - X_i) / h) / (n h^d), tau).
    """

    if sample.space.is_discrete:
        raise InvalidArgument("TKDE needs a continuous sample")
    if not h > 0:
        raise InvalidArgument(f"bandwidth must be positive, not {h}")
    if kernel.dim != sample.space.dim:
        raise InvalidArgument(
            f"kernel dimension {kernel.dim} does not match the sample's "
            f"{sample.space.dim}"
        )
    if tau < 0:
        raise InvalidArgument(f"floor must be non-negative, not {tau}")

    return DensityEstimate(
        kind="TKDE",
        n=len(sample),
        tau=float(tau),
        space=sample.space,
        h=float(h),
        kernel=kernel,
        _points=sample.points(),
    )


def silverman_scale(
    *samples: Sample, factor: float = SILVERMAN_FACTOR
) -> float:
    """
    Silverman's rule-of-thumb constant factor * sigma_hat (factor 1.06 by
    default), with sigma_hat the pooled standard deviation of the given
    samples (averaged over coordinates).
    """

    variances = [
        float(np.mean(np.var(s.points(), axis=0, ddof=1))) for s in samples
    ]
    return factor * sqrt(sum(variances) / len(variances))


def undersmoothing_bound(nu: float) -> float:
    """
    The smallest admissible undersmoothing exponent is strictly above this.
    """
    return nu / (6.0 * (1.0 + nu))


def default_bandwidth(
    sample: Sample,
    mode: str = ESTIMATION,
    nu: float = 0.0,
    gamma: float = 0.02,
    beta: float = 1.0,
    scale: Optional[float] = None,
) -> float:
    """
    Bandwidth adapted to the sample size.

    Args:
        sample:
            continuous sample the bandwidth is for; its size is the rate's n
        mode:
            "estimation" gives c_h n^(-1/(2 beta + d)), "inference" the
            undersmoothed c_h n^(-1/(2 beta + d) - gamma)
        nu:
            growth of the inference sample over the estimation one,
            ln(N/n) / ln(n)
        gamma:
            undersmoothing exponent, must exceed nu / (6 (1 + nu))
        beta:
            Hoelder smoothness of the target density
        scale:
            the constant c_h; Silverman's 1.06 * sigma_hat of the sample if
            None
    """

    if sample.space.is_discrete:
        raise InvalidArgument("bandwidths are only defined for TKDE")
    if not beta > 0:
        raise InvalidArgument("smoothness must be positive")

    d = sample.space.dim
    rate = -1.0 / (2.0 * beta + d)

    if mode == INFERENCE:
        if not gamma > undersmoothing_bound(nu):
            raise InvalidArgument(
                f"undersmoothing exponent {gamma} must exceed "
                f"{undersmoothing_bound(nu):.4f} for nu={nu}"
            )
        rate -= gamma
    elif mode != ESTIMATION:
        raise InvalidArgument(f"unknown bandwidth mode {mode!r}")

    c_h = silverman_scale(sample) if scale is None else scale
    if not c_h > 0:
        raise InvalidArgument("degenerate sample, cannot scale a bandwidth")

    return c_h * len(sample) ** rate


def _floor_rate(n: int, space: Space, beta: float) -> float:
    if space.is_discrete:
        return log(n) / sqrt(n)
    return n ** (-beta / (2.0 * beta + space.dim)) * log(n)


def default_floor(
    n: int,
    space: Space,
    mode: str = ESTIMATION,
    schedule: str = "fixed",
    beta: float = 1.0,
) -> float:
    """
    The floor tau for a sample of size n.

    Inference always returns 0. In estimation, the "fixed" schedule uses
    1e-3 below n = 1e5 and 1e-4 from there on; the "rate" schedule scales
    ln(n)/sqrt(n) (discrete) or n^(-beta/(2 beta + d)) ln(n) (continuous)
    through the anchors in FLOOR_ANCHORS.
    """

    if n < 1:
        raise InvalidArgument("sample size must be positive")

    if mode == INFERENCE:
        return 0.0
    if mode != ESTIMATION:
        raise InvalidArgument(f"unknown floor mode {mode!r}")

    if schedule == "fixed":
        return 1e-4 if n >= 100_000 else 1e-3

    if schedule != "rate":
        raise InvalidArgument(f"unknown floor schedule {schedule!r}")

    # n = 1 makes the rate degenerate
    n = max(n, 2)
    anchor_n, anchor_tau = FLOOR_ANCHORS[space.kind]
    return anchor_tau * _floor_rate(n, space, beta) / _floor_rate(
        anchor_n, space, beta
    )


@dataclass(frozen=True)
class EstimatorSettings:
    """
    How density estimates are built from samples: kernel, smoothness,
    bandwidth constant and floor policy.

    `tau=None` takes the floor from `default_floor`; `bandwidth_factor`
    multiplies the sample standard deviation to give c_h.
    """

    kernel: Kernel = GAUSSIAN
    beta: float = 1.0
    gamma: float = 0.02
    bandwidth_factor: float = SILVERMAN_FACTOR
    tau: Optional[float] = None
    floor_schedule: str = "fixed"

    def floor(self, n: int, space: Space, mode: str = ESTIMATION) -> float:
        if mode == INFERENCE:
            return 0.0
        if self.tau is not None:
            return self.tau
        return default_floor(n, space, mode, self.floor_schedule, self.beta)

    def bandwidth(
        self,
        sample: Sample,
        mode: str = ESTIMATION,
        nu: float = 0.0,
        pooled_with: tuple[Sample, ...] = (),
    ) -> float:
        scale = silverman_scale(
            sample, *pooled_with, factor=self.bandwidth_factor
        )
        return default_bandwidth(
            sample, mode, nu=nu, gamma=self.gamma, beta=self.beta, scale=scale
        )

    def estimate(
        self,
        sample: Sample,
        mode: str = ESTIMATION,
        h: Optional[float] = None,
        nu: float = 0.0,
    ) -> DensityEstimate:
        """
        TDDE or TKDE of `sample`, depending on its space, with the floor
        and (unless `h` is given) bandwidth of `mode`.
        """

        tau = self.floor(len(sample), sample.space, mode)

        if sample.space.is_discrete:
            return tdde_build(sample, tau)

        if h is None:
            h = self.bandwidth(sample, mode, nu=nu)

        logger.debug("TKDE n=%d h=%.5g tau=%g", len(sample), h, tau)
        return tkde_build(sample, h, self.kernel, tau)
