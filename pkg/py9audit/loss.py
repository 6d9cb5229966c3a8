from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from math import inf
from typing import IO, Any, Optional, Sequence

import numpy as np

from py9audit.core import InvalidArgument, PY9Mechanism, Space, abs_log_ratio
from py9audit.density import (
    ESTIMATION,
    DensityEstimate,
    EstimatorSettings,
    Sample,
)
from py9audit.statcore import Rng

logger = logging.getLogger(__name__)

DEFAULT_GRID_SIZE = 2001
MIN_DPL_SAMPLES = 100


@dataclass(frozen=True, eq=False)
class EvalGrid:
    """
    The evaluation points of a loss profile: a uniform grid over an
    interval C = [lo, hi] (endpoints included) for scalar outputs, or an
    explicit list of symbols for discrete outputs.
    """

    space: Space
    points: np.ndarray

    @classmethod
    def interval(
        cls, lo: float, hi: float, size: int = DEFAULT_GRID_SIZE
    ) -> EvalGrid:
        if not lo < hi:
            raise InvalidArgument(f"empty evaluation interval [{lo}, {hi}]")
        if size < 2:
            raise InvalidArgument("an interval grid needs at least 2 points")

        return cls(Space.continuous(1), np.linspace(lo, hi, size))

    @classmethod
    def alphabet(cls, symbols: Sequence[int]) -> EvalGrid:
        symbols = list(symbols)
        if len(set(symbols)) != len(symbols):
            raise InvalidArgument("alphabet symbols must be unique")

        return cls(Space.discrete(), np.asarray(symbols, dtype=np.int64))

    @property
    def bounds(self) -> tuple[float, float]:
        return float(self.points[0]), float(self.points[-1])

    def extended(self, symbols: Sequence[int]) -> EvalGrid:
        """
        The union of this alphabet with `symbols`, in canonical order.
        """

        if not self.space.is_discrete:
            raise InvalidArgument("only alphabets can be extended")

        merged = np.union1d(self.points, np.asarray(symbols, dtype=np.int64))
        return EvalGrid(self.space, merged)

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True, eq=False)
class LossProfile:
    """
    The empirical loss tabulated over a grid, with its first maximiser
    `t_hat` and maximum `eps_hat`.
    """

    grid: EvalGrid
    values: np.ndarray
    t_hat: Any
    eps_hat: float
    fx: DensityEstimate = field(repr=False)
    fy: DensityEstimate = field(repr=False)

    def to_csv(
        self, fh: IO[str], analytic: Optional[np.ndarray] = None
    ) -> None:
        """
        Writes the profile as `t,loss` rows, with an `analytic` column when
        the true loss is given.
        """

        writer = csv.writer(fh, lineterminator="\n")
        header = ["t", "loss"] + ([] if analytic is None else ["analytic"])
        writer.writerow(header)

        for ix, t in enumerate(self.grid.points.tolist()):
            row = [t, float(self.values[ix])]
            if analytic is not None:
                row.append(float(analytic[ix]))
            writer.writerow([_fmt(v) for v in row])


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _check_compatible(fx: DensityEstimate, fy: DensityEstimate) -> None:
    if fx.space != fy.space:
        raise InvalidArgument(
            f"densities on different spaces: {fx.space} vs {fy.space}"
        )
    if (fx.tau == 0) != (fy.tau == 0):
        raise InvalidArgument("densities must share the floor policy")


def empirical_loss_at(
    fx: DensityEstimate, fy: DensityEstimate, t: Any
) -> float:
    """
    |ln f_x(t) - ln f_x'(t)|. Both estimates zero at t gives 0, exactly one
    of them zero gives +inf.
    """

    _check_compatible(fx, fy)
    return float(abs_log_ratio(fx(t), fy(t)))


def loss_profile(
    fx: DensityEstimate, fy: DensityEstimate, grid: EvalGrid
) -> LossProfile:
    """
    Tabulates the empirical loss over `grid`. Ties in the maximum go to the
    first grid point (smallest t, or first symbol in canonical order).
    """

    _check_compatible(fx, fy)
    if grid.space.is_discrete != fx.space.is_discrete:
        raise InvalidArgument(f"a {grid.space} grid for {fx.space} densities")

    values = abs_log_ratio(fx(grid.points), fy(grid.points))
    ix = int(np.argmax(values))

    return LossProfile(
        grid=grid,
        values=values,
        t_hat=grid.points[ix].item(),
        eps_hat=float(values[ix]),
        fx=fx,
        fy=fy,
    )


def dpl_from_samples(
    sample_x: Sample,
    sample_y: Sample,
    grid: EvalGrid,
    settings: Optional[EstimatorSettings] = None,
) -> LossProfile:
    """
    The DPL loss profile of two samples, with estimation-mode densities.

    For discrete samples the grid is extended by every observed symbol.
    """

    settings = settings or EstimatorSettings()

    fx = settings.estimate(sample_x, ESTIMATION)
    fy = settings.estimate(sample_y, ESTIMATION)

    if grid.space.is_discrete:
        grid = grid.extended(fx.symbols + fy.symbols)

    profile = loss_profile(fx, fy, grid)

    if profile.eps_hat == inf:
        logger.warning("infinite empirical loss at t=%s", profile.t_hat)

    return profile


def draw_sample(
    mechanism: PY9Mechanism, x: Any, n: int, rng: Rng
) -> Sample:
    return Sample(mechanism.sample(x, rng, size=n), mechanism.space)


def dpl_profile(
    mechanism: PY9Mechanism,
    x: Any,
    x_prime: Any,
    n: int,
    grid: EvalGrid,
    rng: Rng,
    settings: Optional[EstimatorSettings] = None,
) -> LossProfile:
    """
    Draws n outputs of A(x) and n of A(x') from the "x" and "y" splits of
    `rng` and returns their loss profile over `grid`.
    """

    if n < MIN_DPL_SAMPLES:
        raise InvalidArgument(
            f"DPL needs at least {MIN_DPL_SAMPLES} samples, not {n}"
        )

    sample_x = draw_sample(mechanism, x, n, rng.split("x"))
    sample_y = draw_sample(mechanism, x_prime, n, rng.split("y"))

    return dpl_from_samples(sample_x, sample_y, grid, settings)


def dpl(
    mechanism: PY9Mechanism,
    x: Any,
    x_prime: Any,
    n: int,
    grid: EvalGrid,
    rng: Rng,
    settings: Optional[EstimatorSettings] = None,
) -> tuple[Any, float]:
    """
    Estimates the location t_hat and size eps_hat of the largest privacy
    violation between inputs x and x' from fresh samples.
    """

    profile = dpl_profile(mechanism, x, x_prime, n, grid, rng, settings)
    return profile.t_hat, profile.eps_hat
