from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from math import inf, log, sqrt
from typing import Any, Optional, Sequence

import numpy as np

from py9audit.core import (
    InvalidArgument,
    PY9Mechanism,
    Space,
    jsonable,
    run_pool,
)
from py9audit.density import (
    INFERENCE,
    DensityEstimate,
    EstimatorSettings,
    tdde_build,
    tkde_build,
)
from py9audit.loss import EvalGrid, dpl, draw_sample
from py9audit.patterns import AdjacentPair, as_pair
from py9audit.statcore import GAUSSIAN, Kernel, Rng, kernel_l2_norm
from py9audit.statcore import std_normal_quantile

logger = logging.getLogger(__name__)

CSV_HEADER = ("pair_id", "eps_hat_max", "t_hat_max", "lb", "alpha", "seed")


def sigma_hat(
    fx: float, fy: float, space: Space, kernel: Kernel = GAUSSIAN
) -> float:
    """
    The estimated asymptotic variance sigma_hat^2 of the empirical loss at
    a point where the two densities take the values fx and fy. The caller
    takes the square root.

    Discrete: 1/fx + 1/fy - 2. Continuous: int K^2 * (1/fx + 1/fy).
    """

    if not (fx > 0 and fy > 0):
        raise InvalidArgument(
            f"density values must be positive, got {fx} and {fy}"
        )

    if space.is_discrete:
        if fx > 1 or fy > 1:
            raise InvalidArgument("probabilities cannot exceed 1")
        return 1.0 / fx + 1.0 / fy - 2.0

    return kernel_l2_norm(kernel) * (1.0 / fx + 1.0 / fy)


def c_norm(
    N: int, h: Optional[float], d: int = 1, space: Space = Space.discrete()
) -> float:
    """
    The normalising rate c_N: sqrt(N) for discrete outputs, sqrt(N h^d)
    for continuous ones.
    """

    if N < 1:
        raise InvalidArgument("sample size must be positive")

    if space.is_discrete:
        return sqrt(N)

    if h is None or not h > 0:
        raise InvalidArgument("continuous c_N needs a positive bandwidth")

    return sqrt(N * h**d)


def ci_lower_bound(
    loss: float, var: float, c_n: float, alpha: float
) -> float:
    """
    loss + Phi^-1(alpha) * sqrt(var) / c_n, the left end of the one-sided
    level 1-alpha interval.
    """

    if not 0 < alpha < 1:
        raise InvalidArgument(f"alpha must lie in (0, 1), not {alpha}")

    return loss + std_normal_quantile(alpha) * sqrt(var) / c_n


def pointwise_ci(
    fx: DensityEstimate,
    fy: DensityEstimate,
    t: Any,
    N: Optional[int] = None,
    alpha: float = 0.05,
    kernel: Optional[Kernel] = None,
) -> tuple[float, float]:
    """
    One-sided asymptotic confidence interval [lb, inf) of level 1-alpha for
    the privacy loss at the point t, from two density estimates built on
    samples of size N (their own size if None).

    Continuous estimates must share their bandwidth.
    """

    N = N or fx.n
    kernel = kernel or fx.kernel or GAUSSIAN
    vx, vy = fx(t), fy(t)

    if not fx.space.is_discrete and fx.h != fy.h:
        raise InvalidArgument("pointwise intervals need a common bandwidth")

    var = sigma_hat(vx, vy, fx.space, kernel)
    c_n = c_norm(N, fx.h, kernel.dim, fx.space)
    loss = abs(log(vx) - log(vy))

    return ci_lower_bound(loss, var, c_n, alpha), inf


@dataclass(frozen=True)
class PairEstimate:
    pair_id: int
    x: Any
    x_prime: Any
    eps_hat: float
    t_hat: Any


@dataclass
class AuditReport:
    """
    Result of one MPL run.

    By convention, `err_unstable_location` is set when a stage-2 density
    vanished at t_hat_max; the bound is then computed from values clamped
    at 1/(2N) and should not be trusted.
    """

    mechanism: str
    pairs: list[PairEstimate]
    selected: int
    x_max: Any
    x_prime_max: Any
    t_hat_max: Any
    loss_star: float
    f_star: tuple[float, float]
    h_max: Optional[float]
    sigma_hat: float
    c_n: float
    alpha: float
    lb: float
    n: int
    N: int
    seed: int
    err_unstable_location: bool = False
    config: dict[str, Any] = field(default_factory=dict)
    runtime_ms: Optional[float] = None

    @property
    def eps_hat_max(self) -> float:
        return self.pairs[self.selected].eps_hat

    def to_dict(self, runtime: bool = True) -> dict[str, Any]:
        out = jsonable(asdict(self))
        if not runtime:
            out.pop("runtime_ms")
        return out

    def to_json(self, runtime: bool = True) -> str:
        return json.dumps(self.to_dict(runtime), indent=2, sort_keys=True)

    def csv_row(self, runtime: bool = True) -> list[Any]:
        row = [
            self.selected,
            self.eps_hat_max,
            self.t_hat_max,
            self.lb,
            self.alpha,
            self.seed,
        ]
        if runtime:
            row.append(self.runtime_ms)
        return row

    def to_csv(self, runtime: bool = True) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER + (("runtime_ms",) if runtime else ()))
        writer.writerow(self.csv_row(runtime))
        return buf.getvalue()


def _stage_one(
    mechanism: PY9Mechanism,
    pair: AdjacentPair,
    pair_id: int,
    n: int,
    grid: EvalGrid,
    rng: Rng,
    settings: EstimatorSettings,
) -> PairEstimate:
    t_hat, eps_hat = dpl(
        mechanism, pair.x, pair.x_prime, n, grid, rng, settings
    )
    logger.debug("pair %d: eps_hat=%.4f at t=%s", pair_id, eps_hat, t_hat)
    return PairEstimate(pair_id, pair.x, pair.x_prime, eps_hat, t_hat)


def _stage_two_densities(
    mechanism: PY9Mechanism,
    pair: PairEstimate,
    n: int,
    N: int,
    rng: Rng,
    settings: EstimatorSettings,
) -> tuple[float, float, Optional[float]]:
    sample_x = draw_sample(mechanism, pair.x, N, rng.split("x"))
    sample_y = draw_sample(mechanism, pair.x_prime, N, rng.split("y"))

    if mechanism.space.is_discrete:
        fx = tdde_build(sample_x, 0.0)
        fy = tdde_build(sample_y, 0.0)
        return fx.raw(pair.t_hat), fy.raw(pair.t_hat), None

    # one common, undersmoothed bandwidth for both samples
    nu = log(N / n) / log(n)
    h_max = settings.bandwidth(
        sample_x, INFERENCE, nu=nu, pooled_with=(sample_y,)
    )
    fx = tkde_build(sample_x, h_max, settings.kernel, 0.0)
    fy = tkde_build(sample_y, h_max, settings.kernel, 0.0)

    return fx.raw(pair.t_hat), fy.raw(pair.t_hat), h_max


def mpl(
    mechanism: PY9Mechanism,
    pairs: Sequence[Any],
    n: int,
    N: int,
    grid: EvalGrid,
    alpha: float,
    rng: Rng,
    settings: Optional[EstimatorSettings] = None,
    workers: Optional[int] = 1,
    stage2_rng: Optional[Rng] = None,
) -> AuditReport:
    """
    Runs the two-stage MPL audit.

    Stage 1 estimates (t_hat, eps_hat) for every pair from size-n samples
    (split (pair index, 1) of `rng`) and selects the first pair with the
    largest eps_hat. Stage 2 draws fresh size-N samples for that pair
    (split (pair index, 2), or `stage2_rng`), evaluates untruncated
    densities at t_hat_max and returns
    LB = loss* + Phi^-1(alpha) * sigma_hat / c_N.
    """

    settings = settings or EstimatorSettings()
    pairs = [as_pair(p) for p in pairs]

    if not pairs:
        raise InvalidArgument("MPL needs at least one pair of inputs")
    if not N > n:
        raise InvalidArgument(f"stage-2 size N={N} must exceed n={n}")
    if not 0 < alpha < 1:
        raise InvalidArgument(f"alpha must lie in (0, 1), not {alpha}")

    t0 = time.perf_counter()

    table = run_pool(
        _stage_one,
        [
            (mechanism, p, ix, n, grid, rng.split(ix, 1), settings)
            for ix, p in enumerate(pairs)
        ],
        workers,
    )

    # np.argmax keeps the first of tied maxima
    selected = int(np.argmax([p.eps_hat for p in table]))
    best = table[selected]

    if stage2_rng is None:
        stage2_rng = rng.split(selected, 2)

    fx, fy, h_max = _stage_two_densities(
        mechanism, best, n, N, stage2_rng, settings
    )

    unstable = fx == 0 or fy == 0
    if unstable:
        logger.warning(
            "stage-2 density vanishes at t=%s (%g, %g), clamping to 1/(2N)",
            best.t_hat,
            fx,
            fy,
        )
        fx = fx or 1.0 / (2 * N)
        fy = fy or 1.0 / (2 * N)

    loss_star = abs(log(fx) - log(fy))
    var = sigma_hat(fx, fy, mechanism.space, settings.kernel)
    c_n = c_norm(N, h_max, settings.kernel.dim, mechanism.space)
    lb = ci_lower_bound(loss_star, var, c_n, alpha)

    runtime_ms = 1e3 * (time.perf_counter() - t0)

    logger.info(
        "%s: pair %d selected, eps_hat=%.4f, LB=%.4f",
        mechanism.name,
        selected,
        best.eps_hat,
        lb,
    )

    return AuditReport(
        mechanism=mechanism.name,
        pairs=table,
        selected=selected,
        x_max=best.x,
        x_prime_max=best.x_prime,
        t_hat_max=best.t_hat,
        loss_star=loss_star,
        f_star=(fx, fy),
        h_max=h_max,
        sigma_hat=sqrt(var),
        c_n=c_n,
        alpha=alpha,
        lb=lb,
        n=n,
        N=N,
        seed=rng.seed,
        err_unstable_location=unstable,
        runtime_ms=runtime_ms,
    )
