from __future__ import annotations

import asyncio as aio
import logging
import os
from abc import abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import timedelta
from functools import lru_cache
from math import floor, inf, log10
from numbers import Real
from statistics import median
from typing import TYPE_CHECKING, Any, Callable, Iterable, Optional, Sequence
from typing import TypeVar

import numpy as np

if TYPE_CHECKING:
    from py9audit.statcore import Rng

T = TypeVar("T")
N = TypeVar("N", int, float)

logger = logging.getLogger(__name__)

WORKERS_ENV = "PY9AUDIT_WORKERS"


class InvalidArgument(ValueError):
    """
    Raised when an operation is called outside of its preconditions.
    """


class ConfigError(InvalidArgument):
    """
    A configuration could not be parsed or validated.

    `field` names the offending key; `line` and `column` are set for parse
    errors.
    """

    def __init__(
        self,
        msg: str,
        field: Optional[str] = None,
        line: Optional[int] = None,
        column: Optional[int] = None,
    ) -> None:
        self.field = field
        self.line = line
        self.column = column

        where = ""
        if field is not None:
            where = f"[{field}] "
        elif line is not None:
            where = f"[line {line}, column {column}] "

        super().__init__(where + msg)


@dataclass(frozen=True)
class Space:
    """
    Output space tag of a mechanism or a sample.

    kind is "discrete" (a countable alphabet of integer symbols) or
    "continuous" (R^dim).
    """

    kind: str
    dim: int = 1

    def __post_init__(self) -> None:
        if self.kind not in ("discrete", "continuous"):
            raise InvalidArgument(f"unknown space kind {self.kind!r}")
        if self.dim < 1:
            raise InvalidArgument("space dimension must be positive")

    @classmethod
    def discrete(cls) -> Space:
        return cls("discrete", 1)

    @classmethod
    def continuous(cls, dim: int = 1) -> Space:
        return cls("continuous", dim)

    @property
    def is_discrete(self) -> bool:
        return self.kind == "discrete"

    def __str__(self) -> str:
        return "discrete" if self.is_discrete else f"continuous({self.dim})"


def abs_log_ratio(fx: Any, fy: Any) -> np.ndarray:
    """
    |ln fx - ln fy| elementwise, with the convention inf - inf := 0.

    Zero on both sides gives 0, zero on one side gives +inf.
    """

    fx = np.asarray(fx, dtype=float)
    fy = np.asarray(fy, dtype=float)

    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.abs(np.log(fx) - np.log(fy))

    out = np.where((fx == 0) & (fy == 0), 0.0, out)
    return np.where((fx == 0) ^ (fy == 0), inf, out)


def as_vector(x: Any, length: int, what: str = "input") -> np.ndarray:
    """
    `x` as a float vector of the given length.
    """

    v = np.asarray(x, dtype=float).reshape(-1)
    if len(v) != length:
        raise InvalidArgument(f"{what} must have length {length}, not {len(v)}")

    return v


def check_positive(**kwargs: Any) -> None:
    for k, v in kwargs.items():
        if v is None or not v > 0:
            raise InvalidArgument(f"{k} must be positive, not {v}")


class PY9Mechanism:
    """
    A randomized algorithm under audit, seen as a black box sampler.

    Individual mechanisms should inherit directly from this class and
    override `sample`, and declare their output space with `space`.

    Mechanisms whose output law is known in closed form also override
    `density`; this unlocks `analytic_loss` and `pair_epsilon`, which the
    harness uses as oracles. `true_epsilon` returns the global privacy
    level, `math.inf` for mechanisms that are not private at all, or None
    if it is unknown.

    The `PARAMS` class attribute documents the constructor parameters as
    `key: (type, description)` elements, in the same spirit as a read API.
    `DEFAULTS` holds the experiment defaults used when a config does not
    name them (sample sizes, evaluation set, pair preset).
    """

    PARAMS: dict[str, tuple[type, str]] = {
        "epsilon0": (float, "Targeted privacy level."),
    }

    DEFAULTS: dict[str, Any] = {
        "n": 20_000,
        "N": 50_000,
        "C": (-1.0, 1.0),
        "pairs": "unit_pair",
    }

    def __init__(self, name=None, **kwargs) -> None:
        """
        Args:
            name:
                name of the mechanism in reports. if None, will be set to
                the class name.
        """

        self.name = name or self.__class__.__name__

        if kwargs:
            raise InvalidArgument(f"Got unknown arguments {kwargs.keys()}!")

    @property
    @abstractmethod
    def space(self) -> Space:
        """
        The declared output space.
        """

    @abstractmethod
    def sample(self, x: Any, rng: Rng, size: Optional[int] = None) -> Any:
        """
        Run the mechanism on input `x`.

        Returns one output if `size` is None, else a numpy array of `size`
        independent outputs.
        """

    def params(self) -> dict[str, Any]:
        """
        The constructor parameters, for report provenance.
        """
        return {k: getattr(self, k) for k in self.PARAMS if hasattr(self, k)}

    def alphabet(self, x: Any) -> tuple[int, ...]:
        """
        The known output alphabet on input `x`. Only meaningful for discrete
        mechanisms; empty if the mechanism does not declare one.
        """
        return ()

    def density(self, x: Any, t: Any) -> Optional[np.ndarray]:
        """
        Analytic density (continuous) or probability mass (discrete) of the
        output on input `x`, evaluated at the points `t`. None if unknown.
        """
        return None

    def true_epsilon(self) -> Optional[float]:
        return None

    def analytic_loss(
        self, x: Any, x_prime: Any, t: Any
    ) -> Optional[np.ndarray]:
        """
        The privacy loss function |ln f_x(t) - ln f_x'(t)| at points `t`,
        or None if the densities are not known.
        """

        fx = self.density(x, t)
        fy = self.density(x_prime, t)
        if fx is None or fy is None:
            return None

        return abs_log_ratio(fx, fy)

    def pair_epsilon(
        self, x: Any, x_prime: Any, points: Sequence[Any]
    ) -> Optional[float]:
        """
        The data-specific privacy violation of (x, x') restricted to the
        evaluation points, or None if the densities are not known.
        """

        loss = self.analytic_loss(x, x_prime, np.asarray(points))
        if loss is None:
            return None
        return float(np.max(loss))

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{self.__class__.__name__}({args})"


def resolve_workers(workers: Optional[int] = None) -> int:
    """
    Worker pool size: the environment override wins, then `workers`, then
    the cpu count.
    """

    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            workers = int(env)
        except ValueError:
            logger.warning("ignoring non-integer %s=%r", WORKERS_ENV, env)

    if workers is None or workers < 1:
        workers = os.cpu_count() or 1

    return workers


async def _gather_in_pool(
    fn: Callable[..., T], jobs: Sequence[tuple], executor: ThreadPoolExecutor
) -> list[T]:
    loop = aio.get_running_loop()
    futures = [loop.run_in_executor(executor, fn, *j) for j in jobs]
    return list(await aio.gather(*futures))


def run_pool(
    fn: Callable[..., T], jobs: Iterable[tuple], workers: Optional[int] = None
) -> list[T]:
    """
    Runs `fn(*job)` for every job on a thread pool and returns the results
    in job order, independently of completion order.

    `workers=None` sizes the pool with `resolve_workers`. With a single
    worker the jobs run inline.
    """

    jobs = list(jobs)
    if workers is None:
        workers = resolve_workers()
    workers = min(max(1, workers), max(1, len(jobs)))

    if workers == 1:
        return [fn(*j) for j in jobs]

    logger.debug("fanning out %d jobs over %d workers", len(jobs), workers)

    with ThreadPoolExecutor(max_workers=workers) as executor:
        return aio.run(_gather_in_pool(fn, jobs, executor))


@lru_cache(maxsize=1024)
def format_duration(val: timedelta | Real) -> str:
    """
    Formats a duration in seconds in a human-readable way.

    Has a fixed width of 9.
    """

    if isinstance(val, timedelta):
        val = val.total_seconds()

    if val < 60:
        if val <= 0:
            return "    0 s  "
        elif val < 1e-6:
            unit = "ns"
            display_val = val * 1e9
        elif val < 1e-3:
            unit = "us"
            display_val = val * 1e6
        elif val < 1.0:
            unit = "ms"
            display_val = val * 1e3
        else:
            unit = "s"
            display_val = val

        precision = max(0, 2 - floor(log10(display_val)))

        return f"  {display_val: >3.{precision}f} {unit} "

    elif val < 86400:
        if val < 3600:
            fst, snd_s = divmod(val, 60)
            snd = int(snd_s)
            first_unit, second_unit = "m", "s"
        else:
            fst, snd_s = divmod(val, 3600)
            snd = int(snd_s / 60)
            first_unit, second_unit = "h", "m"

        return f"{int(fst): >2d} {first_unit} {snd: >2d} {second_unit}"

    else:
        return "  > 1 d  "


def med_mad(xs: Iterable[N]) -> tuple[N, N]:
    """
    Returns the median and median absolute deviation of the passed iterable.
    """

    xs = list(xs)
    med = median(xs)
    mad = median(abs(x - med) for x in xs)

    return med, mad


def jsonable(obj: Any) -> Any:
    """
    Recursively converts tuples, numpy arrays and numpy scalars into plain
    python lists and numbers, so `obj` can be passed to `json.dumps`.
    """

    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
