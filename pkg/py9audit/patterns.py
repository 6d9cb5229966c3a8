from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass
from numbers import Integral, Real
from typing import Any, Iterator, Optional, Sequence

from py9audit.core import InvalidArgument, jsonable

logger = logging.getLogger(__name__)

QUERY = "query"
HAMMING = "hamming"
STATISTIC = "statistic"

MAX_BINARY_DIM = 20
MAX_CUBE_DIM = 6

NEIGHBORHOOD_PRESETS = ("binary_neighborhood", "cube_grid_neighborhood")


def _as_input(v: Any) -> Any:
    """
    Normalises an input to a hashable python value: numbers stay numbers,
    sequences become tuples of numbers.
    """

    if hasattr(v, "tolist"):
        v = v.tolist()
    if isinstance(v, (list, tuple)):
        return tuple(_as_input(it) for it in v)

    if isinstance(v, bool) or not isinstance(v, Real):
        raise InvalidArgument(f"inputs must be numbers or vectors, not {v!r}")

    return int(v) if isinstance(v, Integral) else float(v)


def _is_int_vector(v: Any) -> bool:
    return isinstance(v, tuple) and all(isinstance(it, int) for it in v)


def is_query_adjacent(q: Sequence[int], q_prime: Sequence[int]) -> bool:
    """
    True iff every entry of the two query vectors differs by at most 1.
    """

    if len(q) != len(q_prime):
        raise InvalidArgument(
            f"query vectors of different lengths {len(q)}, {len(q_prime)}"
        )

    return all(abs(a - b) <= 1 for a, b in zip(q, q_prime))


def hamming_distance(x: Sequence[Any], x_prime: Sequence[Any]) -> int:
    """
    The number of positions at which two databases differ.
    """

    if len(x) != len(x_prime):
        raise InvalidArgument("databases of different sizes")

    return sum(a != b for a, b in zip(x, x_prime))


@dataclass(frozen=True)
class AdjacentPair:
    """
    Two neighbouring inputs. The adjacency predicate of `kind` is checked
    on construction.
    """

    x: Any
    x_prime: Any
    kind: str = STATISTIC

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", _as_input(self.x))
        object.__setattr__(self, "x_prime", _as_input(self.x_prime))

        if not is_adjacent(self):
            raise InvalidArgument(
                f"{self.x} and {self.x_prime} are not {self.kind}-adjacent"
            )

    def swapped(self) -> AdjacentPair:
        return AdjacentPair(self.x_prime, self.x, self.kind)


def is_adjacent(pair: AdjacentPair) -> bool:
    x, y = pair.x, pair.x_prime

    if pair.kind == QUERY:
        return is_query_adjacent(x, y)
    if pair.kind == HAMMING:
        return hamming_distance(x, y) <= 1
    if pair.kind == STATISTIC:
        if isinstance(x, tuple) or isinstance(y, tuple):
            return (
                isinstance(x, tuple)
                and isinstance(y, tuple)
                and len(x) == len(y)
            )
        return True

    raise InvalidArgument(f"unknown adjacency kind {pair.kind!r}")


def as_pair(p: Any, kind: Optional[str] = None) -> AdjacentPair:
    """
    Coerces `p` (an AdjacentPair, or a 2-sequence or {x, x_prime} mapping of
    inputs) to an AdjacentPair. Integer vectors default to query adjacency,
    anything else to statistic adjacency.
    """

    if isinstance(p, AdjacentPair):
        return p

    if isinstance(p, dict):
        try:
            x, y = p["x"], p["x_prime"]
        except KeyError:
            raise InvalidArgument(f"pair mapping needs x and x_prime: {p}")
        kind = kind or p.get("kind")
    else:
        try:
            x, y = p
        except (TypeError, ValueError):
            raise InvalidArgument(f"a pair needs exactly two inputs: {p!r}")

    if kind is None:
        x_in, y_in = _as_input(x), _as_input(y)
        both_int = _is_int_vector(x_in) and _is_int_vector(y_in)
        kind = QUERY if both_int else STATISTIC

    return AdjacentPair(x, y, kind)


@dataclass(frozen=True)
class PatternSet:
    """
    Named query-vector pairs of length d.

    `err_omitted` lists patterns that could not be generated for this d.
    """

    d: int
    names: tuple[str, ...]
    pairs: tuple[AdjacentPair, ...]
    err_omitted: tuple[str, ...] = ()

    def __iter__(self) -> Iterator[AdjacentPair]:
        return iter(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def __getitem__(self, name: str) -> AdjacentPair:
        return self.pairs[self.names.index(name)]


def table1_pairs(d: int = 6) -> PatternSet:
    """
    The seven classic counting-query patterns, generalised to length d.

    Split patterns (Half Half, X Shape) cut after the first d/2 entries and
    are omitted for odd d.
    """

    if d < 2:
        raise InvalidArgument(f"patterns need at least 2 queries, not {d}")

    ones = (1,) * d
    half = d // 2
    rest = d - 1

    patterns = [
        ("One Above", ones, (2,) + (1,) * rest),
        ("One Below", ones, (0,) + (1,) * rest),
        ("One Above Rest Below", ones, (2,) + (0,) * rest),
        ("One Below Rest Above", ones, (0,) + (2,) * rest),
    ]
    omitted = []

    if d % 2 == 0:
        patterns.append(("Half Half", ones, (0,) * half + (1,) * half))
    else:
        omitted.append("Half Half")

    patterns.append(("All Above All Below", ones, (2,) * d))

    if d % 2 == 0:
        patterns.append(
            ("X Shape", (1,) * half + (0,) * half, (0,) * half + (1,) * half)
        )
    else:
        omitted.append("X Shape")

    if omitted:
        logger.warning("odd d=%d, omitting patterns %s", d, omitted)

    return PatternSet(
        d=d,
        names=tuple(p[0] for p in patterns),
        pairs=tuple(AdjacentPair(q, qp, QUERY) for _, q, qp in patterns),
        err_omitted=tuple(omitted),
    )


def binary_neighborhood(d: int) -> list[AdjacentPair]:
    """
    The zero query vector paired with every other vector in {0, 1}^d.
    """

    if not 1 <= d <= MAX_BINARY_DIM:
        raise InvalidArgument(
            f"binary neighbourhoods are enumerated for 1 <= d <= "
            f"{MAX_BINARY_DIM}, not {d}"
        )

    zero = (0,) * d

    return [
        AdjacentPair(zero, q, QUERY)
        for q in itertools.product((0, 1), repeat=d)
        if q != zero
    ]


def cube_grid_neighborhood(k: int) -> list[AdjacentPair]:
    """
    The centre of the unit cube [0, 1]^k paired with every other point of
    the grid {0, 1/2, 1}^k.
    """

    if not 1 <= k <= MAX_CUBE_DIM:
        raise InvalidArgument(
            f"cube grids are enumerated for 1 <= k <= {MAX_CUBE_DIM}, not {k}"
        )

    centre = (0.5,) * k

    return [
        AdjacentPair(centre, s, STATISTIC)
        for s in itertools.product((0.0, 0.5, 1.0), repeat=k)
        if s != centre
    ]


def _steps(x: Any, step: Any) -> list[AdjacentPair]:
    return [as_pair((x, step(b / 10)), STATISTIC) for b in range(1, 11)]


def preset_pairs(name: str, d: int = 6, k: int = 3) -> list[AdjacentPair]:
    """
    Named pair lists.

    Args:
        name:
            one of "laplace_steps" (0 vs b/10), "noisy_max_steps" (0^k vs
            (b/10)^k), "exponential_steps" (1 vs 1 + b/10), "table1",
            "binary_neighborhood", "cube_grid_neighborhood" or "unit_pair"
            (0 vs 1)
        d:
            query vector length, for the query presets
        k:
            statistic dimension, for the vector statistic presets
    """

    if name == "laplace_steps":
        return _steps(0.0, lambda s: s)
    if name == "noisy_max_steps":
        return _steps((0.0,) * k, lambda s: (s,) * k)
    if name == "exponential_steps":
        return _steps(1.0, lambda s: 1.0 + s)
    if name == "table1":
        return list(table1_pairs(d))
    if name == "binary_neighborhood":
        return binary_neighborhood(d)
    if name == "cube_grid_neighborhood":
        return cube_grid_neighborhood(k)
    if name == "unit_pair":
        return [AdjacentPair(0, 1, STATISTIC)]

    raise InvalidArgument(f"unknown pair preset {name!r}")


def pairs_to_json(pairs: Sequence[AdjacentPair]) -> str:
    return json.dumps(
        [
            {"x": jsonable(p.x), "x_prime": jsonable(p.x_prime), "kind": p.kind}
            for p in pairs
        ]
    )


def pairs_from_json(raw: str) -> list[AdjacentPair]:
    return [as_pair(p) for p in json.loads(raw)]
