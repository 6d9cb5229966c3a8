from math import inf
from typing import Any, Optional

import numpy as np

from py9audit.core import (
    InvalidArgument,
    PY9Mechanism,
    Space,
    as_vector,
    check_positive,
)
from py9audit.statcore import Rng, laplace_inverse_cdf

VARIANTS = ("SVT2", "SVT4", "SVT5", "SVT6")

# answer sequences are packed into int64 symbols behind a sentinel bit
MAX_ENCODED_QUERIES = 62


class PY9SVT(PY9Mechanism):
    """
    Sparse vector technique: compares noisy counting queries against a
    noisy threshold T and answers above/below for each, in order.

    Variants, with budget epsilon0 and sensitivity 1:
        SVT2: threshold noise Lap(2/epsilon0), query noise Lap(4M/epsilon0),
            threshold redrawn after every "above", stops after M of them.
        SVT4: threshold noise Lap(4/epsilon0), query noise
            Lap(8M/(3 epsilon0)), stops after M "above" answers.
        SVT5: threshold noise Lap(1/epsilon0), exact queries, never stops.
            Not private.
        SVT6: threshold noise Lap(2/epsilon0), query noise Lap(2/epsilon0),
            never stops. Not private.

    Output symbols: for the stopping variants with M = 1, the 1-based
    position of the first "above" answer, or 0 if every answer is "below".
    Otherwise, the answered sequence read as a binary number (above = 1)
    behind a leading 1 bit that fixes its length.
    """

    PARAMS = {
        "variant": (str, f"One of {', '.join(VARIANTS)}."),
        "epsilon0": (float, "Privacy budget."),
        "T": (float, "Threshold."),
        "M": (int, "Number of 'above' answers before stopping."),
        "d": (int, "Number of counting queries."),
    }

    DEFAULTS = {
        "n": 100_000,
        "N": 500_000,
        "pairs": "table1",
    }

    def __init__(
        self,
        variant: str = "SVT2",
        epsilon0: float = 1.0,
        T: float = 1.0,
        M: int = 1,
        d: int = 10,
        **kwargs,
    ) -> None:
        super().__init__(**kwargs)

        variant = variant.upper()
        if variant not in VARIANTS:
            raise InvalidArgument(f"unknown SVT variant {variant!r}")
        check_positive(epsilon0=epsilon0)
        if int(M) < 1:
            raise InvalidArgument(f"M must be at least 1, not {M}")
        if not 1 <= int(d) <= MAX_ENCODED_QUERIES:
            raise InvalidArgument(
                f"d must lie in [1, {MAX_ENCODED_QUERIES}], not {d}"
            )

        self.variant = variant
        self.epsilon0 = float(epsilon0)
        self.T = float(T)
        self.M = int(M)
        self.d = int(d)

    @property
    def stops(self) -> bool:
        return self.variant in ("SVT2", "SVT4")

    @property
    def scales(self) -> tuple[float, Optional[float]]:
        """
        (threshold noise scale, query noise scale or None).
        """

        eps = self.epsilon0

        if self.variant == "SVT2":
            e1 = e2 = eps / 2.0
            return 1.0 / e1, 2.0 * self.M / e2
        if self.variant == "SVT4":
            e1, e2 = eps / 4.0, 3.0 * eps / 4.0
            return 1.0 / e1, 2.0 * self.M / e2
        if self.variant == "SVT5":
            return 1.0 / eps, None

        e1 = e2 = eps / 2.0
        return 1.0 / e1, 1.0 / e2

    @property
    def first_above_encoding(self) -> bool:
        return self.stops and self.M == 1

    @property
    def space(self) -> Space:
        return Space.discrete()

    def alphabet(self, x: Any) -> tuple[int, ...]:
        if self.first_above_encoding:
            return tuple(range(self.d + 1))
        return ()

    def _answers(self, q: np.ndarray, rng: Rng, size: int) -> np.ndarray:
        """
        The above/below answers as a (size, d) array of 1/0, with -1 for
        queries left unanswered after stopping.
        """

        rho_scale, nu_scale = self.scales
        redraws = self.M if self.variant == "SVT2" else 1

        rho = laplace_inverse_cdf(rng.uniform((size, redraws)), rho_scale)
        if nu_scale is None:
            nu = np.zeros((size, self.d))
        else:
            nu = laplace_inverse_cdf(rng.uniform((size, self.d)), nu_scale)

        answers = np.full((size, self.d), -1, dtype=np.int64)
        count = np.zeros(size, dtype=np.int64)
        rows = np.arange(size)

        for i in range(self.d):
            active = count < self.M if self.stops else np.ones(size, bool)
            threshold = self.T + rho[rows, np.minimum(count, redraws - 1)]
            above = q[i] + nu[:, i] >= threshold

            answers[:, i] = np.where(active, above, -1)
            count += active & above

        return answers

    def encode(self, answers: np.ndarray) -> np.ndarray:
        """
        Maps rows of above/below answers to integer symbols.
        """

        if self.first_above_encoding:
            above = answers == 1
            first = np.argmax(above, axis=1) + 1
            return np.where(above.any(axis=1), first, 0).astype(np.int64)

        code = np.ones(len(answers), dtype=np.int64)
        for i in range(answers.shape[1]):
            bit = answers[:, i]
            answered = bit >= 0
            code = np.where(answered, 2 * code + np.maximum(bit, 0), code)

        return code

    def sample(self, x: Any, rng: Rng, size: Optional[int] = None) -> Any:
        q = as_vector(x, self.d, "query vector")
        out = self.encode(self._answers(q, rng, 1 if size is None else size))

        return int(out[0]) if size is None else out

    def true_epsilon(self) -> float:
        if self.stops:
            return self.epsilon0
        return inf
