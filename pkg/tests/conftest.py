from typing import Any, Optional

import numpy as np
import pytest

from py9audit.core import PY9Mechanism, Space
from py9audit.statcore import Rng


class PY9Echo(PY9Mechanism):
    """
    Publishes its input bit unchanged. Its two output laws have disjoint
    supports, which drives every density to zero somewhere.
    """

    PARAMS = {}

    @property
    def space(self) -> Space:
        return Space.discrete()

    def alphabet(self, x: Any) -> tuple[int, ...]:
        return (0, 1)

    def sample(self, x: Any, rng: Rng, size: Optional[int] = None) -> Any:
        # consume the stream like a real mechanism would
        rng.uniform(size)
        if size is None:
            return int(x)
        return np.full(size, int(x), dtype=np.int64)


@pytest.fixture
def rng() -> Rng:
    return Rng(20240517)


@pytest.fixture
def echo() -> PY9Echo:
    return PY9Echo()


@pytest.fixture(autouse=True)
def _no_worker_override(monkeypatch):
    monkeypatch.delenv("PY9AUDIT_WORKERS", raising=False)
