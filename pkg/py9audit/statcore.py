from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from math import pi, sqrt
from typing import Any, Optional, Union

import numpy as np
from scipy.special import ndtri

from py9audit.core import InvalidArgument

KeyPart = Union[int, str]


class KernelShape(Enum):
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class Kernel:
    """
    A spherically symmetric smoothing kernel on R^d with exponentially
    decaying tails.
    """

    shape: KernelShape = KernelShape.GAUSSIAN
    dim: int = 1

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise InvalidArgument("kernel dimension must be positive")

    @classmethod
    def from_name(cls, name: str, dim: int = 1) -> Kernel:
        try:
            return cls(KernelShape(name.lower()), dim)
        except ValueError:
            raise InvalidArgument(f"unknown kernel {name!r}") from None


GAUSSIAN = Kernel()

_GAUSS_NORM = 1.0 / sqrt(2.0 * pi)


def kernel_eval(kernel: Kernel, u: Any) -> Union[float, np.ndarray]:
    """
    Evaluates K(u).

    The last axis of `u` holds the d coordinates of a point; leading axes
    index points. A bare scalar is accepted for d = 1. The Gaussian kernel
    in d dimensions is the product of d one-dimensional standard normal
    densities.
    """

    u = np.asarray(u, dtype=float)

    if u.ndim == 0 and kernel.dim == 1:
        r2 = u * u
    elif u.ndim > 0 and u.shape[-1] == kernel.dim:
        r2 = np.sum(u * u, axis=-1)
    else:
        raise InvalidArgument(
            f"kernel of dimension {kernel.dim} evaluated at a point of "
            f"shape {u.shape}"
        )

    out = _GAUSS_NORM**kernel.dim * np.exp(-0.5 * r2)

    if np.ndim(out) == 0:
        return float(out)
    return out


def kernel_l2_norm(kernel: Kernel) -> float:
    """
    The integral of K^2 over R^d; (1 / (2 sqrt(pi)))^d for the Gaussian.
    """

    if kernel.shape is KernelShape.GAUSSIAN:
        return (1.0 / (2.0 * sqrt(pi))) ** kernel.dim

    raise InvalidArgument(f"unsupported kernel {kernel.shape}")


def std_normal_quantile(p: float) -> float:
    """
    Phi^-1(p), the quantile function of the standard normal distribution.
    """

    if not 0.0 < p < 1.0:
        raise InvalidArgument(f"quantile level must lie in (0, 1), not {p}")

    return float(ndtri(p))


def _key_word(part: KeyPart) -> int:
    if isinstance(part, (int, np.integer)) and not isinstance(part, bool):
        if part < 0:
            raise InvalidArgument("integer split keys must be non-negative")
        return int(part) & 0xFFFFFFFF

    digest = hashlib.blake2b(str(part).encode("utf-8"), digest_size=4)
    return int.from_bytes(digest.digest(), "little")


class Rng:
    """
    A seeded, splittable random source.

    Substreams are addressed by keys: `rng.split("stage", 2)` is a new,
    independent Rng whose stream depends only on the master seed and the
    full key path. An Rng is single-owner; parallel work takes one split
    per job.
    """

    def __init__(self, seed: int, key: tuple[int, ...] = ()) -> None:
        if not 0 <= int(seed) < 1 << 64:
            raise InvalidArgument("seed must be a 64 bit unsigned integer")

        self.seed = int(seed)
        self.key = tuple(key)
        self._seq = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self.generator = np.random.Generator(np.random.PCG64DXSM(self._seq))

    def split(self, *parts: KeyPart) -> Rng:
        return Rng(self.seed, self.key + tuple(_key_word(p) for p in parts))

    def uniform(self, size: Optional[Any] = None) -> Any:
        """
        Draws from the open interval (0, 1).
        """

        u = self.generator.random(size)
        tiny = np.finfo(float).tiny

        if size is None:
            return u if u > 0.0 else tiny

        u[u == 0.0] = tiny
        return u

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, key={self.key})"


def laplace_inverse_cdf(u: Any, b: float) -> Any:
    """
    Inverse distribution function of the centered Laplace law with scale b.
    """

    u = np.asarray(u, dtype=float)
    d = u - 0.5
    out = -b * np.sign(d) * np.log1p(-2.0 * np.abs(d))

    if out.ndim == 0:
        return float(out)
    return out


def sample_laplace(b: float, rng: Rng, size: Optional[Any] = None) -> Any:
    """
    Draws from the density exp(-|t| / b) / (2b) by inverse transform.
    """

    if not b > 0:
        raise InvalidArgument(f"Laplace scale must be positive, not {b}")

    return laplace_inverse_cdf(rng.uniform(size), b)
