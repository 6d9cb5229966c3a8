from typing import Any, Optional, Union

DSA = dict[str, Any]

from py9audit.core import InvalidArgument, PY9Mechanism

from .py9exponential import PY9Exponential
from .py9gaussian import PY9Gaussian
from .py9laplace import PY9Laplace
from .py9noisymax import PY9NoisyMax, PY9ReportNoisyMax
from .py9rr import PY9RandomizedResponse
from .py9svt import PY9SVT

# registry name: (class, fixed constructor arguments)
MECHANISMS: dict[str, tuple[type[PY9Mechanism], DSA]] = {
    "laplace": (PY9Laplace, {}),
    "report_noisy_max": (PY9ReportNoisyMax, {}),
    "noisy_max": (PY9NoisyMax, {}),
    "exponential": (PY9Exponential, {}),
    "svt2": (PY9SVT, {"variant": "SVT2"}),
    "svt4": (PY9SVT, {"variant": "SVT4"}),
    "svt5": (PY9SVT, {"variant": "SVT5"}),
    "svt6": (PY9SVT, {"variant": "SVT6"}),
    "randomized_response": (PY9RandomizedResponse, {}),
    "gaussian": (PY9Gaussian, {}),
}


def mechanism_class(name: str) -> tuple[type[PY9Mechanism], DSA]:
    try:
        return MECHANISMS[name]
    except KeyError:
        raise InvalidArgument(f"unknown mechanism {name!r}") from None


def mechanism_params(name: str) -> dict[str, tuple[type, str]]:
    """
    The settable parameters of a registered mechanism, as
    `key: (type, description)`.
    """

    cls, fixed = mechanism_class(name)
    return {k: v for k, v in cls.PARAMS.items() if k not in fixed}


def mechanism_defaults(name: str) -> DSA:
    cls, _ = mechanism_class(name)
    return dict(cls.DEFAULTS)


def build_mechanism(name: str, **params: Any) -> PY9Mechanism:
    cls, fixed = mechanism_class(name)
    return cls(name=name, **fixed, **params)


def true_epsilon(
    mechanism: Union[PY9Mechanism, str], **params: Any
) -> Optional[float]:
    """
    The global privacy level of a mechanism instance, or of a registered
    mechanism built from `params`. None if unknown.
    """

    if isinstance(mechanism, str):
        if mechanism not in MECHANISMS:
            return None
        mechanism = build_mechanism(mechanism, **params)

    return mechanism.true_epsilon()


def mechanism_catalog() -> list[DSA]:
    """
    Returns: list of dict:
        "name": (str, "Registry name"),
        "class": (str, "Implementing class"),
        "space": (str, "Output space kind"),
        "params": (dict, "key: (type name, description)"),
        "defaults": (dict, "Experiment defaults"),
    """

    out = []
    for name, (cls, _) in MECHANISMS.items():
        build_args = {"epsilon0": 1.0} if "epsilon0" in cls.PARAMS else {}
        instance = build_mechanism(name, **build_args)
        out.append(
            {
                "name": name,
                "class": cls.__name__,
                "space": instance.space.kind,
                "params": {
                    k: (t.__name__, desc)
                    for k, (t, desc) in mechanism_params(name).items()
                },
                "defaults": mechanism_defaults(name),
            }
        )

    return out
