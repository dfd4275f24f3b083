"""Activation catalog: forward values, analytic derivatives, sub-differentials.

Ten activations are supported, addressable by canonical lowercase name:
sigmoid, tanh, sine, relu, elu, prelu, gelu, silu, snake, leakysinelu.
All math is evaluated in 64-bit floats. Functions accept scalars or numpy
arrays and broadcast elementwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError, DomainError

__all__ = [
    "ACTIVATION_NAMES",
    "ActivationKind",
    "PropertyRecord",
    "Subdifferential",
    "activation",
    "evaluate",
    "derivative",
    "subdifferential",
    "catalog",
    "kink_points",
    "array_value",
    "array_derivative",
]

ACTIVATION_NAMES = (
    "sigmoid",
    "tanh",
    "sine",
    "relu",
    "elu",
    "prelu",
    "gelu",
    "silu",
    "snake",
    "leakysinelu",
)

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ActivationKind:
    """One activation variant plus its scalar parameters.

    ``learnable`` names the subset of ``params`` that a model may train
    (per-site parameter tensors are created by the model builder; the
    values here act as initial/default values).
    """

    name: str
    params: Mapping[str, float] = field(default_factory=dict)
    learnable: frozenset[str] = frozenset()


@dataclass(frozen=True)
class Subdifferential:
    """Closed interval of admissible slopes at a point."""

    lower: float
    upper: float

    @property
    def is_singleton(self) -> bool:
        return self.lower == self.upper


@dataclass(frozen=True)
class PropertyRecord:
    """Static properties of one activation kind.

    ``lower_limit`` / ``upper_limit`` are the limits of the function as x
    tends to -inf / +inf: a finite float, +-inf, or None when the limit
    does not exist. ``deviation`` is set when the stored value intentionally
    differs from the commonly tabulated one (see the sine entry).
    """

    kind: ActivationKind
    lower_limit: float | None
    upper_limit: float | None
    monotonic: bool
    semi_periodic_period: float | None = None
    deviation: str | None = None


def _sigmoid(x):
    # exp(-|x|) never overflows; pick the stable branch per sign.
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def _phi(x):
    return np.exp(-0.5 * np.square(x)) / _SQRT_2PI


# Forward formulas. Each takes (x, params) with x a float64 scalar or array.
_FORWARD: dict[str, Callable] = {
    "sigmoid": lambda x, p: _sigmoid(x),
    "tanh": lambda x, p: np.tanh(x),
    "sine": lambda x, p: np.sin(x),
    "relu": lambda x, p: np.maximum(0.0, x),
    "elu": lambda x, p: np.where(x > 0, x, p["alpha"] * np.expm1(np.minimum(x, 0.0))),
    "prelu": lambda x, p: np.where(x >= 0, x, p["alpha"] * x),
    "gelu": lambda x, p: x * ndtr(x),
    "silu": lambda x, p: x * _sigmoid(x),
    "snake": lambda x, p: x + np.square(np.sin(p["a"] * x)) / p["a"],
    "leakysinelu": lambda x, p: _leakysinelu(x),
}


def _leakysinelu(x):
    s = np.square(np.sin(x)) + x
    return np.where(x > 0, s, 0.5 * s)


def _leakysinelu_deriv(x):
    s = np.sin(2.0 * x) + 1.0
    # Canonical sub-gradient at 0 is the positive-branch value 1.
    return np.where(x >= 0, s, 0.5 * s)


def _silu_deriv(x):
    s = _sigmoid(x)
    return s * (1.0 + x * (1.0 - s))


# Analytic derivatives, with the canonical sub-gradient at kinks:
# relu'(0) = 0, prelu'(0) = 1, leakysinelu'(0) = 1.
_DERIVATIVE: dict[str, Callable] = {
    "sigmoid": lambda x, p: _sigmoid(x) * (1.0 - _sigmoid(x)),
    "tanh": lambda x, p: 1.0 - np.square(np.tanh(x)),
    "sine": lambda x, p: np.cos(x),
    "relu": lambda x, p: np.where(x > 0, 1.0, 0.0),
    "elu": lambda x, p: np.where(x > 0, 1.0, p["alpha"] * np.exp(np.minimum(x, 0.0))),
    "prelu": lambda x, p: np.where(x >= 0, 1.0, p["alpha"]),
    "gelu": lambda x, p: ndtr(x) + x * _phi(x),
    "silu": lambda x, p: _silu_deriv(x),
    "snake": lambda x, p: 1.0 + np.sin(2.0 * p["a"] * x),
    "leakysinelu": lambda x, p: _leakysinelu_deriv(x),
}

# (defaults, learnable-by-default) per parametric kind.
_PARAM_DEFAULTS: dict[str, tuple[dict[str, float], frozenset[str]]] = {
    "elu": ({"alpha": 1.0}, frozenset()),
    "prelu": ({"alpha": 0.25}, frozenset({"alpha"})),
    "snake": ({"a": 1.0}, frozenset()),
}

_KINKS: dict[str, tuple[float, ...]] = {
    "relu": (0.0,),
    "prelu": (0.0,),
    "leakysinelu": (0.0,),
}

_INF = float("inf")

_SINE_DEVIATION = (
    "commonly tabulated as bounded in [0, 1]; sin(x) has no limit at +-inf "
    "and its range is [-1, 1], so no limit is stored"
)

# (lower_limit, upper_limit, monotonic, semi_periodic_period, deviation)
_CATALOG: dict[str, tuple] = {
    "sigmoid": (0.0, 1.0, True, None, None),
    "tanh": (-1.0, 1.0, True, None, None),
    "sine": (None, None, False, 2.0 * math.pi, _SINE_DEVIATION),
    "relu": (0.0, _INF, True, None, None),
    "elu": (-1.0, _INF, True, None, None),
    "prelu": (-_INF, _INF, True, None, None),
    "gelu": (0.0, _INF, False, None, None),
    "silu": (0.0, _INF, False, None, None),
    "snake": (-_INF, _INF, True, math.pi, None),
    "leakysinelu": (-_INF, _INF, True, math.pi, None),
}


def activation(name: str, *, learnable=None, **params: float) -> ActivationKind:
    """Build a validated ActivationKind from its canonical name."""
    if name not in ACTIVATION_NAMES:
        raise ConfigError(
            f"unknown activation {name!r}; choose one of {', '.join(ACTIVATION_NAMES)}"
        )
    defaults, default_learnable = _PARAM_DEFAULTS.get(name, ({}, frozenset()))
    unknown = set(params) - set(defaults)
    if unknown:
        raise ConfigError(f"{name} takes no parameter(s) {sorted(unknown)}")
    merged = {k: float(params.get(k, v)) for k, v in defaults.items()}
    _validate_params(name, merged)
    flags = default_learnable if learnable is None else frozenset(learnable)
    if not flags <= set(merged):
        raise ConfigError(f"learnable flags {sorted(flags)} not all parameters of {name}")
    return ActivationKind(name=name, params=merged, learnable=flags)


def _validate_params(name: str, params: dict[str, float]) -> None:
    for key, value in params.items():
        if not math.isfinite(value):
            raise ConfigError(f"{name} parameter {key} must be finite, got {value}")
    if name == "elu" and params["alpha"] <= 0:
        raise ConfigError(f"elu alpha must be > 0, got {params['alpha']}")
    if name == "snake" and params["a"] == 0:
        raise ConfigError("snake a must be nonzero")


def _as_kind(kind) -> ActivationKind:
    if isinstance(kind, ActivationKind):
        return kind
    return activation(kind)


def array_value(kind, x) -> np.ndarray:
    """Vectorized forward value; no domain checks (engine-internal path)."""
    kind = _as_kind(kind)
    return _FORWARD[kind.name](np.asarray(x, dtype=np.float64), kind.params)


def array_derivative(kind, x) -> np.ndarray:
    """Vectorized analytic derivative with canonical sub-gradients at kinks."""
    kind = _as_kind(kind)
    return _DERIVATIVE[kind.name](np.asarray(x, dtype=np.float64), kind.params)


def evaluate(kind, x: float) -> float:
    """Forward value at a scalar point."""
    kind = _as_kind(kind)
    if not math.isfinite(x):
        raise DomainError(f"activation input must be finite, got {x}")
    return float(array_value(kind, x))


def derivative(kind, x: float) -> float:
    """Analytic derivative at a scalar point (canonical value at kinks)."""
    kind = _as_kind(kind)
    if not math.isfinite(x):
        raise DomainError(f"activation input must be finite, got {x}")
    return float(array_derivative(kind, x))


def kink_points(kind) -> tuple[float, ...]:
    """Points where the derivative jumps (empty for smooth kinds)."""
    return _KINKS.get(_as_kind(kind).name, ())


def subdifferential(kind, x: float) -> Subdifferential:
    """Set of admissible slopes at x: a singleton except at kinks.

    At a kink the interval spans the one-sided derivative limits, e.g.
    relu at 0 gives [0, 1] and leakysinelu at 0 gives [0.5, 1].
    """
    kind = _as_kind(kind)
    if not math.isfinite(x):
        raise DomainError(f"activation input must be finite, got {x}")
    if x in kink_points(kind):
        if kind.name == "relu":
            return Subdifferential(0.0, 1.0)
        if kind.name == "prelu":
            alpha = kind.params["alpha"]
            return Subdifferential(min(alpha, 1.0), max(alpha, 1.0))
        if kind.name == "leakysinelu":
            # One-sided limits of eq. (sin(2x)+1) and its halved branch at 0.
            return Subdifferential(0.5, 1.0)
    d = derivative(kind, x)
    return Subdifferential(d, d)


def catalog(kind) -> PropertyRecord:
    """Static property record: limits at +-inf, monotonicity, periodicity."""
    kind = _as_kind(kind)
    lower, upper, mono, period, deviation = _CATALOG[kind.name]
    if kind.name == "snake":
        period = math.pi / abs(kind.params["a"])
    return PropertyRecord(
        kind=kind,
        lower_limit=lower,
        upper_limit=upper,
        monotonic=mono,
        semi_periodic_period=period,
        deviation=deviation,
    )


# Parametric forms used by the autodiff engine, where the parameter is a
# trainable array broadcast against x (per neuron or per channel).


def prelu_value(x, alpha):
    return np.where(x >= 0, x, alpha * x)


def prelu_grad_x(x, alpha):
    return np.where(x >= 0, 1.0, alpha)


def prelu_grad_alpha(x):
    """Partial of the output w.r.t. alpha, elementwise in x."""
    return np.where(x < 0, x, 0.0)


def snake_value(x, a):
    return x + np.square(np.sin(a * x)) / a


def snake_grad_x(x, a):
    return 1.0 + np.sin(2.0 * a * x)


def snake_grad_a(x, a):
    s2 = np.sin(2.0 * a * x)
    return x * s2 / a - np.square(np.sin(a * x)) / np.square(a)
