"""Registry of service behaviors run by the emulator.

A behavior decides how much work a message costs and which messages are
emitted when processing completes. Built-in kinds:

``producer``
    Edge data source. Injected records enter its queue; on completion the
    record is forwarded unchanged to ``target``.
``transformer``
    Pre-processing stage. Forwards ``ceil(factor * size_bits)`` bits to
    ``target``.
``sink``
    Terminal analytics stage. Completion records end-to-end latency.
``bowl``
    Synthetic sink whose cost is ``sum((x_k - c_k)**2)`` service units over
    its ``x_<k>`` / ``c_<k>`` params. Used to test the optimizer end to end.

Every kind accepts ``base_units`` and ``per_bit_units`` (service units per
message and per bit, default 0). Forwarding kinds accept ``route`` which is
``round_robin`` (default) or ``random`` across the target's instances.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Tuple

from .errors import UnknownBehavior
from .units import to_rational

ROUTES = ("round_robin", "random")


@dataclass(frozen=True)
class Behavior:
    kind: str
    base_units: Fraction = Fraction(0)
    per_bit_units: Fraction = Fraction(0)
    target: Optional[str] = None
    route: str = "round_robin"
    factor: Fraction = Fraction(1)
    record_bits: Optional[int] = None
    terminal: bool = False

    def service_units(self, size_bits: int) -> Fraction:
        return self.base_units + self.per_bit_units * size_bits

    def outputs(self, size_bits: int) -> List[Tuple[str, int]]:
        """Messages emitted at completion as ``(target service, size_bits)``."""
        if self.terminal or self.target is None:
            return []
        return [(self.target, max(1, math.ceil(self.factor * size_bits)))]


# Each check returns (param key, violation code, message) triples.
Check = List[Tuple[str, str, str]]


def _rational_param(params, key, default, problems, *, positive=False, nonneg=True):
    raw = params.get(key)
    if raw is None:
        return Fraction(default)
    try:
        value = to_rational(raw)
    except ValueError:
        problems.append((key, "InvalidBehaviorParam", f"{key}={raw!r} is not a number"))
        return Fraction(default)
    if positive and value <= 0:
        problems.append((key, "InvalidBehaviorParam", f"{key} must be > 0"))
    elif nonneg and value < 0:
        problems.append((key, "InvalidBehaviorParam", f"{key} must be >= 0"))
    return value


def _common(params, problems):
    return {
        "base_units": _rational_param(params, "base_units", 0, problems),
        "per_bit_units": _rational_param(params, "per_bit_units", 0, problems),
    }


def _target(params, problems, service_ids):
    target = params.get("target")
    if target is None:
        problems.append(("target", "InvalidBehaviorParam", "missing required param 'target'"))
    elif service_ids is not None and target not in service_ids:
        problems.append(("target", "UnknownTarget", f"target {target!r} is not a declared service"))
    route = params.get("route", "round_robin")
    if route not in ROUTES:
        problems.append(("route", "InvalidBehaviorParam", f"route must be one of {ROUTES}"))
    return target, route


def _build_producer(params, problems, service_ids=None):
    fields = _common(params, problems)
    target, route = _target(params, problems, service_ids)
    bits = _rational_param(params, "size_bits", 1000, problems, positive=True)
    if bits.denominator != 1:
        problems.append(("size_bits", "InvalidBehaviorParam", "size_bits must be an integer"))
    return Behavior("producer", target=target, route=route, record_bits=int(bits), **fields)


def _build_transformer(params, problems, service_ids=None):
    fields = _common(params, problems)
    target, route = _target(params, problems, service_ids)
    factor = _rational_param(params, "factor", 1, problems, positive=True)
    if factor > 1:
        problems.append(("factor", "InvalidBehaviorParam", "factor must be in (0, 1]"))
    return Behavior("transformer", target=target, route=route, factor=factor, **fields)


def _build_sink(params, problems, service_ids=None):
    return Behavior("sink", terminal=True, **_common(params, problems))


def _build_bowl(params, problems, service_ids=None):
    fields = _common(params, problems)
    cost = Fraction(0)
    for key in sorted(params):
        if key.startswith("x_"):
            x = _rational_param(params, key, 0, problems, nonneg=False)
            c = _rational_param(params, "c_" + key[2:], 0, problems, nonneg=False)
            cost += (x - c) ** 2
    fields["base_units"] += cost
    return Behavior("bowl", terminal=True, **fields)


Builder = Callable[..., Behavior]

_REGISTRY: Dict[str, Builder] = {
    "producer": _build_producer,
    "transformer": _build_transformer,
    "sink": _build_sink,
    "bowl": _build_bowl,
}


def register_behavior(kind: str, builder: Builder) -> None:
    """Add a behavior kind. ``builder(params, problems, service_ids=None)``
    must return a :class:`Behavior` and append problems it finds."""
    _REGISTRY[kind] = builder


def is_registered(kind: str) -> bool:
    return kind in _REGISTRY


def registered_kinds():
    return sorted(_REGISTRY)


def check_params(kind, params, service_ids) -> Check:
    problems: Check = []
    _REGISTRY[kind](params, problems, service_ids)
    return problems


def make_behavior(kind: str, params) -> Behavior:
    if kind not in _REGISTRY:
        raise UnknownBehavior(kind)
    problems: Check = []
    behavior = _REGISTRY[kind](params, problems)
    if problems:
        key, _, message = problems[0]
        raise ValueError(f"behavior {kind}: {message}")
    return behavior
