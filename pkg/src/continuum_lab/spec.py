"""Experiment specification: types, YAML parsing, validation, digests.

An experiment file looks like::

    name: demo
    seed: 42
    repetitions: 2
    layers:
      - name: edge
        services:
          - {id: cam, kind: producer, quantity: 2, cpu_capacity: 100,
             params: {target: sink, size_bits: 1000000}}
      - name: cloud
        services:
          - {id: sink, kind: sink, cpu_capacity: 1000}
    network:
      - {src: edge, dst: cloud, delay: 50ms, bandwidth: 1Mbps}
    workflow:
      - {name: start, kind: launch}
      - {name: feed, kind: inject, args: {target: cam, count: 10, period: 1s}}
      - {name: run, kind: wait_until, args: {sim_time_ns: 20s}}
      - {name: collect, kind: gather}
    parameters:
      cam.size_bits: [500000, 1000000]

All times are integer nanoseconds once parsed; rationals are
:class:`fractions.Fraction`.
"""

import hashlib
import json
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, List, Optional, Tuple, Union

import yaml

from . import behaviors
from .errors import SchemaError, SpecSyntaxError
from .units import (
    format_rational,
    parse_bandwidth_bps,
    parse_duration_ns,
    to_rational,
)

PHASE_KINDS = ("launch", "inject", "wait_until", "gather")

VIOLATION_CODES = (
    "EmptyName",
    "NoLayers",
    "EmptyLayerName",
    "DuplicateLayer",
    "DuplicateServiceId",
    "UnknownBehavior",
    "InvalidBehaviorParam",
    "UnknownTarget",
    "NonPositiveQuantity",
    "NonPositiveCpu",
    "UnknownLayer",
    "NegativeDelay",
    "NegativeJitter",
    "NonPositiveBandwidth",
    "LossOutOfRange",
    "DuplicateNetworkRule",
    "UnknownPhaseKind",
    "InvalidPhaseArgs",
    "NonIncreasingWaitUntil",
    "DuplicateDimension",
    "EmptyDomain",
    "InvalidRange",
    "NonPositiveRepetitions",
    "CapacityExceeded",
)

_PHASE_ARGS = {
    "launch": {"services"},
    "inject": {"target", "count", "period", "size_bits", "spacing"},
    "wait_until": {"sim_time_ns"},
    "gather": set(),
}


# --------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class ServiceDef:
    id: str
    kind: str
    quantity: int = 1
    cpu_capacity: Fraction = Fraction(1)
    params: Dict[str, str] = field(default_factory=dict)

    def instance_ids(self) -> List[str]:
        return [f"{self.id}.{k}" for k in range(self.quantity)]


@dataclass(frozen=True)
class Layer:
    name: str
    services: Tuple[ServiceDef, ...] = ()


@dataclass(frozen=True)
class NetworkRule:
    src_layer: str
    dst_layer: str
    delay_ns: int = 0
    jitter_ns: int = 0
    bandwidth_bps: Optional[int] = None  # None means unlimited
    loss_rate: Fraction = Fraction(0)
    symmetric: bool = True

    def directions(self) -> List[Tuple[str, str]]:
        pairs = [(self.src_layer, self.dst_layer)]
        if self.symmetric and self.src_layer != self.dst_layer:
            pairs.append((self.dst_layer, self.src_layer))
        return pairs


@dataclass(frozen=True)
class WorkflowPhase:
    name: str
    kind: str
    args: Dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class Discrete:
    values: tuple

    def points(self):
        return list(self.values)

    @property
    def size(self):
        return len(self.values)

    @property
    def numeric(self):
        return all(_is_number(v) for v in self.values)


@dataclass(frozen=True)
class IntRange:
    """Values ``lo, lo+step, ...`` not exceeding ``hi``."""

    lo: Union[int, Fraction]
    hi: Union[int, Fraction]
    step: Union[int, Fraction] = 1

    @property
    def size(self):
        if self.step <= 0 or self.hi < self.lo:
            return 0
        return int((self.hi - self.lo) // self.step) + 1

    def value_at(self, k):
        if isinstance(self.lo, int) and isinstance(self.step, int):
            return self.lo + k * self.step
        return _normalize_number(Fraction(self.lo) + k * Fraction(self.step))

    def points(self):
        return [self.value_at(k) for k in range(self.size)]

    numeric = True


@dataclass(frozen=True)
class Continuous:
    lo: Fraction
    hi: Fraction
    numeric = True


Domain = Union[Discrete, IntRange, Continuous]


@dataclass(frozen=True)
class ParameterSpace:
    dimensions: Tuple[Tuple[str, Domain], ...] = ()

    @property
    def names(self):
        return [name for name, _ in self.dimensions]

    def domain(self, name):
        for n, d in self.dimensions:
            if n == name:
                return d
        raise KeyError(name)

    def __len__(self):
        return len(self.dimensions)


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    layers: Tuple[Layer, ...]
    network_rules: Tuple[NetworkRule, ...] = ()
    workflow: Tuple[WorkflowPhase, ...] = ()
    parameters: ParameterSpace = ParameterSpace()
    repetitions: int = 1
    master_seed: int = 0

    def services(self):
        """Yield ``(layer, service)`` in declaration order."""
        for layer in self.layers:
            for svc in layer.services:
                yield layer, svc

    def service(self, service_id) -> Optional[ServiceDef]:
        for _, svc in self.services():
            if svc.id == service_id:
                return svc
        return None

    def layer_of(self, service_id) -> Optional[str]:
        for layer, svc in self.services():
            if svc.id == service_id:
                return layer.name
        return None

    def with_seed(self, seed: int) -> "ExperimentSpec":
        return replace(self, master_seed=seed)


@dataclass(frozen=True)
class Violation:
    code: str
    path: str
    message: str

    def __str__(self):
        return f"{self.code} at {self.path}: {self.message}"


def _is_number(v):
    return isinstance(v, (int, Fraction, float)) and not isinstance(v, bool)


def _normalize_number(v):
    if isinstance(v, Fraction) and v.denominator == 1:
        return int(v)
    return v


# --------------------------------------------------------------------------
# YAML loading


class _Loader(yaml.SafeLoader):
    """Safe loader that reads YAML floats as exact Fractions."""


def _construct_fraction(loader, node):
    text = loader.construct_scalar(node).replace("_", "")
    try:
        return Fraction(text)
    except ValueError:
        raise SchemaError(f"line {node.start_mark.line + 1}", f"unsupported number {text!r}")


_Loader.add_constructor("tag:yaml.org,2002:float", _construct_fraction)


class _Dumper(yaml.SafeDumper):
    pass


def _represent_fraction(dumper, value):
    if value.denominator == 1:
        return dumper.represent_int(int(value))
    den = value.denominator
    while den % 2 == 0:
        den //= 2
    while den % 5 == 0:
        den //= 5
    if den == 1:
        # terminating decimal: emit exactly
        from decimal import Decimal, localcontext

        with localcontext() as ctx:
            ctx.prec = 200
            text = format(Decimal(value.numerator) / Decimal(value.denominator), "f")
        return dumper.represent_scalar("tag:yaml.org,2002:float", text)
    return dumper.represent_str(format_rational(value))


_Dumper.add_representer(Fraction, _represent_fraction)


def _expect_map(obj, path, allowed, required=()):
    if not isinstance(obj, dict):
        raise SchemaError(path, f"expected a mapping, got {type(obj).__name__}")
    for key in obj:
        if key not in allowed:
            raise SchemaError(f"{path}.{key}" if path else str(key), f"unknown key {key!r}")
    for key in required:
        if key not in obj:
            raise SchemaError(path or "<root>", f"missing required key {key!r}")
    return obj


def _expect_list(obj, path):
    if obj is None:
        return []
    if not isinstance(obj, list):
        raise SchemaError(path, f"expected a list, got {type(obj).__name__}")
    return obj


def _expect_str(obj, path):
    if not isinstance(obj, str):
        raise SchemaError(path, f"expected a string, got {type(obj).__name__}")
    return obj


def _expect_int(obj, path):
    if isinstance(obj, bool) or not isinstance(obj, int):
        raise SchemaError(path, f"expected an integer, got {obj!r}")
    return obj


def _expect_bool(obj, path):
    if not isinstance(obj, bool):
        raise SchemaError(path, f"expected a boolean, got {obj!r}")
    return obj


def _convert(fn, obj, path):
    try:
        return fn(obj)
    except (ValueError, ZeroDivisionError) as exc:
        raise SchemaError(path, str(exc)) from None


def _scalar_to_str(value, path):
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, Fraction):
        return str(value)
    raise SchemaError(path, f"expected a scalar, got {type(value).__name__}")


def _string_map(obj, path):
    if obj is None:
        return {}
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected a mapping of strings")
    return {
        _scalar_to_str(k, path): _scalar_to_str(v, f"{path}.{k}") for k, v in obj.items()
    }


def _parse_service(obj, path):
    _expect_map(obj, path, {"id", "kind", "quantity", "cpu_capacity", "params"}, ("id", "kind"))
    return ServiceDef(
        id=_expect_str(obj["id"], f"{path}.id"),
        kind=_expect_str(obj["kind"], f"{path}.kind"),
        quantity=_expect_int(obj.get("quantity", 1), f"{path}.quantity"),
        cpu_capacity=_convert(to_rational, obj.get("cpu_capacity", 1), f"{path}.cpu_capacity"),
        params=_string_map(obj.get("params"), f"{path}.params"),
    )


def _parse_layer(obj, path):
    _expect_map(obj, path, {"name", "services"}, ("name",))
    services = _expect_list(obj.get("services"), f"{path}.services")
    return Layer(
        name=_expect_str(obj["name"], f"{path}.name"),
        services=tuple(_parse_service(s, f"{path}.services[{j}]") for j, s in enumerate(services)),
    )


def _parse_rule(obj, path):
    _expect_map(
        obj,
        path,
        {"src", "dst", "delay", "jitter", "bandwidth", "loss", "symmetric"},
        ("src", "dst"),
    )
    return NetworkRule(
        src_layer=_expect_str(obj["src"], f"{path}.src"),
        dst_layer=_expect_str(obj["dst"], f"{path}.dst"),
        delay_ns=_convert(parse_duration_ns, obj.get("delay", 0), f"{path}.delay"),
        jitter_ns=_convert(parse_duration_ns, obj.get("jitter", 0), f"{path}.jitter"),
        bandwidth_bps=_convert(parse_bandwidth_bps, obj.get("bandwidth"), f"{path}.bandwidth"),
        loss_rate=_convert(to_rational, obj.get("loss", 0), f"{path}.loss"),
        symmetric=_expect_bool(obj.get("symmetric", True), f"{path}.symmetric"),
    )


def _parse_phase(obj, path):
    _expect_map(obj, path, {"name", "kind", "args"}, ("name", "kind"))
    return WorkflowPhase(
        name=_expect_str(obj["name"], f"{path}.name"),
        kind=_expect_str(obj["kind"], f"{path}.kind"),
        args=_string_map(obj.get("args"), f"{path}.args"),
    )


def _parse_number(obj, path):
    if isinstance(obj, bool):
        raise SchemaError(path, f"expected a number, got {obj!r}")
    return _normalize_number(_convert(to_rational, obj, path))


def parse_domain(obj, path="domain") -> Domain:
    """Parse ``[v1, v2]``, ``{range: [lo, hi], step: s}`` or ``{continuous: [lo, hi]}``."""
    if isinstance(obj, list):
        values = []
        for k, v in enumerate(obj):
            if _is_number(v):
                values.append(_normalize_number(to_rational(v)))
            elif isinstance(v, (str, bool)):
                values.append(v)
            else:
                raise SchemaError(f"{path}[{k}]", "expected a scalar")
        return Discrete(tuple(values))
    if isinstance(obj, dict):
        if "range" in obj:
            _expect_map(obj, path, {"range", "step"})
            bounds = _expect_list(obj["range"], f"{path}.range")
            if len(bounds) != 2:
                raise SchemaError(f"{path}.range", "expected [lo, hi]")
            lo, hi = (_parse_number(b, f"{path}.range") for b in bounds)
            step = _parse_number(obj.get("step", 1), f"{path}.step")
            return IntRange(lo, hi, step)
        if "continuous" in obj:
            _expect_map(obj, path, {"continuous"})
            bounds = _expect_list(obj["continuous"], f"{path}.continuous")
            if len(bounds) != 2:
                raise SchemaError(f"{path}.continuous", "expected [lo, hi]")
            lo, hi = (Fraction(_parse_number(b, f"{path}.continuous")) for b in bounds)
            return Continuous(lo, hi)
        unknown = next(iter(obj), "<empty>")
        raise SchemaError(f"{path}.{unknown}", f"unknown key {unknown!r}")
    raise SchemaError(path, "expected a list or a mapping")


def parse_space(obj, path="parameters") -> ParameterSpace:
    if obj is None:
        return ParameterSpace()
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected a mapping of name -> domain")
    return ParameterSpace(
        tuple(
            (_expect_str(name, path), parse_domain(dom, f"{path}.{name}"))
            for name, dom in obj.items()
        )
    )


def load_yaml(text):
    try:
        return yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise SpecSyntaxError(str(exc)) from None


def parse_spec(text: str) -> ExperimentSpec:
    """Parse an experiment YAML document.

    Raises:
        SpecSyntaxError: the text is not well-formed YAML.
        SchemaError: unknown key, missing key or wrong scalar type.
    """
    doc = load_yaml(text)
    return spec_from_dict(doc)


def spec_from_dict(doc) -> ExperimentSpec:
    _expect_map(
        doc,
        "",
        {"name", "seed", "repetitions", "layers", "network", "workflow", "parameters"},
        ("name", "layers"),
    )
    seed = _expect_int(doc.get("seed", 0), "seed")
    if not 0 <= seed < 2**64:
        raise SchemaError("seed", "seed must be a 64-bit unsigned integer")
    layers = _expect_list(doc["layers"], "layers")
    rules = _expect_list(doc.get("network"), "network")
    phases = _expect_list(doc.get("workflow"), "workflow")
    return ExperimentSpec(
        name=_expect_str(doc["name"], "name"),
        layers=tuple(_parse_layer(l, f"layers[{i}]") for i, l in enumerate(layers)),
        network_rules=tuple(_parse_rule(r, f"network[{i}]") for i, r in enumerate(rules)),
        workflow=tuple(_parse_phase(p, f"workflow[{i}]") for i, p in enumerate(phases)),
        parameters=parse_space(doc.get("parameters")),
        repetitions=_expect_int(doc.get("repetitions", 1), "repetitions"),
        master_seed=seed,
    )


def load_spec(path) -> ExperimentSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read())


# --------------------------------------------------------------------------
# serialization


def _domain_doc(domain):
    if isinstance(domain, Discrete):
        return list(domain.values)
    if isinstance(domain, IntRange):
        return {"range": [domain.lo, domain.hi], "step": domain.step}
    return {"continuous": [domain.lo, domain.hi]}


def spec_to_dict(spec: ExperimentSpec) -> dict:
    return {
        "name": spec.name,
        "seed": spec.master_seed,
        "repetitions": spec.repetitions,
        "layers": [
            {
                "name": layer.name,
                "services": [
                    {
                        "id": s.id,
                        "kind": s.kind,
                        "quantity": s.quantity,
                        "cpu_capacity": s.cpu_capacity,
                        "params": dict(s.params),
                    }
                    for s in layer.services
                ],
            }
            for layer in spec.layers
        ],
        "network": [
            {
                "src": r.src_layer,
                "dst": r.dst_layer,
                "delay": r.delay_ns,
                "jitter": r.jitter_ns,
                "bandwidth": "unlimited" if r.bandwidth_bps is None else r.bandwidth_bps,
                "loss": r.loss_rate,
                "symmetric": r.symmetric,
            }
            for r in spec.network_rules
        ],
        "workflow": [
            {"name": p.name, "kind": p.kind, "args": dict(p.args)} for p in spec.workflow
        ],
        "parameters": {name: _domain_doc(d) for name, d in spec.parameters.dimensions},
    }


def dump_spec(spec: ExperimentSpec) -> str:
    """Serialize to an experiment YAML document that :func:`parse_spec` reads back."""
    return yaml.dump(spec_to_dict(spec), Dumper=_Dumper, sort_keys=False, allow_unicode=False)


def _canon(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, float):
        return format_rational(Fraction(value))
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=True)
    if isinstance(value, dict):
        items = sorted(value.items())
        return "{" + ",".join(f"{_canon(k)}:{_canon(v)}" for k, v in items) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_canon(v) for v in value) + "]"
    raise TypeError(f"cannot canonicalize {type(value).__name__}")


def _canon_domain(domain):
    if isinstance(domain, Discrete):
        return {"type": "discrete", "values": list(domain.values)}
    if isinstance(domain, IntRange):
        return {"type": "range", "lo": domain.lo, "hi": domain.hi, "step": domain.step}
    return {"type": "continuous", "lo": Fraction(domain.lo), "hi": Fraction(domain.hi)}


def canonical_serialization(spec: ExperimentSpec) -> str:
    """Canonical text of the experiment design.

    Keys are sorted, integers are decimal, rational-valued fields are reduced
    ``p/q`` (unquoted), strings are JSON-quoted ASCII and lists keep their
    declared order. The master seed is not part of the design and is
    excluded; archives record it separately.
    """
    doc = {
        "name": spec.name,
        "repetitions": spec.repetitions,
        "layers": [
            {
                "name": layer.name,
                "services": [
                    {
                        "id": s.id,
                        "kind": s.kind,
                        "quantity": s.quantity,
                        "cpu_capacity": Fraction(s.cpu_capacity),
                        "params": dict(s.params),
                    }
                    for s in layer.services
                ],
            }
            for layer in spec.layers
        ],
        "network_rules": [
            {
                "src_layer": r.src_layer,
                "dst_layer": r.dst_layer,
                "delay_ns": r.delay_ns,
                "jitter_ns": r.jitter_ns,
                "bandwidth_bps": r.bandwidth_bps,
                "loss_rate": Fraction(r.loss_rate),
                "symmetric": r.symmetric,
            }
            for r in spec.network_rules
        ],
        "workflow": [{"name": p.name, "kind": p.kind, "args": dict(p.args)} for p in spec.workflow],
        "parameters": [
            {"name": name, "domain": _canon_domain(d)} for name, d in spec.parameters.dimensions
        ],
    }
    return _canon(doc)


def canonical_digest(spec: ExperimentSpec) -> str:
    return hashlib.sha256(canonical_serialization(spec).encode("ascii")).hexdigest()


# --------------------------------------------------------------------------
# validation


def _path_key(path):
    return [(0, int(t), "") if t.isdigit() else (1, 0, t) for t in re.findall(r"\d+|[^\d]+", path)]


def sort_violations(violations):
    return sorted(violations, key=lambda v: (_path_key(v.path), v.code, v.message))


def _check_phase_args(phase, path, out):
    allowed = _PHASE_ARGS[phase.kind]
    for key in phase.args:
        if key not in allowed:
            out.append(Violation("InvalidPhaseArgs", f"{path}.args.{key}", f"unknown arg {key!r}"))

    def need(key):
        if key not in phase.args:
            out.append(Violation("InvalidPhaseArgs", f"{path}.args", f"missing arg {key!r}"))
            return None
        return phase.args[key]

    def as_duration(key, raw):
        try:
            ns = parse_duration_ns(raw)
        except ValueError as exc:
            out.append(Violation("InvalidPhaseArgs", f"{path}.args.{key}", str(exc)))
            return None
        if ns < 0:
            out.append(Violation("InvalidPhaseArgs", f"{path}.args.{key}", "must be >= 0"))
            return None
        return ns

    def as_positive_int(key, raw):
        try:
            n = int(raw)
        except ValueError:
            n = 0
        if n < 1:
            out.append(Violation("InvalidPhaseArgs", f"{path}.args.{key}", "must be a positive integer"))

    if phase.kind == "inject":
        if need("target") is not None and not phase.args["target"]:
            out.append(Violation("InvalidPhaseArgs", f"{path}.args.target", "empty target"))
        if need("count") is not None:
            as_positive_int("count", phase.args["count"])
        if "period" in phase.args:
            as_duration("period", phase.args["period"])
        if "size_bits" in phase.args:
            as_positive_int("size_bits", phase.args["size_bits"])
        if phase.args.get("spacing", "fixed") not in ("fixed", "uniform"):
            out.append(Violation("InvalidPhaseArgs", f"{path}.args.spacing", "must be fixed or uniform"))
    elif phase.kind == "wait_until":
        raw = need("sim_time_ns")
        if raw is not None:
            return as_duration("sim_time_ns", raw)
    return None


def validate_spec(spec: ExperimentSpec) -> List[Violation]:
    """Every invariant breach of ``spec`` as a path-sorted list (empty if valid)."""
    out: List[Violation] = []
    if not spec.name:
        out.append(Violation("EmptyName", "name", "experiment name is empty"))
    if spec.repetitions < 1:
        out.append(Violation("NonPositiveRepetitions", "repetitions", "repetitions must be >= 1"))
    if not spec.layers:
        out.append(Violation("NoLayers", "layers", "at least one layer is required"))

    layer_names = set()
    service_ids = {s.id for _, s in spec.services()}
    seen_ids = set()
    for i, layer in enumerate(spec.layers):
        lpath = f"layers[{i}]"
        if not layer.name:
            out.append(Violation("EmptyLayerName", f"{lpath}.name", "layer name is empty"))
        elif layer.name in layer_names:
            out.append(Violation("DuplicateLayer", f"{lpath}.name", f"layer {layer.name!r} declared twice"))
        layer_names.add(layer.name)
        for j, svc in enumerate(layer.services):
            spath = f"{lpath}.services[{j}]"
            if svc.id in seen_ids:
                out.append(Violation("DuplicateServiceId", f"{spath}.id", f"service id {svc.id!r} is not unique"))
            seen_ids.add(svc.id)
            if svc.quantity < 1:
                out.append(Violation("NonPositiveQuantity", f"{spath}.quantity", "quantity must be >= 1"))
            if svc.cpu_capacity <= 0:
                out.append(Violation("NonPositiveCpu", f"{spath}.cpu_capacity", "cpu_capacity must be > 0"))
            if not behaviors.is_registered(svc.kind):
                out.append(Violation("UnknownBehavior", f"{spath}.kind", f"behavior {svc.kind!r} is not registered"))
            else:
                for key, code, message in behaviors.check_params(svc.kind, svc.params, service_ids):
                    out.append(Violation(code, f"{spath}.params.{key}", message))

    directed = {}
    for k, rule in enumerate(spec.network_rules):
        rpath = f"network_rules[{k}]"
        for attr in ("src_layer", "dst_layer"):
            name = getattr(rule, attr)
            if name not in layer_names:
                out.append(Violation("UnknownLayer", f"{rpath}.{attr}", f"layer {name!r} is not declared"))
        if rule.delay_ns < 0:
            out.append(Violation("NegativeDelay", f"{rpath}.delay_ns", "delay must be >= 0"))
        if rule.jitter_ns < 0:
            out.append(Violation("NegativeJitter", f"{rpath}.jitter_ns", "jitter must be >= 0"))
        if rule.bandwidth_bps is not None and rule.bandwidth_bps <= 0:
            out.append(Violation("NonPositiveBandwidth", f"{rpath}.bandwidth_bps", "bandwidth must be > 0"))
        if not 0 <= rule.loss_rate <= 1:
            out.append(Violation("LossOutOfRange", f"{rpath}.loss_rate", f"loss {rule.loss_rate} not in [0, 1]"))
        for pair in rule.directions():
            if pair in directed:
                out.append(
                    Violation(
                        "DuplicateNetworkRule",
                        rpath,
                        f"{pair[0]}->{pair[1]} already defined by network_rules[{directed[pair]}]",
                    )
                )
            else:
                directed[pair] = k

    last_wait = None
    for k, phase in enumerate(spec.workflow):
        ppath = f"workflow[{k}]"
        if phase.kind not in PHASE_KINDS:
            out.append(Violation("UnknownPhaseKind", f"{ppath}.kind", f"phase kind {phase.kind!r} not in {PHASE_KINDS}"))
            continue
        at = _check_phase_args(phase, ppath, out)
        if phase.kind == "wait_until" and at is not None:
            if last_wait is not None and at <= last_wait:
                out.append(
                    Violation(
                        "NonIncreasingWaitUntil",
                        f"{ppath}.args.sim_time_ns",
                        f"{at} ns is not after the previous wait_until ({last_wait} ns)",
                    )
                )
            last_wait = at

    out.extend(validate_space(spec.parameters))
    return sort_violations(out)


def validate_space(space: ParameterSpace, prefix="parameters") -> List[Violation]:
    out = []
    seen = set()
    for i, (name, domain) in enumerate(space.dimensions):
        path = f"{prefix}[{i}]"
        if name in seen:
            out.append(Violation("DuplicateDimension", f"{path}.name", f"dimension {name!r} declared twice"))
        seen.add(name)
        if isinstance(domain, Discrete):
            if not domain.values:
                out.append(Violation("EmptyDomain", f"{path}.domain", "discrete domain is empty"))
        elif isinstance(domain, IntRange):
            if domain.step <= 0:
                out.append(Violation("InvalidRange", f"{path}.domain", "step must be > 0"))
            elif domain.hi < domain.lo:
                out.append(Violation("InvalidRange", f"{path}.domain", "range has lo > hi"))
        elif domain.hi < domain.lo:
            out.append(Violation("InvalidRange", f"{path}.domain", "range has lo > hi"))
    return out
