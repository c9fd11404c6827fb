"""Assignment of service instances to hosts, layer by layer."""

import hashlib
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Tuple

import yaml

from .errors import CapacityExceeded, MissingLayerHosts, SchemaError
from .spec import ExperimentSpec, Violation, sort_violations
from .units import to_rational

STRATEGIES = ("round_robin", "first_fit")


@dataclass(frozen=True)
class Host:
    id: str
    layer: str
    slot_capacity: int = 1
    cpu_capacity: Optional[Fraction] = None  # None: no host-level bound


@dataclass(frozen=True)
class HostPool:
    hosts: Tuple[Host, ...]

    def for_layer(self, layer: str) -> List[Host]:
        return [h for h in self.hosts if h.layer == layer]

    def host(self, host_id: str) -> Host:
        for h in self.hosts:
            if h.id == host_id:
                return h
        raise KeyError(host_id)


@dataclass(frozen=True)
class Mapping:
    assignments: Tuple[Tuple[str, str], ...]

    def host_of(self, instance_id: str) -> str:
        for inst, host in self.assignments:
            if inst == instance_id:
                return host
        raise KeyError(instance_id)

    def canonical(self) -> str:
        return "".join(f"{inst}\t{host}\n" for inst, host in self.assignments)

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()


def parse_pool(text: str) -> HostPool:
    """Read a host pool document: ``hosts: [{id, layer, slots, cpu_capacity}]``."""
    doc = yaml.safe_load(text)
    if not isinstance(doc, dict) or set(doc) - {"hosts"}:
        raise SchemaError("", "host pool must be a mapping with a single 'hosts' key")
    hosts = []
    for i, h in enumerate(doc.get("hosts") or []):
        path = f"hosts[{i}]"
        if not isinstance(h, dict):
            raise SchemaError(path, "expected a mapping")
        for key in h:
            if key not in ("id", "layer", "slots", "cpu_capacity"):
                raise SchemaError(f"{path}.{key}", f"unknown key {key!r}")
        if "id" not in h or "layer" not in h:
            raise SchemaError(path, "host needs 'id' and 'layer'")
        slots = h.get("slots", 1)
        if isinstance(slots, bool) or not isinstance(slots, int) or slots < 1:
            raise SchemaError(f"{path}.slots", "slots must be a positive integer")
        cpu = h.get("cpu_capacity")
        if cpu is not None:
            try:
                cpu = to_rational(cpu)
            except ValueError as exc:
                raise SchemaError(f"{path}.cpu_capacity", str(exc)) from None
            if cpu <= 0:
                raise SchemaError(f"{path}.cpu_capacity", "cpu_capacity must be > 0")
        hosts.append(Host(str(h["id"]), str(h["layer"]), slots, cpu))
    ids = [h.id for h in hosts]
    if len(set(ids)) != len(ids):
        raise SchemaError("hosts", "host ids must be unique")
    return HostPool(tuple(hosts))


def load_pool(path) -> HostPool:
    with open(path, encoding="utf-8") as fh:
        return parse_pool(fh.read())


def default_pool(spec: ExperimentSpec) -> HostPool:
    """One unbounded host per layer with exactly enough slots for its instances."""
    hosts = []
    for layer in spec.layers:
        n = sum(s.quantity for s in layer.services)
        if n:
            hosts.append(Host(f"{layer.name}-host", layer.name, n, None))
    return HostPool(tuple(hosts))


def _layer_instances(layer):
    return [inst for svc in layer.services for inst in svc.instance_ids()]


def check_capacity(spec: ExperimentSpec, pool: HostPool) -> List[Violation]:
    out = []
    for i, layer in enumerate(spec.layers):
        need = sum(s.quantity for s in layer.services)
        have = sum(h.slot_capacity for h in pool.for_layer(layer.name))
        if need > have:
            out.append(
                Violation(
                    "CapacityExceeded",
                    f"layers[{i}]",
                    f"layer {layer.name!r} has {need} instances but only {have} host slots",
                )
            )
    return sort_violations(out)


def resolve_mapping(spec: ExperimentSpec, pool: HostPool, strategy: str = "round_robin") -> Mapping:
    """Assign every instance ``<service_id>.<k>`` to a host of its layer.

    ``round_robin`` cycles the layer's hosts in declared order, skipping full
    ones; ``first_fit`` fills each host to its slot capacity before moving on.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown mapping strategy {strategy!r}")
    assignments = []
    for layer in spec.layers:
        instances = _layer_instances(layer)
        if not instances:
            continue
        hosts = pool.for_layer(layer.name)
        if not hosts:
            raise MissingLayerHosts(layer.name)
        slots = sum(h.slot_capacity for h in hosts)
        if len(instances) > slots:
            raise CapacityExceeded(layer.name, len(instances), slots)
        used = [0] * len(hosts)
        cursor = 0
        for inst in instances:
            if strategy == "round_robin":
                while used[cursor] >= hosts[cursor].slot_capacity:
                    cursor = (cursor + 1) % len(hosts)
                k = cursor
                cursor = (cursor + 1) % len(hosts)
            else:
                while used[cursor] >= hosts[cursor].slot_capacity:
                    cursor += 1
                k = cursor
            used[k] += 1
            assignments.append((inst, hosts[k].id))
    return Mapping(tuple(assignments))


def effective_cpu(service_cpu, host: Host):
    """Host capacity bounds the service's declared capacity."""
    if host.cpu_capacity is None:
        return Fraction(service_cpu)
    return min(Fraction(service_cpu), host.cpu_capacity)
