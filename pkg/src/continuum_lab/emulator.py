"""Deterministic discrete-event emulator of the edge-to-cloud continuum.

Service instances are single-server FIFO queues. Messages between instances
cross the directed layer-pair link of their source and destination layers;
links add serialization delay (one shared pipe per link), propagation delay,
uniform jitter and random loss. All arithmetic on the event path is integer
or exact-rational, so a run is bit-for-bit repeatable.

Every dispatched event is appended to a canonical log of
``fire_at_ns<TAB>kind<TAB>instance<TAB>msg_id`` lines; the SHA-256 of that
byte stream is the run's trace digest.
"""

import hashlib
import heapq
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

from .behaviors import Behavior, make_behavior
from .errors import PhaseError
from .mapping import HostPool, Mapping, effective_cpu
from .rng import SplitMix64
from .spec import ExperimentSpec, NetworkRule
from .units import duration_for_units, serialization_ns

EVENT_KINDS = ("message_arrival", "processing_done", "injection_tick", "monitor_tick", "phase_boundary")


@dataclass
class SimClock:
    now_ns: int = 0
    seq: int = 0


@dataclass(order=True)
class SimEvent:
    fire_at_ns: int
    seq: int
    kind: str = field(compare=False)
    payload: Any = field(compare=False, default=None)


@dataclass
class Message:
    id: int
    src_instance: Optional[str]
    dst_instance: str
    size_bits: int
    created_at_ns: int
    trace: List[list] = field(default_factory=list)  # [instance, enter_ns, exit_ns]
    path_delay_ns: int = 0  # sum of propagation delays of links crossed so far


@dataclass
class Link:
    src_layer: str
    dst_layer: str
    rule: NetworkRule
    rng: SplitMix64
    busy_until_ns: int = 0


@dataclass
class InstanceRuntime:
    instance_id: str
    service_id: str
    layer: str
    behavior: Behavior
    cpu_capacity: Fraction
    rng: SplitMix64
    queue: deque = field(default_factory=deque)
    current: Optional[Message] = None
    service_start_ns: int = 0
    service_ns: int = 0
    busy_ns: int = 0
    processed_count: int = 0
    route_cursor: int = 0

    def busy_at(self, now_ns: int) -> int:
        """Busy time including the in-progress part of the current service."""
        if self.current is None:
            return self.busy_ns
        return self.busy_ns + min(now_ns - self.service_start_ns, self.service_ns)

    @property
    def queue_length(self) -> int:
        return len(self.queue) + (self.current is not None)


def link_transit(link: Link, msg: Message, send_at_ns: int) -> Optional[int]:
    """Arrival time of ``msg`` sent over ``link`` at ``send_at_ns``, or None if dropped.

    One rng draw decides loss; a second draw is taken for jitter only when
    the rule has non-zero jitter.
    """
    rule = link.rule
    if link.rng.bernoulli(Fraction(rule.loss_rate)):
        return None
    ser = serialization_ns(msg.size_bits, rule.bandwidth_bps)
    start = max(send_at_ns, link.busy_until_ns)
    link.busy_until_ns = start + ser
    jitter = link.rng.integer(0, rule.jitter_ns) if rule.jitter_ns > 0 else 0
    return start + ser + rule.delay_ns + jitter


class Deployment:
    """A provisioned experiment repetition: runtimes, links, clock and event queue."""

    def __init__(self, spec: ExperimentSpec, mapping: Mapping, repetition_index: int,
                 runtimes: Dict[str, InstanceRuntime], links: Dict[Tuple[str, str], Link],
                 keep_trace: bool = False):
        self.spec = spec
        self.mapping = mapping
        self.repetition_index = repetition_index
        self.runtimes = runtimes
        self.links = links
        self.ideal_links: Dict[Tuple[str, str], Link] = {}
        self.clock = SimClock()
        self.monitor = None
        self._events: List[SimEvent] = []
        self._digest = hashlib.sha256()
        self.trace_lines: Optional[List[str]] = [] if keep_trace else None
        self._next_msg_id = 0
        self._instances_by_service: Dict[str, List[str]] = {}
        for inst_id, rt in runtimes.items():
            self._instances_by_service.setdefault(rt.service_id, []).append(inst_id)
        self.sent = 0
        self.delivered = 0
        self.dropped = 0
        self.in_flight = 0
        self.injected = 0
        self.completed_records = 0
        self.latencies: List[int] = []
        self.path_delays: List[int] = []

    # -- scheduling -------------------------------------------------------

    @property
    def now_ns(self) -> int:
        return self.clock.now_ns

    def schedule(self, fire_at_ns: int, kind: str, payload=None) -> SimEvent:
        if fire_at_ns < self.clock.now_ns:
            raise ValueError(f"cannot schedule in the past ({fire_at_ns} < {self.clock.now_ns})")
        ev = SimEvent(fire_at_ns, self.clock.seq, kind, payload)
        self.clock.seq += 1
        heapq.heappush(self._events, ev)
        return ev

    def pending_events(self) -> int:
        return len(self._events)

    def trace_digest(self) -> str:
        return self._digest.copy().hexdigest()

    def advance(self, until_ns: int) -> str:
        """Dispatch every event with ``fire_at_ns <= until_ns`` and move the clock to ``until_ns``.

        Returns the running trace digest.
        """
        if until_ns < self.clock.now_ns:
            raise ValueError(f"until_ns {until_ns} is before the clock {self.clock.now_ns}")
        events = self._events
        while events and events[0].fire_at_ns <= until_ns:
            ev = heapq.heappop(events)
            self.clock.now_ns = ev.fire_at_ns
            self._log(ev)
            self._dispatch(ev)
        self.clock.now_ns = until_ns
        return self.trace_digest()

    def _log(self, ev: SimEvent):
        kind = ev.kind
        p = ev.payload
        if kind in ("message_arrival", "processing_done", "injection_tick"):
            instance, msg_id = p[0], str(p[1].id)
        elif kind == "monitor_tick":
            instance, msg_id = "global", "-"
        elif kind == "phase_boundary":
            instance, msg_id = str(p), "-"
        else:
            instance, msg_id = "-", "-"
        line = f"{ev.fire_at_ns}\t{kind}\t{instance}\t{msg_id}\n"
        self._digest.update(line.encode("utf-8"))
        if self.trace_lines is not None:
            self.trace_lines.append(line)

    def _dispatch(self, ev: SimEvent):
        if ev.kind == "message_arrival":
            inst, msg = ev.payload
            self.in_flight -= 1
            self.delivered += 1
            self.process_message(self.runtimes[inst], msg)
        elif ev.kind == "injection_tick":
            inst, msg = ev.payload
            self.process_message(self.runtimes[inst], msg)
        elif ev.kind == "processing_done":
            self._complete(self.runtimes[ev.payload[0]], ev.payload[1])
        elif ev.kind == "monitor_tick":
            if self.monitor is not None:
                self.monitor.on_tick(self)
        # phase_boundary carries no action: it only marks the log

    # -- queueing ---------------------------------------------------------

    def new_message(self, src, dst, size_bits, created_at_ns, trace=None, path_delay_ns=0) -> Message:
        msg = Message(self._next_msg_id, src, dst, size_bits, created_at_ns,
                      [list(hop) for hop in trace or []], path_delay_ns)
        self._next_msg_id += 1
        return msg

    def process_message(self, rt: InstanceRuntime, msg: Message):
        """Enqueue ``msg`` at ``rt`` and start service if the server is idle."""
        msg.trace.append([rt.instance_id, self.clock.now_ns, None])
        rt.queue.append(msg)
        if rt.current is None:
            self._start_service(rt)

    def _start_service(self, rt: InstanceRuntime):
        msg = rt.queue.popleft()
        rt.current = msg
        rt.service_start_ns = self.clock.now_ns
        rt.service_ns = duration_for_units(rt.behavior.service_units(msg.size_bits), rt.cpu_capacity)
        self.schedule(self.clock.now_ns + rt.service_ns, "processing_done", (rt.instance_id, msg))

    def _complete(self, rt: InstanceRuntime, msg: Message):
        now = self.clock.now_ns
        rt.busy_ns += rt.service_ns
        rt.processed_count += 1
        rt.current = None
        msg.trace[-1][2] = now
        if rt.behavior.terminal:
            self.completed_records += 1
            latency = now - msg.created_at_ns
            self.latencies.append(latency)
            self.path_delays.append(msg.path_delay_ns)
            if self.monitor is not None:
                self.monitor.on_latency(now, rt.instance_id, latency)
        for target, size_bits in rt.behavior.outputs(msg.size_bits):
            dst = self._route(rt, target)
            out = self.new_message(rt.instance_id, dst, size_bits, msg.created_at_ns,
                                   msg.trace, msg.path_delay_ns)
            self.send(out)
        if rt.queue:
            self._start_service(rt)

    def _route(self, rt: InstanceRuntime, target_service: str) -> str:
        candidates = self._instances_by_service.get(target_service)
        if not candidates:
            raise PhaseError(rt.service_id, f"target service {target_service!r} has no instances")
        if rt.behavior.route == "random":
            return candidates[rt.rng.below(len(candidates))]
        dst = candidates[rt.route_cursor % len(candidates)]
        rt.route_cursor += 1
        return dst

    # -- network ----------------------------------------------------------

    def link_for(self, src_layer: str, dst_layer: str) -> Link:
        pair = (src_layer, dst_layer)
        link = self.links.get(pair)
        if link is None:
            link = self.ideal_links.get(pair)
            if link is None:
                link = Link(src_layer, dst_layer, NetworkRule(src_layer, dst_layer, symmetric=False),
                            SplitMix64.for_role(self.spec.master_seed, "link", src_layer, dst_layer,
                                                self.repetition_index))
                self.ideal_links[pair] = link
        return link

    def send(self, msg: Message) -> Optional[int]:
        src = self.runtimes[msg.src_instance]
        dst = self.runtimes[msg.dst_instance]
        link = self.link_for(src.layer, dst.layer)
        self.sent += 1
        arrival = link_transit(link, msg, self.clock.now_ns)
        if arrival is None:
            self.dropped += 1
            if self.monitor is not None:
                self.monitor.on_drop(self.clock.now_ns, msg)
            return None
        msg.path_delay_ns += link.rule.delay_ns
        self.in_flight += 1
        self.schedule(arrival, "message_arrival", (msg.dst_instance, msg))
        return arrival

    # -- workflow hooks ---------------------------------------------------

    def instances_of(self, service_id: str) -> List[str]:
        return list(self._instances_by_service.get(service_id, []))

    def inject(self, phase_name: str, target: str, count: int, period_ns: int = 0,
               size_bits: Optional[int] = None, spacing: str = "fixed") -> List[Message]:
        """Schedule ``count`` records at instances of ``target``, starting now.

        Record ``k`` goes to instance ``k mod quantity``. With ``fixed`` spacing
        records are ``period_ns`` apart; with ``uniform`` each gap is drawn
        from ``[0, 2 * period_ns]`` on the phase's injector stream.
        """
        instances = self.instances_of(target)
        if not instances:
            raise PhaseError(phase_name, f"unknown service {target!r}")
        bits = size_bits if size_bits is not None else self.runtimes[instances[0]].behavior.record_bits
        if bits is None:
            raise PhaseError(phase_name, f"service {target!r} has no record size; pass size_bits")
        rng = SplitMix64.for_role(self.spec.master_seed, "injector", phase_name, self.repetition_index)
        t = self.clock.now_ns
        records = []
        for k in range(count):
            if k > 0:
                t += rng.integer(0, 2 * period_ns) if spacing == "uniform" else period_ns
            inst = instances[k % len(instances)]
            msg = self.new_message(None, inst, bits, t)
            self.schedule(t, "injection_tick", (inst, msg))
            records.append(msg)
        self.injected += count
        return records

    def mark_phase(self, phase_name: str):
        self.schedule(self.clock.now_ns, "phase_boundary", phase_name)


def provision(spec: ExperimentSpec, mapping: Mapping, repetition_index: int,
              pool: Optional[HostPool] = None, keep_trace: bool = False) -> Deployment:
    """Build runtimes and links for one repetition.

    Raises :class:`~continuum_lab.errors.UnknownBehavior` for unregistered kinds.
    """
    seed = spec.master_seed
    by_instance = {}
    for layer, svc in spec.services():
        for inst in svc.instance_ids():
            by_instance[inst] = (layer.name, svc)
    runtimes = {}
    for inst, host_id in mapping.assignments:
        layer, svc = by_instance[inst]
        cpu = Fraction(svc.cpu_capacity)
        if pool is not None:
            cpu = effective_cpu(cpu, pool.host(host_id))
        runtimes[inst] = InstanceRuntime(
            instance_id=inst,
            service_id=svc.id,
            layer=layer,
            behavior=make_behavior(svc.kind, svc.params),
            cpu_capacity=cpu,
            rng=SplitMix64.for_role(seed, "behavior", inst, repetition_index),
        )
    links = {}
    for rule in spec.network_rules:
        for src, dst in rule.directions():
            links[(src, dst)] = Link(src, dst, rule,
                                     SplitMix64.for_role(seed, "link", src, dst, repetition_index))
    return Deployment(spec, mapping, repetition_index, runtimes, links, keep_trace=keep_trace)
