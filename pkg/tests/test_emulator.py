import hashlib
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from continuum_lab.archive import run_repetition
from continuum_lab.emulator import Link, Message, link_transit, provision
from continuum_lab.errors import UnknownBehavior
from continuum_lab.mapping import Host, HostPool, default_pool, resolve_mapping
from continuum_lab.rng import SplitMix64
from continuum_lab.spec import ExperimentSpec, Layer, NetworkRule, ServiceDef, WorkflowPhase

GIGA = 10**9


def make_link(**rule):
    return Link("a", "b", NetworkRule("a", "b", **rule), SplitMix64(1))


def msg(bits, id=0):
    return Message(id, "x.0", "y.0", bits, 0)


def transit_oracle(size_bits, bw, delay_ns, start_ns):
    # serialization is the smallest integer ns with ns * bw >= bits * 1e9
    ser = 0
    if bw is not None:
        ser = size_bits * GIGA // bw + (1 if size_bits * GIGA % bw else 0)
    return start_ns + ser + delay_ns


def test_identity_link_delivers_at_send_time():
    assert link_transit(make_link(), msg(12345), 777) == 777


def test_one_megabit_over_one_mbps_with_10ms_delay():
    link = make_link(delay_ns=10**7, bandwidth_bps=10**6)
    expected = transit_oracle(10**6, 10**6, 10**7, 0)
    assert expected == 1_010_000_000
    assert link_transit(link, msg(10**6), 0) == expected


def test_back_to_back_sends_share_the_pipe():
    link = make_link(delay_ns=10**7, bandwidth_bps=10**6)
    first = link_transit(link, msg(10**6, 0), 0)
    second = link_transit(link, msg(10**6, 1), 0)
    assert (first, second) == (1_010_000_000, 2_010_000_000)


def test_total_loss_always_drops():
    link = make_link(loss_rate=Fraction(1))
    assert all(link_transit(link, msg(10), t) is None for t in range(100))
    assert link.busy_until_ns == 0


def test_draw_schedule():
    plain = make_link(loss_rate=Fraction(1, 2))
    link_transit(plain, msg(8), 0)
    assert plain.rng.draws == 1
    jittery = make_link(jitter_ns=5)
    link_transit(jittery, msg(8), 0)
    assert jittery.rng.draws == 2


def test_jitter_is_additive_and_bounded():
    link = make_link(delay_ns=100, jitter_ns=10)
    arrivals = {link_transit(link, msg(1), 0) for _ in range(500)}
    assert arrivals == set(range(100, 111))


def test_serialization_rounds_up():
    assert link_transit(make_link(bandwidth_bps=3), msg(1), 0) == 333_333_334


# -- deployments ------------------------------------------------------------


def chain_spec(rule=None, services=None, workflow=(), seed=0):
    services = services or {
        "edge": (ServiceDef("src", "producer", 1, Fraction(1), {"target": "dst", "size_bits": "1000000"}),),
        "cloud": (ServiceDef("dst", "sink", 1, Fraction(1)),),
    }
    layers = tuple(Layer(name, svcs) for name, svcs in services.items())
    rules = () if rule is None else (rule,)
    return ExperimentSpec("chain", layers, rules, tuple(workflow), master_seed=seed)


def deploy(spec, r=0, **kw):
    pool = default_pool(spec)
    return provision(spec, resolve_mapping(spec, pool), r, pool=pool, **kw)


def test_provision_expands_symmetric_rules():
    spec = chain_spec(
        NetworkRule("edge", "cloud", 5),
        services={
            "edge": (ServiceDef("src", "producer", 2, Fraction(1), {"target": "dst"}),),
            "cloud": (ServiceDef("dst", "sink"),),
        },
    )
    dep = deploy(spec)
    assert len(dep.runtimes) == 3
    assert sorted(dep.links) == [("cloud", "edge"), ("edge", "cloud")]
    assert dep.now_ns == 0 and dep.pending_events() == 0


def test_default_link_is_ideal():
    dep = deploy(chain_spec())
    assert dep.links == {}
    m = dep.new_message("src.0", "dst.0", 10**9, 0)
    assert dep.send(m) == 0


def test_unknown_behavior_on_provision():
    spec = ExperimentSpec("x", (Layer("e", (ServiceDef("a", "unknown_behavior"),)),))
    with pytest.raises(UnknownBehavior):
        provision(spec, resolve_mapping(spec, default_pool(spec)), 0)


def test_host_cpu_caps_service_cpu():
    spec = ExperimentSpec("x", (Layer("e", (ServiceDef("a", "sink", 1, Fraction(10)),)),))
    pool = HostPool((Host("h", "e", 1, Fraction(4)),))
    dep = provision(spec, resolve_mapping(spec, pool), 0, pool=pool)
    assert dep.runtimes["a.0"].cpu_capacity == 4


def test_empty_queue_digest_is_sha256_of_empty_string():
    dep = deploy(chain_spec())
    assert dep.advance(10**9) == hashlib.sha256(b"").hexdigest()
    assert dep.now_ns == 10**9


def test_equal_time_events_follow_scheduling_order():
    dep = deploy(chain_spec(), keep_trace=True)
    for name in ("first", "second", "third"):
        dep.schedule(5, "phase_boundary", name)
    dep.advance(5)
    assert [line.split("\t")[2] for line in dep.trace_lines] == ["first", "second", "third"]


def sink_runtime_spec(base_units, cpu, per_bit="0"):
    return ExperimentSpec(
        "q", (Layer("e", (ServiceDef("k", "sink", 1, Fraction(cpu), {"base_units": base_units, "per_bit_units": per_bit}),)),)
    )


def test_zero_cost_completes_at_arrival():
    dep = deploy(sink_runtime_spec("0", 1))
    rt = dep.runtimes["k.0"]
    dep.advance(3)
    dep.process_message(rt, dep.new_message(None, "k.0", 99, 3))
    dep.advance(3)
    assert rt.processed_count == 1 and dep.latencies == [0]


def test_service_time_formula():
    dep = deploy(sink_runtime_spec("1", 10))
    rt = dep.runtimes["k.0"]
    dep.process_message(rt, dep.new_message(None, "k.0", 12345, 0))
    assert rt.service_ns == GIGA // 10
    dep.advance(10**9)
    assert dep.latencies == [10**8]


def test_fifo_single_server():
    dep = deploy(sink_runtime_spec("1", 1))
    rt = dep.runtimes["k.0"]
    for _ in range(2):
        dep.process_message(rt, dep.new_message(None, "k.0", 1, 0))
    assert rt.queue_length == 2
    dep.advance(5 * GIGA)
    assert dep.latencies == [GIGA, 2 * GIGA]
    assert rt.busy_ns == 2 * GIGA


def test_per_bit_cost():
    dep = deploy(sink_runtime_spec("0", 1000, "1/1000"))
    rt = dep.runtimes["k.0"]
    dep.process_message(rt, dep.new_message(None, "k.0", 500, 0))
    assert rt.service_ns == 500 * GIGA // 1000 // 1000


# -- invariants over random deployments -----------------------------------


@st.composite
def random_experiments(draw):
    jitter = draw(st.integers(0, 10**6))
    loss = Fraction(draw(st.integers(0, 4)), 10)
    bw = draw(st.sampled_from([None, 10**5, 10**6, 10**8]))
    rule = NetworkRule("edge", "cloud", draw(st.integers(0, 10**8)), jitter, bw, loss)
    services = {
        "edge": (
            ServiceDef("src", "producer", draw(st.integers(1, 3)), Fraction(draw(st.integers(1, 50))),
                       {"target": "mid", "size_bits": str(draw(st.integers(1, 10**6))),
                        "base_units": str(draw(st.integers(0, 3)))}),
            ServiceDef("mid", "transformer", draw(st.integers(1, 2)), Fraction(draw(st.integers(1, 50))),
                       {"target": "dst", "factor": "1/3", "base_units": str(draw(st.integers(0, 3))),
                        "route": draw(st.sampled_from(["round_robin", "random"]))}),
        ),
        "cloud": (ServiceDef("dst", "sink", draw(st.integers(1, 2)), Fraction(draw(st.integers(1, 50))),
                             {"base_units": str(draw(st.integers(0, 3)))}),),
    }
    workflow = (
        WorkflowPhase("feed", "inject", {"target": "src", "count": str(draw(st.integers(1, 30))),
                                         "period": str(draw(st.integers(0, 10**9))),
                                         "spacing": draw(st.sampled_from(["fixed", "uniform"]))}),
    )
    return chain_spec(rule, services, workflow, seed=draw(st.integers(0, 2**64 - 1)))


def _run_checking(spec, steps=12):
    dep = deploy(spec)
    from continuum_lab.archive import run_workflow

    run_workflow(dep)
    horizon = 0
    for _ in range(steps):
        horizon += 10**9
        dep.advance(horizon)
        assert dep.sent == dep.delivered + dep.dropped + dep.in_flight
        for rt in dep.runtimes.values():
            assert rt.busy_at(dep.now_ns) <= dep.now_ns
            assert rt.busy_ns <= dep.now_ns
    for latency, path_delay in zip(dep.latencies, dep.path_delays):
        assert latency >= path_delay
    return dep


@settings(max_examples=60, deadline=None)
@given(random_experiments())
def test_conservation_utilization_and_latency_bound(spec):
    dep = _run_checking(spec)
    assert dep.path_delays == [] or min(dep.path_delays) >= spec.network_rules[0].delay_ns


@settings(max_examples=25, deadline=None)
@given(random_experiments(), st.integers(0, 3))
def test_trace_digest_is_deterministic(spec, rep):
    pool = default_pool(spec)
    mapping = resolve_mapping(spec, pool)
    a, _ = run_repetition(spec, mapping, pool, rep, keep_trace=True)
    b, _ = run_repetition(spec, mapping, pool, rep, keep_trace=True)
    assert a.trace_digest() == b.trace_digest()
    assert hashlib.sha256("".join(a.trace_lines).encode()).hexdigest() == a.trace_digest()


def test_repetition_index_and_seed_key_the_streams():
    spec = chain_spec(NetworkRule("edge", "cloud", 10, 10**6, None, Fraction(1, 4)),
                      workflow=(WorkflowPhase("feed", "inject", {"target": "src", "count": "50", "period": "1ms"}),
                                WorkflowPhase("run", "wait_until", {"sim_time_ns": "1s"})))
    pool = default_pool(spec)
    mapping = resolve_mapping(spec, pool)
    digests = {run_repetition(s, mapping, pool, r)[0].trace_digest()
               for s in (spec, spec.with_seed(1)) for r in (0, 1)}
    assert len(digests) == 4


def test_single_sender_transit_matches_formula():
    spec = chain_spec(NetworkRule("edge", "cloud", 7_000_000, 0, 2_000_000),
                      workflow=(WorkflowPhase("feed", "inject", {"target": "src", "count": "5", "period": "2s"}),
                                WorkflowPhase("run", "wait_until", {"sim_time_ns": "20s"})))
    dep = deploy(spec)
    from continuum_lab.archive import run_workflow

    run_workflow(dep)
    assert dep.latencies == [transit_oracle(10**6, 2_000_000, 7_000_000, 0)] * 5
