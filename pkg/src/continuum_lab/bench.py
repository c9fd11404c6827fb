"""Synthetic edge-to-cloud pipelines with closed-form latency.

Two presets model where records are processed:

* ``cloud_centric``: an edge producer ships raw records over the edge->cloud
  link to a cloud sink.
* ``hybrid``: the edge producer hands records to an edge transformer on the
  same layer (ideal link), which spends ``preprocess_units`` and forwards a
  reduced record of ``factor * size_bits`` bits to the cloud sink.

:func:`analytic_latency` is the single-record latency both presets must show
in the emulator when jitter and loss are zero and records never queue.
"""

from fractions import Fraction

from .errors import UnknownPreset
from .spec import (
    ExperimentSpec,
    IntRange,
    Layer,
    NetworkRule,
    ParameterSpace,
    ServiceDef,
    WorkflowPhase,
)
from .units import ceil_div, duration_for_units, serialization_ns

PRESETS = ("cloud_centric", "hybrid")

DEFAULTS = dict(
    n_records=100,
    size_bits=1_000_000,
    bandwidth_bps=1_000_000,
    delay_ns=50_000_000,
    factor=Fraction(1, 10),
    preprocess_units=2,
    cloud_service_units=0,
    period_ns=5_000_000_000,
    edge_cpu=100,
    cloud_cpu=1000,
)


def _fmt(value) -> str:
    return str(Fraction(value))


def build_scenario(preset: str, n_records=DEFAULTS["n_records"], size_bits=DEFAULTS["size_bits"],
                   bandwidth_bps=DEFAULTS["bandwidth_bps"], delay_ns=DEFAULTS["delay_ns"],
                   factor=DEFAULTS["factor"], preprocess_units=DEFAULTS["preprocess_units"],
                   cloud_service_units=DEFAULTS["cloud_service_units"], period_ns=DEFAULTS["period_ns"],
                   *, edge_cpu=DEFAULTS["edge_cpu"], cloud_cpu=DEFAULTS["cloud_cpu"],
                   jitter_ns=0, loss_rate=0, seed=0, repetitions=1) -> ExperimentSpec:
    """Experiment spec for one of :data:`PRESETS`.

    The workflow injects ``n_records`` records ``period_ns`` apart and runs
    until ``n_records * period_ns``.
    """
    if preset not in PRESETS:
        raise UnknownPreset(preset)
    factor = Fraction(factor)
    if not 0 < factor <= 1:
        raise ValueError("factor must be in (0, 1]")
    first_hop = "preprocess" if preset == "hybrid" else "analytics"
    edge_services = [
        ServiceDef("camera", "producer", 1, Fraction(edge_cpu),
                   {"target": first_hop, "size_bits": str(size_bits)}),
    ]
    if preset == "hybrid":
        edge_services.append(
            ServiceDef("preprocess", "transformer", 1, Fraction(edge_cpu),
                       {"target": "analytics", "factor": _fmt(factor), "base_units": _fmt(preprocess_units)})
        )
    cloud = ServiceDef("analytics", "sink", 1, Fraction(cloud_cpu), {"base_units": _fmt(cloud_service_units)})
    return ExperimentSpec(
        name=preset,
        layers=(Layer("edge", tuple(edge_services)), Layer("cloud", (cloud,))),
        network_rules=(
            NetworkRule("edge", "cloud", delay_ns, jitter_ns, bandwidth_bps, Fraction(loss_rate), True),
        ),
        workflow=(
            WorkflowPhase("deploy", "launch"),
            WorkflowPhase("feed", "inject",
                          {"target": "camera", "count": str(n_records), "period": str(period_ns)}),
            WorkflowPhase("run", "wait_until", {"sim_time_ns": str(n_records * period_ns)}),
            WorkflowPhase("collect", "gather"),
        ),
        repetitions=repetitions,
        master_seed=seed,
    )


def analytic_latency(preset: str, size_bits=DEFAULTS["size_bits"], bandwidth_bps=DEFAULTS["bandwidth_bps"],
                     delay_ns=DEFAULTS["delay_ns"], factor=DEFAULTS["factor"],
                     preprocess_units=DEFAULTS["preprocess_units"], edge_cpu=DEFAULTS["edge_cpu"],
                     cloud_service_units=DEFAULTS["cloud_service_units"],
                     cloud_cpu=DEFAULTS["cloud_cpu"]) -> int:
    """Closed-form end-to-end latency in ns of one record on an idle pipeline.

    >>> analytic_latency("cloud_centric", 10**6, 10**6, 5 * 10**7, cloud_service_units=0)
    1050000000
    """
    cloud = duration_for_units(cloud_service_units, cloud_cpu)
    if preset == "cloud_centric":
        return serialization_ns(size_bits, bandwidth_bps) + delay_ns + cloud
    if preset == "hybrid":
        reduced = Fraction(factor) * size_bits * 10**9
        wire = 0 if bandwidth_bps is None else ceil_div(reduced.numerator, reduced.denominator * bandwidth_bps)
        return duration_for_units(preprocess_units, edge_cpu) + wire + delay_ns + cloud
    raise UnknownPreset(preset)


def build_quadratic_scenario(size=20, center=(3, 4), seed=0) -> ExperimentSpec:
    """One-record pipeline whose latency in ns is ``(a - ca)**2 + (b - cb)**2``.

    The ``probe`` service is a ``bowl`` sink running at 1e9 units/s, so one
    unit of cost is one nanosecond. Parameters ``probe.x_a`` and ``probe.x_b``
    range over ``0..size-1``.
    """
    ca, cb = center
    probe = ServiceDef("probe", "bowl", 1, Fraction(10**9),
                       {"x_a": "0", "x_b": "0", "c_a": str(ca), "c_b": str(cb)})
    source = ServiceDef("source", "producer", 1, Fraction(1), {"target": "probe", "size_bits": "1"})
    return ExperimentSpec(
        name="quadratic",
        layers=(Layer("edge", (source, probe)),),
        workflow=(
            WorkflowPhase("feed", "inject", {"target": "source", "count": "1"}),
            WorkflowPhase("run", "wait_until", {"sim_time_ns": "1s"}),
        ),
        parameters=ParameterSpace(
            (("probe.x_a", IntRange(0, size - 1, 1)), ("probe.x_b", IntRange(0, size - 1, 1)))
        ),
        master_seed=seed,
    )


def preset_spec(name: str, **kwargs) -> ExperimentSpec:
    if name == "quadratic":
        return build_quadratic_scenario(**kwargs)
    return build_scenario(name, **kwargs)
