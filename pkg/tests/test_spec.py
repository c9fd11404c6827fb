import hashlib
import textwrap
from dataclasses import replace
from fractions import Fraction

import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from continuum_lab.errors import SchemaError, SpecSyntaxError
from continuum_lab.spec import (
    Continuous,
    Discrete,
    ExperimentSpec,
    IntRange,
    Layer,
    NetworkRule,
    ParameterSpace,
    ServiceDef,
    WorkflowPhase,
    canonical_digest,
    canonical_serialization,
    dump_spec,
    parse_spec,
    validate_spec,
)

MINIMAL = textwrap.dedent(
    """
    name: tiny
    layers:
      - name: edge
        services:
          - {id: s, kind: sink}
    """
)


def test_minimal_document_takes_defaults():
    spec = parse_spec(MINIMAL)
    assert spec.repetitions == 1
    assert spec.network_rules == ()
    assert spec.workflow == ()
    assert spec.master_seed == 0
    assert spec.layers[0].services[0] == ServiceDef("s", "sink", 1, Fraction(1), {})


def test_rule_defaults_and_ms_conversion():
    spec = parse_spec(
        textwrap.dedent(
            """
            name: x
            layers: [{name: edge}, {name: fog}, {name: cloud}]
            network: [{src: edge, dst: cloud, delay: 50ms}]
            """
        )
    )
    (rule,) = spec.network_rules
    assert rule.delay_ns == 50_000_000
    assert (rule.jitter_ns, rule.bandwidth_bps, rule.loss_rate, rule.symmetric) == (0, None, 0, True)


def test_unknown_key_names_the_key():
    with pytest.raises(SchemaError, match="latyers"):
        parse_spec("name: x\nlatyers: []\nlayers: []\n")


@pytest.mark.parametrize(
    "doc, where",
    [
        ("name: 3\nlayers: []", "name"),
        ("name: x\nrepetitions: two\nlayers: []", "repetitions"),
        ("name: x\nlayers: [{name: e, services: [{id: a, kind: sink, quantity: 1.5}]}]", "quantity"),
        ("name: x\nlayers: [{name: e}]\nnetwork: [{src: e, dst: e, delay: fast}]", "delay"),
        ("name: x\nlayers: [{name: e}]\nnetwork: [{src: e, dst: e, bandwidth: 3 furlongs}]", "bandwidth"),
        ("name: x\nlayers: [{name: e}]\nnetwork: [{src: e, dst: e, symmetric: maybe}]", "symmetric"),
        ("name: x\nlayers: {}", "layers"),
        ("name: x\nseed: -1\nlayers: []", "seed"),
        ("layers: []", "name"),
    ],
)
def test_wrong_scalar_types_are_schema_errors(doc, where):
    with pytest.raises(SchemaError, match=where):
        parse_spec(doc)


def test_malformed_yaml_is_syntax_error():
    with pytest.raises(SpecSyntaxError):
        parse_spec("name: [unclosed\nlayers:")


@pytest.mark.parametrize(
    "text, ns",
    [("1s", 10**9), ("250ms", 250 * 10**6), ("3us", 3000), ("17ns", 17), ("1.5ms", 1_500_000), (42, 42)],
)
def test_duration_suffixes(text, ns):
    spec = parse_spec(f"name: x\nlayers: [{{name: e}}]\nnetwork: [{{src: e, dst: e, delay: {text}}}]")
    assert spec.network_rules[0].delay_ns == ns


@pytest.mark.parametrize(
    "text, bps", [("1Mbps", 10**6), ("2.5Gbps", 25 * 10**8), ("64Kbps", 64000), ("9600bps", 9600), ("unlimited", None)]
)
def test_bandwidth_decimal_multipliers(text, bps):
    spec = parse_spec(f"name: x\nlayers: [{{name: e}}]\nnetwork: [{{src: e, dst: e, bandwidth: {text}}}]")
    assert spec.network_rules[0].bandwidth_bps == bps


def test_parameter_domains():
    spec = parse_spec(
        textwrap.dedent(
            """
            name: x
            layers: [{name: e}]
            parameters:
              a: [1, 2.5, fast]
              b: {range: [0, 4], step: 2}
              c: {continuous: [0, 0.5]}
            """
        )
    )
    assert spec.parameters.dimensions == (
        ("a", Discrete((1, Fraction(5, 2), "fast"))),
        ("b", IntRange(0, 4, 2)),
        ("c", Continuous(Fraction(0), Fraction(1, 2))),
    )


def test_valid_three_layer_spec_has_no_violations(three_layer):
    assert validate_spec(three_layer) == []


def _codes(spec):
    return [(v.code, v.path) for v in validate_spec(spec)]


def test_unknown_layer_reported_with_path(three_layer):
    bad = replace(three_layer, network_rules=(replace(three_layer.network_rules[0], src_layer="fogg"),))
    assert _codes(bad) == [("UnknownLayer", "network_rules[0].src_layer")]


def test_loss_out_of_range(three_layer):
    bad = replace(three_layer, network_rules=(replace(three_layer.network_rules[0], loss_rate=Fraction(3, 2)),))
    assert [c for c, _ in _codes(bad)] == ["LossOutOfRange"]


def test_violations_are_path_sorted_with_numeric_indices():
    rules = tuple(NetworkRule("e", f"missing{k}", symmetric=False) for k in range(12))
    spec = ExperimentSpec("x", (Layer("e"),), rules)
    paths = [v.path for v in validate_spec(spec)]
    assert paths == [f"network_rules[{k}].dst_layer" for k in range(12)]


def test_duplicate_and_structural_violations():
    spec = ExperimentSpec(
        "",
        (
            Layer("e", (ServiceDef("a", "sink"), ServiceDef("a", "nope", quantity=0, cpu_capacity=Fraction(0)))),
            Layer("e"),
        ),
        (NetworkRule("e", "e", delay_ns=-1, jitter_ns=-2, bandwidth_bps=0), NetworkRule("e", "e")),
        (
            WorkflowPhase("w1", "wait_until", {"sim_time_ns": "2s"}),
            WorkflowPhase("w2", "wait_until", {"sim_time_ns": "1s"}),
            WorkflowPhase("z", "explode"),
        ),
        ParameterSpace((("p", Discrete(())), ("p", IntRange(3, 1, 1)))),
        repetitions=0,
    )
    codes = {v.code for v in validate_spec(spec)}
    assert codes == {
        "EmptyName",
        "DuplicateLayer",
        "DuplicateServiceId",
        "UnknownBehavior",
        "NonPositiveQuantity",
        "NonPositiveCpu",
        "NegativeDelay",
        "NegativeJitter",
        "NonPositiveBandwidth",
        "DuplicateNetworkRule",
        "NonIncreasingWaitUntil",
        "UnknownPhaseKind",
        "DuplicateDimension",
        "EmptyDomain",
        "InvalidRange",
        "NonPositiveRepetitions",
    }


def test_behavior_param_checks(three_layer):
    layers = list(three_layer.layers)
    layers[1] = Layer("fog", (ServiceDef("filter", "transformer", params={"target": "nowhere", "factor": "2"}),))
    found = _codes(replace(three_layer, layers=tuple(layers)))
    assert ("UnknownTarget", "layers[1].services[0].params.target") in found
    assert ("InvalidBehaviorParam", "layers[1].services[0].params.factor") in found


def test_symmetric_rule_conflicts_with_reverse_rule():
    spec = ExperimentSpec("x", (Layer("a"), Layer("b")), (NetworkRule("a", "b"), NetworkRule("b", "a", symmetric=False)))
    assert [v.code for v in validate_spec(spec)] == ["DuplicateNetworkRule"]


def test_empty_workflow_is_permitted():
    assert validate_spec(parse_spec(MINIMAL)) == []


def test_validate_is_pure(three_layer):
    bad = replace(three_layer, repetitions=0, name="")
    assert validate_spec(bad) == validate_spec(bad)


# -- canonical digest -------------------------------------------------------


def test_digest_ignores_key_order(three_layer_text):
    doc = yaml.safe_load(three_layer_text)

    def reverse_keys(obj, keep_order=False):
        if isinstance(obj, dict):
            # parameter dimensions are an ordered list written as a mapping
            keys = list(obj) if keep_order else list(reversed(list(obj)))
            return {k: reverse_keys(obj[k], k == "parameters") for k in keys}
        if isinstance(obj, list):
            return [reverse_keys(v) for v in obj]
        return obj

    shuffled = yaml.safe_dump(reverse_keys(doc), sort_keys=False)
    assert shuffled != three_layer_text
    assert canonical_digest(parse_spec(shuffled)) == canonical_digest(parse_spec(three_layer_text))


def test_digest_changes_with_repetitions(three_layer):
    one = replace(three_layer, repetitions=1)
    two = replace(three_layer, repetitions=2)
    assert canonical_digest(one) != canonical_digest(two)


def test_digest_format(three_layer):
    d = canonical_digest(three_layer)
    assert len(d) == 64 and set(d) <= set("0123456789abcdef")
    assert d == hashlib.sha256(canonical_serialization(three_layer).encode()).hexdigest()


def test_canonical_rationals_are_reduced_fractions(three_layer):
    text = canonical_serialization(three_layer)
    assert '"loss_rate":1/20' in text
    assert '"cpu_capacity":100/1' in text
    assert '"delay_ns":5000000' in text


def test_digest_excludes_master_seed(three_layer):
    assert canonical_digest(three_layer) == canonical_digest(three_layer.with_seed(12345))


# -- properties -------------------------------------------------------------

ident = st.text(alphabet="abcdefghijklmnopqrstuvwxyz_", min_size=1, max_size=8)
rational = st.builds(Fraction, st.integers(0, 10**6), st.integers(1, 10**4))
unit_rational = st.builds(lambda n, d: Fraction(min(n, d), d), st.integers(0, 100), st.integers(1, 100))
params = st.dictionaries(ident, st.text(alphabet="abc0123456789./", max_size=6), max_size=3)


@st.composite
def specs(draw):
    layer_names = draw(st.lists(ident, min_size=1, max_size=3, unique=True))
    ids = iter(draw(st.lists(ident, min_size=6, max_size=6, unique=True)))
    layers = []
    for name in layer_names:
        services = tuple(
            ServiceDef(next(ids), "sink", draw(st.integers(1, 4)), draw(rational) + 1, draw(params))
            for _ in range(draw(st.integers(0, 2)))
        )
        layers.append(Layer(name, services))
    rules = tuple(
        NetworkRule(
            draw(st.sampled_from(layer_names)),
            draw(st.sampled_from(layer_names)),
            draw(st.integers(0, 10**10)),
            draw(st.integers(0, 10**6)),
            draw(st.one_of(st.none(), st.integers(1, 10**10))),
            draw(unit_rational),
            draw(st.booleans()),
        )
        for _ in range(draw(st.integers(0, 3)))
    )
    workflow = tuple(
        WorkflowPhase(draw(ident), draw(st.sampled_from(["launch", "gather"])), draw(params))
        for _ in range(draw(st.integers(0, 3)))
    )
    dims = []
    for name in draw(st.lists(ident, max_size=3, unique=True)):
        kind = draw(st.integers(0, 2))
        if kind == 0:
            dom = Discrete(tuple(draw(st.lists(st.one_of(st.integers(-50, 50), ident), min_size=1, max_size=4))))
        elif kind == 1:
            lo = draw(st.integers(-10, 10))
            dom = IntRange(lo, lo + draw(st.integers(0, 20)), draw(st.integers(1, 5)))
        else:
            lo = draw(rational)
            dom = Continuous(lo, lo + draw(rational))
        dims.append((name, dom))
    return ExperimentSpec(
        draw(ident),
        tuple(layers),
        rules,
        workflow,
        ParameterSpace(tuple(dims)),
        draw(st.integers(1, 9)),
        draw(st.integers(0, 2**64 - 1)),
    )


@settings(max_examples=150, deadline=None)
@given(specs())
def test_round_trip_parse_serialize(spec):
    again = parse_spec(dump_spec(spec))
    assert again == spec
    assert parse_spec(dump_spec(again)) == again


def _mutations(spec):
    yield replace(spec, name=spec.name + "x")
    yield replace(spec, repetitions=spec.repetitions + 1)
    if spec.network_rules:
        r = spec.network_rules[0]
        for field, value in [
            ("delay_ns", r.delay_ns + 1),
            ("jitter_ns", r.jitter_ns + 1),
            ("bandwidth_bps", 7 if r.bandwidth_bps is None else None),
            ("loss_rate", r.loss_rate / 2 if r.loss_rate else Fraction(1, 3)),
            ("symmetric", not r.symmetric),
            ("src_layer", r.src_layer + "q"),
        ]:
            yield replace(spec, network_rules=(replace(r, **{field: value}),) + spec.network_rules[1:])
    for i, layer in enumerate(spec.layers):
        for j, svc in enumerate(layer.services):
            for field, value in [
                ("quantity", svc.quantity + 1),
                ("cpu_capacity", svc.cpu_capacity + Fraction(1, 7)),
                ("params", {**svc.params, "zz": "1"}),
                ("id", svc.id + "_"),
            ]:
                services = list(layer.services)
                services[j] = replace(svc, **{field: value})
                layers = list(spec.layers)
                layers[i] = replace(layer, services=tuple(services))
                yield replace(spec, layers=tuple(layers))
    yield replace(spec, workflow=spec.workflow + (WorkflowPhase("g", "gather"),))
    yield replace(spec, parameters=ParameterSpace(spec.parameters.dimensions + (("new_dim", Discrete((1,))),)))


@settings(max_examples=60, deadline=None)
@given(specs())
def test_digest_changes_under_single_field_mutation(spec):
    base = canonical_digest(spec)
    assert canonical_digest(parse_spec(dump_spec(spec))) == base
    for mutated in _mutations(spec):
        assert canonical_digest(mutated) != base
