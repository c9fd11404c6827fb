import textwrap
from pathlib import Path

import pytest

from continuum_lab.spec import parse_spec

FIXTURES = Path(__file__).parent / "fixtures"


THREE_LAYER = textwrap.dedent(
    """
    name: three-layer
    seed: 7
    repetitions: 2
    layers:
      - name: edge
        services:
          - id: cam
            kind: producer
            quantity: 2
            cpu_capacity: 100
            params: {target: filter, size_bits: 400000}
      - name: fog
        services:
          - id: filter
            kind: transformer
            cpu_capacity: 50
            params: {target: store, factor: 0.5, base_units: 1}
      - name: cloud
        services:
          - {id: store, kind: sink, cpu_capacity: 1000, params: {base_units: 10}}
    network:
      - {src: edge, dst: fog, delay: 5ms, jitter: 1ms, bandwidth: 10Mbps, loss: 0.05}
      - {src: fog, dst: cloud, delay: 30ms, bandwidth: 100Mbps}
    workflow:
      - {name: deploy, kind: launch}
      - {name: feed, kind: inject, args: {target: cam, count: 20, period: 250ms}}
      - {name: run, kind: wait_until, args: {sim_time_ns: 10s}}
      - {name: collect, kind: gather}
    parameters:
      filter.factor: [0.25, 0.5, 1]
      cam.size_bits: {range: [100000, 400000], step: 100000}
    """
)


@pytest.fixture
def three_layer_text():
    return THREE_LAYER


@pytest.fixture
def three_layer():
    return parse_spec(THREE_LAYER)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_LINES, [])

    def record(number, ok, detail):
        lines.append((number, f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"))
        print(lines[-1][1])
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
