"""
Bit-identical reruns
====================

Two runs of the same experiment with the same seed produce the same
event traces, so their archives diff as IDENTICAL. Changing the seed
changes every random stream; touching a stored file is caught on load.
"""

import tempfile
from pathlib import Path

from continuum_lab import run_experiment, verify_repeatability
from continuum_lab.errors import CorruptArchive
from continuum_lab.spec import parse_spec

SPEC = """
name: jittery-uplink
seed: 2024
repetitions: 3
layers:
  - name: edge
    services:
      - {id: cam, kind: producer, quantity: 2, params: {target: store, size_bits: 200000}}
  - name: cloud
    services:
      - {id: store, kind: sink, cpu_capacity: 100, params: {base_units: 1}}
network:
  - {src: edge, dst: cloud, delay: 20ms, jitter: 5ms, bandwidth: 10Mbps, loss: 0.02}
workflow:
  - {name: feed, kind: inject, args: {target: cam, count: 200, period: 50ms, spacing: uniform}}
  - {name: run, kind: wait_until, args: {sim_time_ns: 15s}}
"""

spec = parse_spec(SPEC)
with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp)
    first = run_experiment(spec, out_dir=root / "first")
    second = run_experiment(spec, out_dir=root / "second")
    print("same seed:     ", verify_repeatability(root / "first", root / "second"))
    for rep in first.repetitions:
        print(f"  rep {rep.repetition_index}: trace {rep.trace_digest[:16]}...  dropped {rep.dropped}")

    reseeded = run_experiment(spec.with_seed(2025), out_dir=root / "reseeded")
    print("different seed:", verify_repeatability(root / "first", root / "reseeded"))

    metrics = root / "first" / "rep_0" / "metrics.csv"
    data = bytearray(metrics.read_bytes())
    data[40] ^= 1
    metrics.write_bytes(bytes(data))
    try:
        verify_repeatability(root / "first", root / "second")
    except CorruptArchive as exc:
        print("tampered:      ", exc)
