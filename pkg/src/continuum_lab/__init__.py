"""Reproducible edge-to-cloud experiment orchestration on a deterministic emulator."""

__version__ = "0.1.0"

from .archive import ExperimentArchive, RepetitionResult, load_archive, run_experiment, verify_repeatability
from .bench import analytic_latency, build_scenario
from .emulator import Deployment, link_transit, provision
from .mapping import Host, HostPool, Mapping, check_capacity, resolve_mapping
from .monitor import MetricSample, MetricSummary, record_builtin_metrics, summarize
from .optimizer import (
    Evaluation,
    Objective,
    OptimizationResult,
    correlate,
    enumerate_grid,
    optimize_loop,
    pareto_front,
    sample_random,
    surrogate_suggest,
)
from .spec import ExperimentSpec, Violation, canonical_digest, dump_spec, parse_spec, validate_spec
