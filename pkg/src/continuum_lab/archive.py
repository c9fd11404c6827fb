"""Experiment runner and self-verifying result archives.

Archive layout::

    out_dir/
      manifest.json        key-sorted JSON; digests of every other file
      spec.canonical       canonical experiment serialization
      rep_<k>/metrics.csv  t_ns,source,metric,value
      rep_<k>/result.json  trace digest, counters, metric summaries
      rep_<k>/trace.log    event trace (only when tracing is enabled)
"""

import datetime
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

from .emulator import Deployment, provision
from .errors import CorruptArchive, PhaseError, SpecInvalid
from .mapping import HostPool, Mapping, check_capacity, default_pool, resolve_mapping
from .monitor import MetricSample, MetricSummary, record_builtin_metrics, samples_from_csv, samples_to_csv, summarize_all
from .spec import ExperimentSpec, canonical_serialization, validate_spec
from .units import format_decimal, parse_duration_ns, to_rational

DEFAULT_SAMPLE_INTERVAL_NS = 1_000_000_000
TRACE_ENV = "CONTINUUM_LAB_TRACE"


def tool_version():
    from . import __version__

    return f"continuum-lab {__version__}"


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def canonical_json(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=True) + "\n").encode("ascii")


@dataclass
class RepetitionResult:
    repetition_index: int
    trace_digest: str
    summaries: Dict[str, MetricSummary]
    metrics_file: str
    completed_records: int
    dropped: int
    samples: Optional[List[MetricSample]] = field(default=None, repr=False)


@dataclass
class ExperimentArchive:
    manifest: dict
    repetitions: List[RepetitionResult]
    files: Dict[str, bytes] = field(repr=False)
    root: Optional[Path] = None

    @property
    def manifest_digest(self) -> str:
        return manifest_digest(self.manifest)

    def samples(self, k: int) -> List[MetricSample]:
        rep = self.repetitions[k]
        if rep.samples is None:
            rep.samples = samples_from_csv(self.files[rep.metrics_file].decode("utf-8"))
        return rep.samples


def manifest_digest(manifest: dict) -> str:
    """Digest of the manifest with the wall-clock creation label removed."""
    stable = {k: v for k, v in manifest.items() if k != "created"}
    return sha256_bytes(canonical_json(stable))


def _summary_doc(summary: MetricSummary):
    return {k: (v if k == "count" else format_decimal(v)) for k, v in summary.as_dict().items()}


def _summary_from_doc(metric, doc) -> MetricSummary:
    return MetricSummary(metric=metric, count=int(doc["count"]),
                         **{k: to_rational(doc[k]) for k in ("min", "max", "mean", "p50", "p95", "p99")})


def run_workflow(deployment: Deployment):
    """Execute the spec's workflow phases in order on ``deployment``."""
    spec = deployment.spec
    for phase in spec.workflow:
        deployment.mark_phase(phase.name)
        args = phase.args
        if phase.kind == "launch":
            for svc in filter(None, (s.strip() for s in args.get("services", "").split(","))):
                if spec.service(svc) is None:
                    raise PhaseError(phase.name, f"unknown service {svc!r}")
        elif phase.kind == "inject":
            target = args["target"]
            if spec.service(target) is None:
                raise PhaseError(phase.name, f"unknown service {target!r}")
            deployment.inject(
                phase.name,
                target,
                int(args["count"]),
                parse_duration_ns(args.get("period", 0)),
                int(args["size_bits"]) if "size_bits" in args else None,
                args.get("spacing", "fixed"),
            )
        elif phase.kind == "wait_until":
            until = parse_duration_ns(args["sim_time_ns"])
            if until < deployment.now_ns:
                raise PhaseError(phase.name, "wait_until time is in the past")
            deployment.advance(until)
            continue
        deployment.advance(deployment.now_ns)


def run_repetition(spec, mapping, pool, repetition_index, sample_interval_ns=DEFAULT_SAMPLE_INTERVAL_NS,
                   keep_trace=False):
    """Provision, run and measure one repetition.

    Returns ``(deployment, samples)``.
    """
    dep = provision(spec, mapping, repetition_index, pool=pool, keep_trace=keep_trace)
    monitor = record_builtin_metrics(dep, sample_interval_ns)
    run_workflow(dep)
    monitor.finish(dep)
    return dep, monitor.samples


def prepare(spec: ExperimentSpec, pool: Optional[HostPool] = None, strategy: str = "round_robin"):
    """Validate ``spec`` against ``pool`` and resolve the mapping."""
    violations = validate_spec(spec)
    if violations:
        raise SpecInvalid(violations)
    pool = pool if pool is not None else default_pool(spec)
    capacity = check_capacity(spec, pool)
    if capacity:
        raise SpecInvalid(capacity)
    return pool, resolve_mapping(spec, pool, strategy)


def run_experiment(spec: ExperimentSpec, pool: Optional[HostPool] = None,
                   out_dir: Union[str, Path, None] = None, *, strategy: str = "round_robin",
                   sample_interval_ns: int = DEFAULT_SAMPLE_INTERVAL_NS,
                   trace: Optional[bool] = None, created: Optional[str] = None) -> ExperimentArchive:
    """Run every repetition of ``spec`` and assemble the archive.

    With ``out_dir`` the archive is also written to disk (``manifest.json``
    last). ``trace`` defaults to the ``CONTINUUM_LAB_TRACE`` environment
    variable and adds ``trace.log`` to each repetition.
    """
    if trace is None:
        trace = os.environ.get(TRACE_ENV, "") == "1"
    pool, mapping = prepare(spec, pool, strategy)

    canonical = canonical_serialization(spec).encode("ascii")
    files: Dict[str, bytes] = {"spec.canonical": canonical}
    results = []
    for r in range(spec.repetitions):
        dep, samples = run_repetition(spec, mapping, pool, r, sample_interval_ns, keep_trace=trace)
        summaries = summarize_all(samples)
        prefix = f"rep_{r}"
        rep = RepetitionResult(
            repetition_index=r,
            trace_digest=dep.trace_digest(),
            summaries=summaries,
            metrics_file=f"{prefix}/metrics.csv",
            completed_records=dep.completed_records,
            dropped=dep.dropped,
            samples=samples,
        )
        files[rep.metrics_file] = samples_to_csv(samples).encode("utf-8")
        if trace:
            files[f"{prefix}/trace.log"] = "".join(dep.trace_lines).encode("utf-8")
        files[f"{prefix}/result.json"] = canonical_json(
            {
                "repetition_index": r,
                "trace_digest": rep.trace_digest,
                "completed_records": rep.completed_records,
                "dropped": rep.dropped,
                "metrics_file": "metrics.csv",
                "summaries": {m: _summary_doc(s) for m, s in summaries.items()},
            }
        )
        results.append(rep)

    manifest = {
        "name": spec.name,
        "tool_version": tool_version(),
        "spec_digest": sha256_bytes(canonical),
        "master_seed": spec.master_seed,
        "repetitions": spec.repetitions,
        "mapping": [list(a) for a in mapping.assignments],
        "mapping_digest": mapping.digest(),
        "trace_digests": [r.trace_digest for r in results],
        "files": {path: sha256_bytes(data) for path, data in sorted(files.items())},
        "created": created or datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    }
    archive = ExperimentArchive(manifest, results, files)
    if out_dir is not None:
        write_archive(archive, out_dir)
    return archive


def write_archive(archive: ExperimentArchive, out_dir) -> Path:
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    for rel, data in archive.files.items():
        target = root / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)
    (root / "manifest.json").write_bytes(canonical_json(archive.manifest))
    archive.root = root
    return root


def load_archive(path) -> ExperimentArchive:
    """Read an archive directory and verify every digest it carries.

    Raises :class:`CorruptArchive` naming the first file that does not match.
    """
    root = Path(path)
    try:
        manifest = json.loads((root / "manifest.json").read_text(encoding="ascii"))
    except (OSError, ValueError) as exc:
        raise CorruptArchive(root / "manifest.json", f"unreadable manifest: {exc}") from None
    if not isinstance(manifest, dict) or not isinstance(manifest.get("files"), dict):
        raise CorruptArchive(root / "manifest.json", "manifest has no file table")
    files = {}
    for rel in sorted(manifest["files"]):
        try:
            files[rel] = (root / rel).read_bytes()
        except OSError:
            raise CorruptArchive(root / rel, "listed file is missing") from None
    archive = ExperimentArchive(manifest, [], files, root)
    archive.repetitions = _verify(archive)
    return archive


def _verify(archive: ExperimentArchive) -> List[RepetitionResult]:
    m = archive.manifest
    root = archive.root or Path(".")
    for rel, expected in sorted(m["files"].items()):
        if sha256_bytes(archive.files[rel]) != expected:
            raise CorruptArchive(root / rel)
    if "spec.canonical" not in archive.files:
        raise CorruptArchive(root / "spec.canonical", "missing")
    if sha256_bytes(archive.files["spec.canonical"]) != m.get("spec_digest"):
        raise CorruptArchive(root / "spec.canonical", "spec digest mismatch")
    mapping = Mapping(tuple(tuple(a) for a in m.get("mapping", [])))
    if mapping.digest() != m.get("mapping_digest"):
        raise CorruptArchive(root / "manifest.json", "mapping digest mismatch")
    traces = m.get("trace_digests", [])
    if not isinstance(m.get("repetitions"), int) or len(traces) != m["repetitions"]:
        raise CorruptArchive(root / "manifest.json", "repetition count mismatch")
    results = []
    for k, trace_digest in enumerate(traces):
        prefix = f"rep_{k}"
        for rel in (f"{prefix}/metrics.csv", f"{prefix}/result.json"):
            if rel not in archive.files:
                raise CorruptArchive(root / rel, "missing")
        doc = json.loads(archive.files[f"{prefix}/result.json"])
        if doc.get("trace_digest") != trace_digest or doc.get("repetition_index") != k:
            raise CorruptArchive(root / f"{prefix}/result.json", "trace digest mismatch")
        log = archive.files.get(f"{prefix}/trace.log")
        if log is not None and sha256_bytes(log) != trace_digest:
            raise CorruptArchive(root / f"{prefix}/trace.log", "trace log does not hash to trace digest")
        results.append(
            RepetitionResult(
                repetition_index=k,
                trace_digest=trace_digest,
                summaries={metric: _summary_from_doc(metric, s) for metric, s in doc["summaries"].items()},
                metrics_file=f"{prefix}/{doc['metrics_file']}",
                completed_records=doc["completed_records"],
                dropped=doc["dropped"],
            )
        )
    extra = [p for p in root.glob("rep_*")] if archive.root else []
    if len(extra) > len(traces):
        raise CorruptArchive(root, "more repetition directories than the manifest lists")
    return results


def verify_archive(archive: ExperimentArchive) -> ExperimentArchive:
    """Check an in-memory archive's digests; returns it unchanged."""
    _verify(archive)
    return archive


@dataclass(frozen=True)
class DiffResult:
    differences: tuple

    @property
    def identical(self) -> bool:
        return not self.differences

    def __str__(self):
        if self.identical:
            return "IDENTICAL"
        return "DIVERGENT(" + ", ".join(self.differences) + ")"


def _as_archive(a) -> ExperimentArchive:
    if isinstance(a, ExperimentArchive):
        if a.root is not None:
            return load_archive(a.root)
        return verify_archive(a)
    return load_archive(a)


def verify_repeatability(a, b) -> DiffResult:
    """Compare two archives (paths or :class:`ExperimentArchive`) digest by digest.

    Both are re-verified from their files first, so tampering raises
    :class:`CorruptArchive` rather than showing up as a difference.
    """
    a, b = _as_archive(a), _as_archive(b)
    ma, mb = a.manifest, b.manifest
    diffs = []
    for key in ("spec_digest", "master_seed", "mapping_digest", "repetitions"):
        if ma.get(key) != mb.get(key):
            diffs.append(f"manifest.{key}")
    ta, tb = ma["trace_digests"], mb["trace_digests"]
    for k in range(max(len(ta), len(tb))):
        if k >= len(ta) or k >= len(tb) or ta[k] != tb[k]:
            diffs.append(f"repetitions[{k}].trace_digest")
    return DiffResult(tuple(diffs))
