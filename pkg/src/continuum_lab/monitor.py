"""Metric collection inside the event loop and exact summaries."""

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Sequence

from .errors import NoSamples
from .units import NS_PER_S, format_decimal, to_rational

BUILTIN_METRICS = (
    "queue_length",
    "cpu_utilization",
    "e2e_latency_ns",
    "throughput_rps",
    "messages_dropped",
)

CSV_HEADER = ("t_ns", "source", "metric", "value")


@dataclass(frozen=True)
class MetricSample:
    t_ns: int
    source: str
    metric: str
    value: Fraction


@dataclass(frozen=True)
class MetricSummary:
    metric: str
    count: int
    min: Fraction
    max: Fraction
    mean: Fraction
    p50: Fraction
    p95: Fraction
    p99: Fraction

    def as_dict(self):
        return {
            "count": self.count,
            "min": self.min,
            "max": self.max,
            "mean": self.mean,
            "p50": self.p50,
            "p95": self.p95,
            "p99": self.p99,
        }


class Monitor:
    """Collects the built-in metrics of one deployment.

    Ticks every ``interval_ns`` sample ``queue_length`` and
    ``cpu_utilization`` (busy-time delta over the interval) for each
    instance. Sinks report ``e2e_latency_ns`` on completion. :meth:`finish`
    adds the global ``throughput_rps`` and ``messages_dropped`` samples.
    """

    def __init__(self, deployment, interval_ns: int):
        if interval_ns <= 0:
            raise ValueError("sample interval must be > 0")
        self.interval_ns = interval_ns
        self.samples: List[MetricSample] = []
        self._last_busy = {inst: rt.busy_at(deployment.now_ns) for inst, rt in deployment.runtimes.items()}
        self.dropped = 0
        deployment.monitor = self
        deployment.schedule(deployment.now_ns + interval_ns, "monitor_tick")

    def on_tick(self, deployment):
        now = deployment.now_ns
        for inst in sorted(deployment.runtimes):
            rt = deployment.runtimes[inst]
            busy = rt.busy_at(now)
            util = Fraction(busy - self._last_busy[inst], self.interval_ns)
            self._last_busy[inst] = busy
            self.samples.append(MetricSample(now, inst, "queue_length", Fraction(rt.queue_length)))
            self.samples.append(MetricSample(now, inst, "cpu_utilization", util))
        deployment.schedule(now + self.interval_ns, "monitor_tick")

    def on_latency(self, t_ns, instance, latency_ns):
        self.samples.append(MetricSample(t_ns, instance, "e2e_latency_ns", Fraction(latency_ns)))

    def on_drop(self, t_ns, msg):
        self.dropped += 1

    def finish(self, deployment):
        """Emit the run-level samples at the current clock."""
        now = deployment.now_ns
        throughput = Fraction(deployment.completed_records * NS_PER_S, now) if now > 0 else Fraction(0)
        self.samples.append(MetricSample(now, "global", "throughput_rps", throughput))
        self.samples.append(MetricSample(now, "global", "messages_dropped", Fraction(deployment.dropped)))


def record_builtin_metrics(deployment, sample_interval_ns: int) -> Monitor:
    """Attach a :class:`Monitor` to ``deployment``; its ``samples`` list fills as the run advances."""
    return Monitor(deployment, sample_interval_ns)


def nearest_rank(sorted_values: Sequence, p) -> Fraction:
    """Value at 1-based index ``ceil(p/100 * n)`` of an ascending sequence."""
    n = len(sorted_values)
    rank = math.ceil(Fraction(p) * n / 100)
    return sorted_values[max(rank, 1) - 1]


def summarize_values(metric: str, values: Iterable) -> MetricSummary:
    ordered = sorted(Fraction(v) for v in values)
    if not ordered:
        raise NoSamples(metric)
    return MetricSummary(
        metric=metric,
        count=len(ordered),
        min=ordered[0],
        max=ordered[-1],
        mean=sum(ordered, Fraction(0)) / len(ordered),
        p50=nearest_rank(ordered, 50),
        p95=nearest_rank(ordered, 95),
        p99=nearest_rank(ordered, 99),
    )


def summarize(samples: Iterable[MetricSample], metric: str) -> MetricSummary:
    """Summary of every sample of ``metric``. Raises NoSamples if there are none."""
    return summarize_values(metric, (s.value for s in samples if s.metric == metric))


def summarize_all(samples: Sequence[MetricSample]):
    present = {s.metric for s in samples}
    return {m: summarize(samples, m) for m in BUILTIN_METRICS if m in present}


def samples_to_csv(samples: Iterable[MetricSample]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for s in samples:
        writer.writerow((s.t_ns, s.source, s.metric, format_decimal(s.value)))
    return buf.getvalue()


def samples_from_csv(text: str) -> List[MetricSample]:
    rows = csv.reader(io.StringIO(text))
    header = next(rows, None)
    if tuple(header or ()) != CSV_HEADER:
        raise ValueError(f"unexpected metrics header {header!r}")
    return [MetricSample(int(t), src, metric, to_rational(v)) for t, src, metric, v in rows]
