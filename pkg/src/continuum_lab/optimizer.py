"""Parameter search over experiment configurations.

Strategies: exhaustive ``grid``, independent ``random`` sampling, and a
``surrogate`` strategy that predicts objective values with inverse-distance
weighting (IDW) over evaluated points and adds an exploration bonus for
candidates far from anything evaluated. Results carry the Pareto set of all
evaluations and Pearson correlations between numeric parameters and
objectives.
"""

import csv
import itertools
import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .errors import (
    ContinuousDimension,
    EvaluationError,
    ExhaustedSpace,
    NonNumericParameter,
    ParameterBindingError,
    UnknownMetric,
)
from .monitor import BUILTIN_METRICS, summarize_values
from .rng import SplitMix64
from .spec import Continuous, Discrete, ExperimentSpec, IntRange, ParameterSpace
from .units import format_decimal, parse_bandwidth_bps, parse_duration_ns, to_rational

STRATEGIES = ("grid", "random", "surrogate")
AGGREGATORS = ("mean", "p50", "p95", "p99", "max")
DIRECTIONS = ("minimize", "maximize")
IDW_EPS = 1e-9
DEFAULT_LAMBDA = 0.5
DEFAULT_POOL_SIZE = 64


@dataclass(frozen=True)
class Objective:
    metric: str
    direction: str = "minimize"
    aggregator: str = "mean"

    def __post_init__(self):
        if self.metric not in BUILTIN_METRICS:
            raise UnknownMetric(self.metric)
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")
        if self.aggregator not in AGGREGATORS:
            raise ValueError(f"aggregator must be one of {AGGREGATORS}")

    @property
    def label(self) -> str:
        return f"{self.metric}:{self.aggregator}"

    @property
    def sign(self) -> int:
        return 1 if self.direction == "minimize" else -1

    @classmethod
    def parse(cls, text: str) -> "Objective":
        """``metric[:aggregator[:direction]]``, e.g. ``e2e_latency_ns:p95:minimize``."""
        parts = text.split(":")
        if not 1 <= len(parts) <= 3:
            raise ValueError(f"bad objective {text!r}")
        metric = parts[0]
        aggregator = parts[1] if len(parts) > 1 else "mean"
        direction = parts[2] if len(parts) > 2 else "minimize"
        return cls(metric, direction, aggregator)


@dataclass(frozen=True)
class Evaluation:
    evaluation_index: int
    point: Dict[str, object]
    objectives: tuple
    labels: tuple = ()
    archive: Optional[str] = None

    def value(self, metric: str):
        """Objective value by label (``metric:agg``) or by bare metric name."""
        for label, v in zip(self.labels, self.objectives):
            if label == metric or label.split(":")[0] == metric:
                return v
        raise KeyError(metric)


@dataclass
class OptimizationResult:
    evaluations: List[Evaluation]
    objectives: List[Objective]
    strategy: str
    budget: int
    best: Optional[Evaluation]
    pareto: List[Evaluation]
    correlations: Dict[str, Dict[str, Optional[float]]] = field(default_factory=dict)

    @property
    def budget_used(self) -> int:
        return len(self.evaluations)


# --------------------------------------------------------------------------
# spaces


def _finite_size(space: ParameterSpace) -> Optional[int]:
    size = 1
    for _, dom in space.dimensions:
        if isinstance(dom, Continuous):
            return None
        size *= dom.size
    return size


def point_key(point, space: ParameterSpace):
    return tuple(point[name] for name in space.names)


def enumerate_grid(space: ParameterSpace) -> List[Dict[str, object]]:
    """Cartesian product in dimension order, each domain in its declared order."""
    domains = []
    for name, dom in space.dimensions:
        if isinstance(dom, Continuous):
            raise ContinuousDimension(name)
        domains.append(dom.points())
    return [dict(zip(space.names, combo)) for combo in itertools.product(*domains)]


def _draw_value(dom, rng: SplitMix64):
    if isinstance(dom, Discrete):
        return dom.values[rng.below(len(dom.values))]
    if isinstance(dom, IntRange):
        return dom.value_at(rng.below(dom.size))
    lo, hi = float(dom.lo), float(dom.hi)
    return lo + rng.random() * (hi - lo)


def sample_random(space: ParameterSpace, n: int, rng: SplitMix64) -> List[Dict[str, object]]:
    if n < 1:
        raise ValueError("n must be >= 1")
    return [{name: _draw_value(dom, rng) for name, dom in space.dimensions} for _ in range(n)]


class _Encoder:
    """Maps points to min-max normalized numeric coordinates plus categorical codes.

    Bounds come from the declared domains, never from observed values.
    """

    def __init__(self, space: ParameterSpace):
        self.numeric = []  # (name, lo, span)
        self.categorical = []  # (name, {value: code})
        for name, dom in space.dimensions:
            if isinstance(dom, Discrete) and not dom.numeric:
                self.categorical.append((name, {v: k for k, v in enumerate(dict.fromkeys(dom.values))}))
                continue
            if isinstance(dom, Discrete):
                lo, hi = min(dom.values), max(dom.values)
            elif isinstance(dom, IntRange):
                pts = dom.points()
                lo, hi = pts[0], pts[-1]
            else:
                lo, hi = dom.lo, dom.hi
            span = float(hi) - float(lo)
            self.numeric.append((name, float(lo), span))

    def encode(self, points):
        num = np.array(
            [[(float(p[n]) - lo) / span if span > 0 else 0.0 for n, lo, span in self.numeric] for p in points],
            dtype=float,
        ).reshape(len(points), len(self.numeric))
        cat = np.array(
            [[codes.get(p[n], -1) for n, codes in self.categorical] for p in points], dtype=np.int64
        ).reshape(len(points), len(self.categorical))
        return num, cat

    def sq_distances(self, a, b):
        """Pairwise squared distances, shape (len(a), len(b))."""
        (an, ac), (bn, bc) = a, b
        diff = an[:, None, :] - bn[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        if ac.shape[1]:
            d2 = d2 + (ac[:, None, :] != bc[None, :, :]).sum(axis=2)
        return d2


def idw_predict(space: ParameterSpace, history_points, history_values, candidates):
    """IDW predictions and nearest-evaluated distances for ``candidates``.

    Weight of evaluated point i is ``1 / (d_i**2 + 1e-9)``.
    """
    enc = _Encoder(space)
    d2 = enc.sq_distances(enc.encode(candidates), enc.encode(history_points))
    w = 1.0 / (d2 + IDW_EPS)
    y = np.asarray(history_values, dtype=float)
    mu = (w @ y) / w.sum(axis=1)
    return mu, np.sqrt(d2.min(axis=1))


def make_scalarization(objectives: Sequence[Objective], weights=None) -> Callable[[Evaluation], float]:
    """Weighted sum of objectives in minimization sense (maximized ones negated)."""
    weights = list(weights) if weights is not None else [1.0] * len(objectives)
    if len(weights) != len(objectives):
        raise ValueError("one weight per objective required")
    signs = [o.sign for o in objectives]

    def scalarize(e: Evaluation) -> float:
        return sum(w * s * float(v) for w, s, v in zip(weights, signs, e.objectives))

    return scalarize


def _draw_unevaluated(space, rng, taken, count, finite_size):
    """Up to ``count`` random points whose keys are not in ``taken``."""
    out = []
    attempts = 0
    while len(out) < count and attempts < 20 * count:
        p = sample_random(space, 1, rng)[0]
        attempts += 1
        if point_key(p, space) not in taken:
            out.append(p)
    if not out and finite_size is not None:
        remaining = [p for p in enumerate_grid(space) if point_key(p, space) not in taken]
        out = [remaining[rng.below(len(remaining))] for _ in range(count)] if remaining else []
    return out


def surrogate_suggest(space: ParameterSpace, history: Sequence[Evaluation],
                      objective_scalarization: Callable[[Evaluation], float], rng: SplitMix64,
                      pool_size: int = DEFAULT_POOL_SIZE, lam: float = DEFAULT_LAMBDA,
                      candidates=None, exclude=()):
    """Next point to evaluate.

    With fewer than two evaluations a random unevaluated point is returned.
    Otherwise ``pool_size`` random unevaluated candidates are scored by
    ``mu(x) - lam * d_min(x)`` and the first minimizer wins. ``exclude``
    holds keys of points already chosen but not yet evaluated.
    """
    taken = {point_key(e.point, space) for e in history} | set(exclude)
    finite = _finite_size(space)
    if finite is not None:
        evaluated_in_space = sum(1 for p in enumerate_grid(space) if point_key(p, space) in taken) \
            if len(taken) >= finite else len(taken)
        if evaluated_in_space >= finite:
            raise ExhaustedSpace(f"all {finite} points of the space have been evaluated")
    if len(history) < 2 and candidates is None:
        pick = _draw_unevaluated(space, rng, taken, 1, finite)
        if not pick:
            raise ExhaustedSpace("no unevaluated point could be drawn")
        return pick[0]
    pool = list(candidates) if candidates is not None else _draw_unevaluated(space, rng, taken, pool_size, finite)
    if not pool:
        raise ExhaustedSpace("no unevaluated candidate could be drawn")
    mu, dmin = idw_predict(space, [e.point for e in history],
                           [objective_scalarization(e) for e in history], pool)
    score = mu - float(lam) * dmin
    return pool[int(np.argmin(score))]


# --------------------------------------------------------------------------
# binding parameters to specs


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def bind_point(spec: ExperimentSpec, point: Dict[str, object]) -> ExperimentSpec:
    """Spec with ``point`` substituted.

    Names address ``<service_id>.<param>`` (``quantity`` and ``cpu_capacity``
    set the service fields, anything else a behavior param) or
    ``network.<src>.<dst>.<field>`` with field ``delay``, ``jitter``,
    ``bandwidth`` or ``loss``.
    """
    layers = list(spec.layers)
    rules = list(spec.network_rules)
    for name, value in point.items():
        if name.startswith("network."):
            parts = name.split(".")
            if len(parts) != 4:
                raise ParameterBindingError(f"{name}: expected network.<src>.<dst>.<field>")
            _, src, dst, fld = parts
            for k, rule in enumerate(rules):
                if (src, dst) in rule.directions():
                    break
            else:
                raise ParameterBindingError(f"{name}: no network rule {src}->{dst}")
            text = _render(value)
            try:
                if fld == "delay":
                    rules[k] = replace(rule, delay_ns=parse_duration_ns(text))
                elif fld == "jitter":
                    rules[k] = replace(rule, jitter_ns=parse_duration_ns(text))
                elif fld == "bandwidth":
                    rules[k] = replace(rule, bandwidth_bps=parse_bandwidth_bps(text))
                elif fld == "loss":
                    rules[k] = replace(rule, loss_rate=to_rational(text))
                else:
                    raise ParameterBindingError(f"{name}: unknown network field {fld!r}")
            except ValueError as exc:
                raise ParameterBindingError(f"{name}: {exc}") from None
            continue
        svc_id, sep, key = name.rpartition(".")
        if not sep:
            raise ParameterBindingError(f"{name}: expected <service_id>.<param>")
        for li, layer in enumerate(layers):
            services = list(layer.services)
            for si, svc in enumerate(services):
                if svc.id != svc_id:
                    continue
                if key == "quantity":
                    services[si] = replace(svc, quantity=int(value))
                elif key == "cpu_capacity":
                    services[si] = replace(svc, cpu_capacity=to_rational(_render(value)))
                else:
                    services[si] = replace(svc, params={**svc.params, key: _render(value)})
                layers[li] = replace(layer, services=tuple(services))
                break
            else:
                continue
            break
        else:
            raise ParameterBindingError(f"{name}: no service {svc_id!r}")
    return replace(spec, layers=tuple(layers), network_rules=tuple(rules))


# --------------------------------------------------------------------------
# analysis


def _rank_matrix(vectors, signs):
    """Per-objective dense ranks in minimization sense; dominance is preserved exactly."""
    n, m = len(vectors), len(signs)
    ranks = np.empty((n, m), dtype=np.int64)
    for j in range(m):
        column = [v[j] for v in vectors]
        order = {val: r for r, val in enumerate(sorted(set(column)))}
        ranks[:, j] = [signs[j] * order[val] for val in column]
    return ranks


def pareto_indices(vectors, directions) -> List[int]:
    """Indices of non-dominated vectors, ascending."""
    if not len(vectors):
        return []
    signs = [1 if d == "minimize" else -1 for d in directions]
    R = _rank_matrix(vectors, signs)
    n, m = R.shape
    # a dominator always precedes what it dominates in lexicographic order
    order = np.lexsort(R.T[::-1])
    front = np.empty((n, m), dtype=np.int64)
    members = []
    size = 0
    for idx in order:
        row = R[idx]
        if size:
            F = front[:size]
            if np.any(np.all(F <= row, axis=1) & np.any(F < row, axis=1)):
                continue
        front[size] = row
        size += 1
        members.append(int(idx))
    return sorted(members)


def pareto_front(evaluations: Sequence[Evaluation], objectives: Sequence[Objective]) -> List[Evaluation]:
    """Non-dominated evaluations, ordered by evaluation_index."""
    idx = pareto_indices([e.objectives for e in evaluations], [o.direction for o in objectives])
    return sorted((evaluations[i] for i in idx), key=lambda e: e.evaluation_index)


def pearson(xs, ys) -> Optional[float]:
    """Sample Pearson coefficient from exact rational sums; None if a variance is zero."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("need at least two paired observations")
    fx = [Fraction(x) for x in xs]
    fy = [Fraction(y) for y in ys]
    n = len(fx)
    mx = sum(fx, Fraction(0)) / n
    my = sum(fy, Fraction(0)) / n
    cov = sum(((a - mx) * (b - my) for a, b in zip(fx, fy)), Fraction(0))
    vx = sum(((a - mx) ** 2 for a in fx), Fraction(0))
    vy = sum(((b - my) ** 2 for b in fy), Fraction(0))
    if vx == 0 or vy == 0:
        return None
    r = math.copysign(math.sqrt(cov * cov / (vx * vy)), cov) if cov else 0.0
    return max(-1.0, min(1.0, r))


def correlate(evaluations: Sequence[Evaluation], parameter: str, metric: str) -> Optional[float]:
    """Pearson r between a numeric parameter and an objective; None when undefined."""
    xs = []
    for e in evaluations:
        v = e.point[parameter]
        if isinstance(v, bool) or not isinstance(v, (int, float, Fraction)):
            raise NonNumericParameter(parameter)
        xs.append(v)
    return pearson(xs, [e.value(metric) for e in evaluations])


# --------------------------------------------------------------------------
# loop


def aggregate(values, aggregator: str):
    s = summarize_values("objective", values)
    return {"mean": s.mean, "p50": s.p50, "p95": s.p95, "p99": s.p99, "max": s.max}[aggregator]


def experiment_evaluator(spec, pool=None, objectives=(), out_dir=None, sample_interval_ns=None):
    """Evaluation function that runs the bound spec and aggregates pooled samples."""
    from .archive import DEFAULT_SAMPLE_INTERVAL_NS, run_experiment

    interval = sample_interval_ns or DEFAULT_SAMPLE_INTERVAL_NS

    def evaluate(point, index):
        derived = bind_point(spec, point)
        target = None if out_dir is None else Path(out_dir) / f"eval_{index}"
        archive = run_experiment(derived, pool, target, sample_interval_ns=interval, trace=False)
        samples = [s for k in range(len(archive.repetitions)) for s in archive.samples(k)]
        values = [aggregate([s.value for s in samples if s.metric == o.metric], o.aggregator)
                  for o in objectives]
        return values, (str(target) if target is not None else archive.manifest_digest)

    return evaluate


def optimize_loop(spec: Optional[ExperimentSpec], pool, space: Optional[ParameterSpace],
                  objectives: Sequence[Objective], strategy: str, budget: int, master_seed: int, *,
                  evaluate=None, lam=DEFAULT_LAMBDA, pool_size=DEFAULT_POOL_SIZE, batch_size=1,
                  weights=None, out_dir=None, sample_interval_ns=None) -> OptimizationResult:
    """Evaluate up to ``budget`` points chosen by ``strategy``.

    ``evaluate(point, index)`` may replace the default experiment runner; it
    returns the objective vector, optionally paired with an archive reference.
    Grid search stops after the last grid point; surrogate search stops when
    a finite space is exhausted.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}")
    if not objectives:
        raise ValueError("at least one objective is required")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    objectives = list(objectives)
    space = space if space is not None else spec.parameters
    if evaluate is None:
        evaluate = experiment_evaluator(spec, pool, objectives, out_dir, sample_interval_ns)
    labels = tuple(o.label for o in objectives)
    rng = SplitMix64.for_role(master_seed, "optimizer")
    scalarize = make_scalarization(objectives, weights)
    grid = enumerate_grid(space) if strategy == "grid" else None

    evaluations: List[Evaluation] = []
    while len(evaluations) < budget:
        batch = []
        want = min(batch_size, budget - len(evaluations))
        if strategy == "grid":
            batch = grid[len(evaluations):len(evaluations) + want]
        elif strategy == "random":
            batch = sample_random(space, want, rng)
        else:
            pending = set()
            for _ in range(want):
                try:
                    p = surrogate_suggest(space, evaluations, scalarize, rng, pool_size, lam, exclude=pending)
                except ExhaustedSpace:
                    break
                pending.add(point_key(p, space))
                batch.append(p)
        if not batch:
            break
        for point in batch:
            index = len(evaluations)
            try:
                out = evaluate(point, index)
            except Exception as exc:  # tag with the evaluation that failed
                raise EvaluationError(index, exc) from exc
            ref = None
            if isinstance(out, tuple) and len(out) == 2 and not isinstance(out[1], (int, float, Fraction)):
                out, ref = out
            values = tuple(out)
            if len(values) != len(objectives):
                raise EvaluationError(index, ValueError("objective vector has the wrong length"))
            evaluations.append(Evaluation(index, dict(point), values, labels, ref))

    best = None
    if len(objectives) == 1 and evaluations:
        sign = objectives[0].sign
        best = min(evaluations, key=lambda e: (sign * e.objectives[0], e.evaluation_index))
    return OptimizationResult(
        evaluations=evaluations,
        objectives=objectives,
        strategy=strategy,
        budget=budget,
        best=best,
        pareto=pareto_front(evaluations, objectives),
        correlations=correlation_table(evaluations, space, objectives),
    )


def correlation_table(evaluations, space, objectives):
    table = {}
    if len(evaluations) < 2:
        return table
    for name, dom in space.dimensions:
        if not dom.numeric:
            continue
        table[name] = {o.label: correlate(evaluations, name, o.label) for o in objectives}
    return table


# --------------------------------------------------------------------------
# reports


def _json_value(v):
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else format_decimal(v)
    return v


def write_optimization_report(result: OptimizationResult, out_dir) -> Path:
    """Write ``optimization.json`` and ``evaluations.csv`` into ``out_dir``."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    names = list(result.evaluations[0].point) if result.evaluations else []
    labels = [o.label for o in result.objectives]
    doc = {
        "strategy": result.strategy,
        "budget": result.budget,
        "budget_used": result.budget_used,
        "objectives": [
            {"metric": o.metric, "aggregator": o.aggregator, "direction": o.direction} for o in result.objectives
        ],
        "evaluations": [
            {
                "evaluation_index": e.evaluation_index,
                "point": {k: _json_value(v) for k, v in e.point.items()},
                "objectives": [_json_value(v) for v in e.objectives],
                "archive": e.archive,
            }
            for e in result.evaluations
        ],
        "pareto": [e.evaluation_index for e in result.pareto],
        "best": None if result.best is None else result.best.evaluation_index,
        "correlations": result.correlations,
    }
    (root / "optimization.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    with open(root / "evaluations.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["evaluation_index", *names, *labels])
        for e in result.evaluations:
            writer.writerow([e.evaluation_index, *(_render(_json_value(e.point[n])) for n in names),
                             *(format_decimal(v) if isinstance(v, Fraction) else v for v in e.objectives)])
    return root
