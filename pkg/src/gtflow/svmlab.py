"""Distributed-SVM experiment layer.

Synthetic two-class data on [-1, 1]^2 split by a radius threshold: not
linearly separable in the plane, linearly separable after the quadratic
feature map phi(c) = [c1^2, c2^2, sqrt(2) c1 c2] (whose Gram matrix is the
squared polynomial kernel). Data shards go to agents, each holding a
smoothed-hinge cost; the engine drives them to a common classifier that is
compared against a centralized gradient-descent baseline.

The per-agent cost counts the quadratic regularizer once per agent, so the
stacked consensus objective carries it n times. The default 'matched'
comparison therefore scales the centralized baseline's regularizer by n
(both sides then minimize the identical function); 'literal' keeps the
single-count centralized objective and comparisons should then be read as
decision-boundary comparisons only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cost import SvmHingeCost, sum_gradient
from .engine import SolverConfig, Trace, integrate

__all__ = [
    "LabeledDataset",
    "Partition",
    "Classifier",
    "feature_map",
    "generate_ellipse_data",
    "partition",
    "centralized_oracle",
    "evaluate",
    "dsvm_experiment",
    "dataset_to_csv",
    "dataset_from_csv",
]


@dataclass(frozen=True)
class LabeledDataset:
    """Planar points with +/-1 labels and their generation metadata."""

    points: np.ndarray  # (N, 2)
    labels: np.ndarray  # (N,), values in {-1, +1}
    seed: int | None = None
    radius: float | None = None
    margin_gap: float | None = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        labs = np.asarray(self.labels, dtype=float).ravel()
        if pts.shape[0] != labs.size or pts.shape[1] != 2:
            raise ValueError("points must be (N, 2) with one label each")
        if not np.all(np.isin(labs, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if not (np.any(labs > 0) and np.any(labs < 0)):
            raise ValueError("both classes must be non-empty")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", labs)

    @property
    def count(self) -> int:
        return self.labels.size


def feature_map(points: np.ndarray) -> np.ndarray:
    """phi(c) = [c1^2, c2^2, sqrt(2) c1 c2]; phi(a).phi(b) = (a.b)^2."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    c1, c2 = pts[:, 0], pts[:, 1]
    return np.stack([c1 ** 2, c2 ** 2, np.sqrt(2.0) * c1 * c2], axis=1)


def generate_ellipse_data(
    n_points: int,
    seed: int,
    radius: float = 0.6,
    margin_gap: float = 0.05,
    resample_budget: int = 1000,
) -> LabeledDataset:
    """Uniform points on [-1, 1]^2 labeled by distance from the origin.

    Label +1 outside ``radius``, -1 on or inside (ties go negative). Points
    within ``margin_gap`` of the radius are resampled so the classes are
    separable in feature space with positive margin whenever the gap is
    positive.
    """
    if n_points < 2:
        raise ValueError("need at least 2 points")
    if not (0 < radius < 1):
        raise ValueError("radius must lie in (0, 1)")
    if margin_gap < 0:
        raise ValueError("margin_gap must be non-negative")
    rng = np.random.default_rng(seed)
    pts = np.empty((n_points, 2))
    labs = np.empty(n_points)
    filled = 0
    attempts_left = resample_budget * n_points
    while filled < n_points:
        if attempts_left <= 0:
            raise ValueError(
                f"resampling budget exhausted: margin_gap={margin_gap} leaves too "
                "little admissible area"
            )
        p = rng.uniform(-1.0, 1.0, size=2)
        attempts_left -= 1
        dist = float(np.hypot(p[0], p[1]))
        if abs(dist - radius) < margin_gap:
            continue
        pts[filled] = p
        labs[filled] = 1.0 if dist > radius else -1.0
        filled += 1
    return LabeledDataset(pts, labs, seed=seed, radius=radius, margin_gap=margin_gap)


@dataclass(frozen=True)
class Partition:
    """Disjoint exhaustive assignment of point indices to agents."""

    agents: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        flat = [i for grp in self.agents for i in grp]
        if len(flat) != len(set(flat)):
            raise ValueError("partition groups overlap")

    @property
    def counts(self) -> list[int]:
        return [len(g) for g in self.agents]


def partition(
    data: LabeledDataset, n_agents: int, mode: str = "stratified", seed: int = 0
) -> Partition:
    """Split a dataset across agents.

    'stratified' deals each label class round-robin after a seeded shuffle,
    so per-agent label proportions stay within one point of the global ones.
    'contiguous' hands out raw index blocks; with label-sorted data that
    produces single-label shards, the degenerate-curvature stress case.
    """
    if n_agents < 1 or n_agents > data.count:
        raise ValueError("need 1 <= n_agents <= point count")
    groups: list[list[int]] = [[] for _ in range(n_agents)]
    if mode == "stratified":
        rng = np.random.default_rng(seed)
        order = []
        for label in (1.0, -1.0):
            idx = np.flatnonzero(data.labels == label)
            rng.shuffle(idx)
            order.extend(int(i) for i in idx)
        for pos, point_idx in enumerate(order):
            groups[pos % n_agents].append(point_idx)
    elif mode == "contiguous":
        bounds = np.linspace(0, data.count, n_agents + 1).astype(int)
        for a in range(n_agents):
            groups[a] = list(range(bounds[a], bounds[a + 1]))
    else:
        raise ValueError(f"unknown partition mode {mode!r}")
    return Partition(tuple(tuple(g) for g in groups))


@dataclass(frozen=True)
class Classifier:
    """Hyperplane sgn(omega . phi(c) - nu) in feature space."""

    omega: np.ndarray
    nu: float

    def __post_init__(self):
        object.__setattr__(self, "omega", np.asarray(self.omega, dtype=float).ravel())

    @property
    def degenerate(self) -> bool:
        return bool(np.all(self.omega == 0))

    @property
    def stacked(self) -> np.ndarray:
        return np.concatenate([self.omega, [self.nu]])

    def decision_values(self, points: np.ndarray) -> np.ndarray:
        return feature_map(points) @ self.omega - self.nu

    def to_text(self, **metadata) -> str:
        lines = [f"omega_{i}: {format(v, '.17g')}" for i, v in enumerate(self.omega)]
        lines.append(f"nu: {format(self.nu, '.17g')}")
        lines += [f"{k}: {v}" for k, v in metadata.items()]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class OracleResult:
    classifier: Classifier
    objective: float
    gradient_norm: float
    iterations: int


def centralized_oracle(
    data: LabeledDataset,
    C: float = 1.0,
    mu: float = 2.0,
    eps_nu: float = 1e-6,
    tol: float = 1e-6,
    regularizer_scale: float = 1.0,
    max_iter: int = 200000,
    x0: np.ndarray | None = None,
) -> OracleResult:
    """Centralized baseline via gradient descent with backtracking.

    Minimizes  regularizer_scale * (w.w + eps_nu nu^2) + C * sum_j L(z_j, mu)
    to gradient norm ``tol``. ``regularizer_scale=n`` is the matched mode
    (identical objective to the n-agent consensus problem); 1 is the literal
    single-count objective. Armijo constant 1e-4, shrink factor 0.5, with the
    accepted step carried (doubled) into the next iteration.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if regularizer_scale <= 0:
        raise ValueError("regularizer_scale must be positive")
    # same minimizer: scale the hinge term down instead of the regularizer up
    cost = SvmHingeCost(feature_map(data.points), data.labels,
                        C=C / regularizer_scale, mu=mu, eps_nu=eps_nu)
    x = np.zeros(cost.m) if x0 is None else np.asarray(x0, dtype=float).copy()
    step = 1.0
    value = cost.value(x)
    for it in range(max_iter):
        grad = cost.gradient(x)
        gn_sq = float(grad @ grad)
        if np.sqrt(gn_sq) <= tol:
            return OracleResult(Classifier(x[:-1], float(x[-1])),
                                regularizer_scale * value, np.sqrt(gn_sq), it)
        step = min(step * 2.0, 1e8)
        while True:
            candidate = x - step * grad
            cand_value = cost.value(candidate)
            if cand_value <= value - 1e-4 * step * gn_sq:
                break
            step *= 0.5
            if step < 1e-18:
                raise RuntimeError(
                    f"line search stalled at gradient norm {np.sqrt(gn_sq):.3g} "
                    f"(tol {tol:.3g} unreachable in float arithmetic)"
                )
        x, value = candidate, cand_value
    raise RuntimeError(f"iteration cap {max_iter} reached before gradient norm {tol}")


def evaluate(clf: Classifier, data: LabeledDataset) -> tuple[float, dict[str, int]]:
    """Training accuracy under the tie-is-wrong rule, plus confusion counts."""
    values = clf.decision_values(data.points)
    predicted = np.sign(values)
    correct = predicted == data.labels
    confusion = {
        "true_positive": int(np.sum(correct & (data.labels > 0))),
        "true_negative": int(np.sum(correct & (data.labels < 0))),
        "false_positive": int(np.sum(~correct & (data.labels < 0))),
        "false_negative": int(np.sum(~correct & (data.labels > 0))),
        "ties": int(np.sum(predicted == 0)),
    }
    return float(np.mean(correct)), confusion


@dataclass
class DsvmReport:
    """Outcome of one distributed run against the centralized baseline."""

    trace: Trace
    agent_classifiers: list[Classifier]
    consensus: Classifier
    consensus_spread: float
    oracle: OracleResult
    distance_to_oracle: float
    consensus_accuracy: float
    oracle_accuracy: float
    final_grad_sum_norm: float
    status: str

    def summary_lines(self) -> list[str]:
        out = [
            f"status: {self.status}",
            f"consensus_spread: {self.consensus_spread!r}",
            f"distance_to_oracle: {self.distance_to_oracle!r}",
            f"consensus_accuracy: {self.consensus_accuracy!r}",
            f"oracle_accuracy: {self.oracle_accuracy!r}",
            f"final_grad_sum_norm: {self.final_grad_sum_norm!r}",
            f"oracle_objective: {self.oracle.objective!r}",
        ]
        for i, clf in enumerate(self.agent_classifiers):
            vals = " ".join(format(v, ".17g") for v in clf.stacked)
            out.append(f"agent_{i}_final: {vals}")
        return out


def dsvm_experiment(
    data: LabeledDataset,
    part: Partition,
    solver: SolverConfig,
    C: float = 1.0,
    mu: float = 2.0,
    eps_nu: float = 1e-6,
    regularizer_mode: str = "matched",
    oracle_tol: float = 1e-6,
    x0: np.ndarray | None = None,
    x0_seed: int = 0,
) -> DsvmReport:
    """Build per-agent costs, integrate, and compare against the baseline.

    The consensus classifier is the network mean of the agents' final
    states; the spread is the max distance of any agent from that mean. The
    default initial state draws every component uniformly from [0, 1].
    """
    if regularizer_mode not in ("matched", "literal"):
        raise ValueError(f"unknown regularizer mode {regularizer_mode!r}")
    n = len(part.agents)
    feats = feature_map(data.points)
    costs = [
        SvmHingeCost(feats[list(idx)], data.labels[list(idx)], C=C, mu=mu, eps_nu=eps_nu)
        for idx in part.agents
    ]
    m = feats.shape[1] + 1
    if x0 is None:
        x0 = np.random.default_rng(x0_seed).uniform(0.0, 1.0, size=(n, m))

    scale = float(n) if regularizer_mode == "matched" else 1.0
    oracle = centralized_oracle(data, C=C, mu=mu, eps_nu=eps_nu, tol=oracle_tol,
                                regularizer_scale=scale)
    reference = np.tile(oracle.classifier.stacked, (n, 1))

    trace = integrate(costs, x0, solver, reference=reference)

    agent_clfs = [Classifier(trace.final_x[i, :-1], float(trace.final_x[i, -1]))
                  for i in range(n)]
    mean_state = trace.final_x.mean(axis=0)
    consensus = Classifier(mean_state[:-1], float(mean_state[-1]))
    spread = float(np.max(np.abs(trace.final_x - mean_state)))
    distance = float(np.max(np.abs(consensus.stacked - oracle.classifier.stacked)))
    consensus_acc, _ = evaluate(consensus, data)
    oracle_acc, _ = evaluate(oracle.classifier, data)
    final_gn = float(np.linalg.norm(sum_gradient(costs, trace.final_x)))

    return DsvmReport(
        trace=trace,
        agent_classifiers=agent_clfs,
        consensus=consensus,
        consensus_spread=spread,
        oracle=oracle,
        distance_to_oracle=distance,
        consensus_accuracy=consensus_acc,
        oracle_accuracy=oracle_acc,
        final_grad_sum_norm=final_gn,
        status=trace.status,
    )


def dataset_to_csv(data: LabeledDataset) -> str:
    lines = ["chi1,chi2,label"]
    for p, l in zip(data.points, data.labels):
        lines.append(f"{format(p[0], '.17g')},{format(p[1], '.17g')},{int(l)}")
    return "\n".join(lines) + "\n"


def dataset_from_csv(text: str) -> LabeledDataset:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip().lower() != "chi1,chi2,label":
        raise ValueError("dataset CSV must start with header 'chi1,chi2,label'")
    pts, labs = [], []
    for ln in lines[1:]:
        a, b, l = ln.split(",")
        pts.append((float(a), float(b)))
        labs.append(float(l))
    return LabeledDataset(np.array(pts), np.array(labs))
