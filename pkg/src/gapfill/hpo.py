"""Surrogate-model hyperparameter optimization on a finite integer grid.

The six-dimensional architecture space is encoded as consecutive integers
per dimension and scaled to the unit cube for surrogate fitting. An initial
Latin-hypercube design seeds the surrogate (cubic RBF with a linear tail,
or a squared-exponential GP); each iteration then scores a cloud of
perturbation/random candidates by a weighted blend of predicted value and
distance to the evaluated set, and the next point to train is the score
minimizer. Point performance is the mean validation MSE over k seeded
training trials; diverged trials poison the point with +inf.
"""

from __future__ import annotations

import csv
import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DataError, SpaceExhausted, TrainingDiverged
from .mlp import MlpArchitecture, TrainConfig, train
from .series import (
    MultivariateSeries,
    build_lagged_table,
    reduce_lagged_table,
    split_train_val,
)

TRAIN_FRACTION = 0.85

#: Exploit/explore weights cycled over adaptive iterations.
SCORE_WEIGHTS = (0.3, 0.5, 0.8, 0.95)

N_PERTURBATION_CANDIDATES = 500
N_RANDOM_CANDIDATES = 500

#: Enumerating every unevaluated grid point is only attempted below this.
ENUMERABLE_SPACE = 200_000


@dataclass(frozen=True)
class HyperparameterSpace:
    """Ordered value lists for the six architecture dimensions."""

    batch_sizes: tuple[int, ...] = tuple(range(10, 201, 5))
    epoch_counts: tuple[int, ...] = tuple(range(50, 501, 50))
    layer_counts: tuple[int, ...] = tuple(range(1, 7))
    node_counts: tuple[int, ...] = tuple(range(5, 51, 5))
    dropout_rates: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
    lags: tuple[int, ...] = tuple(range(30, 366, 5))

    def __post_init__(self):
        for name, values in zip(self.dimension_names, self.dimensions):
            if len(values) == 0:
                raise ConfigError(f"dimension '{name}' is empty")
            if list(values) != sorted(set(values)):
                raise ConfigError(
                    f"dimension '{name}' must be sorted ascending without "
                    "duplicates"
                )

    @property
    def dimension_names(self) -> tuple[str, ...]:
        return ("batch_size", "epochs", "layers", "nodes", "dropout", "lag")

    @property
    def dimensions(self) -> tuple[tuple, ...]:
        return (
            self.batch_sizes,
            self.epoch_counts,
            self.layer_counts,
            self.node_counts,
            self.dropout_rates,
            self.lags,
        )

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(d) for d in self.dimensions)

    @property
    def size(self) -> int:
        out = 1
        for m in self.sizes:
            out *= m
        return out

    def encode(self, arch: MlpArchitecture) -> tuple[int, ...]:
        """Architecture -> per-dimension indices; raises if off-grid."""
        values = (
            arch.batch_size,
            arch.epochs,
            arch.layers,
            arch.nodes_per_layer,
            arch.dropout_rate,
            arch.lag,
        )
        point = []
        for name, dim, value in zip(self.dimension_names, self.dimensions, values):
            try:
                point.append(dim.index(value))
            except ValueError:
                raise ConfigError(
                    f"value {value!r} for '{name}' is not on the grid"
                ) from None
        return tuple(point)

    def decode(self, point) -> MlpArchitecture:
        point = tuple(int(i) for i in point)
        if len(point) != 6:
            raise ConfigError("encoded point must have 6 coordinates")
        for name, dim, idx in zip(self.dimension_names, self.dimensions, point):
            if not 0 <= idx < len(dim):
                raise ConfigError(f"index {idx} out of range for '{name}'")
        b, e, l, h, d, g = point
        return MlpArchitecture(
            batch_size=self.batch_sizes[b],
            epochs=self.epoch_counts[e],
            layers=self.layer_counts[l],
            nodes_per_layer=self.node_counts[h],
            dropout_rate=self.dropout_rates[d],
            lag=self.lags[g],
        )

    def scale(self, points) -> np.ndarray:
        """Integer indices -> [0,1]^6 so no dimension dominates distances."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        denom = np.array([max(m - 1, 1) for m in self.sizes], dtype=float)
        return pts / denom

    def all_points(self):
        return itertools.product(*(range(m) for m in self.sizes))


@dataclass(frozen=True)
class HpoConfig:
    """Budgets and surrogate choice for one optimization run."""

    n0: int = 10
    n: int = 50
    k: int = 5
    surrogate_kind: str = "rbf"
    seed: int = 0

    def __post_init__(self):
        if self.n0 < 8:
            raise ConfigError(
                "initial design must have at least 8 points (surrogate "
                "unisolvency in 6 dimensions)"
            )
        if self.n <= self.n0:
            raise ConfigError("total budget n must exceed the initial design n0")
        if self.k < 1:
            raise ConfigError("k (training trials per point) must be >= 1")
        if self.surrogate_kind not in ("rbf", "gp"):
            raise ConfigError(
                f"surrogate_kind must be 'rbf' or 'gp', got {self.surrogate_kind!r}"
            )


@dataclass(frozen=True)
class SurrogateState:
    """Evaluated design and a fitted interpolant over it.

    points live in the scaled unit cube; values keep any +inf failure
    flags, while fit_values are the clamped numbers the surrogate saw.
    """

    points: np.ndarray
    values: np.ndarray
    fit_values: np.ndarray
    iteration: int = 0

    def predict(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class RbfSurrogate(SurrogateState):
    """Cubic radial basis interpolant with a linear polynomial tail."""

    weights: np.ndarray = None
    tail: np.ndarray = None

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = _pairwise_distances(x, self.points)
        poly = self.tail[0] + x @ self.tail[1:]
        return (r**3) @ self.weights + poly


@dataclass(frozen=True)
class GpSurrogate(SurrogateState):
    """Zero-mean GP on standardized values, isotropic SE kernel."""

    lengthscale: float = 1.0
    signal_variance: float = 1.0
    nugget: float = 1e-8
    alpha: np.ndarray = None
    kernel_matrix: np.ndarray = None
    value_mean: float = 0.0
    value_std: float = 1.0

    def _cross_kernel(self, x: np.ndarray) -> np.ndarray:
        d2 = _pairwise_distances(np.atleast_2d(x), self.points) ** 2
        return self.signal_variance * np.exp(-d2 / (2.0 * self.lengthscale**2))

    def posterior(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and variance in standardized-value units."""
        ks = self._cross_kernel(x)
        mean = ks @ self.alpha
        solved = np.linalg.solve(self.kernel_matrix, ks.T)
        var = self.signal_variance + self.nugget - np.einsum("ij,ji->i", ks, solved)
        return mean, np.maximum(var, 0.0)

    def predict(self, x: np.ndarray) -> np.ndarray:
        mean, _ = self.posterior(x)
        return mean * self.value_std + self.value_mean


def _pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def _clamp_failures(values: np.ndarray) -> np.ndarray:
    """Replace +inf failure flags by the worst finite value before fitting."""
    values = np.asarray(values, dtype=float)
    finite = np.isfinite(values)
    if finite.sum() < 8:
        raise DataError(
            f"need at least 8 finite-valued points to fit a surrogate, "
            f"have {int(finite.sum())}"
        )
    if finite.all():
        return values
    return np.where(finite, values, values[finite].max())


def latin_hypercube(
    space: HyperparameterSpace, n0: int, seed: int
) -> list[tuple[int, ...]]:
    """n0 distinct encoded grid points from a Latin-hypercube draw.

    A continuous LHS sample in the unit cube is rounded to the nearest
    grid index per dimension; colliding duplicates are re-drawn, and any
    shortfall after bounded retries is filled from unused grid points.
    """
    if n0 < 1:
        raise ConfigError("n0 must be >= 1")
    if n0 > space.size:
        raise ConfigError(
            f"cannot draw {n0} distinct points from a grid of {space.size}"
        )
    rng = np.random.default_rng(seed)
    sizes = space.sizes
    chosen: dict[tuple[int, ...], None] = {}
    for _ in range(200):
        if len(chosen) >= n0:
            break
        u = np.empty((n0, 6))
        for j in range(6):
            u[:, j] = (rng.permutation(n0) + rng.random(n0)) / n0
        idx = np.rint(u * (np.array(sizes) - 1)).astype(int)
        for row in idx:
            chosen.setdefault(tuple(int(i) for i in row), None)
            if len(chosen) >= n0:
                break
    if len(chosen) < n0:
        for point in _unused_points(space, set(chosen), rng, n0 - len(chosen)):
            chosen.setdefault(point, None)
    return list(chosen)[:n0]


def _unused_points(space, evaluated: set, rng, count: int) -> list[tuple[int, ...]]:
    """Draw `count` distinct unevaluated grid points, uniformly at random."""
    remaining = space.size - len(evaluated)
    if remaining <= 0:
        raise SpaceExhausted("all grid points have been evaluated")
    if count > remaining:
        count = remaining
    if space.size <= ENUMERABLE_SPACE:
        pool = [p for p in space.all_points() if p not in evaluated]
        order = rng.permutation(len(pool))
        return [pool[i] for i in order[:count]]
    out: dict[tuple[int, ...], None] = {}
    sizes = space.sizes
    # Rejection sampling; the grid is vastly larger than any budget here.
    for _ in range(10_000 * count):
        point = tuple(int(rng.integers(0, m)) for m in sizes)
        if point not in evaluated:
            out.setdefault(point, None)
            if len(out) >= count:
                return list(out)
    raise SpaceExhausted("could not find unevaluated grid points")


def fit_rbf(points, values) -> RbfSurrogate:
    """Interpolate (points, values) with phi(r) = r^3 plus a linear tail.

    Solves the standard augmented symmetric system; coincident points are
    collapsed (first occurrence wins) if the system is singular.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    raw = np.asarray(values, dtype=float)
    if pts.shape[0] != raw.shape[0]:
        raise DataError("points/values lengths disagree")
    fit_values = _clamp_failures(raw)

    def solve(p, v):
        n, d = p.shape
        r = _pairwise_distances(p, p)
        a = np.zeros((n + d + 1, n + d + 1))
        a[:n, :n] = r**3
        a[:n, n] = 1.0
        a[:n, n + 1 :] = p
        a[n, :n] = 1.0
        a[n + 1 :, :n] = p.T
        rhs = np.concatenate([v, np.zeros(d + 1)])
        coef = np.linalg.solve(a, rhs)
        return coef[:n], coef[n:]

    try:
        weights, tail = solve(pts, fit_values)
    except np.linalg.LinAlgError:
        _, unique_idx = np.unique(pts, axis=0, return_index=True)
        unique_idx = np.sort(unique_idx)
        if len(unique_idx) == len(pts):
            raise DataError("singular interpolation system") from None
        if len(unique_idx) < pts.shape[1] + 2:
            raise DataError(
                "too few distinct points after removing duplicates"
            ) from None
        try:
            weights_u, tail = solve(pts[unique_idx], fit_values[unique_idx])
        except np.linalg.LinAlgError:
            raise DataError("singular interpolation system") from None
        return RbfSurrogate(
            points=pts[unique_idx],
            values=raw[unique_idx],
            fit_values=fit_values[unique_idx],
            weights=weights_u,
            tail=tail,
        )
    return RbfSurrogate(
        points=pts, values=raw, fit_values=fit_values, weights=weights, tail=tail
    )


#: Log-spaced MLE search grid for the GP kernel, chosen for unit-cube inputs
#: and standardized values.
GP_LENGTHSCALE_GRID = tuple(np.logspace(-1.5, 0.7, 12))
GP_SIGNAL_GRID = tuple(np.logspace(-1.0, 1.0, 9))
GP_NUGGET = 1e-8
GP_NUGGET_CEILING = 1e-2


def fit_gp(points, values) -> GpSurrogate:
    """Fit a zero-mean GP after standardizing values.

    Kernel hyperparameters (isotropic lengthscale, signal variance)
    maximize the log marginal likelihood over a fixed logarithmic grid.
    The nugget starts at 1e-8 and is escalated by decades only if the
    Cholesky factorization fails, up to 1e-2.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    raw = np.asarray(values, dtype=float)
    if pts.shape[0] != raw.shape[0]:
        raise DataError("points/values lengths disagree")
    fit_values = _clamp_failures(raw)
    mean = float(np.mean(fit_values))
    std = float(np.std(fit_values))
    if std == 0.0:
        std = 1.0
    y = (fit_values - mean) / std
    d2 = _pairwise_distances(pts, pts) ** 2
    n = len(pts)

    best = None
    nugget = GP_NUGGET
    while nugget <= GP_NUGGET_CEILING:
        for ls in GP_LENGTHSCALE_GRID:
            corr = np.exp(-d2 / (2.0 * ls**2))
            for sv in GP_SIGNAL_GRID:
                k = sv * corr + nugget * np.eye(n)
                try:
                    chol = np.linalg.cholesky(k)
                except np.linalg.LinAlgError:
                    continue
                alpha = np.linalg.solve(k, y)
                log_det = 2.0 * np.sum(np.log(np.diag(chol)))
                lml = -0.5 * (y @ alpha) - 0.5 * log_det - 0.5 * n * np.log(2 * np.pi)
                if best is None or lml > best[0]:
                    best = (lml, ls, sv, nugget, alpha, k)
        if best is not None:
            break
        nugget *= 10.0
    if best is None:
        raise DataError(
            "GP covariance factorization failed for every kernel setting"
        )
    _, ls, sv, nugget, alpha, k = best
    return GpSurrogate(
        points=pts,
        values=raw,
        fit_values=fit_values,
        lengthscale=float(ls),
        signal_variance=float(sv),
        nugget=float(nugget),
        alpha=alpha,
        kernel_matrix=k,
        value_mean=mean,
        value_std=std,
    )


def fit_surrogate(kind: str, points, values) -> SurrogateState:
    return fit_rbf(points, values) if kind == "rbf" else fit_gp(points, values)


def _minmax(x: np.ndarray) -> np.ndarray:
    lo, hi = float(np.min(x)), float(np.max(x))
    if hi == lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def _incumbent(encoded: list[tuple[int, ...]], values: np.ndarray) -> tuple[int, ...]:
    best = np.min(values)
    contenders = [p for p, v in zip(encoded, values) if v == best]
    return min(contenders)


def propose_next(
    state: SurrogateState,
    space: HyperparameterSpace,
    iteration: int,
    seed: int,
) -> tuple[int, ...]:
    """Pick the next grid point to evaluate.

    Candidates are 500 coordinate perturbations of the incumbent best
    (each coordinate moved +-{1,2,3} steps with probability 0.5) plus 500
    uniform grid points, minus anything already evaluated. Each candidate
    is scored w * surrogate-value + (1-w) * negative-distance-to-design,
    both min-max scaled over the candidate set, with w cycling through
    SCORE_WEIGHTS by iteration; the minimizer wins, ties broken by lowest
    lexicographic encoding.
    """
    rng = np.random.default_rng(seed)
    sizes = np.array(space.sizes)
    denom = np.maximum(sizes - 1, 1).astype(float)
    encoded = [
        tuple(int(i) for i in np.rint(row * denom)) for row in state.points
    ]
    evaluated = set(encoded)
    incumbent = np.array(_incumbent(encoded, state.fit_values))

    perturbed = np.tile(incumbent, (N_PERTURBATION_CANDIDATES, 1))
    move = rng.random(perturbed.shape) < 0.5
    steps = rng.choice((-3, -2, -1, 1, 2, 3), size=perturbed.shape)
    perturbed = np.clip(perturbed + move * steps, 0, sizes - 1)
    uniform = np.column_stack(
        [rng.integers(0, m, N_RANDOM_CANDIDATES) for m in sizes]
    )
    pool: dict[tuple[int, ...], None] = {}
    for row in np.vstack([perturbed, uniform]):
        point = tuple(int(i) for i in row)
        if point not in evaluated:
            pool.setdefault(point, None)
    if not pool:
        unused = _unused_points(space, evaluated, rng, 1)
        return unused[0]

    candidates = list(pool)
    scaled = space.scale(np.array(candidates, dtype=float))
    predictions = state.predict(scaled)
    min_dist = _pairwise_distances(scaled, state.points).min(axis=1)
    w = SCORE_WEIGHTS[iteration % len(SCORE_WEIGHTS)]
    scores = w * _minmax(predictions) + (1.0 - w) * _minmax(-min_dist)
    best = scores.min()
    return min(c for c, s in zip(candidates, scores) if s == best)


@dataclass(frozen=True)
class PointEvaluation:
    """One history record: an evaluated point and how it performed."""

    point: tuple[int, ...]
    architecture: MlpArchitecture
    trial_mses: tuple[float, ...]
    performance: float
    seconds: float
    note: str = ""


def evaluate_point(
    arch: MlpArchitecture,
    series: MultivariateSeries,
    config: HpoConfig,
    train_config: TrainConfig | None = None,
    jobs: int = 1,
) -> float:
    """Mean validation MSE of k seeded trainings of one architecture."""
    return _evaluate_architecture(arch, series, config, train_config, jobs).performance


def _evaluate_architecture(
    arch: MlpArchitecture,
    series: MultivariateSeries,
    config: HpoConfig,
    train_config: TrainConfig | None = None,
    jobs: int = 1,
    point: tuple[int, ...] = (),
) -> PointEvaluation:
    start = time.perf_counter()
    base = train_config or TrainConfig()

    def fail(note: str) -> PointEvaluation:
        return PointEvaluation(
            point=point,
            architecture=arch,
            trial_mses=(float("inf"),) * config.k,
            performance=float("inf"),
            seconds=time.perf_counter() - start,
            note=note,
        )

    try:
        reduced = reduce_lagged_table(build_lagged_table(series, arch.lag))
        table_train, table_val = split_train_val(reduced, TRAIN_FRACTION)
    except DataError as exc:
        return fail(str(exc))

    def run_trial(index: int) -> float:
        cfg = replace(base, seed=config.seed ^ index)
        try:
            _, val_mse = train(table_train, table_val, arch, cfg)
            return val_mse
        except TrainingDiverged:
            return float("inf")

    if jobs > 1 and config.k > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            trial_mses = tuple(pool.map(run_trial, range(config.k)))
    else:
        trial_mses = tuple(run_trial(i) for i in range(config.k))
    performance = float(np.mean(trial_mses))
    note = "training diverged" if not np.isfinite(performance) else ""
    return PointEvaluation(
        point=point,
        architecture=arch,
        trial_mses=trial_mses,
        performance=performance,
        seconds=time.perf_counter() - start,
        note=note,
    )


def optimize(
    series: MultivariateSeries | None,
    space: HyperparameterSpace,
    config: HpoConfig,
    train_config: TrainConfig | None = None,
    objective=None,
    jobs: int = 1,
) -> tuple[MlpArchitecture, list[PointEvaluation]]:
    """Run the full adaptive loop and return (best architecture, history).

    The default objective trains MLPs on `series` (expected to be scaled
    already); passing `objective(point, arch) -> float` replaces it, which
    keeps the loop testable against closed-form functions. A failed point
    (performance +inf, surrogate hiccup) never aborts the run.
    """
    if objective is None and series is None:
        raise ConfigError("either a series or an explicit objective is required")

    def measure(point: tuple[int, ...]) -> PointEvaluation:
        arch = space.decode(point)
        if objective is not None:
            start = time.perf_counter()
            value = float(objective(point, arch))
            return PointEvaluation(
                point=point,
                architecture=arch,
                trial_mses=(value,),
                performance=value,
                seconds=time.perf_counter() - start,
            )
        return _evaluate_architecture(
            arch, series, config, train_config, jobs, point=point
        )

    history: list[PointEvaluation] = []
    evaluated: set[tuple[int, ...]] = set()
    for point in latin_hypercube(space, min(config.n0, config.n), config.seed):
        history.append(measure(point))
        evaluated.add(point)

    iteration = 0
    while len(history) < config.n:
        proposal_seed = np.random.SeedSequence(
            (config.seed, iteration)
        ).generate_state(1)[0]
        try:
            encoded = np.array([rec.point for rec in history], dtype=float)
            state = fit_surrogate(
                config.surrogate_kind,
                space.scale(encoded),
                np.array([rec.performance for rec in history]),
            )
            state = replace(state, iteration=iteration)
            point = propose_next(state, space, iteration, proposal_seed)
        except SpaceExhausted:
            break
        except DataError:
            # Surrogate fit failed (degenerate history); fall back to a
            # uniform unevaluated point so the budget is still spent.
            rng = np.random.default_rng(proposal_seed)
            try:
                point = _unused_points(space, evaluated, rng, 1)[0]
            except SpaceExhausted:
                break
        history.append(measure(point))
        evaluated.add(point)
        iteration += 1

    best_index = int(np.argmin([rec.performance for rec in history]))
    return history[best_index].architecture, history


def write_history_csv(history: list[PointEvaluation], path) -> None:
    """Dump the evaluation history: one row per tried hyperparameter set."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [
                "iteration",
                "batch_size",
                "epochs",
                "layers",
                "nodes",
                "dropout",
                "lag",
                "trial_mses",
                "mean_mse",
                "seconds",
            ]
        )
        for i, rec in enumerate(history):
            arch = rec.architecture
            writer.writerow(
                [
                    i,
                    arch.batch_size,
                    arch.epochs,
                    arch.layers,
                    arch.nodes_per_layer,
                    repr(arch.dropout_rate),
                    arch.lag,
                    ";".join(repr(v) for v in rec.trial_mses),
                    repr(rec.performance),
                    f"{rec.seconds:.3f}",
                ]
            )
