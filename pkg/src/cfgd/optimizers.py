"""Gradient descent and the CFGD variants (non-adaptive, adaptive terminal, adaptive order)."""
from __future__ import annotations

import io
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .caputo import FracParams, scaled_direction_closed_quadratic, scaled_direction_quadrature
from .errors import ConfigError, DegenerateDirection, DomainError, NonFiniteIterate
from .linalg import as_vector, extreme_singular_values
from .special import gauss_jacobi

# --- schedules -------------------------------------------------------------


@dataclass(frozen=True)
class GD:
    variant = "GD"


@dataclass(frozen=True)
class NA:
    params: FracParams
    c: np.ndarray
    variant = "NA"


@dataclass(frozen=True)
class AT:
    """Adaptive terminal: c_k = x^(k-L).

    ``history`` holds the L starting points oldest first, x^(-L), ..., x^(-1).
    """

    params: FracParams
    history: tuple
    variant = "AT"

    def __post_init__(self):
        if len(self.history) < 1:
            raise ConfigError("adaptive terminal needs a lag L >= 1")
        object.__setattr__(self, "history", tuple(as_vector(h).copy() for h in self.history))

    @property
    def L(self) -> int:
        return len(self.history)


@dataclass(frozen=True)
class AOStage:
    alpha: float
    beta: float
    iters: int

    @property
    def params(self) -> FracParams:
        return FracParams(self.alpha, self.beta)


@dataclass(frozen=True)
class AO:
    stages: tuple
    c: np.ndarray
    variant = "AO"

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        for st in self.stages:
            if st.iters < 1:
                raise ConfigError("every adaptive-order stage needs at least one iteration")
            if st.params.gamma < -1e-15:
                raise ConfigError(
                    f"adaptive-order stages need gamma >= 0, got {st.params.gamma} "
                    f"for alpha={st.alpha}, beta={st.beta}"
                )

    def stage_at(self, k: int) -> int:
        total = 0
        for i, st in enumerate(self.stages):
            total += st.iters
            if k < total:
                return i
        return len(self.stages) - 1

    @property
    def total_iters(self) -> int:
        return sum(st.iters for st in self.stages)


def ao_stages_from_gammas(gammas, alpha: float, iters: int):
    return [AOStage(alpha, g + (1.0 - alpha) / (2.0 - alpha), iters) for g in gammas]


# --- step size policies ----------------------------------------------------


@dataclass(frozen=True)
class Fixed:
    eta: float

    def __post_init__(self):
        if not self.eta > 0:
            raise ConfigError(f"fixed stepsize must be positive, got {self.eta}")


@dataclass(frozen=True)
class ScaledFixed:
    """eta / sigma_max(A + gamma diag(A)), recomputed whenever gamma changes."""

    eta: float = 1.0


@dataclass(frozen=True)
class ExactQuadratic:
    pass


LEARNING_RATE_GRID = tuple(t / 4 * 10.0 ** (-l) for l in range(1, 9) for t in (1, 2, 3, 4))


@dataclass(frozen=True)
class GridBest32:
    grid: tuple = LEARNING_RATE_GRID


def compute_stepsize(policy, obj, x, d, gamma: float = 0.0, _cache: dict | None = None) -> float:
    if isinstance(policy, Fixed):
        return policy.eta
    if isinstance(policy, ExactQuadratic):
        if not obj.is_quadratic:
            raise DomainError("exact line search needs a quadratic objective")
        Ad = obj.A @ d
        curv = float(d @ Ad)
        if not curv > 1e-300:
            raise DegenerateDirection(f"d^T A d = {curv:.3e}")
        return float((obj.A @ x + obj.b) @ d) / curv
    if isinstance(policy, GridBest32):
        best_eta, best_f = None, math.inf
        for eta in policy.grid:
            f = obj.value(x - eta * d)
            # ties go to the larger eta
            if f < best_f or (f == best_f and eta > best_eta):
                best_eta, best_f = eta, f
        return best_eta
    if isinstance(policy, ScaledFixed):
        if not obj.is_quadratic:
            raise DomainError("scaled fixed stepsize needs a quadratic objective")
        cache = {} if _cache is None else _cache
        if gamma not in cache:
            At = obj.A + gamma * np.diag(np.diag(obj.A))
            cache[gamma] = extreme_singular_values(At)[1]
        return policy.eta / cache[gamma]
    raise ConfigError(f"unknown stepsize policy {policy!r}")


# --- directions ------------------------------------------------------------


def direction(obj, x, c=None, params: FracParams | None = None, quad_points: int = 10) -> np.ndarray:
    """Integer gradient when params is None, else the scaled CFGD direction."""
    if params is None:
        return obj.gradient(x)
    if obj.is_quadratic:
        return scaled_direction_closed_quadratic(obj.A, obj.b, x, c, params)
    if hasattr(obj, "prepare_cache"):
        obj.prepare_cache(x)
    return scaled_direction_quadrature(obj, x, c, params, gauss_jacobi(quad_points, params.alpha))


def step_direction(schedule, obj, x, history=(), k: int = 0, quad_points: int = 10) -> np.ndarray:
    """Direction for iteration k.

    ``history`` lists past iterates oldest first and must end with x^(k-1);
    for AT its first L entries are the schedule's starting points.
    """
    if isinstance(schedule, GD):
        return direction(obj, x)
    if isinstance(schedule, NA):
        return direction(obj, x, schedule.c, schedule.params, quad_points)
    if isinstance(schedule, AT):
        if len(history) < schedule.L:
            raise ConfigError(f"adaptive terminal needs {schedule.L} past iterates, got {len(history)}")
        return direction(obj, x, history[-schedule.L], schedule.params, quad_points)
    if isinstance(schedule, AO):
        st = schedule.stages[schedule.stage_at(k)]
        return direction(obj, x, schedule.c, st.params, quad_points)
    raise ConfigError(f"unknown schedule {schedule!r}")


# --- traces ----------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v)) if not math.isfinite(v) else f"{v:.17g}"


@dataclass
class Trace:
    """Per-iteration record; row k describes x^(k) and the step taken from it."""

    iterates: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    stepsize: list = field(default_factory=list)
    columns: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.objective)

    @property
    def X(self) -> np.ndarray:
        return np.array(self.iterates)

    @property
    def iterations(self) -> int:
        return len(self) - 1

    def column(self, name) -> np.ndarray:
        return np.array(self.columns[name], dtype=float)

    def header(self) -> list[str]:
        return ["iter", "objective", "stepsize", *self.columns]

    def csv_text(self) -> str:
        buf = io.StringIO()
        names = list(self.columns)
        buf.write(",".join(self.header()) + "\n")
        for k in range(len(self)):
            eta = self.stepsize[k] if k < len(self.stepsize) else None
            row = [str(k), _fmt(self.objective[k]), _fmt(eta)]
            row += [_fmt(self.columns[n][k]) for n in names]
            buf.write(",".join(row) + "\n")
        return buf.getvalue()

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            f.write(self.csv_text())

    def metadata_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in sorted(self.metadata.items()))

    def write_metadata(self, path):
        with open(path, "w") as f:
            f.write(self.metadata_text())


# --- driver ----------------------------------------------------------------


def _schedule_meta(schedule) -> dict:
    meta = {"variant": schedule.variant}
    if isinstance(schedule, (NA, AT)):
        p = schedule.params
        meta.update(alpha=p.alpha, beta=p.beta, gamma=p.gamma)
    if isinstance(schedule, AT):
        meta["L"] = schedule.L
    if isinstance(schedule, AO):
        meta["stages"] = ";".join(f"{s.alpha}:{s.beta}:{s.iters}" for s in schedule.stages)
    return meta


def _gamma_at(schedule, k) -> float:
    if isinstance(schedule, (NA, AT)):
        return schedule.params.gamma
    if isinstance(schedule, AO):
        return schedule.stages[schedule.stage_at(k)].params.gamma
    return 0.0


def run(schedule, obj, policy, x0, max_iter: int, *, quad_points: int = 10,
        grad_tol: float | None = 1e-12, obj_tol: float | None = None,
        x_star=None, x_tik=None, dist_tol: float | None = None,
        keep_iterates: bool = True, seed=None) -> Trace:
    """Iterate x <- x - eta_k d_k and record a Trace.

    Stops at ``max_iter`` (for AO, at the end of the last stage if earlier),
    when ``||d||_inf <= grad_tol``, when ``f <= obj_tol``, or when
    ``||x - x_star|| <= dist_tol``. A numerically null direction under exact
    line search also ends the run.
    """
    x = as_vector(x0).copy()
    if x.size != obj.dim:
        raise ConfigError(f"x0 has dimension {x.size}, objective has {obj.dim}")
    if isinstance(schedule, AO):
        max_iter = min(max_iter, schedule.total_iters)
    if x_star is not None:
        x_star = as_vector(x_star)
    if x_tik is not None:
        x_tik = as_vector(x_tik)

    trace = Trace()
    trace.metadata.update(_schedule_meta(schedule))
    trace.metadata.update(obj.describe())
    trace.metadata["policy"] = type(policy).__name__
    if seed is not None:
        trace.metadata["seed"] = seed
    if x_star is not None:
        trace.columns["dist_to_x_star"] = []
    if x_tik is not None:
        trace.columns["dist_to_x_tik"] = []

    lag = schedule.L if isinstance(schedule, AT) else 0
    past = deque(schedule.history if lag else (), maxlen=max(lag, 1))
    sigma_cache: dict = {}

    def record(x):
        f = obj.value(x)
        if keep_iterates:
            trace.iterates.append(x.copy())
        trace.objective.append(f)
        if x_star is not None:
            trace.columns["dist_to_x_star"].append(float(np.linalg.norm(x - x_star)))
        if x_tik is not None:
            trace.columns["dist_to_x_tik"].append(float(np.linalg.norm(x - x_tik)))
        return f

    f = record(x)
    reason = "max_iter"
    for k in range(max_iter):
        if obj_tol is not None and f <= obj_tol:
            reason = "obj_tol"
            break
        if dist_tol is not None and trace.columns["dist_to_x_star"][-1] <= dist_tol:
            reason = "dist_tol"
            break
        d = step_direction(schedule, obj, x, past, k, quad_points)
        if grad_tol is not None and np.max(np.abs(d)) <= grad_tol:
            reason = "grad_tol"
            break
        try:
            eta = compute_stepsize(policy, obj, x, d, _gamma_at(schedule, k), sigma_cache)
        except DegenerateDirection:
            reason = "degenerate_direction"
            break
        x_new = x - eta * d
        if not np.all(np.isfinite(x_new)):
            trace.metadata["stop_reason"] = "non_finite"
            err = NonFiniteIterate(f"iterate became non-finite at iteration {k + 1}")
            err.trace = trace
            raise err
        trace.stepsize.append(eta)
        if lag:
            past.append(x)
        x = x_new
        f = record(x)
    trace.metadata["stop_reason"] = reason
    trace.metadata["iterations"] = trace.iterations
    trace.final = x
    return trace


def iterations_to(trace: Trace, column: str, tol: float) -> int | None:
    """First iteration whose ``column`` value is <= tol (None if never)."""
    vals = trace.objective if column == "objective" else trace.columns[column]
    for k, v in enumerate(vals):
        if v <= tol:
            return k
    return None


# --- neural network training -----------------------------------------------


def _grid_step(net, x, d_block, n_block, grid):
    """Best grid eta for the weight/bias blocks; ties go to the larger eta."""
    best_eta, best_f = None, math.inf
    for eta in grid:
        x_try = x.copy()
        x_try[:n_block] -= eta * d_block
        f = net.value(x_try)
        if f < best_f or (f == best_f and eta > best_eta):
            best_eta, best_f = eta, f
    return best_eta


def _exact_coefficient_step(net, x, d3):
    """Exact minimizer along -d3 of the loss, which is quadratic in the output coefficients."""
    Phi = net.features(x)
    a3 = x[2 * net.n:]
    r = Phi @ a3 - net.y
    q = Phi @ d3
    qq = float(q @ q)
    if not qq > 1e-300:
        return 0.0
    return float(r @ q) / qq


def run_nn_training(net, schedule, quad_points: int, iterations: int, x0, *,
                    test_z=None, test_y=None, seed=None, grid=LEARNING_RATE_GRID) -> Trace:
    """Train a TwoLayerTanhNet with GD or AT-CFGD using blockwise stepsizes.

    Each iteration computes the direction at x^(k), then moves the weights and
    biases by the best of the 32 grid stepsizes, then moves the output
    coefficients by the exact line-search step along their block of the
    direction (evaluated with the updated features).
    """
    if quad_points < 1:
        raise ConfigError("need at least one quadrature point")
    if not isinstance(schedule, (GD, AT)):
        raise ConfigError("network training supports GD and AT schedules")
    x = as_vector(x0).copy()
    n = net.n
    trace = Trace()
    trace.metadata.update(_schedule_meta(schedule))
    trace.metadata.update(net.describe())
    trace.metadata.update(quad_points=quad_points, policy="BlockwiseNN")
    if seed is not None:
        trace.metadata["seed"] = seed
    has_test = test_z is not None
    trace.columns["train_loss"] = []
    trace.columns["eta_coefficients"] = []
    if has_test:
        test_z = np.asarray(test_z, dtype=float)
        test_y = np.asarray(test_y, dtype=float)
        trace.columns["test_error"] = []
        trace.metadata["test_points"] = test_z.size

    lag = schedule.L if isinstance(schedule, AT) else 0
    past = deque(schedule.history if lag else (), maxlen=max(lag, 1))

    def record(x):
        f = net.value(x)
        trace.objective.append(f)
        trace.columns["train_loss"].append(f)
        if has_test:
            r = net.predict(x, test_z) - test_y
            trace.columns["test_error"].append(float(r @ r) / r.size)

    record(x)
    for k in range(iterations):
        if isinstance(schedule, GD):
            d = net.gradient(x)
        else:
            net.prepare_cache(x)
            d = scaled_direction_quadrature(net, x, past[-lag], schedule.params,
                                            gauss_jacobi(quad_points, schedule.params.alpha))
        eta12 = _grid_step(net, x, d[:2 * n], 2 * n, grid)
        x_new = x.copy()
        x_new[:2 * n] -= eta12 * d[:2 * n]
        eta3 = _exact_coefficient_step(net, x_new, d[2 * n:])
        x_new[2 * n:] -= eta3 * d[2 * n:]
        if not np.all(np.isfinite(x_new)):
            trace.metadata["stop_reason"] = "non_finite"
            err = NonFiniteIterate(f"iterate became non-finite at iteration {k + 1}")
            err.trace = trace
            raise err
        trace.stepsize.append(eta12)
        trace.columns["eta_coefficients"].append(eta3)
        if lag:
            past.append(x)
        x = x_new
        record(x)
    trace.columns["eta_coefficients"].append(None)
    trace.metadata["stop_reason"] = "max_iter"
    trace.metadata["iterations"] = trace.iterations
    trace.final = x
    return trace
