"""Problem generators and regression dataset loading.

Randomness comes from numpy's PCG64 generator. Each tensor of a problem gets
its own child stream spawned from the problem seed, so adding a draw to one
tensor never shifts the values of another.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, EmptyDataset, ParseError
from .objectives import LeastSquaresObjective, scalar_test

log = logging.getLogger(__name__)

STREAMS = ("W", "y", "x0", "history", "train", "test", "init")


def rng_streams(seed: int) -> dict:
    """Named independent generators derived from one 64-bit seed."""
    children = np.random.SeedSequence(int(seed)).spawn(len(STREAMS))
    return {name: np.random.Generator(np.random.PCG64(ss)) for name, ss in zip(STREAMS, children)}


@dataclass(frozen=True)
class RandomProblemSpec:
    d: int
    m: int
    seed: int
    kind: str = "gaussian"
    smax: float = 10.0
    smin: float = 0.1

    def __post_init__(self):
        if self.d < 1 or self.m < 1:
            raise ConfigError(f"need d, m >= 1, got d={self.d}, m={self.m}")
        if self.kind not in ("gaussian", "illcond"):
            raise ConfigError(f"unknown problem kind {self.kind!r}")


def _gaussian_parts(spec: RandomProblemSpec):
    rng = rng_streams(spec.seed)
    W = rng["W"].normal(0.0, 1.0 / np.sqrt(spec.m), size=(spec.d, spec.m))
    y = rng["y"].standard_normal(spec.m)
    return W, y


def gen_gaussian_lsq(spec: RandomProblemSpec) -> LeastSquaresObjective:
    """W with N(0, 1/m) entries and y ~ N(0, I_m)."""
    W, y = _gaussian_parts(spec)
    return LeastSquaresObjective(W, y)


def replace_extreme_singular_values(W0, smax: float, smin: float) -> np.ndarray:
    U, S, Vt = np.linalg.svd(W0, full_matrices=False)
    S = S.copy()
    S[0] = smax   # numpy returns singular values in descending order
    S[-1] = smin
    return (U * S) @ Vt


def gen_illcond(spec: RandomProblemSpec) -> LeastSquaresObjective:
    """Gaussian problem whose largest/smallest singular values are forced to (smax, smin)."""
    if spec.d > spec.m:
        raise ConfigError(f"ill-conditioned generator needs d <= m, got d={spec.d}, m={spec.m}")
    W0, y = _gaussian_parts(spec)
    return LeastSquaresObjective(replace_extreme_singular_values(W0, spec.smax, spec.smin), y)


def generate(spec: RandomProblemSpec) -> LeastSquaresObjective:
    return gen_illcond(spec) if spec.kind == "illcond" else gen_gaussian_lsq(spec)


# --- regression datasets -----------------------------------------------------


@dataclass
class RegressionDataset:
    """Examples in rows. After ``normalize`` features and targets are z-scored."""

    features: np.ndarray
    targets: np.ndarray
    mean: np.ndarray | None = None
    std: np.ndarray | None = None
    target_mean: float = 0.0
    target_std: float = 1.0
    constant_columns: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def n_examples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def normalized(self) -> "RegressionDataset":
        X = self.features
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        const = [int(j) for j in np.flatnonzero(std == 0.0)]
        warnings = list(self.warnings)
        if const:
            warnings.append(f"constant columns left unscaled: {const}")
            log.warning("constant columns left unscaled: %s", const)
            mean = mean.copy()
            std = std.copy()
            mean[const] = 0.0
            std[const] = 1.0
        tm = float(self.targets.mean())
        ts = float(self.targets.std())
        if ts == 0.0:
            warnings.append("constant target left unscaled")
            tm, ts = 0.0, 1.0
        return RegressionDataset((X - mean) / std, (self.targets - tm) / ts, mean, std, tm, ts,
                                 const, warnings)

    def denormalize(self, features=None, targets=None):
        if self.mean is None:
            raise DomainError("dataset has not been normalized")
        X = self.features if features is None else np.asarray(features, dtype=float)
        t = self.targets if targets is None else np.asarray(targets, dtype=float)
        return X * self.std + self.mean, t * self.target_std + self.target_mean

    def to_least_squares(self) -> LeastSquaresObjective:
        """Least squares in the package's layout: W is features x examples."""
        return LeastSquaresObjective(self.features.T.copy(), self.targets.copy())


def parse_libsvm(lines, n_features: int | None = None):
    labels, rows = [], []
    width = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            label = float(parts[0])
        except ValueError:
            raise ParseError(f"bad label {parts[0]!r}", lineno) from None
        entries = {}
        for tok in parts[1:]:
            idx, sep, val = tok.partition(":")
            if not sep:
                raise ParseError(f"expected index:value, got {tok!r}", lineno)
            try:
                i = int(idx)
                v = float(val)
            except ValueError:
                raise ParseError(f"bad feature {tok!r}", lineno) from None
            if i < 1:
                raise ParseError(f"feature indices are 1-based, got {i}", lineno)
            entries[i - 1] = v
        if entries:
            width = max(width, max(entries) + 1)
        labels.append(label)
        rows.append(entries)
    if not rows:
        raise EmptyDataset("no examples found")
    if n_features is not None:
        if width > n_features:
            raise ParseError(f"feature index {width} exceeds declared count {n_features}")
        width = n_features
    X = np.zeros((len(rows), width))
    for r, entries in enumerate(rows):
        for i, v in entries.items():
            X[r, i] = v
    return X, np.array(labels)


def parse_csv(lines, target_col: int = -1):
    reader = csv.reader(lines)
    data = []
    ncols = None
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            vals = [float(c) for c in row]
        except ValueError:
            if lineno == 1 and not data:
                continue  # header
            raise ParseError(f"non-numeric field in {row!r}", lineno) from None
        if ncols is None:
            ncols = len(vals)
        elif len(vals) != ncols:
            raise ParseError(f"expected {ncols} fields, got {len(vals)}", lineno)
        data.append(vals)
    if not data:
        raise EmptyDataset("no examples found")
    arr = np.array(data)
    if ncols < 2:
        raise ParseError("need at least one feature column and a target column")
    tc = target_col % ncols
    return np.delete(arr, tc, axis=1), arr[:, tc]


def load_regression(path, fmt: str = "libsvm", target_col: int = -1, n_features=None,
                    normalize: bool = True) -> RegressionDataset:
    with open(path) as f:
        lines = f.read().splitlines()
    if fmt == "libsvm":
        X, t = parse_libsvm(lines, n_features)
    elif fmt == "csv":
        X, t = parse_csv(lines, target_col)
    else:
        raise ConfigError(f"unknown dataset format {fmt!r}")
    ds = RegressionDataset(X, t)
    return ds.normalized() if normalize else ds


# --- function approximation -----------------------------------------------------


@dataclass(frozen=True)
class FunctionApproxTask:
    target: str = "h1"
    m: int = 100
    test_size: int = 10_000
    seed: int = 0


def _uniform_open(rng, size, exclude=1e-12):
    z = rng.uniform(-1.0, 1.0, size)
    bad = (np.abs(z) < exclude) | (z <= -1.0)
    while np.any(bad):
        z[bad] = rng.uniform(-1.0, 1.0, int(bad.sum()))
        bad = (np.abs(z) < exclude) | (z <= -1.0)
    return z


def gen_function_approx(task: FunctionApproxTask):
    """(z_train, y_train, z_test, y_test) drawn uniformly from (-1, 1), never at 0."""
    if task.target not in ("h1", "h2", "h3"):
        raise ConfigError(f"unknown target {task.target!r}")
    rng = rng_streams(task.seed)
    z = _uniform_open(rng["train"], task.m)
    zt = _uniform_open(rng["test"], task.test_size)
    return z, scalar_test(task.target, z), zt, scalar_test(task.target, zt)


def init_network(n: int, seed: int) -> np.ndarray:
    """Input weights and biases uniform on [-1, 1], output coefficients zero."""
    rng = rng_streams(seed)["init"]
    return np.concatenate([rng.uniform(-1.0, 1.0, 2 * n), np.zeros(n)])
