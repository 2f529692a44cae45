"""Soft-margin SVMs trained by SMO, and their three-zone OAA / OAO combinations.

The binary solver works on the dual

    max  sum(a) - 1/2 a'Qa,   Q_ij = y_i y_j K(x_i, x_j),   0 <= a <= C,  y'a = 0

and at each step picks i by maximal violation and its partner j by the
largest second-order gain, then moves the pair along the direction that keeps
y'a fixed. It stops when the violation m(a) - M(a) drops below tol,
which bounds every KKT residual of the returned model by tol.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from .errors import ConfigError, ConvergenceError, DataError

ZONES = (1, 2, 3)
PAIRS = ((1, 2), (1, 3), (2, 3))

# vote bit order: classifiers (1,2), (1,3), (2,3); bit 1 = lower-index class wins
_PATTERNS = ((1, 1, 0), (1, 1, 1), (1, 0, 0), (1, 0, 1), (0, 1, 0), (0, 1, 1), (0, 0, 1), (0, 0, 0))
VOTING_TABLES = {
    "V": dict(zip(_PATTERNS, (1, 1, 3, 0, 0, 2, 2, 3))),
    "VI": dict(zip(_PATTERNS, (1, 1, 3, 3, 2, 2, 2, 3))),
    "IX": dict(zip(_PATTERNS, (1, 1, 3, 2, 3, 2, 2, 3))),
}

ANCHOR_C = (10.0, 1e4, 21096.0, 1e5, 1.08e6)
ANCHOR_G = (8.3, 10.4, 12.1, 13.1, 14.5, 15.3, 15.4, 20.0, 21.3, 38.4)
# the published optima alone are too narrow for unit-current-scaled features
EXTRA_C = (100.0, 1000.0)
EXTRA_G = (0.003, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0)


# kernels ----------------------------------------------------------------------

def rbf_kernel(x, y, g):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ConfigError("kernel arguments differ in length")
    if g <= 0:
        raise ConfigError("RBF width g must be positive")
    d = x - y
    return float(np.exp(-g * np.dot(d, d)))


def gram(X, Y, kernel="rbf", g=1.0):
    """Kernel matrix between the rows of X and Y."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if kernel == "linear":
        return X @ Y.T
    if kernel != "rbf":
        raise ConfigError(f"unknown kernel {kernel!r}")
    sq = (X * X).sum(1)[:, None] + (Y * Y).sum(1)[None, :] - 2.0 * X @ Y.T
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-g * sq)


# binary SVM -------------------------------------------------------------------

@dataclass
class BinarySvmModel:
    support_vectors: np.ndarray
    coefficients: np.ndarray  # alpha_i * y_i
    bias: float
    kernel: str = "rbf"
    g: float = 1.0
    c: float = 1.0
    iterations: int = 0

    def decision(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        if len(self.coefficients) == 0:
            f = np.full(1 if single else len(X), self.bias)
        else:
            f = gram(X, self.support_vectors, self.kernel, self.g) @ self.coefficients + self.bias
        return float(f[0]) if single else f

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel,
            "g": self.g,
            "c": self.c,
            "bias": self.bias,
            "coefficients": self.coefficients.tolist(),
            "support_vectors": self.support_vectors.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "BinarySvmModel":
        sv = np.array(d["support_vectors"], dtype=float)
        coef = np.array(d["coefficients"], dtype=float)
        if sv.ndim != 2:
            sv = sv.reshape(len(coef), -1)
        return cls(sv, coef, float(d["bias"]), d["kernel"], float(d["g"]), float(d["c"]))


def decision(model: BinarySvmModel, x):
    return model.decision(x)


def dual_objective(alpha, y, K):
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


def smo_solve(K, y, C, tol=1e-3, max_iter=None, trace=None):
    """SMO on a precomputed kernel matrix. Returns (alpha, bias, iterations).

    trace, if a list, receives the dual objective after every pair update.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    if C <= 0:
        raise ConfigError("C must be positive")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise DataError("both classes must be present")
    if max_iter is None:
        max_iter = max(200_000, 500 * n)
    alpha = np.zeros(n)
    # F_t = -y_t * grad_t of 1/2 a'Qa - sum(a); y_t f(x_t) - 1 = y_t (b - F_t)
    F = y.copy()
    diag = np.diag(K).copy()
    pos = y > 0
    it = 0
    while True:
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        fu = np.where(up, F, -np.inf)
        fl = np.where(low, F, np.inf)
        i = int(np.argmax(fu))
        m, M = fu[i], fl.min()
        if m - M < tol:
            break
        if it >= max_iter:
            raise ConvergenceError(
                f"SMO did not converge in {max_iter} iterations "
                f"(violation {m - M:.3g}, tol {tol:.3g}, n={n}, C={C:.4g})"
            )
        # partner: largest second-order gain among violators of i
        ki = K[i]
        b = m - fl
        a = np.maximum(diag[i] + diag - 2.0 * ki, 1e-12)
        gain = np.where(b > 0, b * b / a, -np.inf)
        j = int(np.argmax(gain))
        M = fl[j]
        eta = diag[i] + diag[j] - 2.0 * K[i, j]
        t = (m - M) / max(eta, 1e-12)
        room_i = C - alpha[i] if y[i] > 0 else alpha[i]
        room_j = alpha[j] if y[j] > 0 else C - alpha[j]
        t = min(t, room_i, room_j)
        # land exactly on a bound when one is hit
        alpha[i] = (C if y[i] > 0 else 0.0) if t == room_i else alpha[i] + y[i] * t
        alpha[j] = (0.0 if y[j] > 0 else C) if t == room_j else alpha[j] - y[j] * t
        F -= t * (K[:, i] - K[:, j])
        it += 1
        if trace is not None:
            trace.append(dual_objective(alpha, y, K))
    free = (alpha > 0) & (alpha < C)
    bias = float(F[free].mean()) if np.any(free) else float(0.5 * (m + fl.min()))
    if np.any(free):
        # remove rounding drift of y'a; the shift is far below tol
        alpha[free] -= y[free] * (alpha @ y) / free.sum()
        np.clip(alpha, 0.0, C, out=alpha)
    return alpha, bias, it


def smo_train(X, y, C, g=1.0, tol=1e-3, kernel="rbf", max_iter=None, trace=None) -> BinarySvmModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise DataError("X must be 2-D with one row per label")
    if not set(np.unique(y)) <= {-1.0, 1.0}:
        raise DataError("labels must be +1 / -1")
    K = gram(X, X, kernel, g)
    alpha, bias, it = smo_solve(K, y, C, tol, max_iter, trace)
    sv = alpha > 0
    return BinarySvmModel(X[sv].copy(), (alpha * y)[sv], bias, kernel, g, C, it)


def kkt_residual(model: BinarySvmModel, X, y, alpha=None):
    """Largest violation of the soft-margin KKT conditions on a training set.

    Alphas are recovered from the stored coefficients by matching rows.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if alpha is None:
        alpha = np.zeros(len(y))
        for sv, coef in zip(model.support_vectors, model.coefficients):
            hits = np.flatnonzero(np.all(X == sv, axis=1))
            alpha[hits[0]] = abs(coef)
    yf = y * model.decision(X)
    C = model.c
    r = np.zeros(len(y))
    at0 = alpha <= 0
    atc = alpha >= C
    free = ~at0 & ~atc
    r[at0] = np.maximum(0.0, (1 - yf[at0]))
    r[atc] = np.maximum(0.0, yf[atc] - 1)
    r[free] = np.abs(yf[free] - 1)
    return float(r.max()), float(abs(alpha @ y))


# multiclass -------------------------------------------------------------------

@dataclass
class ZoneClassifier:
    strategy: str  # "oaa" or "oao"
    models: dict
    c: float
    g: float
    table: str | None = None
    meta: dict = field(default_factory=dict)

    def decision_values(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        keys = ZONES if self.strategy == "oaa" else PAIRS
        return np.column_stack([self.models[k].decision(X) for k in keys])

    def classify(self, X, table=None):
        dv = self.decision_values(X)
        if self.strategy == "oaa":
            return oaa_vote(dv)
        return oao_vote(dv, table or self.table or "V")

    def to_dict(self) -> dict:
        models = {
            (str(k) if self.strategy == "oaa" else f"{k[0]},{k[1]}"): m.to_dict()
            for k, m in self.models.items()
        }
        return {
            "format": "faultzone-model/1",
            "strategy": self.strategy,
            "c": self.c,
            "g": self.g,
            "table": self.table,
            "meta": self.meta,
            "models": models,
        }

    @classmethod
    def from_dict(cls, d) -> "ZoneClassifier":
        if d.get("format") != "faultzone-model/1":
            raise DataError("not a zone classifier document")
        strategy = d["strategy"]
        models = {}
        for k, m in d["models"].items():
            key = int(k) if strategy == "oaa" else tuple(int(v) for v in k.split(","))
            models[key] = BinarySvmModel.from_dict(m)
        return cls(strategy, models, float(d["c"]), float(d["g"]), d.get("table"), d.get("meta", {}))


def save_model(clf: ZoneClassifier, path) -> None:
    Path(path).write_text(json.dumps(clf.to_dict()) + "\n")


def load_model(path) -> ZoneClassifier:
    try:
        return ZoneClassifier.from_dict(json.loads(Path(path).read_text()))
    except (json.JSONDecodeError, KeyError) as exc:
        raise DataError(f"{path}: {exc}") from exc


def oaa_vote(dv):
    """Zone of the largest one-against-all decision value; ties go to the lower zone."""
    return np.asarray(ZONES)[np.argmax(dv, axis=1)]


def vote_patterns(dv):
    return (np.asarray(dv) >= 0).astype(int)


def oao_vote(dv, table="V"):
    """Map pairwise decision values through a voting table; 0 means undecided."""
    if table not in VOTING_TABLES:
        raise ConfigError(f"unknown voting table {table!r}")
    lut = VOTING_TABLES[table]
    return np.array([lut[tuple(p)] for p in vote_patterns(dv)], dtype=int)


def _check_zones(zones):
    missing = set(ZONES) - set(np.unique(zones))
    if missing:
        raise DataError(f"training data lacks zones {sorted(missing)}")


def _binary_tasks(strategy, zones):
    """(key, row mask, +/-1 labels) for every binary sub-problem."""
    tasks = []
    if strategy == "oaa":
        for z in ZONES:
            tasks.append((z, np.ones(len(zones), bool), np.where(zones == z, 1.0, -1.0)))
    elif strategy == "oao":
        for a, b in PAIRS:
            mask = (zones == a) | (zones == b)
            tasks.append(((a, b), mask, np.where(zones[mask] == a, 1.0, -1.0)))
    else:
        raise ConfigError(f"unknown strategy {strategy!r}")
    return tasks


def train_multiclass(X, zones, C, g, strategy, table=None, tol=1e-3, K=None) -> ZoneClassifier:
    X = np.asarray(X, dtype=float)
    zones = np.asarray(zones, dtype=int)
    _check_zones(zones)
    if K is None:
        K = gram(X, X, "rbf", g)
    models = {}
    for key, mask, y in _binary_tasks(strategy, zones):
        idx = np.flatnonzero(mask)
        alpha, bias, it = smo_solve(K[np.ix_(idx, idx)], y, C, tol)
        sv = alpha > 0
        models[key] = BinarySvmModel(X[idx][sv].copy(), (alpha * y)[sv], bias, "rbf", g, C, it)
    return ZoneClassifier(strategy, models, C, g, table if strategy == "oao" else None)


def oaa_train(X, zones, C, g, tol=1e-3) -> ZoneClassifier:
    return train_multiclass(X, zones, C, g, "oaa", tol=tol)


def oaa_classify(clf: ZoneClassifier, X):
    return oaa_vote(clf.decision_values(X))


def oao_train(X, zones, C, g, table="V", tol=1e-3) -> ZoneClassifier:
    return train_multiclass(X, zones, C, g, "oao", table=table, tol=tol)


def oao_classify(clf: ZoneClassifier, table, X):
    return oao_vote(clf.decision_values(X), table)


def accuracy(pred, truth) -> float:
    """Fraction correct; undecided (0) predictions count as wrong."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    return float(np.mean(pred == truth)) if len(truth) else float("nan")


# grid search ------------------------------------------------------------------

@dataclass
class GridResult:
    best: tuple  # (C, g)
    best_accuracy: float
    table: list  # dicts with c, g, accuracy

    def accuracy_of(self, c, g) -> float:
        for row in self.table:
            if row["c"] == c and row["g"] == g:
                return row["accuracy"]
        raise KeyError((c, g))


def grid_search(X_train, z_train, X_eval, z_eval, Cs, gs, strategy, table="V", tol=1e-3):
    """Train on every (C, g) and score on the evaluation set.

    Best = highest accuracy; ties go to the smaller C, then the smaller g.
    """
    Cs = list(Cs)
    gs = list(gs)
    if not Cs or not gs:
        raise ConfigError("grid must be non-empty")
    X_train = np.asarray(X_train, dtype=float)
    X_eval = np.asarray(X_eval, dtype=float)
    z_train = np.asarray(z_train, dtype=int)
    z_eval = np.asarray(z_eval, dtype=int)
    _check_zones(z_train)
    rows = []
    for g in sorted(set(gs)):
        K = gram(X_train, X_train, "rbf", g)
        Ke = gram(X_eval, X_train, "rbf", g)
        for c in sorted(set(Cs)):
            dv = _decision_columns(K, Ke, z_train, c, strategy, tol)
            pred = oaa_vote(dv) if strategy == "oaa" else oao_vote(dv, table)
            rows.append({"c": c, "g": g, "accuracy": accuracy(pred, z_eval)})
    best = min(rows, key=lambda r: (-r["accuracy"], r["c"], r["g"]))
    return GridResult((best["c"], best["g"]), best["accuracy"], rows)


def _decision_columns(K, Ke, zones, C, strategy, tol):
    cols = []
    for _, mask, y in _binary_tasks(strategy, zones):
        idx = np.flatnonzero(mask)
        alpha, bias, _ = smo_solve(K[np.ix_(idx, idx)], y, C, tol)
        cols.append(Ke[:, idx] @ (alpha * y) + bias)
    return np.column_stack(cols)


def default_grid():
    """Published optima plus a wider sweep of smaller C and g values."""
    return sorted(set(ANCHOR_C) | set(EXTRA_C)), sorted(set(ANCHOR_G) | set(EXTRA_G))


def grid_product(Cs, gs):
    return list(product(Cs, gs))
