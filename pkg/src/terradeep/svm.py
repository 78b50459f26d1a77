"""RBF-kernel support vector machines trained by SMO, with one-vs-one voting
for more than two classes."""
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import DatasetError, ParameterError, ShapeError

_ALPHA_EPS = 1e-12
_MIN_STEP = 1e-8


@dataclass(frozen=True)
class SvmConfig:
    C: float = 1.0
    gamma: float | None = None  # None -> 1 / feature_count
    tol: float = 1e-3
    max_passes: int = 200

    def __post_init__(self):
        if self.C <= 0 or self.tol <= 0 or (self.gamma is not None and self.gamma <= 0):
            raise ParameterError(f"invalid SVM configuration {self}")
        if self.max_passes < 1:
            raise ParameterError("max_passes must be >= 1")

    def resolved_gamma(self, n_features):
        return self.gamma if self.gamma is not None else 1.0 / n_features

    def to_dict(self):
        return {"C": self.C, "gamma": self.gamma, "tol": self.tol, "max_passes": self.max_passes}


def rbf_kernel(x, z, gamma):
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x.shape != z.shape:
        raise ShapeError(f"rbf_kernel: {x.shape} vs {z.shape}")
    d = x - z
    return float(np.exp(-gamma * np.dot(d.ravel(), d.ravel())))


def rbf_matrix(a, b, gamma):
    """Kernel matrix between the rows of ``a`` and ``b``."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"rbf_matrix: feature counts {a.shape[1]} and {b.shape[1]} differ")
    sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * (a @ b.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass
class BinarySvmModel:
    """Decision function f(x) = sum_i coef_i K(sv_i, x) + bias, coef_i = alpha_i * y_i."""

    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    gamma: float
    C: float = 1.0
    tol: float = 1e-3
    support_index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    converged: bool = True
    passes: int = 0

    def decision(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.support_vectors.shape[1]:
            raise ShapeError(
                f"input has {x.shape[1]} features, model expects {self.support_vectors.shape[1]}")
        if len(self.dual_coef) == 0:
            f = np.full(len(x), self.bias)
        else:
            f = rbf_matrix(x, self.support_vectors, self.gamma) @ self.dual_coef + self.bias
        return float(f[0]) if single else f


def svm_decision(model, x):
    return model.decision(x)


def svm_predict_binary(model, x):
    """Sign of the decision value, with f == 0 mapped to +1."""
    f = model.decision(x)
    return np.where(np.asarray(f) >= 0, 1, -1) if np.ndim(f) else (1 if f >= 0 else -1)


class _Smo:
    def __init__(self, x, y, C, gamma, tol):
        self.y = y
        self.K = rbf_matrix(x, x, gamma)
        self.C, self.tol = C, tol
        self.alpha = np.zeros(len(y))
        self.b = 0.0
        self.err = -y.astype(np.float64)

    def violates(self, i):
        r = self.y[i] * self.err[i]
        a = self.alpha[i]
        return (r < -self.tol and a < self.C) or (r > self.tol and a > 0)

    def step(self, i, j):
        if i == j:
            return False
        y, K, C = self.y, self.K, self.C
        ai, aj = self.alpha[i], self.alpha[j]
        yi, yj = y[i], y[j]
        ei, ej = self.err[i], self.err[j]
        if yi != yj:
            lo, hi = max(0.0, aj - ai), min(C, C + aj - ai)
        else:
            lo, hi = max(0.0, ai + aj - C), min(C, ai + aj)
        if hi - lo < _ALPHA_EPS:
            return False
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta > 1e-12:
            aj_new = min(hi, max(lo, aj + yj * (ei - ej) / eta))
        else:
            # flat direction: move to whichever end lowers the dual objective
            fi = yi * ei - ai * K[i, i] - yi * yj * aj * K[i, j]
            fj = yj * ej - yi * yj * ai * K[i, j] - aj * K[j, j]
            s = yi * yj

            def obj(a_j):
                a_i = ai + s * (aj - a_j)
                return (a_i * fi + a_j * fj + 0.5 * a_i * a_i * K[i, i]
                        + 0.5 * a_j * a_j * K[j, j] + s * a_i * a_j * K[i, j])

            ol, oh = obj(lo), obj(hi)
            aj_new = lo if ol < oh - 1e-12 else hi if oh < ol - 1e-12 else aj
        if abs(aj_new - aj) < _MIN_STEP * (aj_new + aj + _MIN_STEP):
            return False
        ai_new = ai + yi * yj * (aj - aj_new)
        ai_new = self._snap(ai_new)
        aj_new = self._snap(aj_new)
        dai, daj = ai_new - ai, aj_new - aj
        b1 = self.b - ei - yi * dai * K[i, i] - yj * daj * K[i, j]
        b2 = self.b - ej - yi * dai * K[i, j] - yj * daj * K[j, j]
        if 0.0 < ai_new < C:
            b_new = b1
        elif 0.0 < aj_new < C:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)
        self.err += yi * dai * K[i] + yj * daj * K[j] + (b_new - self.b)
        self.alpha[i], self.alpha[j] = ai_new, aj_new
        self.b = b_new
        return True

    def _snap(self, a):
        if a < _ALPHA_EPS * self.C:
            return 0.0
        if a > self.C * (1.0 - _ALPHA_EPS):
            return self.C
        return a

    def examine(self, i):
        if not self.violates(i):
            return False
        y, C = self.y, self.C
        ai, aj = self.alpha[i], self.alpha
        same = y == y[i]
        lo = np.where(same, np.maximum(0.0, ai + aj - C), np.maximum(0.0, aj - ai))
        hi = np.where(same, np.minimum(C, ai + aj), np.minimum(C, C + aj - ai))
        eta = self.K[i, i] + np.diag(self.K) - 2.0 * self.K[i]
        with np.errstate(divide="ignore", invalid="ignore"):
            target = np.clip(aj + y * (self.err[i] - self.err) / eta, lo, hi)
        moves = (hi - lo >= _ALPHA_EPS) & (
            (eta <= 1e-12) | (np.abs(target - aj) >= _MIN_STEP * (target + aj + _MIN_STEP)))
        moves[i] = False
        gap = np.where(moves, np.abs(self.err[i] - self.err), -1.0)
        # best |E_i - E_j| first; stable sort keeps lower indices first on ties
        for j in np.argsort(-gap, kind="stable")[:int(moves.sum())]:
            if self.step(i, int(j)):
                return True
        return False

    def any_violation(self):
        r = self.y * self.err
        return bool(np.any(((r < -self.tol) & (self.alpha < self.C))
                           | ((r > self.tol) & (self.alpha > 0))))

    def refresh(self):
        """Recompute the error cache and move b to the middle of its KKT interval.

        Returns the width of the violation interval; the current alphas are
        KKT-optimal within ``tol`` iff it is at most ``2 * tol``.
        """
        y, a, C = self.y, self.alpha, self.C
        v = y - self.K @ (a * y)
        free = (a > 0) & (a < C)
        low = free | ((a == 0) & (y > 0)) | ((a == C) & (y < 0))
        up = free | ((a == 0) & (y < 0)) | ((a == C) & (y > 0))
        b_lo = v[low].max() if low.any() else -np.inf
        b_hi = v[up].min() if up.any() else np.inf
        if np.isfinite(b_lo) and np.isfinite(b_hi):
            self.b = 0.5 * (b_lo + b_hi)
        elif np.isfinite(b_lo) or np.isfinite(b_hi):
            self.b = b_lo if np.isfinite(b_lo) else b_hi
        self.err = self.b - v
        return b_lo - b_hi


def smo_train(features, labels, cfg=SvmConfig()):
    """Binary soft-margin SVM; ``labels`` must be -1/+1.

    Outer sweeps alternate between all samples and the non-bound ones.
    Within a sweep the first KKT violator (in index order) is paired with
    the sample maximizing |E_i - E_j|. A sweep over all samples with no
    change ends training; ``max_passes`` sweeps without that leaves
    ``converged=False``.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2 or len(x) != len(y):
        raise ShapeError(f"features {x.shape} and labels {y.shape} do not align")
    if not np.all(np.isin(y, (-1, 1))):
        raise DatasetError("binary labels must be -1 or +1")
    if not (np.any(y == 1) and np.any(y == -1)):
        raise DatasetError("both classes must be present")
    y = y.astype(np.float64)
    gamma = cfg.resolved_gamma(x.shape[1])
    smo = _Smo(x, y, cfg.C, gamma, cfg.tol)
    examine_all, converged, passes = True, False, 0
    while passes < cfg.max_passes:
        if examine_all:
            candidates = range(len(y))
        else:
            candidates = np.flatnonzero((smo.alpha > 0) & (smo.alpha < cfg.C))
        changed = sum(smo.examine(int(i)) for i in candidates)
        passes += 1
        if examine_all:
            # the margin keeps the audit (which uses this b) strictly inside tol
            if smo.refresh() <= 2.0 * cfg.tol * (1.0 - 1e-6):
                converged = True
                break
            examine_all = changed == 0
        elif changed == 0:
            examine_all = True
    sv = np.flatnonzero(smo.alpha > 0)
    return BinarySvmModel(x[sv].copy(), smo.alpha[sv] * y[sv], float(smo.b), gamma,
                          cfg.C, cfg.tol, sv, converged, passes)


def kkt_violations(model, features, labels, tol=None):
    """Indices of training samples that break the KKT conditions by more than ``tol``."""
    tol = model.tol if tol is None else tol
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    alpha = np.zeros(len(y))
    alpha[model.support_index] = np.abs(model.dual_coef)
    margin = y * model.decision(x)
    C = model.C
    bad = ((alpha == 0) & (margin < 1 - tol)) \
        | ((alpha > 0) & (alpha < C) & (np.abs(margin - 1) > tol)) \
        | ((alpha == C) & (margin > 1 + tol)) \
        | (alpha < 0) | (alpha > C)
    return np.flatnonzero(bad)


def kkt_audit(model, features, labels, tol=None):
    """True when box, equality and complementary-slackness conditions hold."""
    tol = model.tol if tol is None else tol
    equality = abs(float(np.sum(model.dual_coef))) <= tol
    return equality and len(kkt_violations(model, features, labels, tol)) == 0


@dataclass
class MulticlassSvm:
    """One binary machine per class pair ``(a, b)``, ``a < b``; +1 means ``b``."""

    n_classes: int
    pairs: list
    machines: list
    class_names: tuple = ()
    preprocess: object = None
    meta: dict = field(default_factory=dict)

    def votes(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        n = len(x)
        votes = np.zeros((n, self.n_classes), dtype=np.int64)
        conf = np.zeros((n, self.n_classes))
        rows = np.arange(n)
        for (a, b), m in zip(self.pairs, self.machines):
            f = np.atleast_1d(m.decision(x))
            win_b = f >= 0
            votes[rows, np.where(win_b, b, a)] += 1
            conf[:, b] += f
            conf[:, a] -= f
        return votes, conf

    def predict(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.preprocess is not None:
            x = self.preprocess.transform(x)
        votes, conf = self.votes(x)
        best = votes.max(axis=1, keepdims=True)
        # among tied vote leaders prefer the larger summed decision value
        score = np.where(votes == best, conf, -np.inf)
        return score.argmax(axis=1)


def one_vs_one_train(features, labels, cfg=SvmConfig(), n_classes=None, class_names=()):
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    k = int(y.max()) + 1 if n_classes is None else n_classes
    counts = np.bincount(y, minlength=k)
    if len(counts) > k or np.any(counts[:k] == 0):
        missing = [c for c in range(k) if c >= len(counts) or counts[c] == 0]
        raise DatasetError(f"classes without samples: {missing}")
    # gamma is resolved once so every machine shares the same kernel
    cfg = SvmConfig(cfg.C, cfg.resolved_gamma(x.shape[1]), cfg.tol, cfg.max_passes)
    pairs, machines = [], []
    for a, b in combinations(range(k), 2):
        mask = (y == a) | (y == b)
        machines.append(smo_train(x[mask], np.where(y[mask] == b, 1, -1), cfg))
        pairs.append((a, b))
    return MulticlassSvm(k, pairs, machines, tuple(class_names))


def one_vs_one_predict(model, x):
    return model.predict(x)
