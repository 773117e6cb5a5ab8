"""Fixed-budget timing runs on the Brockett cost.

``tr(B^T X B D)`` over ``n x p`` orthonormal ``B`` has a closed-form
minimum, which makes it a convenient yardstick for the solver: every run
can report both its time and its gap to the optimum.
"""

import time
from typing import NamedTuple

import numpy as np

from .manifold import gram_schmidt
from .solver import ObjectiveSpec, SolverControl, minimize_stiefel

# (n, p, iteration budget) for the timing table
TABLE_CONFIGS = (
    (150, 5, 250),
    (150, 10, 500),
    (150, 20, 750),
    (150, 50, 1000),
    (500, 5, 250),
    (500, 10, 500),
    (500, 20, 750),
    (500, 50, 1000),
)
PROBLEMS = ("brockett",)


def brockett_value(B, X, D):
    return float(np.sum((X @ B) * (B * np.diag(D))))


def brockett_gradient(B, X, D):
    return 2.0 * (X @ B) @ D


def brockett_optimum(X, D):
    """Closed-form minimum: smallest eigenvalues ascending against ``diag(D)`` descending."""
    p = D.shape[0]
    evals = np.linalg.eigvalsh(X)[:p]
    weights = np.sort(np.diag(D))[::-1]
    return float(evals @ weights)


class BrockettProblem(NamedTuple):
    spec: ObjectiveSpec
    optimum: float
    X: np.ndarray
    D: np.ndarray


def brockett(n, p, seed=None):
    """Random Brockett instance with ``X = M + M^T`` and ``D = diag(p, ..., 1)``."""
    if not 1 <= p <= n:
        raise ValueError(f"need 1 <= p <= n, got n={n}, p={p}")
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, n))
    X = M + M.T
    D = np.diag(np.arange(p, 0, -1, dtype=float))
    spec = ObjectiveSpec(brockett_value, brockett_gradient, extra_args=(X, D))
    return BrockettProblem(spec, brockett_optimum(X, D), X, D)


class BenchResult(NamedTuple):
    problem: str
    n: int
    p: int
    repeat: int
    trace: np.ndarray
    elapsed: float
    fval: float
    optimum: float
    relative_gap: float


def run_once(problem, n, p, budget, seed=None):
    """One fixed-budget run; the trace always has ``budget + 1`` entries.

    Tolerances are disabled so only the budget stops the solver.  If the
    line search stalls first (the iterate is already optimal to machine
    precision) the last value is repeated to keep the trace length fixed.
    """
    if problem not in PROBLEMS:
        raise ValueError(f"problem must be one of {PROBLEMS}, got {problem!r}")
    prob = brockett(n, p, seed)
    rng = np.random.default_rng(None if seed is None else [seed, 1])
    B0 = gram_schmidt(rng.standard_normal((n, p)))
    ctrl = SolverControl(ftol=0.0, gtol=0.0, btol=0.0, maxitr=budget, num_threads=1)
    t0 = time.perf_counter()
    res = minimize_stiefel(prob.spec, B0, ctrl)
    elapsed = time.perf_counter() - t0
    trace = np.asarray(res.fval_trace, dtype=float)
    if trace.size < budget + 1:
        trace = np.concatenate([trace, np.full(budget + 1 - trace.size, trace[-1])])
    gap = abs(res.fval - prob.optimum) / max(abs(prob.optimum), np.finfo(float).tiny)
    return res, BenchResult(problem, n, p, 0, trace, elapsed, res.fval, prob.optimum, gap)


def run_benchmark(problem="brockett", n=150, p=5, budget=250, repeats=1, seed=0):
    """Repeat :func:`run_once` with seeds ``seed, seed + 1, ...``."""
    out = []
    for r in range(int(repeats)):
        _, res = run_once(problem, n, p, budget, seed + r)
        out.append(res._replace(repeat=r))
    return out


def run_table(configs=TABLE_CONFIGS, repeats=1, seed=0):
    """All timing-table configurations; returns a flat list of results."""
    out = []
    for n, p, budget in configs:
        out.extend(run_benchmark("brockett", n, p, budget, repeats, seed))
    return out


def pca_value(w, X):
    Xw = X @ w
    return float(np.sum(Xw * Xw))


def pca_gradient(w, X):
    return 2.0 * X.T @ (X @ w)


class PCAProblem(NamedTuple):
    spec: ObjectiveSpec
    X: np.ndarray
    leading: np.ndarray


def pca_problem(n=400, p=100, seed=None):
    """Leading principal direction of a centered Gaussian matrix, as a maximization.

    ``leading`` is the top right singular vector, computed by SVD.
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    X -= X.mean(axis=0)
    spec = ObjectiveSpec(pca_value, pca_gradient, extra_args=(X,), maximize=True)
    return PCAProblem(spec, X, np.linalg.svd(X, full_matrices=False)[2][0][:, None])
