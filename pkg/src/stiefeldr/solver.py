"""Feasible first-order optimization on the Stiefel manifold.

Every iterate is produced by a Cayley transform of the previous one, so
``B^T B = I`` holds throughout.  The step length along the Cayley curve is
chosen by a Barzilai-Borwein trial step followed by non-monotone
backtracking.
"""

import logging
import math
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple, Optional

import numpy as np

from .exceptions import DimensionError, NonFiniteObjectiveError, ObjectiveError, StiefelError
from .manifold import FEASIBILITY_TOL, as_basis, feasibility_error, gram_schmidt

logger = logging.getLogger(__name__)

TAU_MIN = 1e-14
TAU_MAX = 1e20


@dataclass
class SolverControl:
    """Tuning parameters of :func:`ortho_optim`.

    A tolerance of 0 disables the corresponding stopping test.
    """

    ftol: float = 1e-6
    gtol: float = 1e-6
    btol: float = 1e-6
    epsilon: float = 1e-6
    maxitr: int = 500
    tau_init: float = 1e-3
    rho: float = 1e-4
    eta: float = 0.2
    nonmonotone_window: int = 5
    num_threads: int = 1
    fd_scheme: str = "central"

    def __post_init__(self):
        for name in ("ftol", "gtol", "btol"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.tau_init > 0:
            raise ValueError("tau_init must be positive")
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie in (0, 1)")
        if not 0 < self.rho < 0.5:
            raise ValueError("rho must lie in (0, 1/2)")
        if int(self.maxitr) < 1:
            raise ValueError("maxitr must be a positive integer")
        if int(self.nonmonotone_window) < 1:
            raise ValueError("nonmonotone_window must be a positive integer")
        if int(self.num_threads) < 1:
            raise ValueError("num_threads must be a positive integer")
        if self.fd_scheme not in ("central", "forward"):
            raise ValueError("fd_scheme must be 'central' or 'forward'")
        self.maxitr = int(self.maxitr)
        self.nonmonotone_window = int(self.nonmonotone_window)
        self.num_threads = int(self.num_threads)

    @classmethod
    def from_any(cls, control):
        if control is None:
            return cls()
        if isinstance(control, cls):
            return control
        return cls(**dict(control))


@dataclass
class FitResult:
    """Outcome of an optimization run.

    ``fval`` and ``fval_trace`` are reported in the caller's sign, i.e. they
    are values of the user objective even when ``maximize=True``.
    """

    B: np.ndarray
    fval: float
    iterations: int
    converged: bool
    reason: str
    fval_trace: np.ndarray
    elapsed: float
    n_fevals: int = 0
    n_reorthogonalizations: int = 0
    metadata: dict = field(default_factory=dict)


@dataclass
class ObjectiveSpec:
    """An objective on p x d matrices, optionally with its gradient.

    ``value`` and ``gradient`` return quantities to be *minimized*; when
    ``maximize`` is set they negate the user callbacks.
    """

    value_fn: Callable[..., float]
    gradient_fn: Optional[Callable[..., np.ndarray]] = None
    extra_args: tuple = ()
    maximize: bool = False
    n_fevals: int = field(default=0, init=False, repr=False)

    @property
    def sign(self):
        return -1.0 if self.maximize else 1.0

    def value(self, B):
        self.n_fevals += 1
        return self.sign * float(self.value_fn(B, *self.extra_args))

    def gradient(self, B, epsilon=1e-6, num_threads=1, scheme="central"):
        if self.gradient_fn is not None:
            G = np.asarray(self.gradient_fn(B, *self.extra_args), dtype=float)
            if G.shape != B.shape:
                raise DimensionError(f"gradient has shape {G.shape}, expected {B.shape}")
            return self.sign * G
        return numeric_gradient(B, self.value, epsilon, num_threads, scheme)


class SearchResult(NamedTuple):
    B: np.ndarray
    fval: float
    tau: float
    stalled: bool


def skew_lift(B, G):
    """Skew-symmetric generator ``A = G B^T - B G^T`` of the Cayley curve."""
    B = np.asarray(B, dtype=float)
    G = np.asarray(G, dtype=float)
    if B.shape != G.shape:
        raise DimensionError(f"B and G must have equal shapes, got {B.shape} and {G.shape}")
    GBt = G @ B.T
    return GBt - GBt.T


def cayley_step(B, A, tau):
    """``(I + tau/2 A)^{-1} (I - tau/2 A) B`` by a dense p x p solve."""
    B = np.asarray(B, dtype=float)
    A = np.asarray(A, dtype=float)
    p = B.shape[0]
    if A.shape != (p, p):
        raise DimensionError(f"A must be {p} x {p}, got {A.shape}")
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if tau == 0:
        return B.copy()
    half = 0.5 * tau * A
    eye = np.eye(p)
    try:
        return np.linalg.solve(eye + half, B - half @ B)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - I + skew is never singular
        raise StiefelError("internal error: Cayley system reported singular") from exc


class _LowRankCayley:
    """Cayley curve through ``B`` for ``A = U V^T`` with ``U = [G, B]``, ``V = [B, -G]``.

    By Sherman-Morrison-Woodbury,
    ``B(tau) = B - tau U (I_2d + tau/2 V^T U)^{-1} V^T B``, a 2d x 2d solve.
    """

    def __init__(self, B, G):
        self.B = B
        self.U = np.hstack([G, B])
        V = np.hstack([B, -G])
        self.VU = V.T @ self.U
        self.VB = V.T @ B

    def __call__(self, tau):
        if tau == 0:
            return self.B.copy()
        k = self.VU.shape[0]
        aa = np.linalg.solve(np.eye(k) + 0.5 * tau * self.VU, self.VB)
        return self.B - tau * (self.U @ aa)


class _DenseCayley:
    def __init__(self, B, G):
        self.B = B
        self.A = skew_lift(B, G)

    def __call__(self, tau):
        return cayley_step(self.B, self.A, tau)


def cayley_step_lowrank(B, G, tau):
    """Same point as ``cayley_step(B, skew_lift(B, G), tau)`` via a 2d x 2d solve."""
    B = np.asarray(B, dtype=float)
    G = np.asarray(G, dtype=float)
    if B.shape != G.shape:
        raise DimensionError(f"B and G must have equal shapes, got {B.shape} and {G.shape}")
    if tau < 0:
        raise ValueError("tau must be non-negative")
    return _LowRankCayley(B, G)(tau)


def _cayley_curve(B, G):
    p, d = B.shape
    return _LowRankCayley(B, G) if 2 * d < p else _DenseCayley(B, G)


def descent_direction(B, G):
    """``A B = G - B G^T B``, the negative tangent of the Cayley curve at 0."""
    return G - B @ (G.T @ B)


def projected_gradient(B, G):
    """Tangent-space projection ``G - B sym(B^T G)``."""
    BtG = B.T @ G
    return G - B @ (0.5 * (BtG + BtG.T))


def curvilinear_search(B, G, spec, ctrl, f_ref, tau=None, fval=None):
    """Backtrack along the Cayley curve until non-monotone sufficient decrease.

    Accepts the first ``tau`` in ``tau0, eta tau0, eta^2 tau0, ...`` with
    ``f(B(tau)) <= f_ref - rho tau ||G - B G^T B||_F^2``.  When ``tau`` drops
    below ``1e-14`` (or the direction vanishes) the input point is returned
    with ``stalled=True``.

    ``spec`` is an :class:`ObjectiveSpec` or a plain callable to minimize.
    """
    value = spec.value if isinstance(spec, ObjectiveSpec) else spec
    B = np.asarray(B, dtype=float)
    G = np.asarray(G, dtype=float)
    ctrl = SolverControl.from_any(ctrl)
    D = descent_direction(B, G)
    deriv = ctrl.rho * float(np.sum(D * D))
    if deriv == 0.0:
        return SearchResult(B, fval, 0.0, True)

    curve = _cayley_curve(B, G)
    tau = ctrl.tau_init if tau is None else float(tau)
    while tau >= TAU_MIN:
        Bn = curve(tau)
        fn = value(Bn)
        if math.isfinite(fn) and fn <= f_ref - tau * deriv:
            return SearchResult(Bn, fn, tau, False)
        tau *= ctrl.eta
    return SearchResult(B, fval, 0.0, True)


def numeric_gradient(B, fun, epsilon=1e-6, num_threads=1, scheme="central"):
    """Finite-difference gradient of ``fun`` at ``B``, one entry per task.

    Entries are independent, so the result does not depend on
    ``num_threads``.  ``fun`` must be safe to call concurrently when
    ``num_threads > 1``.
    """
    B = np.asarray(B, dtype=float)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if scheme not in ("central", "forward"):
        raise ValueError("scheme must be 'central' or 'forward'")
    f0 = fun(B) if scheme == "forward" else None

    def entry(idx):
        Bp = B.copy()
        Bp[idx] += epsilon
        fp = fun(Bp)
        if scheme == "forward":
            fm, width = f0, epsilon
        else:
            Bp[idx] = B[idx] - epsilon
            fm, width = fun(Bp), 2.0 * epsilon
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise NonFiniteObjectiveError(f"non-finite objective when perturbing entry {idx}")
        return (fp - fm) / width

    indices = list(np.ndindex(*B.shape))
    if num_threads > 1:
        with ThreadPoolExecutor(max_workers=num_threads) as pool:
            values = list(pool.map(entry, indices))
    else:
        values = [entry(idx) for idx in indices]
    return np.array(values, dtype=float).reshape(B.shape)


def _guarded(call, iteration):
    try:
        return call()
    except StiefelError:
        raise
    except Exception as exc:
        raise ObjectiveError(iteration, exc) from exc


def minimize_stiefel(spec, B0, control=None, callback=None):
    """Minimize ``spec`` over St(p, d) starting from ``B0``.

    Returns a :class:`FitResult`; see :func:`ortho_optim` for the
    user-facing wrapper.
    """
    ctrl = SolverControl.from_any(control)
    t0 = time.perf_counter()
    B = as_basis(B0, "B0")
    if feasibility_error(B) > FEASIBILITY_TOL:
        B = gram_schmidt(B)
    p, d = B.shape
    spec.n_fevals = 0

    def grad(X, k):
        return _guarded(lambda: spec.gradient(X, ctrl.epsilon, ctrl.num_threads, ctrl.fd_scheme), k)

    f = _guarded(lambda: spec.value(B), 0)
    if not math.isfinite(f):
        raise ValueError("objective is not finite at the initial point")
    G = grad(B, 0)
    D = descent_direction(B, G)

    window = deque([f], maxlen=ctrl.nonmonotone_window)
    trace = [f]
    tau = ctrl.tau_init
    reason, converged, n_reorth = "maxitr", False, 0
    k = 0
    for k in range(1, ctrl.maxitr + 1):
        res = _guarded(lambda: curvilinear_search(B, G, spec, ctrl, max(window), tau, f), k)
        if res.stalled:
            trace.append(f)
            pg = np.linalg.norm(projected_gradient(B, G)) / math.sqrt(p * d)
            reason = "gtol" if pg <= ctrl.gtol else "stall"
            converged = True
            break

        Bn, fn = res.B, res.fval
        if feasibility_error(Bn) > FEASIBILITY_TOL:
            Bn = gram_schmidt(Bn)
            fn = _guarded(lambda: spec.value(Bn), k)
            n_reorth += 1
        Gn = grad(Bn, k)
        Dn = descent_direction(Bn, Gn)

        # alternating Barzilai-Borwein trial step for the next search
        S = Bn - B
        Y = Dn - D
        sy = abs(float(np.sum(S * Y)))
        if sy > 0:
            tau = float(np.sum(S * S)) / sy if k % 2 else sy / float(np.sum(Y * Y))
            tau = min(max(tau, TAU_MIN), TAU_MAX)
        else:
            tau = ctrl.tau_init

        fdiff = abs(f - fn) / max(abs(f), np.finfo(float).tiny)
        bdiff = np.linalg.norm(S) / math.sqrt(p)
        pg = np.linalg.norm(projected_gradient(Bn, Gn)) / math.sqrt(p * d)

        B, f, G, D = Bn, fn, Gn, Dn
        trace.append(f)
        window.append(f)
        if callback is not None:
            _guarded(lambda: callback(k, B, spec.sign * f), k)

        # a single small objective change is not trusted on its own under
        # non-monotone steps; it must coincide with a small parameter change
        if pg < ctrl.gtol:
            reason = "gtol"
        elif fdiff < ctrl.ftol and bdiff < ctrl.btol:
            reason = "ftol+btol"
        else:
            continue
        converged = True
        break

    elapsed = time.perf_counter() - t0
    logger.debug("stopped after %d iterations (%s), f=%.6g", k, reason, spec.sign * f)
    return FitResult(
        B=B,
        fval=spec.sign * f,
        iterations=k,
        converged=converged,
        reason=reason,
        fval_trace=spec.sign * np.asarray(trace),
        elapsed=elapsed,
        n_fevals=spec.n_fevals,
        n_reorthogonalizations=n_reorth,
    )


def ortho_optim(B, fn, grad=None, args=(), maximize=False, control=None, callback=None, **ctrl_kwargs):
    """General-purpose optimizer under the constraint ``B^T B = I``.

    A drop-in analogue of ``scipy.optimize.minimize`` for orthonormal
    matrices.  ``B`` is processed by Gram-Schmidt if it is not already
    orthonormal.

    Parameters
    ----------
    B : array-like of shape (p, d)
        Initial value.
    fn : callable ``fn(B, *args) -> float``
    grad : callable ``grad(B, *args) -> ndarray``, optional
        Gradient of ``fn``; a threaded finite-difference approximation is
        used when omitted.
    args : tuple
        Extra positional arguments forwarded to ``fn`` and ``grad``.
    maximize : bool
        Maximize instead of minimize.
    control : SolverControl or dict, optional
    callback : callable ``callback(k, B, fval)``, optional
        Called after every accepted iteration.
    **ctrl_kwargs
        Overrides applied on top of ``control``, e.g. ``maxitr=1000``.

    Returns
    -------
    FitResult
    """
    ctrl = SolverControl.from_any(control)
    if ctrl_kwargs:
        ctrl = SolverControl(**{**ctrl.__dict__, **ctrl_kwargs})
    spec = ObjectiveSpec(fn, grad, tuple(args), bool(maximize))
    return minimize_stiefel(spec, B, ctrl, callback)
