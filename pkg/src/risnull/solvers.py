"""Reflection-coefficient solvers.

Every solver minimises (a regularised form of) the received power
``||b + A_eff d||^2`` over the complex coefficient vector d, where A_eff is
the effective reflection matrix from :func:`risnull.channels.effective_matrix`:

* ``lss``          normal-equations solution, requires full column rank
* ``pinv``         minimum-norm least-squares solution via SVD pseudoinverse
* ``clipped_pinv`` pinv followed by magnitude clipping to the unit disc
* ``ridge``        quadratic shrinkage, d = -(A^H A + lam I)^-1 A^H b
* ``lasso_ista``   l1 shrinkage, iterative soft-thresholding on
                   (1/2)||b + A d||^2 + lam ||d||_1
* ``pgd``          projected gradient descent under |d_i| <= 1 (passive RIS)

Solvers are pure functions with no shared state; concurrent calls are safe.
"""

from dataclasses import dataclass

import numpy as np

from .channels import RisVector

METHODS = ("lss", "pinv", "clipped_pinv", "ridge", "lasso_ista", "pgd")

_EPS = float(np.finfo(np.float64).eps)


class RankDeficientError(np.linalg.LinAlgError):
    """The normal equations are singular; use the pseudoinverse solver."""


@dataclass(frozen=True)
class SolverSpec:
    """Which solver to run and its hyperparameters.

    ``lam`` is the regularisation weight (ridge / lasso), ``step`` the
    gradient step size for the iterative methods ("auto" picks the inverse
    Lipschitz constant), ``tol`` the iterate-difference stopping threshold,
    ``max_iter`` the iteration cap and ``rank_tol`` the relative SVD
    truncation threshold (None applies max(m, n) * machine epsilon).
    """

    method: str
    lam: float = 0.0
    step: float | str = "auto"
    tol: float = 1e-10
    max_iter: int = 100_000
    rank_tol: float | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.step != "auto" and not (isinstance(self.step, (int, float)) and self.step > 0):
            raise ValueError("step must be 'auto' or a positive number")
        if self.rank_tol is not None and self.rank_tol <= 0:
            raise ValueError("rank_tol must be positive")

    @property
    def tag(self) -> str:
        """Short label for reports; includes lam where it matters."""
        if self.method in ("ridge", "lasso_ista"):
            return f"{self.method}(lam={self.lam:g})"
        return self.method


@dataclass
class SolveResult:
    d: RisVector
    objective: float
    iterations: int = 0
    converged: bool = True
    objective_trace: tuple = ()

    @property
    def vector(self) -> np.ndarray:
        return self.d.d


def _check_system(A_eff, b):
    A_eff = np.asarray(A_eff, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if A_eff.ndim != 2 or b.ndim != 1 or A_eff.shape[0] != b.size:
        raise ValueError(
            f"shape mismatch: matrix is {A_eff.shape}, target vector has length {b.size}"
        )
    return A_eff, b


def _residual_power(A_eff, b, d) -> float:
    r = b + A_eff @ d
    return float(np.real(np.vdot(r, r)))


def default_rank_tol(m: int, n: int) -> float:
    return max(m, n) * _EPS


def pinv(M: np.ndarray, rank_tol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse via SVD.

    Singular values at or below ``rank_tol * sigma_max`` are treated as
    zero; the remaining ones are reciprocated.
    """
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.size == 0:
        raise ValueError("M must be a nonempty 2-D matrix")
    U, s, Vh = np.linalg.svd(M, full_matrices=False)
    if rank_tol is None:
        rank_tol = default_rank_tol(*M.shape)
    cutoff = rank_tol * (s[0] if s.size else 0.0)
    inv_s = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    return (Vh.conj().T * inv_s) @ U.conj().T


def solve_lss(A_eff: np.ndarray, b: np.ndarray, rank_tol: float | None = None) -> SolveResult:
    """Unregularised least squares through the normal equations.

    Raises :class:`RankDeficientError` when A^H A is singular (e.g. fewer
    receive antennas than RIS elements); the pseudoinverse solver handles
    those systems.
    """
    A_eff, b = _check_system(A_eff, b)
    m, n = A_eff.shape
    if rank_tol is None:
        rank_tol = default_rank_tol(m, n)
    s = np.linalg.svd(A_eff, compute_uv=False)
    rank = int(np.count_nonzero(s > rank_tol * (s[0] if s.size else 0.0)))
    if rank < n:
        raise RankDeficientError(
            f"normal equations are singular: effective matrix has rank {rank} < {n}; "
            "use the pseudoinverse solver for a minimum-norm solution"
        )
    if not b.any():
        d = np.zeros(n, complex)
    else:
        G = A_eff.conj().T @ A_eff
        d = -np.linalg.solve(G, A_eff.conj().T @ b)
    return SolveResult(RisVector(d), _residual_power(A_eff, b, d))


def solve_pinv(A_eff: np.ndarray, b: np.ndarray, rank_tol: float | None = None) -> SolveResult:
    """Minimum-norm least-squares solution d = -pinv(A_eff) b.

    Always defined; on rank-deficient systems it returns the minimiser of
    the residual with the smallest Euclidean norm.
    """
    A_eff, b = _check_system(A_eff, b)
    if not b.any():
        d = np.zeros(A_eff.shape[1], complex)
    else:
        d = -pinv(A_eff, rank_tol) @ b
    return SolveResult(RisVector(d), _residual_power(A_eff, b, d))


def clip_unit(d: np.ndarray) -> np.ndarray:
    """Project each entry onto the unit disc, preserving phase:
    d_i -> d_i / max(|d_i|, 1)."""
    d = np.asarray(d, dtype=complex)
    return d / np.maximum(np.abs(d), 1.0)


def solve_clipped_pinv(A_eff, b, rank_tol: float | None = None) -> SolveResult:
    """Pseudoinverse solution clipped to the passive set |d_i| <= 1."""
    res = solve_pinv(A_eff, b, rank_tol)
    d = clip_unit(res.vector)
    A_eff, b = _check_system(A_eff, b)
    return SolveResult(RisVector(d, mode="passive"), _residual_power(A_eff, b, d))


def solve_ridge(A_eff: np.ndarray, b: np.ndarray, lam: float) -> SolveResult:
    """Quadratically regularised solution d = -(A^H A + lam I)^-1 A^H b.

    The reported objective includes the penalty: ||b + A d||^2 + lam ||d||^2.
    lam = 0 falls back to the unregularised solvers.
    """
    A_eff, b = _check_system(A_eff, b)
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if lam == 0:
        try:
            return solve_lss(A_eff, b)
        except RankDeficientError:
            return solve_pinv(A_eff, b)
    n = A_eff.shape[1]
    if not b.any():
        d = np.zeros(n, complex)
    else:
        G = A_eff.conj().T @ A_eff + lam * np.eye(n)
        d = -np.linalg.solve(G, A_eff.conj().T @ b)
    obj = _residual_power(A_eff, b, d) + lam * float(np.real(np.vdot(d, d)))
    return SolveResult(RisVector(d), obj)


def soft_threshold(d: np.ndarray, thr: float) -> np.ndarray:
    """Shrink magnitudes by thr, zeroing entries with |d_i| <= thr.

    Phase is preserved; this is the proximal map of thr * ||.||_1 on
    complex vectors.
    """
    if thr < 0:
        raise ValueError("threshold must be nonnegative")
    d = np.asarray(d, dtype=complex)
    mag = np.abs(d)
    keep = mag > thr
    scale = np.where(keep, 1.0 - thr / np.where(keep, mag, 1.0), 0.0)
    return scale * d


def _lasso_objective(A_eff, b, d, lam) -> float:
    r = b + A_eff @ d
    return float(0.5 * np.real(np.vdot(r, r)) + lam * np.abs(d).sum())


def _spectral_norm(A_eff) -> float:
    return float(np.linalg.norm(A_eff, 2))


def solve_lasso_ista(A_eff, b, lam: float, spec: SolverSpec | None = None) -> SolveResult:
    """l1-regularised solve by iterative shrinkage-thresholding.

    Minimises f(d) = (1/2)||b + A d||^2 + lam ||d||_1 starting from d = 0.
    Each step follows the smooth gradient A^H (A d + b) with step size
    alpha (auto: 1/sigma_max^2, the inverse Lipschitz constant) and applies
    the soft threshold at level lam * alpha.  Stops when the iterate moves
    less than ``spec.tol`` or after ``spec.max_iter`` steps.
    """
    A_eff, b = _check_system(A_eff, b)
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if spec is None:
        spec = SolverSpec("lasso_ista", lam=lam)
    n = A_eff.shape[1]
    if not b.any():
        return SolveResult(RisVector(np.zeros(n, complex)), 0.0, 0, True, (0.0,))

    if spec.step == "auto":
        alpha = 1.0 / _spectral_norm(A_eff) ** 2
    else:
        alpha = float(spec.step)
    d = np.zeros(n, complex)
    trace = [_lasso_objective(A_eff, b, d, lam)]
    iterations = 0
    converged = False
    for k in range(spec.max_iter):
        grad = A_eff.conj().T @ (A_eff @ d + b)
        d_next = soft_threshold(d - alpha * grad, lam * alpha)
        if not np.all(np.isfinite(d_next)):
            raise FloatingPointError(f"non-finite iterate at iteration {k + 1}")
        trace.append(_lasso_objective(A_eff, b, d_next, lam))
        step_norm = np.linalg.norm(d_next - d)
        d = d_next
        iterations = k + 1
        if step_norm < spec.tol:
            converged = True
            break
    return SolveResult(RisVector(d), trace[-1], iterations, converged, tuple(trace))


def lasso_closed_form_orthonormal(A_eff, b, lam: float) -> RisVector:
    """Closed-form lasso solution for orthonormal columns:
    soft threshold of the unregularised solution, entry by entry.

    Raises ValueError when A^H A deviates from the identity by more than
    1e-8, since the shortcut is only exact in that regime.
    """
    A_eff, b = _check_system(A_eff, b)
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    n = A_eff.shape[1]
    G = A_eff.conj().T @ A_eff
    if np.abs(G - np.eye(n)).max() > 1e-8:
        raise ValueError("columns are not orthonormal (A^H A != I within 1e-8)")
    d_ls = -np.linalg.solve(G, A_eff.conj().T @ b)
    return RisVector(soft_threshold(d_ls, lam))


def solve_pgd(A_eff, b, spec: SolverSpec | None = None, iterate_callback=None) -> SolveResult:
    """Projected gradient descent under the passiveness constraint |d_i| <= 1.

    Follows the gradient 2 A^H (A d + b) with step alpha (auto:
    1/(2 sigma_max^2)) and projects every iterate back onto the unit
    polydisc, so each iterate is feasible.  ``iterate_callback`` is invoked
    with every iterate, including the start point (used by diagnostics).
    """
    A_eff, b = _check_system(A_eff, b)
    if spec is None:
        spec = SolverSpec("pgd")
    n = A_eff.shape[1]
    d = np.zeros(n, complex)
    if iterate_callback is not None:
        iterate_callback(d)
    if not b.any():
        return SolveResult(RisVector(d, mode="passive"), 0.0, 0, True, (0.0,))

    if spec.step == "auto":
        alpha = 1.0 / (2.0 * _spectral_norm(A_eff) ** 2)
    else:
        alpha = float(spec.step)
    trace = [_residual_power(A_eff, b, d)]
    iterations = 0
    converged = False
    for k in range(spec.max_iter):
        grad = 2.0 * (A_eff.conj().T @ (A_eff @ d + b))
        d_next = clip_unit(d - alpha * grad)
        if not np.all(np.isfinite(d_next)):
            raise FloatingPointError(f"non-finite iterate at iteration {k + 1}")
        if iterate_callback is not None:
            iterate_callback(d_next)
        trace.append(_residual_power(A_eff, b, d_next))
        step_norm = np.linalg.norm(d_next - d)
        d = d_next
        iterations = k + 1
        if step_norm < spec.tol:
            converged = True
            break
    return SolveResult(RisVector(d, mode="passive"), trace[-1], iterations, converged, tuple(trace))


def solve_system(spec: SolverSpec, A_eff: np.ndarray, b: np.ndarray) -> SolveResult:
    """Dispatch on spec.method for a prepared (A_eff, b) system."""
    if spec.method == "lss":
        return solve_lss(A_eff, b, spec.rank_tol)
    if spec.method == "pinv":
        return solve_pinv(A_eff, b, spec.rank_tol)
    if spec.method == "clipped_pinv":
        return solve_clipped_pinv(A_eff, b, spec.rank_tol)
    if spec.method == "ridge":
        return solve_ridge(A_eff, b, spec.lam)
    if spec.method == "lasso_ista":
        return solve_lasso_ista(A_eff, b, spec.lam, spec)
    if spec.method == "pgd":
        return solve_pgd(A_eff, b, spec)
    raise ValueError(f"unknown method {spec.method!r}")


def solve_channel(spec: SolverSpec, ch) -> SolveResult:
    """Solve for the channel set's effective matrix and direct path."""
    return solve_system(spec, ch.effective(), ch.b)
