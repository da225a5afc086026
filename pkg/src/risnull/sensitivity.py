"""First-order sensitivity of the solvers to channel perturbations.

For a perturbation (dA, db, dc) the solution moves by the true drift
``Dd = d' - d`` (re-solve on the perturbed channels).  The functions here
evaluate closed-form first-order approximations ``dd`` of that drift, the
first-order change of the received-power objective, and the exact re-solve
oracle the approximations are validated against.

Fast-update accounting
----------------------
Given the operators cached by the nominal solve (the inverse Gram matrix or
the pseudoinverse, the solution d and its residual r = b + A_eff d), the
first-order update needs only matrix-vector products; no fresh inversion.
Diagonal scalings (multiplying by c or dc entrywise) are free.  The counted
product sequences implemented by :func:`apply_correction` are:

pseudoinverse update, 5 products::

    t  = P db                 1        (P = cached pseudoinverse)
    u1 = dA (c * d)           1
    u2 = A (dc * d)           1
    dd = -t - P u1 - P u2     2

normal-equations / ridge update, 6 products (K = cached inverse Gram
matrix, with the ridge shift where applicable)::

    u1 = dA (c * d)           1
    u2 = A (dc * d)           1
    w  = A_eff^H (db+u1+u2)   1
    s1 = conj(c) * (dA^H r)   1
    s2 = conj(dc) * (A^H r)   1
    dd = -K (w + s1 + s2)     1

The pseudoinverse *drift* formula :func:`delta_d_pinv` additionally carries
the null-space and residual terms of the full pseudoinverse differential;
they do not change the corrected signal level to leading order (the extra
component lies in the kernel of A_eff), so the cheap 5-product core above
is what the update path uses.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .channels import (
    ChannelSet,
    Perturbation,
    RisVector,
    apply_perturbation,
    effective_matrix,
)
from .solvers import (
    RankDeficientError,
    SolverSpec,
    clip_unit,
    default_rank_tol,
    pinv,
    solve_channel,
)

CORRECTABLE_METHODS = ("lss", "ridge", "pinv")
DRIFT_METHODS = ("lss", "ridge", "pinv")


@dataclass
class MatvecCounter:
    """Tallies matrix-vector products and matrix (pseudo)inversions."""

    matvec_count: int = 0
    inverse_count: int = 0

    def add_matvec(self, k: int = 1):
        self.matvec_count += k

    def add_inverse(self, k: int = 1):
        self.inverse_count += k


@dataclass
class DriftReport:
    """Squared norms comparing the true drift with its first-order estimate."""

    true_drift_energy: float
    approx_drift_energy: float
    error_energy: float
    sigma_p: float
    method: str


def _as_vec(d) -> np.ndarray:
    return np.asarray(getattr(d, "d", d), dtype=complex)


def delta_effective_matrix(dA, c, A, dc) -> np.ndarray:
    """First-order change of the effective matrix: dA * c + A * dc
    (columnwise scalings)."""
    return effective_matrix(dA, c) + effective_matrix(A, dc)


def _lss_delta_core(A_eff, K_solve, b, d, dA_eff, db):
    """-(K)[dA_eff^H b + A_eff^H db + (A_eff^H dA_eff + dA_eff^H A_eff) d]
    where K_solve applies the (shifted) inverse Gram matrix."""
    rhs = (
        dA_eff.conj().T @ b
        + A_eff.conj().T @ db
        + A_eff.conj().T @ (dA_eff @ d)
        + dA_eff.conj().T @ (A_eff @ d)
    )
    return -K_solve(rhs)


def _gram_solver(A_eff, lam=0.0):
    n = A_eff.shape[1]
    G = A_eff.conj().T @ A_eff
    if lam:
        G = G + lam * np.eye(n)
    else:
        s = np.linalg.svd(A_eff, compute_uv=False)
        rank = int(np.count_nonzero(s > default_rank_tol(*A_eff.shape) * (s[0] if s.size else 0)))
        if rank < n:
            raise RankDeficientError(
                f"normal equations are singular: effective matrix has rank {rank} < {n}"
            )
    return lambda rhs: np.linalg.solve(G, rhs)


def delta_d_lss(ch: ChannelSet, p: Perturbation, d_opt) -> np.ndarray:
    """First-order drift of the normal-equations solution under (dA, db, dc)."""
    d = _as_vec(d_opt)
    A_eff = ch.effective()
    dA_eff = delta_effective_matrix(p.dA, ch.c, ch.A, p.dc)
    return _lss_delta_core(A_eff, _gram_solver(A_eff), ch.b, d, dA_eff, p.db)


def delta_d_lss_components(ch: ChannelSet, p: Perturbation, d_opt):
    """The drift split into its dA-only, db-only and dc-only contributions.

    The formula is linear in the perturbation, so the three parts sum to
    :func:`delta_d_lss` of the joint perturbation (to round-off).
    """
    d = _as_vec(d_opt)
    A_eff = ch.effective()
    solve = _gram_solver(A_eff)
    zero_m = np.zeros(ch.m, complex)
    zero_mat = np.zeros((ch.m, ch.n), complex)
    from_A = _lss_delta_core(A_eff, solve, ch.b, d, effective_matrix(p.dA, ch.c), zero_m)
    from_b = _lss_delta_core(A_eff, solve, ch.b, d, zero_mat, p.db)
    from_c = _lss_delta_core(A_eff, solve, ch.b, d, effective_matrix(ch.A, p.dc), zero_m)
    return from_A, from_b, from_c


def delta_d_ridge(ch: ChannelSet, p: Perturbation, d_opt, lam: float) -> np.ndarray:
    """First-order drift of the ridge solution; the shift lam I keeps the
    Gram matrix invertible for any shape."""
    if lam <= 0:
        raise ValueError("lam must be positive for the ridge sensitivity")
    d = _as_vec(d_opt)
    A_eff = ch.effective()
    dA_eff = delta_effective_matrix(p.dA, ch.c, ch.A, p.dc)
    return _lss_delta_core(A_eff, _gram_solver(A_eff, lam), ch.b, d, dA_eff, p.db)


def delta_d_pinv(pinv_matrix: np.ndarray, d_opt, p: Perturbation, ch: ChannelSet) -> np.ndarray:
    """Complete first-order drift of the minimum-norm solution d = -P b.

    Uses the full differential of the pseudoinverse, so the estimate stays
    second-order accurate on rank-deficient and rectangular systems::

        dd = -P db - P dA_eff d - P P^H dA_eff^H r + (I - P A_eff) dA_eff^H P^H d

    with r = b + A_eff d the nominal residual.  The last two terms vanish
    on square full-rank systems; the cheap update path in
    :func:`apply_correction` omits them because they lie where A_eff has no
    effect on the received signal at leading order.
    """
    P = np.asarray(pinv_matrix, dtype=complex)
    d = _as_vec(d_opt)
    A_eff = ch.effective()
    dA_eff = delta_effective_matrix(p.dA, ch.c, ch.A, p.dc)
    r = ch.b + A_eff @ d
    core = -P @ p.db - P @ (dA_eff @ d)
    residual_term = -P @ (P.conj().T @ (dA_eff.conj().T @ r))
    w = dA_eff.conj().T @ (P.conj().T @ d)
    null_term = w - P @ (A_eff @ w)
    return core + residual_term + null_term


def delta_soft_threshold(d_i, dd_i, lam: float, tie_tol: float | None = None):
    """First-order change of the complex soft threshold at d_i under dd_i.

    Three regimes, separated by a tolerance band around |d_i| = lam:
    above the threshold the output follows the full differential of
    (1 - lam/|d|) d; below it the output is pinned at zero; on the tie the
    one-sided derivative admits only outward magnitude growth.  At lam = 0
    the map is the identity, so the change is dd_i itself.

    Accepts scalars or arrays (applied entrywise).
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if tie_tol is None:
        tie_tol = 1e-9 * max(1.0, lam)
    elif tie_tol <= 0:
        raise ValueError("tie_tol must be positive")
    d = np.asarray(d_i, dtype=complex)
    dd = np.asarray(dd_i, dtype=complex)
    scalar = d.ndim == 0 and dd.ndim == 0
    d, dd = np.atleast_1d(d), np.atleast_1d(dd)
    mag = np.abs(d)
    safe = np.where(mag > 0, mag, 1.0)

    # |d| > lam: d - lam d/|d| differentiated in full (magnitude and phase)
    above = dd - lam * (dd / (2 * safe) - d**2 * np.conj(dd) / (2 * safe**3))
    # tie band: outward magnitude growth only, along the phase of d
    grow = np.maximum(np.real(np.conj(d) * dd) / safe, 0.0)
    tie = grow * d / safe
    out = np.where(
        mag > lam + tie_tol,
        above,
        np.where(np.abs(mag - lam) <= tie_tol, tie, 0.0),
    )
    if lam == 0:
        # the lam = 0 map is the identity, origin included
        out = np.where(mag == 0, dd, out)
    if scalar:
        return complex(out[0])
    return out


def delta_d_lasso(ch: ChannelSet, p: Perturbation, lam: float,
                  tie_tol: float | None = None) -> np.ndarray:
    """First-order lasso drift: propagate the unregularised drift through
    the soft threshold, entry by entry.

    Exact (to first order) only when the effective matrix has orthonormal
    columns, where the lasso solution is the thresholded least-squares
    solution; other geometries get a warning and a heuristic estimate.
    """
    A_eff = ch.effective()
    G = A_eff.conj().T @ A_eff
    if np.abs(G - np.eye(ch.n)).max() > 1e-8:
        warnings.warn(
            "effective matrix columns are not orthonormal; the thresholded "
            "drift estimate is heuristic outside that regime",
            stacklevel=2,
        )
    d_ls = -np.linalg.solve(G, A_eff.conj().T @ ch.b)
    dd_ls = delta_d_lss(ch, p, d_ls)
    return np.asarray(delta_soft_threshold(d_ls, dd_ls, lam, tie_tol))


def delta_f_lss(ch: ChannelSet, p: Perturbation, d) -> float:
    """First-order change of the received power ||b + A_eff d||^2 at fixed d:
    2 Re(r^H (db + dA_eff d))."""
    dv = _as_vec(d)
    r = ch.b + ch.effective() @ dv
    dA_eff = delta_effective_matrix(p.dA, ch.c, ch.A, p.dc)
    return float(2.0 * np.real(np.vdot(r, p.db + dA_eff @ dv)))


def delta_f_lss_components(ch: ChannelSet, p: Perturbation, d):
    """(from_A, from_b, from_c) contributions; they sum to
    :func:`delta_f_lss` because the expression is linear in the
    perturbation."""
    dv = _as_vec(d)
    r = ch.b + ch.effective() @ dv
    from_b = float(2.0 * np.real(np.vdot(r, p.db)))
    from_A = float(2.0 * np.real(np.vdot(r, effective_matrix(p.dA, ch.c) @ dv)))
    from_c = float(2.0 * np.real(np.vdot(r, effective_matrix(ch.A, p.dc) @ dv)))
    return from_A, from_b, from_c


def delta_f_lss_quadratic(ch: ChannelSet, p: Perturbation, d) -> float:
    """The second-order completion ||db + dA_eff d||^2 of the power change."""
    dv = _as_vec(d)
    dA_eff = delta_effective_matrix(p.dA, ch.c, ch.A, p.dc)
    e = p.db + dA_eff @ dv
    return float(np.real(np.vdot(e, e)))


def true_drift(spec: SolverSpec, ch: ChannelSet, p: Perturbation) -> np.ndarray:
    """Exact drift oracle: re-solve on the perturbed channels and subtract."""
    d_nom = solve_channel(spec, ch).vector
    d_pert = solve_channel(spec, apply_perturbation(ch, p)).vector
    return d_pert - d_nom


def first_order_correct(d, dd, mode: str = "active") -> RisVector:
    """Move the stale solution by its estimated drift: d + dd, clipped back
    to the unit polydisc in passive mode."""
    dv = _as_vec(d)
    dd = np.asarray(dd, dtype=complex)
    if dd.shape != dv.shape:
        raise ValueError(f"length mismatch: d has {dv.size} entries, dd has {dd.size}")
    corrected = dv + dd
    if mode == "passive":
        return RisVector(clip_unit(corrected), mode="passive")
    if mode != "active":
        raise ValueError(f"mode must be 'active' or 'passive', got {mode!r}")
    return RisVector(corrected)


@dataclass
class CorrectionCache:
    """Operators retained from a nominal solve so later updates need only
    matrix-vector products."""

    method: str
    ch: ChannelSet
    A_eff: np.ndarray
    d: np.ndarray
    residual: np.ndarray
    operator: np.ndarray  # inverse Gram matrix (lss/ridge) or pseudoinverse (pinv)
    lam: float = 0.0


def build_correction_cache(method: str, ch: ChannelSet, lam: float = 0.0,
                           rank_tol: float | None = None,
                           counter: MatvecCounter | None = None) -> CorrectionCache:
    """Solve from scratch, forming the (pseudo)inverse explicitly so the
    update path can treat it as an available matrix.  Counts one inversion."""
    if method not in CORRECTABLE_METHODS:
        raise ValueError(
            f"method {method!r} has no first-order update path; expected one of "
            f"{CORRECTABLE_METHODS}"
        )
    A_eff = ch.effective()
    n = ch.n
    if method == "pinv":
        op = pinv(A_eff, rank_tol)
        if counter is not None:
            counter.add_inverse()
        d = -op @ ch.b
    else:
        if method == "ridge" and lam <= 0:
            raise ValueError("ridge update requires lam > 0")
        s = np.linalg.svd(A_eff, compute_uv=False)
        if method == "lss":
            rank = int(np.count_nonzero(
                s > default_rank_tol(*A_eff.shape) * (s[0] if s.size else 0)))
            if rank < n:
                raise RankDeficientError(
                    f"normal equations are singular: effective matrix has rank {rank} < {n}"
                )
        G = A_eff.conj().T @ A_eff
        if method == "ridge":
            G = G + lam * np.eye(n)
        op = np.linalg.inv(G)
        if counter is not None:
            counter.add_inverse()
        d = -op @ (A_eff.conj().T @ ch.b)
    residual = ch.b + A_eff @ d
    return CorrectionCache(method, ch, A_eff, d, residual,
                           op, lam if method == "ridge" else 0.0)


def apply_correction(cache: CorrectionCache, p: Perturbation,
                     counter: MatvecCounter | None = None) -> np.ndarray:
    """First-order solution update from cached operators; the counted
    product sequences are documented in the module docstring (5 for the
    pseudoinverse, 6 for the normal-equations and ridge paths)."""
    count = counter.add_matvec if counter is not None else (lambda k=1: None)
    A, c, b = cache.ch.A, cache.ch.c, cache.ch.b
    d = cache.d
    u1 = p.dA @ (c * d)
    count()
    u2 = A @ (p.dc * d)
    count()
    if cache.method == "pinv":
        P = cache.operator
        t = P @ p.db
        count()
        v1 = P @ u1
        count()
        v2 = P @ u2
        count()
        return -t - v1 - v2
    A_eff, r, K = cache.A_eff, cache.residual, cache.operator
    w = A_eff.conj().T @ (p.db + u1 + u2)
    count()
    s1 = np.conj(c) * (p.dA.conj().T @ r)
    count()
    s2 = np.conj(p.dc) * (A.conj().T @ r)
    count()
    dd = -(K @ (w + s1 + s2))
    count()
    return dd


def count_correction_cost(method: str, m: int = 8, n: int = 8,
                          lam: float = 0.1, seed: int = 0) -> MatvecCounter:
    """Run the instrumented update on a representative seeded instance and
    return its counter; asserts the documented budget (at most 6 products
    for the normal-equations and ridge paths, 5 for the pseudoinverse, and
    no inversions)."""
    if method not in CORRECTABLE_METHODS:
        raise ValueError(
            f"method {method!r} has no first-order update path; expected one of "
            f"{CORRECTABLE_METHODS}"
        )
    from .channels import gen_channels, gen_perturbation

    ch = gen_channels(m, n, seed)
    p = gen_perturbation(m, n, 1e-3, seed + 1)
    cache = build_correction_cache(method, ch, lam=lam if method == "ridge" else 0.0)
    counter = MatvecCounter()
    apply_correction(cache, p, counter)
    budget = 5 if method == "pinv" else 6
    assert counter.matvec_count <= budget, (counter.matvec_count, budget)
    assert counter.inverse_count == 0
    return counter


def delta_d(spec: SolverSpec, ch: ChannelSet, p: Perturbation,
            d_opt=None) -> np.ndarray:
    """Dispatch the drift formula for spec.method (lss, ridge or pinv)."""
    if spec.method not in DRIFT_METHODS:
        raise ValueError(
            f"method {spec.method!r} has no closed-form drift; expected one of "
            f"{DRIFT_METHODS}"
        )
    if spec.method == "pinv":
        A_eff = ch.effective()
        P = pinv(A_eff, spec.rank_tol)
        d = -P @ ch.b if d_opt is None else _as_vec(d_opt)
        return delta_d_pinv(P, d, p, ch)
    if d_opt is None:
        d_opt = solve_channel(spec, ch).vector
    if spec.method == "ridge":
        return delta_d_ridge(ch, p, d_opt, spec.lam)
    return delta_d_lss(ch, p, d_opt)


def drift_report(spec: SolverSpec, ch: ChannelSet, p: Perturbation) -> DriftReport:
    """Compare the re-solve drift with its first-order estimate for one
    instance."""
    d_nom = solve_channel(spec, ch).vector
    d_pert = solve_channel(spec, apply_perturbation(ch, p)).vector
    true = d_pert - d_nom
    approx = delta_d(spec, ch, p, d_opt=d_nom)
    return DriftReport(
        true_drift_energy=float(np.real(np.vdot(true, true))),
        approx_drift_energy=float(np.real(np.vdot(approx, approx))),
        error_energy=float(np.real(np.vdot(true - approx, true - approx))),
        sigma_p=p.sigma_p,
        method=spec.tag,
    )
