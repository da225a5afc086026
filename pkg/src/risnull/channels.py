"""Complex channel triples for an RIS-assisted link, and the received-signal objective.

The link is described by three complex channel responses: the direct path
``b`` (transmitter to receiver, one entry per receive antenna), the
reflected path ``A`` (RIS to receiver, one column per RIS element) and the
illumination ``c`` (transmitter to RIS).  With reflection coefficients
``d`` on the RIS elements, the receiver sees ``(b + (A * c) d) x_t + w``.

All generators are pure functions of their dimensions and seed; values are
plain immutable-by-convention numpy arrays and safe to share across
threads.  Parallel Monte Carlo should use one seed per trial.
"""

from dataclasses import dataclass

import numpy as np

_SEED_MASK = (1 << 64) - 1


def complex_normal(rng: np.random.Generator, shape=()) -> np.ndarray:
    """Draw i.i.d. circularly-symmetric complex normal entries with unit variance.

    Real and imaginary parts are independent N(0, 1/2), so E|z|^2 = 1.
    """
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)


@dataclass(eq=False)
class ChannelSet:
    """One channel state: A is m-by-n, b has length m, c has length n.

    Freshly generated sets satisfy ||b|| <= 1, ||c|| <= 1 and unit-norm
    columns of A; perturbed sets (see :func:`apply_perturbation`) need not.
    """

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=complex)
        self.b = np.asarray(self.b, dtype=complex)
        self.c = np.asarray(self.c, dtype=complex)
        if self.A.ndim != 2 or self.b.ndim != 1 or self.c.ndim != 1:
            raise ValueError("A must be a 2-D matrix, b and c 1-D vectors")
        if self.A.shape != (self.b.size, self.c.size):
            raise ValueError(
                f"inconsistent dimensions: A is {self.A.shape}, "
                f"b has length {self.b.size}, c has length {self.c.size}"
            )

    @property
    def m(self) -> int:
        return self.b.size

    @property
    def n(self) -> int:
        return self.c.size

    def effective(self) -> np.ndarray:
        """The m-by-n matrix acting on d, i.e. A with column j scaled by c_j."""
        return effective_matrix(self.A, self.c)


@dataclass(eq=False)
class Perturbation:
    """Additive offsets (dA, db, dc) for one imperfect-CSI draw.

    Generated perturbations carry ||dA||_F = ||db|| = ||dc|| = sigma_p;
    hand-built ones (e.g. db-only probes) may use any norms.
    """

    dA: np.ndarray
    db: np.ndarray
    dc: np.ndarray
    sigma_p: float = 0.0

    def __post_init__(self):
        self.dA = np.asarray(self.dA, dtype=complex)
        self.db = np.asarray(self.db, dtype=complex)
        self.dc = np.asarray(self.dc, dtype=complex)
        if self.dA.shape != (self.db.size, self.dc.size):
            raise ValueError(
                f"inconsistent dimensions: dA is {self.dA.shape}, "
                f"db has length {self.db.size}, dc has length {self.dc.size}"
            )
        if self.sigma_p < 0:
            raise ValueError("sigma_p must be nonnegative")

    @classmethod
    def zero(cls, m: int, n: int) -> "Perturbation":
        return cls(np.zeros((m, n), complex), np.zeros(m, complex), np.zeros(n, complex), 0.0)

    def negate(self) -> "Perturbation":
        return Perturbation(-self.dA, -self.db, -self.dc, self.sigma_p)


@dataclass(eq=False)
class RisVector:
    """Reflection coefficients of the n RIS elements (diagonal of the
    adjustment matrix).  Passive-mode vectors must satisfy |d_i| <= 1."""

    d: np.ndarray
    mode: str = "active"

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=complex)
        if self.d.ndim != 1:
            raise ValueError("d must be a 1-D vector")
        if self.mode not in ("active", "passive"):
            raise ValueError(f"mode must be 'active' or 'passive', got {self.mode!r}")
        if self.mode == "passive" and np.abs(self.d).max(initial=0.0) > 1 + 1e-12:
            raise ValueError("passive-mode coefficients must have magnitude <= 1")

    @property
    def n(self) -> int:
        return self.d.size


def _as_vector(d) -> np.ndarray:
    """Accept a RisVector or a bare array."""
    return np.asarray(getattr(d, "d", d), dtype=complex)


def gen_channels(m: int, n: int, seed: int) -> ChannelSet:
    """Draw one channel set, deterministically from the seed.

    Entries are unit-variance complex normal; b and c are rescaled to unit
    norm when the raw draw exceeds it, and every column of A is rescaled to
    unit norm, so no path injects gain.  Draw order is b, A, c.
    """
    if m < 1 or n < 1:
        raise ValueError(f"dimensions must be positive, got m={m}, n={n}")
    rng = np.random.default_rng(int(seed) & _SEED_MASK)
    b = complex_normal(rng, m)
    A = complex_normal(rng, (m, n))
    c = complex_normal(rng, n)

    nb = np.linalg.norm(b)
    if nb > 1.0:
        b = b / nb
    col = np.linalg.norm(A, axis=0)
    A = A / np.where(col > 0, col, 1.0)
    nc = np.linalg.norm(c)
    if nc > 1.0:
        c = c / nc
    return ChannelSet(A, b, c)


def gen_perturbation(m: int, n: int, sigma_p: float, seed: int) -> Perturbation:
    """Draw (dA, db, dc) with each component rescaled to norm exactly sigma_p.

    sigma_p = 0 yields all-zero components.  Draw order is dA, db, dc.
    """
    if m < 1 or n < 1:
        raise ValueError(f"dimensions must be positive, got m={m}, n={n}")
    if sigma_p < 0:
        raise ValueError(f"sigma_p must be nonnegative, got {sigma_p}")
    if sigma_p == 0:
        return Perturbation.zero(m, n)
    rng = np.random.default_rng(int(seed) & _SEED_MASK)
    dA = complex_normal(rng, (m, n))
    db = complex_normal(rng, m)
    dc = complex_normal(rng, n)
    dA *= sigma_p / np.linalg.norm(dA)
    db *= sigma_p / np.linalg.norm(db)
    dc *= sigma_p / np.linalg.norm(dc)
    return Perturbation(dA, db, dc, float(sigma_p))


def apply_perturbation(ch: ChannelSet, p: Perturbation) -> ChannelSet:
    """Return the perturbed channel set (A+dA, b+db, c+dc).

    No re-normalisation is applied: the perturbed set is the ground truth
    in imperfect-CSI experiments.
    """
    if ch.A.shape != p.dA.shape:
        raise ValueError(f"shape mismatch: A is {ch.A.shape}, dA is {p.dA.shape}")
    return ChannelSet(ch.A + p.dA, ch.b + p.db, ch.c + p.dc)


def effective_matrix(A: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Scale column j of A by c_j, collapsing the diagonal RIS response into
    one matrix so that (A * c) d == A (c * d)."""
    A = np.asarray(A, dtype=complex)
    c = np.asarray(c, dtype=complex)
    if A.ndim != 2 or c.ndim != 1 or A.shape[1] != c.size:
        raise ValueError(
            f"length mismatch: A has {A.shape[1] if A.ndim == 2 else '?'} columns, "
            f"c has length {c.size}"
        )
    return A * c[np.newaxis, :]


def signal_level(ch: ChannelSet, d) -> float:
    """Noiseless received power ||b + (A * c) d||^2 (linear scale).

    This is the quantity the solvers minimise; dB conversion and detector
    SNR are reporting concerns handled by the experiment layer.
    """
    dv = _as_vector(d)
    if dv.size != ch.n:
        raise ValueError(f"d has length {dv.size}, expected {ch.n}")
    r = ch.b + ch.effective() @ dv
    return float(np.real(np.vdot(r, r)))


def received_signal(ch: ChannelSet, d, x_t: complex, noise: np.ndarray) -> np.ndarray:
    """One received sample: (b + (A * c) d) x_t + noise."""
    dv = _as_vector(d)
    if dv.size != ch.n:
        raise ValueError(f"d has length {dv.size}, expected {ch.n}")
    noise = np.asarray(noise, dtype=complex)
    if noise.shape != (ch.m,):
        raise ValueError(f"noise has shape {noise.shape}, expected ({ch.m},)")
    return (ch.b + ch.effective() @ dv) * complex(x_t) + noise
