"""Small dense real linear algebra.

Everything here works on plain ``numpy.ndarray`` values of modest order
(n up to a few tens). The Lyapunov solvers vectorize the equation into an
n^2 x n^2 linear system, which is exact and easy to check at these sizes.
"""

from typing import NamedTuple

import numpy as np

from .errors import InfeasibleError, InputError, NumericError

__all__ = [
    "EigenDecomposition",
    "as_matrix",
    "as_symmetric",
    "sym_eig",
    "eigvals",
    "spectral_abscissa",
    "spectral_radius",
    "is_positive_definite",
    "solve_lyapunov_continuous",
    "solve_lyapunov_discrete",
    "expm",
    "min_scaling_mu",
]

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100

# Pade(6,6) is accurate to double precision for ||X||_1 below ~0.5.
_PADE6_THETA = 0.5
_PADE6_COEFS = (1.0, 1 / 2, 5 / 44, 1 / 66, 1 / 792, 1 / 15840, 1 / 665280)


class EigenDecomposition(NamedTuple):
    """Eigenvalues in ascending order and matching orthonormal columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_matrix(a, name="matrix", square=False):
    """Coerce ``a`` to a finite 2-D float array."""
    m = np.array(a, dtype=float)
    if m.ndim != 2 or m.size == 0:
        raise InputError(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InputError(f"{name} has non-finite entries")
    if square and m.shape[0] != m.shape[1]:
        raise InputError(f"{name} must be square, got shape {m.shape}")
    return m


def as_symmetric(s, name="matrix", tol=1e-9):
    """Coerce to a square array and symmetrize it.

    Inputs further than ``tol`` (relative) from symmetric are rejected.
    """
    m = as_matrix(s, name, square=True)
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > tol * scale:
        raise InputError(f"{name} is not symmetric")
    return 0.5 * (m + m.T)


def sym_eig(s):
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi.

    Parameters
    ----------
    s : (n, n) array_like
        Symmetric matrix with finite entries.

    Returns
    -------
    EigenDecomposition
        Ascending eigenvalues and an orthonormal eigenvector matrix whose
        columns pair with them.
    """
    a = as_symmetric(s, "S")
    n = a.shape[0]
    v = np.eye(n)
    norm = np.linalg.norm(a)
    if norm == 0.0:
        return EigenDecomposition(np.zeros(n), v)

    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= JACOBI_TOL * norm:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                sn = t * c
                # a <- J^T a J on rows/columns p, q
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - sn * aq
                a[:, q] = sn * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - sn * aq
                a[q, :] = sn * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - sn * vq
                v[:, q] = sn * vp + c * vq
    else:
        raise NumericError("Jacobi eigensolver did not converge")

    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return EigenDecomposition(w[order], v[:, order])


def eigvals(a):
    """Eigenvalues of a general real square matrix (complex array)."""
    m = as_matrix(a, "A", square=True)
    if m.shape == (1, 1):
        return m[0].astype(complex)
    if m.shape == (2, 2):
        tr = m[0, 0] + m[1, 1]
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        disc = np.sqrt(complex(tr * tr / 4.0 - det))
        return np.array([tr / 2.0 - disc, tr / 2.0 + disc])
    return np.linalg.eigvals(m).astype(complex)


def spectral_abscissa(a):
    """Largest real part of the eigenvalues of ``a``."""
    return float(np.max(eigvals(a).real))


def spectral_radius(a):
    """Largest eigenvalue modulus of ``a``."""
    return float(np.max(np.abs(eigvals(a))))


def is_positive_definite(s, margin=0.0):
    """True iff the smallest eigenvalue of ``s`` exceeds ``margin``."""
    return bool(sym_eig(s).eigenvalues[0] > margin)


def _check_lyap_args(a, q):
    a = as_matrix(a, "A", square=True)
    q = as_symmetric(q, "Q")
    if q.shape != a.shape:
        raise InputError(f"A {a.shape} and Q {q.shape} have different orders")
    return a, q


def _solve_vectorized(op, q):
    n = q.shape[0]
    try:
        x = np.linalg.solve(op, -q.reshape(n * n, order="F"))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"singular Lyapunov operator: {exc}") from None
    p = x.reshape((n, n), order="F")
    return 0.5 * (p + p.T)


def solve_lyapunov_continuous(a, q):
    """Solve ``A^T P + P A = -Q`` for symmetric ``P``.

    ``A`` must be Hurwitz; otherwise :class:`InfeasibleError` is raised
    with the offending eigenvalue attached.
    """
    a, q = _check_lyap_args(a, q)
    n = a.shape[0]
    lam = eigvals(a)
    worst = lam[np.argmax(lam.real)]
    if worst.real >= 0.0:
        raise InfeasibleError(f"A is not Hurwitz (eigenvalue {worst:.6g})", eigenvalue=worst)
    eye = np.eye(n)
    # vec(A^T P) = (I kron A^T) vec(P), vec(P A) = (A^T kron I) vec(P)
    op = np.kron(eye, a.T) + np.kron(a.T, eye)
    return _solve_vectorized(op, q)


def solve_lyapunov_discrete(a, q):
    """Solve ``A^T P A - P = -Q`` for symmetric ``P``.

    Requires spectral radius of ``A`` below one.
    """
    a, q = _check_lyap_args(a, q)
    n = a.shape[0]
    lam = eigvals(a)
    worst = lam[np.argmax(np.abs(lam))]
    if abs(worst) >= 1.0:
        raise InfeasibleError(
            f"A is not Schur stable (eigenvalue {worst:.6g}, |.|={abs(worst):.6g})",
            eigenvalue=worst,
        )
    op = np.kron(a.T, a.T) - np.eye(n * n)
    return _solve_vectorized(op, q)


def expm(a, t=1.0):
    """Matrix exponential ``exp(A t)`` by scaling and squaring.

    Uses a diagonal Pade(6,6) approximant after halving ``A t`` until its
    1-norm drops below 0.5.
    """
    a = as_matrix(a, "A", square=True)
    t = float(t)
    if not np.isfinite(t):
        raise InputError("t must be finite")
    x = a * t
    n = x.shape[0]
    norm = np.linalg.norm(x, 1)
    s = 0
    if norm > _PADE6_THETA:
        s = int(np.ceil(np.log2(norm / _PADE6_THETA)))
        x = x / (2.0**s)

    eye = np.eye(n)
    x2 = x @ x
    x4 = x2 @ x2
    x6 = x4 @ x2
    c = _PADE6_COEFS
    even = c[0] * eye + c[2] * x2 + c[4] * x4 + c[6] * x6
    odd = x @ (c[1] * eye + c[3] * x2 + c[5] * x4)
    r = np.linalg.solve(even - odd, even + odd)
    for _ in range(s):
        r = r @ r
    return r


def min_scaling_mu(p_p, p_q):
    """Smallest ``mu`` with ``P_p <= mu * P_q`` in the Loewner order.

    Computed as the largest eigenvalue of ``L^{-1} P_p L^{-T}`` where
    ``P_q = L L^T``. The result may be below one when ``P_p < P_q``.
    """
    pp = as_symmetric(p_p, "P_p")
    pq = as_symmetric(p_q, "P_q")
    if pp.shape != pq.shape:
        raise InputError(f"P_p {pp.shape} and P_q {pq.shape} have different orders")
    for name, m in (("P_p", pp), ("P_q", pq)):
        if not is_positive_definite(m):
            raise InputError(f"{name} is not positive definite")
    low = np.linalg.cholesky(pq)
    y = np.linalg.solve(low, pp)
    g = np.linalg.solve(low, y.T)
    return float(sym_eig(0.5 * (g + g.T)).eigenvalues[-1])
