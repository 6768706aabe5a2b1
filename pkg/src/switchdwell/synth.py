"""State-feedback gain synthesis and validation.

Single-input modes are placed with Ackermann's formula at real, distinct
poles inside the region required by the decay rate; the LMI variables
``U_p = P_p^{-1}`` and ``T_p = K_p U_p`` are recovered afterwards from the
closed-loop certificate and can be checked against the gain LMIs directly.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .certify import certify_linear
from .dwell import SBASDT
from .errors import InputError, SynthesisError, UnsupportedError
from .model import CONTINUOUS

# placement constants; recorded in every result
DELTA = 0.5
RATIO_STEP = 0.5
DISCRETE_SHRINK = 0.8
DISCRETE_RATIO = 0.9
CONTROLLABILITY_RCOND = 1e-10


def controllability_matrix(A, B):
    n = A.shape[0]
    cols = [B]
    for _ in range(n - 1):
        cols.append(A @ cols[-1])
    return np.hstack(cols)


def target_poles(lam, n, time_domain):
    """Real distinct closed-loop poles for decay rate ``lam``.

    Continuous: ``-(lam/2 + DELTA) * (1, 1.5, 2, ...)``.
    Discrete: ``sqrt(1 - lam) * DISCRETE_SHRINK * (1, 0.9, 0.81, ...)``.
    """
    if time_domain == CONTINUOUS:
        base = lam / 2.0 + DELTA
        return np.array([-base * (1.0 + RATIO_STEP * i) for i in range(n)])
    base = math.sqrt(1.0 - lam) * DISCRETE_SHRINK
    return np.array([base * DISCRETE_RATIO**i for i in range(n)])


def ackermann(A, B, poles, mode=None):
    """Gain ``K`` (1 x n) such that ``A + B K`` has eigenvalues ``poles``.

    Note the sign: the closed loop is ``A + B K``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    n = A.shape[0]
    if B.shape[1] != 1:
        raise UnsupportedError(f"Ackermann placement needs a single input, got {B.shape[1]}")
    ctrb = controllability_matrix(A, B)
    s = np.linalg.svd(ctrb, compute_uv=False)
    if s[0] == 0.0 or s[-1] / s[0] < CONTROLLABILITY_RCOND:
        raise SynthesisError(f"mode {mode}: (A, B) is not controllable", mode=mode)
    coeffs = np.real(np.poly(poles))
    phi = np.zeros_like(A)
    power = np.eye(n)
    for c in coeffs[::-1]:
        phi = phi + c * power
        power = power @ A
    e_n = np.zeros(n)
    e_n[-1] = 1.0
    row = np.linalg.solve(ctrb.T, e_n)
    return -(row @ phi).reshape(1, n)


@dataclass(frozen=True)
class SynthesisResult:
    """Gains ``K_p`` with the LMI variables ``U_p`` and ``T_p`` and the
    closed-loop certificate they came from."""

    gains: dict
    U: dict
    T: dict
    certificate: object
    poles: dict
    constants: dict = field(default_factory=dict)

    def gains_document(self):
        return {str(p): self.gains[p].tolist() for p in sorted(self.gains)}

    def to_dict(self):
        return {
            "gains": self.gains_document(),
            "U": {str(p): self.U[p].tolist() for p in sorted(self.U)},
            "T": {str(p): self.T[p].tolist() for p in sorted(self.T)},
            "poles": {str(p): self.poles[p].tolist() for p in sorted(self.poles)},
            "constants": self.constants,
            "certificate": self.certificate.to_dict(),
        }


def synthesize(system, lam, scheme=SBASDT):
    """Stabilizing gains for every mode at the requested decay rates.

    Returns
    -------
    SynthesisResult
        Its certificate is for ``A_p + B_p K_p``; ``U_p = P_p^{-1}`` and
        ``T_p = K_p U_p``.
    """
    if not system.is_linear:
        raise InputError("synthesis needs linear modes")
    if system.input_dim != 1:
        raise UnsupportedError(
            f"only single-input synthesis is implemented (input_dim = {system.input_dim})"
        )
    gains, poles = {}, {}
    for p in system.mode_ids:
        if p not in lam:
            raise InputError(f"no decay rate for mode {p}", f"lambda.{p}")
        poles[p] = target_poles(float(lam[p]), system.state_dim, system.time_domain)
        gains[p] = ackermann(system.A(p), system.B(p), poles[p], mode=p)
    cert = certify_linear(system.closed_loop(gains), lam, scheme)
    U = {p: np.linalg.inv(cert.P[p]) for p in system.mode_ids}
    U = {p: 0.5 * (u + u.T) for p, u in U.items()}
    T = {p: gains[p] @ U[p] for p in system.mode_ids}
    constants = {
        "delta": DELTA,
        "ratio_step": RATIO_STEP,
        "discrete_shrink": DISCRETE_SHRINK,
        "discrete_ratio": DISCRETE_RATIO,
    }
    return SynthesisResult(gains, U, T, cert, poles, constants)


def gain_lmi_margin(system, p, U, T, lam):
    """Largest eigenvalue of the gain LMI for mode ``p`` (should be <= 0).

    Continuous: ``A U + B T + U A^T + T^T B^T + lam U``.
    Discrete: the block matrix ``[[-U, A U + B T], [*, -(1 - lam) U]]``.
    """
    A, B = system.A(p), system.B(p)
    M = A @ U + B @ T
    if system.time_domain == CONTINUOUS:
        lmi = M + M.T + lam * U
    else:
        lmi = np.block([[-U, M], [M.T, -(1.0 - lam) * U]])
    return float(linalg.sym_eig(0.5 * (lmi + lmi.T)).eigenvalues[-1])


@dataclass(frozen=True)
class GainReport:
    """Per-mode closed-loop spectral measure against its decay-rate bound."""

    time_domain: str
    measure: dict
    bound: dict
    eigenvalues: dict

    @property
    def per_mode(self):
        return {p: self.measure[p] < self.bound[p] for p in self.measure}

    @property
    def passed(self):
        return all(self.per_mode.values())

    def to_dict(self):
        name = "spectral_abscissa" if self.time_domain == CONTINUOUS else "spectral_radius"
        return {
            "passed": self.passed,
            "modes": {
                str(p): {
                    name: self.measure[p],
                    "bound": self.bound[p],
                    "passed": self.per_mode[p],
                    "eigenvalues": [[z.real, z.imag] for z in self.eigenvalues[p]],
                }
                for p in sorted(self.measure)
            },
        }


def parse_gains(document, system):
    """Gains from ``{mode: [[row], ...]}``; a flat row is accepted for m = 1."""
    if not isinstance(document, dict):
        raise InputError("gains document must be an object")
    gains = {}
    for k, v in document.items():
        try:
            p = int(k)
        except ValueError:
            raise InputError(f"expected a mode id, got {k!r}", f"gains.{k}") from None
        try:
            g = np.atleast_2d(np.array(v, dtype=float))
        except (TypeError, ValueError):
            raise InputError("gain must be numeric", f"gains.{k}") from None
        gains[p] = g
    for p in system.mode_ids:
        if p not in gains:
            raise InputError(f"no gain for mode {p}", f"gains.{p}")
    return gains


def validate_gains(system, gains, lam):
    """Check each closed loop ``A_p + B_p K_p`` against its decay rate.

    Continuous time compares the spectral abscissa with ``-lam_p / 2``;
    discrete time compares the spectral radius with ``sqrt(1 - lam_p)``.
    Either bound is exactly the existence condition for a quadratic
    Lyapunov function decaying at ``lam_p``.
    """
    measure, bound, eig = {}, {}, {}
    for p in system.mode_ids:
        k = np.atleast_2d(np.asarray(gains[p], dtype=float))
        if k.shape != (system.input_dim, system.state_dim):
            raise InputError(
                f"gain must be {system.input_dim}x{system.state_dim}, got {k.shape}",
                f"gains.{p}",
            )
        acl = system.A(p) + system.B(p) @ k
        ev = linalg.eigvals(acl)
        eig[p] = ev
        if system.time_domain == CONTINUOUS:
            measure[p] = float(np.max(ev.real))
            bound[p] = -float(lam[p]) / 2.0
        else:
            measure[p] = float(np.max(np.abs(ev)))
            bound[p] = math.sqrt(1.0 - float(lam[p]))
    return GainReport(system.time_domain, measure, bound, eig)
