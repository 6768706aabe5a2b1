"""Multiple-Lyapunov-function certificates for switched linear systems.

For each mode a quadratic ``V_p(x) = x^T P_p x`` is built that decays at
the requested rate; jump gains ``mu_{p|q}`` are then the smallest scalars
with ``P_p <= mu P_q``. The decay inequality
``A^T P + P A <= -lam P`` holds for some ``P > 0`` exactly when
``A + (lam/2) I`` is Hurwitz, so ``P`` is taken as the solution of the
shifted Lyapunov equation with ``Q = I`` (discrete time: ``A / sqrt(1 - lam)``
Schur stable). That ``P`` is one feasible choice; nothing is optimized.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .dwell import ALL, MDADT, SBAPDT, SBASDT, DwellPolicy, key_label, normalize_scheme
from .errors import InfeasibleError, InputError
from .model import CONTINUOUS, DISCRETE, pair_key, parse_pair

DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class StabilityCertificate:
    """Per-mode Lyapunov matrices with their jump gains and thresholds.

    ``decay_margins[p]`` is the largest eigenvalue of
    ``A^T P + P A + lam P`` (or ``A^T P A - P + lam P``), expected negative.
    ``jump_margins[(p, q)]`` is the largest eigenvalue of ``P_p - mu P_q``.
    """

    scheme: str
    time_domain: str
    lam: dict
    P: dict
    mu_table: dict
    threshold_table: dict
    decay_margins: dict
    jump_margins: dict
    metadata: dict = field(default_factory=dict)

    @property
    def modes(self):
        return sorted(self.P)

    def V(self, p, x):
        x = np.asarray(x, dtype=float)
        return float(x @ self.P[p] @ x)

    def k1(self, p):
        """Lower quadratic bound coefficient: ``V_p(x) >= k1 * |x|^2``."""
        return float(linalg.sym_eig(self.P[p]).eigenvalues[0])

    def k2(self, p):
        """Upper quadratic bound coefficient: ``V_p(x) <= k2 * |x|^2``."""
        return float(linalg.sym_eig(self.P[p]).eigenvalues[-1])

    def policy(self, chatter=None):
        """The dwell policy implied by this certificate's scheme and mu table."""
        return DwellPolicy(
            self.scheme, dict(self.lam), _scheme_mu(self.scheme, self.mu_table),
            dict(chatter or {}), self.time_domain,
        )

    def to_dict(self):
        return {
            "scheme": self.scheme,
            "time_domain": self.time_domain,
            "lambda": {str(p): v for p, v in sorted(self.lam.items())},
            "P": {str(p): self.P[p].tolist() for p in self.modes},
            "mu": {pair_key(*pq): v for pq, v in sorted(self.mu_table.items())},
            "thresholds": {
                key_label(self.scheme, k): v for k, v in _sorted_items(self.threshold_table)
            },
            "margins": {
                "decay": {str(p): v for p, v in sorted(self.decay_margins.items())},
                "jump": {pair_key(*pq): v for pq, v in sorted(self.jump_margins.items())},
            },
            "bounds": {
                str(p): {"k1": self.k1(p), "k2": self.k2(p)} for p in self.modes
            },
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, doc):
        """Rebuild a certificate from :meth:`to_dict` output."""
        try:
            scheme = normalize_scheme(doc["scheme"])
            domain = doc["time_domain"]
            lam = {int(p): float(v) for p, v in doc["lambda"].items()}
            P = {int(p): np.array(m, dtype=float) for p, m in doc["P"].items()}
            mu = {parse_pair(k): float(v) for k, v in doc["mu"].items()}
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed certificate: {exc}") from None
        margins = doc.get("margins", {})
        decay = {int(p): float(v) for p, v in margins.get("decay", {}).items()}
        jump = {parse_pair(k): float(v) for k, v in margins.get("jump", {}).items()}
        policy = DwellPolicy(scheme, lam, _scheme_mu(scheme, mu), {}, domain)
        return cls(scheme, domain, lam, P, mu, policy.thresholds, decay, jump,
                   dict(doc.get("metadata", {})))


def _sorted_items(table):
    def order(kv):
        k = kv[0]
        if k == ALL:
            return (0, 0, 0)
        return (2, *k) if isinstance(k, tuple) else (1, k, 0)

    return sorted(table.items(), key=order)


def _scheme_mu(scheme, mu_table):
    """Project a pairwise mu table onto the scheme's key set."""
    if scheme in (SBASDT, SBAPDT):
        return dict(mu_table)
    if scheme == MDADT:
        out = {}
        for (p, _), v in mu_table.items():
            out[p] = max(out.get(p, 1.0), v)
        return out
    return {ALL: max(mu_table.values(), default=1.0)}


def _check_lambda(system, lam):
    missing = [p for p in system.mode_ids if p not in lam]
    if missing:
        raise InputError(f"no decay rate for modes {missing}", "lambda")
    for p in system.mode_ids:
        v = lam[p]
        if system.time_domain == CONTINUOUS and not v > 0:
            raise InputError(f"continuous decay rate must be > 0, got {v}", f"lambda.{p}")
        if system.time_domain == DISCRETE and not 0 < v < 1:
            raise InputError(f"discrete decay rate must lie in (0, 1), got {v}", f"lambda.{p}")


def decay_matrix(A, P, lam, time_domain):
    """``A^T P + P A + lam P`` (continuous) or ``A^T P A - P + lam P`` (discrete)."""
    if time_domain == CONTINUOUS:
        m = A.T @ P + P @ A + lam * P
    else:
        m = A.T @ P @ A - P + lam * P
    return 0.5 * (m + m.T)


def lyapunov_for_rate(A, lam, time_domain, mode=None):
    """Quadratic Lyapunov matrix for one mode at decay rate ``lam``.

    Raises :class:`InfeasibleError` naming ``mode`` and the eigenvalue
    that breaks the shifted stability test.
    """
    n = A.shape[0]
    if time_domain == CONTINUOUS:
        shifted = A + 0.5 * lam * np.eye(n)
        ev = linalg.eigvals(shifted)
        worst = ev[np.argmax(ev.real)]
        if worst.real >= 0.0:
            raise InfeasibleError(
                f"mode {mode}: A + (lambda/2) I has eigenvalue {worst:.6g} with "
                f"non-negative real part; decay rate {lam} is too aggressive",
                mode=mode, eigenvalue=worst,
            )
        return linalg.solve_lyapunov_continuous(shifted, np.eye(n))
    scaled = A / math.sqrt(1.0 - lam)
    ev = linalg.eigvals(scaled)
    worst = ev[np.argmax(np.abs(ev))]
    if abs(worst) >= 1.0:
        raise InfeasibleError(
            f"mode {mode}: A / sqrt(1 - lambda) has eigenvalue {worst:.6g} outside the "
            f"unit disc; decay rate {lam} is too aggressive",
            mode=mode, eigenvalue=worst,
        )
    return linalg.solve_lyapunov_discrete(scaled, np.eye(n))


def certify_linear(system, lam, scheme=SBASDT):
    """Build a :class:`StabilityCertificate` for an autonomous linear system.

    Parameters
    ----------
    system : SwitchedSystem
        Linear modes; inputs are ignored (use ``system.closed_loop`` first
        for feedback).
    lam : dict
        Decay rate per mode id.
    scheme : str
        One of ADT, MDADT, SBASDT, SBAPDT; selects the threshold keys.

    Returns
    -------
    StabilityCertificate
    """
    scheme = normalize_scheme(scheme)
    if not system.is_linear:
        raise InputError("certify_linear needs linear modes")
    _check_lambda(system, lam)
    lam = {p: float(lam[p]) for p in system.mode_ids}
    domain = system.time_domain

    P = {p: lyapunov_for_rate(system.A(p), lam[p], domain, mode=p) for p in system.mode_ids}
    decay = {
        p: float(linalg.sym_eig(decay_matrix(system.A(p), P[p], lam[p], domain)).eigenvalues[-1])
        for p in system.mode_ids
    }
    mu = {}
    jump = {}
    for p, q in system.ordered_pairs:
        mu[(p, q)] = max(1.0, linalg.min_scaling_mu(P[p], P[q]))
        jump[(p, q)] = float(linalg.sym_eig(P[p] - mu[(p, q)] * P[q]).eigenvalues[-1])

    policy = DwellPolicy(scheme, lam, _scheme_mu(scheme, mu), {}, domain)
    meta = {
        "construction": "shifted Lyapunov equation",
        "Q": "identity",
        "mu_floor": 1.0,
        "verification_tol": DEFAULT_TOL,
    }
    return StabilityCertificate(scheme, domain, lam, P, mu, policy.thresholds, decay, jump, meta)


@dataclass(frozen=True)
class MarginReport:
    """Most-violated eigenvalue per condition; a condition holds when <= its bound."""

    tol: float
    definiteness: dict
    decay: dict
    jump: dict
    bounds: dict

    def _fails(self):
        out = []
        for name, table in (("definiteness", self.definiteness), ("decay", self.decay),
                            ("jump", self.jump)):
            for key, v in table.items():
                if v > self.bounds[name][key]:
                    out.append((name, key, v))
        return out

    @property
    def failures(self):
        return self._fails()

    @property
    def passed(self):
        return not self._fails()

    def to_dict(self):
        return {
            "passed": self.passed,
            "tol": self.tol,
            "definiteness": {str(p): v for p, v in sorted(self.definiteness.items())},
            "decay": {str(p): v for p, v in sorted(self.decay.items())},
            "jump": {pair_key(*pq): v for pq, v in sorted(self.jump.items())},
            "failures": [
                {"condition": c, "key": pair_key(*k) if isinstance(k, tuple) else str(k),
                 "margin": v}
                for c, k, v in self.failures
            ],
        }


def verify_certificate(system, certificate, tol=DEFAULT_TOL):
    """Recompute every inequality of ``certificate`` against ``system``.

    Checks ``P_p > 0``, the decay condition per mode and ``P_p <= mu P_q``
    per ordered pair, each as an extreme eigenvalue compared against
    ``tol`` scaled by the norm of the matrices involved.
    """
    if sorted(certificate.P) != system.mode_ids:
        raise InputError("certificate modes do not match the system")
    n = system.state_dim
    for p, m in certificate.P.items():
        if np.shape(m) != (n, n):
            raise InputError(f"P[{p}] must be {n}x{n}, got {np.shape(m)}")
    definiteness, decay, jump = {}, {}, {}
    b_def, b_dec, b_jump = {}, {}, {}
    for p in system.mode_ids:
        P = linalg.as_symmetric(certificate.P[p], f"P[{p}]")
        scale = max(1.0, float(np.linalg.norm(P, 2)))
        definiteness[p] = -float(linalg.sym_eig(P).eigenvalues[0])
        b_def[p] = 0.0
        dm = decay_matrix(system.A(p), P, certificate.lam[p], certificate.time_domain)
        decay[p] = float(linalg.sym_eig(dm).eigenvalues[-1])
        b_dec[p] = tol * scale
    for p, q in system.ordered_pairs:
        if (p, q) not in certificate.mu_table:
            raise InputError(f"certificate has no mu for pair {pair_key(p, q)}")
        Pp = linalg.as_symmetric(certificate.P[p])
        Pq = linalg.as_symmetric(certificate.P[q])
        mu = certificate.mu_table[(p, q)]
        jump[(p, q)] = float(linalg.sym_eig(Pp - mu * Pq).eigenvalues[-1])
        b_jump[(p, q)] = tol * max(1.0, float(np.linalg.norm(Pp, 2)))
    bounds = {"definiteness": b_def, "decay": b_dec, "jump": b_jump}
    return MarginReport(tol, definiteness, decay, jump, bounds)


def envelope_bound(certificate, signal, v0, t):
    """Piecewise-exponential upper bound on ``V_sigma(t)(x(t))``.

    Unrolls the per-segment decay and the jump at every switch up to ``t``:
    ``v0 * prod(mu_{p|q}) * exp(-sum lam_p * elapsed_p)`` in continuous
    time, with ``(1 - lam_p) ** steps_p`` factors in discrete time.
    Works on arrays of ``t``.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    horizon = signal.horizon
    if np.any(t_arr < 0) or np.any(t_arr > horizon * (1 + 1e-12) + 1e-12):
        raise InputError(f"t must lie in [0, {horizon}]")
    log_env = _log_envelope(certificate, signal, t_arr)
    out = float(v0) * np.exp(log_env)
    return out if np.ndim(t) else float(out[0])


def _log_envelope(certificate, signal, t_arr):
    lam = certificate.lam
    discrete = certificate.time_domain == DISCRETE
    segs = signal.segments
    starts = signal.starts
    # log-envelope value at each segment start (after the jump)
    at_start = np.zeros(len(segs))
    acc = 0.0
    for i, (m, d) in enumerate(segs):
        if i:
            prev = segs[i - 1][0]
            key = (m, prev)
            if key not in certificate.mu_table:
                raise InputError(f"no mu for observed pair {pair_key(*key)}")
            acc += math.log(certificate.mu_table[key])
        at_start[i] = acc
        acc += _segment_log_decay(lam[m], d, discrete)
    idx = np.clip(np.searchsorted(starts, t_arr, side="right") - 1, 0, len(segs) - 1)
    out = np.empty_like(t_arr)
    for k, (i, tk) in enumerate(zip(idx, t_arr)):
        out[k] = at_start[i] + _segment_log_decay(lam[segs[i][0]], tk - starts[i], discrete)
    return out


def _segment_log_decay(lam, elapsed, discrete):
    if discrete:
        return elapsed * math.log(1.0 - lam)
    return -lam * elapsed
