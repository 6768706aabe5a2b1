"""Trajectory simulation, exponential-decay fitting, envelope checks and
switching-signal generation."""

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import linalg
from .certify import envelope_bound
from .dwell import ADT, ALL, MDADT, SBAPDT, SBASDT, threshold_table
from .errors import InputError, NumericError
from .model import CONTINUOUS, DISCRETE, SwitchingSignal

DIVERGENCE_NORM = 1e12
ENVELOPE_TOL = 1e-6
_SNAP = 1e-9


@dataclass
class Trajectory:
    """Sampled solution; switch instants are always sample times.

    At a switch instant the recorded mode is the newly activated one.
    ``V`` has one column per mode (``V[:, p - 1]``) when Lyapunov
    functions were supplied.
    """

    t: np.ndarray
    x: np.ndarray
    mode: np.ndarray
    h: float
    time_domain: str = CONTINUOUS
    V: Optional[np.ndarray] = None
    diverged: bool = False

    def __len__(self):
        return len(self.t)

    @property
    def norms(self):
        return np.linalg.norm(self.x, axis=1)

    def active_V(self):
        if self.V is None:
            raise InputError("trajectory carries no Lyapunov values")
        return self.V[np.arange(len(self.t)), self.mode - 1]

    def to_csv(self, path=None):
        """Write ``t,mode,x1..xn,V1..Vs``; returns the text when ``path`` is None."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.x.shape[1]
        header = ["t", "mode"] + [f"x{i + 1}" for i in range(n)]
        if self.V is not None:
            header += [f"V{i + 1}" for i in range(self.V.shape[1])]
        w.writerow(header)
        for k in range(len(self.t)):
            row = [repr(float(self.t[k])), int(self.mode[k])]
            row += [repr(float(v)) for v in self.x[k]]
            if self.V is not None:
                row += [repr(float(v)) for v in self.V[k]]
            w.writerow(row)
        text = buf.getvalue()
        if path is None:
            return text
        with open(path, "w", newline="") as fh:
            fh.write(text)
        return None


def _rk4_step(f, x, h):
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _eval_field(f, x, mode):
    y = np.asarray(f(x), dtype=float).reshape(x.shape)
    if not np.all(np.isfinite(y)):
        raise NumericError(f"mode {mode} evaluator returned non-finite values at x={x}")
    return y


def _step_plan(dwell, h):
    """Full steps and the trailing partial step (0 when h divides dwell)."""
    ratio = dwell / h
    k = round(ratio)
    if abs(ratio - k) <= _SNAP * max(1.0, ratio) and k >= 1:
        return int(k), 0.0
    k = int(math.floor(ratio))
    return k, dwell - k * h


def simulate(system, signal, x0, h=0.01, certificate=None, lyapunov=None):
    """Simulate ``system`` under ``signal`` from ``x0``.

    Continuous linear modes are propagated exactly with ``expm(A h)`` plus
    an exact partial step at each switch; nonlinear continuous modes use
    classic RK4 with the same step layout. Discrete systems are iterated
    directly (``h`` must be 1). The state is continuous across switches.

    Parameters
    ----------
    certificate : StabilityCertificate, optional
        Fills ``V`` with ``x^T P_p x`` for every mode.
    lyapunov : dict, optional
        Mode id -> callable ``V_p(x)``, for nonlinear systems.

    Returns
    -------
    Trajectory
        Truncated and flagged ``diverged`` once ``|x|`` exceeds 1e12.
    """
    signal.validate_for(system)
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.shape[0] != system.state_dim:
        raise InputError(f"x0 must have {system.state_dim} entries, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise InputError("x0 has non-finite entries")
    discrete = system.time_domain == DISCRETE
    if discrete:
        if h != 1:
            raise InputError("discrete-time simulation uses h = 1")
    elif not (h > 0 and math.isfinite(h)):
        raise InputError(f"step h must be positive, got {h}")

    ts, xs, ms = [0.0], [x.copy()], [signal.initial_mode]
    diverged = False
    bounds = np.concatenate(([0.0], np.cumsum(signal.dwells, dtype=float)))
    props = {}
    segs = signal.segments

    for i, (m, dwell) in enumerate(segs):
        mode = system.modes[m]
        start, stop = bounds[i], bounds[i + 1]
        label_end = segs[i + 1][0] if i + 1 < len(segs) else m
        if discrete:
            plan = [1.0] * int(dwell)
        else:
            k, rem = _step_plan(float(dwell), h)
            plan = [h] * k + ([rem] if rem > 0 else [])
        for j, step in enumerate(plan):
            if discrete:
                if mode.is_linear:
                    x = mode.A @ x
                else:
                    x = _eval_field(mode.f, x, m)
            elif mode.is_linear:
                key = (m, step)
                if key not in props:
                    props[key] = linalg.expm(mode.A, step)
                x = props[key] @ x
            else:
                x = _rk4_step(lambda z: _eval_field(mode.f, z, m), x, step)
            last = j == len(plan) - 1
            # full steps come first, so the grid is start + (j + 1) * plan[0]
            t_now = stop if last else start + (j + 1) * plan[0]
            ts.append(float(t_now))
            xs.append(x.copy())
            ms.append(label_end if last else m)
            if not np.all(np.isfinite(x)) or np.linalg.norm(x) > DIVERGENCE_NORM:
                diverged = True
                break
        if diverged:
            break

    t_arr = np.array(ts)
    x_arr = np.array(xs)
    m_arr = np.array(ms, dtype=int)
    V = None
    if certificate is not None:
        V = np.column_stack(
            [np.einsum("ki,ij,kj->k", x_arr, certificate.P[p], x_arr) for p in system.mode_ids]
        )
    elif lyapunov is not None:
        V = np.column_stack(
            [[float(lyapunov[p](xk)) for xk in x_arr] for p in system.mode_ids]
        )
    return Trajectory(t_arr, x_arr, m_arr, 1.0 if discrete else float(h),
                      system.time_domain, V, diverged)


# ----------------------------------------------------------------------------
# exponential decay fit


@dataclass(frozen=True)
class GuesFit:
    """``|x(t)| <= eta |x(0)| exp(-gamma t)`` at every sample.

    In discrete time ``varsigma = exp(-gamma)`` is the per-step factor.
    ``residual`` is the largest ``|x| - bound`` over samples (<= 0).
    """

    eta: float
    gamma: float
    residual: float
    varsigma: Optional[float] = None

    def bound(self, t, x0_norm):
        return self.eta * x0_norm * np.exp(-self.gamma * np.asarray(t, dtype=float))

    def to_dict(self):
        d = {"eta": self.eta, "gamma": self.gamma, "residual": self.residual}
        if self.varsigma is not None:
            d["varsigma"] = self.varsigma
        return d


def _upper_hull(t, y):
    hull = []
    for p in zip(t, y):
        while len(hull) >= 2:
            (t1, y1), (t2, y2) = hull[-2], hull[-1]
            # drop the middle point when it lies on or below the chord
            if (y2 - y1) * (p[0] - t1) <= (p[1] - y1) * (t2 - t1):
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


def fit_gues(trajectory):
    """Exponential envelope dominating every sample of ``trajectory``.

    The rate is the slope of the upper convex hull of ``(t, log|x(t)|)``
    over the second half of the record (from the last hull vertex at or
    before the midpoint to the final sample); the intercept is then raised
    until the line dominates all samples.
    """
    t = np.asarray(trajectory.t, dtype=float)
    norms = trajectory.norms
    if len(t) < 10:
        raise InputError(f"need at least 10 samples, got {len(t)}")
    x0 = norms[0]
    if x0 == 0.0:
        raise InputError("x(t0) is zero")
    pos = norms > 0.0
    tt = t[pos] - t[0]
    y = np.log(norms[pos])
    hull = _upper_hull(tt, y)
    if len(hull) < 2:
        gamma = 0.0
    else:
        # chord from the last hull vertex in the first half of the record to
        # the final sample; a single short closing edge can be arbitrarily steep
        mid = 0.5 * tt[-1]
        ta, ya = max((v for v in hull[:-1] if v[0] <= mid), key=lambda v: v[0],
                     default=hull[-2])
        tb, yb = hull[-1]
        gamma = -(yb - ya) / (tb - ta)
    if trajectory.diverged:
        gamma = min(gamma, 0.0)
    c = float(np.max(y + gamma * tt))
    c += 4.0 * np.finfo(float).eps * max(1.0, abs(c))
    eta = math.exp(c) / x0
    bound = eta * x0 * np.exp(-gamma * (t - t[0]))
    residual = float(np.max(norms - bound))
    varsigma = math.exp(-gamma) if trajectory.time_domain == DISCRETE else None
    return GuesFit(eta, float(gamma), residual, varsigma)


# ----------------------------------------------------------------------------
# envelope check


@dataclass(frozen=True)
class EnvelopeReport:
    """Worst ratio ``V_sigma(t)(x(t)) / envelope(t) - 1`` over samples."""

    max_excess: float
    worst_time: float
    tol: float = ENVELOPE_TOL

    @property
    def passed(self):
        return self.max_excess <= self.tol

    def to_dict(self):
        return {"passed": self.passed, "max_excess": self.max_excess,
                "worst_time": self.worst_time, "tol": self.tol}


def check_envelope(trajectory, certificate, signal, tol=ENVELOPE_TOL):
    """Compare the active Lyapunov value with the jump/decay envelope."""
    if trajectory.V is None:
        raise InputError("trajectory has no V columns; simulate with a certificate")
    v = trajectory.active_V()
    v0 = v[0]
    if not v0 > 0:
        raise InputError("V at t = 0 must be positive")
    env = envelope_bound(certificate, signal, v0, trajectory.t)
    ratio = v / env - 1.0
    k = int(np.argmax(ratio))
    return EnvelopeReport(float(ratio[k]), float(trajectory.t[k]), tol)


# ----------------------------------------------------------------------------
# signal generation


@dataclass(frozen=True)
class SignalGenSpec:
    """Parameters for :func:`generate_signal`.

    Each dwell is ``tau(key) * m`` with ``m ~ U[multiplier]``, floored at
    ``min_dwell`` (keys with ``tau == 0`` would otherwise give empty
    segments). ``violation_factor`` scales every dwell afterwards.
    """

    policy: object
    horizon: float
    seed: int = 0
    multiplier: tuple = (1.0, 2.0)
    violation_factor: Optional[float] = None
    min_dwell: float = 0.1
    initial_mode: Optional[int] = None

    def __post_init__(self):
        if not self.horizon > 0:
            raise InputError("horizon must be positive", "horizon")
        lo, hi = self.multiplier
        if not 1.0 <= lo <= hi:
            raise InputError("multiplier range must satisfy 1 <= lo <= hi", "multiplier")
        if self.violation_factor is not None and not 0 < self.violation_factor < 1:
            raise InputError("violation factor must lie in (0, 1)", "violation_factor")
        if not self.min_dwell > 0:
            raise InputError("min_dwell must be positive", "min_dwell")

    def to_dict(self):
        return {
            "scheme": self.policy.scheme,
            "horizon": self.horizon,
            "seed": self.seed,
            "multiplier": list(self.multiplier),
            "violation_factor": self.violation_factor,
            "min_dwell": self.min_dwell,
            "initial_mode": self.initial_mode,
        }


def generate_signal(spec):
    """Random switching signal meeting (or deliberately missing) the policy.

    Every committed segment's dwell is at least ``tau(key) * m`` for the
    key it is charged to: its own mode (MDADT), its entry pair (SBASDT),
    or, for SBAPDT, the pair formed with the successor that is drawn
    before the dwell is fixed. With the default chatter bound of 1 this
    per-switch rule implies the counting inequality on every interval.
    The final segment is cut at the horizon.
    """
    policy = spec.policy
    scheme = policy.scheme
    discrete = policy.time_domain == DISCRETE
    taus = threshold_table(policy)
    modes = sorted(policy.lam)
    if len(modes) < 2:
        raise InputError("policy must name at least two modes in lambda")
    rng = np.random.default_rng(spec.seed)
    lo, hi = spec.multiplier
    horizon = float(spec.horizon)
    if discrete and int(horizon) != horizon:
        raise InputError("discrete horizon must be an integer step count")

    current = spec.initial_mode if spec.initial_mode is not None else int(rng.choice(modes))
    if current not in modes:
        raise InputError(f"initial mode {current} not in policy modes {modes}")
    pred = None
    segments = []
    t = 0.0
    while True:
        m = rng.uniform(lo, hi)
        others = [p for p in modes if p != current]
        if scheme == SBAPDT:
            eligible = [p for p in others if (p, current) in taus]
            if not eligible:
                raise InputError(f"no SBAPDT key leaves mode {current}")
            nxt = int(rng.choice(eligible))
            need = taus[(nxt, current)]
        else:
            if scheme == SBASDT:
                others = [p for p in others if (p, current) in taus] or others
            nxt = int(rng.choice(others))
            need = _charged_tau(scheme, taus, current, pred)
        dwell = max(need * m, spec.min_dwell)
        if discrete:
            dwell = max(1, math.ceil(dwell))
        if spec.violation_factor is not None:
            dwell = dwell * spec.violation_factor
            if discrete:
                dwell = max(1, int(math.floor(dwell)))
        elif dwell < need:
            raise AssertionError("generated dwell below its threshold")
        if t + dwell >= horizon:
            rest = horizon - t
            if discrete:
                rest = int(round(rest))
            if rest > 0:
                segments.append((current, rest))
            break
        segments.append((current, int(dwell) if discrete else float(dwell)))
        t += dwell
        pred, current = current, nxt
    return SwitchingSignal.from_segments(segments)


def _charged_tau(scheme, taus, mode, pred):
    if scheme == ADT:
        return taus[ALL]
    if scheme == MDADT:
        return taus.get(mode, 0.0)
    # SBASDT
    if pred is None:
        owned = [v for (p, _), v in taus.items() if p == mode]
        return max(owned, default=0.0)
    return taus.get((mode, pred), 0.0)
