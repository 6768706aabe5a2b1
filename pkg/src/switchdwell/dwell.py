"""Dwell-time accounting, admissibility checks and threshold formulas.

Four schemes are supported. Their constraint keys are:

* ``ADT``    -- the single key ``"all"`` (every switch, every second counts);
* ``MDADT``  -- a mode ``p``; counts activations of ``p`` against its running time;
* ``SBASDT`` -- an ordered pair ``(p, q)``; counts ``p|q`` switches against
  the running time of ``p`` segments entered from ``q`` (successor side);
* ``SBAPDT`` -- an ordered pair ``(p, q)``; counts ``p|q`` switches against
  the running time of ``q`` segments that are left for ``p`` (predecessor side).

A key is admissible when ``N <= N0 + T / tau`` over every interval.
"""

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InputError
from .model import CONTINUOUS, DISCRETE, TIME_DOMAINS, pair_key, parse_pair

ADT = "ADT"
MDADT = "MDADT"
SBASDT = "SBASDT"
SBAPDT = "SBAPDT"
SCHEMES = (ADT, MDADT, SBASDT, SBAPDT)
ALL = "all"

DEFAULT_CHATTER = 1


def normalize_scheme(scheme):
    s = str(scheme).upper()
    if s not in SCHEMES:
        raise InputError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}", "scheme")
    return s


def key_label(scheme, key):
    """Human-readable key: ``"2"``, ``"(1,1|2)"`` or ``"(2,1|2)"``."""
    if scheme == ADT:
        return ALL
    if scheme == MDADT:
        return str(key)
    p, q = key
    owner = p if scheme == SBASDT else q
    return f"({owner},{pair_key(p, q)})"


def key_owner(scheme, key):
    """Mode whose decay rate enters the threshold for ``key``."""
    if scheme == MDADT:
        return key
    p, q = key
    return p if scheme == SBASDT else q


def threshold(scheme, time_domain, mu, lam):
    """Dwell-time threshold for one key.

    Continuous time gives ``ln(mu) / lam``; discrete time gives
    ``-ln(mu) / ln(1 - lam)`` steps. ``mu == 1`` yields 0.

    ``lam`` is the decay rate of the key's owner mode: the successor for
    SBASDT and MDADT, the predecessor for SBAPDT.
    """
    normalize_scheme(scheme)
    if time_domain not in TIME_DOMAINS:
        raise InputError(f"time_domain must be one of {TIME_DOMAINS}")
    mu = float(mu)
    lam = float(lam)
    if not math.isfinite(mu) or mu < 1.0:
        raise InputError(f"mu must be >= 1, got {mu}")
    if time_domain == CONTINUOUS:
        if not (lam > 0.0 and math.isfinite(lam)):
            raise InputError(f"continuous decay rate must be > 0, got {lam}")
        return math.log(mu) / lam
    if not 0.0 < lam < 1.0:
        raise InputError(f"discrete decay rate must lie in (0, 1), got {lam}")
    if mu == 1.0:
        return 0.0
    return -math.log(mu) / math.log(1.0 - lam)


@dataclass(frozen=True)
class DwellPolicy:
    """Scheme tag with decay rates, jump gains and chatter bounds.

    ``mu`` and ``chatter`` are keyed by the scheme's key type (``"all"``,
    mode id, or ``(p, q)`` pair). Missing chatter bounds default to 1.
    """

    scheme: str
    lam: dict
    mu: dict
    chatter: dict = field(default_factory=dict)
    time_domain: str = CONTINUOUS

    def __post_init__(self):
        object.__setattr__(self, "scheme", normalize_scheme(self.scheme))
        if self.time_domain not in TIME_DOMAINS:
            raise InputError(f"time_domain must be one of {TIME_DOMAINS}", "time_domain")
        for p, v in self.lam.items():
            if self.time_domain == CONTINUOUS and not v > 0:
                raise InputError(f"continuous decay rate must be > 0, got {v}", f"lambda.{p}")
            if self.time_domain == DISCRETE and not 0 < v < 1:
                raise InputError(f"discrete decay rate must lie in (0, 1), got {v}", f"lambda.{p}")
        for k, v in self.mu.items():
            if not v >= 1.0:
                raise InputError(f"mu must be >= 1, got {v}", f"mu.{_key_text(k)}")
        for k, v in self.chatter.items():
            if int(v) != v or v < 0:
                raise InputError("chatter bound must be a non-negative integer", f"chatter.{k}")

    @property
    def keys(self):
        if self.scheme == ADT:
            return [ALL]
        return sorted(self.mu)

    def chatter_for(self, key):
        return int(self.chatter.get(key, DEFAULT_CHATTER))

    @property
    def thresholds(self):
        return threshold_table(self)

    def to_document(self):
        doc = {
            "scheme": self.scheme,
            "time_domain": self.time_domain,
            "lambda": {str(p): v for p, v in sorted(self.lam.items())},
            "mu": {_key_text(k): v for k, v in sorted(self.mu.items(), key=_sort_key)},
        }
        if self.chatter:
            doc["chatter"] = {
                _key_text(k): v for k, v in sorted(self.chatter.items(), key=_sort_key)
            }
        return doc


def _sort_key(item):
    k = item[0]
    return (0, k, 0) if not isinstance(k, tuple) else (1, k[0], k[1])


def _key_text(k):
    return pair_key(*k) if isinstance(k, tuple) else str(k)


def threshold_table(policy):
    """Threshold per key for ``policy``.

    Returns
    -------
    dict
        key -> tau. SBASDT keys use the successor's rate, SBAPDT keys the
        predecessor's.
    """
    lam = policy.lam
    out = {}
    if policy.scheme == ADT:
        if ALL not in policy.mu:
            raise InputError("ADT policy needs mu['all']", "mu.all")
        if not lam:
            raise InputError("policy has no decay rates", "lambda")
        out[ALL] = threshold(ADT, policy.time_domain, policy.mu[ALL], min(lam.values()))
        return out
    for key in policy.keys:
        owner = key_owner(policy.scheme, key)
        if owner not in lam:
            raise InputError(
                f"no decay rate for mode {owner} (needed by key {key_label(policy.scheme, key)})",
                f"lambda.{owner}",
            )
        out[key] = threshold(policy.scheme, policy.time_domain, policy.mu[key], lam[owner])
    return out


def parse_policy(document, time_domain=None):
    """Parse a policy document.

    ``{"scheme": ..., "lambda": {mode: v}, "mu": {"p|q": v} | {mode: v},
    "chatter": {...}}``; ``time_domain`` (argument or field) defaults to
    continuous.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise InputError(f"invalid JSON: {exc}") from None
    if not isinstance(document, dict):
        raise InputError("policy document must be a JSON object")
    if "scheme" not in document:
        raise InputError("missing required field 'scheme'", "scheme")
    scheme = normalize_scheme(document["scheme"])
    domain = time_domain or document.get("time_domain", CONTINUOUS)

    lam = {}
    for k, v in (document.get("lambda") or {}).items():
        lam[_parse_mode(k, f"lambda.{k}")] = _number(v, f"lambda.{k}")

    raw_mu = document.get("mu")
    if raw_mu is None:
        raise InputError("missing required field 'mu'", "mu")
    if isinstance(raw_mu, (int, float)) and not isinstance(raw_mu, bool):
        raw_mu = {ALL: raw_mu}
    mu = {}
    for k, v in raw_mu.items():
        mu[_parse_key(scheme, k, f"mu.{k}")] = _number(v, f"mu.{k}")
    chatter = {}
    for k, v in (document.get("chatter") or {}).items():
        chatter[_parse_key(scheme, k, f"chatter.{k}")] = v
    return DwellPolicy(scheme, lam, mu, chatter, domain)


def _number(v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise InputError(f"expected a finite number, got {v!r}", path)
    return float(v)


def _parse_mode(text, path):
    try:
        return int(text)
    except (TypeError, ValueError):
        raise InputError(f"expected a mode id, got {text!r}", path) from None


def _parse_key(scheme, text, path):
    if scheme == ADT:
        if str(text) != ALL:
            raise InputError(f"ADT keys must be '{ALL}'", path)
        return ALL
    if scheme == MDADT:
        return _parse_mode(text, path)
    try:
        return parse_pair(text)
    except InputError as exc:
        raise InputError(str(exc), path) from None


# ----------------------------------------------------------------------------
# counting


class SignalLedger:
    """Cumulative counters of a signal, evaluated at arbitrary times.

    Every counter is stored at the segment boundaries; running-time
    counters grow linearly inside a segment, event counters jump at the
    segment start. Interval statistics are differences of cumulative
    values, which makes them additive by construction.
    """

    def __init__(self, signal):
        self.signal = signal
        segs = signal.segments
        self.modes = [m for m, _ in segs]
        dw = np.array([d for _, d in segs], dtype=float)
        self.bounds = np.concatenate(([0.0], np.cumsum(dw)))
        self.dwells = dw
        self.horizon = float(self.bounds[-1])
        nseg = len(segs)
        self.pred = [None] + self.modes[:-1]
        self.succ = self.modes[1:] + [None]

        mode_ids = sorted(set(self.modes))
        pairs = sorted({(self.modes[i], self.modes[i - 1]) for i in range(1, nseg)})
        self.mode_ids = mode_ids
        self.pairs = pairs

        def zeros():
            return np.zeros(nseg + 1)

        # event counts with instant strictly before bound[i]
        self.n_mode = {p: zeros() for p in mode_ids}
        self.n_pair = {pq: zeros() for pq in pairs}
        self.n_all = zeros()
        # running time accumulated up to bound[i]
        self.t_mode = {p: zeros() for p in mode_ids}
        self.t_succ = {pq: zeros() for pq in pairs}
        self.t_pred = {pq: zeros() for pq in pairs}

        for i in range(nseg):
            m = self.modes[i]
            for arr in self._all_arrays():
                arr[i + 1] = arr[i]
            self.n_mode[m][i + 1] += 1
            self.n_all[i + 1] += 1
            self.t_mode[m][i + 1] += dw[i]
            if self.pred[i] is not None:
                pq = (m, self.pred[i])
                self.n_pair[pq][i + 1] += 1
                self.t_succ[pq][i + 1] += dw[i]
            if self.succ[i] is not None:
                self.t_pred[(self.succ[i], m)][i + 1] += dw[i]

    def _all_arrays(self):
        yield self.n_all
        for d in (self.n_mode, self.n_pair, self.t_mode, self.t_succ, self.t_pred):
            yield from d.values()

    def segment_index(self, t):
        """Index of the segment containing ``t`` (the last one for t = horizon)."""
        i = int(np.searchsorted(self.bounds, t, side="right")) - 1
        return min(max(i, 0), len(self.modes) - 1)

    def _events_before(self, arr, t):
        # events sit at bounds[:-1]; arr[i] counts events at bounds[j], j < i
        k = int(np.searchsorted(self.bounds[:-1], t, side="left"))
        return arr[k]

    def _time_upto(self, arr, t, active):
        i = self.segment_index(t)
        base = arr[i]
        if active(i):
            base = base + min(t, self.bounds[i + 1]) - self.bounds[i]
        return base

    def mode_count(self, p, t):
        return self._events_before(self.n_mode[p], t) if p in self.n_mode else 0.0

    def pair_count(self, pq, t):
        return self._events_before(self.n_pair[pq], t) if pq in self.n_pair else 0.0

    def total_count(self, t):
        return self._events_before(self.n_all, t)

    def mode_time(self, p, t):
        if p not in self.t_mode:
            return 0.0
        return self._time_upto(self.t_mode[p], t, lambda i: self.modes[i] == p)

    def succ_time(self, pq, t):
        if pq not in self.t_succ:
            return 0.0
        return self._time_upto(
            self.t_succ[pq], t, lambda i: (self.modes[i], self.pred[i]) == pq
        )

    def pred_time(self, pq, t):
        if pq not in self.t_pred:
            return 0.0
        return self._time_upto(
            self.t_pred[pq], t, lambda i: (self.succ[i], self.modes[i]) == pq
        )

    def key_counts(self, scheme, key, t):
        """Cumulative ``(N, T)`` of a scheme key up to time ``t``."""
        if scheme == ADT:
            return self.total_count(t), min(t, self.horizon)
        if scheme == MDADT:
            return self.mode_count(key, t), self.mode_time(key, t)
        if scheme == SBASDT:
            return self.pair_count(key, t), self.succ_time(key, t)
        return self.pair_count(key, t), self.pred_time(key, t)


@dataclass(frozen=True)
class DwellStatistics:
    """Counters over ``[t1, t2)``.

    ``n_mode[p]`` counts activations of p (the t = 0 activation included),
    ``n_pair[(p, q)]`` counts ``p|q`` switches; ``t_succ[(p, q)]`` is the
    running time of p segments entered from q, ``t_pred[(p, q)]`` that of q
    segments left for p.
    """

    t1: float
    t2: float
    n_mode: dict
    t_mode: dict
    n_pair: dict
    t_succ: dict
    t_pred: dict

    @property
    def observed_pairs(self):
        return {pq for pq, n in self.n_pair.items() if n > 0}

    @property
    def n_total(self):
        return sum(self.n_mode.values())


def _check_interval(ledger, t1, t2):
    h = ledger.horizon
    slack = 1e-12 * max(1.0, h)
    if not (0.0 <= t1 < t2 <= h + slack):
        raise InputError(f"interval [{t1}, {t2}) must satisfy 0 <= t1 < t2 <= horizon {h}")


def compute_statistics(signal, t1, t2, ledger=None):
    """Counting quantities of every mode and ordered pair over ``[t1, t2)``.

    A switch is counted when its instant lies in the interval; running
    times accrue over the intersection of each segment with the interval.
    The first segment has no predecessor and contributes to ``t_mode``
    only.
    """
    ledger = ledger or SignalLedger(signal)
    _check_interval(ledger, t1, t2)
    n_mode, t_mode = {}, {}
    for p in ledger.mode_ids:
        n_mode[p] = int(ledger.mode_count(p, t2) - ledger.mode_count(p, t1))
        t_mode[p] = float(ledger.mode_time(p, t2) - ledger.mode_time(p, t1))
    n_pair, t_succ, t_pred = {}, {}, {}
    for pq in ledger.pairs:
        n_pair[pq] = int(ledger.pair_count(pq, t2) - ledger.pair_count(pq, t1))
        t_succ[pq] = float(ledger.succ_time(pq, t2) - ledger.succ_time(pq, t1))
        t_pred[pq] = float(ledger.pred_time(pq, t2) - ledger.pred_time(pq, t1))
    return DwellStatistics(float(t1), float(t2), n_mode, t_mode, n_pair, t_succ, t_pred)


# ----------------------------------------------------------------------------
# admissibility


@dataclass(frozen=True)
class KeyVerdict:
    key: object
    label: str
    tau: float
    chatter: int
    worst_slack: float
    interval: Optional[tuple] = None
    count: int = 0
    running_time: float = 0.0

    @property
    def admissible(self):
        return self.interval is None


@dataclass(frozen=True)
class AdmissibilityReport:
    scheme: str
    verdicts: tuple

    @property
    def admissible(self):
        return all(v.admissible for v in self.verdicts)

    @property
    def violations(self):
        return [v for v in self.verdicts if not v.admissible]

    def to_dict(self):
        return {
            "scheme": self.scheme,
            "admissible": self.admissible,
            "keys": [
                {
                    "key": v.label,
                    "tau": v.tau,
                    "chatter": v.chatter,
                    "worst_slack": _json_float(v.worst_slack),
                    "admissible": v.admissible,
                    "violating_interval": list(v.interval) if v.interval else None,
                    "count": v.count,
                    "running_time": v.running_time,
                }
                for v in self.verdicts
            ],
        }

    def to_text(self):
        rows = [("key", "tau", "N0", "worst slack", "verdict", "interval")]
        for v in self.verdicts:
            iv = "" if v.interval is None else f"[{v.interval[0]:.6g}, {v.interval[1]:.6g}]"
            rows.append(
                (
                    v.label,
                    f"{v.tau:.6g}",
                    str(v.chatter),
                    "inf" if math.isinf(v.worst_slack) else f"{v.worst_slack:.6g}",
                    "ok" if v.admissible else "VIOLATED",
                    iv,
                )
            )
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
        lines.append(f"{self.scheme}: {'admissible' if self.admissible else 'INADMISSIBLE'}")
        return "\n".join(lines)


def _json_float(x):
    return None if math.isinf(x) else x


def candidate_intervals(ledger, time_domain=CONTINUOUS):
    """Extremal interval endpoints for the counting inequality.

    Left ends are segment starts. A right end either closes the signal
    (``horizon``) or sits just past a switch instant so that the switch is
    counted: in continuous time that is the limit ``t_j+`` (running time
    evaluated at ``t_j``), in discrete time the next step ``t_j + 1``.

    Returns
    -------
    starts, stops_time, stops_count : arrays
        ``stops_time`` is where running time is evaluated, ``stops_count``
        where event counts are evaluated (inclusive of that instant).
    """
    starts = ledger.bounds[:-1]
    events = ledger.bounds[:-1]
    if time_domain == DISCRETE:
        stop_t = np.minimum(events + 1.0, ledger.horizon)
    else:
        stop_t = events.copy()
    stops_time = np.concatenate((stop_t, [ledger.horizon]))
    stops_count = np.concatenate((events, [ledger.horizon]))
    return starts, stops_time, stops_count


def check_admissible(signal, policy, rtol=1e-9):
    """Check every scheme key over every extremal interval.

    Counts are piecewise constant between switch instants and running
    times are monotone, so it suffices to put the left end on a segment
    start and the right end just past a switch instant (or at the horizon).

    Returns
    -------
    AdmissibilityReport
        Worst slack ``N0 + T / tau - N`` per key and the first interval
        attaining it when negative. Keys never observed are vacuously
        admissible; ``tau == 0`` keys are always admissible.
    """
    ledger = SignalLedger(signal)
    taus = threshold_table(policy)
    starts, stops_time, stops_count = candidate_intervals(ledger, policy.time_domain)
    verdicts = []
    for key in policy.keys:
        tau = taus[key]
        n0 = policy.chatter_for(key)
        label = key_label(policy.scheme, key)
        observed = (
            True
            if policy.scheme == ADT
            else (key in ledger.n_mode if policy.scheme == MDADT else key in ledger.n_pair)
        )
        if tau == 0.0 or not observed:
            verdicts.append(KeyVerdict(key, label, tau, n0, math.inf))
            continue

        n_start = np.array([_count_before(ledger, policy.scheme, key, t) for t in starts])
        t_start = np.array([ledger.key_counts(policy.scheme, key, t)[1] for t in starts])
        n_stop = np.array(
            [_count_through(ledger, policy.scheme, key, t) for t in stops_count]
        )
        t_stop = np.array([ledger.key_counts(policy.scheme, key, t)[1] for t in stops_time])

        n = n_stop[None, :] - n_start[:, None]
        t = t_stop[None, :] - t_start[:, None]
        valid = stops_count[None, :] >= starts[:, None]
        slack = np.where(valid, n0 + t / tau - n, np.inf)
        # forgive rounding in T accumulated from float dwell sums
        tol = rtol * np.maximum(1.0, t / tau)
        i, j = np.unravel_index(np.argmin(slack - (-tol)), slack.shape)
        worst = float(slack[i, j])
        interval = None
        if worst < -tol[i, j]:
            interval = (float(starts[i]), float(stops_time[j]))
        verdicts.append(
            KeyVerdict(key, label, tau, n0, worst, interval, int(n[i, j]), float(t[i, j]))
        )
    return AdmissibilityReport(policy.scheme, tuple(verdicts))


def _count_before(ledger, scheme, key, t):
    return ledger.key_counts(scheme, key, t)[0]


def _count_through(ledger, scheme, key, t):
    # events at exactly t included
    if t >= ledger.horizon:
        return ledger.key_counts(scheme, key, ledger.horizon)[0]
    return ledger.key_counts(scheme, key, np.nextafter(t, np.inf))[0]
