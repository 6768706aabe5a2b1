"""Switched systems, modes and switching signals.

A mode pair ``(p, q)`` always means "p is activated immediately after q";
its text form is ``"p|q"``.
"""

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InputError

CONTINUOUS = "continuous"
DISCRETE = "discrete"
TIME_DOMAINS = (CONTINUOUS, DISCRETE)


def pair_key(p, q):
    """Text form ``"p|q"`` of the ordered pair (p after q)."""
    return f"{p}|{q}"


def parse_pair(text):
    """Inverse of :func:`pair_key`; returns ``(p, q)`` as ints."""
    try:
        p, q = (int(s) for s in str(text).split("|"))
    except ValueError:
        raise InputError(f"bad mode pair {text!r}, expected 'p|q'") from None
    if p == q:
        raise InputError(f"mode pair {text!r} has p == q")
    return p, q


@dataclass(frozen=True, eq=False)
class Mode:
    """One subsystem.

    Linear modes carry ``A`` (n x n) and ``B`` (n x m, possibly n x 0).
    Nonlinear modes carry ``f``, a pure callable mapping a state to its
    derivative (continuous time) or to the next state (discrete time).
    """

    id: int
    A: Optional[np.ndarray] = None
    B: Optional[np.ndarray] = None
    f: Optional[Callable] = None

    @property
    def is_linear(self):
        return self.f is None

    def __eq__(self, other):
        if not isinstance(other, Mode) or self.id != other.id:
            return False
        if self.is_linear != other.is_linear:
            return False
        if not self.is_linear:
            return self.f is other.f
        return np.array_equal(self.A, other.A) and np.array_equal(self.B, other.B)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class SwitchedSystem:
    time_domain: str
    state_dim: int
    input_dim: int
    modes: dict
    lam: Optional[dict] = None
    mu: Optional[dict] = None
    chatter: Optional[dict] = None

    def __post_init__(self):
        if self.time_domain not in TIME_DOMAINS:
            raise InputError(f"time_domain must be one of {TIME_DOMAINS}", "time_domain")
        if len(self.modes) < 2:
            raise InputError("a switched system needs at least two modes", "modes")
        ids = sorted(self.modes)
        if ids != list(range(1, len(ids) + 1)):
            raise InputError(f"mode ids must be 1..s contiguous, got {ids}", "modes")
        n, m = self.state_dim, self.input_dim
        for pid, mode in self.modes.items():
            if mode.id != pid:
                raise InputError(f"mode keyed {pid} has id {mode.id}", f"modes[{pid}]")
            if not mode.is_linear:
                continue
            if mode.A.shape != (n, n):
                raise InputError(f"A must be {n}x{n}, got {mode.A.shape}", f"modes[{pid}].A")
            if mode.B.shape != (n, m):
                raise InputError(f"B must be {n}x{m}, got {mode.B.shape}", f"modes[{pid}].B")

    def __eq__(self, other):
        if not isinstance(other, SwitchedSystem):
            return NotImplemented
        return (
            self.time_domain == other.time_domain
            and self.state_dim == other.state_dim
            and self.input_dim == other.input_dim
            and self.modes == other.modes
            and self.lam == other.lam
            and self.mu == other.mu
            and self.chatter == other.chatter
        )

    __hash__ = None

    @property
    def mode_ids(self):
        return sorted(self.modes)

    @property
    def n_modes(self):
        return len(self.modes)

    @property
    def is_linear(self):
        return all(m.is_linear for m in self.modes.values())

    @property
    def ordered_pairs(self):
        """All ``(p, q)`` with p != q, in lexicographic order."""
        ids = self.mode_ids
        return [(p, q) for p in ids for q in ids if p != q]

    def A(self, p):
        return self.modes[p].A

    def B(self, p):
        return self.modes[p].B

    def closed_loop(self, gains):
        """Autonomous system with ``A_p + B_p K_p`` per mode.

        ``gains`` maps mode id to an m x n array.
        """
        modes = {}
        for p in self.mode_ids:
            mode = self.modes[p]
            if not mode.is_linear:
                raise InputError(f"mode {p} is nonlinear; gains need linear modes")
            k = np.atleast_2d(np.asarray(gains[p], dtype=float))
            if k.shape != (self.input_dim, self.state_dim):
                raise InputError(
                    f"gain must be {self.input_dim}x{self.state_dim}, got {k.shape}",
                    f"gains[{p}]",
                )
            acl = mode.A + mode.B @ k
            modes[p] = Mode(p, acl, np.zeros((self.state_dim, 0)))
        return SwitchedSystem(
            self.time_domain, self.state_dim, 0, modes, self.lam, self.mu, self.chatter
        )


def linear_system(a_list, b_list=None, time_domain=CONTINUOUS, **params):
    """Build a linear :class:`SwitchedSystem` from matrices, modes numbered 1..s."""
    a_list = [np.array(a, dtype=float) for a in a_list]
    n = a_list[0].shape[0]
    if b_list is None:
        b_list = [np.zeros((n, 0))] * len(a_list)
    b_list = [np.array(b, dtype=float).reshape(n, -1) for b in b_list]
    m = b_list[0].shape[1]
    modes = {i + 1: Mode(i + 1, a, b) for i, (a, b) in enumerate(zip(a_list, b_list))}
    return SwitchedSystem(time_domain, n, m, modes, **params)


def nonlinear_system(fields, state_dim, time_domain=CONTINUOUS):
    """Register nonlinear modes programmatically; ``fields`` is a list of callables."""
    modes = {i + 1: Mode(i + 1, f=f) for i, f in enumerate(fields)}
    return SwitchedSystem(time_domain, state_dim, 0, modes)


# ----------------------------------------------------------------------------
# document parsing


def _require(doc, key, path):
    if key not in doc:
        raise InputError(f"missing required field '{key}'", path)
    return doc[key]


def _int_field(value, path, minimum):
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise InputError(f"expected integer >= {minimum}, got {value!r}", path)
    return value


def _matrix_field(value, path):
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise InputError("matrix must be a list of numeric rows", path) from None
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise InputError(f"matrix must be 2-D, got {arr.ndim}-D", path)
    if not np.all(np.isfinite(arr)):
        raise InputError("matrix has non-finite entries", path)
    return arr


def _real_map(value, path, key_parser):
    if not isinstance(value, dict):
        raise InputError("expected an object", path)
    out = {}
    for k, v in value.items():
        key = key_parser(k, f"{path}.{k}")
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
            raise InputError(f"expected a finite number, got {v!r}", f"{path}.{k}")
        out[key] = v
    return out


def _mode_key(text, path):
    try:
        return int(text)
    except (TypeError, ValueError):
        raise InputError(f"expected a mode id, got {text!r}", path) from None


def _mode_or_pair_key(text, path):
    if "|" in str(text):
        try:
            return parse_pair(text)
        except InputError as exc:
            raise InputError(str(exc), path) from None
    return _mode_key(text, path)


def parse_system(document):
    """Parse and validate a system-description document.

    Parameters
    ----------
    document : str or dict
        JSON text or an already-decoded object.

    Returns
    -------
    SwitchedSystem

    Notes
    -----
    Input matrices are column-oriented (n x m). A ``B`` given as an
    m x n row block is transposed when that is the only conformable reading.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise InputError(f"invalid JSON: {exc}") from None
    if not isinstance(document, dict):
        raise InputError("system document must be a JSON object")

    domain = _require(document, "time_domain", "time_domain")
    if domain not in TIME_DOMAINS:
        raise InputError(f"must be one of {TIME_DOMAINS}, got {domain!r}", "time_domain")
    n = _int_field(_require(document, "state_dim", "state_dim"), "state_dim", 1)
    m = _int_field(document.get("input_dim", 0), "input_dim", 0)
    raw_modes = _require(document, "modes", "modes")
    if not isinstance(raw_modes, list):
        raise InputError("expected a list of modes", "modes")
    if len(raw_modes) < 2:
        raise InputError("a switched system needs at least two modes", "modes")

    modes = {}
    for i, raw in enumerate(raw_modes):
        path = f"modes[{i}]"
        if not isinstance(raw, dict):
            raise InputError("expected an object", path)
        pid = _int_field(_require(raw, "id", f"{path}.id"), f"{path}.id", 1)
        if pid in modes:
            raise InputError(f"duplicate mode id {pid}", f"{path}.id")
        a = _matrix_field(_require(raw, "A", f"{path}.A"), f"{path}.A")
        if a.shape != (n, n):
            raise InputError(f"A must be {n}x{n}, got {a.shape[0]}x{a.shape[1]}", f"{path}.A")
        if "B" in raw and raw["B"] is not None:
            b = _matrix_field(raw["B"], f"{path}.B")
            if b.shape != (n, m):
                if b.shape == (m, n):
                    b = b.T.copy()
                else:
                    raise InputError(
                        f"B must be {n}x{m}, got {b.shape[0]}x{b.shape[1]}", f"{path}.B"
                    )
        else:
            b = np.zeros((n, m))
        modes[pid] = Mode(pid, a, b)

    ids = sorted(modes)
    if ids != list(range(1, len(ids) + 1)):
        raise InputError(f"mode ids must be 1..s contiguous, got {ids}", "modes")

    lam = mu = chatter = None
    if document.get("lambda") is not None:
        lam = _real_map(document["lambda"], "lambda", _mode_key)
    if document.get("mu") is not None:
        mu = _real_map(document["mu"], "mu", _mode_or_pair_key)
    if document.get("chatter") is not None:
        chatter = _real_map(document["chatter"], "chatter", _mode_or_pair_key)
        for k, v in chatter.items():
            if int(v) != v or v < 0:
                raise InputError("chatter bound must be a non-negative integer", f"chatter.{k}")
        chatter = {k: int(v) for k, v in chatter.items()}
    return SwitchedSystem(domain, n, m, modes, lam, mu, chatter)


def _key_text(k):
    return pair_key(*k) if isinstance(k, tuple) else str(k)


def system_to_document(system):
    """Serialize a linear system to a JSON-ready dict (inverse of parse_system)."""
    if not system.is_linear:
        raise InputError("nonlinear modes cannot be serialized")
    doc = {
        "time_domain": system.time_domain,
        "state_dim": system.state_dim,
        "input_dim": system.input_dim,
        "modes": [
            {"id": p, "A": system.A(p).tolist(), "B": system.B(p).tolist()}
            for p in system.mode_ids
        ],
    }
    for name, value in (("lambda", system.lam), ("mu", system.mu), ("chatter", system.chatter)):
        if value is not None:
            doc[name] = {_key_text(k): v for k, v in value.items()}
    return doc


# ----------------------------------------------------------------------------
# switching signals


@dataclass(frozen=True)
class SwitchingSignal:
    """Piecewise-constant mode schedule starting at t = 0.

    ``segments`` is a tuple of ``(mode, dwell)``; dwell is seconds in
    continuous time and an integer step count in discrete time.
    """

    initial_mode: int
    segments: tuple = field(default_factory=tuple)

    def __post_init__(self):
        segs = tuple((int(m), d) for m, d in self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise InputError("signal needs at least one segment", "segments")
        if segs[0][0] != self.initial_mode:
            raise InputError(
                f"first segment mode {segs[0][0]} differs from initial_mode {self.initial_mode}",
                "segments[0]",
            )
        for i, (mode, dwell) in enumerate(segs):
            if not (isinstance(dwell, (int, float, np.integer, np.floating)) and dwell > 0):
                raise InputError(f"dwell must be positive, got {dwell!r}", f"segments[{i}]")
            if not np.isfinite(dwell):
                raise InputError("dwell must be finite", f"segments[{i}]")
            if i and segs[i - 1][0] == mode:
                raise InputError(
                    f"consecutive segments share mode {mode}; merge them", f"segments[{i}]"
                )

    @classmethod
    def from_segments(cls, segments):
        segments = tuple(segments)
        return cls(int(segments[0][0]), segments)

    @property
    def modes(self):
        return [m for m, _ in self.segments]

    @property
    def dwells(self):
        return [d for _, d in self.segments]

    @property
    def starts(self):
        """Absolute start time of every segment."""
        return np.concatenate(([0.0], np.cumsum(self.dwells, dtype=float)[:-1]))

    @property
    def horizon(self):
        return float(np.sum(self.dwells, dtype=float))

    def mode_at(self, t):
        """Active mode at time ``t`` (right-continuous)."""
        starts = self.starts
        i = int(np.searchsorted(starts, t, side="right")) - 1
        return self.segments[max(i, 0)][0]

    def validate_for(self, system):
        """Check mode ids exist and, in discrete time, that dwells are integers."""
        for i, (mode, dwell) in enumerate(self.segments):
            if mode not in system.modes:
                raise InputError(f"unknown mode {mode}", f"segments[{i}]")
            if system.time_domain == DISCRETE and int(dwell) != dwell:
                raise InputError("discrete dwell must be an integer step count", f"segments[{i}]")


def switch_times(signal):
    """Internal switch instants.

    Returns
    -------
    list of (time, from_mode, to_mode)
        One entry per boundary between consecutive segments; the pair
        activated at that instant is ``to|from``.
    """
    out = []
    t = 0.0
    segs = signal.segments
    for (m_prev, d), (m_next, _) in zip(segs[:-1], segs[1:]):
        t += d
        out.append((t, m_prev, m_next))
    return out


def parse_signal(document):
    """Parse ``{"initial_mode": p, "segments": [[mode, dwell], ...]}``."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise InputError(f"invalid JSON: {exc}") from None
    if not isinstance(document, dict):
        raise InputError("signal document must be a JSON object")
    segs = _require(document, "segments", "segments")
    if not isinstance(segs, list):
        raise InputError("expected a list of [mode, dwell]", "segments")
    parsed = []
    for i, s in enumerate(segs):
        if not (isinstance(s, (list, tuple)) and len(s) == 2):
            raise InputError("expected [mode, dwell]", f"segments[{i}]")
        mode = _int_field(s[0], f"segments[{i}][0]", 1)
        dwell = s[1]
        if isinstance(dwell, bool) or not isinstance(dwell, (int, float)):
            raise InputError(f"dwell must be a number, got {dwell!r}", f"segments[{i}][1]")
        parsed.append((mode, dwell))
    if not parsed:
        raise InputError("signal needs at least one segment", "segments")
    initial = _int_field(document.get("initial_mode", parsed[0][0]), "initial_mode", 1)
    return SwitchingSignal(initial, tuple(parsed))


def signal_to_document(signal):
    return {
        "initial_mode": signal.initial_mode,
        "segments": [[m, d] for m, d in signal.segments],
    }
