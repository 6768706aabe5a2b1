import math

import numpy as np
import pytest
from conftest import LAM, MU, MU_MODE
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from switchdwell.cli import round_half_away
from switchdwell.dwell import (
    ADT, MDADT, SBAPDT, SBASDT, DwellPolicy, check_admissible, compute_statistics, key_label,
    parse_policy, threshold, threshold_table,
)
from switchdwell.errors import InputError
from switchdwell.model import SwitchingSignal


# -- thresholds --------------------------------------------------------------

def test_threshold_examples():
    # ln 18 / 3 = 0.963457..., printed 0.96
    tau = threshold(SBASDT, "continuous", 18, 3)
    assert tau == pytest.approx(oracles.threshold(18, 3), rel=1e-15)
    assert tau == pytest.approx(0.963457, abs=1e-6)
    assert round_half_away(tau, 2) == 0.96
    tau = threshold(SBAPDT, "continuous", 18, 1.5)
    assert tau == pytest.approx(1.926915, abs=1e-6)
    assert round_half_away(tau, 1) == 1.9
    for scheme in (ADT, MDADT, SBASDT, SBAPDT):
        assert threshold(scheme, "continuous", 1, 0.7) == 0.0
        assert threshold(scheme, "discrete", 1, 0.7) == 0.0


def test_discrete_threshold_uses_log_one_minus_lambda():
    assert threshold(SBASDT, "discrete", 2, 0.5) == 1.0
    assert threshold(MDADT, "discrete", 3, 0.2) == pytest.approx(
        -math.log(3) / math.log(0.8), rel=1e-15)


@pytest.mark.parametrize("args", [
    (SBASDT, "continuous", 0.5, 1.0),
    (SBASDT, "continuous", 2.0, 0.0),
    (SBASDT, "discrete", 2.0, 1.0),
    (SBASDT, "discrete", 2.0, -0.1),
    ("XYZ", "continuous", 2.0, 1.0),
    (SBASDT, "hybrid", 2.0, 1.0),
])
def test_threshold_errors(args):
    with pytest.raises(InputError):
        threshold(*args)


def test_sbasdt_table():
    taus = threshold_table(DwellPolicy(SBASDT, LAM, MU))
    for (p, q), mu in MU.items():
        assert taus[(p, q)] == oracles.threshold(mu, LAM[p])
    two = {k: round_half_away(v, 2) for k, v in taus.items()}
    assert two == {(1, 2): 0.96, (1, 3): 0.85, (2, 1): 0.56, (2, 3): 0.0,
                   (3, 1): 1.49, (3, 2): 1.13}
    one = {k: round_half_away(v, 1) for k, v in taus.items()}
    assert one == {(1, 2): 1.0, (1, 3): 0.9, (2, 1): 0.6, (2, 3): 0.0,
                   (3, 1): 1.5, (3, 2): 1.1}


def test_sbapdt_table():
    taus = threshold_table(DwellPolicy(SBAPDT, LAM, MU))
    for (p, q), mu in MU.items():
        assert taus[(p, q)] == oracles.threshold(mu, LAM[q])
    two = {k: round_half_away(v, 2) for k, v in taus.items()}
    assert two == {(1, 2): 1.93, (1, 3): 1.03, (2, 1): 0.28, (2, 3): 0.0,
                   (3, 1): 1.24, (3, 2): 1.89}
    one = {k: round_half_away(v, 1) for k, v in taus.items()}
    assert one == {(1, 2): 1.9, (1, 3): 1.0, (2, 1): 0.3, (2, 3): 0.0,
                   (3, 1): 1.2, (3, 2): 1.9}


def test_mdadt_collapse_is_bitwise():
    md = threshold_table(DwellPolicy(MDADT, LAM, MU_MODE))
    collapsed = {(p, q): MU_MODE[p] for p in LAM for q in LAM if p != q}
    sb = threshold_table(DwellPolicy(SBASDT, LAM, collapsed))
    for (p, _), tau in sb.items():
        assert tau == md[p]


def test_adt_uses_slowest_rate():
    pol = DwellPolicy(ADT, LAM, {"all": 41.0})
    assert threshold_table(pol)["all"] == math.log(41) / 1.5


def test_key_labels():
    assert key_label(SBASDT, (1, 2)) == "(1,1|2)"
    assert key_label(SBAPDT, (1, 2)) == "(2,1|2)"
    assert key_label(MDADT, 3) == "3"


def test_policy_parse_and_round_trip():
    doc = {"scheme": "sbasdt", "lambda": {"1": 3, "2": 1.5},
           "mu": {"1|2": 18, "2|1": 2.3}, "chatter": {"1|2": 2}}
    pol = parse_policy(doc)
    assert pol.scheme == SBASDT
    assert pol.chatter_for((1, 2)) == 2 and pol.chatter_for((2, 1)) == 1
    assert parse_policy(pol.to_document()) == pol


@pytest.mark.parametrize("doc, path", [
    ({"lambda": {"1": 1}, "mu": {"1|2": 2}}, "scheme"),
    ({"scheme": "sbasdt", "lambda": {"1": 1}, "mu": {"1|2": 0.5}}, "mu.1|2"),
    ({"scheme": "sbasdt", "lambda": {"1": -1}, "mu": {"1|2": 2}}, "lambda.1"),
    ({"scheme": "mdadt", "lambda": {"1": 1}, "mu": {"x": 2}}, "mu.x"),
])
def test_policy_errors(doc, path):
    with pytest.raises(InputError) as info:
        parse_policy(doc)
    assert path in str(info.value)


def test_missing_lambda_names_key():
    pol = DwellPolicy(SBASDT, {1: 1.0}, {(2, 1): 3.0})
    with pytest.raises(InputError, match=r"\(2,2\|1\)"):
        threshold_table(pol)


# -- statistics --------------------------------------------------------------

def test_statistics_examples():
    sig = SwitchingSignal.from_segments([(1, 1.0), (2, 1.0)])
    s = compute_statistics(sig, 0, 2)
    assert s.n_pair[(2, 1)] == 1
    assert s.t_succ[(2, 1)] == 1.0 and s.t_pred[(2, 1)] == 1.0
    assert s.t_mode == {1: 1.0, 2: 1.0}

    sig = SwitchingSignal.from_segments([(1, 1), (2, 1), (1, 1), (2, 1)])
    s = compute_statistics(sig, 0, 4)
    assert s.n_pair == {(1, 2): 1, (2, 1): 2}
    assert s.t_succ[(2, 1)] == 2.0 and s.t_succ[(1, 2)] == 1.0

    s = compute_statistics(SwitchingSignal.from_segments([(1, 1.0), (2, 1.0)]), 0, 0.5)
    assert all(v == 0 for v in s.n_pair.values())
    assert s.t_mode[1] == 0.5


def test_statistics_interval_errors():
    sig = SwitchingSignal.from_segments([(1, 1.0), (2, 1.0)])
    for t1, t2 in ((-0.1, 1), (1, 1), (0, 2.5)):
        with pytest.raises(InputError):
            compute_statistics(sig, t1, t2)


def _assert_matches_oracle(segs, t1, t2):
    s = compute_statistics(SwitchingSignal.from_segments(segs), t1, t2)
    n_mode, t_mode, n_pair, t_succ, t_pred = oracles.brute_stats(segs, t1, t2)
    assert s.n_mode == n_mode
    assert s.n_pair == n_pair
    for mine, ref in ((s.t_mode, t_mode), (s.t_succ, t_succ), (s.t_pred, t_pred)):
        assert set(mine) >= set(ref)
        for k in mine:
            assert mine[k] == pytest.approx(ref.get(k, 0.0), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), s=st.integers(2, 4), nseg=st.integers(1, 30),
       a=st.floats(0, 1), b=st.floats(0, 1))
def test_statistics_match_brute_force(seed, s, nseg, a, b):
    segs = oracles.random_segments(np.random.default_rng(seed), s, nseg)
    h = sum(d for _, d in segs)
    t1, t2 = sorted((a * h, b * h))
    if t2 - t1 < 1e-9:
        t1, t2 = 0.0, h
    _assert_matches_oracle(segs, t1, t2)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), nseg=st.integers(2, 20))
def test_statistics_additive(seed, nseg):
    rng = np.random.default_rng(seed)
    sig = SwitchingSignal.from_segments(oracles.random_segments(rng, 3, nseg))
    t1, tm, t2 = np.sort(rng.uniform(0, sig.horizon, 3))
    if not t1 < tm < t2:
        return
    a, b, c = (compute_statistics(sig, t1, tm), compute_statistics(sig, tm, t2),
               compute_statistics(sig, t1, t2))
    for k in c.n_pair:
        assert a.n_pair[k] + b.n_pair[k] == c.n_pair[k]
        assert a.t_succ[k] + b.t_succ[k] == pytest.approx(c.t_succ[k], abs=1e-12)


# -- admissibility -----------------------------------------------------------

def test_per_event_dwell_is_admissible():
    pol = DwellPolicy(SBASDT, LAM, MU)
    taus = threshold_table(pol)
    segs, cur, prev = [], 1, None
    for nxt in (2, 1, 3, 1, 2, 3, 2, 1, 3):
        d = 0.5 if prev is None else max(taus[(cur, prev)], 0.05)
        segs.append((cur, d))
        prev, cur = cur, nxt
    assert check_admissible(SwitchingSignal.from_segments(segs), pol).admissible


def test_single_segment_always_admissible():
    sig = SwitchingSignal.from_segments([(2, 0.01)])
    for scheme, mu in ((SBASDT, MU), (SBAPDT, MU), (MDADT, MU_MODE), (ADT, {"all": 41.0})):
        assert check_admissible(sig, DwellPolicy(scheme, LAM, mu)).admissible


def test_fast_alternation_is_caught():
    lam = {1: 1.0, 2: 1.0}
    mu = {(1, 2): math.e, (2, 1): math.e}
    pol = DwellPolicy(SBASDT, lam, mu, chatter={(1, 2): 0, (2, 1): 0})
    segs = [(1 if i % 2 == 0 else 2, 0.5) for i in range(20)]
    report = check_admissible(SwitchingSignal.from_segments(segs), pol)
    assert not report.admissible
    bad = report.violations[0]
    a, b = bad.interval
    assert 0 <= a < b <= 10
    n, t = oracles.key_nt(SBASDT, bad.key, segs, a, b + 1e-9)
    assert n > 0 + t / bad.tau


def test_report_serializes():
    pol = DwellPolicy(MDADT, LAM, MU_MODE)
    rep = check_admissible(SwitchingSignal.from_segments([(1, 0.1), (2, 0.1), (1, 0.1)]), pol)
    d = rep.to_dict()
    assert d["admissible"] is False
    assert "INADMISSIBLE" in rep.to_text()


def _random_policy(rng, scheme, s):
    lam = {p: float(rng.uniform(0.5, 3.0)) for p in range(1, s + 1)}
    if scheme == MDADT:
        mu = {p: float(rng.uniform(1, 6)) for p in lam}
    elif scheme == ADT:
        mu = {"all": float(rng.uniform(1, 6))}
    else:
        mu = {(p, q): float(rng.uniform(1, 6)) for p in lam for q in lam if p != q}
    return DwellPolicy(scheme, lam, mu)


@pytest.mark.parametrize("scheme", [ADT, MDADT, SBASDT, SBAPDT])
def test_extremal_intervals_agree_with_dense_grid(scheme):
    rng = np.random.default_rng(2024)
    seen = set()
    for k in range(25):
        pol = _random_policy(rng, scheme, 3)
        segs = oracles.random_segments(rng, 3, int(rng.integers(2, 8)))
        got = check_admissible(SwitchingSignal.from_segments(segs), pol).admissible
        ref = oracles.grid_admissible(segs, scheme, threshold_table(pol), extra=15, seed=k)
        assert got == ref, (segs, pol)
        seen.add(got)
    assert seen == {True, False}


def test_discrete_extremal_intervals():
    rng = np.random.default_rng(7)
    for k in range(40):
        lam = {1: 0.3, 2: 0.5, 3: 0.2}
        mu = {(p, q): float(rng.uniform(1, 3)) for p in lam for q in lam if p != q}
        pol = DwellPolicy(SBASDT, lam, mu, time_domain="discrete")
        segs = oracles.random_segments(rng, 3, int(rng.integers(2, 8)), integer=True)
        got = check_admissible(SwitchingSignal.from_segments(segs), pol).admissible
        # integer grid is exhaustive for step signals
        h = sum(d for _, d in segs)
        ok = True
        for key, tau in threshold_table(pol).items():
            for a in range(h):
                for b in range(a + 1, h + 1):
                    n, t = oracles.key_nt(SBASDT, key, segs, a, b)
                    ok &= n <= 1 + t / tau + 1e-9
        assert got == ok


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), factor=st.floats(1.0, 5.0), extra=st.integers(0, 3))
def test_admissibility_monotone(seed, factor, extra):
    rng = np.random.default_rng(seed)
    pol = _random_policy(rng, SBASDT, 3)
    sig = SwitchingSignal.from_segments(oracles.random_segments(rng, 3, 12))
    base = check_admissible(sig, pol).admissible
    # larger mu -> larger tau: can only lose admissibility
    stricter = DwellPolicy(SBASDT, pol.lam, {k: v * factor for k, v in pol.mu.items()})
    if check_admissible(sig, stricter).admissible:
        assert base
    # larger chatter bound: can only gain admissibility
    looser = DwellPolicy(SBASDT, pol.lam, pol.mu, {k: 1 + extra for k in pol.mu})
    if base:
        assert check_admissible(sig, looser).admissible


def test_unit_mu_key_never_violated():
    pol = DwellPolicy(SBASDT, LAM, MU)
    segs = [(2 if i % 2 == 0 else 3, 0.001) for i in range(50)]
    rep = check_admissible(SwitchingSignal.from_segments(segs), pol)
    verdicts = {v.key: v for v in rep.verdicts}
    assert verdicts[(2, 3)].admissible
    assert not verdicts[(3, 2)].admissible
