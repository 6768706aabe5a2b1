import dataclasses
import math

import numpy as np
import pytest

import oracles
from switchdwell.certify import (
    StabilityCertificate, certify_linear, envelope_bound, verify_certificate,
)
from switchdwell.dwell import MDADT, SBAPDT, SBASDT
from switchdwell.errors import InfeasibleError, InputError
from switchdwell.model import SwitchingSignal, linear_system


def _random_system(rng, s=3, n=3, domain="continuous"):
    if domain == "continuous":
        mats = [oracles.random_hurwitz(rng, n, shift=1.5) for _ in range(s)]
    else:
        mats = [oracles.random_schur(rng, n, radius=0.6) for _ in range(s)]
    return linear_system(mats, time_domain=domain)


def test_identical_modes_need_no_dwell():
    sys_ = linear_system([-np.eye(2), -np.eye(2)])
    cert = certify_linear(sys_, {1: 1.0, 2: 1.0})
    np.testing.assert_allclose(cert.P[1], cert.P[2])
    assert cert.mu_table == {(1, 2): 1.0, (2, 1): 1.0}
    assert set(cert.threshold_table.values()) == {0.0}


def test_scalar_example():
    sys_ = linear_system([-np.eye(2), -2 * np.eye(2)])
    cert = certify_linear(sys_, {1: 1.0, 2: 1.0})
    # shifted -0.5 I gives P = I
    np.testing.assert_allclose(cert.P[1], np.eye(2), atol=1e-14)


def test_infeasible_names_mode():
    sys_ = linear_system([-np.eye(2), np.diag([-0.2, -3.0])])
    with pytest.raises(InfeasibleError) as info:
        certify_linear(sys_, {1: 1.0, 2: 1.0})
    assert info.value.mode == 2
    assert info.value.eigenvalue.real == pytest.approx(0.3)


def test_lambda_validation():
    sys_ = linear_system([-np.eye(2), -np.eye(2)])
    with pytest.raises(InputError):
        certify_linear(sys_, {1: 1.0})
    with pytest.raises(InputError):
        certify_linear(sys_, {1: 1.0, 2: 0.0})


@pytest.mark.parametrize("domain", ["continuous", "discrete"])
def test_random_certificates_verify(rng, domain):
    for _ in range(30):
        sys_ = _random_system(rng, domain=domain)
        lam = {p: (0.5 if domain == "continuous" else 0.3) for p in sys_.mode_ids}
        cert = certify_linear(sys_, lam)
        assert verify_certificate(sys_, cert).passed
        for p in sys_.mode_ids:
            # decay inequality holds with unit slack (scaled by 1 - lam in discrete time)
            expect = -1.0 if domain == "continuous" else -(1 - lam[p])
            assert cert.decay_margins[p] == pytest.approx(expect, abs=1e-8)
        for pq, mu in cert.mu_table.items():
            ref = max(1.0, oracles.min_mu(cert.P[pq[0]], cert.P[pq[1]]))
            assert mu == pytest.approx(ref, rel=1e-8)


def test_negated_P_fails_definiteness(rng):
    sys_ = _random_system(rng)
    cert = certify_linear(sys_, {1: 0.5, 2: 0.5, 3: 0.5})
    P = dict(cert.P)
    P[1] = -P[1]
    bad = dataclasses.replace(cert, P=P)
    rep = verify_certificate(sys_, bad)
    assert not rep.passed
    assert ("definiteness", 1) in {(c, k) for c, k, _ in rep.failures}


def test_mu_minimality_detected(rng):
    checked = 0
    for _ in range(20):
        sys_ = _random_system(rng)
        cert = certify_linear(sys_, {1: 0.5, 2: 0.5, 3: 0.5})
        for pq, mu in cert.mu_table.items():
            if mu <= 1 + 1e-6:
                continue
            table = dict(cert.mu_table)
            table[pq] = mu * (1 - 1e-4)
            rep = verify_certificate(sys_, dataclasses.replace(cert, mu_table=table))
            assert [(c, k) for c, k, _ in rep.failures] == [("jump", pq)]
            checked += 1
    assert checked > 20


def test_halved_mu_fails_on_that_pair(example):
    closed = example.system.closed_loop(example.gains["SBASDT"])
    cert = certify_linear(closed, example.lam)
    table = dict(cert.mu_table)
    table[(1, 2)] /= 2
    rep = verify_certificate(closed, dataclasses.replace(cert, mu_table=table))
    assert [(c, k) for c, k, _ in rep.failures] == [("jump", (1, 2))]


def test_scheme_independence_of_P(rng):
    sys_ = _random_system(rng)
    lam = {1: 0.5, 2: 0.7, 3: 0.4}
    a, b = certify_linear(sys_, lam, SBASDT), certify_linear(sys_, lam, SBAPDT)
    for p in sys_.mode_ids:
        np.testing.assert_array_equal(a.P[p], b.P[p])
    assert a.mu_table == b.mu_table
    assert a.threshold_table != b.threshold_table


def test_mdadt_projection(rng):
    sys_ = _random_system(rng)
    lam = {1: 0.5, 2: 0.7, 3: 0.4}
    cert = certify_linear(sys_, lam, MDADT)
    pol = cert.policy()
    for p in sys_.mode_ids:
        assert pol.mu[p] == max(v for (a, _), v in cert.mu_table.items() if a == p)


def test_certificate_round_trip(rng):
    sys_ = _random_system(rng)
    cert = certify_linear(sys_, {1: 0.5, 2: 0.5, 3: 0.5})
    back = StabilityCertificate.from_dict(cert.to_dict())
    for p in cert.P:
        np.testing.assert_array_equal(back.P[p], cert.P[p])
    assert back.mu_table == cert.mu_table
    assert back.threshold_table == cert.threshold_table
    assert verify_certificate(sys_, back).passed


def test_verify_dimension_mismatch(rng):
    sys_ = _random_system(rng, n=3)
    other = _random_system(rng, n=2)
    cert = certify_linear(other, {1: 0.5, 2: 0.5, 3: 0.5})
    with pytest.raises(InputError):
        verify_certificate(sys_, cert)


# -- envelope ----------------------------------------------------------------

def _toy_cert(lam, mu):
    sys_ = linear_system([-np.eye(1) * 5] * len(lam))
    cert = certify_linear(sys_, lam)
    return dataclasses.replace(cert, mu_table=mu)


def test_envelope_examples():
    lam = {1: 1.0, 2: 2.0}
    mu = {(1, 2): 3.0, (2, 1): 1.5}
    cert = _toy_cert(lam, mu)
    one = SwitchingSignal.from_segments([(1, 5.0)])
    assert envelope_bound(cert, one, 2.0, 1.3) == pytest.approx(2.0 * math.exp(-1.3))
    two = SwitchingSignal.from_segments([(1, 1.0), (2, 4.0)])
    expect = 2.0 * math.exp(-1.0) * 1.5 * math.exp(-2.0 * 1.5)
    assert envelope_bound(cert, two, 2.0, 2.5) == pytest.approx(expect, rel=1e-14)
    flat = _toy_cert({1: 0.7, 2: 0.7}, {(1, 2): 1.0, (2, 1): 1.0})
    assert envelope_bound(flat, two, 1.0, 3.0) == pytest.approx(math.exp(-2.1))


def test_envelope_matches_unrolled_oracle(rng):
    lam = {1: 1.0, 2: 2.0, 3: 0.5}
    mu = {(p, q): float(rng.uniform(1, 4)) for p in lam for q in lam if p != q}
    cert = _toy_cert(lam, mu)
    for _ in range(50):
        segs = oracles.random_segments(rng, 3, 10)
        sig = SwitchingSignal.from_segments(segs)
        ts = rng.uniform(0, sig.horizon, 20)
        got = envelope_bound(cert, sig, 1.7, ts)
        ref = [oracles.envelope(segs, lam, mu, 1.7, t) for t in ts]
        np.testing.assert_allclose(got, ref, rtol=1e-12)


def test_envelope_errors():
    cert = _toy_cert({1: 1.0, 2: 1.0}, {(1, 2): 2.0})
    sig = SwitchingSignal.from_segments([(1, 1.0), (2, 1.0), (1, 1.0)])
    with pytest.raises(InputError, match="1\\|2|2\\|1"):
        envelope_bound(cert, sig, 1.0, 2.5)
    with pytest.raises(InputError):
        envelope_bound(cert, sig, 1.0, 4.0)
