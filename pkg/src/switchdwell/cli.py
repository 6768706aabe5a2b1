"""Command-line front end.

Exit status: 0 on success / feasible / admissible, 1 on infeasible /
inadmissible / failed check, 2 on input errors.
"""

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Optional

import numpy as np

from .certify import StabilityCertificate, certify_linear, verify_certificate
from .dwell import (
    MDADT, SBAPDT, SBASDT, DwellPolicy, check_admissible, key_label, key_owner,
    normalize_scheme, parse_policy, threshold_table,
)
from .errors import InfeasibleError, InputError, SwitchDwellError, SynthesisError, UnsupportedError
from .example import bundled_example
from .model import parse_signal, parse_system, signal_to_document, system_to_document
from .sim import SignalGenSpec, check_envelope, fit_gues, generate_signal, simulate
from .synth import parse_gains, synthesize, validate_gains

__all__ = ["RunConfig", "run", "main", "bundled_example", "round_half_away"]

COMMANDS = ("certify", "synthesize", "thresholds", "check-signal", "gen-signal", "simulate",
            "report")
EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


@dataclass
class RunConfig:
    command: str
    system: Optional[str] = None
    policy: Optional[str] = None
    signal: Optional[str] = None
    gains: Optional[str] = None
    certificate: Optional[str] = None
    out: str = "out"
    scheme: Optional[str] = None
    seed: int = 7
    horizon: float = 10.0
    step: float = 0.01
    digits: int = 2
    x0: Optional[list] = None
    violation: Optional[float] = None
    stdout: object = field(default=None, repr=False)
    stderr: object = field(default=None, repr=False)


def round_half_away(x, digits):
    """Round half away from zero, as printed tables do."""
    q = Decimal(1).scaleb(-digits)
    d = Decimal(float(x)).quantize(q, rounding=ROUND_HALF_UP)
    return float(d)


def _fmt(x, digits):
    return f"{round_half_away(x, digits):.{digits}f}"


# ----------------------------------------------------------------------------
# io helpers


def _read_json(path, what):
    if path is None:
        raise InputError(f"--{what} is required for this command")
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError(f"{what} file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{what} file {path} is not valid JSON: {exc}") from None


def _write_json(out, name, obj):
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, name)
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _write_text(out, name, text):
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, name)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _table(rows):
    widths = [max(len(str(r[i])) for r in rows) for i in range(len(rows[0]))]
    return "\n".join(
        "  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows
    ) + "\n"


def _load_system(cfg):
    if cfg.system is None:
        return bundled_example().system
    return parse_system(_read_json(cfg.system, "system"))


def _lambda_for(cfg, system):
    if cfg.policy is not None:
        pol = parse_policy(_read_json(cfg.policy, "policy"), system.time_domain)
        if pol.lam:
            return pol.lam
    if system.lam:
        return system.lam
    raise InputError("decay rates missing: give 'lambda' in the system or policy document")


def _load_policy(cfg, time_domain=None):
    if cfg.policy is not None:
        pol = parse_policy(_read_json(cfg.policy, "policy"), time_domain)
        if cfg.scheme and normalize_scheme(cfg.scheme) != pol.scheme:
            raise InputError(f"--scheme {cfg.scheme} conflicts with policy scheme {pol.scheme}")
        return pol
    if cfg.system is not None:
        system = _load_system(cfg)
        if system.lam and system.mu:
            scheme = normalize_scheme(cfg.scheme or SBASDT)
            mu = _mu_for_scheme(scheme, system.mu)
            return DwellPolicy(scheme, dict(system.lam), mu, dict(system.chatter or {}),
                               system.time_domain)
        raise InputError("no policy: give --policy or lambda/mu in the system document")
    return bundled_example().policy(normalize_scheme(cfg.scheme or SBASDT))


def _mu_for_scheme(scheme, mu):
    pair_keys = {k: v for k, v in mu.items() if isinstance(k, tuple)}
    mode_keys = {k: v for k, v in mu.items() if not isinstance(k, tuple)}
    if scheme == MDADT:
        if mode_keys:
            return mode_keys
        out = {}
        for (p, _), v in pair_keys.items():
            out[p] = max(out.get(p, 1.0), v)
        return out
    if scheme in (SBASDT, SBAPDT):
        if not pair_keys:
            raise InputError(f"{scheme} needs mu keyed 'p|q'", "mu")
        return pair_keys
    return {"all": max(mu.values())}


def _gains_for(cfg, system):
    if cfg.gains is None:
        return None
    return parse_gains(_read_json(cfg.gains, "gains"), system)


# ----------------------------------------------------------------------------
# commands


def threshold_rows(policy, digits):
    taus = threshold_table(policy)
    rows = []
    for key in policy.keys:
        tau = taus[key]
        lam = policy.lam[key_owner(policy.scheme, key)] if policy.scheme != "ADT" else min(
            policy.lam.values())
        rows.append({
            "scheme": policy.scheme,
            "key": key_label(policy.scheme, key),
            "mu": policy.mu[key],
            "lambda": lam,
            "tau": tau,
            f"tau_{digits}dp": _fmt(tau, digits),
            "tau_1dp": _fmt(tau, 1),
        })
    return rows


def _rows_csv(rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def _rows_text(rows, digits):
    head = ("scheme", "key", "mu", "lambda", "tau*", f"tau*({digits}dp)", "tau*(1dp)")
    body = [
        (r["scheme"], r["key"], f"{r['mu']:g}", f"{r['lambda']:g}", f"{r['tau']:.6f}",
         r[f"tau_{digits}dp"], r["tau_1dp"])
        for r in rows
    ]
    return _table([head] + body)


def cmd_thresholds(cfg):
    policy = _load_policy(cfg)
    rows = threshold_rows(policy, cfg.digits)
    _write_text(cfg.out, "thresholds.csv", _rows_csv(rows))
    cfg.stdout.write(_rows_text(rows, cfg.digits))
    return EXIT_OK


def _certify(cfg):
    system = _load_system(cfg)
    lam = _lambda_for(cfg, system)
    gains = _gains_for(cfg, system)
    target = system.closed_loop(gains) if gains is not None else system
    scheme = normalize_scheme(cfg.scheme or SBASDT)
    return target, certify_linear(target, lam, scheme)


def _cert_text(cert, digits):
    rows = [("pair", "mu(min)", "jump margin")]
    for pq in sorted(cert.mu_table):
        rows.append((f"{pq[0]}|{pq[1]}", f"{cert.mu_table[pq]:.6g}",
                     f"{cert.jump_margins[pq]:.3e}"))
    text = _table(rows)
    rows = [("mode", "lambda", "decay margin", "k1", "k2")]
    for p in cert.modes:
        rows.append((str(p), f"{cert.lam[p]:g}", f"{cert.decay_margins[p]:.3e}",
                     f"{cert.k1(p):.6g}", f"{cert.k2(p):.6g}"))
    text += _table(rows)
    pol = cert.policy()
    text += _rows_text(threshold_rows(pol, digits), digits)
    return text


def cmd_certify(cfg):
    target, cert = _certify(cfg)
    report = verify_certificate(target, cert)
    _write_json(cfg.out, "certificate.json", cert.to_dict())
    _write_json(cfg.out, "margins.json", report.to_dict())
    cfg.stdout.write(_cert_text(cert, cfg.digits))
    cfg.stdout.write(f"verification: {'pass' if report.passed else 'FAIL'}\n")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_synthesize(cfg):
    system = _load_system(cfg)
    lam = _lambda_for(cfg, system)
    scheme = normalize_scheme(cfg.scheme or SBASDT)
    result = synthesize(system, lam, scheme)
    report = verify_certificate(system.closed_loop(result.gains), result.certificate)
    _write_json(cfg.out, "gains.json", result.gains_document())
    _write_json(cfg.out, "synthesis.json", result.to_dict())
    _write_json(cfg.out, "certificate.json", result.certificate.to_dict())
    rows = [("mode", "K", "poles")]
    for p in sorted(result.gains):
        rows.append((str(p), np.array2string(result.gains[p].ravel(), precision=6),
                     np.array2string(result.poles[p], precision=6)))
    cfg.stdout.write(_table(rows))
    cfg.stdout.write(_cert_text(result.certificate, cfg.digits))
    cfg.stdout.write(f"verification: {'pass' if report.passed else 'FAIL'}\n")
    return EXIT_OK if report.passed else EXIT_FAIL


def _signal(cfg):
    return parse_signal(_read_json(cfg.signal, "signal"))


def cmd_check_signal(cfg):
    domain = None
    if cfg.system is not None:
        domain = _load_system(cfg).time_domain
    policy = _load_policy(cfg, domain)
    signal = _signal(cfg)
    report = check_admissible(signal, policy)
    _write_json(cfg.out, "admissibility.json", report.to_dict())
    cfg.stdout.write(report.to_text() + "\n")
    return EXIT_OK if report.admissible else EXIT_FAIL


def cmd_gen_signal(cfg):
    policy = _load_policy(cfg)
    spec = SignalGenSpec(policy, cfg.horizon, cfg.seed, violation_factor=cfg.violation,
                         min_dwell=1 if policy.time_domain == "discrete" else 0.1)
    signal = generate_signal(spec)
    report = check_admissible(signal, policy)
    doc = signal_to_document(signal)
    doc["metadata"] = spec.to_dict()
    _write_json(cfg.out, "signal.json", doc)
    cfg.stdout.write(json.dumps(_jsonable(signal_to_document(signal))) + "\n")
    cfg.stdout.write(report.to_text() + "\n")
    return EXIT_OK


def _x0(cfg, n):
    if cfg.x0 is None:
        return np.ones(n)
    x0 = np.array(cfg.x0, dtype=float)
    if x0.shape != (n,):
        raise InputError(f"--x0 needs {n} values")
    return x0


def cmd_simulate(cfg):
    system = _load_system(cfg)
    gains = _gains_for(cfg, system)
    target = system.closed_loop(gains) if gains is not None else system
    signal = _signal(cfg)
    cert = None
    if cfg.certificate is not None:
        cert = StabilityCertificate.from_dict(_read_json(cfg.certificate, "certificate"))
    step = 1.0 if system.time_domain == "discrete" else cfg.step
    traj = simulate(target, signal, _x0(cfg, system.state_dim), step, certificate=cert)
    traj.to_csv(os.path.join(_ensure(cfg.out), "trajectory.csv"))
    summary = {"samples": len(traj), "diverged": traj.diverged,
               "final_norm": float(traj.norms[-1]), "initial_norm": float(traj.norms[0])}
    if len(traj) >= 10 and traj.norms[0] > 0:
        summary["gues"] = fit_gues(traj).to_dict()
    if cert is not None:
        summary["envelope"] = check_envelope(traj, cert, signal).to_dict()
    _write_json(cfg.out, "simulation.json", summary)
    cfg.stdout.write(json.dumps(_jsonable(summary), sort_keys=True) + "\n")
    failed = traj.diverged or (cert is not None and not summary["envelope"]["passed"])
    return EXIT_FAIL if failed else EXIT_OK


def _ensure(out):
    os.makedirs(out, exist_ok=True)
    return out


def cmd_report(cfg):
    """Full pipeline on the bundled example (or ``--system``)."""
    ex = bundled_example()
    out = cfg.out
    lines = []
    ok = True

    rows = []
    for scheme in (MDADT, SBASDT, SBAPDT):
        rows += threshold_rows(ex.policy(scheme), cfg.digits)
    _write_text(out, "thresholds.csv", _rows_csv(rows))
    lines.append(_rows_text(rows, cfg.digits))

    if cfg.system is not None:
        system = _load_system(cfg)
        lam = _lambda_for(cfg, system)
        gain_sets = {}
    else:
        system, lam, gain_sets = ex.system, ex.lam, ex.gains

    validation = {}
    for name, gains in sorted(gain_sets.items()):
        rep = validate_gains(system, gains, lam)
        validation[name] = rep.to_dict()
        ok &= rep.passed
        lines.append(f"published {name} gains: {'pass' if rep.passed else 'FAIL'}\n")
    if validation:
        _write_json(out, "gain_validation.json", validation)

    scheme = normalize_scheme(cfg.scheme or SBASDT)
    result = synthesize(system, lam, scheme)
    closed = system.closed_loop(result.gains)
    cert = result.certificate
    margins = verify_certificate(closed, cert)
    ok &= margins.passed
    _write_json(out, "gains.json", result.gains_document())
    _write_json(out, "certificate.json", cert.to_dict())
    lines.append(_cert_text(cert, cfg.digits))
    lines.append(f"certificate verification: {'pass' if margins.passed else 'FAIL'}\n")

    policy = cert.policy()
    spec = SignalGenSpec(policy, cfg.horizon, cfg.seed)
    signal = generate_signal(spec)
    adm = check_admissible(signal, policy)
    ok &= adm.admissible
    sig_doc = signal_to_document(signal)
    sig_doc["metadata"] = spec.to_dict()
    _write_json(out, "signal.json", sig_doc)
    lines.append(adm.to_text() + "\n")

    x0 = _x0(cfg, system.state_dim)
    traj = simulate(closed, signal, x0, cfg.step, certificate=cert)
    traj.to_csv(os.path.join(_ensure(out), "trajectory.csv"))
    env = check_envelope(traj, cert, signal)
    fit = fit_gues(traj)
    decay = float(traj.norms[-1] / traj.norms[0])
    ok &= env.passed and fit.gamma > 0 and not traj.diverged
    summary = {
        "system": system_to_document(system),
        "lambda": {str(p): v for p, v in sorted(lam.items())},
        "scheme": scheme,
        "seed": cfg.seed,
        "horizon": cfg.horizon,
        "step": cfg.step,
        "x0": x0.tolist(),
        "gain_validation": {k: v["passed"] for k, v in validation.items()},
        "certificate_verified": margins.passed,
        "signal_admissible": adm.admissible,
        "envelope": env.to_dict(),
        "gues": fit.to_dict(),
        "final_norm_ratio": decay,
        "passed": bool(ok),
    }
    _write_json(out, "report.json", summary)
    lines.append(
        f"envelope: {'pass' if env.passed else 'FAIL'} (max excess {env.max_excess:.3e})\n"
        f"GUES fit: eta={fit.eta:.6g} gamma={fit.gamma:.6g}\n"
        f"|x({cfg.horizon:g})|/|x(0)| = {decay:.6e}\n"
    )
    cfg.stdout.write("".join(lines))
    return EXIT_OK if ok else EXIT_FAIL


HANDLERS = {
    "certify": cmd_certify,
    "synthesize": cmd_synthesize,
    "thresholds": cmd_thresholds,
    "check-signal": cmd_check_signal,
    "gen-signal": cmd_gen_signal,
    "simulate": cmd_simulate,
    "report": cmd_report,
}


def run(config):
    """Execute one command; returns the exit status."""
    config.stdout = config.stdout or sys.stdout
    config.stderr = config.stderr or sys.stderr
    try:
        return HANDLERS[config.command](config)
    except (InputError, UnsupportedError) as exc:
        config.stderr.write(f"input error: {exc}\n")
        return EXIT_INPUT
    except (InfeasibleError, SynthesisError) as exc:
        config.stderr.write(f"infeasible: {exc}\n")
        return EXIT_FAIL
    except SwitchDwellError as exc:
        config.stderr.write(f"error: {exc}\n")
        return EXIT_FAIL


def build_parser():
    parser = argparse.ArgumentParser(
        prog="switchdwell",
        description="Dwell-time certification of switched linear systems.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--system", help="system-description JSON")
    parser.add_argument("--policy", help="dwell policy JSON")
    parser.add_argument("--signal", help="switching signal JSON")
    parser.add_argument("--gains", help="state-feedback gains JSON {mode: [[row]]}")
    parser.add_argument("--certificate", help="certificate JSON (simulate)")
    parser.add_argument("--scheme", type=str.lower,
                        choices=("adt", "mdadt", "sbasdt", "sbapdt"))
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--horizon", type=float, default=10.0)
    parser.add_argument("--step", type=float, default=0.01)
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--digits", type=int, default=2, help="table rounding digits")
    parser.add_argument("--x0", type=float, nargs="+", help="initial state")
    parser.add_argument("--violation", type=float,
                        help="gen-signal: scale dwells by this factor in (0, 1)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    cfg = RunConfig(**vars(args))
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
