"""The three-mode, two-state, single-input benchmark shipped with the package."""

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .dwell import MDADT, SBAPDT, SBASDT, DwellPolicy
from .model import parse_system

_DATA = "three_mode_example.json"


@dataclass(frozen=True)
class BundledExample:
    system: object
    lam: dict
    mu: dict
    mdadt_mu: dict
    gains: dict

    def policy(self, scheme):
        """Dwell policy for ``scheme`` built from the published jump gains."""
        mu = self.mdadt_mu if scheme == MDADT else self.mu
        return DwellPolicy(scheme, dict(self.lam), dict(mu))

    @property
    def sbasdt(self):
        return self.policy(SBASDT)

    @property
    def sbapdt(self):
        return self.policy(SBAPDT)

    @property
    def mdadt(self):
        return self.policy(MDADT)


def load_document():
    text = resources.files("switchdwell.data").joinpath(_DATA).read_text()
    return json.loads(text)


def bundled_example():
    """System, decay rates, jump gains and the two published gain sets.

    ``mu[(2, 3)]`` is stored as exactly 1 (the limit written for that pair).
    """
    doc = load_document()
    system = parse_system({k: doc[k] for k in ("time_domain", "state_dim", "input_dim",
                                               "modes", "lambda", "mu")})
    gains = {
        scheme: {int(p): np.array(k, dtype=float) for p, k in table.items()}
        for scheme, table in doc["gains"].items()
    }
    mdadt_mu = {int(p): float(v) for p, v in doc["mdadt_mu"].items()}
    lam = {p: float(v) for p, v in system.lam.items()}
    mu = {k: float(v) for k, v in system.mu.items()}
    return BundledExample(system, lam, mu, mdadt_mu, gains)
