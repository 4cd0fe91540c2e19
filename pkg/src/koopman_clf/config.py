"""System configuration: JSON schema, validation, example generators.

A config bundles the switched family (sparse complex coefficients, one
list per subsystem), the analysis choices (truncation degree, weight
scheme, optional radius request) and the simulation parameters used by
the audit.  Components are 1-based in the JSON for readability; the
library is 0-based internally.
"""

import json
import math
from dataclasses import dataclass, field as dc_field

from .vectorfield import PolyVectorField, SwitchedFamily


@dataclass(frozen=True)
class SimulationParams:
    dt: float = 1e-3
    horizon: float = 20.0
    trials: int = 100
    points: int = 50
    seed: int = 7
    min_dwell: float = 0.05
    max_dwell: float = 1.0

    def __post_init__(self):
        if self.dt <= 0 or self.horizon < 0:
            raise ValueError("need dt > 0 and horizon >= 0")
        if self.trials < 1 or self.points < 1:
            raise ValueError("trials and points must be >= 1")
        if self.min_dwell <= 0 or self.max_dwell < self.min_dwell:
            raise ValueError("need 0 < min_dwell <= max_dwell")

    def to_json_dict(self):
        return {
            "dt": self.dt,
            "horizon": self.horizon,
            "trials": self.trials,
            "points": self.points,
            "seed": self.seed,
            "min_dwell": self.min_dwell,
            "max_dwell": self.max_dwell,
        }


@dataclass
class SystemConfig:
    """Declarative description of one analysis problem."""

    dimension: int
    truncation_degree: int
    subsystems: list  # list of (coefficient dict list per component, tail_l1)
    scheme_kind: str = "polynomial"
    xi: float = None
    kappa: float = None
    eta: float = 0.5
    rho_request: float = None
    simulation: SimulationParams = dc_field(default_factory=SimulationParams)

    def build_family(self):
        fields = []
        for comps, tail in self.subsystems:
            fields.append(PolyVectorField(comps, tail_l1=tail))
        return SwitchedFamily(fields)

    def to_json_dict(self):
        subs = []
        for comps, tail in self.subsystems:
            coeffs = []
            for l, table in enumerate(comps):
                for alpha in sorted(table):
                    v = complex(table[alpha])
                    coeffs.append(
                        {
                            "component": l + 1,
                            "exponents": list(alpha),
                            "re": v.real,
                            "im": v.imag,
                        }
                    )
            subs.append(
                {
                    "coefficients": coeffs,
                    "tail_l1": None if tail is None else list(tail),
                }
            )
        return {
            "dimension": self.dimension,
            "truncation_degree": self.truncation_degree,
            "scheme": {"kind": self.scheme_kind, "xi": self.xi, "kappa": self.kappa},
            "eta": self.eta,
            "rho_request": self.rho_request,
            "subsystems": subs,
            "simulation": self.simulation.to_json_dict(),
        }

    def to_json(self):
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json_dict(cls, data):
        try:
            n = int(data["dimension"])
            degree = int(data["truncation_degree"])
            raw_subs = data["subsystems"]
        except KeyError as exc:
            raise ValueError(f"config is missing required key {exc}") from None
        if n < 1:
            raise ValueError("dimension must be >= 1")
        if degree < 2:
            raise ValueError("truncation_degree must be >= 2")
        if not raw_subs:
            raise ValueError("config needs at least one subsystem")
        subsystems = []
        for s, raw in enumerate(raw_subs):
            comps = [dict() for _ in range(n)]
            for c in raw.get("coefficients", []):
                l = int(c["component"]) - 1
                if not 0 <= l < n:
                    raise ValueError(
                        f"subsystem {s}: component {c['component']} out of range"
                    )
                alpha = tuple(int(a) for a in c["exponents"])
                if len(alpha) != n:
                    raise ValueError(
                        f"subsystem {s}: exponent list {alpha} has wrong length"
                    )
                comps[l][alpha] = complex(float(c["re"]), float(c.get("im", 0.0)))
            tail = raw.get("tail_l1")
            if tail is not None:
                tail = [float(t) for t in tail]
            subsystems.append((comps, tail))
        scheme = data.get("scheme", {}) or {}
        sim_raw = data.get("simulation", {}) or {}
        sim = SimulationParams(
            **{
                k: sim_raw[k]
                for k in (
                    "dt",
                    "horizon",
                    "trials",
                    "points",
                    "seed",
                    "min_dwell",
                    "max_dwell",
                )
                if k in sim_raw
            }
        )
        cfg = cls(
            dimension=n,
            truncation_degree=degree,
            subsystems=subsystems,
            scheme_kind=scheme.get("kind", "polynomial"),
            xi=scheme.get("xi"),
            kappa=scheme.get("kappa"),
            eta=float(data.get("eta", 0.5)),
            rho_request=data.get("rho_request"),
            simulation=sim,
        )
        cfg.build_family()  # validate coefficients eagerly
        return cfg

    @classmethod
    def from_json(cls, text):
        return cls.from_json_dict(json.loads(text))


def example1_config(a=1.0, b=0.3, degree=12):
    """Polynomial pair: a diagonal contraction and a cubic perturbation.

    Subsystem 1 is (-a z1, -a z2); subsystem 2 adds b z1^2 - b z1 z2^2 to
    the first component and (b/2) z1 z2 to the second.  The uniform
    scheme certifies the pair on the full polydisk for 3 |b| < a.
    """
    if a <= 0:
        raise ValueError("a must be positive")
    f1 = [{(1, 0): -a}, {(0, 1): -a}]
    f2 = [
        {(1, 0): -a, (2, 0): b, (1, 2): -b},
        {(0, 1): -a, (1, 1): b / 2.0},
    ]
    return SystemConfig(
        dimension=2,
        truncation_degree=degree,
        subsystems=[(f1, None), (f2, None)],
        scheme_kind="polynomial",
    )


def example2_config(mu=3.0, degree=20):
    """Analytic pair with exact tail norms, coupling strength 1/mu.

    Subsystem 1 is (-z1 + z1^2 sin^2(z1) z2 / mu, -z2), subsystem 2 the
    same with cos^2; coefficients are stored to the requested degree and
    the exact l1 norms ride along, so absolute-sum quantities are exact.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    c1 = {(1, 0): -1.0 + 0j}
    c2 = {(1, 0): -1.0 + 0j, (2, 1): 1.0 / mu}
    p = 1
    while 2 * p + 3 <= degree:
        coeff = 2.0 ** (2 * p - 1) / math.factorial(2 * p) / mu
        c1[(2 * p + 2, 1)] = (-1.0) ** (p + 1) * coeff
        c2[(2 * p + 2, 1)] = (-1.0) ** p * coeff
        p += 1
    tail1 = [1.0 + (math.cosh(2.0) - 1.0) / (2.0 * mu), 1.0]
    tail2 = [1.0 + (math.cosh(2.0) + 1.0) / (2.0 * mu), 1.0]
    f1 = [c1, {(0, 1): -1.0 + 0j}]
    f2 = [c2, {(0, 1): -1.0 + 0j}]
    return SystemConfig(
        dimension=2,
        truncation_degree=degree,
        subsystems=[(f1, tail1), (f2, tail2)],
        scheme_kind="diagonal_dominance",
    )
