"""Job descriptions for the command-line pipeline.

A job is one JSON document naming the plant, the solver resolutions, the
decay target (with optional explicit gains), the certificate search budget,
and the simulation run.  The schema is strict: unknown keys are rejected so
a typo fails loudly instead of silently falling back to a default.  Parsed
jobs round-trip: ``JobConfig.from_dict(cfg.to_dict())`` reproduces ``cfg``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Any

import jsonschema

from .certification import SearchBudget
from .coeffs import Coefficient
from .errors import ConfigError
from .spectral import CertificateKind, Measurement, PlantSpec

__all__ = ["SCHEMA_VERSION", "FAMILY_BY_THEOREM", "THEOREM_BY_FAMILY", "JobConfig"]

SCHEMA_VERSION = "rdstab/1"

# Command-line shorthand for the certificate families: 1 and 2 certify
# Dirichlet-measurement loops in the H1 and L2 energies, 3 certifies
# Neumann-measurement loops in H1.
FAMILY_BY_THEOREM = {
    1: CertificateKind.H1_DIRICHLET,
    2: CertificateKind.L2_DIRICHLET,
    3: CertificateKind.H1_NEUMANN,
}
THEOREM_BY_FAMILY = {kind: number for number, kind in FAMILY_BY_THEOREM.items()}

_NUMBER = {"type": "number"}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_NUMBERS = {"type": "array", "items": _NUMBER, "minItems": 1}

# A coefficient is either a bare number (constant) or one of the closed-form
# descriptors produced by Coefficient.to_dict.
_COEFFICIENT = {
    "oneOf": [
        {"type": "number"},
        {"type": "object",
         "properties": {"kind": {"const": "constant"}, "value": _NUMBER},
         "required": ["kind", "value"], "additionalProperties": False},
        {"type": "object",
         "properties": {"kind": {"const": "polynomial"},
                        "coeffs": {"type": "array", "items": _NUMBER, "minItems": 1}},
         "required": ["kind", "coeffs"], "additionalProperties": False},
        {"type": "object",
         "properties": {"kind": {"const": "trig"}, "offset": _NUMBER,
                        "amplitude": _NUMBER, "cycles": _NUMBER, "phase": _NUMBER,
                        "function": {"enum": ["cos", "sin"]}},
         "required": ["kind"], "additionalProperties": False},
        {"type": "object",
         "properties": {"kind": {"const": "samples"},
                        "values": {"type": "array", "items": _NUMBER, "minItems": 2}},
         "required": ["kind", "values"], "additionalProperties": False},
    ]
}

_SCHEMA = {
    "type": "object",
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "plant": {
            "type": "object",
            "properties": {
                "diffusion": _COEFFICIENT,
                "reaction": _COEFFICIENT,
                "theta1": {"type": "number", "minimum": 0},
                "theta2": {"type": "number", "minimum": 0},
                "delay": _POSITIVE,
                "measurement": {"enum": ["dirichlet", "neumann"]},
            },
            "required": ["diffusion", "reaction", "theta1", "theta2",
                         "delay", "measurement"],
            "additionalProperties": False,
        },
        "resolution": {
            "type": "object",
            "properties": {
                "modes": {"type": "integer", "minimum": 4},
                "grid": {"type": "integer", "minimum": 63},
            },
            "additionalProperties": False,
        },
        "gains": {
            "type": "object",
            "properties": {
                "delta": _POSITIVE,
                "n0": {"type": "integer", "minimum": 1},
                "K": _NUMBERS,
                "L": _NUMBERS,
            },
            "required": ["delta"],
            "dependentRequired": {"K": ["L"], "L": ["K"]},
            "additionalProperties": False,
        },
        "certify": {
            "type": "object",
            "properties": {
                "theorem": {"enum": [1, 2, 3]},
                "n_max": {"type": "integer", "minimum": 2},
                "alphas": {"type": "array", "items": _POSITIVE, "minItems": 1},
                "beta_scales": {"type": "array", "items": _POSITIVE, "minItems": 1},
                "gamma_scales": {"type": "array", "items": _POSITIVE, "minItems": 1},
                "epsilon": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.5},
            },
            "dependentRequired": {"beta_scales": ["gamma_scales"],
                                  "gamma_scales": ["beta_scales"]},
            "additionalProperties": False,
        },
        "simulate": {
            "type": "object",
            "properties": {
                "initial": _COEFFICIENT,
                "horizon": _POSITIVE,
                "dt": _POSITIVE,
                "grid": {"type": "integer", "minimum": 5},
                "stride": {"type": "integer", "minimum": 1},
                "modes": {"type": "integer", "minimum": 2},
            },
            "required": ["initial", "horizon"],
            "additionalProperties": False,
        },
        "reference_modes": {
            "type": "object",
            "patternProperties": {"^[123]$": {"type": "integer", "minimum": 1}},
            "additionalProperties": False,
        },
    },
    "required": ["schema", "plant"],
    "additionalProperties": False,
}


def _validate(raw: dict[str, Any]) -> None:
    validator = jsonschema.Draft202012Validator(_SCHEMA)
    error = jsonschema.exceptions.best_match(validator.iter_errors(raw))
    if error is not None:
        where = "/".join(str(part) for part in error.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {error.message}")


def _coefficient(value: Any) -> Coefficient:
    if isinstance(value, (int, float)):
        return Coefficient.constant(float(value))
    return Coefficient.from_dict(value)


@dataclass(frozen=True)
class JobConfig:
    """Validated job description; sections not present keep their defaults.

    ``delta`` is None when the config has no gains section (only the
    spectrum command works then); ``initial``/``horizon`` are None without
    a simulate section.  ``reference_modes`` maps a family number to the
    observer dimension an external reference design reports feasible, so
    the certify report can state the gap.
    """

    plant: PlantSpec
    n_modes: int = 120
    grid_size: int = 4001
    delta: float | None = None
    n0: int | None = None
    gain_k: tuple[float, ...] | None = None
    gain_l: tuple[float, ...] | None = None
    theorem: int | None = None
    n_max: int = 40
    alphas: tuple[float, ...] | None = None
    beta_scales: tuple[float, ...] | None = None
    gamma_scales: tuple[float, ...] | None = None
    epsilon: float = 0.125
    initial: Coefficient | None = None
    horizon: float | None = None
    dt: float | None = None
    sim_grid: int = 201
    stride: int = 1
    sim_modes: int | None = None
    reference_modes: dict[int, int] = field(default_factory=dict)

    # -- construction ---------------------------------------------------

    @staticmethod
    def from_dict(raw: dict[str, Any]) -> "JobConfig":
        _validate(raw)
        section = raw["plant"]
        plant = PlantSpec(
            p=_coefficient(section["diffusion"]),
            q_tilde=_coefficient(section["reaction"]),
            theta1=float(section["theta1"]),
            theta2=float(section["theta2"]),
            delay=float(section["delay"]),
            measurement=Measurement(section["measurement"]),
        )
        kw: dict[str, Any] = {"plant": plant}

        res = raw.get("resolution", {})
        if "modes" in res:
            kw["n_modes"] = int(res["modes"])
        if "grid" in res:
            kw["grid_size"] = int(res["grid"])

        gains = raw.get("gains")
        if gains is not None:
            kw["delta"] = float(gains["delta"])
            if "n0" in gains:
                kw["n0"] = int(gains["n0"])
            if "K" in gains:
                k = tuple(float(v) for v in gains["K"])
                l = tuple(float(v) for v in gains["L"])
                if len(k) != len(l):
                    raise ConfigError(
                        f"gains K and L must have equal length, got {len(k)} and {len(l)}")
                kw["gain_k"], kw["gain_l"] = k, l

        cert = raw.get("certify", {})
        if "theorem" in cert:
            kw["theorem"] = int(cert["theorem"])
        if "n_max" in cert:
            kw["n_max"] = int(cert["n_max"])
        if "alphas" in cert:
            kw["alphas"] = tuple(float(v) for v in cert["alphas"])
        if "beta_scales" in cert:
            kw["beta_scales"] = tuple(float(v) for v in cert["beta_scales"])
            kw["gamma_scales"] = tuple(float(v) for v in cert["gamma_scales"])
        if "epsilon" in cert:
            kw["epsilon"] = float(cert["epsilon"])

        sim = raw.get("simulate")
        if sim is not None:
            kw["initial"] = _coefficient(sim["initial"])
            kw["horizon"] = float(sim["horizon"])
            if "dt" in sim:
                kw["dt"] = float(sim["dt"])
            if "grid" in sim:
                kw["sim_grid"] = int(sim["grid"])
            if "stride" in sim:
                kw["stride"] = int(sim["stride"])
            if "modes" in sim:
                kw["sim_modes"] = int(sim["modes"])

        refs = raw.get("reference_modes", {})
        if refs:
            kw["reference_modes"] = {int(k): int(v) for k, v in refs.items()}
        return JobConfig(**kw)

    @staticmethod
    def from_file(path) -> "JobConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
        return JobConfig.from_dict(raw)

    # -- serialization --------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "schema": SCHEMA_VERSION,
            "plant": {
                "diffusion": self.plant.p.to_dict(),
                "reaction": self.plant.q_tilde.to_dict(),
                "theta1": float(self.plant.theta1),
                "theta2": float(self.plant.theta2),
                "delay": float(self.plant.delay),
                "measurement": self.plant.measurement.value,
            },
            "resolution": {"modes": self.n_modes, "grid": self.grid_size},
        }
        if self.delta is not None:
            gains: dict[str, Any] = {"delta": self.delta}
            if self.n0 is not None:
                gains["n0"] = self.n0
            if self.gain_k is not None and self.gain_l is not None:
                gains["K"] = list(self.gain_k)
                gains["L"] = list(self.gain_l)
            out["gains"] = gains
        cert: dict[str, Any] = {"n_max": self.n_max, "epsilon": self.epsilon}
        if self.theorem is not None:
            cert["theorem"] = self.theorem
        if self.alphas is not None:
            cert["alphas"] = list(self.alphas)
        if self.beta_scales is not None and self.gamma_scales is not None:
            cert["beta_scales"] = list(self.beta_scales)
            cert["gamma_scales"] = list(self.gamma_scales)
        out["certify"] = cert
        if self.initial is not None and self.horizon is not None:
            sim: dict[str, Any] = {
                "initial": self.initial.to_dict(),
                "horizon": self.horizon,
                "grid": self.sim_grid,
                "stride": self.stride,
            }
            if self.dt is not None:
                sim["dt"] = self.dt
            if self.sim_modes is not None:
                sim["modes"] = self.sim_modes
            out["simulate"] = sim
        if self.reference_modes:
            out["reference_modes"] = {
                str(k): int(v) for k, v in sorted(self.reference_modes.items())}
        return out

    # -- derived objects ------------------------------------------------

    def family(self, override: int | None = None) -> CertificateKind:
        """Certificate family from the CLI flag or the certify section."""
        number = override if override is not None else self.theorem
        if number is None:
            raise ConfigError(
                "no certificate family selected: set certify.theorem or pass --theorem")
        return FAMILY_BY_THEOREM[number]

    def budget(self) -> SearchBudget:
        kw: dict[str, Any] = {"n_max": self.n_max, "epsilon": self.epsilon}
        if self.alphas is not None:
            kw["alpha_grid"] = self.alphas
        if self.beta_scales is not None and self.gamma_scales is not None:
            kw["scale_grid"] = tuple(product(self.beta_scales, self.gamma_scales))
        return SearchBudget(**kw)

    def gains_delta(self) -> float:
        if self.delta is None:
            raise ConfigError("this command needs a gains section with a decay target delta")
        return self.delta
