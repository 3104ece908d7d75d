"""Scalar coefficient functions on [0, 1].

Spatially varying plant coefficients are described either by a closed form
(constant, polynomial, trigonometric) or by samples on a uniform grid.  A
:class:`Coefficient` evaluates itself and its first derivative on arbitrary
query points; closed forms differentiate analytically, sampled data falls
back to second-order central differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ConfigError

__all__ = ["Coefficient"]

_KINDS = ("constant", "polynomial", "trig", "samples")


@dataclass(frozen=True)
class Coefficient:
    """One scalar function of x on [0, 1].

    Parameters
    ----------
    kind : str
        One of ``constant``, ``polynomial``, ``trig``, ``samples``.
    params : dict
        Kind-specific payload, see the constructors below.
    """

    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown coefficient kind {self.kind!r}")

    # -- constructors -------------------------------------------------

    @staticmethod
    def constant(value: float) -> "Coefficient":
        return Coefficient("constant", {"value": float(value)})

    @staticmethod
    def polynomial(coeffs) -> "Coefficient":
        """Polynomial sum(c[k] * x**k) with ascending coefficients."""
        c = [float(v) for v in coeffs]
        if not c:
            raise ConfigError("polynomial coefficient list must be non-empty")
        return Coefficient("polynomial", {"coeffs": c})

    @staticmethod
    def trig(offset: float = 0.0, amplitude: float = 1.0, cycles: float = 1.0,
             phase: float = 0.0, function: str = "cos") -> "Coefficient":
        """offset + amplitude * {cos|sin}(2*pi*cycles*x + phase)."""
        if function not in ("cos", "sin"):
            raise ConfigError(f"trig function must be 'cos' or 'sin', got {function!r}")
        return Coefficient("trig", {
            "offset": float(offset), "amplitude": float(amplitude),
            "cycles": float(cycles), "phase": float(phase), "function": function,
        })

    @staticmethod
    def samples(values) -> "Coefficient":
        """Samples on the uniform grid linspace(0, 1, len(values)); len >= 2."""
        v = np.asarray(values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ConfigError("samples must be a 1-D array with at least 2 entries")
        return Coefficient("samples", {"values": v.copy()})

    # -- evaluation ----------------------------------------------------

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "constant":
            return np.full_like(x, p["value"])
        if self.kind == "polynomial":
            return np.polynomial.polynomial.polyval(x, p["coeffs"])
        if self.kind == "trig":
            fn = np.cos if p["function"] == "cos" else np.sin
            return p["offset"] + p["amplitude"] * fn(2.0 * np.pi * p["cycles"] * x + p["phase"])
        v = p["values"]
        grid = np.linspace(0.0, 1.0, v.size)
        return np.interp(x, grid, v)

    def derivative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "constant":
            return np.zeros_like(x)
        if self.kind == "polynomial":
            dc = np.polynomial.polynomial.polyder(p["coeffs"])
            return np.polynomial.polynomial.polyval(x, dc)
        if self.kind == "trig":
            w = 2.0 * np.pi * p["cycles"]
            fn = np.sin if p["function"] == "cos" else np.cos
            sign = -1.0 if p["function"] == "cos" else 1.0
            return sign * p["amplitude"] * w * fn(w * x + p["phase"])
        v = p["values"]
        grid = np.linspace(0.0, 1.0, v.size)
        dv = np.gradient(v, grid, edge_order=2)
        return np.interp(x, grid, dv)

    # -- config round trip ----------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        p = dict(self.params)
        if self.kind == "samples":
            p["values"] = [float(v) for v in p["values"]]
        return {"kind": self.kind, **p}

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "Coefficient":
        if not isinstance(data, dict) or "kind" not in data:
            raise ConfigError("coefficient descriptor must be a mapping with a 'kind' key")
        kind = data["kind"]
        rest = {k: v for k, v in data.items() if k != "kind"}
        try:
            if kind == "constant":
                return Coefficient.constant(rest["value"])
            if kind == "polynomial":
                return Coefficient.polynomial(rest["coeffs"])
            if kind == "trig":
                return Coefficient.trig(**rest)
            if kind == "samples":
                return Coefficient.samples(rest["values"])
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad {kind!r} coefficient descriptor: {exc}") from exc
        raise ConfigError(f"unknown coefficient kind {kind!r}")
