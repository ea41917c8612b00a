"""Experiment configuration: INI (flat key-value with sections) or JSON.

A config fully determines every run; equal configs give byte-identical
outputs.  Validation errors carry the section/field path.
"""

from __future__ import annotations

import configparser
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .operator import Potential
from .torus import Frequency, SamplePlan

__all__ = ["ConfigError", "ExperimentConfig", "load_config"]


class ConfigError(ValueError):
    def __init__(self, field_path: str, message: str):
        self.field_path = field_path
        super().__init__(f"config field [{field_path}]: {message}")


@dataclass
class ExperimentConfig:
    potential: Potential
    omega: Frequency
    sigma: float = 0.25
    tau: float = 0.25
    gamma: Optional[float] = None
    seed: int = 0
    sample_count: int = 2000
    sample_scheme: str = "low-discrepancy"
    params: dict = field(default_factory=dict)  # per-subcommand sections
    raw: dict = field(default_factory=dict)  # echoed into summaries

    def plan(self, count: Optional[int] = None, seed_offset: int = 0, scheme: Optional[str] = None) -> SamplePlan:
        return SamplePlan(
            self.potential.dimension,
            count or self.sample_count,
            self.seed + seed_offset,
            scheme or self.sample_scheme,
        )

    def section(self, name: str) -> dict:
        return dict(self.params.get(name, {}))


def _parse_floats(text: str) -> list:
    return [float(v) for v in str(text).replace(",", " ").split()]


def _parse_ints(text: str) -> list:
    return [int(v) for v in str(text).replace(",", " ").split()]


def _build_potential(sec: dict) -> Potential:
    rho = float(sec.get("rho", 0.5))
    preset = sec.get("preset")
    if preset:
        lam = float(sec.get("lambda", 1.0))
        if preset == "two-cos":
            return Potential.two_cos(lam, rho=rho)
        if preset == "amo":
            return Potential.amo(lam, rho=rho)
        if preset == "constant":
            return Potential.constant(lam, dimension=int(sec.get("dimension", 1)), rho=rho)
        raise ConfigError("potential.preset", f"unknown preset {preset!r}")
    coeffs = {}
    for key, value in sec.items():
        if not key.startswith("coeff_"):
            continue
        try:
            k = tuple(int(v) for v in key[len("coeff_") :].split("_"))
        except ValueError as exc:
            raise ConfigError(f"potential.{key}", "bad index") from exc
        parts = _parse_floats(value)
        coeffs[k] = complex(parts[0], parts[1] if len(parts) > 1 else 0.0)
    if not coeffs:
        raise ConfigError("potential", "needs a preset or coeff_* entries")
    return Potential.from_coefficients(coeffs, rho=rho)


def _build(sections: dict) -> ExperimentConfig:
    if "potential" not in sections:
        raise ConfigError("potential", "missing section")
    if "frequency" not in sections:
        raise ConfigError("frequency", "missing section")
    V = _build_potential(sections["potential"])
    fsec = sections["frequency"]
    if "omega" not in fsec:
        raise ConfigError("frequency.omega", "missing")
    coords = _parse_floats(fsec["omega"])
    if len(coords) != V.dimension:
        raise ConfigError("frequency.omega", f"needs {V.dimension} coordinates to match the potential")
    a = float(fsec.get("a", 0.05))
    b = float(fsec.get("b", V.dimension + 1.0))
    if not a > 0:
        raise ConfigError("frequency.a", "must be positive")
    if not b > V.dimension:
        raise ConfigError("frequency.b", f"must exceed the dimension ({V.dimension})")
    try:
        omega = Frequency(tuple(np.mod(coords, 1.0)), a, b)
    except ValueError as exc:
        raise ConfigError("frequency", str(exc)) from exc

    psec = sections.get("params", {})
    sigma = float(psec.get("sigma", 0.25))
    tau = float(psec.get("tau", 0.25))
    if not 0 < sigma < 1:
        raise ConfigError("params.sigma", "must lie in (0, 1)")
    if not 0 < tau < 1:
        raise ConfigError("params.tau", "must lie in (0, 1)")
    gamma = float(psec["gamma"]) if "gamma" in psec else None
    seed = int(psec.get("seed", 0))
    count = int(psec.get("samples", 2000))
    scheme = psec.get("scheme", "low-discrepancy")
    if scheme not in ("grid", "uniform-random", "low-discrepancy"):
        raise ConfigError("params.scheme", f"unknown scheme {scheme!r}")
    extra = {k: v for k, v in sections.items() if k not in ("potential", "frequency", "params")}
    return ExperimentConfig(
        potential=V,
        omega=omega,
        sigma=sigma,
        tau=tau,
        gamma=gamma,
        seed=seed,
        sample_count=count,
        sample_scheme=scheme,
        params=extra,
        raw=sections,
    )


def load_config(path) -> ExperimentConfig:
    """Read an INI or JSON config file (JSON when the suffix is .json or the
    content starts with '{')."""
    p = Path(path)
    text = p.read_text()
    if p.suffix == ".json" or text.lstrip().startswith("{"):
        data = json.loads(text)
        sections = {str(k): {str(kk): vv for kk, vv in v.items()} for k, v in data.items()}
    else:
        cp = configparser.ConfigParser()
        cp.read_string(text)
        sections = {name: dict(cp[name]) for name in cp.sections()}
    return _build(sections)


def parse_config_text(text: str) -> ExperimentConfig:
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        sections = {str(k): {str(kk): vv for kk, vv in v.items()} for k, v in data.items()}
    else:
        cp = configparser.ConfigParser()
        cp.read_string(text)
        sections = {name: dict(cp[name]) for name in cp.sections()}
    return _build(sections)
