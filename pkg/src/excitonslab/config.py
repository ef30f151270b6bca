"""Run configuration: strict YAML/JSON schema shared by every CLI command."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import yaml
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, PlainSerializer, ValidationError, model_validator

from .errors import ConfigError
from .model import SlabParams, as_complex, derive_dimensionless


def _to_complex(v):
    if isinstance(v, complex):
        return v
    try:
        return as_complex(v)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"not a complex number: {v!r}") from exc


# complex numbers travel as [re, im] pairs so the JSON form is unambiguous
ComplexValue = Annotated[
    complex,
    BeforeValidator(_to_complex),
    PlainSerializer(lambda z: [z.real, z.imag], return_type=list),
]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ParamsConfig(_Strict):
    n_layers: int = Field(2, ge=1)
    delta0: Optional[float] = 0.05
    g: Optional[float] = 0.1
    # physical alternative (cgs); when given, delta0 and g must be omitted
    omega: Optional[float] = None
    a: Optional[float] = None
    d: Optional[float] = None
    hbar: Optional[float] = None
    c: Optional[float] = None
    area: Optional[float] = None

    @model_validator(mode="before")
    @classmethod
    def _physical_drops_defaults(cls, data):
        if isinstance(data, dict) and any(k in data for k in ("omega", "a", "d", "hbar", "c")):
            data = dict(data)
            data.setdefault("delta0", None)
            data.setdefault("g", None)
        return data

    @model_validator(mode="after")
    def _one_form(self):
        phys = [self.omega, self.a, self.d, self.hbar, self.c]
        if any(v is not None for v in phys):
            if not all(v is not None for v in phys):
                raise ValueError("physical parameters need all of omega, a, d, hbar, c")
            if self.delta0 is not None or self.g is not None:
                raise ValueError("give either (delta0, g) or the physical set, not both")
        elif self.delta0 is None or self.g is None:
            raise ValueError("delta0 and g are required without physical parameters")
        return self

    def build(self):
        if self.omega is not None:
            return derive_dimensionless(self.omega, self.a, self.d, self.hbar, self.c,
                                        n_layers=self.n_layers, area=self.area)
        return SlabParams(n_layers=self.n_layers, delta0=self.delta0, g=self.g)


class StateConfig(_Strict):
    kind: Literal["coherent", "fock", "chaotic", "raw"] = "coherent"
    basis: Literal["k", "layer", "mode"] = "layer"
    amplitudes: Optional[list[ComplexValue]] = None
    occupations: Optional[list[float]] = None
    mean: Optional[list[ComplexValue]] = None
    normal: Optional[list[list[ComplexValue]]] = None
    anomalous: Optional[list[list[ComplexValue]]] = None

    def as_spec(self, n_layers):
        spec = {"kind": self.kind, "basis": self.basis}
        if self.kind == "coherent":
            amps = self.amplitudes
            if amps is None:
                # uniform layer excitation with zero initial polarisation
                amps = [1j / n_layers**0.5] * n_layers
            spec["amplitudes"] = list(amps)
        elif self.kind in ("fock", "chaotic"):
            if self.occupations is None:
                raise ConfigError(f"state kind {self.kind!r} needs occupations")
            spec["occupations"] = list(self.occupations)
        else:
            if self.normal is None:
                raise ConfigError("raw state needs a normal matrix")
            spec["normal"] = self.normal
            if self.mean is not None:
                spec["mean"] = self.mean
            if self.anomalous is not None:
                spec["anomalous"] = self.anomalous
        return spec


class DetectorConfig(_Strict):
    z: float = Field(5.0, gt=0)
    side: Literal["+", "-"] = "+"
    tau_min: float = -1.0
    tau_max: Optional[float] = None     # default: 3 / Gamma_super
    n_samples: int = Field(2001, ge=2)


class SolverConfig(_Strict):
    search_box: Optional[tuple[float, float, float, float]] = None
    n0: int = Field(64, ge=8)
    seed_only: bool = False


class OracleConfig(_Strict):
    q_max: float = 40.0
    margin: float = Field(1.1, gt=1.0)
    dt: Optional[float] = None
    box_length: Optional[float] = None
    two_photon: bool = True
    counter_rotating: bool = True
    l2_tol: float = 0.02
    precone_tol: float = 1e-3


class OutputConfig(_Strict):
    format: Literal["csv", "json"] = "csv"
    path: Optional[str] = None
    exact_flux: bool = False


class SweepConfig(_Strict):
    variable: Literal["n", "delta0", "g"] = "n"
    values: list[float] = Field(default_factory=lambda: [1, 2, 3])


class RunConfig(_Strict):
    params: ParamsConfig = ParamsConfig()
    state: StateConfig = StateConfig()
    detector: DetectorConfig = DetectorConfig()
    solver: SolverConfig = SolverConfig()
    oracle: OracleConfig = OracleConfig()
    output: OutputConfig = OutputConfig()
    sweep: SweepConfig = SweepConfig()

    def canonical_json(self):
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def config_hash(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def parse_config(data):
    """Validate a plain mapping; every problem becomes a ConfigError."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping at the top level")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return parse_config(data)


def dump_config(cfg):
    """YAML text that parses back to an equal RunConfig."""
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=True)
