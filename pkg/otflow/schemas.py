"""
JSON input and output models.

Indices in every JSON document are 1-based; the Python API is 0-based.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Type, TypeVar, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from otflow.errors import ConfigError, MetricError
from otflow.exact import as_array, to_complex
from otflow.flow import FlowControls
from otflow.hermitian import HermitianMetric, metric_from_normal_form, normal_form_from_metric
from otflow.ot_model import OTParams, SemidirectParams

logger = logging.getLogger(__name__)

COMMANDS = ("validate", "classify-pluriclosed", "curvature", "soliton", "flow", "report")

M = TypeVar("M", bound=BaseModel)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class ComplexValue(_Strict):
    re: float
    im: float = 0.0

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)

    @classmethod
    def of(cls, z: Any) -> "ComplexValue":
        z = complex(z)
        return cls(re=z.real, im=z.imag)


def complex_table(rows: List[List[ComplexValue]]) -> np.ndarray:
    return np.array([[v.value for v in row] for row in rows], dtype=complex)


def complex_rows(matrix: np.ndarray) -> List[List[dict]]:
    matrix = to_complex(np.asarray(matrix))
    return [[{"re": float(v.real), "im": float(v.imag)} for v in row] for row in matrix]


class OTParamsSpec(_Strict):
    r: int = Field(ge=1)
    s: int = Field(ge=1)
    b: List[List[float]]
    c: List[List[float]]

    @model_validator(mode="after")
    def _shapes(self) -> "OTParamsSpec":
        for name in ("b", "c"):
            rows = getattr(self, name)
            if len(rows) != self.r or any(len(row) != self.s for row in rows):
                raise ValueError(f"{name} must be {self.r} rows of {self.s} entries")
        return self

    def to_params(self) -> OTParams:
        return OTParams(self.r, self.s, np.array(self.b), np.array(self.c))


class SemidirectBody(_Strict):
    lambda_: List[List[ComplexValue]] = Field(alias="lambda")
    lambda_prime: Optional[List[List[ComplexValue]]] = None


class SemidirectSpec(_Strict):
    semidirect: SemidirectBody

    def to_params(self) -> SemidirectParams:
        body = self.semidirect
        prime = None if body.lambda_prime is None else complex_table(body.lambda_prime)
        return SemidirectParams(complex_table(body.lambda_), prime)


class MixedEntry(_Strict):
    index: int = Field(ge=1)
    re: float
    im: float = 0.0


class MetricSpec(_Strict):
    """Either the normal form (A, B, C) or a full matrix g on the (1,0) frame."""

    A: Optional[List[float]] = None
    B: Optional[List[float]] = None
    C: List[MixedEntry] = Field(default_factory=list)
    g: Optional[List[List[ComplexValue]]] = None

    @model_validator(mode="after")
    def _one_form(self) -> "MetricSpec":
        normal = self.A is not None or self.B is not None
        if normal == (self.g is not None):
            raise ValueError("give either A and B (with optional C) or a full matrix g")
        if normal and (self.A is None or self.B is None):
            raise ValueError("the normal form needs both A and B")
        if self.g is not None and self.C:
            raise ValueError("C only applies to the normal form")
        return self

    def to_metric(self, n_h: int, exact: bool = False) -> HermitianMetric:
        if self.g is None:
            if len(self.A) != n_h:
                raise MetricError(f"A has {len(self.A)} entries, the algebra has r={n_h}")
            C = {e.index - 1: complex(e.re, e.im) for e in self.C}
            return metric_from_normal_form(self.A, self.B, C, exact)
        return HermitianMetric(as_array(complex_table(self.g), exact), n_h)

    @classmethod
    def from_matrix(cls, g: np.ndarray, n_h: int) -> "MetricSpec":
        metric = HermitianMetric(g, n_h)
        try:
            A, B, C = normal_form_from_metric(metric)
        except MetricError:
            return cls(g=[[ComplexValue.of(v) for v in row] for row in to_complex(g)])
        entries = [MixedEntry(index=q + 1, re=complex(v).real, im=complex(v).imag) for q, v in sorted(C.items())]
        return cls(A=[float(a) for a in A], B=[float(b) for b in B], C=entries)


class FlowSpec(_Strict):
    flow: Literal["chern-ricci", "pluriclosed", "generalized"] = "pluriclosed"
    t_max: float = Field(default=100.0, gt=0)
    rtol: Optional[float] = Field(default=None, gt=0)
    atol: Optional[float] = Field(default=None, gt=0)
    max_step: Optional[float] = Field(default=None, gt=0)
    first_sample: Optional[float] = Field(default=None, gt=0)
    growth: Optional[float] = Field(default=None, gt=1)
    closed_form: bool = False

    def controls(self) -> FlowControls:
        given = {k: v for k, v in self.model_dump().items()
                 if k in ("rtol", "atol", "max_step", "first_sample", "growth") and v is not None}
        return FlowControls(**given)


class OutputSpec(_Strict):
    json_path: Optional[str] = Field(default=None, alias="json")
    csv_path: Optional[str] = Field(default=None, alias="csv")


class RunConfig(_Strict):
    command: Literal["validate", "classify-pluriclosed", "curvature", "soliton", "flow", "report"]
    params: Union[OTParamsSpec, SemidirectSpec]
    metric: Optional[MetricSpec] = None
    sweep: List[MetricSpec] = Field(default_factory=list)
    which: Literal["chern", "bismut"] = "chern"
    flow: FlowSpec = Field(default_factory=FlowSpec)
    output: OutputSpec = Field(default_factory=OutputSpec)
    exact: bool = False
    strict: bool = False

    @model_validator(mode="after")
    def _command_fields(self) -> "RunConfig":
        needs_metric = self.command != "validate"
        if needs_metric and self.metric is None and not self.sweep:
            raise ValueError(f"command {self.command!r} needs a metric or a sweep")
        semidirect = isinstance(self.params, SemidirectSpec)
        if self.command == "classify-pluriclosed" and semidirect:
            raise ValueError("classify-pluriclosed needs OT params")
        if self.command == "soliton" and self.flow.flow == "generalized":
            raise ValueError("soliton accepts flow chern-ricci or pluriclosed")
        if self.command == "flow" and self.flow.flow == "pluriclosed" and semidirect:
            raise ValueError("the pluriclosed flow needs OT params; use flow generalized")
        return self

    @property
    def metrics(self) -> List[MetricSpec]:
        return ([self.metric] if self.metric is not None else []) + list(self.sweep)

    def dump(self) -> Dict[str, Any]:
        return self.model_dump(mode="json", by_alias=True, exclude_none=True)


def read_json(path: Union[str, Path]) -> Any:
    """Load a UTF-8 JSON file; syntax errors become ConfigError with the line."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc.msg}", line=exc.lineno, column=exc.colno) from exc


def parse_model(cls: Type[M], data: Any, source: str = "input") -> M:
    try:
        return cls.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first["loc"]) or "<root>"
        raise ConfigError(f"{source}: {where}: {first['msg']} ({exc.error_count()} error(s))") from exc


def parse_params(data: Any, source: str = "params") -> Union[OTParamsSpec, SemidirectSpec]:
    if isinstance(data, dict) and "semidirect" in data:
        return parse_model(SemidirectSpec, data, source)
    return parse_model(OTParamsSpec, data, source)


def _resolve(value: Any, base: Path, what: str) -> Any:
    """A string in place of a params or metric object names a JSON file beside the config."""
    if isinstance(value, str):
        target = (base / value) if not Path(value).is_absolute() else Path(value)
        if not target.is_file():
            raise ConfigError(f"{what} file not found: {target}")
        return read_json(target)
    return value


def load_run_config(path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    path = Path(path)
    data = read_json(path)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: run config must be a JSON object")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in ("flow", "output") and isinstance(data.get(key), dict):
            data[key] = {**data[key], **value}
        else:
            data[key] = value
    base = path.parent
    for key in ("params", "metric"):
        if key in data:
            data[key] = _resolve(data[key], base, key)
    if "sweep" in data:
        data["sweep"] = [_resolve(entry, base, "sweep") for entry in data["sweep"]]
    config = parse_model(RunConfig, data, str(path))
    logger.info("loaded run config path=%s command=%s metrics=%d", path, config.command, len(config.metrics))
    return config


def dumps(payload: Dict[str, Any]) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
