"""Validated run configuration for the command-line front end.

A run is described by one YAML or JSON document.  Unknown keys are rejected at
every level; ``--set a.b=value`` overrides are applied before validation.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .freefield import FieldContext, MassShellQuadrature
from .interacting import InteractionSpec, PacketFamily
from .testfn import EnvelopeSpec, GaussianPacket, Grid, ScaleFunctionalSpec, smooth_bump


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class QuadratureConfig(_Strict):
    cutoff: float = Field(10.0, gt=0)
    nodes: int = Field(256, ge=2)
    order: int = Field(16, ge=1)
    padding: int = Field(4, ge=1)
    method: Literal["lattice", "closed", "auto"] = "auto"


class FunctionConfig(_Strict):
    """A packet (``p``, ``mu``) or a bump (``halfwidths``, ``spacing``)."""

    id: str
    kind: Literal["packet", "bump"]
    center: Optional[list[float]] = None
    amp: list[float] = [1.0, 0.0]
    p: Optional[list[float]] = None
    mu: Optional[float] = Field(None, gt=0)
    halfwidths: Optional[list[float]] = None
    spacing: float = Field(0.025, gt=0)
    sharpness: float = Field(3.0, gt=0)

    @field_validator("id")
    @classmethod
    def _id(cls, v):
        if not v or v.endswith("*") or "@" in v:
            raise ValueError("ids must be non-empty and may not end in '*' or contain '@'")
        return v

    @model_validator(mode="after")
    def _kind(self):
        if self.kind == "packet" and (self.p is None or self.mu is None):
            raise ValueError(f"packet {self.id!r} needs p and mu")
        if self.kind == "bump" and (self.halfwidths is None or self.center is None):
            raise ValueError(f"bump {self.id!r} needs center and halfwidths")
        return self


class EnvelopeConfig(_Strict):
    variant: Literal["SupportRestricted", "Product", "TanhProduct", "MeasureSmeared", "NonAbsolute"] = "Product"
    C: Optional[float] = None
    alpha_nodes: list[tuple[float, float]] = []


class ScaleConfig(_Strict):
    p1_coeff: float = Field(1.0, gt=0)
    p1_power: float = 0.0


class InteractionConfig(_Strict):
    terms: list[tuple[float, float, int]] = [(0.1, 0.0, 1)]
    centers: Optional[list[list[float]]] = None
    weights: Optional[list[float]] = None
    phi_alpha_nodes: list[tuple[float, float]] = []
    normalize: bool = False

    @field_validator("terms")
    @classmethod
    def _terms(cls, v):
        if not v:
            raise ValueError("at least one interaction term is required")
        for g, p, q in v:
            if not 1 <= q <= 3:
                raise ValueError("interaction power q must lie in [1, 3]")
        return v


class VevConfig(_Strict):
    labels: list[list[str]] = []


class EnvelopeCmdConfig(_Strict):
    function: Optional[str] = None
    points: Optional[list[list[float]]] = None


class GnsConfig(_Strict):
    basis: Optional[list[str]] = None
    max_particles: int = Field(4, ge=0)
    include_conjugates: bool = False


class XiConfig(_Strict):
    field: Optional[str] = None
    source: Optional[str] = None
    probes: list[str] = []


class SweepConfig(_Strict):
    p: list[float] = [0.5]
    center: Optional[list[float]] = None
    amp: list[float] = [1.0, 0.0]
    mu_values: Optional[list[float]] = None
    mu_start: float = Field(0.8, gt=0)
    mu_stop: float = Field(0.1, gt=0)
    mu_num: int = Field(8, ge=1)
    observable: Literal["loop_scalar", "first_order_2pt"] = "loop_scalar"

    def grid(self) -> list:
        if self.mu_values is not None:
            return [float(v) for v in self.mu_values]
        return [float(v) for v in np.geomspace(self.mu_start, self.mu_stop, self.mu_num)]


class OutputConfig(_Strict):
    dir: str = "out"
    figures: bool = False


class RunConfig(_Strict):
    """Complete description of a run."""

    dimension: Literal[2, 4] = 2
    mass: float = Field(1.0, gt=0)
    seed: int = Field(12345, ge=0, lt=2**64)
    quadrature: QuadratureConfig = QuadratureConfig()
    functions: list[FunctionConfig] = []
    envelope: EnvelopeConfig = EnvelopeConfig()
    scale: ScaleConfig = ScaleConfig()
    interaction: InteractionConfig = InteractionConfig()
    vev: VevConfig = VevConfig()
    envelope_cmd: EnvelopeCmdConfig = EnvelopeCmdConfig()
    gns: GnsConfig = GnsConfig()
    xi: XiConfig = XiConfig()
    sweep: SweepConfig = SweepConfig()
    output: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _check(self):
        n = self.dimension
        seen = set()
        for f in self.functions:
            if f.id in seen:
                raise ValueError(f"duplicate function id {f.id!r}")
            seen.add(f.id)
            if f.center is not None and len(f.center) != n:
                raise ValueError(f"{f.id}: center needs {n} components")
            if f.kind == "packet" and len(f.p) != n - 1:
                raise ValueError(f"{f.id}: p needs {n - 1} components")
            if f.kind == "bump" and len(f.halfwidths) != n:
                raise ValueError(f"{f.id}: halfwidths need {n} components")
        if len(self.sweep.p) != n - 1:
            raise ValueError(f"sweep.p needs {n - 1} components")
        return self

    # -- canonical form -------------------------------------------------------

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    # -- builders -------------------------------------------------------------

    def quadrature_obj(self) -> MassShellQuadrature:
        q = self.quadrature
        return MassShellQuadrature.gauss_legendre(self.mass, self.dimension - 1, q.cutoff, nodes=q.nodes, order=q.order)

    def build_function(self, fc: FunctionConfig):
        amp = complex(*fc.amp)
        if fc.kind == "packet":
            return GaussianPacket.from_momentum(fc.p, fc.mu, self.mass, center=fc.center, amp=amp)
        c = np.asarray(fc.center, float)
        w = np.asarray(fc.halfwidths, float)
        grid = Grid.covering(c - w, c + w, fc.spacing)
        return smooth_bump(grid, c, w, sharpness=fc.sharpness, amp=amp)

    def context(self) -> FieldContext:
        ctx = FieldContext(self.quadrature_obj(), method=self.quadrature.method)
        for fc in self.functions:
            ctx.register(fc.id, self.build_function(fc))
        return ctx

    def envelope_spec(self) -> EnvelopeSpec:
        e = self.envelope
        return EnvelopeSpec(e.variant, e.C, tuple(e.alpha_nodes))

    def scale_spec(self) -> ScaleFunctionalSpec:
        return ScaleFunctionalSpec(self.scale.p1_coeff, self.scale.p1_power)

    def interaction_spec(self) -> InteractionSpec:
        i = self.interaction
        return InteractionSpec(
            tuple(i.terms),
            self.envelope_spec(),
            self.scale_spec(),
            centers=i.centers,
            weights=i.weights,
            phi_alpha_nodes=tuple(i.phi_alpha_nodes),
            normalize=i.normalize,
        )

    def packet_family(self) -> PacketFamily:
        s = self.sweep
        return PacketFamily(tuple(s.p), self.mass, None if s.center is None else tuple(s.center), complex(*s.amp))


def _coerce(text: str):
    return yaml.safe_load(text)


def apply_overrides(data: dict, overrides) -> dict:
    """Apply ``key.sub=value`` strings; values are parsed as YAML scalars or lists."""
    data = copy.deepcopy(data)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        node = data
        for p in parts[:-1]:
            if not isinstance(node.setdefault(p, {}), dict):
                raise ConfigError(f"override {key!r} descends into a non-mapping")
            node = node[p]
        node[parts[-1]] = _coerce(value)
    return data


def load_config(path=None, overrides=None, seed: int | None = None) -> RunConfig:
    """Read, override and validate a run configuration.

    Raises
    ------
    ConfigError
        On unreadable files, malformed documents or failed validation.
    """
    data: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
    data = apply_overrides(data, overrides)
    if seed is not None:
        data["seed"] = seed
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
