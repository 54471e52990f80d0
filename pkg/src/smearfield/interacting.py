"""Smeared interaction operator, first-order interacting field and regularisation probes.

The interaction is a finite node/weight rule over envelope centers ``x_j``::

    L = sum_j w_j sum_terms g * s_j**p * :(phi_{h_j} phi_{h_j}^dagger)**q:

with ``h_j`` the contracted envelope of the source function about ``x_j`` and
``s_j = (h_j, h_j)``.  Time ordering between smeared factors uses center times.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import DegenerateError, GeometryError, SmearfieldError
from .freefield import FieldContext, MassShellQuadrature, smeared_commutator_1p1
from .testfn import (
    Box,
    BumpFunction,
    EnvelopeSpec,
    GaussianPacket,
    ScaleFunctionalSpec,
    TestFunction,
    contract_envelope,
    envelope_width,
    scale_functional,
)
from .wick import (
    FieldLabel,
    OperatorPoly,
    field_op,
    identity,
    mul,
    normal_mul,
    normal_product,
    vacuum_expectation,
)

MAX_Q = 3
TIE_TOL = 1e-12


@dataclass(frozen=True)
class InteractionTerm:
    """``g * s**p * u**q``."""

    g: float
    p: float = 0.0
    q: int = 1

    def __post_init__(self):
        if int(self.q) != self.q or not 1 <= self.q <= MAX_Q:
            raise ValueError(f"interaction power q must be an integer in [1, {MAX_Q}]")
        object.__setattr__(self, "q", int(self.q))


@dataclass(frozen=True)
class InteractionSpec:
    """Polynomial ``P2``, envelope construction and the center rule.

    Parameters
    ----------
    terms : sequence of InteractionTerm or (g, p, q)
    envelope, scale : EnvelopeSpec, ScaleFunctionalSpec
    centers : array (n_centers, ndim) or None
        ``None`` means a single node at the middle of the source's effective support.
    weights : array (n_centers,) or None
        Defaults to ones.
    phi_alpha_nodes : sequence of (scale, weight)
        When non-empty the bilinear ``u`` is replaced by the measure-smeared
        operator built by :func:`smeared_local_op`.
    normalize : bool
        Divide every envelope by its integral before use.
    """

    terms: tuple
    envelope: EnvelopeSpec = field(default_factory=EnvelopeSpec)
    scale: ScaleFunctionalSpec = field(default_factory=ScaleFunctionalSpec)
    centers: np.ndarray | None = None
    weights: np.ndarray | None = None
    phi_alpha_nodes: tuple = ()
    normalize: bool = False

    def __post_init__(self):
        terms = tuple(t if isinstance(t, InteractionTerm) else InteractionTerm(*t) for t in self.terms)
        if not terms:
            raise ValueError("interaction needs at least one term")
        object.__setattr__(self, "terms", terms)
        if self.centers is not None:
            c = np.atleast_2d(np.asarray(self.centers, float))
            w = np.ones(len(c)) if self.weights is None else np.asarray(self.weights, float).reshape(-1)
            if len(w) != len(c):
                raise ValueError("centers and weights differ in length")
            if np.any(w < 0):
                raise ValueError("center weights must be non-negative")
            c.setflags(write=False)
            w.setflags(write=False)
            object.__setattr__(self, "centers", c)
            object.__setattr__(self, "weights", w)
        object.__setattr__(self, "phi_alpha_nodes", tuple((float(s), float(w)) for s, w in self.phi_alpha_nodes))

    @property
    def max_coupling(self) -> float:
        return max(abs(t.g) for t in self.terms)

    def with_couplings(self, factor: float) -> "InteractionSpec":
        terms = tuple(InteractionTerm(t.g * factor, t.p, t.q) for t in self.terms)
        return InteractionSpec(
            terms, self.envelope, self.scale, self.centers, self.weights, self.phi_alpha_nodes, self.normalize
        )

    def to_json(self) -> dict:
        return {
            "terms": [[t.g, t.p, t.q] for t in self.terms],
            "envelope": self.envelope.to_json(),
            "scale": {"p1_coeff": self.scale.p1_coeff, "p1_power": self.scale.p1_power},
            "centers": None if self.centers is None else self.centers.tolist(),
            "weights": None if self.weights is None else self.weights.tolist(),
            "phi_alpha_nodes": [list(a) for a in self.phi_alpha_nodes],
            "normalize": self.normalize,
        }


def center_grid(f: TestFunction, n_per_axis: int | Sequence[int] = 3, eps: float = 1e-3):
    """Midpoint rule over the effective support box of ``f``.

    Returns
    -------
    centers : ndarray (n, ndim)
    weights : ndarray (n,)
        Cell volumes, so ``sum(weights)`` is the box volume.
    """
    box = f.effective_support(eps)
    n = np.broadcast_to(np.asarray(n_per_axis, int), (f.ndim,))
    axes, widths = [], []
    for lo, hi, k in zip(box.lo, box.hi, n):
        h = (hi - lo) / k
        axes.append(lo + h * (np.arange(k) + 0.5))
        widths.append(h)
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([g.ravel() for g in mesh], axis=-1)
    return centers, np.full(len(centers), float(np.prod(widths)))


def resolve_centers(f: TestFunction, spec: InteractionSpec):
    if spec.centers is None:
        return center_grid(f, 1)
    return spec.centers, spec.weights


# --------------------------------------------------------------------------
# Causal classification of supports
# --------------------------------------------------------------------------


class Separation(str, Enum):
    PAST = "past"
    FUTURE = "future"
    SPACELIKE = "spacelike"
    OVERLAPPING = "overlapping"


@dataclass(frozen=True)
class PastConeRelation:
    """Relation of box ``a`` to box ``b``: ``PAST`` means all of ``a`` lies in the
    open causal past of all of ``b``.  ``OVERLAPPING`` covers every undecided case."""

    a: Box
    b: Box
    separation: Separation

    @classmethod
    def classify(cls, a: Box, b: Box) -> "PastConeRelation":
        alo, ahi = np.asarray(a.lo, float), np.asarray(a.hi, float)
        blo, bhi = np.asarray(b.lo, float), np.asarray(b.hi, float)
        far = np.maximum(np.abs(bhi[1:] - alo[1:]), np.abs(ahi[1:] - blo[1:]))
        gap = np.maximum(0.0, np.maximum(blo[1:] - ahi[1:], alo[1:] - bhi[1:]))
        r_max = float(np.sqrt(np.sum(far**2)))
        r_min = float(np.sqrt(np.sum(gap**2)))
        if blo[0] - ahi[0] > r_max:
            sep = Separation.PAST
        elif alo[0] - bhi[0] > r_max:
            sep = Separation.FUTURE
        elif max(bhi[0] - alo[0], ahi[0] - blo[0]) < r_min:
            sep = Separation.SPACELIKE
        else:
            sep = Separation.OVERLAPPING
        return cls(a, b, sep)


def support_box(f: TestFunction, eps: float = 1e-3) -> Box:
    if isinstance(f, BumpFunction):
        return f.support_box()
    return f.effective_support(eps)


# --------------------------------------------------------------------------
# Envelopes and L
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SmearedLocalOp:
    """Envelope ``h`` registered under ``id`` with center ``x`` and ``s = (h, h)``."""

    id: str
    x: np.ndarray
    s: float
    weight: float
    lam: float


def scale_of(ctx: FieldContext, fid: str, spec: InteractionSpec) -> float:
    return scale_functional(ctx.function((fid, False)), spec.scale, ctx.norm(fid))


def register_envelope(ctx: FieldContext, fid: str, envelope: EnvelopeSpec, lam: float, x, tag: str, normalize: bool):
    hid = f"{fid}@{tag}"
    if hid not in ctx:
        h = contract_envelope(ctx.function((fid, False)), envelope, lam, x)
        if normalize and not h.is_zero:
            c = h.integral()
            if c == 0:
                raise DegenerateError(f"envelope {hid} has zero integral")
            h = h.scale(1.0 / c)
        ctx.register(hid, h)
    return hid


def envelopes(ctx: FieldContext, fid: str, spec: InteractionSpec) -> list:
    """Register ``h_j`` for every center and return :class:`SmearedLocalOp` records.

    Raises
    ------
    DegenerateError
        If every envelope has zero norm.
    """
    f = ctx.function((fid, False))
    lam = scale_of(ctx, fid, spec)
    centers, weights = resolve_centers(f, spec)
    out = []
    for j, (x, w) in enumerate(zip(centers, weights)):
        hid = register_envelope(ctx, fid, spec.envelope, lam, x, _tag(spec, j, lam, x), spec.normalize)
        s = 0.0 if ctx.function((hid, False)).is_zero else ctx.norm(hid)
        out.append(SmearedLocalOp(hid, np.asarray(x, float), s, float(w), lam))
    if not any(op.s > 0 for op in out):
        raise DegenerateError("all contracted envelopes vanish")
    return out


def _digest(envelope: EnvelopeSpec, normalize: bool, lam: float, x) -> str:
    # stable across processes, unlike hash() of str-valued enums
    text = json.dumps([envelope.to_json(), normalize, repr(float(lam)), [repr(float(v)) for v in x]])
    return hashlib.sha1(text.encode()).hexdigest()[:8]


def _tag(spec: InteractionSpec, j: int, lam: float, x) -> str:
    return f"env{j}:{_digest(spec.envelope, spec.normalize, lam, x)}"


def bilinear(ctx: FieldContext, hid: str) -> OperatorPoly:
    """``phi_h phi_h^dagger`` as an ordered product (contraction included)."""
    return mul(field_op(ctx, FieldLabel(hid)), field_op(ctx, FieldLabel(hid, True)))


def smeared_local_op(
    ctx: FieldContext,
    fid: str,
    envelope: EnvelopeSpec,
    alpha_nodes: Sequence,
    x,
    lam: float,
    normalize: bool = False,
) -> OperatorPoly:
    """``sum_alpha w_alpha phi_{h_alpha} phi_{h_alpha}^dagger`` with ``h_alpha`` at scale ``lam * s_alpha``."""
    alpha_nodes = list(alpha_nodes)
    if not alpha_nodes:
        raise ValueError("alpha_nodes must be non-empty")
    out = OperatorPoly.zero(ctx)
    x = np.asarray(x, float)
    for i, (sc, w) in enumerate(alpha_nodes):
        tag = f"phi:{_digest(envelope, normalize, lam * sc, x)}"
        hid = register_envelope(ctx, fid, envelope, lam * sc, x, tag, normalize)
        out = out + float(w) * bilinear(ctx, hid)
    return out


def _u_normal(ctx: FieldContext, fid: str, op: SmearedLocalOp, spec: InteractionSpec) -> OperatorPoly:
    """``:u:`` at one center."""
    if not spec.phi_alpha_nodes:
        return normal_product(ctx, [FieldLabel(op.id), FieldLabel(op.id, True)])
    out = OperatorPoly.zero(ctx)
    for sc, w in spec.phi_alpha_nodes:
        tag = f"phi:{_digest(spec.envelope, spec.normalize, op.lam * sc, op.x)}"
        hid = register_envelope(ctx, fid, spec.envelope, op.lam * sc, op.x, tag, spec.normalize)
        out = out + w * normal_product(ctx, [FieldLabel(hid), FieldLabel(hid, True)])
    return out


def center_terms(ctx: FieldContext, fid: str, spec: InteractionSpec) -> list:
    """Per-center pieces ``(x_j, L_j)`` of ``L``; centers with zero envelope are skipped."""
    out = []
    for op in envelopes(ctx, fid, spec):
        if op.s <= 0 or op.weight == 0:
            continue
        u = _u_normal(ctx, fid, op, spec)
        powers = {1: u}
        Lj = OperatorPoly.zero(ctx)
        for t in spec.terms:
            for k in range(2, t.q + 1):
                if k not in powers:
                    powers[k] = normal_mul(powers[k - 1], u)
            Lj = Lj + (op.weight * t.g * op.s**t.p) * powers[t.q]
        out.append((op, Lj))
    return out


def assemble_L(ctx: FieldContext, fid: str, spec: InteractionSpec) -> OperatorPoly:
    """``L[f] = sum_j w_j sum_terms g s_j^p :u_j^q:`` as one normal-ordered polynomial."""
    total = OperatorPoly.zero(ctx)
    for _, Lj in center_terms(ctx, fid, spec):
        total = total + Lj
    return total


# --------------------------------------------------------------------------
# First-order interacting field
# --------------------------------------------------------------------------


def time_order_pair(A: OperatorPoly, t_a: float, B: OperatorPoly, t_b: float, tol: float = TIE_TOL) -> OperatorPoly:
    """Later factor to the left; ties within ``tol`` are symmetrised."""
    if abs(t_a - t_b) <= tol * max(1.0, abs(t_a), abs(t_b)):
        return 0.5 * (mul(A, B) + mul(B, A))
    return mul(A, B) if t_a > t_b else mul(B, A)


def xi_first_order(ctx: FieldContext, fid: str, spec: InteractionSpec, source: str | None = None) -> OperatorPoly:
    """``phi_f - i sum_j (T[phi_f L_j] - L_j phi_f)``.

    Parameters
    ----------
    source : str, optional
        Registered id whose envelopes build ``L``; defaults to ``fid``.
    """
    if spec.max_coupling > 1:
        warnings.warn("first-order expansion used with |g| > 1", RuntimeWarning, stacklevel=2)
    phi = field_op(ctx, fid)
    if spec.max_coupling == 0:
        return phi
    t_f = ctx.function((fid, False)).center_time()
    out = phi
    for op, Lj in center_terms(ctx, source or fid, spec):
        out = out - 1j * (time_order_pair(phi, t_f, Lj, float(op.x[0])) - mul(Lj, phi))
    return out


def classify_centers(ctx: FieldContext, fid: str, spec: InteractionSpec, source: str | None = None) -> list:
    """Separation of every envelope support relative to the support of ``f``."""
    fbox = support_box(ctx.function((fid, False)))
    return [
        PastConeRelation.classify(support_box(ctx.function((op.id, False))), fbox).separation
        for op in envelopes(ctx, source or fid, spec)
        if op.s > 0
    ]


def retarded_form_check(
    ctx: FieldContext,
    fid: str,
    probes: Sequence[str],
    spec: InteractionSpec,
    source: str | None = None,
) -> float:
    """Largest relative residual of ``<phi_g^(2q-1) (xi_f - phi_f)>`` over probes ``g``.

    The reference value uses the derivation rule, the smeared Pauli-Jordan
    commutator on the lattice and ``<phi_g^n :phi_h^n:> = n! (g*, h)^n``.

    Raises
    ------
    GeometryError
        Outside 1+1 dimensions, for non-bump functions, or when an envelope is
        not strictly in the past of ``f``.
    """
    if ctx.ndim != 2:
        raise GeometryError("retarded form check is implemented in 1+1 dimensions")
    if spec.phi_alpha_nodes:
        raise GeometryError("retarded form check expects the plain bilinear interaction")
    src = source or fid
    f = ctx.function((fid, False))
    if not isinstance(f, BumpFunction):
        raise GeometryError("retarded form check needs bump test functions")
    if any(s is not Separation.PAST for s in classify_centers(ctx, fid, spec, source)):
        raise GeometryError("every envelope must lie strictly in the past of f")
    xi = xi_first_order(ctx, fid, spec, source)
    delta = xi - field_op(ctx, fid)
    worst = 0.0
    for gid in probes:
        for q in sorted({t.q for t in spec.terms}):
            n = 2 * q - 1
            probe = identity(ctx)
            for _ in range(n):
                probe = mul(probe, field_op(ctx, gid))
            lhs = vacuum_expectation(mul(probe, _terms_with_q(delta, n, ctx)))
            rhs = 0j
            for op, _ in center_terms(ctx, src, spec):
                h = ctx.function((op.id, False))
                comm = smeared_commutator_1p1(f, h, ctx.m)
                c = sum(op.weight * t.g * op.s**t.p for t in spec.terms if t.q == q)
                rhs += -1j * c * 2 * q * comm * math.factorial(n) * ctx.inner((gid, True), (op.id, False)) ** n
            scale = max(abs(rhs), abs(lhs))
            if scale > 0:
                worst = max(worst, abs(lhs - rhs) / scale)
    return worst


def _terms_with_q(P: OperatorPoly, degree: int, ctx: FieldContext) -> OperatorPoly:
    return OperatorPoly(ctx, {k: v for k, v in P.terms.items() if len(k[0]) + len(k[1]) == degree}, prune=False)


# --------------------------------------------------------------------------
# Regularisation probes
# --------------------------------------------------------------------------


def loop_scalar(ctx: FieldContext, fid: str, spec: InteractionSpec, normalize: bool = True) -> float:
    """``sum_{j,k} w_j w_k |(h_j, h_k)|^(2q)`` with ``q`` from the leading term.

    Envelopes are divided by their integrals when ``normalize`` is set, so the
    kernel probes the approach to a point interaction.
    """
    q = spec.terms[0].q
    local = InteractionSpec(
        spec.terms, spec.envelope, spec.scale, spec.centers, spec.weights, (), normalize
    )
    ops = [op for op in envelopes(ctx, fid, local) if op.s > 0]
    total = []
    for a in ops:
        for b in ops:
            total.append(a.weight * b.weight * abs(ctx.inner((a.id, False), (b.id, False))) ** (2 * q))
    return math.fsum(total)


@dataclass(frozen=True)
class PacketFamily:
    """Packets sharing spatial momentum, mass, center and amplitude; ``mu`` varies."""

    p: tuple
    m: float
    center: tuple | None = None
    amp: complex = 1.0

    def packet(self, mu: float) -> GaussianPacket:
        return GaussianPacket.from_momentum(self.p, mu, self.m, center=self.center, amp=self.amp)


SWEEP_COLUMNS = ("mu", "observable", "width", "norm")


def first_order_2pt(ctx: FieldContext, fid: str, spec: InteractionSpec) -> float:
    """First-order change of ``<xi_f^dagger xi_f>``: ``2 Re <phi_f^dagger (xi_f - phi_f)>``."""
    delta = xi_first_order(ctx, fid, spec) - field_op(ctx, fid)
    return 2.0 * vacuum_expectation(mul(field_op(ctx, FieldLabel(fid, True)), delta)).real


def mu_sweep(
    family: PacketFamily,
    mu_values: Sequence[float],
    spec: InteractionSpec,
    quadrature: MassShellQuadrature,
    observable: str = "loop_scalar",
    method: str = "closed",
) -> list:
    """Rows ``(mu, observable, width, norm)`` for each ``mu``.

    ``width`` is :func:`~smearfield.testfn.envelope_width` of the first
    center's envelope and ``norm`` is ``(F, F)``.  Explicit ``spec.centers``
    are used verbatim for every ``mu``.
    """
    mu_values = [float(v) for v in mu_values]
    if any(v <= 0 for v in mu_values):
        raise ValueError("mu values must be positive")
    if mu_values != sorted(mu_values) and mu_values != sorted(mu_values, reverse=True):
        raise ValueError("mu values must be sorted")
    if observable not in ("loop_scalar", "first_order_2pt"):
        raise ValueError(f"unknown observable {observable!r}")
    rows = []
    for mu in mu_values:
        ctx = FieldContext(quadrature, method=method)
        ctx.register("F", family.packet(mu))
        if observable == "loop_scalar":
            value = loop_scalar(ctx, "F", spec)
            ops = envelopes(ctx, "F", InteractionSpec(spec.terms, spec.envelope, spec.scale, spec.centers, spec.weights, (), True))
        else:
            value = first_order_2pt(ctx, "F", spec)
            ops = envelopes(ctx, "F", spec)
        width = envelope_width(ctx.function((ops[0].id, False)))
        rows.append((mu, float(value), float(width), float(ctx.norm("F"))))
    return rows
