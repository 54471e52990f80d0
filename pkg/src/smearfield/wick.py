"""Normal-ordered creation/annihilation polynomials over labelled test functions.

A smeared field splits as ``phi_f = a(f*) + a^dagger(f)`` where ``a^dagger(u)``
is linear and ``a(u)`` antilinear in the single-particle vector ``u``, with
``[a(u), a^dagger(v)] = (u, v)``.  Single-particle vectors are named by mode keys
``(id, conjugated)`` resolved through a :class:`~smearfield.freefield.FieldContext`.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

from .errors import ContextMismatch, SmearfieldError
from .freefield import FieldContext

PRUNE_RTOL = 1e-15


@dataclass(frozen=True, order=True)
class FieldLabel:
    """``phi_f`` (``conjugated=False``) or ``phi_f^dagger = phi_{f*}``."""

    id: str
    conjugated: bool = False

    @classmethod
    def parse(cls, text) -> "FieldLabel":
        if isinstance(text, FieldLabel):
            return text
        text = str(text).strip()
        if text.endswith("*") or text.endswith("^"):
            return cls(text[:-1], True)
        return cls(text, False)

    def dagger(self) -> "FieldLabel":
        return FieldLabel(self.id, not self.conjugated)

    @property
    def creation_mode(self):
        return (self.id, self.conjugated)

    @property
    def annihilation_mode(self):
        return (self.id, not self.conjugated)

    def __str__(self) -> str:
        return self.id + ("*" if self.conjugated else "")


def _labels(labels) -> list:
    return [FieldLabel.parse(x) for x in labels]


class OperatorPoly:
    """Finite sum of normal-ordered monomials ``c a^dagger(v_1)... a(u_1)...``.

    ``terms`` maps ``(creators, annihilators)`` (sorted tuples of mode keys) to
    complex coefficients.  Instances are treated as immutable.
    """

    __slots__ = ("ctx", "terms")

    def __init__(self, ctx: FieldContext, terms: dict | None = None, prune: bool = True):
        self.ctx = ctx
        self.terms = dict(terms or {})
        if prune:
            self._prune()

    def _prune(self):
        if not self.terms:
            return
        top = max(abs(c) for c in self.terms.values())
        cut = PRUNE_RTOL * top
        self.terms = {k: c for k, c in self.terms.items() if abs(c) > cut}

    # -- construction helpers -------------------------------------------------

    @classmethod
    def identity(cls, ctx: FieldContext, coeff: complex = 1.0) -> "OperatorPoly":
        return cls(ctx, {((), ()): complex(coeff)})

    @classmethod
    def zero(cls, ctx: FieldContext) -> "OperatorPoly":
        return cls(ctx, {})

    @classmethod
    def monomial(cls, ctx, creators=(), annihilators=(), coeff: complex = 1.0) -> "OperatorPoly":
        key = (tuple(sorted(_mode(k) for k in creators)), tuple(sorted(_mode(k) for k in annihilators)))
        return cls(ctx, {key: complex(coeff)})

    # -- arithmetic -----------------------------------------------------------

    def _check(self, other: "OperatorPoly"):
        if other.ctx is not self.ctx:
            raise ContextMismatch("operator polynomials belong to different field contexts")

    def __add__(self, other):
        if not isinstance(other, OperatorPoly):
            other = OperatorPoly.identity(self.ctx, other)
        self._check(other)
        out = defaultdict(complex, self.terms)
        for k, c in other.terms.items():
            out[k] += c
        return OperatorPoly(self.ctx, out)

    __radd__ = __add__

    def __neg__(self):
        return OperatorPoly(self.ctx, {k: -c for k, c in self.terms.items()}, prune=False)

    def __sub__(self, other):
        return self + (-other if isinstance(other, OperatorPoly) else -complex(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, OperatorPoly):
            return mul(self, other)
        c = complex(other)
        return OperatorPoly(self.ctx, {k: c * v for k, v in self.terms.items()})

    def __rmul__(self, other):
        c = complex(other)
        return OperatorPoly(self.ctx, {k: c * v for k, v in self.terms.items()})

    def __truediv__(self, other):
        return self * (1.0 / complex(other))

    def adjoint(self) -> "OperatorPoly":
        return OperatorPoly(self.ctx, {(a, c): v.conjugate() for (c, a), v in self.terms.items()}, prune=False)

    # -- inspection -----------------------------------------------------------

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(sorted(self.terms.items(), key=lambda kv: _sort_key(kv[0])))

    def coeff(self, creators=(), annihilators=()) -> complex:
        key = (tuple(sorted(_mode(k) for k in creators)), tuple(sorted(_mode(k) for k in annihilators)))
        return self.terms.get(key, 0j)

    @property
    def max_abs(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    @property
    def degree(self) -> int:
        return max((len(c) + len(a) for c, a in self.terms), default=0)

    def labels(self) -> set:
        return {k[0] for (c, a) in self.terms for k in c + a}

    def is_zero(self) -> bool:
        return not self.terms

    def allclose(self, other: "OperatorPoly", rtol: float = 1e-12, atol: float = 0.0) -> bool:
        return poly_distance(self, other) <= rtol * max(self.max_abs, other.max_abs) + atol

    def to_json(self) -> list:
        out = []
        for (c, a), v in self:
            out.append(
                {
                    "creators": [_mode_str(k) for k in c],
                    "annihilators": [_mode_str(k) for k in a],
                    "coeff": [v.real, v.imag],
                }
            )
        return out

    @classmethod
    def from_json(cls, ctx: FieldContext, data: Iterable[dict]) -> "OperatorPoly":
        terms = defaultdict(complex)
        for item in data:
            key = (
                tuple(sorted(_parse_mode(s) for s in item["creators"])),
                tuple(sorted(_parse_mode(s) for s in item["annihilators"])),
            )
            terms[key] += complex(*item["coeff"])
        return cls(ctx, terms)

    def __repr__(self) -> str:
        parts = []
        for (c, a), v in self:
            ops = [f"a+({_mode_str(k)})" for k in c] + [f"a({_mode_str(k)})" for k in a]
            parts.append(f"({v:.6g})" + ("*" + "*".join(ops) if ops else ""))
        return "OperatorPoly[" + " + ".join(parts or ["0"]) + "]"


def _mode(k):
    if isinstance(k, FieldLabel):
        return k.creation_mode
    return (k[0], bool(k[1]))


def _mode_str(k) -> str:
    return k[0] + ("*" if k[1] else "")


def _parse_mode(s: str):
    return (s[:-1], True) if s.endswith("*") else (s, False)


def _sort_key(key):
    c, a = key
    return (len(c) + len(a), len(c), c, a)


def poly_distance(a: OperatorPoly, b: OperatorPoly) -> float:
    """Largest coefficient difference."""
    a._check(b)
    keys = set(a.terms) | set(b.terms)
    return max((abs(a.terms.get(k, 0j) - b.terms.get(k, 0j)) for k in keys), default=0.0)


# --------------------------------------------------------------------------
# Building blocks
# --------------------------------------------------------------------------


def identity(ctx: FieldContext) -> OperatorPoly:
    return OperatorPoly.identity(ctx)


def creator(ctx: FieldContext, key) -> OperatorPoly:
    return OperatorPoly.monomial(ctx, creators=[key])


def annihilator(ctx: FieldContext, key) -> OperatorPoly:
    return OperatorPoly.monomial(ctx, annihilators=[key])


def field_op(ctx: FieldContext, label) -> OperatorPoly:
    """``phi_f = a(f*) + a^dagger(f)`` for a registered label."""
    label = FieldLabel.parse(label)
    if label.id not in ctx:
        raise KeyError(f"unregistered test function {label.id!r}")
    return OperatorPoly(
        ctx,
        {
            ((), (label.annihilation_mode,)): 1.0 + 0j,
            ((label.creation_mode,), ()): 1.0 + 0j,
        },
    )


def normal_product(ctx: FieldContext, labels: Sequence) -> OperatorPoly:
    """``:phi_1 ... phi_n:`` with every creator moved left and no contractions."""
    labels = _labels(labels)
    for lab in labels:
        if lab.id not in ctx:
            raise KeyError(f"unregistered test function {lab.id!r}")
    terms = defaultdict(complex)
    for choice in itertools.product((0, 1), repeat=len(labels)):
        cr = tuple(sorted(l.creation_mode for l, s in zip(labels, choice) if s))
        an = tuple(sorted(l.annihilation_mode for l, s in zip(labels, choice) if not s))
        terms[(cr, an)] += 1.0
    return OperatorPoly(ctx, terms)


def normal_power(ctx: FieldContext, label, n: int) -> OperatorPoly:
    """``:phi_f^n: = sum_k C(n, k) a^dagger(f)^k a(f*)^(n-k)``."""
    label = FieldLabel.parse(label)
    terms = {}
    for k in range(n + 1):
        key = ((label.creation_mode,) * k, (label.annihilation_mode,) * (n - k))
        terms[key] = complex(math.comb(n, k))
    return OperatorPoly(ctx, terms)


# --------------------------------------------------------------------------
# Multiplication by Wick reordering
# --------------------------------------------------------------------------


def _partial_matchings(p: int, q: int):
    """All injective partial maps from range(p) into range(q), as pair lists."""

    def rec(i, used):
        if i == p:
            yield []
            return
        yield from rec(i + 1, used)
        for j in range(q):
            if not used & (1 << j):
                for rest in rec(i + 1, used | (1 << j)):
                    yield [(i, j)] + rest

    return list(rec(0, 0))


_matchings = lru_cache(maxsize=None)(_partial_matchings)


def _reorder(ctx: FieldContext, ann: tuple, cre: tuple):
    """Normal-order ``a(ann...) a^dagger(cre...)``: yields (weight, left creators, right annihilators)."""
    for match in _matchings(len(ann), len(cre)):
        w = 1.0 + 0j
        for i, j in match:
            w *= ctx.inner(ann[i], cre[j])
            if w == 0:
                break
        if w == 0:
            continue
        mi = {i for i, _ in match}
        mj = {j for _, j in match}
        rest_c = tuple(c for j, c in enumerate(cre) if j not in mj)
        rest_a = tuple(a for i, a in enumerate(ann) if i not in mi)
        yield w, rest_c, rest_a


def mul(a: OperatorPoly, b: OperatorPoly) -> OperatorPoly:
    """Normal-ordered product, using ``[a(u), a^dagger(v)] = (u, v)``."""
    a._check(b)
    ctx = a.ctx
    out = defaultdict(complex)
    for (c1, a1), x in a.terms.items():
        for (c2, a2), y in b.terms.items():
            xy = x * y
            if not a1 or not c2:
                out[(tuple(sorted(c1 + c2)), tuple(sorted(a1 + a2)))] += xy
                continue
            for w, rc, ra in _reorder(ctx, a1, c2):
                out[(tuple(sorted(c1 + rc)), tuple(sorted(ra + a2)))] += xy * w
    return OperatorPoly(ctx, out)


def normal_mul(a: OperatorPoly, b: OperatorPoly) -> OperatorPoly:
    """``:AB:`` for normal-ordered ``A`` and ``B``: monomials concatenated, no contractions."""
    a._check(b)
    out = defaultdict(complex)
    for (c1, a1), x in a.terms.items():
        for (c2, a2), y in b.terms.items():
            out[(tuple(sorted(c1 + c2)), tuple(sorted(a1 + a2)))] += x * y
    return OperatorPoly(a.ctx, out)


def product(polys: Sequence[OperatorPoly]) -> OperatorPoly:
    out = polys[0]
    for p in polys[1:]:
        out = mul(out, p)
    return out


def field_string(ctx: FieldContext, labels: Sequence) -> OperatorPoly:
    """Ordered product ``phi_1 phi_2 ... phi_n`` in normal form."""
    labels = _labels(labels)
    if not labels:
        return identity(ctx)
    return product([field_op(ctx, l) for l in labels])


def commutator(a: OperatorPoly, b: OperatorPoly) -> OperatorPoly:
    return mul(a, b) - mul(b, a)


# --------------------------------------------------------------------------
# Vacuum expectation values
# --------------------------------------------------------------------------


def vacuum_expectation(P: OperatorPoly) -> complex:
    """Coefficient of the identity monomial."""
    return P.terms.get(((), ()), 0j)


def _pair_value(ctx: FieldContext, li: FieldLabel, lj: FieldLabel) -> complex:
    # <phi_i phi_j> = (F_i*, F_j) with F the (possibly conjugated) function
    return ctx.inner(li.annihilation_mode, lj.creation_mode)


def vev_recursive(ctx: FieldContext, labels: Sequence) -> complex:
    """``<phi_1 ... phi_{n+1}> = sum_i (f_i*, f_{n+1}) <... phi_i removed ... phi_n>``.

    Memoised on bitmasks of the surviving indices.
    """
    labels = _labels(labels)
    n = len(labels)
    if n > 24:
        raise SmearfieldError("vev_recursive supports at most 24 fields")
    if n % 2:
        return 0j
    memo = {0: 1.0 + 0j}

    def V(mask: int) -> complex:
        if mask in memo:
            return memo[mask]
        last = mask.bit_length() - 1
        rest = mask & ~(1 << last)
        total = 0j
        i = 0
        r = rest
        while r:
            if r & 1:
                total += _pair_value(ctx, labels[i], labels[last]) * V(rest & ~(1 << i))
            r >>= 1
            i += 1
        memo[mask] = total
        return total

    return V((1 << n) - 1)


def perfect_matchings(items: Sequence):
    """Yield every perfect matching of ``items`` as a list of (i, j) pairs, i < j."""
    items = list(items)
    if not items:
        yield []
        return
    first = items[0]
    for k in range(1, len(items)):
        pair = (first, items[k])
        for rest in perfect_matchings(items[1:k] + items[k + 1 :]):
            yield [pair] + rest


def vev_pairings(ctx: FieldContext, labels: Sequence) -> complex:
    """Sum over perfect matchings of ``prod (f_i*, f_j)``, ``i < j``."""
    labels = _labels(labels)
    n = len(labels)
    if n > 12:
        raise SmearfieldError("vev_pairings enumerates at most 12 fields")
    if n % 2:
        return 0j
    total = 0j
    for match in perfect_matchings(range(n)):
        w = 1.0 + 0j
        for i, j in match:
            w *= _pair_value(ctx, labels[i], labels[j])
        total += w
    return total


# --------------------------------------------------------------------------
# Adjoint action of a field
# --------------------------------------------------------------------------


def derivation(label, P: OperatorPoly) -> OperatorPoly:
    """``[phi_f, P]`` from the derivation rule.

    ``[phi_f, a^dagger(v)] = (f*, v)`` and ``[phi_f, a(u)] = -(u, f)`` are scalars,
    so each ladder operator in a monomial is replaced by its commutator in turn.
    """
    label = FieldLabel.parse(label)
    ctx = P.ctx
    f_cre = label.creation_mode
    f_ann = label.annihilation_mode
    out = defaultdict(complex)
    for (cr, an), v in P.terms.items():
        for i, k in enumerate(cr):
            s = ctx.inner(f_ann, k)
            if s:
                out[(cr[:i] + cr[i + 1 :], an)] += v * s
        for i, k in enumerate(an):
            s = -ctx.inner(k, f_cre)
            if s:
                out[(cr, an[:i] + an[i + 1 :])] += v * s
    return OperatorPoly(ctx, out)


def commute_field_with_poly(label, P: OperatorPoly, check: bool = True, rtol: float = 1e-12) -> OperatorPoly:
    """``phi_f P - P phi_f``, cross-checked against :func:`derivation`."""
    phi = field_op(P.ctx, label)
    out = mul(phi, P) - mul(P, phi)
    if check:
        ref = derivation(label, P)
        scale = max(ref.max_abs, out.max_abs, 1e-300)
        if poly_distance(out, ref) > rtol * scale:
            raise SmearfieldError("adjoint action disagrees with the derivation expansion")
    return out
