"""Test functions on Minkowski space and their contracted envelopes.

Two families are supported:

* Gaussian sums, ``sum_j exp(logc_j - y.A_j.y/2 + b_j.y)``, closed under products,
  conjugation, affine substitution and Fourier transformation.  A
  :class:`GaussianPacket` is the one-term member that approaches a massive plane
  wave as its envelope scale ``mu`` goes to zero.
* :class:`BumpFunction`, complex samples on a uniform rectangular lattice with an
  explicit support mask, evaluated off-node by multilinear interpolation.

Coordinates are arrays whose last axis has length ``n = d_space + 1``; index 0
is time and the metric signature is (+, -, ..., -).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence, Union

import numpy as np
from scipy.special import zeta

from .errors import DegenerateError, SmearfieldError

SUPPORTED_SPACE_DIMS = (1, 3)


def metric(n: int) -> np.ndarray:
    return np.diag([1.0] + [-1.0] * (n - 1))


def mdot(a, b) -> np.ndarray:
    """Minkowski product over the last axis."""
    a = np.asarray(a)
    b = np.asarray(b)
    return a[..., 0] * b[..., 0] - np.sum(a[..., 1:] * b[..., 1:], axis=-1)


def boost_matrix(rapidity: float, n: int, axis: int = 1) -> np.ndarray:
    """Pure boost along spatial ``axis`` (1-based) acting on column 4-vectors."""
    L = np.eye(n)
    ch, sh = math.cosh(rapidity), math.sinh(rapidity)
    L[0, 0] = L[axis, axis] = ch
    L[0, axis] = L[axis, 0] = sh
    return L


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in spacetime, ``lo <= y <= hi`` componentwise."""

    lo: tuple
    hi: tuple

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lo) + np.asarray(self.hi))

    @property
    def halfwidths(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.hi) - np.asarray(self.lo))

    def union(self, other: "Box") -> "Box":
        return Box(tuple(np.minimum(self.lo, other.lo)), tuple(np.maximum(self.hi, other.hi)))

    def contains(self, y, tol: float = 0.0) -> bool:
        y = np.asarray(y, float)
        return bool(np.all(y >= np.asarray(self.lo) - tol) and np.all(y <= np.asarray(self.hi) + tol))


# --------------------------------------------------------------------------
# Gaussian family
# --------------------------------------------------------------------------


def _logdet_principal(A: np.ndarray) -> complex:
    # Eigenvalues of a complex symmetric A with positive-definite real part lie
    # in the right half plane, where the principal log is continuous.
    ev = np.linalg.eigvals(A)
    if np.any(ev.real <= 0):
        raise SmearfieldError("Gaussian quadratic form is not convergent")
    return complex(np.sum(np.log(ev)))


class GaussianTerm:
    """``exp(logc - y.A.y/2 + b.y)`` with complex symmetric ``A``."""

    __slots__ = ("A", "b", "logc")

    def __init__(self, A, b, logc):
        A = np.asarray(A, dtype=complex)
        self.A = 0.5 * (A + A.T)
        self.b = np.asarray(b, dtype=complex)
        self.logc = complex(logc)

    @property
    def ndim(self) -> int:
        return self.b.shape[0]

    def log_value(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        q = np.einsum("...i,ij,...j->...", y, self.A, y)
        return self.logc - 0.5 * q + y @ self.b

    def __call__(self, y) -> np.ndarray:
        return np.exp(self.log_value(y))

    def conj(self) -> "GaussianTerm":
        return GaussianTerm(self.A.conj(), self.b.conj(), self.logc.conjugate())

    def mul(self, other: "GaussianTerm") -> "GaussianTerm":
        return GaussianTerm(self.A + other.A, self.b + other.b, self.logc + other.logc)

    def affine(self, lam: float, v) -> "GaussianTerm":
        """The term evaluated at ``lam * y + v``."""
        v = np.asarray(v, dtype=float)
        Av = self.A @ v
        return GaussianTerm(
            lam * lam * self.A,
            lam * (self.b - Av),
            self.logc - 0.5 * (v @ Av) + v @ self.b,
        )

    def power(self, p: float) -> "GaussianTerm":
        return GaussianTerm(p * self.A, p * self.b, p * self.logc)

    def log_fourier(self, k) -> np.ndarray:
        """log of ``int exp(...) exp(i k.y) d^n y`` with the Minkowski product."""
        k = np.asarray(k, dtype=float)
        n = self.ndim
        beta = self.b + 1j * (k @ metric(n))
        Ainv = np.linalg.inv(self.A)
        quad = np.einsum("...i,ij,...j->...", beta, Ainv, beta)
        return self.logc + 0.5 * n * math.log(2 * math.pi) - 0.5 * _logdet_principal(self.A) + 0.5 * quad

    def real_form(self):
        """(R, r, log|c|) describing ``|term(y)| = exp(log|c| - y.R.y/2 + r.y)``."""
        return self.A.real, self.b.real, self.logc.real

    def peak(self):
        """Location and log of the maximum of ``|term|``."""
        R, r, lc = self.real_form()
        y0 = np.linalg.solve(R, r)
        return y0, lc + 0.5 * r @ y0

    def moments(self):
        """Zeroth, first and second central moments treating the term as a weight."""
        mass = np.exp(self.log_fourier(np.zeros(self.ndim)))
        Ainv = np.linalg.inv(self.A)
        return mass, Ainv @ self.b, Ainv


class GaussianSum:
    """Finite sum of :class:`GaussianTerm`; the empty sum is the zero function."""

    kind = "gaussian"

    def __init__(self, terms: Sequence[GaussianTerm], ndim: int | None = None):
        terms = tuple(t for t in terms if np.isfinite(t.logc.real))
        if ndim is None:
            if not terms:
                raise ValueError("ndim required for an empty Gaussian sum")
            ndim = terms[0].ndim
        if any(t.ndim != ndim for t in terms):
            raise ValueError("mixed spacetime dimensions in Gaussian sum")
        self.terms = terms
        self._ndim = ndim

    @property
    def ndim(self) -> int:
        return self._ndim

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape[:-1], dtype=complex)
        for t in self.terms:
            out = out + t(y)
        return out

    def _new(self, terms) -> "GaussianSum":
        return GaussianSum(terms, self._ndim)

    def conj(self) -> "GaussianSum":
        return self._new([t.conj() for t in self.terms])

    def __mul__(self, other):
        if isinstance(other, GaussianSum):
            return self._new([s.mul(t) for s in self.terms for t in other.terms])
        return self.scale(other)

    __rmul__ = __mul__

    def __add__(self, other: "GaussianSum") -> "GaussianSum":
        if not isinstance(other, GaussianSum):
            return NotImplemented
        return self._new(self.terms + other.terms)

    def scale(self, c: complex) -> "GaussianSum":
        c = complex(c)
        if c == 0:
            return self._new([])
        lc = complex(math.log(abs(c)), math.atan2(c.imag, c.real))
        return self._new([GaussianTerm(t.A, t.b, t.logc + lc) for t in self.terms])

    def affine(self, lam: float, v) -> "GaussianSum":
        return self._new([t.affine(lam, v) for t in self.terms])

    def translate(self, a) -> "GaussianSum":
        """``y -> f(y - a)``."""
        return self.affine(1.0, -np.asarray(a, float))

    def rescale_about(self, lam: float, x) -> "GaussianSum":
        """``y -> f(lam (y - x) + x)``."""
        x = np.asarray(x, float)
        return self.affine(lam, (1.0 - lam) * x)

    def abs2(self) -> "GaussianSum":
        return self * self.conj()

    def fourier(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        out = np.zeros(k.shape[:-1], dtype=complex)
        for t in self.terms:
            out = out + np.exp(t.log_fourier(k))
        return out

    def integral(self) -> complex:
        return complex(self.fourier(np.zeros(self._ndim)))

    def effective_support(self, eps: float) -> Box:
        if not 0 < eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if self.is_zero:
            raise DegenerateError("zero function has no effective support")
        peaks = [t.peak() for t in self.terms]
        log_max = max(p[1] for p in peaks)
        box = None
        for t, (y0, lp) in zip(self.terms, peaks):
            level = lp - (log_max + math.log(eps))
            if level < 0:
                continue
            Rinv = np.linalg.inv(t.real_form()[0])
            hw = np.sqrt(2.0 * level * np.diag(Rinv))
            b = Box(tuple(y0 - hw), tuple(y0 + hw))
            box = b if box is None else box.union(b)
        return box

    def center_time(self) -> float:
        return float(self.effective_support(1e-3).center[0])

    def moments(self):
        """Total mass, mean and covariance of the function read as a weight."""
        mass = 0j
        first = np.zeros(self._ndim, complex)
        second = np.zeros((self._ndim, self._ndim), complex)
        for t in self.terms:
            m, mu, cov = t.moments()
            mass += m
            first += m * mu
            second += m * (cov + np.outer(mu, mu))
        if mass == 0:
            raise DegenerateError("zero total mass")
        mean = first / mass
        return mass, mean, second / mass - np.outer(mean, mean)

    def to_json(self) -> dict:
        return {
            "kind": "gaussian",
            "ndim": self._ndim,
            "terms": [
                {
                    "A": _cpairs(t.A),
                    "b": _cpairs(t.b),
                    "logc": [t.logc.real, t.logc.imag],
                }
                for t in self.terms
            ],
        }


class GaussianPacket(GaussianSum):
    """``amp * exp(-i k.y' + mu^2 (y'.y' - 2 (k.y')^2 / m^2))`` with ``y' = y - center``.

    ``k`` must lie on the positive mass shell ``k.k = m^2``.
    """

    kind = "packet"

    def __init__(self, k, mu: float, m: float, center=None, amp: complex = 1.0):
        k = np.asarray(k, dtype=float)
        n = k.shape[0]
        if n - 1 not in SUPPORTED_SPACE_DIMS:
            raise ValueError(f"unsupported spacetime dimension {n}")
        if not (mu > 0 and m > 0):
            raise ValueError("mu and m must be positive")
        if k[0] <= 0 or abs(mdot(k, k) - m * m) > 1e-12 * m * m:
            raise ValueError("k must lie on the positive mass shell")
        center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
        self.k = k
        self.mu = float(mu)
        self.m = float(m)
        self.center = center
        self.amp = complex(amp)
        eta = metric(n)
        ek = eta @ k
        M = eta - 2.0 * np.outer(ek, ek) / (m * m)
        A = -2.0 * self.mu**2 * M
        if self.amp == 0:
            terms = []
        else:
            logamp = complex(math.log(abs(self.amp)), math.atan2(self.amp.imag, self.amp.real))
            base = GaussianTerm(A, -1j * ek, logamp)
            terms = [base.affine(1.0, -center)]
        super().__init__(terms, n)

    @classmethod
    def from_momentum(cls, p, mu: float, m: float, center=None, amp: complex = 1.0):
        """Packet with spatial momentum ``p``; the energy is put on shell."""
        p = np.atleast_1d(np.asarray(p, dtype=float))
        k = np.concatenate([[math.sqrt(m * m + p @ p)], p])
        return cls(k, mu, m, center, amp)

    def with_mu(self, mu: float) -> "GaussianPacket":
        return GaussianPacket(self.k, mu, self.m, self.center, self.amp)

    def boosted(self, L) -> "GaussianPacket":
        L = np.asarray(L, float)
        k = L @ self.k
        k[0] = math.sqrt(self.m**2 + k[1:] @ k[1:])
        return GaussianPacket(k, self.mu, self.m, L @ self.center, self.amp)

    def translated(self, a) -> "GaussianPacket":
        return GaussianPacket(self.k, self.mu, self.m, self.center + np.asarray(a, float), self.amp)

    def center_time(self) -> float:
        return float(self.center[0])

    def to_json(self) -> dict:
        return {
            "kind": "packet",
            "k": [float(v) for v in self.k],
            "mu": self.mu,
            "m": self.m,
            "center": [float(v) for v in self.center],
            "amp": [self.amp.real, self.amp.imag],
        }


# --------------------------------------------------------------------------
# Lattice bumps
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    origin: tuple
    spacing: tuple
    shape: tuple

    def __post_init__(self):
        if not (len(self.origin) == len(self.spacing) == len(self.shape)):
            raise ValueError("grid origin, spacing and shape must have equal length")
        if any(h <= 0 for h in self.spacing):
            raise ValueError("grid spacing must be positive")

    @classmethod
    def covering(cls, lo, hi, spacing) -> "Grid":
        """Smallest grid of the given spacing whose nodes cover ``[lo, hi]``."""
        lo = np.asarray(lo, float)
        hi = np.asarray(hi, float)
        spacing = np.broadcast_to(np.asarray(spacing, float), lo.shape)
        shape = np.ceil((hi - lo) / spacing - 1e-9).astype(int) + 1
        return cls(tuple(map(float, lo)), tuple(map(float, spacing)), tuple(map(int, shape)))

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axes(self) -> list:
        return [o + h * np.arange(s) for o, h, s in zip(self.origin, self.spacing, self.shape)]

    def points(self) -> np.ndarray:
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def shifted(self, a) -> "Grid":
        return Grid(tuple(float(o + v) for o, v in zip(self.origin, a)), self.spacing, self.shape)


def _interpolate(grid: Grid, samples: np.ndarray, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    out_shape = y.shape[:-1]
    pts = y.reshape(-1, grid.ndim)
    shape = np.asarray(grid.shape)
    u = (pts - np.asarray(grid.origin)) / np.asarray(grid.spacing)
    r = np.rint(u)
    u = np.where(np.abs(u - r) < 1e-9, r, u)
    valid = np.all((u >= 0) & (u <= shape - 1), axis=1)
    i0 = np.floor(u).astype(int)
    t = u - i0
    out = np.zeros(len(pts), dtype=complex)
    for corner in itertools.product((0, 1), repeat=grid.ndim):
        c = np.asarray(corner)
        w = np.prod(np.where(c == 1, t, 1.0 - t), axis=1)
        idx = np.clip(i0 + c, 0, shape - 1)
        out = out + np.where(valid, w * samples[tuple(idx.T)], 0.0)
    return out.reshape(out_shape)


class BumpFunction:
    """Grid-sampled test function, zero outside ``support_mask``."""

    kind = "bump"

    def __init__(self, grid: Grid, samples, support_mask=None):
        samples = np.asarray(samples, dtype=complex).reshape(grid.shape)
        if support_mask is None:
            support_mask = samples != 0
        support_mask = np.asarray(support_mask, dtype=bool).reshape(grid.shape)
        if np.any(samples[~support_mask] != 0):
            raise ValueError("bump samples must vanish outside the support mask")
        if grid.ndim - 1 not in SUPPORTED_SPACE_DIMS:
            raise ValueError(f"unsupported spacetime dimension {grid.ndim}")
        self.grid = grid
        self.samples = samples
        self.support_mask = support_mask
        self.samples.setflags(write=False)
        self.support_mask.setflags(write=False)

    @classmethod
    def from_callable(cls, grid: Grid, func: Callable, support: Callable | None = None):
        pts = grid.points()
        mask = np.ones(grid.shape, bool) if support is None else np.asarray(support(pts), bool)
        vals = np.where(mask, func(pts), 0.0)
        return cls(grid, vals, mask)

    @property
    def ndim(self) -> int:
        return self.grid.ndim

    @property
    def is_zero(self) -> bool:
        return not np.any(self.samples)

    def __call__(self, y) -> np.ndarray:
        return _interpolate(self.grid, self.samples, y)

    def _like(self, samples, mask=None) -> "BumpFunction":
        return BumpFunction(self.grid, samples, self.support_mask if mask is None else mask)

    def conj(self) -> "BumpFunction":
        return self._like(self.samples.conj())

    def scale(self, c: complex) -> "BumpFunction":
        return self._like(complex(c) * self.samples)

    def __mul__(self, other):
        if isinstance(other, BumpFunction):
            self._check_grid(other)
            return self._like(self.samples * other.samples, self.support_mask & other.support_mask)
        return self.scale(other)

    __rmul__ = __mul__

    def __add__(self, other: "BumpFunction") -> "BumpFunction":
        if not isinstance(other, BumpFunction):
            return NotImplemented
        self._check_grid(other)
        return self._like(self.samples + other.samples, self.support_mask | other.support_mask)

    def _check_grid(self, other: "BumpFunction"):
        if other.grid != self.grid:
            raise ValueError("bump functions live on different grids")

    def abs2(self) -> "BumpFunction":
        return self._like(np.abs(self.samples) ** 2 + 0j)

    def translate(self, a) -> "BumpFunction":
        return BumpFunction(self.grid.shifted(a), self.samples, self.support_mask)

    def rescaled_samples(self, lam: float, x) -> np.ndarray:
        """Node values of ``y -> f(lam (y - x) + x)`` (interpolated)."""
        x = np.asarray(x, float)
        return self(lam * (self.grid.points() - x) + x)

    def integral(self) -> complex:
        return complex(np.sum(self.samples) * self.grid.cell_volume)

    def effective_support(self, eps: float) -> Box:
        if not 0 < eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        mag = np.abs(self.samples)
        top = mag.max()
        if top == 0:
            raise DegenerateError("zero function has no effective support")
        keep = self.support_mask & (mag >= eps * top)
        idx = np.argwhere(keep)
        o = np.asarray(self.grid.origin)
        h = np.asarray(self.grid.spacing)
        return Box(tuple(o + h * idx.min(axis=0)), tuple(o + h * idx.max(axis=0)))

    def support_box(self) -> Box:
        idx = np.argwhere(self.support_mask)
        o = np.asarray(self.grid.origin)
        h = np.asarray(self.grid.spacing)
        return Box(tuple(o + h * idx.min(axis=0)), tuple(o + h * idx.max(axis=0)))

    def center_time(self) -> float:
        return float(self.support_box().center[0])

    def moments(self):
        w = self.samples.ravel() * self.grid.cell_volume
        pts = self.grid.points().reshape(-1, self.ndim)
        mass = w.sum()
        if mass == 0:
            raise DegenerateError("zero total mass")
        mean = (w @ pts) / mass
        d = pts - mean
        return mass, mean, (d.T * w) @ d / mass

    def to_json(self) -> dict:
        return {
            "kind": "bump",
            "grid": {
                "origin": list(self.grid.origin),
                "spacing": list(self.grid.spacing),
                "shape": list(self.grid.shape),
            },
            "samples": _cpairs(self.samples.ravel()),
            "support_mask": [bool(v) for v in self.support_mask.ravel()],
        }


def smooth_bump(
    grid: Grid,
    center,
    halfwidths,
    sharpness: float = 3.0,
    amp: complex = 1.0,
) -> BumpFunction:
    """Product of ``exp(a - a / (1 - s^2))`` profiles, ``s = (y_i - c_i) / w_i``.

    Peak value is ``amp``; support is the open box ``|s_i| < 1``.
    """
    c = np.asarray(center, float)
    w = np.broadcast_to(np.asarray(halfwidths, float), c.shape)

    def support(pts):
        return np.all(np.abs((pts - c) / w) < 1.0, axis=-1)

    def profile(pts):
        s2 = ((pts - c) / w) ** 2
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            e = np.where(s2 < 1.0, sharpness - sharpness / (1.0 - s2), -np.inf)
        return amp * np.exp(np.sum(e, axis=-1))

    return BumpFunction.from_callable(grid, profile, support)


TestFunction = Union[GaussianSum, BumpFunction]


def translate(f: TestFunction, a) -> TestFunction:
    if isinstance(f, GaussianPacket):
        return f.translated(a)
    return f.translate(a)


def lincomb(coeffs: Sequence[complex], funcs: Sequence[TestFunction]) -> TestFunction:
    """``sum_i coeffs[i] * funcs[i]`` within one family."""
    out = None
    for c, f in zip(coeffs, funcs):
        term = f.scale(c)
        out = term if out is None else out + term
    return out


# --------------------------------------------------------------------------
# Envelopes and the scale functional
# --------------------------------------------------------------------------


class EnvelopeVariant(str, Enum):
    SUPPORT_RESTRICTED = "SupportRestricted"
    PRODUCT = "Product"
    TANH_PRODUCT = "TanhProduct"
    MEASURE_SMEARED = "MeasureSmeared"
    NON_ABSOLUTE = "NonAbsolute"


@dataclass(frozen=True)
class EnvelopeSpec:
    """Selects the contracted-envelope construction.

    ``alpha_nodes`` are ``(relative scale, weight)`` pairs; the contraction scale at
    a node is the relative scale times the value of the scale functional.
    """

    variant: EnvelopeVariant = EnvelopeVariant.PRODUCT
    C: float | None = None
    alpha_nodes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "variant", EnvelopeVariant(self.variant))
        object.__setattr__(self, "alpha_nodes", tuple((float(s), float(w)) for s, w in self.alpha_nodes))
        if self.variant is EnvelopeVariant.TANH_PRODUCT and not (self.C is not None and self.C > 0):
            raise ValueError("TanhProduct needs C > 0")
        if self.variant is EnvelopeVariant.MEASURE_SMEARED:
            if not self.alpha_nodes:
                raise ValueError("MeasureSmeared needs at least one alpha node")
            if any(w < 0 or s <= 0 for s, w in self.alpha_nodes):
                raise ValueError("alpha nodes need positive scales and non-negative weights")

    def to_json(self) -> dict:
        return {"variant": self.variant.value, "C": self.C, "alpha_nodes": [list(a) for a in self.alpha_nodes]}


@dataclass(frozen=True)
class ScaleFunctionalSpec:
    """``P1(s) = p1_coeff * s ** p1_power``."""

    p1_coeff: float = 1.0
    p1_power: float = 0.0

    def __post_init__(self):
        if not self.p1_coeff > 0:
            raise ValueError("p1_coeff must be positive")


def scale_functional(f: TestFunction, spec: ScaleFunctionalSpec, norm: float) -> float:
    """lambda[f] = P1((f, f)); ``norm`` is (f, f) computed by the caller."""
    norm = float(np.real(norm))
    if not norm > 0:
        raise DegenerateError(f"scale functional needs (f,f) > 0, got {norm!r}")
    return spec.p1_coeff * norm**spec.p1_power


def _tanh_series(C_u: float, tol: float = 1e-17):
    """Taylor coefficients ``a_n`` of ``tanh(z) = sum a_n z^(2n-1)`` for ``|z| <= C_u``."""
    ratio = (2.0 * C_u / math.pi) ** 2
    if ratio >= 0.9:
        raise SmearfieldError(
            "closed-form TanhProduct envelope needs C * max|f|^2 < 0.47 * pi; "
            "use a bump test function for larger C"
        )
    coeffs = []
    n = 1
    while True:
        a = (-1) ** (n + 1) * 2.0 * ((4.0 / math.pi**2) ** n - math.pi ** (-2 * n)) * float(zeta(2 * n))
        coeffs.append(a)
        if abs(a) * C_u ** (2 * n - 1) < tol * math.tanh(C_u) or n > 2000:
            break
        n += 1
    return coeffs


def _envelope_gaussian(f: GaussianSum, spec: EnvelopeSpec, lam: float, x) -> GaussianSum:
    v = spec.variant
    if v is EnvelopeVariant.NON_ABSOLUTE:
        return f * f.rescale_about(lam, x)
    if v is EnvelopeVariant.MEASURE_SMEARED:
        smeared = GaussianSum([], f.ndim)
        for s, w in spec.alpha_nodes:
            smeared = smeared + f.rescale_about(lam * s, x).abs2().scale(w)
        return f.abs2() * smeared
    contracted = f.rescale_about(lam, x).abs2()
    if v is EnvelopeVariant.SUPPORT_RESTRICTED:
        return contracted
    if v is EnvelopeVariant.PRODUCT:
        return f.abs2() * contracted
    # TanhProduct: power series of tanh in u = |f|^2, each power a Gaussian
    if len(f.terms) != 1:
        raise SmearfieldError("closed-form TanhProduct envelope needs a single-term Gaussian")
    u = f.abs2().terms[0]
    u_max = math.exp(u.peak()[1])
    coeffs = _tanh_series(spec.C * u_max)
    norm = math.tanh(spec.C)
    terms = [u.power(2 * i + 1) for i in range(len(coeffs))]
    weighted = [
        GaussianTerm(t.A, t.b, t.logc + math.log(abs(a) * spec.C ** (2 * i + 1) / norm) + (0j if a > 0 else 1j * math.pi))
        for i, (t, a) in enumerate(zip(terms, coeffs))
    ]
    return GaussianSum(weighted, f.ndim) * contracted


def _envelope_bump(f: BumpFunction, spec: EnvelopeSpec, lam: float, x) -> BumpFunction:
    v = spec.variant
    s = f.samples
    if v is EnvelopeVariant.MEASURE_SMEARED:
        acc = np.zeros(f.grid.shape)
        for sc, w in spec.alpha_nodes:
            acc = acc + w * np.abs(f.rescaled_samples(lam * sc, x)) ** 2
        return f._like(np.abs(s) ** 2 * acc + 0j)
    base = f.rescaled_samples(lam, x)
    if v is EnvelopeVariant.NON_ABSOLUTE:
        out = s * base
    elif v is EnvelopeVariant.SUPPORT_RESTRICTED:
        out = np.where(f.support_mask, np.abs(base) ** 2, 0.0) + 0j
    elif v is EnvelopeVariant.PRODUCT:
        out = np.abs(s) ** 2 * np.abs(base) ** 2 + 0j
    else:
        out = np.tanh(spec.C * np.abs(s) ** 2) / math.tanh(spec.C) * np.abs(base) ** 2 + 0j
    return f._like(out)


def contract_envelope(f: TestFunction, spec: EnvelopeSpec, lambda_value: float, x) -> TestFunction:
    """Contracted envelope of ``f`` about ``x`` at scale ``lambda_value``.

    Packets and other Gaussian sums give Gaussian sums in closed form; bumps give
    bumps on the same grid.
    """
    if not lambda_value > 0:
        raise ValueError("lambda_value must be positive")
    x = np.asarray(x, float)
    if isinstance(f, BumpFunction):
        return _envelope_bump(f, spec, lambda_value, x)
    if f.is_zero:
        return GaussianSum([], f.ndim)
    return _envelope_gaussian(f, spec, lambda_value, x)


def effective_support(f: TestFunction, eps: float) -> Box:
    return f.effective_support(eps)


def envelope_width(h: TestFunction) -> float:
    """Geometric-mean standard deviation ``det(cov)^(1/2n)`` of ``h`` read as a weight."""
    _, _, cov = h.moments()
    return float(abs(np.linalg.det(cov.real)) ** (1.0 / (2 * h.ndim)))


def pairing(h: TestFunction, g: TestFunction) -> complex:
    """Distributional pairing ``int h(y) g(y) d^n y``."""
    if isinstance(h, GaussianSum) and isinstance(g, GaussianSum):
        return (h * g).integral()
    if isinstance(h, BumpFunction):
        return complex(np.sum(h.samples * g(h.grid.points())) * h.grid.cell_volume)
    return pairing(g, h)


# --------------------------------------------------------------------------
# JSON
# --------------------------------------------------------------------------


def _cpairs(a) -> list:
    a = np.asarray(a, complex)
    if a.ndim == 0:
        return [float(a.real), float(a.imag)]
    return [_cpairs(v) for v in a]


def _from_cpairs(x) -> np.ndarray:
    arr = np.asarray(x, float)
    return arr[..., 0] + 1j * arr[..., 1]


def to_json(f: TestFunction) -> dict:
    return f.to_json()


def from_json(d: dict) -> TestFunction:
    kind = d.get("kind")
    if kind == "packet":
        amp = d.get("amp", [1.0, 0.0])
        return GaussianPacket(d["k"], d["mu"], d["m"], d.get("center"), complex(amp[0], amp[1]))
    if kind == "bump":
        g = d["grid"]
        grid = Grid(tuple(map(float, g["origin"])), tuple(map(float, g["spacing"])), tuple(map(int, g["shape"])))
        samples = _from_cpairs(d["samples"]).reshape(grid.shape)
        mask = np.asarray(d["support_mask"], bool).reshape(grid.shape) if "support_mask" in d else None
        return BumpFunction(grid, samples, mask)
    if kind == "gaussian":
        terms = [
            GaussianTerm(_from_cpairs(t["A"]), _from_cpairs(t["b"]), complex(*t["logc"]))
            for t in d["terms"]
        ]
        return GaussianSum(terms, int(d["ndim"]))
    raise ValueError(f"unknown test function kind {kind!r}")
