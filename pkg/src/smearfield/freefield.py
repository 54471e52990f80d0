"""Free Klein-Gordon field: Fourier transforms, the mass-shell inner product,
smeared commutators and the 1+1 dimensional Green functions.

Conventions
-----------
``f~(k) = int f(y) exp(i k.y) d^n y`` with the Minkowski product, and

    (f, g) = int conj(f~(k)) g~(k) 2 pi delta(k^2 - m^2) theta(k_0) d^n k / (2 pi)^n
           = (2 pi)^(1-n) int conj(f~) g~ d^d k / (2 omega),

evaluated at ``k_0 = omega(k) = sqrt(m^2 + |k|^2)``.  The same ``(2 pi)^(1-n)``
pattern is used for ``n = 2`` and ``n = 4``.

Two evaluation routes exist for every inner product between Gaussian-family test
functions: a fixed tensor Gauss-Legendre lattice in spatial momentum
(:func:`inner_product`) and an adaptive integral over rapidity
(:func:`inner_product_closed`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad_vec
from scipy.signal import convolve
from scipy.special import j0

from .errors import QuadratureMismatch, SmearfieldError
from .testfn import BumpFunction, GaussianPacket, GaussianSum, TestFunction, metric

# --------------------------------------------------------------------------
# Quadrature on the positive mass shell
# --------------------------------------------------------------------------


class MassShellQuadrature:
    """Nodes and weights for ``int d^d k`` over a spatial-momentum box.

    The shell measure ``1/(2 omega)`` and the ``(2 pi)^(1-n)`` prefactor are
    applied by :func:`inner_product`, not folded into ``weights``.
    """

    def __init__(self, nodes, weights, m: float, cutoff: float, generator: dict | None = None):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        weights = np.asarray(weights, dtype=float)
        if np.any(weights <= 0):
            raise ValueError("quadrature weights must be positive")
        if not m > 0:
            raise ValueError("mass must be positive")
        self.nodes = nodes
        self.weights = weights
        self.m = float(m)
        self.cutoff = float(cutoff)
        self.generator = generator
        self.omega = np.sqrt(self.m**2 + np.sum(nodes**2, axis=1))
        self.momenta = np.column_stack([self.omega, nodes])
        self.measure = weights / (2.0 * self.omega) * (2 * math.pi) ** (1 - self.ndim)
        for a in (self.nodes, self.weights, self.omega, self.momenta, self.measure):
            a.setflags(write=False)

    @property
    def d_space(self) -> int:
        return self.nodes.shape[1]

    @property
    def ndim(self) -> int:
        return self.d_space + 1

    def __len__(self) -> int:
        return len(self.weights)

    @classmethod
    def gauss_legendre(
        cls,
        m: float,
        d_space: int,
        cutoff: float,
        nodes: int = 256,
        order: int = 16,
        center=None,
    ) -> "MassShellQuadrature":
        """Tensor composite Gauss-Legendre rule on ``center + [-cutoff, cutoff]^d``.

        ``nodes`` is the count per axis and must be a multiple of ``order``.
        """
        if nodes % order:
            raise ValueError("nodes per axis must be a multiple of the panel order")
        panels = nodes // order
        center = np.zeros(d_space) if center is None else np.asarray(center, float)
        x, w = leggauss(order)
        edges = np.linspace(-cutoff, cutoff, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        pts1 = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        wts1 = (half[:, None] * w[None, :]).ravel()
        grids = np.meshgrid(*([pts1] * d_space), indexing="ij")
        wgrids = np.meshgrid(*([wts1] * d_space), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1) + center
        wts = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
        gen = {
            "generator": "gauss_legendre",
            "m": float(m),
            "d_space": int(d_space),
            "cutoff": float(cutoff),
            "nodes": int(nodes),
            "order": int(order),
            "center": [float(c) for c in center],
        }
        return cls(pts, wts, m, cutoff, gen)

    @property
    def key(self):
        if self.generator is not None:
            return tuple(sorted((k, tuple(v) if isinstance(v, list) else v) for k, v in self.generator.items()))
        return (self.m, self.nodes.tobytes(), self.weights.tobytes())

    def same_as(self, other: "MassShellQuadrature") -> bool:
        return self is other or self.key == other.key

    def to_json(self) -> dict:
        if self.generator is not None:
            return dict(self.generator)
        return {
            "m": self.m,
            "cutoff": self.cutoff,
            "nodes": self.nodes.tolist(),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "MassShellQuadrature":
        if d.get("generator") == "gauss_legendre":
            return cls.gauss_legendre(
                d["m"], d["d_space"], d["cutoff"], d.get("nodes", 256), d.get("order", 16), d.get("center")
            )
        return cls(d["nodes"], d["weights"], d["m"], d["cutoff"])


@dataclass(frozen=True, eq=False)
class SingleParticleVector:
    """Values of ``f~`` at the nodes of a mass-shell quadrature."""

    values: np.ndarray
    quadrature: MassShellQuadrature = field(repr=False)

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise SmearfieldError("single-particle vector has non-finite entries")


# --------------------------------------------------------------------------
# Fourier transforms
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ClosedGaussian:
    """Exact transform of a Gaussian sum: ``sum_j exp(L_j(k))`` with quadratic ``L_j``."""

    source: GaussianSum

    def at(self, k) -> np.ndarray:
        return self.source.fourier(k)

    def log_terms(self, k) -> list:
        return [t.log_fourier(k) for t in self.source.terms]


@dataclass(frozen=True, eq=False)
class GridFT:
    """Discrete transform of a bump on its (zero-padded) frequency lattice.

    ``freqs[a]`` holds the lattice along axis ``a`` (axis 0 is energy);
    ``samples`` approximates ``f~`` there.  :meth:`at` evaluates the same
    Riemann-sum transform at arbitrary momenta.
    """

    freqs: tuple
    samples: np.ndarray
    padding: int
    source: BumpFunction = field(repr=False)

    def at(self, k) -> np.ndarray:
        return bump_fourier_at(self.source, k)


def fourier(f: TestFunction, padding: int = 4):
    """Momentum representation of ``f``."""
    if isinstance(f, GaussianSum):
        return ClosedGaussian(f)
    if padding < 4:
        raise ValueError("zero-padding factor must be at least 4")
    g = f.grid
    pads = [padding * s for s in g.shape]
    S = np.zeros(pads, dtype=complex)
    S[tuple(slice(0, s) for s in g.shape)] = f.samples
    # exp(+i k0 t) along time, exp(-i k x) along space
    T = np.fft.ifft(S, axis=0) * pads[0]
    if g.ndim > 1:
        T = np.fft.fftn(T, axes=tuple(range(1, g.ndim)))
    freqs = tuple(2 * math.pi * np.fft.fftfreq(p, h) for p, h in zip(pads, g.spacing))
    phase = np.ones(pads, dtype=complex)
    for a, (k, o) in enumerate(zip(freqs, g.origin)):
        shape = [1] * g.ndim
        shape[a] = -1
        sign = 1.0 if a == 0 else -1.0
        phase = phase * np.exp(1j * sign * k * o).reshape(shape)
    return GridFT(freqs, T * phase * g.cell_volume, padding, f)


def bump_fourier_at(f: BumpFunction, k, chunk_elems: int = 1 << 22) -> np.ndarray:
    """Riemann-sum transform ``h^n sum_j f_j exp(i k.y_j)`` at arbitrary momenta."""
    k = np.atleast_2d(np.asarray(k, dtype=float))
    g = f.grid
    axes = g.axes()
    signs = [1.0] + [-1.0] * (g.ndim - 1)
    rest = int(np.prod(g.shape[1:])) if g.ndim > 1 else 1
    step = max(1, chunk_elems // max(rest, 1))
    out = np.empty(len(k), dtype=complex)
    for s in range(0, len(k), step):
        kk = k[s : s + step]
        E0 = np.exp(1j * signs[0] * np.outer(kk[:, 0], axes[0]))
        R = E0 @ f.samples.reshape(g.shape[0], -1)
        R = R.reshape((len(kk),) + tuple(g.shape[1:]))
        for a in range(1, g.ndim):
            Ea = np.exp(1j * signs[a] * np.outer(kk[:, a], axes[a]))
            R = np.einsum("qb,qb...->q...", Ea, R)
        out[s : s + step] = R
    return out * g.cell_volume


def shell_vector(f: TestFunction, q: MassShellQuadrature) -> SingleParticleVector:
    if f.ndim != q.ndim:
        raise QuadratureMismatch("test function and quadrature have different dimensions")
    if isinstance(f, GaussianPacket) and abs(f.m - q.m) > 1e-12 * q.m:
        raise QuadratureMismatch(f"packet mass {f.m} differs from quadrature mass {q.m}")
    if isinstance(f, GaussianSum):
        vals = f.fourier(q.momenta)
    else:
        vals = bump_fourier_at(f, q.momenta)
    return SingleParticleVector(vals, q)


def _fsum_pairing(a: np.ndarray, b: np.ndarray, w: np.ndarray) -> complex:
    # Written so that swapping a and b conjugates the result bit-for-bit.
    ar, ai, br, bi = a.real, a.imag, b.real, b.imag
    re = math.fsum(w * (ar * br + ai * bi))
    im = math.fsum(w * (ar * bi - ai * br))
    return complex(re, im)


def vector_inner(u: SingleParticleVector, v: SingleParticleVector) -> complex:
    if not u.quadrature.same_as(v.quadrature):
        raise QuadratureMismatch("single-particle vectors live on different quadratures")
    return _fsum_pairing(u.values, v.values, u.quadrature.measure)


def inner_product(f: TestFunction, g: TestFunction, q: MassShellQuadrature) -> complex:
    """Lattice evaluation of ``(f, g)``, antilinear in ``f``."""
    return vector_inner(shell_vector(f, q), shell_vector(g, q))


def commutator_value(f: TestFunction, g: TestFunction, q: MassShellQuadrature) -> complex:
    """``[phi_f, phi_g] = (f*, g) - (g*, f)``."""
    return inner_product(f.conj(), g, q) - inner_product(g.conj(), f, q)


# --------------------------------------------------------------------------
# Adaptive route for Gaussian-family pairs
# --------------------------------------------------------------------------


def _log_bound(f: GaussianSum, k) -> np.ndarray:
    """Upper bound ``log sum_j |term_j~(k)|``."""
    logs = np.stack([t.log_fourier(k).real for t in f.terms])
    top = logs.max(axis=0)
    return top + np.log(np.sum(np.exp(logs - top), axis=0))


def _scaled_fourier(f: GaussianSum, k, shift: float) -> np.ndarray:
    out = 0j
    for t in f.terms:
        out = out + np.exp(t.log_fourier(k) - shift)
    return out


def _pair_density(f, g, k, shift_f, shift_g):
    a = _scaled_fourier(f, k, shift_f)
    b = _scaled_fourier(g, k, shift_g)
    return a.real * b.real + a.imag * b.imag, a.real * b.imag - a.imag * b.real


def _momentum_peak(t) -> np.ndarray:
    """Unconstrained maximiser of ``|term~(k)|`` over all ``n`` momentum components."""
    n = t.ndim
    eta = metric(n)
    Ainv = np.linalg.inv(t.A)
    return -eta @ np.linalg.solve(Ainv.real, (Ainv @ t.b).imag)


def inner_product_closed(f: GaussianSum, g: GaussianSum, m: float | None = None, rtol: float = 1e-12) -> complex:
    """``(f, g)`` for Gaussian-family test functions without a momentum lattice.

    1+1: adaptive integral over rapidity, where ``dk / (2 omega) = d theta / 2``.
    3+1: adaptive integral over radial rapidity with a refined angular product
    rule at each radius.
    """
    if not (isinstance(f, GaussianSum) and isinstance(g, GaussianSum)):
        raise TypeError("closed route needs Gaussian-family test functions")
    if f.ndim != g.ndim:
        raise QuadratureMismatch("test functions of different dimension")
    masses = {p.m for p in (f, g) if isinstance(p, GaussianPacket)}
    if m is None:
        if not masses:
            raise ValueError("mass must be given for non-packet Gaussians")
        m = masses.pop()
    if any(abs(mm - m) > 1e-12 * m for mm in masses):
        raise QuadratureMismatch("packets with different masses")
    if f.is_zero or g.is_zero:
        return 0j
    if f.ndim == 2:
        return _closed_1p1(f, g, m, rtol)
    if f.ndim == 4:
        return _closed_3p1(f, g, m, rtol)
    raise ValueError("unsupported dimension")


def _closed_1p1(f, g, m, rtol):
    def shell(theta):
        theta = np.asarray(theta, float)
        return np.stack([m * np.cosh(theta), m * np.sinh(theta)], axis=-1)

    scan = np.linspace(-40.0, 40.0, 16001)
    with np.errstate(over="ignore"):
        k = shell(scan)
        Lf = _log_bound(f, k)
        Lg = _log_bound(g, k)
    L = Lf + Lg
    top = np.nanmax(L)
    keep = np.nonzero(L > top - 80.0)[0]
    step = scan[1] - scan[0]
    lo, hi = scan[keep[0]] - 2 * step, scan[keep[-1]] + 2 * step
    sf, sg = np.nanmax(Lf), np.nanmax(Lg)
    peaks = sorted({float(scan[np.nanargmax(Lf)]), float(scan[np.nanargmax(Lg)]), float(scan[np.nanargmax(L)])})
    peaks = [p for p in peaks if lo < p < hi]

    def integrand(theta):
        re, im = _pair_density(f, g, shell(theta), sf, sg)
        return 0.5 * np.array([re, im])

    scale = math.exp(top - sf - sg)
    val, _ = quad_vec(integrand, lo, hi, epsabs=1e-17 * scale * (hi - lo), epsrel=rtol, points=peaks or None, limit=4000)
    res = complex(val[0], val[1]) * math.exp(sf + sg) / (2 * math.pi)
    return res


def _rotation_to(z_dir, x_hint=None) -> np.ndarray:
    """Orthogonal matrix whose columns are (e_x, e_y, e_z) with e_z along ``z_dir``."""
    ez = z_dir / np.linalg.norm(z_dir)
    cand = [x_hint] if x_hint is not None else []
    cand += [np.array([1.0, 0, 0]), np.array([0, 1.0, 0])]
    for c in cand:
        if c is None:
            continue
        ex = c - (c @ ez) * ez
        if np.linalg.norm(ex) > 1e-6:
            ex /= np.linalg.norm(ex)
            break
    ey = np.cross(ez, ex)
    return np.column_stack([ex, ey, ez])


def _closed_3p1(f, g, m, rtol):
    dirs = [_momentum_peak(t)[1:] for t in f.terms + g.terms]
    total = np.sum(dirs, axis=0)
    if np.linalg.norm(total) < 1e-9 * m:
        total = np.array([0.0, 0.0, 1.0])
    others = [d for d in dirs if np.linalg.norm(np.cross(d, total)) > 1e-9 * m * np.linalg.norm(total)]
    R = _rotation_to(total, others[0] if others else None)

    def shell(eta, ct, ph):
        st = np.sqrt(np.maximum(0.0, 1 - ct * ct))
        r = m * np.sinh(eta)
        local = np.stack([r * st * np.cos(ph), r * st * np.sin(ph), r * ct * np.ones_like(ph)], axis=-1)
        kvec = local @ R.T
        k0 = m * np.cosh(eta) * np.ones(kvec.shape[:-1])
        return np.concatenate([k0[..., None], kvec], axis=-1)

    # Radial range from a coarse direction scan
    ct_s, w_s = leggauss(24)
    ph_s = np.linspace(0, 2 * np.pi, 48, endpoint=False)
    CT, PH = np.meshgrid(ct_s, ph_s, indexing="ij")
    etas = np.linspace(0.0, 25.0, 2501)
    Lf_e = np.empty_like(etas)
    Lg_e = np.empty_like(etas)
    with np.errstate(over="ignore"):
        for i, e in enumerate(etas):
            k = shell(e, CT, PH)
            Lf_e[i] = np.nanmax(_log_bound(f, k))
            Lg_e[i] = np.nanmax(_log_bound(g, k))
    L = Lf_e + Lg_e
    top = np.nanmax(L)
    keep = np.nonzero(L > top - 80.0)[0]
    step = etas[1] - etas[0]
    lo = max(0.0, etas[keep[0]] - 2 * step)
    hi = etas[keep[-1]] + 2 * step
    sf, sg = float(np.nanmax(Lf_e)), float(np.nanmax(Lg_e))

    def angular(eta):
        prev = None
        n_t, n_p = 32, 32
        while True:
            x, w = leggauss(n_t)
            th = 0.5 * np.pi * (x + 1)
            wt = 0.5 * np.pi * w * np.sin(th)
            ph = np.linspace(0, 2 * np.pi, n_p, endpoint=False)
            TH, PH2 = np.meshgrid(th, ph, indexing="ij")
            re, im = _pair_density(f, g, shell(eta, np.cos(TH), PH2), sf, sg)
            wts = wt[:, None] * (2 * np.pi / n_p)
            cur = np.array([np.sum(wts * re), np.sum(wts * im)])
            if prev is not None:
                err = np.max(np.abs(cur - prev))
                if err <= max(rtol * np.max(np.abs(cur)), 1e-18) or n_t >= 1024:
                    return cur
            prev = cur
            n_t *= 2
            n_p *= 2

    def integrand(eta):
        return 0.5 * m * m * np.sinh(eta) ** 2 * angular(eta)

    val, _ = quad_vec(integrand, lo, hi, epsabs=1e-17, epsrel=rtol, limit=2000)
    return complex(val[0], val[1]) * math.exp(sf + sg) / (2 * math.pi) ** 3


# --------------------------------------------------------------------------
# 1+1 dimensional Green functions
# --------------------------------------------------------------------------


LIGHTCONE_RTOL = 1e-9


def pauli_jordan_1p1(m: float, t, x):
    """``Delta`` with ``[phi(t, x), phi(0, 0)] = i Delta(t, x)``.

    On the light cone the jump is assigned its midpoint ``-sgn(t) / 4``, the value
    the Fourier representation converges to; ``sgn(0) = 0``.
    """
    t = np.asarray(t, float)
    x = np.asarray(x, float)
    s2 = t * t - x * x
    cone = np.abs(s2) <= LIGHTCONE_RTOL * (t * t + x * x)
    inside = (s2 > 0) & ~cone
    val = -0.5 * np.sign(t) * np.where(inside, j0(m * np.sqrt(np.where(inside, s2, 0.0))), np.where(cone, 0.5, 0.0))
    return val if val.ndim else float(val)


def retarded_green_1p1(m: float, t, x):
    """Solution of ``(box + m^2) G = delta`` supported in the forward light cone.

    Uses the same light-cone midpoint convention as :func:`pauli_jordan_1p1`,
    so ``Delta = -(G_ret - G_adv)`` holds pointwise.
    """
    t = np.asarray(t, float)
    x = np.asarray(x, float)
    s2 = t * t - x * x
    cone = (np.abs(s2) <= LIGHTCONE_RTOL * (t * t + x * x)) & (t > 0)
    inside = (s2 > 0) & (t > 0) & ~cone
    val = 0.5 * np.where(inside, j0(m * np.sqrt(np.where(inside, s2, 0.0))), np.where(cone, 0.5, 0.0))
    return val if val.ndim else float(val)


def advanced_green_1p1(m: float, t, x):
    return retarded_green_1p1(m, -np.asarray(t, float), x)


def smeared_commutator_1p1(f: BumpFunction, g: BumpFunction, m: float) -> complex:
    """``int int f(y) g(z) i Delta(y - z)`` as a double Riemann sum over the two grids.

    Both bumps must share the lattice spacing; the kernel is tabulated once on
    the lattice of index differences and applied by convolution.  When the
    supports straddle a light cone the jump of the kernel limits agreement with
    the shell route to the lattice discretisation error.
    """
    if f.ndim != 2 or g.ndim != 2:
        raise ValueError("Pauli-Jordan oracle is 1+1 dimensional")
    if not np.allclose(f.grid.spacing, g.grid.spacing, rtol=0, atol=1e-15):
        raise ValueError("bumps must share the lattice spacing")
    h = np.asarray(f.grid.spacing)
    off = np.asarray(f.grid.origin) - np.asarray(g.grid.origin)
    nf = np.asarray(f.grid.shape)
    ng = np.asarray(g.grid.shape)
    l0 = np.arange(-(ng[0] - 1), nf[0])
    l1 = np.arange(-(ng[1] - 1), nf[1])
    T, X = np.meshgrid(off[0] + l0 * h[0], off[1] + l1 * h[1], indexing="ij")
    D = pauli_jordan_1p1(m, T, X)
    conv = convolve(D, g.samples, mode="full")
    sl = conv[ng[0] - 1 : ng[0] - 1 + nf[0], ng[1] - 1 : ng[1] - 1 + nf[1]]
    total = np.sum(f.samples * sl)
    return 1j * total * f.grid.cell_volume * g.grid.cell_volume


# --------------------------------------------------------------------------
# Registry of labelled test functions
# --------------------------------------------------------------------------


class FieldContext:
    """Registered test functions plus the quadrature that defines their pairing.

    Mode keys are ``(id, conjugated)`` pairs.  Contractions ``<u, v>`` are cached
    and always evaluated in one canonical orientation, so ``inner(v, u)`` is the
    exact conjugate of ``inner(u, v)``.

    ``method`` selects the route for Gaussian-family pairs: ``"lattice"``,
    ``"closed"`` or ``"auto"`` (closed for Gaussians, lattice otherwise).
    """

    def __init__(self, quadrature: MassShellQuadrature, method: str = "lattice"):
        if method not in ("lattice", "closed", "auto"):
            raise ValueError(f"unknown inner-product method {method!r}")
        self.quadrature = quadrature
        self.method = method
        self._functions: dict = {}
        self._vectors: dict = {}
        self._inner: dict = {}

    @property
    def m(self) -> float:
        return self.quadrature.m

    @property
    def ndim(self) -> int:
        return self.quadrature.ndim

    def register(self, fid: str, f: TestFunction) -> str:
        if not isinstance(fid, str) or not fid or fid.endswith("*"):
            raise ValueError(f"invalid test function id {fid!r}")
        if f.ndim != self.ndim:
            raise QuadratureMismatch(f"{fid}: dimension {f.ndim} does not match context {self.ndim}")
        if isinstance(f, GaussianPacket) and abs(f.m - self.m) > 1e-12 * self.m:
            raise QuadratureMismatch(f"{fid}: packet mass differs from context mass")
        if fid in self._functions and self._functions[fid] is not f:
            raise ValueError(f"test function id {fid!r} already registered")
        self._functions[fid] = f
        return fid

    def __contains__(self, fid: str) -> bool:
        return fid in self._functions

    def ids(self) -> list:
        return list(self._functions)

    def function(self, key) -> TestFunction:
        fid, conj = key
        try:
            f = self._functions[fid]
        except KeyError:
            raise KeyError(f"unregistered test function {fid!r}") from None
        return f.conj() if conj else f

    def vector(self, key) -> SingleParticleVector:
        if key not in self._vectors:
            self._vectors[key] = shell_vector(self.function(key), self.quadrature)
        return self._vectors[key]

    def _use_closed(self, fa, fb) -> bool:
        return self.method != "lattice" and isinstance(fa, GaussianSum) and isinstance(fb, GaussianSum)

    def inner(self, ka, kb) -> complex:
        """``<u_a, u_b>``, antilinear in the first slot."""
        ka = (ka[0], bool(ka[1]))
        kb = (kb[0], bool(kb[1]))
        if kb < ka:
            return self.inner(kb, ka).conjugate()
        if (ka, kb) not in self._inner:
            fa, fb = self.function(ka), self.function(kb)
            if self._use_closed(fa, fb):
                val = inner_product_closed(fa, fb, m=self.m)
            else:
                val = vector_inner(self.vector(ka), self.vector(kb))
            self._inner[(ka, kb)] = val
        return self._inner[(ka, kb)]

    def norm(self, fid: str) -> float:
        return self.inner((fid, False), (fid, False)).real

    def commutator(self, fa: str, fb: str) -> complex:
        """``[phi_a, phi_b] = (a*, b) - (b*, a)`` for registered ids."""
        return self.inner((fa, True), (fb, False)) - self.inner((fb, True), (fa, False))
