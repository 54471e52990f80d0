"""Truncated bosonic Fock space over the span of registered single-particle vectors.

The Gram matrix of the chosen vectors is diagonalised, modes below a relative
eigenvalue floor are dropped as null directions, and the remainder form an
orthonormal mode set.  Ladder, field and polynomial matrices live on the
occupation basis with at most ``N`` quanta.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ProjectionError, SmearfieldError
from .freefield import FieldContext
from .wick import FieldLabel, OperatorPoly

NULL_RTOL = 1e-10
PROJECTION_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class FockSpec:
    """Orthonormalised mode set and occupation basis.

    Attributes
    ----------
    keys : tuple
        Mode keys ``(id, conjugated)`` spanning the single-particle space.
    gram : ndarray
        ``<u_i, u_j>`` over ``keys``.
    coeffs : ndarray
        Columns express orthonormal modes as combinations of ``keys``.
    eigenvalues : ndarray
        Kept Gram eigenvalues, ascending.
    max_particles : int
        Truncation level ``N``.
    states : tuple
        Occupation tuples, grouped by total number and lexicographic within.
    """

    ctx: FieldContext
    keys: tuple
    gram: np.ndarray
    coeffs: np.ndarray
    eigenvalues: np.ndarray
    max_particles: int
    states: tuple
    discarded: int = 0
    _index: dict = field(default_factory=dict, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_modes(self) -> int:
        return self.coeffs.shape[1]

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def ids(self) -> list:
        return sorted({k[0] for k in self.keys})

    def index(self, occ) -> int:
        return self._index[tuple(occ)]

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[0] = 1.0
        return v

    def reconstructed_gram(self) -> np.ndarray:
        """``<u_i, u_j>`` rebuilt from the kept modes only."""
        B = self.projection_matrix()
        return B.conj().T @ B

    def projection_matrix(self) -> np.ndarray:
        """``B[a, i] = <e_a, u_i>``."""
        return self.coeffs.conj().T @ self.gram

    def to_json(self) -> dict:
        return {
            "keys": [[k[0], bool(k[1])] for k in self.keys],
            "gram": _cpairs(self.gram),
            "eigenvalues": self.eigenvalues.tolist(),
            "coeffs": _cpairs(self.coeffs),
            "max_particles": self.max_particles,
            "discarded": self.discarded,
            "states": [list(s) for s in self.states],
        }


def _cpairs(a: np.ndarray) -> list:
    return np.stack([a.real, a.imag], axis=-1).tolist()


def occupation_states(n_modes: int, N: int) -> list:
    """Occupation tuples with total at most ``N``.

    Grouped by total particle number; within a group ordered lexicographically
    by the sorted multiset of occupied mode indices.
    """
    out = []
    for n in range(N + 1):
        for combo in itertools.combinations_with_replacement(range(n_modes), n):
            occ = [0] * n_modes
            for a in combo:
                occ[a] += 1
            out.append(tuple(occ))
    return out


def fock_dimension(n_modes: int, N: int) -> int:
    return sum(math.comb(n_modes + n - 1, n) for n in range(N + 1)) if n_modes else 1


def build_spec(
    ctx: FieldContext,
    ids: Sequence[str],
    N: int = 4,
    include_conjugates: bool = False,
    null_rtol: float = NULL_RTOL,
) -> FockSpec:
    """Build the truncated Fock space over the span of ``ids``.

    Parameters
    ----------
    ctx : FieldContext
        Supplies the pairing.
    ids : sequence of str
        Registered test function ids.
    N : int
        Maximum particle number.
    include_conjugates : bool
        Also span the vectors of the conjugated functions, needed when daggered
        fields or complex functions appear in both slots of a field.
    null_rtol : float
        Eigenvalues below ``null_rtol * trace`` are discarded.
    """
    if N < 0:
        raise ValueError("max_particles must be non-negative")
    ids = list(ids)
    if not ids:
        raise SmearfieldError("Fock basis needs at least one test function")
    keys = [(i, False) for i in ids]
    if include_conjugates:
        keys += [(i, True) for i in ids]
    n = len(keys)
    G = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            G[i, j] = ctx.inner(keys[i], keys[j])
    G = 0.5 * (G + G.conj().T)
    tr = float(np.trace(G).real)
    if tr <= 0:
        raise SmearfieldError("Fock basis has zero total norm")
    w, U = np.linalg.eigh(G)
    if w[0] < -null_rtol * tr:
        raise SmearfieldError(f"Gram matrix not positive semi-definite (min eigenvalue {w[0]:.3e})")
    keep = w >= null_rtol * tr
    if not keep.any():
        raise SmearfieldError("no modes left after null-vector removal")
    w_k = w[keep]
    C = U[:, keep] / np.sqrt(w_k)
    states = tuple(occupation_states(C.shape[1], N))
    return FockSpec(
        ctx=ctx,
        keys=tuple(keys),
        gram=G,
        coeffs=C,
        eigenvalues=w_k,
        max_particles=N,
        states=states,
        discarded=int((~keep).sum()),
        _index={s: i for i, s in enumerate(states)},
    )


class FockMatrix:
    """Dense operator on the occupation basis of one :class:`FockSpec`."""

    __array_priority__ = 100

    def __init__(self, data, spec: FockSpec):
        data = np.asarray(data, dtype=complex)
        if data.shape != (spec.dim, spec.dim):
            raise ValueError(f"matrix shape {data.shape} does not match Fock dimension {spec.dim}")
        self.data = data
        self.spec = spec

    def _check(self, other: "FockMatrix"):
        if other.spec is not self.spec:
            raise SmearfieldError("Fock matrices built on different specs")

    def __matmul__(self, other):
        if isinstance(other, FockMatrix):
            self._check(other)
            return FockMatrix(self.data @ other.data, self.spec)
        return self.data @ np.asarray(other)

    def __add__(self, other):
        self._check(other)
        return FockMatrix(self.data + other.data, self.spec)

    def __sub__(self, other):
        self._check(other)
        return FockMatrix(self.data - other.data, self.spec)

    def __mul__(self, c):
        return FockMatrix(self.data * complex(c), self.spec)

    __rmul__ = __mul__

    def dagger(self) -> "FockMatrix":
        return FockMatrix(self.data.conj().T, self.spec)

    def vacuum_element(self) -> complex:
        return complex(self.data[0, 0])

    def element(self, occ_out, occ_in) -> complex:
        return complex(self.data[self.spec.index(occ_out), self.spec.index(occ_in)])

    def to_json(self) -> dict:
        return {"dim": self.spec.dim, "data": _cpairs(self.data)}

    def write_binary(self, path) -> Path:
        """Row-major little-endian float64 ``(re, im)`` pairs plus a JSON sidecar."""
        path = Path(path)
        buf = np.empty(self.data.shape + (2,), dtype="<f8")
        buf[..., 0] = self.data.real
        buf[..., 1] = self.data.imag
        path.write_bytes(buf.tobytes(order="C"))
        meta = {
            "shape": list(self.data.shape),
            "dtype": "<f8",
            "layout": "row-major, complex as consecutive (re, im) pairs",
            "states": [list(s) for s in self.spec.states],
        }
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, indent=1))
        return path

    @staticmethod
    def read_binary(path) -> np.ndarray:
        path = Path(path)
        meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        raw = np.frombuffer(path.read_bytes(), dtype=meta["dtype"]).reshape(meta["shape"] + [2])
        return raw[..., 0] + 1j * raw[..., 1]


# --------------------------------------------------------------------------
# Ladder operators
# --------------------------------------------------------------------------


def mode_creator(spec: FockSpec, a: int) -> np.ndarray:
    """Matrix of ``a^dagger(e_a)``; transitions above ``N`` are dropped."""
    M = np.zeros((spec.dim, spec.dim), dtype=complex)
    for j, occ in enumerate(spec.states):
        up = list(occ)
        up[a] += 1
        up = tuple(up)
        i = spec._index.get(up)
        if i is not None:
            M[i, j] = math.sqrt(up[a])
    return M


def _ladders(spec: FockSpec) -> list:
    if "ladders" not in spec._cache:
        spec._cache["ladders"] = [mode_creator(spec, a) for a in range(spec.n_modes)]
    return spec._cache["ladders"]


def project(spec: FockSpec, key, rtol: float = PROJECTION_RTOL) -> np.ndarray:
    """Coordinates ``<e_a, v>`` of the mode-key vector ``v``.

    Raises
    ------
    ProjectionError
        If the squared residual exceeds ``rtol * max(|v|^2, trace)``.
    """
    ctx = spec.ctx
    key = (key[0], bool(key[1]))
    overlaps = np.array([ctx.inner(k, key) for k in spec.keys], dtype=complex)
    alpha = spec.coeffs.conj().T @ overlaps
    vv = ctx.inner(key, key).real
    resid2 = vv - float(np.sum(np.abs(alpha) ** 2))
    scale = max(vv, float(np.trace(spec.gram).real))
    if resid2 > rtol * scale or (vv > 0 and not alpha.any()):
        raise ProjectionError(
            f"{key[0]}{'*' if key[1] else ''} lies outside the modelled span (residual^2 {resid2:.3e})"
        )
    return alpha


def creator_matrix(spec: FockSpec, key) -> FockMatrix:
    alpha = project(spec, key)
    lad = _ladders(spec)
    M = np.zeros((spec.dim, spec.dim), dtype=complex)
    for a, c in enumerate(alpha):
        if c:
            M += c * lad[a]
    return FockMatrix(M, spec)


def annihilator_matrix(spec: FockSpec, key) -> FockMatrix:
    # a(u) is antilinear in u: adjoint of a^dagger(u)
    return creator_matrix(spec, key).dagger()


def field_matrix(label, spec: FockSpec) -> FockMatrix:
    """``phi_f = a(f*) + a^dagger(f)`` on the occupation basis."""
    label = FieldLabel.parse(label)
    return annihilator_matrix(spec, label.annihilation_mode) + creator_matrix(spec, label.creation_mode)


def poly_matrix(P: OperatorPoly, spec: FockSpec) -> FockMatrix:
    """Normal-ordered monomials as creator products times annihilator products."""
    if P.ctx is not spec.ctx:
        raise SmearfieldError("polynomial and Fock spec use different field contexts")
    cre: dict = {}
    ann: dict = {}
    out = np.zeros((spec.dim, spec.dim), dtype=complex)
    I = np.eye(spec.dim, dtype=complex)
    for (cs, ans), coeff in P:
        M = I
        for k in cs:
            if k not in cre:
                cre[k] = creator_matrix(spec, k).data
            M = M @ cre[k]
        for k in ans:
            if k not in ann:
                ann[k] = annihilator_matrix(spec, k).data
            M = M @ ann[k]
        out += coeff * M
    return FockMatrix(out, spec)


def number_operator(spec: FockSpec) -> FockMatrix:
    return FockMatrix(np.diag([float(sum(s)) for s in spec.states]).astype(complex), spec)


def identity_matrix(spec: FockSpec) -> FockMatrix:
    return FockMatrix(np.eye(spec.dim, dtype=complex), spec)


def one_particle_state(spec: FockSpec, key) -> np.ndarray:
    """Normalised ``a^dagger(v)|0> / |v|``."""
    psi = creator_matrix(spec, key) @ spec.vacuum()
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        raise SmearfieldError("zero one-particle vector")
    return psi / nrm


def expectation(M: FockMatrix, state, tol: float = 1e-12) -> complex:
    """``<state|M|state>`` for a normalised state vector."""
    state = np.asarray(state, dtype=complex)
    if state.shape != (M.spec.dim,):
        raise ValueError(f"state of length {state.shape} does not match Fock dimension {M.spec.dim}")
    if abs(np.vdot(state, state).real - 1.0) > tol:
        raise ValueError("state is not normalised")
    return complex(np.vdot(state, M.data @ state))


def string_vev(spec: FockSpec, labels: Sequence) -> complex:
    """``<0|phi_1 ... phi_n|0>`` by applying field matrices to the vacuum."""
    v = spec.vacuum()
    for lab in reversed([FieldLabel.parse(x) for x in labels]):
        v = field_matrix(lab, spec).data @ v
    return complex(v[0])
