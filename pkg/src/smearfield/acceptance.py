"""Acceptance criteria as library functions.

Each ``criterion_<n>(rng)`` builds its own randomized inputs from the generator,
evaluates the criterion at its stated tolerance and returns a
:class:`CriterionResult`.  :func:`run_all` drives them in order and is used both
by the ``selftest`` command and by the test-suite.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import fock as F
from . import interacting as I
from . import wick as W
from .freefield import FieldContext, MassShellQuadrature, inner_product_closed, smeared_commutator_1p1
from .report import ResultTable
from .testfn import (
    EnvelopeSpec,
    GaussianPacket,
    GaussianSum,
    GaussianTerm,
    Grid,
    ScaleFunctionalSpec,
    boost_matrix,
    contract_envelope,
    lincomb,
    pairing,
    scale_functional,
    smooth_bump,
)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    metric: float
    threshold: float
    cases: int
    detail: str = ""
    seconds: float = field(default=0.0, compare=False)

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.metric = float(self.metric)
        self.threshold = float(self.threshold)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} [{self.number:2d}] {self.name}: {self.detail}"


# --------------------------------------------------------------------------
# Shared builders
# --------------------------------------------------------------------------

BUMP_SPACING = 0.025


def bump_quadrature(m: float = 1.0) -> MassShellQuadrature:
    return MassShellQuadrature.gauss_legendre(m, 1, 40.0, nodes=1280)


def packet_quadrature_1p1(m: float = 1.0) -> MassShellQuadrature:
    return MassShellQuadrature.gauss_legendre(m, 1, 10.0, nodes=512)


def packet_quadrature_3p1(m: float = 1.0) -> MassShellQuadrature:
    return MassShellQuadrature.gauss_legendre(m, 3, 6.0, nodes=96)


def node_bump(center, halfwidths, spacing: float = BUMP_SPACING, amp: complex = 1.0):
    """Smooth bump whose grid sits on the global lattice ``spacing * Z^2``."""
    c = np.asarray(center, float)
    w = np.asarray(halfwidths, float)
    lo = np.floor((c - w) / spacing) * spacing
    hi = np.ceil((c + w) / spacing) * spacing
    return smooth_bump(Grid.covering(lo, hi, spacing), c, w, amp=amp)


def snap(x, spacing: float = BUMP_SPACING) -> np.ndarray:
    return np.round(np.asarray(x, float) / spacing) * spacing


def random_packets(rng, n: int, m: float = 1.0, d_space: int = 1, spread: float = 0.5) -> list:
    out = []
    for _ in range(n):
        p = rng.normal(0.0, spread, d_space)
        mu = rng.uniform(0.5, 1.0)
        center = rng.normal(0.0, 0.5, d_space + 1)
        amp = np.exp(1j * rng.uniform(0, 2 * np.pi))
        out.append(GaussianPacket.from_momentum(p, mu, m, center=center, amp=amp))
    return out


def _rel(a: complex, b: complex) -> float:
    s = max(abs(a), abs(b))
    return 0.0 if s == 0 else abs(a - b) / s


# --------------------------------------------------------------------------
# 1. Microcausality
# --------------------------------------------------------------------------


def criterion_1(rng, pairs: int = 20) -> CriterionResult:
    ctx = FieldContext(bump_quadrature())
    worst_space, min_time, worst_oracle = 0.0, math.inf, 0.0
    for i in range(pairs):
        wf = rng.uniform(0.3, 0.5, 2)
        f = node_bump([0.0, 0.0], wf)
        ctx.register(f"f{i}", f)
        # spacelike partner
        wg = rng.uniform(0.3, 0.5, 2)
        dt = rng.uniform(-0.5, 0.5)
        dx = (wf[1] + wg[1] + abs(dt) + wf[0] + wg[0] + rng.uniform(0.05, 0.5)) * rng.choice([-1, 1])
        g = node_bump([dt, dx], wg)
        if I.PastConeRelation.classify(g.support_box(), f.support_box()).separation is not I.Separation.SPACELIKE:
            raise AssertionError("spacelike pair generator produced a non-spacelike pair")
        ctx.register(f"s{i}", g)
        scale = max(ctx.norm(f"f{i}"), ctx.norm(f"s{i}"))
        worst_space = max(worst_space, abs(ctx.commutator(f"f{i}", f"s{i}")) / scale)
        # timelike partner
        wg = rng.uniform(0.3, 0.5, 2)
        dx = rng.uniform(-0.5, 0.5)
        dt = (wf[0] + wg[0] + abs(dx) + wf[1] + wg[1] + rng.uniform(0.1, 0.6)) * rng.choice([-1, 1])
        g = node_bump([dt, dx], wg)
        ctx.register(f"t{i}", g)
        scale = max(ctx.norm(f"f{i}"), ctx.norm(f"t{i}"))
        comm = ctx.commutator(f"f{i}", f"t{i}")
        oracle = smeared_commutator_1p1(f, g, ctx.m)
        min_time = min(min_time, abs(comm) / scale)
        worst_oracle = max(worst_oracle, abs(comm - oracle) / abs(oracle))
    ok = worst_space <= 1e-6 and min_time > 1e-3 and worst_oracle <= 1e-4
    return CriterionResult(
        1,
        "microcausality",
        ok,
        worst_space,
        1e-6,
        2 * pairs,
        f"spacelike max|[f,g]|/scale={worst_space:.2e} (<=1e-6); timelike min ratio={min_time:.3f} (>1e-3); "
        f"oracle rel={worst_oracle:.2e} (<=1e-4)",
    )


# --------------------------------------------------------------------------
# 2. Wick oracle equivalence
# --------------------------------------------------------------------------


def criterion_2(rng, sets: int = 13) -> CriterionResult:
    q = MassShellQuadrature.gauss_legendre(1.0, 1, 10.0, nodes=256)
    worst_pair, worst_fock, cases, odd_ok = 0.0, 0.0, 0, True
    for s in range(sets):
        ctx = FieldContext(q)
        ids = [f"p{j}" for j in range(3)]
        for pid, pk in zip(ids, random_packets(rng, 3, spread=0.3)):
            ctx.register(pid, pk)
        spec = F.build_spec(ctx, ids, N=5, include_conjugates=True)
        pool = ids + [i + "*" for i in ids]
        for n in (2, 4, 6, 8):
            labels = list(rng.choice(pool, n))
            a = W.vev_recursive(ctx, labels)
            b = W.vev_pairings(ctx, labels)
            c = F.string_vev(spec, labels)
            worst_pair = max(worst_pair, _rel(a, b))
            worst_fock = max(worst_fock, _rel(a, c))
            cases += 1
        for n in (1, 3, 5):
            labels = list(rng.choice(pool, n))
            vals = (W.vev_recursive(ctx, labels), W.vev_pairings(ctx, labels), F.string_vev(spec, labels))
            odd_ok &= all(v == 0 for v in vals)
    ok = worst_pair <= 1e-12 and worst_fock <= 1e-10 and odd_ok
    return CriterionResult(
        2,
        "wick oracle equivalence",
        ok,
        worst_pair,
        1e-12,
        cases,
        f"recursion vs pairings={worst_pair:.2e} (<=1e-12); vs Fock N=5={worst_fock:.2e} (<=1e-10); "
        f"odd n exactly zero={odd_ok}",
    )


# --------------------------------------------------------------------------
# 3. Positivity and the GNS quotient
# --------------------------------------------------------------------------


def criterion_3(rng, bases: int = 20) -> CriterionResult:
    q = MassShellQuadrature.gauss_legendre(1.0, 1, 10.0, nodes=256)
    worst_eig, worst_rec, nulls = math.inf, 0.0, 0
    for b in range(bases):
        ctx = FieldContext(q)
        size = int(rng.integers(2, 6))
        funcs = random_packets(rng, size)
        if size >= 3 and b % 2 == 0:
            c = rng.normal(size=2) + 1j * rng.normal(size=2)
            funcs[-1] = lincomb(c, funcs[:2])
        ids = []
        for j, fn in enumerate(funcs):
            ids.append(ctx.register(f"b{j}", fn))
        spec = F.build_spec(ctx, ids, N=1)
        tr = float(np.trace(spec.gram).real)
        worst_eig = min(worst_eig, float(np.linalg.eigvalsh(spec.gram)[0]) / tr)
        worst_rec = max(worst_rec, float(np.abs(spec.reconstructed_gram() - spec.gram).max()) / tr)
        nulls += spec.discarded
    ok = worst_eig >= -1e-10 and worst_rec <= 1e-8
    return CriterionResult(
        3,
        "positivity and GNS quotient",
        ok,
        worst_rec,
        1e-8,
        bases,
        f"min eig/trace={worst_eig:.2e} (>=-1e-10); reconstruction/trace={worst_rec:.2e} (<=1e-8); "
        f"null modes removed={nulls}",
    )


# --------------------------------------------------------------------------
# 4. Closed versus lattice inner products
# --------------------------------------------------------------------------


def criterion_4(rng, pairs_1p1: int = 18, pairs_3p1: int = 2) -> CriterionResult:
    worst = 0.0
    q2 = packet_quadrature_1p1()
    for _ in range(pairs_1p1):
        f, g = random_packets(rng, 2)
        lat = FieldContext(q2, "lattice")
        lat.register("f", f)
        lat.register("g", g)
        worst = max(worst, _rel(lat.inner(("f", False), ("g", False)), inner_product_closed(f, g, 1.0)))
    q4 = packet_quadrature_3p1()
    for _ in range(pairs_3p1):
        f, g = random_packets(rng, 2, d_space=3, spread=0.3)
        lat = FieldContext(q4, "lattice")
        lat.register("f", f)
        lat.register("g", g)
        worst = max(worst, _rel(lat.inner(("f", False), ("g", False)), inner_product_closed(f, g, 1.0)))
    return CriterionResult(
        4,
        "inner-product routes agree",
        worst <= 1e-6,
        worst,
        1e-6,
        pairs_1p1 + pairs_3p1,
        f"max rel |closed-lattice|={worst:.2e} (<=1e-6) over {pairs_1p1} 1+1 and {pairs_3p1} 3+1 pairs",
    )


# --------------------------------------------------------------------------
# 5. Poincare invariance of the scale functional
# --------------------------------------------------------------------------


def criterion_5(rng, n_1p1: int = 10, n_3p1: int = 2) -> CriterionResult:
    spec = ScaleFunctionalSpec(1.0, 0.5)
    worst = 0.0
    for d_space, count in ((1, n_1p1), (3, n_3p1)):
        base = random_packets(rng, 1, d_space=d_space, spread=0.3)[0]
        lam0 = scale_functional(base, spec, inner_product_closed(base, base).real)
        for _ in range(count):
            L = boost_matrix(rng.uniform(-1.5, 1.5), d_space + 1, axis=int(rng.integers(1, d_space + 1)))
            moved = base.boosted(L).translated(rng.normal(0.0, 2.0, d_space + 1))
            lam = scale_functional(moved, spec, inner_product_closed(moved, moved).real)
            worst = max(worst, abs(lam - lam0) / lam0)
    return CriterionResult(
        5,
        "Poincare invariance of lambda[f]",
        worst <= 1e-8,
        worst,
        1e-8,
        n_1p1 + n_3p1,
        f"max rel variation={worst:.2e} (<=1e-8)",
    )


# --------------------------------------------------------------------------
# 6. Envelope delta limit
# --------------------------------------------------------------------------


def delta_probes() -> list:
    return [
        GaussianSum([GaussianTerm(np.diag([1.0, 2.0]), np.array([0.3, -0.1]), 0.0)]),
        GaussianSum([GaussianTerm(np.array([[0.5, 0.2], [0.2, 0.8]]), np.array([0.0, 0.4j]), 0.0)]),
        GaussianSum([GaussianTerm(3.0 * np.eye(2), np.array([0.6, 0.6]), -0.1)]),
    ]


def delta_errors(mus, x=(0.3, -0.2), envelope: EnvelopeSpec | None = None) -> np.ndarray:
    """``|(h, g)/c - g(x)|`` per ``mu`` (rows) and probe (columns), ``c = int h``."""
    envelope = envelope or EnvelopeSpec("Product")
    scale = ScaleFunctionalSpec(1.0, 0.5)
    fam = I.PacketFamily((0.5,), 1.0, (0.0, 0.0))
    x = np.asarray(x, float)
    probes = delta_probes()
    out = []
    for mu in mus:
        Fp = fam.packet(mu)
        lam = scale_functional(Fp, scale, inner_product_closed(Fp, Fp).real)
        h = contract_envelope(Fp, envelope, lam, x)
        c = h.integral()
        out.append([abs(pairing(h, g) / c - g(x)) for g in probes])
    return np.array(out)


def criterion_6(rng) -> CriterionResult:
    mus = [0.8, 0.4, 0.2, 0.1]
    err = delta_errors(mus)
    ok = bool(np.all(np.diff(err, axis=0) < 0))
    ratio = float(np.max(err[-1] / err[0]))
    return CriterionResult(
        6,
        "envelope delta limit",
        ok,
        ratio,
        1.0,
        err.size,
        f"errors strictly decreasing in mu for 3 probes={ok}; last/first max={ratio:.3f}",
    )


# --------------------------------------------------------------------------
# 7. First-order interacting field
# --------------------------------------------------------------------------


def xi_setup():
    """Field bump ``f`` later than source bump ``s``; probe ``g``; single node-aligned center."""
    ctx = FieldContext(bump_quadrature())
    ctx.register("f", node_bump([1.5, 0.0], [0.5, 0.5]))
    ctx.register("s", node_bump([-1.0, 0.1], [0.6, 0.6]))
    ctx.register("g", node_bump([-0.5, 1.5], [0.5, 0.5]))
    past = snap([-1.0, 0.1])
    future_center = snap([1.5, 0.0])
    return ctx, past, future_center


def criterion_7(rng) -> CriterionResult:
    ctx, past_x, future_x = xi_setup()
    env = EnvelopeSpec("Product")
    scale = ScaleFunctionalSpec(2.0, 0.0)
    g = float(rng.uniform(0.1, 0.5))
    spec = I.InteractionSpec([(g, 0.0, 1)], env, scale, centers=[past_x])
    seps = I.classify_centers(ctx, "f", spec, "s")
    xi = I.xi_first_order(ctx, "f", spec, "s")
    L = I.assemble_L(ctx, "s", spec)
    ref = W.field_op(ctx, "f") - 1j * W.commutator(W.field_op(ctx, "f"), L)
    past_err = W.poly_distance(xi, ref) / ref.max_abs
    r1 = I.retarded_form_check(ctx, "f", ["g", "s"], spec, "s")
    spec3 = I.InteractionSpec(
        [(g, 0.0, 1), (0.5 * g, 0.0, 2), (0.25 * g, 1.0, 3)], env, scale, centers=[past_x], normalize=True
    )
    r3 = I.retarded_form_check(ctx, "f", ["g", "s"], spec3, "s")
    fspec = I.InteractionSpec([(g, 0.0, 1), (0.5 * g, 0.0, 2)], env, scale, centers=[future_x])
    fseps = I.classify_centers(ctx, "s", fspec, "f")
    xi_f = I.xi_first_order(ctx, "s", fspec, "f")
    phi_s = W.field_op(ctx, "s")
    fut_err = W.poly_distance(xi_f, phi_s) / phi_s.max_abs
    geometry = all(s is I.Separation.PAST for s in seps) and all(s is I.Separation.FUTURE for s in fseps)
    resid = max(r1, r3)
    ok = geometry and past_err <= 1e-12 and resid <= 1e-10 and fut_err <= 1e-12
    return CriterionResult(
        7,
        "first-order xi consistency",
        ok,
        resid,
        1e-10,
        4,
        f"past reduction={past_err:.2e} (<=1e-12); retarded residual q=1:{r1:.2e} q<=3:{r3:.2e} (<=1e-10); "
        f"future cancellation={fut_err:.2e} (<=1e-12); geometry forced={geometry}",
    )


# --------------------------------------------------------------------------
# 8. Regularisation trend
# --------------------------------------------------------------------------


def regularization_spec() -> I.InteractionSpec:
    return I.InteractionSpec(
        [(1.0, 0.0, 1)], EnvelopeSpec("Product"), ScaleFunctionalSpec(1.0, 0.5), centers=[[0.2, 0.1]], normalize=True
    )


def unregularized_loop(spacing: float = 0.01, q: int = 1) -> float:
    """Loop kernel of the narrowest normalised bump on a lattice of ``spacing``.

    The shell quadrature stops at the first Brillouin zone ``pi / spacing``.
    """
    c = np.zeros(2)
    b = smooth_bump(Grid.covering(c - 4 * spacing, c + 4 * spacing, spacing), c, 2.5 * spacing)
    b = b.scale(1.0 / b.integral())
    quad = MassShellQuadrature.gauss_legendre(1.0, 1, math.pi / spacing, nodes=2048)
    ctx = FieldContext(quad)
    ctx.register("b", b)
    return ctx.norm("b") ** (2 * q)


def criterion_8(rng) -> CriterionResult:
    mus = list(np.geomspace(0.8, 0.1, 8))
    rows = I.mu_sweep(I.PacketFamily((0.5,), 1.0, (0.0, 0.0)), mus, regularization_spec(), packet_quadrature_1p1())
    vals = np.array([r[1] for r in rows])
    finite = bool(np.all(np.isfinite(vals)))
    increasing = bool(np.all(np.diff(vals) > 0))
    widest = vals[int(np.argmax([r[2] for r in rows]))]
    raw = unregularized_loop()
    ratio = raw / widest
    ok = finite and increasing and ratio >= 10
    return CriterionResult(
        8,
        "regularization trend",
        ok,
        ratio,
        10.0,
        len(mus),
        f"strictly increasing as mu decreases={increasing}; finite={finite}; "
        f"unregularized/widest={ratio:.2f} (>=10)",
    )


# --------------------------------------------------------------------------
# 9. Vacuum linearity
# --------------------------------------------------------------------------


def _random_poly(rng, ctx, ids, xis) -> W.OperatorPoly:
    pool = ids + [i + "*" for i in ids]
    P = W.OperatorPoly.zero(ctx)
    for _ in range(int(rng.integers(1, 4))):
        c = complex(rng.normal(), rng.normal())
        P = P + c * W.field_string(ctx, list(rng.choice(pool, int(rng.integers(0, 5)))))
    if xis:
        xi = xis[int(rng.integers(len(xis)))]
        lab = str(rng.choice(pool))
        P = P + complex(rng.normal(), rng.normal()) * W.mul(W.field_op(ctx, lab), xi)
    return P


def criterion_9(rng, pairs: int = 50) -> CriterionResult:
    ctx, past_x, future_x = xi_setup()
    env = EnvelopeSpec("Product")
    scale = ScaleFunctionalSpec(2.0, 0.0)
    xis = [
        I.xi_first_order(ctx, "f", I.InteractionSpec([(0.3, 0.0, 1)], env, scale, centers=[past_x]), "s"),
        I.xi_first_order(ctx, "f", I.InteractionSpec([(0.2, 0.0, 2)], env, scale, centers=[past_x], normalize=True), "s"),
        I.xi_first_order(ctx, "s", I.InteractionSpec([(0.3, 0.0, 1)], env, scale, centers=[future_x]), "f"),
    ]
    ids = ["f", "s", "g"]
    worst = 0.0
    for k in range(pairs):
        A = _random_poly(rng, ctx, ids, xis if k % 2 == 0 else [])
        B = _random_poly(rng, ctx, ids, xis)
        a, b = complex(rng.normal(), rng.normal()), complex(rng.normal(), rng.normal())
        lhs = W.vacuum_expectation(a * A + b * B)
        rhs = a * W.vacuum_expectation(A) + b * W.vacuum_expectation(B)
        s = abs(a * W.vacuum_expectation(A)) + abs(b * W.vacuum_expectation(B))
        if s > 0:
            worst = max(worst, abs(lhs - rhs) / s)
        elif lhs != 0:
            worst = math.inf
    return CriterionResult(
        9,
        "vacuum linearity",
        worst <= 1e-12,
        worst,
        1e-12,
        pairs,
        f"max rel |<aA+bB> - a<A> - b<B>|={worst:.2e} (<=1e-12)",
    )


CRITERIA: dict[int, Callable] = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
}


def run_all(seed: int, only=None, echo: Callable | None = None) -> list:
    """Run criteria 1-9, each with its own generator derived from ``seed``."""
    results = []
    for n, fn in CRITERIA.items():
        if only is not None and n not in only:
            continue
        rng = np.random.default_rng([seed, n])
        t0 = time.perf_counter()
        try:
            res = fn(rng)
        except Exception as exc:  # a crash is reported as a failure, not hidden
            res = CriterionResult(n, fn.__name__, False, math.nan, math.nan, 0, f"error: {type(exc).__name__}: {exc}")
        res.seconds = time.perf_counter() - t0
        results.append(res)
        if echo:
            echo(res.line())
    return results


ACCEPTANCE_COLUMNS = ("criterion", "name", "passed", "metric", "threshold", "cases", "detail")


def results_table(results, config_hash: str = "") -> ResultTable:
    return ResultTable(
        "acceptance",
        ACCEPTANCE_COLUMNS,
        [(r.number, r.name, r.passed, float(r.metric), float(r.threshold), r.cases, r.detail) for r in results],
        config_hash=config_hash,
    )
