"""Interaction operator, first-order interacting field and regularisation probes.

Hand contractions used as oracles
---------------------------------
* For a real envelope ``h`` and the normalised one-particle state of ``h``,
  ``:phi_h phi_h^dagger: = a+a+ + 2 a+(h) a(h) + a a`` gives ``2 (h, h)``.
* For real envelopes the connected two-point function of
  ``Phi = sum_a w_a phi_a phi_a^dagger`` is ``2 sum_ab w_a w_b (h_a, h_b)^2``.
"""

import functools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smearfield import fock as Fk
from smearfield import interacting as I
from smearfield import wick as W
from smearfield.errors import DegenerateError, GeometryError
from smearfield.freefield import FieldContext, MassShellQuadrature
from smearfield.testfn import Box, EnvelopeSpec, GaussianPacket, ScaleFunctionalSpec

from conftest import node_bump

M = 1.0
PRODUCT = EnvelopeSpec("Product")
FLAT = ScaleFunctionalSpec(2.0, 0.0)


def packet_ctx():
    q = MassShellQuadrature.gauss_legendre(M, 1, 10.0, nodes=256)
    ctx = FieldContext(q, method="closed")
    ctx.register("F", GaussianPacket.from_momentum([0.4], 0.6, M, center=[0.0, 0.1]))
    return ctx


@functools.lru_cache(maxsize=None)
def bump_quad():
    return MassShellQuadrature.gauss_legendre(M, 1, 40.0, nodes=1280)


def bump_ctx():
    """``f`` late, ``s`` early, probe ``g``, and ``r`` spacelike to ``f``."""
    ctx = FieldContext(bump_quad())
    ctx.register("f", node_bump([1.5, 0.0], [0.5, 0.5]))
    ctx.register("s", node_bump([-1.0, 0.1], [0.6, 0.6]))
    ctx.register("g", node_bump([-0.5, 1.5], [0.5, 0.5]))
    ctx.register("r", node_bump([1.5, 2.5], [0.5, 0.5]))
    return ctx


PAST_X = [-1.0, 0.1]
FUTURE_X = [1.5, 0.0]


# ======================================================================
#  Specs and geometry
# ======================================================================


class TestSpec:
    @pytest.mark.parametrize("q", [0, 4, 1.5])
    def test_power_guard(self, q):
        with pytest.raises(ValueError):
            I.InteractionTerm(0.1, 0.0, q)

    def test_needs_terms(self):
        with pytest.raises(ValueError):
            I.InteractionSpec(())

    def test_negative_weight(self):
        with pytest.raises(ValueError):
            I.InteractionSpec([(0.1, 0.0, 1)], centers=[[0.0, 0.0]], weights=[-1.0])

    def test_weight_length(self):
        with pytest.raises(ValueError):
            I.InteractionSpec([(0.1, 0.0, 1)], centers=[[0.0, 0.0]], weights=[1.0, 2.0])

    def test_with_couplings(self):
        spec = I.InteractionSpec([(0.1, 0.0, 1), (-0.2, 1.0, 2)])
        assert [t.g for t in spec.with_couplings(3.0).terms] == pytest.approx([0.3, -0.6])

    def test_to_json(self):
        d = I.InteractionSpec([(0.1, 0.5, 2)], centers=[[0.0, 1.0]]).to_json()
        assert d["terms"] == [[0.1, 0.5, 2]]
        assert d["weights"] == [1.0]


class TestCenterGrid:
    def test_weights_sum_to_box_volume(self):
        F = GaussianPacket.from_momentum([0.3], 0.5, M)
        box = F.effective_support(1e-3)
        centers, weights = I.center_grid(F, 4)
        assert len(centers) == 16
        assert weights.sum() == pytest.approx(np.prod(box.hi - np.asarray(box.lo)), rel=1e-12)

    def test_single_node_is_box_center(self):
        b = node_bump([0.3, -0.2], [0.4, 0.4])
        centers, _ = I.center_grid(b, 1)
        np.testing.assert_allclose(centers[0], b.effective_support(1e-3).center, atol=1e-12)


class TestPastCone:
    @pytest.mark.parametrize(
        "a, b, want",
        [
            (Box((-3.0, -0.5), (-2.0, 0.5)), Box((0.0, -0.5), (1.0, 0.5)), I.Separation.PAST),
            (Box((0.0, -0.5), (1.0, 0.5)), Box((-3.0, -0.5), (-2.0, 0.5)), I.Separation.FUTURE),
            (Box((0.0, 2.0), (1.0, 3.0)), Box((0.0, -0.5), (1.0, 0.5)), I.Separation.SPACELIKE),
            (Box((0.0, 0.0), (1.0, 1.0)), Box((0.5, 0.5), (1.5, 1.5)), I.Separation.OVERLAPPING),
            # time-ordered but inside neither cone entirely
            (Box((-1.5, -0.5), (-1.0, 0.5)), Box((0.0, 0.0), (1.0, 1.0)), I.Separation.OVERLAPPING),
        ],
    )
    def test_classify(self, a, b, want):
        assert I.PastConeRelation.classify(a, b).separation is want

    def test_classification_consistent_with_metric(self, rng):
        # every corner pair of PAST boxes is strictly timelike with the right order
        for _ in range(200):
            lo_a = rng.uniform(-3, 3, 2)
            lo_b = rng.uniform(-3, 3, 2)
            a = Box(tuple(lo_a), tuple(lo_a + rng.uniform(0.1, 1, 2)))
            b = Box(tuple(lo_b), tuple(lo_b + rng.uniform(0.1, 1, 2)))
            sep = I.PastConeRelation.classify(a, b).separation
            ca = [(t, x) for t in (a.lo[0], a.hi[0]) for x in (a.lo[1], a.hi[1])]
            cb = [(t, x) for t in (b.lo[0], b.hi[0]) for x in (b.lo[1], b.hi[1])]
            if sep is I.Separation.PAST:
                assert all(tb - ta > abs(xb - xa) for ta, xa in ca for tb, xb in cb)
            elif sep is I.Separation.SPACELIKE:
                assert all(abs(tb - ta) < abs(xb - xa) for ta, xa in ca for tb, xb in cb)


# ======================================================================
#  The interaction operator
# ======================================================================


class TestAssembleL:
    def test_single_term_is_normal_bilinear(self):
        ctx = packet_ctx()
        spec = I.InteractionSpec([(0.3, 0.0, 1)], PRODUCT, FLAT, centers=[[0.1, 0.0]])
        L = I.assemble_L(ctx, "F", spec)
        (op,) = I.envelopes(ctx, "F", spec)
        want = W.normal_product(ctx, [op.id, op.id + "*"]) * 0.3
        assert W.poly_distance(L, want) == 0.0

    @pytest.mark.parametrize("terms", [[(0.3, 0.0, 1)], [(0.2, 1.0, 2), (-0.1, 0.5, 3)]])
    def test_vacuum_zero_and_self_adjoint(self, terms):
        ctx = packet_ctx()
        spec = I.InteractionSpec(terms, PRODUCT, FLAT, centers=[[0.1, 0.0], [-0.3, 0.2]], weights=[0.4, 0.6])
        L = I.assemble_L(ctx, "F", spec)
        assert W.vacuum_expectation(L) == 0
        assert L.allclose(L.adjoint(), rtol=1e-12)

    def test_one_particle_expectation(self):
        ctx = packet_ctx()
        g = 0.3
        spec = I.InteractionSpec([(g, 0.0, 1)], PRODUCT, FLAT, centers=[[0.1, 0.0]])
        L = I.assemble_L(ctx, "F", spec)
        (op,) = I.envelopes(ctx, "F", spec)
        spec_f = Fk.build_spec(ctx, [op.id], N=2)
        psi = Fk.one_particle_state(spec_f, (op.id, False))
        got = Fk.expectation(Fk.poly_matrix(L, spec_f), psi)
        assert got == pytest.approx(2 * g * op.s, rel=1e-10)

    def test_coefficients_carry_norm_power(self):
        ctx = packet_ctx()
        spec = I.InteractionSpec([(0.3, 2.0, 1)], PRODUCT, FLAT, centers=[[0.1, 0.0]], weights=[0.5])
        L = I.assemble_L(ctx, "F", spec)
        (op,) = I.envelopes(ctx, "F", spec)
        key = ((op.id, False),), ((op.id, False),)
        assert L.coeff(*key) == pytest.approx(0.5 * 0.3 * op.s**2 * 1.0, rel=1e-14)

    def test_cubic_power_is_normal_ordered_cube(self):
        ctx = packet_ctx()
        spec = I.InteractionSpec([(1.0, 0.0, 3)], PRODUCT, FLAT, centers=[[0.0, 0.0]])
        L = I.assemble_L(ctx, "F", spec)
        (op,) = I.envelopes(ctx, "F", spec)
        u = W.normal_product(ctx, [op.id, op.id + "*"])
        assert W.poly_distance(L, W.normal_mul(W.normal_mul(u, u), u)) == 0.0
        assert L.degree == 6

    def test_support_locality(self):
        ctx = bump_ctx()
        spec = I.InteractionSpec([(0.2, 0.0, 2)], PRODUCT, FLAT, centers=[[-1.0, 0.1], [-0.9, 0.3]])
        L = I.assemble_L(ctx, "s", spec)
        src = ctx.function(("s", False))
        for hid in {k[0] for k in L.labels()}:
            h = ctx.function((hid, False))
            assert h.grid == src.grid
            assert not np.any(h.samples[~src.support_mask])

    def test_degenerate(self):
        ctx = bump_ctx()
        spec = I.InteractionSpec([(0.2, 0.0, 1)], PRODUCT, FLAT, centers=[[9.0, 9.0]])
        with pytest.raises(DegenerateError):
            I.assemble_L(ctx, "s", spec)

    def test_ids_stable_across_contexts(self):
        spec = I.InteractionSpec([(0.3, 0.0, 1)], PRODUCT, FLAT, centers=[[0.1, 0.0]])
        a = [op.id for op in I.envelopes(packet_ctx(), "F", spec)]
        b = [op.id for op in I.envelopes(packet_ctx(), "F", spec)]
        assert a == b


class TestSmearedLocalOp:
    def test_single_node_is_bilinear(self):
        ctx = packet_ctx()
        Phi = I.smeared_local_op(ctx, "F", PRODUCT, [(1.0, 1.0)], [0.0, 0.0], 1.3)
        (hid,) = Phi.labels()
        assert W.poly_distance(Phi, I.bilinear(ctx, hid)) == 0.0
        h = ctx.function((hid, False))
        F = ctx.function(("F", False))
        ys = np.array([[0.1, 0.2], [-0.4, 0.3]])
        want = np.abs(F(ys)) ** 2 * np.abs(F(1.3 * ys)) ** 2
        np.testing.assert_allclose(h(ys).real, want, rtol=1e-12)

    def test_split_node(self):
        ctx = packet_ctx()
        one = I.smeared_local_op(ctx, "F", PRODUCT, [(1.0, 1.0)], [0.0, 0.0], 1.3)
        two = I.smeared_local_op(ctx, "F", PRODUCT, [(1.0, 0.5), (1.0, 0.5)], [0.0, 0.0], 1.3)
        assert two.allclose(one, rtol=1e-12)

    def test_connected_two_point(self):
        ctx = packet_ctx()
        nodes = [(0.6, 0.3), (1.0, 0.5), (1.7, 0.2)]
        x = np.array([0.1, -0.1])
        Phi = I.smeared_local_op(ctx, "F", PRODUCT, nodes, x, 1.0)
        hids = [I.register_envelope(ctx, "F", PRODUCT, s, x, f"h{i}", False) for i, (s, _) in enumerate(nodes)]
        w = [n[1] for n in nodes]
        got = W.vacuum_expectation(W.mul(Phi, Phi)) - W.vacuum_expectation(Phi) ** 2
        # independent route: explicit pairings of four fields per (alpha, beta)
        oracle = 0j
        for a, ha in enumerate(hids):
            for b, hb in enumerate(hids):
                four = W.vev_pairings(ctx, [ha, ha + "*", hb, hb + "*"])
                two = W.vev_pairings(ctx, [ha, ha + "*"]) * W.vev_pairings(ctx, [hb, hb + "*"])
                oracle += w[a] * w[b] * (four - two)
        closed = 2 * sum(
            w[a] * w[b] * ctx.inner((ha, False), (hb, False)) ** 2 for a, ha in enumerate(hids) for b, hb in enumerate(hids)
        )
        assert got == pytest.approx(oracle, rel=1e-12)
        assert got == pytest.approx(closed, rel=1e-12)

    def test_needs_nodes(self):
        with pytest.raises(ValueError):
            I.smeared_local_op(packet_ctx(), "F", PRODUCT, [], [0.0, 0.0], 1.0)

    def test_spec_switch_uses_measure(self):
        ctx = packet_ctx()
        spec = I.InteractionSpec(
            [(1.0, 0.0, 1)], PRODUCT, FLAT, centers=[[0.0, 0.0]], phi_alpha_nodes=[(1.0, 0.5), (1.0, 0.5)]
        )
        plain = I.InteractionSpec([(1.0, 0.0, 1)], PRODUCT, FLAT, centers=[[0.0, 0.0]])
        La, Lb = I.assemble_L(ctx, "F", spec), I.assemble_L(ctx, "F", plain)
        ((ha,),), ((hb,),) = [La.labels()], [Lb.labels()]
        assert ha.startswith("F@phi:") and hb.startswith("F@env0:")
        ys = np.array([[0.1, 0.2], [-0.4, 0.3]])
        np.testing.assert_array_equal(ctx.function((ha, False))(ys), ctx.function((hb, False))(ys))
        renamed = {tuple(tuple((hb, c) for _, c in side) for side in key): v for key, v in La}
        assert W.poly_distance(W.OperatorPoly(ctx, renamed), Lb) <= 1e-15


# ======================================================================
#  Time ordering and the first-order field
# ======================================================================


class TestTimeOrder:
    def test_later_left(self):
        ctx = packet_ctx()
        A, B = W.field_op(ctx, "F"), W.field_op(ctx, "F*")
        assert W.poly_distance(I.time_order_pair(A, 1.0, B, 0.0), W.mul(A, B)) == 0.0
        assert W.poly_distance(I.time_order_pair(A, 0.0, B, 1.0), W.mul(B, A)) == 0.0

    def test_tie_symmetrised(self):
        ctx = packet_ctx()
        A, B = W.field_op(ctx, "F"), W.field_op(ctx, "F*")
        want = 0.5 * (W.mul(A, B) + W.mul(B, A))
        assert W.poly_distance(I.time_order_pair(A, 0.5, B, 0.5 + 1e-14), want) == 0.0

    def test_spacelike_order_irrelevant(self):
        ctx = bump_ctx()
        A, B = W.field_op(ctx, "f"), W.normal_power(ctx, "r", 2)
        ab = I.time_order_pair(A, 1.0, B, 0.0)
        ba = I.time_order_pair(A, 0.0, B, 1.0)
        assert W.poly_distance(ab, ba) <= 1e-6 * ab.max_abs


class TestXi:
    def test_zero_coupling(self):
        ctx = bump_ctx()
        spec = I.InteractionSpec([(0.0, 0.0, 1)], PRODUCT, FLAT, centers=[PAST_X])
        xi = I.xi_first_order(ctx, "f", spec, "s")
        assert W.poly_distance(xi, W.field_op(ctx, "f")) == 0.0

    @pytest.mark.parametrize("terms", [[(0.3, 0.0, 1)], [(0.3, 0.0, 1), (0.1, 0.0, 2)]])
    def test_past_reduction(self, terms):
        ctx = bump_ctx()
        spec = I.InteractionSpec(terms, PRODUCT, FLAT, centers=[PAST_X])
        assert set(I.classify_centers(ctx, "f", spec, "s")) == {I.Separation.PAST}
        xi = I.xi_first_order(ctx, "f", spec, "s")
        phi = W.field_op(ctx, "f")
        ref = phi - 1j * W.commutator(phi, I.assemble_L(ctx, "s", spec))
        assert W.poly_distance(xi, ref) <= 1e-12 * ref.max_abs

    def test_future_cancellation(self):
        ctx = bump_ctx()
        spec = I.InteractionSpec([(0.3, 0.0, 1), (0.1, 0.0, 2)], PRODUCT, FLAT, centers=[FUTURE_X])
        assert set(I.classify_centers(ctx, "s", spec, "f")) == {I.Separation.FUTURE}
        xi = I.xi_first_order(ctx, "s", spec, "f")
        assert W.poly_distance(xi, W.field_op(ctx, "s")) <= 1e-12

    def test_large_coupling_warns(self):
        ctx = packet_ctx()
        spec = I.InteractionSpec([(2.0, 0.0, 1)], PRODUCT, FLAT, centers=[[0.0, 0.0]])
        with pytest.warns(RuntimeWarning):
            I.xi_first_order(ctx, "F", spec)

    def test_small_coupling_silent(self):
        ctx = packet_ctx()
        spec = I.InteractionSpec([(0.5, 0.0, 1)], PRODUCT, FLAT, centers=[[0.0, 0.0]])
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            I.xi_first_order(ctx, "F", spec)

    @settings(max_examples=25, deadline=None)
    @given(
        st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
        st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
        st.floats(-0.5, 0.5),
    )
    def test_vacuum_linear_over_xi(self, a, b, x0):
        ctx = packet_ctx()
        spec = I.InteractionSpec([(0.2, 0.0, 1), (0.05, 0.0, 2)], PRODUCT, FLAT, centers=[[x0, 0.0]])
        xi = I.xi_first_order(ctx, "F", spec)
        A = W.mul(xi.adjoint(), xi)
        B = W.mul(xi, xi)
        lhs = W.vacuum_expectation(A * a + B * b)
        rhs = a * W.vacuum_expectation(A) + b * W.vacuum_expectation(B)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)


class TestRetardedForm:
    def test_q1(self):
        ctx = bump_ctx()
        spec = I.InteractionSpec([(0.3, 0.0, 1)], PRODUCT, FLAT, centers=[PAST_X])
        assert I.retarded_form_check(ctx, "f", ["g", "s"], spec, "s") <= 1e-10

    def test_mixed_powers_normalised(self):
        ctx = bump_ctx()
        spec = I.InteractionSpec(
            [(0.3, 0.0, 1), (0.15, 0.0, 2), (0.075, 1.0, 3)], PRODUCT, FLAT, centers=[PAST_X], normalize=True
        )
        assert I.retarded_form_check(ctx, "f", ["g"], spec, "s") <= 1e-10

    def test_zero_coupling(self):
        ctx = bump_ctx()
        spec = I.InteractionSpec([(0.0, 0.0, 1)], PRODUCT, FLAT, centers=[PAST_X])
        assert I.retarded_form_check(ctx, "f", ["g"], spec, "s") == 0.0

    def test_spacelike_correction_small(self):
        ctx = bump_ctx()
        spec = I.InteractionSpec([(0.3, 0.0, 1)], PRODUCT, FLAT, centers=[[1.5, 2.5]])
        assert set(I.classify_centers(ctx, "f", spec, "r")) == {I.Separation.SPACELIKE}
        delta = I.xi_first_order(ctx, "f", spec, "r") - W.field_op(ctx, "f")
        L = I.assemble_L(ctx, "r", spec)
        assert delta.max_abs <= 1e-6 * L.max_abs

    def test_rejects_non_past(self):
        ctx = bump_ctx()
        spec = I.InteractionSpec([(0.3, 0.0, 1)], PRODUCT, FLAT, centers=[[1.5, 2.5]])
        with pytest.raises(GeometryError):
            I.retarded_form_check(ctx, "f", ["g"], spec, "r")

    def test_rejects_packets(self):
        ctx = packet_ctx()
        spec = I.InteractionSpec([(0.3, 0.0, 1)], PRODUCT, FLAT, centers=[[0.0, 0.0]])
        with pytest.raises(GeometryError):
            I.retarded_form_check(ctx, "F", ["F"], spec)


# ======================================================================
#  Regularisation probes
# ======================================================================


class TestLoopScalar:
    @pytest.mark.parametrize("q", [1, 2, 3])
    def test_single_center(self, q):
        ctx = packet_ctx()
        spec = I.InteractionSpec([(1.0, 0.0, q)], PRODUCT, FLAT, centers=[[0.0, 0.0]], weights=[0.7])
        (op,) = I.envelopes(ctx, "F", I.InteractionSpec(spec.terms, PRODUCT, FLAT, spec.centers, spec.weights, (), True))
        assert I.loop_scalar(ctx, "F", spec) == pytest.approx(0.49 * op.s ** (2 * q), rel=1e-14)

    def test_real_nonnegative(self):
        ctx = packet_ctx()
        centers, weights = I.center_grid(ctx.function(("F", False)), 2)
        spec = I.InteractionSpec([(1.0, 0.0, 1)], PRODUCT, FLAT, centers=centers, weights=weights)
        v = I.loop_scalar(ctx, "F", spec)
        assert isinstance(v, float) and v >= 0

    def test_increases_as_mu_halves(self):
        # lambda = (F, F)^(1/2) outgrows 1/mu, so the envelopes sharpen
        fam = I.PacketFamily((0.5,), M, (0.0, 0.0))
        spec = I.InteractionSpec([(1.0, 0.0, 1)], PRODUCT, ScaleFunctionalSpec(1.0, 0.5), centers=[[0.2, 0.1]])
        q = MassShellQuadrature.gauss_legendre(M, 1, 10.0, nodes=512)
        vals = []
        for mu in (0.8, 0.4, 0.2, 0.1):
            ctx = FieldContext(q, method="closed")
            ctx.register("F", fam.packet(mu))
            vals.append(I.loop_scalar(ctx, "F", spec))
        assert np.all(np.diff(vals) > 0)


@pytest.fixture(scope="module")
def quad():
    return MassShellQuadrature.gauss_legendre(M, 1, 10.0, nodes=512)


class TestMuSweep:
    def test_free_limit_zero(self, quad):
        spec = I.InteractionSpec([(0.0, 0.0, 1)], PRODUCT, FLAT)
        rows = I.mu_sweep(I.PacketFamily((0.5,), M), [0.8, 0.4], spec, quad, "first_order_2pt")
        assert [r[1] for r in rows] == [0.0, 0.0]

    def test_loop_monotone_and_width_scaling(self, quad):
        # a constant scale functional does not sharpen the envelope, which widens
        # like 1/mu, so the normalised loop kernel falls monotonically
        spec = I.InteractionSpec([(1.0, 0.0, 1)], PRODUCT, ScaleFunctionalSpec(1.0, 0.0), centers=[[0.0, 0.0]])
        mus = [0.8, 0.4, 0.2]
        rows = I.mu_sweep(I.PacketFamily((0.5,), M), mus, spec, quad)
        assert np.all(np.diff([r[1] for r in rows]) < 0)
        prod = [r[0] * r[2] for r in rows]
        np.testing.assert_allclose(prod, prod[0], rtol=1e-8)

    def test_deterministic(self, quad):
        spec = I.InteractionSpec([(0.2, 0.0, 1)], PRODUCT, FLAT)
        fam = I.PacketFamily((0.3,), M, (0.0, 0.0))
        a = I.mu_sweep(fam, [0.7, 0.5], spec, quad, "first_order_2pt")
        b = I.mu_sweep(fam, [0.7, 0.5], spec, quad, "first_order_2pt")
        assert a == b

    @pytest.mark.parametrize("mus", [[0.5, -0.1], [0.3, 0.8, 0.5]])
    def test_rejects_bad_grid(self, mus, quad):
        with pytest.raises(ValueError):
            I.mu_sweep(I.PacketFamily((0.5,), M), mus, I.InteractionSpec([(0.1, 0.0, 1)]), quad)

    def test_rejects_unknown_observable(self, quad):
        with pytest.raises(ValueError):
            I.mu_sweep(I.PacketFamily((0.5,), M), [0.5], I.InteractionSpec([(0.1, 0.0, 1)]), quad, "mass_gap")

    def test_columns(self):
        assert I.SWEEP_COLUMNS == ("mu", "observable", "width", "norm")


def test_first_order_2pt_matches_definition():
    ctx = packet_ctx()
    spec = I.InteractionSpec([(0.2, 0.0, 1)], PRODUCT, FLAT, centers=[[0.3, 0.0]])
    xi = I.xi_first_order(ctx, "F", spec)
    full = W.vacuum_expectation(W.mul(xi.adjoint(), xi)).real
    free = ctx.norm("F")
    # <xi^dagger xi> - <phi^dagger phi> to first order; the second-order piece is O(g^2)
    second = W.vacuum_expectation(W.mul((xi - W.field_op(ctx, "F")).adjoint(), xi - W.field_op(ctx, "F"))).real
    assert I.first_order_2pt(ctx, "F", spec) == pytest.approx(full - free - second, rel=1e-10, abs=1e-14)
    assert math.isfinite(I.first_order_2pt(ctx, "F", spec))
