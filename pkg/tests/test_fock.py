"""Truncated Fock space: GNS quotient, ladder matrices and agreement with the Wick algebra."""

import functools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smearfield import fock as Fk
from smearfield import wick as W
from smearfield.errors import ProjectionError, SmearfieldError
from smearfield.freefield import FieldContext, MassShellQuadrature
from smearfield.testfn import GaussianPacket

M = 1.0


@functools.lru_cache(maxsize=None)
def ctx3():
    q = MassShellQuadrature.gauss_legendre(M, 1, 10.0, nodes=256)
    ctx = FieldContext(q, method="closed")
    ctx.register("a", GaussianPacket.from_momentum([0.3], 0.7, M, center=[0.0, 0.2]))
    ctx.register("b", GaussianPacket.from_momentum([-0.5], 0.9, M, center=[0.4, -0.3], amp=0.8 + 0.3j))
    ctx.register("c", GaussianPacket.from_momentum([0.1], 0.6, M, center=[-0.2, 0.5], amp=1j))
    return ctx


@functools.lru_cache(maxsize=None)
def full_spec(N=4):
    return Fk.build_spec(ctx3(), ["a", "b", "c"], N=N, include_conjugates=True)


@st.composite
def polys(draw, max_degree=4):
    ctx = ctx3()
    modes = [(i, c) for i in "abc" for c in (False, True)]
    out = W.OperatorPoly.zero(ctx)
    for _ in range(draw(st.integers(1, 4))):
        deg = draw(st.integers(0, max_degree))
        ncre = draw(st.integers(0, deg))
        cre = [draw(st.sampled_from(modes)) for _ in range(ncre)]
        ann = [draw(st.sampled_from(modes)) for _ in range(deg - ncre)]
        out = out + W.OperatorPoly.monomial(ctx, cre, ann, complex(draw(st.floats(-2, 2)), draw(st.floats(-2, 2))))
    return out


# ======================================================================
#  Spaces
# ======================================================================


class TestBuildSpec:
    def test_single_packet_n1(self):
        spec = Fk.build_spec(ctx3(), ["a"], N=1)
        assert spec.dim == 2

    def test_duplicate_is_null_mode(self, quad_packets):
        ctx = FieldContext(quad_packets, method="closed")
        F = GaussianPacket.from_momentum([0.3], 0.7, M)
        ctx.register("f", F)
        ctx.register("g", F)
        one = Fk.build_spec(ctx, ["f"], N=3)
        two = Fk.build_spec(ctx, ["f", "g"], N=3)
        assert two.discarded == 1
        assert two.dim == one.dim

    @pytest.mark.parametrize("n_modes, N", [(3, 2), (1, 5), (4, 3), (6, 4)])
    def test_dimension_counts_multisets(self, n_modes, N):
        # stars and bars: C(n + k - 1, k) states with k particles
        want = sum(math.comb(n_modes + k - 1, k) for k in range(N + 1))
        assert Fk.fock_dimension(n_modes, N) == want
        assert len(Fk.occupation_states(n_modes, N)) == want

    def test_three_packets_n2(self):
        assert Fk.build_spec(ctx3(), ["a", "b", "c"], N=2).dim == 10

    def test_state_order(self):
        states = Fk.occupation_states(2, 2)
        assert states == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]

    def test_gram_reconstruction(self):
        spec = full_spec()
        err = np.abs(spec.reconstructed_gram() - spec.gram).max()
        assert err <= 1e-8 * np.trace(spec.gram).real

    def test_orthonormal_modes(self):
        spec = full_spec()
        C = spec.coeffs
        np.testing.assert_allclose(C.conj().T @ spec.gram @ C, np.eye(spec.n_modes), atol=1e-10)

    def test_empty_basis(self):
        with pytest.raises(SmearfieldError):
            Fk.build_spec(ctx3(), [], N=2)

    def test_negative_n(self):
        with pytest.raises(ValueError):
            Fk.build_spec(ctx3(), ["a"], N=-1)


# ======================================================================
#  Field matrices
# ======================================================================


class TestFieldMatrix:
    @pytest.mark.parametrize("f, g", [("a", "b"), ("b", "c"), ("c", "c")])
    def test_two_point(self, f, g):
        spec = full_spec()
        A = Fk.field_matrix(f, spec).dagger() @ Fk.field_matrix(g, spec)
        assert A.vacuum_element() == pytest.approx(ctx3().inner((f, False), (g, False)), abs=1e-10)

    @pytest.mark.parametrize("f, g", [("a", "b"), ("a", "c*")])
    def test_commutator_below_truncation(self, f, g):
        spec = full_spec()
        A, B = Fk.field_matrix(f, spec), Fk.field_matrix(g, spec)
        C = (A @ B - B @ A).data
        low = [i for i, s in enumerate(spec.states) if sum(s) <= spec.max_particles - 1]
        fl, gl = W.FieldLabel.parse(f), W.FieldLabel.parse(g)
        ctx = ctx3()
        c = ctx.inner(fl.annihilation_mode, gl.creation_mode) - ctx.inner(gl.annihilation_mode, fl.creation_mode)
        np.testing.assert_allclose(C[np.ix_(low, low)], c * np.eye(len(low)), atol=1e-10)

    def test_outside_span(self, quad_packets):
        ctx = FieldContext(quad_packets, method="closed")
        ctx.register("f", GaussianPacket.from_momentum([-4.0], 0.2, M))
        ctx.register("g", GaussianPacket.from_momentum([4.0], 0.2, M))
        spec = Fk.build_spec(ctx, ["f"], N=2)
        with pytest.raises(ProjectionError):
            Fk.field_matrix("g", spec)

    def test_conjugate_needs_conjugate_span(self):
        spec = Fk.build_spec(ctx3(), ["b"], N=2)
        with pytest.raises(ProjectionError):
            Fk.field_matrix("b", spec)

    def test_string_vev_matches_recursion(self):
        spec = full_spec()
        labs = ["a", "b*", "c", "a*"]
        assert Fk.string_vev(spec, labs) == pytest.approx(W.vev_recursive(ctx3(), labs), abs=1e-10)


# ======================================================================
#  Polynomials
# ======================================================================


class TestPolyMatrix:
    def test_identity(self):
        spec = full_spec(2)
        np.testing.assert_array_equal(Fk.poly_matrix(W.identity(ctx3()), spec).data, np.eye(spec.dim))

    @settings(max_examples=30, deadline=None)
    @given(polys())
    def test_vacuum_matches_wick(self, P):
        spec = full_spec()
        got = Fk.poly_matrix(P, spec).vacuum_element()
        want = W.vacuum_expectation(P)
        assert abs(got - want) <= 1e-10 * max(1.0, P.max_abs)

    @settings(max_examples=20, deadline=None)
    @given(polys(max_degree=2), polys(max_degree=2))
    def test_product_vacuum_matches_wick(self, P, Q):
        # the reordered Wick product against a product of truncated matrices
        spec = full_spec()
        got = (Fk.poly_matrix(P, spec) @ Fk.poly_matrix(Q, spec)).vacuum_element()
        want = W.vacuum_expectation(W.mul(P, Q))
        assert abs(got - want) <= 1e-10 * max(1.0, P.max_abs * Q.max_abs)

    @settings(max_examples=20, deadline=None)
    @given(polys(max_degree=3))
    def test_hermitian(self, P):
        spec = full_spec(3)
        H = Fk.poly_matrix(P + P.adjoint(), spec).data
        assert np.abs(H - H.conj().T).max() <= 1e-12 * max(1.0, np.abs(H).max())

    def test_truncation_monotone(self):
        ctx = ctx3()
        P = W.field_string(ctx, ["a", "b*"])
        s3, s4 = full_spec(3), full_spec(4)
        A3, A4 = Fk.poly_matrix(P, s3), Fk.poly_matrix(P, s4)
        small = [s for s in s3.states if sum(s) <= 3 - 2]
        for so in small:
            for si in small:
                assert A3.element(so, si) == pytest.approx(A4.element(so, si), abs=1e-12)

    def test_context_mismatch(self, quad_packets):
        other = FieldContext(quad_packets)
        other.register("a", GaussianPacket.from_momentum([0.3], 0.7, M))
        with pytest.raises(SmearfieldError):
            Fk.poly_matrix(W.identity(other), full_spec(2))


# ======================================================================
#  Expectations and serialisation
# ======================================================================


class TestExpectation:
    def test_identity(self):
        spec = full_spec(2)
        assert Fk.expectation(Fk.identity_matrix(spec), spec.vacuum()) == 1

    def test_number_on_vacuum(self):
        spec = full_spec(2)
        assert Fk.expectation(Fk.number_operator(spec), spec.vacuum()) == 0

    def test_mode_number_on_eigenstate(self):
        spec = full_spec(2)
        lad = Fk.mode_creator(spec, 0)
        state = lad @ spec.vacuum()
        M1 = Fk.FockMatrix(lad @ lad.conj().T, spec)
        assert Fk.expectation(M1, state) == pytest.approx(1.0, abs=1e-12)

    def test_one_particle_number(self):
        spec = full_spec(2)
        psi = Fk.one_particle_state(spec, ("b", False))
        assert Fk.expectation(Fk.number_operator(spec), psi) == pytest.approx(1.0, abs=1e-12)

    def test_unnormalised_rejected(self):
        spec = full_spec(2)
        with pytest.raises(ValueError):
            Fk.expectation(Fk.identity_matrix(spec), 2 * spec.vacuum())

    def test_wrong_dimension(self):
        spec = full_spec(2)
        with pytest.raises(ValueError):
            Fk.expectation(Fk.identity_matrix(spec), np.array([1.0]))


class TestSerialisation:
    def test_binary_round_trip(self, tmp_path):
        spec = full_spec(2)
        A = Fk.field_matrix("a", spec)
        path = A.write_binary(tmp_path / "a.bin")
        assert path.stat().st_size == spec.dim**2 * 16
        np.testing.assert_array_equal(Fk.FockMatrix.read_binary(path), A.data)

    def test_binary_layout(self, tmp_path):
        spec = Fk.build_spec(ctx3(), ["a"], N=1)
        A = Fk.FockMatrix(np.array([[1 + 2j, 3 - 4j], [5j, -6.0]]), spec)
        raw = np.frombuffer(A.write_binary(tmp_path / "m.bin").read_bytes(), dtype="<f8")
        np.testing.assert_array_equal(raw, [1, 2, 3, -4, 0, 5, -6, 0])

    def test_spec_json(self):
        d = full_spec(2).to_json()
        assert d["max_particles"] == 2
        assert len(d["states"]) == full_spec(2).dim
