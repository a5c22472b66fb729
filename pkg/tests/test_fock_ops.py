#!/usr/bin/env python3
"""
Tests for Fock-space operators, states and Kraus operators
"""

import numpy as np
import pytest

from oamsim.exceptions import NonHermitianError, ParameterError
from oamsim.fock_ops import (OUTCOMES, DensityMatrix, DiagonalFunction, FactoredOperator,
                             Outcome, alpha_table, apply_to_density, build_kraus,
                             compose_factored, cs_table, dense_kraus, eval_alpha, eval_CS,
                             polar_parts, trace_norm, verify_stochasticity)
from oamsim.params import DimensionlessParams


def _random_operator(rng, d, shift):
    amp = rng.normal(size=d + 1) + 1j * rng.normal(size=d + 1)
    return FactoredOperator(shift, amp)


class TestOutcome:
    """Test outcome labels"""

    def test_order_and_shifts(self):
        assert [y.value for y in OUTCOMES] == ["--", "-+", "+-", "++"]
        assert [y.shift for y in OUTCOMES] == [0, -1, 1, 0]
        assert Outcome.PM.index == 2

    def test_parse(self):
        assert Outcome.parse(" -+ ") is Outcome.MP
        with pytest.raises(ParameterError):
            Outcome.parse("+")


class TestFactoredOperator:
    """Test (shift, amplitude) operators"""

    def test_out_of_range_amplitudes_zeroed(self):
        """Levels mapped outside 0..d carry no amplitude"""
        up = FactoredOperator(1, np.ones(4))
        assert up.amp[3] == 0
        down = FactoredOperator(-1, np.ones(4))
        assert down.amp[0] == 0

    def test_compose_matches_dense_product(self):
        rng = np.random.default_rng(5)
        d = 7
        for s1 in (-1, 0, 1):
            for s2 in (-1, 0, 1):
                W, V = _random_operator(rng, d, s1), _random_operator(rng, d, s2)
                composed = compose_factored(W, V)
                assert composed.shift == s1 + s2
                np.testing.assert_allclose(composed.to_dense(), V.to_dense() @ W.to_dense(),
                                           atol=1e-12)

    def test_rescaling_keeps_value(self):
        """Tiny products are rescaled by powers of two without changing the operator"""
        d = 3
        small = FactoredOperator(0, np.full(d + 1, 2.0 ** -300, dtype=complex))
        product = compose_factored(small, small)
        assert product.log_scale != 0
        assert np.max(np.abs(product.amp)) >= 2.0 ** -512
        expected = np.ldexp(1.0, -600)
        np.testing.assert_allclose(np.diag(product.to_dense()).real, expected, rtol=1e-12)

    def test_composition_is_scale_free(self):
        """Scales add under composition and leave the amplitudes untouched"""
        rng = np.random.default_rng(8)
        W, V = _random_operator(rng, 6, 1), _random_operator(rng, 6, -1)
        plain = compose_factored(W, V)
        scaled = compose_factored(FactoredOperator(W.shift, W.amp, log_scale=-400),
                                  FactoredOperator(V.shift, V.amp, log_scale=100))
        assert scaled.log_scale == plain.log_scale - 300
        np.testing.assert_array_equal(scaled.amp, plain.amp)

    def test_truncation_mismatch(self):
        with pytest.raises(ParameterError):
            compose_factored(FactoredOperator.identity(3), FactoredOperator.identity(4))

    def test_polar_parts(self):
        rng = np.random.default_rng(11)
        W = _random_operator(rng, 6, 1)
        modulus, U = polar_parts(W)
        rebuilt = U.to_dense() @ np.diag(modulus.values)
        np.testing.assert_allclose(rebuilt, W.to_dense(), atol=1e-12)
        nonzero = np.abs(U.amp) > 0
        np.testing.assert_allclose(np.abs(U.amp[nonzero]), 1.0)

    def test_polar_parts_leave_scale_out(self):
        """A rescaled W has the same modulus; the factor 2**log_scale is applied by the caller"""
        rng = np.random.default_rng(12)
        W = _random_operator(rng, 5, -1)
        scaled = FactoredOperator(W.shift, W.amp.copy(), log_scale=-700)
        modulus, U = polar_parts(scaled)
        np.testing.assert_allclose(modulus.values, np.abs(W.amp))
        assert U.log_scale == 0
        rebuilt = U.to_dense() @ np.diag(modulus.values)
        np.testing.assert_allclose(rebuilt, scaled.to_dense(include_scale=False), atol=1e-12)

    def test_diagonal_phase(self):
        op = DiagonalFunction.phase(0.3, 4).as_operator()
        np.testing.assert_allclose(np.diag(op.to_dense()), np.exp(-0.3j * np.arange(5)))


class TestDensityMatrix:
    """Test DensityMatrix constructors and invariants"""

    def test_fock(self):
        rho = DensityMatrix.fock(2, 5)
        assert rho.validate() == []
        assert rho.purity == pytest.approx(1.0)
        assert rho.mean_photon_number == pytest.approx(2.0)
        with pytest.raises(ParameterError):
            DensityMatrix.fock(6, 5)

    def test_thermal(self):
        rho = DensityMatrix.thermal(np.log(2.0), 10)
        diag = rho.diagonal
        assert rho.trace == pytest.approx(1.0)
        np.testing.assert_allclose(diag[1:] / diag[:-1], 0.5)

    def test_pure(self):
        rho = DensityMatrix.pure([1.0, 1.0j], 3)
        assert rho.validate() == []
        assert rho.mat[1, 0] == pytest.approx(0.5j)

    def test_from_diagonal_rejects_bad_weights(self):
        with pytest.raises(ParameterError):
            DensityMatrix.from_diagonal([1, 1, 1], 1)
        with pytest.raises(ParameterError):
            DensityMatrix.from_diagonal([0.5, -0.1], 3)

    def test_max_support(self):
        rho = DensityMatrix.from_diagonal([0.5, 0.5 - 1e-12, 1e-12], 6)
        assert rho.max_support() == 2
        assert rho.max_support(atol=1e-9) == 1

    def test_validate_flags_problems(self):
        mat = np.diag([0.7, 0.5]).astype(complex)
        mat[0, 1] = 0.1
        problems = DensityMatrix(mat).validate()
        assert any("Hermitian" in p for p in problems)
        assert any("trace" in p for p in problems)

    def test_non_square_rejected(self):
        with pytest.raises(ParameterError):
            DensityMatrix(np.zeros((2, 3)))


class TestCosineSine:
    """Test C(n), S(n) and alpha_n"""

    def test_unit_modulus_identity(self):
        """|C(n)|^2 + n S(n)^2 = 1 at every level"""
        params = DimensionlessParams(xi=0.83, eta=0.41, theta=0.2)
        C, S = cs_table(params, 50)
        n = np.arange(51)
        np.testing.assert_allclose(np.abs(C) ** 2 + n * S ** 2, 1.0, atol=1e-13)

    def test_resonances_are_exact(self, degenerate_params, squares_params):
        """At xi n + eta = k^2, C = (-1)^k and S = 0 exactly"""
        assert eval_CS(degenerate_params, 1) == (-1.0 + 0j, 0.0)
        assert eval_CS(degenerate_params, 2) == (-1.0 + 0j, 0.0)
        assert eval_CS(squares_params, 4) == (1.0 + 0j, 0.0)
        assert eval_alpha(squares_params, 9) == 0.0

    def test_injected_levels(self):
        params = DimensionlessParams(xi=0.83, eta=0.41, injected=(3,))
        C, S = eval_CS(params, 3)
        assert S == 0.0
        assert abs(C) == pytest.approx(1.0)

    def test_zero_argument_limit(self):
        """x = 0 uses the limit sin(pi x)/x = pi"""
        params = DimensionlessParams(xi=0.5, eta=0.0)
        C, S = eval_CS(params, 0)
        assert C == pytest.approx(1.0)
        assert S == pytest.approx(np.sqrt(0.5) * np.pi)

    def test_alpha_table_range(self, baseline_params):
        alpha = alpha_table(baseline_params, 80)
        assert alpha[0] == 0.0
        assert np.all((alpha >= 0) & (alpha <= 1))
        assert alpha[5] == pytest.approx(eval_alpha(baseline_params, 5))

    def test_negative_level_rejected(self, baseline_params):
        with pytest.raises(ParameterError):
            eval_alpha(baseline_params, -1)


class TestKrausOperators:
    """Test the four Kraus operators"""

    def test_factored_matches_dense(self, baseline_params):
        d = 12
        ks = build_kraus(baseline_params, d)
        dense = dense_kraus(baseline_params, d)
        for y in OUTCOMES:
            np.testing.assert_allclose(ks[y].to_dense(), dense[y], atol=1e-14)

    def test_shifts(self, baseline_params):
        ks = build_kraus(baseline_params, 6)
        assert [V.shift for _, V in ks] == [0, -1, 1, 0]
        assert ks[Outcome.PM].amp[6] == 0

    def test_fock_norms(self, baseline_params):
        """||V_y|k>||^2 reproduces the classical transition weights"""
        d = 20
        ks = build_kraus(baseline_params, d)
        alpha = alpha_table(baseline_params, d + 1)
        atoms = baseline_params.atoms
        k = np.arange(d)
        weights = ks.level_weights()
        np.testing.assert_allclose(weights[Outcome.MM.index, :d], atoms.p_minus * (1 - alpha[k]),
                                   atol=1e-13)
        np.testing.assert_allclose(weights[Outcome.MP.index, :d], atoms.p_minus * alpha[k],
                                   atol=1e-13)
        np.testing.assert_allclose(weights[Outcome.PM.index, :d], atoms.p_plus * alpha[k + 1],
                                   atol=1e-13)
        np.testing.assert_allclose(weights[Outcome.PP.index, :d],
                                   atoms.p_plus * (1 - alpha[k + 1]), atol=1e-13)

    def test_stochasticity(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            params = DimensionlessParams(xi=rng.uniform(0, 5), eta=rng.uniform(0, 3),
                                         theta=rng.uniform(-2, 2), phi=rng.uniform(0, 6))
            report = verify_stochasticity(build_kraus(params, 40))
            assert report.max_deviation <= 1e-12
            assert report.boundary_defect == pytest.approx(report.expected_boundary_defect,
                                                           abs=1e-13)

    def test_small_truncation_rejected(self, baseline_params):
        with pytest.raises(ParameterError):
            build_kraus(baseline_params, 0)

    def test_apply_to_density(self, baseline_params):
        d = 8
        rng = np.random.default_rng(2)
        G = rng.normal(size=(d + 1, d + 1)) + 1j * rng.normal(size=(d + 1, d + 1))
        rho = DensityMatrix(G @ G.conj().T / np.trace(G @ G.conj().T).real)
        dense = dense_kraus(baseline_params, d)
        ks = build_kraus(baseline_params, d)
        for y in OUTCOMES:
            image, weight = apply_to_density(ks[y], rho)
            expected = dense[y] @ rho.mat @ dense[y].conj().T
            np.testing.assert_allclose(image.mat, expected, atol=1e-13)
            assert weight == pytest.approx(np.trace(expected).real)


class TestTraceNorm:
    """Test the trace norm"""

    def test_diagonal(self):
        assert trace_norm(np.diag([1.0, -2.0, 0.5])) == pytest.approx(3.5)

    def test_orthogonal_pure_states(self):
        assert trace_norm(DensityMatrix.fock(0, 3).mat - DensityMatrix.fock(2, 3).mat) == \
            pytest.approx(2.0)

    def test_non_hermitian_rejected(self):
        with pytest.raises(NonHermitianError):
            trace_norm(np.array([[0.0, 1.0], [0.0, 0.0]]))
