import numpy as np
import pytest
from scipy.linalg import expm

from koopman_clf.vectorfield import (
    NonFiniteStateError,
    PolyVectorField,
    SwitchedFamily,
    boundary_invariance_check,
    flow_step,
    halton,
    integrate_flow,
    lie_bracket,
)


def random_int_field(rng, n=2, degree=3, span=3):
    comps = []
    for _ in range(n):
        table = {}
        for _ in range(4):
            alpha = tuple(int(a) for a in rng.integers(0, degree + 1, n))
            if 0 < sum(alpha) <= degree:
                table[alpha] = float(rng.integers(-span, span + 1))
        if not table:
            table = {tuple(1 if c == 0 else 0 for c in range(n)): 1.0}
        comps.append(table)
    return PolyVectorField(comps)


def jacobian_fd(field, z, h=1e-5):
    # central differences; valid for polynomial fields with a real step
    n = field.dimension
    J = np.zeros((n, n), dtype=complex)
    for s in range(n):
        e = np.zeros(n, dtype=complex)
        e[s] = h
        J[:, s] = (field.evaluate(z + e) - field.evaluate(z - e)) / (2 * h)
    return J


# construction ---------------------------------------------------------------


def test_constant_terms_rejected():
    with pytest.raises(ValueError):
        PolyVectorField([{(0, 0): 1.0}, {(0, 1): -1.0}])


def test_zero_coefficients_dropped_and_merged():
    f = PolyVectorField([{(1, 0): 0.0, (2, 0): 1.0}, {(0, 1): 2.0, (0, 1): 2.0}])
    assert f.components[0] == {(2, 0): 1.0}
    assert f.coefficient(1, (0, 1)) == 2.0
    assert f.coefficient(0, (1, 0)) == 0j


def test_tail_l1_must_dominate_stored_sum():
    with pytest.raises(ValueError):
        PolyVectorField([{(1,): -1.0, (3,): 0.5}], tail_l1=[1.0])
    f = PolyVectorField([{(1,): -1.0, (3,): 0.5}], tail_l1=[1.5])
    assert f.l1_norm(0) == 1.5
    assert f.truncated


def test_truncated_without_tail_warns_on_l1_query():
    f = PolyVectorField([{(1,): -1.0}], truncated=True)
    with pytest.warns(UserWarning):
        assert f.l1_norm(0) == 1.0


def test_from_linear_and_jacobian_roundtrip():
    A = np.array([[-1.0, 0.5 + 0.25j], [0.0, -2.0]])
    f = PolyVectorField.from_linear(A)
    assert np.allclose(f.jacobian_at_origin(), A)
    z = np.array([0.3, -0.2 + 0.1j])
    assert np.allclose(f.evaluate(z), A @ z)


def test_term_count_excluding_linear_diagonal():
    f = PolyVectorField(
        [{(1, 0): -1.0, (2, 0): 0.3, (1, 2): -0.3}, {(0, 1): -1.0, (1, 1): 0.15}]
    )
    assert f.term_count() == 5
    assert f.term_count(exclude_linear_diag=True) == 3


# evaluation -----------------------------------------------------------------


def test_evaluate_polynomial_pair_literal_point():
    a, b = 1.0, 0.3
    f = PolyVectorField(
        [
            {(1, 0): -a, (2, 0): b, (1, 2): -b},
            {(0, 1): -a, (1, 1): b / 2},
        ]
    )
    got = f.evaluate(np.array([0.2, 0.1]))
    assert abs(got[0] - (-0.1886)) < 1e-15
    assert abs(got[1] - (-0.097)) < 1e-15


def test_evaluate_batch_matches_single_points():
    rng = np.random.default_rng(5)
    f = random_int_field(rng, n=3)
    Z = rng.normal(size=(7, 3)) + 1j * rng.normal(size=(7, 3))
    batch = f.evaluate(Z)
    for i in range(7):
        assert np.allclose(batch[i], f.evaluate(Z[i]))


def test_evaluate_rejects_wrong_dimension():
    f = PolyVectorField([{(1, 0): -1.0}, {(0, 1): -1.0}])
    with pytest.raises(ValueError):
        f.evaluate(np.zeros(3))


# bracket --------------------------------------------------------------------


def test_bracket_of_scaling_and_quadratic_pair():
    # F = (-0.7 x1, -0.7 x2), G = (-b x1 + 1.3 (x1^2 - x2^2), -b x2 + 2.6 x1 x2)
    # [F, G] = (-0.91 (x1^2 - x2^2), -1.82 x1 x2); the linear part cancels.
    alpha, gamma = 0.7, 1.3
    beta = 0.4
    F = PolyVectorField([{(1, 0): -alpha}, {(0, 1): -alpha}])
    G = PolyVectorField(
        [
            {(1, 0): -beta, (2, 0): gamma, (0, 2): -gamma},
            {(0, 1): -beta, (1, 1): 2 * gamma},
        ]
    )
    br = lie_bracket(F, G)
    assert br.components[0] == {(2, 0): -alpha * gamma, (0, 2): alpha * gamma}
    assert br.components[1] == {(1, 1): -2 * alpha * gamma}


def test_bracket_matches_finite_difference_jacobians():
    rng = np.random.default_rng(17)
    for _ in range(5):
        F = random_int_field(rng)
        G = random_int_field(rng)
        br = lie_bracket(F, G)
        for _ in range(3):
            z = 0.4 * (rng.normal(size=2) + 1j * rng.normal(size=2))
            want = jacobian_fd(G, z) @ F.evaluate(z) - jacobian_fd(F, z) @ G.evaluate(z)
            got = br.evaluate(z)
            scale = max(1.0, np.max(np.abs(want)))
            assert np.max(np.abs(got - want)) < 1e-6 * scale


def test_bracket_is_antisymmetric_and_bilinear():
    rng = np.random.default_rng(23)
    for _ in range(10):
        F = random_int_field(rng)
        G = random_int_field(rng)
        H = random_int_field(rng)
        fg = lie_bracket(F, G)
        gf = lie_bracket(G, F)
        for l in range(2):
            assert fg.components[l] == {k: -v for k, v in gf.components[l].items()}
        # [F+H, G] = [F, G] + [H, G] checked pointwise
        FplusH = PolyVectorField(
            [
                {
                    k: F.components[l].get(k, 0) + H.components[l].get(k, 0)
                    for k in set(F.components[l]) | set(H.components[l])
                }
                for l in range(2)
            ]
        )
        left = lie_bracket(FplusH, G)
        right_h = lie_bracket(H, G)
        z = 0.3 * (rng.normal(size=2) + 1j * rng.normal(size=2))
        assert np.allclose(
            left.evaluate(z), fg.evaluate(z) + right_h.evaluate(z), atol=1e-12
        )


def test_bracket_jacobi_identity():
    rng = np.random.default_rng(31)
    for _ in range(5):
        F = random_int_field(rng, degree=2)
        G = random_int_field(rng, degree=2)
        H = random_int_field(rng, degree=2)
        t1 = lie_bracket(F, lie_bracket(G, H))
        t2 = lie_bracket(G, lie_bracket(H, F))
        t3 = lie_bracket(H, lie_bracket(F, G))
        for _ in range(3):
            z = 0.3 * (rng.normal(size=2) + 1j * rng.normal(size=2))
            s = t1.evaluate(z) + t2.evaluate(z) + t3.evaluate(z)
            assert np.max(np.abs(s)) < 1e-9


def test_bracket_of_linear_fields_is_matrix_commutator():
    rng = np.random.default_rng(41)
    for _ in range(10):
        A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        B = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        br = lie_bracket(PolyVectorField.from_linear(A), PolyVectorField.from_linear(B))
        assert np.allclose(br.jacobian_at_origin(), B @ A - A @ B, atol=1e-12)


# integration ----------------------------------------------------------------


def test_rk4_matches_exponential_decay():
    f = PolyVectorField([{(1,): -1.0}])
    z = integrate_flow(f, np.array([1.0 + 0j]), 1.0, dt=1e-3)
    assert abs(z[0] - np.exp(-1.0)) < 1e-9


def test_rk4_order_via_step_halving():
    f = PolyVectorField([{(1,): -1.0, (3,): 0.25}])
    exact = integrate_flow(f, np.array([0.8 + 0j]), 1.0, dt=1e-4)
    e1 = abs(integrate_flow(f, np.array([0.8 + 0j]), 1.0, dt=0.05)[0] - exact[0])
    e2 = abs(integrate_flow(f, np.array([0.8 + 0j]), 1.0, dt=0.025)[0] - exact[0])
    assert 10.0 < e1 / e2 < 22.0  # fourth order: factor ~16


def test_flow_matches_matrix_exponential():
    rng = np.random.default_rng(3)
    A = -np.eye(2) + 0.4 * (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    f = PolyVectorField.from_linear(A)
    z0 = np.array([0.5, -0.3 + 0.2j])
    got = integrate_flow(f, z0, 2.0, dt=1e-3)
    want = expm(2.0 * A) @ z0
    assert np.max(np.abs(got - want)) < 1e-8


def test_integrate_flow_zero_horizon_returns_start():
    f = PolyVectorField([{(1,): -1.0}])
    z0 = np.array([0.3 + 0.1j])
    assert np.array_equal(integrate_flow(f, z0, 0.0), z0)


def test_integrate_flow_validates_arguments():
    f = PolyVectorField([{(1,): -1.0}])
    with pytest.raises(ValueError):
        integrate_flow(f, np.array([1.0]), -1.0)
    with pytest.raises(ValueError):
        integrate_flow(f, np.array([1.0]), 1.0, dt=0.0)


def test_flow_step_raises_on_blowup():
    f = PolyVectorField([{(3,): 1.0}])
    with np.errstate(all="ignore"), pytest.raises(NonFiniteStateError):
        flow_step(f, np.array([1e160 + 0j]), 1.0)


# halton ---------------------------------------------------------------------


def test_halton_base2_and_base3_prefixes():
    assert [halton(i, 2) for i in (1, 2, 3, 4)] == [0.5, 0.25, 0.75, 0.125]
    assert np.allclose(
        [halton(i, 3) for i in (1, 2, 3)], [1 / 3, 2 / 3, 1 / 9]
    )


# boundary test --------------------------------------------------------------


def test_boundary_inward_for_diagonal_contraction():
    f = PolyVectorField([{(1, 0): -1.0}, {(0, 1): -1.0}])
    rep = boundary_invariance_check(f, 0.9, samples=2)
    assert rep.holds
    # Re(-z conj(z)) = -rho^2 on every sample of the tested face
    assert abs(rep.worst_value - (-0.81)) < 1e-14
    assert rep.samples == 2 * 64 * 2


def test_boundary_detects_outward_component():
    f = PolyVectorField([{(1, 0): 1.0}, {(0, 1): -1.0}])
    rep = boundary_invariance_check(f, 0.5, samples=1)
    assert not rep.holds
    assert abs(rep.worst_value - 0.25) < 1e-14
    assert abs(abs(rep.worst_point[0]) - 0.5) < 1e-14


def test_boundary_margin_tightens_the_verdict():
    f = PolyVectorField([{(1, 0): -1.0}, {(0, 1): -1.0}])
    assert boundary_invariance_check(f, 0.9, samples=1, margin=0.5).holds
    assert not boundary_invariance_check(f, 0.9, samples=1, margin=0.82).holds


def test_boundary_rejects_bad_arguments():
    f = PolyVectorField([{(1, 0): -1.0}, {(0, 1): -1.0}])
    with pytest.raises(ValueError):
        boundary_invariance_check(f, 0.9, samples=0)
    with pytest.raises(ValueError):
        boundary_invariance_check(f, 1.5)
    with pytest.raises(ValueError):
        boundary_invariance_check(f, 0.9, margin=-0.1)


# family ---------------------------------------------------------------------


def test_family_checks_dimensions_and_iterates():
    f1 = PolyVectorField([{(1, 0): -1.0}, {(0, 1): -1.0}])
    f2 = PolyVectorField([{(1, 0): -2.0}, {(0, 1): -2.0}])
    fam = SwitchedFamily([f1, f2])
    assert len(fam) == 2 and fam[1] is f2
    assert [f.dimension for f in fam] == [2, 2]
    with pytest.raises(ValueError):
        SwitchedFamily([f1, PolyVectorField([{(1,): -1.0}])])
    with pytest.raises(ValueError):
        SwitchedFamily([])
