import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from uhlmann_sim.ledger import ResourceLedger
from uhlmann_sim.linalg import dag, dilate_contraction, op_norm, poly_sv, sign_sv
from uhlmann_sim.polynomials import (
    MonomialPolynomial,
    sign_degree,
    synthesize_sign_polynomial,
    synthesize_sqrt_polynomial,
)
from uhlmann_sim.qsp import qsvt_sequence_unitary, reflection_block, reflection_phases
from uhlmann_sim.qsvt import (
    BlockEncoding,
    build_purified_difference_encoding,
    product_encodings,
    qsvt_apply,
    qsvt_uses,
)
from uhlmann_sim.states import StatePrepOracle, random_density, random_pure
from uhlmann_sim.uhlmann import block_enc_sqrt_state

from strategies import contraction, rng_from, seeds

LAY = [("A", 2), ("B", 2)]


def _u_formula(beta, delta):
    u = math.ceil(8 * math.e / beta * math.log(2 / delta))
    return u + (u % 2 == 0)


@pytest.mark.parametrize("beta,delta", [(0.3, 0.1), (0.1, 0.05), (0.5, 0.01)])
def test_sign_polynomial_certificate(beta, delta):
    P = synthesize_sign_polynomial(beta, delta)
    xs = np.linspace(-1, 1, 10001)
    band = np.abs(xs) >= beta
    assert np.max(np.abs(P(xs[band]) - np.sign(xs[band]))) <= delta
    assert np.max(np.abs(P(xs))) <= 1 + 1e-9
    assert P.degree == _u_formula(beta, delta) == sign_degree(beta, delta)
    assert P(np.array([0.0]))[0] == 0


def test_sign_polynomial_examples():
    P = synthesize_sign_polynomial(0.3, 0.1)
    assert abs(P(np.array([0.3]))[0] - 1) <= 0.1 and abs(P(np.array([-0.3]))[0] + 1) <= 0.1
    assert synthesize_sign_polynomial(0.5, 0.01).degree == _u_formula(0.5, 0.01)
    with pytest.raises(ValueError):
        synthesize_sign_polynomial(0.3, 0.6)


@given(st.floats(0.05, 1.0), st.floats(1e-6, 0.49))
def test_sign_degree_is_minimal_odd(beta, delta):
    u = sign_degree(beta, delta)
    bound = math.ceil(8 * math.e / beta * math.log(2 / delta))
    assert u % 2 == 1 and bound <= u <= bound + 1


@pytest.mark.parametrize("m_min,delta", [(0.25, 0.05), (0.05, 0.02), (1e-3, 0.1)])
def test_sqrt_polynomial_certificate(m_min, delta):
    R = synthesize_sqrt_polynomial(m_min, delta)
    lo = R.certificate["certified_on"][0]
    xs = np.linspace(lo, 1, 10001)
    assert np.max(np.abs(R(xs) - np.sqrt(xs) / 2)) <= delta
    assert np.max(np.abs(R(np.linspace(-1, 1, 10001)))) <= 1 + 1e-9
    assert R.constant > 0


def test_qsp_phases_reproduce_polynomial():
    P = synthesize_sign_polynomial(0.5, 0.1)
    coef = P.coefficients
    phi = reflection_phases(coef)
    xs = np.linspace(-1, 1, 401)
    assert np.max(np.abs(reflection_block(phi, xs).real - P(xs))) <= 1e-9
    # literal gate sequence on a real diagonal block: its corner has real part P(s)
    s = np.array([0.2, 0.7])
    U = dilate_contraction(np.diag(s))
    Pi = np.diag([1, 1, 0, 0]).astype(complex)
    UP = qsvt_sequence_unitary(U, phi, Pi, Pi)
    assert np.allclose(np.diag(UP[:2, :2]).real, P(s), atol=1e-9)


def test_qsvt_uses_and_ledger():
    assert qsvt_uses(231, "odd") == (116, 115)
    assert qsvt_uses(10, "even") == (5, 5)
    Ur = StatePrepOracle.from_state([1, 0, 0, 0], LAY, "U_rho")
    Us = StatePrepOracle.from_state([1, 0, 0, 0], LAY, "U_sigma")
    be = build_purified_difference_encoding(Ur, Us)
    led = ResourceLedger()
    out = qsvt_apply(be, MonomialPolynomial(1), led)
    assert np.allclose(out.block, be.block)
    assert led.channel_uses["U"] == 1 and led.channel_uses["U†"] == 0
    assert led.queries[("U_sigma", "forward")] == 1 and led.queries[("U_rho", "inverse")] == 1


def test_sign_on_half_identity():
    be = BlockEncoding.from_contraction(0.5 * np.eye(2), target=0.5 * np.eye(2))
    out = qsvt_apply(be, synthesize_sign_polynomial(0.3, 0.1))
    assert op_norm(out.block - np.eye(2)) <= 0.1


def test_difference_encoding_examples(rng):
    e = [1, 0, 0, 0]
    be = build_purified_difference_encoding(StatePrepOracle.from_state(e, LAY, "r"),
                                            StatePrepOracle.from_state(e, LAY, "s"))
    assert np.allclose(be.block, np.diag([1, 0]))
    # equal purifications with mixed marginals: singular values = eigenvalues of ρ^B
    v = random_pure(4, rng)
    be = build_purified_difference_encoding(StatePrepOracle.from_state(v, LAY, "r"),
                                            StatePrepOracle.from_state(v, LAY, "s"))
    M = v.reshape(2, 2)
    rhoB = M.T @ M.conj()
    assert np.allclose(np.sort(np.linalg.svd(be.block, compute_uv=False)),
                       np.sort(np.linalg.eigvalsh(rhoB)), atol=1e-9)


@given(seeds)
def test_difference_encoding_singular_values(seed):
    rng = rng_from(seed)
    r, s = random_pure(4, rng), random_pure(4, rng)
    be = build_purified_difference_encoding(StatePrepOracle.from_state(r, LAY, "r"),
                                            StatePrepOracle.from_state(s, LAY, "s"))
    rA = r.reshape(2, 2) @ r.reshape(2, 2).conj().T
    sA = s.reshape(2, 2) @ s.reshape(2, 2).conj().T
    from uhlmann_sim.linalg import psd_sqrt

    ref = np.linalg.svd(psd_sqrt(sA) @ psd_sqrt(rA), compute_uv=False)
    assert np.allclose(np.linalg.svd(be.block, compute_uv=False), ref, atol=1e-9)


def test_product_encoding_examples(rng):
    I = BlockEncoding.from_contraction(np.eye(2), target=np.eye(2))
    p = product_encodings(I, I)
    assert p.alpha == 1 and p.eps == 0 and np.allclose(p.block, np.eye(2))
    a = BlockEncoding.from_contraction(0.5 * np.eye(2), target=0.5 * np.eye(2) + 0.005, eps=0.01)
    b = BlockEncoding.from_contraction(0.5 * np.eye(2), target=0.5 * np.eye(2) + 0.01, eps=0.02)
    assert product_encodings(a, b).eps == pytest.approx(0.03)
    rho, sigma = random_density(2, rng), random_density(2, rng)
    Fr = block_enc_sqrt_state(rho, 0.01).block_encoding
    Gs = block_enc_sqrt_state(sigma, 0.01).block_encoding
    from uhlmann_sim.linalg import psd_sqrt

    prod = product_encodings(Gs, Fr)
    assert op_norm(prod.block - psd_sqrt(sigma) @ psd_sqrt(rho) / 8) <= prod.eps + 1e-12


def test_certificate_checked_at_construction():
    with pytest.raises(ValueError):
        BlockEncoding.from_contraction(0.5 * np.eye(2), target=np.eye(2), eps=0.1)


def _robust_pair(rng, eta):
    A = contraction(rng, 3, 3) * 0.7
    E = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    At = A + eta * E / op_norm(E)
    return A, At


@given(seeds, st.floats(1e-4, 0.01))
def test_qsvt_robustness(seed, eta):
    rng = rng_from(seed)
    A, At = _robust_pair(rng, eta)
    if op_norm(At) > 1:
        return
    avg = op_norm((A + At) / 2)
    assert op_norm(A - At) + avg ** 2 <= 1
    P = synthesize_sign_polynomial(0.3, 0.1)
    lhs = op_norm(poly_sv(P, A) - poly_sv(P, At))
    assert lhs <= P.effective_degree * math.sqrt(2 / (1 - avg ** 2)) * op_norm(A - At) + 1e-8


@given(seeds, st.floats(1e-4, 0.01))
def test_block_encoding_robustness_constructive(seed, eta):
    rng = rng_from(seed)
    A, At = _robust_pair(rng, eta)
    if op_norm(At) > 1:
        return
    avg = op_norm((A + At) / 2)
    U, Ut = dilate_contraction(A), dilate_contraction(At)
    assert np.allclose(Ut[:3, :3], At)
    assert op_norm(U - Ut) <= math.sqrt(2 / (1 - avg ** 2)) * op_norm(A - At) + 1e-8


def test_sqrt_block_examples():
    ch = block_enc_sqrt_state(np.eye(2) / 2, 0.05)
    assert op_norm(ch.block_encoding.block - np.eye(2) / 4) <= 0.05
    ch = block_enc_sqrt_state(np.diag([1.0, 0.0]), 0.05)
    assert op_norm(ch.block_encoding.block - np.diag([1 / (2 * math.sqrt(2)), 0])) <= 0.05
