import math

import numpy as np
import pytest
from hypothesis import given, settings

from uhlmann_sim import applications as app
from uhlmann_sim.dme import unitary_superop
from uhlmann_sim.ledger import ResourceLedger
from uhlmann_sim.linalg import dag, random_unitary, trace_norm
from uhlmann_sim.metrics import fidelity_pair
from uhlmann_sim.states import (
    QuantumChannel,
    amplitude_damping,
    dephasing,
    random_density,
    random_pure,
    unitary_channel,
)

from strategies import rng_from, seeds


# -- phase estimation


def test_plan_examples():
    p = app.PhaseEstimationPlan.for_accuracy(0.1)
    assert p.l == 6 and p.g == 63 and p.outcomes == 64
    assert app.PhaseEstimationPlan.for_accuracy(0.2).l == 5
    with pytest.raises(ValueError):
        app.PhaseEstimationPlan.for_accuracy(0.0)


def test_qpe_exact_phase_is_deterministic():
    l = 4
    Q = np.diag(np.exp(2j * np.pi * np.array([5, 11]) / 16))
    P = app.qpe_distribution(Q, np.array([1, 0]), l)
    assert P[5] == pytest.approx(1.0) and P.sum() == pytest.approx(1.0)


@given(seeds)
def test_qpe_routes_agree(seed):
    rng = rng_from(seed)
    Q = random_unitary(4, rng)
    psi = random_pure(4, rng)
    a = app.qpe_distribution(Q, psi, 5)
    b = app.qpe_distribution_spectral(Q, psi, 5)
    assert np.allclose(a, b, atol=1e-12) and a.sum() == pytest.approx(1.0)
    mu = random_density(4, rng)
    assert np.allclose(app.qpe_distribution(Q, mu, 4), app.qpe_distribution_spectral(Q, mu, 4),
                       atol=1e-12)


def test_channel_qpe_reduces_to_unitary(rng):
    Q = random_unitary(3, rng)
    mu = random_density(3, rng)
    P1 = app.qpe_distribution_channel(unitary_superop(Q), Q, mu, 4)
    P2 = app.qpe_distribution(Q, mu, 4)
    assert np.allclose(P1, P2, atol=1e-12)


def test_query_amplitude_estimate(rng):
    W, U = random_unitary(4, rng), random_unitary(4, rng)
    rec = app.sqrt_amplitude_estimate(W, U, 0.1)
    assert rec.target == pytest.approx(abs(np.vdot(U[:, 0], W[:, 0])))
    assert rec.success_probability >= 2 / 3 and rec.ok
    assert rec.ledger.channel_uses["Q"] == rec.plan.g


def test_sample_amplitude_estimate_rejects_noisy_budget(rng):
    w = random_pure(2, rng)
    with pytest.raises(ValueError):
        app.sqrt_amplitude_estimate(w, w, 0.1, mode="sample", eps_prime=1e-3)
    with pytest.raises(ValueError):
        app.sqrt_amplitude_estimate(w, w, 0.1, mode="bogus")


def test_sample_routes_close(rng):
    """Channel-level QPE and the target-unitary law differ only by DME error."""
    om, psi = random_pure(2, rng), random_pure(2, rng)
    a = app.sqrt_amplitude_estimate(om, psi, 0.2, mode="sample", channel_level=True)
    b = app.sqrt_amplitude_estimate(om, psi, 0.2, mode="sample", channel_level=False)
    assert np.max(np.abs(a.distribution - b.distribution)) <= 0.02
    assert b.success_lower_bound <= b.success_probability


# -- fidelity estimation


@settings(max_examples=15)
@given(seeds)
def test_fidelity_query_model(seed):
    rng = rng_from(seed)
    r, s = random_pure(4, rng), random_pure(4, rng)
    rec = app.fidelity_estimate((r, s), 0.1, "purified-query", dims=(2, 2))
    R, S = r.reshape(2, 2), s.reshape(2, 2)
    sF = fidelity_pair(R @ R.conj().T, S @ S.conj().T)[1]
    assert rec.target == pytest.approx(sF, abs=1e-12)
    assert rec.ok


def test_fidelity_sample_models(rng):
    r, s = random_pure(4, rng), random_pure(4, rng)
    assert app.fidelity_estimate((r, s), 0.2, "purified-sample", dims=(2, 2)).ok
    a, b = random_density(2, rng), random_density(2, rng)
    rec = app.fidelity_estimate((a, b), 0.2, "mixed-sample")
    assert rec.target == pytest.approx(fidelity_pair(a, b)[1], abs=1e-9) and rec.ok


def test_fidelity_estimate_validation(rng):
    r = random_pure(4, rng)
    with pytest.raises(ValueError):
        app.fidelity_estimate((r, r), 0.1, "telepathy")
    with pytest.raises(ValueError):
        app.fidelity_estimate((r,), 0.1)


# -- Stinespring and Petz


def test_stinespring_amplitude_damping():
    F = amplitude_damping(0.3)
    G, G_inv = app.stinespring_via_uhlmann(F, 0.3)
    rep = app.stinespring_report(F, G, G_inv)
    assert rep["diamond_stinespring"] <= 0.3
    assert rep["diamond_channel"] <= 0.3
    assert rep["inverse_choi_gap"] <= 0.3
    V = G.ideal_isometry
    assert np.allclose(dag(V) @ V, np.eye(2), atol=1e-10)


def test_direct_petz_inverts_unitary(rng):
    U = random_unitary(2, rng)
    R = app.petz_recovery(unitary_channel(U), random_density(2, rng), "direct")
    for _ in range(10):
        X = random_density(2, rng)
        assert trace_norm(R.apply(U @ X @ dag(U)) - X) <= 1e-10


def test_direct_petz_fixes_sigma(rng):
    F = amplitude_damping(0.4)
    sigma = random_density(2, rng)
    R = app.petz_recovery(F, sigma, "direct")
    assert np.allclose(R.apply(F.apply(sigma)), sigma, atol=1e-10)


def test_petz_uhlmann_route():
    F = dephasing(0.5)
    Rd = app.petz_recovery(F, np.eye(2) / 2, "direct")
    Ru = app.petz_recovery(F, np.eye(2) / 2, "uhlmann", epsilon=0.3)
    assert app.petz_sweep(Rd, Ru, 40) <= 0.3
    assert Ru.ledger.channel_uses["G_inv"] == Ru.params["v"]
    assert Ru.params["delta"] == pytest.approx(0.3 / Ru.params["v"])


def test_petz_validation():
    with pytest.raises(ValueError):
        app.petz_recovery(dephasing(0.5), np.eye(2) / 2, "guess")


# -- decoupling


def test_clifford_encoders_are_unitary():
    for n in (1, 2):
        for k in range(len(app.CLIFFORDS[n])):
            C = app.clifford_encoder(n, k)
            assert np.allclose(dag(C) @ C, np.eye(2 ** n))


def test_identity_transmission():
    rep = app.decoupling_demo("entanglement-transmission", "identity", 0.1)
    assert rep.epsilon == pytest.approx(0.0, abs=1e-9)
    assert rep.fidelity >= 0.9 and rep.ok


def test_erasure_transmission_both_models():
    r1 = app.decoupling_demo("entanglement-transmission", "erasure", 0.1)
    r2 = app.decoupling_demo("entanglement-transmission", "erasure", 0.1, model=2)
    assert r1.ok and r2.ok
    assert r1.epsilon == pytest.approx(r2.epsilon, abs=1e-9)
    r3 = app.decoupling_demo("entanglement-transmission", "erasure", 0.1, model=2, correct=False)
    assert r3.epsilon >= r2.epsilon - 1e-12


@pytest.mark.parametrize("scenario", ["random", "max-entangled"])
def test_merging(scenario):
    rep = app.decoupling_demo("state-merging", scenario, 0.1, seed=3)
    assert rep.ok
    assert rep.to_dict()["bound"] == pytest.approx(1 - rep.epsilon - 0.1)


def test_decoupling_validation():
    with pytest.raises(ValueError):
        app.decoupling_demo("teleport", "identity")
    with pytest.raises(ValueError):
        app.decoupling_demo("entanglement-transmission", "vacuum")
