import numpy as np
import pytest
from hypothesis import given, strategies as st

from uhlmann_sim.io import load_state, save_state
from uhlmann_sim.linalg import dag, partial_trace, op_norm, random_unitary
from uhlmann_sim.states import (
    DensityMatrix,
    PureState,
    QuantumChannel,
    StatePrepOracle,
    amplitude_damping,
    canonical_purification_exact,
    choi_state,
    complementary_channel,
    dephasing,
    depolarizing,
    erasure,
    identity_channel,
    max_entangled,
    partial_trace_channel,
    random_density,
    random_pure,
)

from strategies import rng_from, seeds


def test_canonical_purification_examples():
    assert np.allclose(canonical_purification_exact(np.diag([1.0, 0.0])), [1, 0, 0, 0])
    assert np.allclose(canonical_purification_exact(np.eye(2) / 2), max_entangled(2))
    p = 0.3
    assert np.allclose(canonical_purification_exact(np.diag([p, 1 - p])),
                       [np.sqrt(p), 0, 0, np.sqrt(1 - p)])


@given(seeds, st.sampled_from([2, 3]))
def test_canonical_purification_marginals(seed, d):
    w = random_density(d, rng_from(seed))
    v = canonical_purification_exact(w)
    big = np.outer(v, v.conj())
    lay = [("A", d), ("B", d)]
    assert np.allclose(partial_trace(big, lay, ["B"]), w, atol=1e-10)
    assert np.allclose(partial_trace(big, lay, ["A"]), w.T, atol=1e-10)


def test_canonical_purification_500(rng):
    worst = 0.0
    for k in range(500):
        d = 2 + k % 2
        w = random_density(d, rng)
        v = canonical_purification_exact(w)
        red = partial_trace(np.outer(v, v.conj()), [("A", d), ("B", d)], ["B"])
        worst = max(worst, np.abs(red - w).max())
    assert worst <= 1e-10


def test_choi_state_examples():
    phi = max_entangled(2)
    assert np.allclose(choi_state(identity_channel(2)), np.outer(phi, phi.conj()))
    assert np.allclose(choi_state(depolarizing(1.0)), np.eye(4) / 4)
    F = amplitude_damping(0.4)
    J = sum(np.kron(np.eye(2), K) @ np.outer(phi, phi.conj()) @ dag(np.kron(np.eye(2), K))
            for K in F.kraus())
    tau = choi_state(F)
    assert np.allclose(tau, J)
    assert np.allclose(partial_trace(tau, [("R", 2), ("B", 2)], ["B"]), np.eye(2) / 2)


def test_complementary_examples(rng):
    Fc = complementary_channel(identity_channel(2).to_stinespring())
    assert Fc.d_out == 1 and np.allclose(Fc.apply(random_density(2, rng)), [[1]])
    D = dephasing(0.5).to_stinespring()
    J = complementary_channel(D).choi_matrix()
    assert np.linalg.matrix_rank(J, tol=1e-10) == 2
    # tr_B as an isometric channel A⊗B -> A ⊗ (env B): complement is tr_A
    V = np.eye(4, dtype=complex)  # out = A, env = B
    trB = QuantumChannel.from_isometry(V, 2)
    rho = random_density(4, rng)
    lay = [("A", 2), ("B", 2)]
    assert np.allclose(trB.apply(rho), partial_trace(rho, lay, ["B"]))
    assert np.allclose(complementary_channel(trB).apply(rho), partial_trace(rho, lay, ["A"]))
    with pytest.raises(ValueError):
        complementary_channel(dephasing(0.5))


@given(seeds)
def test_kraus_and_stinespring_agree(seed):
    rng = rng_from(seed)
    chans = [amplitude_damping(rng.random()), dephasing(rng.random()), depolarizing(rng.random()),
             erasure(rng.random())]
    for F in chans:
        rho = random_density(F.d_in, rng)
        G = QuantumChannel.from_isometry(F.stinespring(), F.d_out)
        assert np.allclose(F.apply(rho), G.apply(rho), atol=1e-10)
        assert F.is_trace_preserving()
        tau = F.choi_state()
        assert abs(np.trace(tau) - 1) <= 1e-12 and np.linalg.eigvalsh(tau).min() >= -1e-12


def test_erasure_flag():
    F = erasure(0.5)
    out = F.apply(np.diag([1.0, 0.0]))
    assert np.allclose(np.diag(out), [0.5, 0, 0.5])


def test_validation():
    with pytest.raises(ValueError):
        PureState([1, 1])
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([0.7, 0.7]))
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([1.2, -0.2]))
    with pytest.raises(ValueError):
        StatePrepOracle(np.ones((2, 2)))


def test_oracle_counts(rng):
    from uhlmann_sim.ledger import ResourceLedger

    led = ResourceLedger()
    psi = random_pure(4, rng)
    U = StatePrepOracle.from_state(psi, [("A", 2), ("B", 2)], "U", led)
    assert np.allclose(U.forward()[:, 0], psi)
    U.inverse(3)
    assert led.queries[("U", "forward")] == 1 and led.queries[("U", "inverse")] == 3


def test_partial_trace_channel(rng):
    ch = partial_trace_channel([("A", 2), ("B", 3)], ["A"])
    r, s = random_density(2, rng), random_density(3, rng)
    assert np.allclose(ch.apply(np.kron(r, s)), s)


def test_state_file_roundtrip(tmp_path, rng):
    v = random_pure(6, rng)
    save_state(tmp_path / "v.txt", v, [2, 3])
    w, dims = load_state(tmp_path / "v.txt")
    assert dims == [2, 3] and np.array_equal(w, v)
    M = random_density(4, rng)
    save_state(tmp_path / "m.txt", M, [2, 2])
    N, _ = load_state(tmp_path / "m.txt")
    assert np.array_equal(N, M)
    (tmp_path / "bad.txt").write_text("1 0\n")
    with pytest.raises(ValueError):
        load_state(tmp_path / "bad.txt")
