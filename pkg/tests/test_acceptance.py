"""End-to-end acceptance checks, one test per criterion.

Each test asserts its tolerance and its wall-clock budget; a summary line per
criterion is printed at the end of the run (see conftest.py).
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest
import scipy.linalg as sla

from uhlmann_sim import applications as app
from uhlmann_sim import uhlmann as uh
from uhlmann_sim.dme import (
    DmePlan,
    coherence_block,
    dme_exponentiate,
    dmesub,
    k_generator,
    partial_swap_power,
    prepare_upsilon,
    superop_channel,
)
from uhlmann_sim.ledger import ResourceLedger
from uhlmann_sim.linalg import dilate_contraction, op_norm, poly_sv, random_unitary
from uhlmann_sim.metrics import diamond_distance, fidelity_pair, trace_distance
from uhlmann_sim.polynomials import synthesize_sign_polynomial
from uhlmann_sim.qsvt import BlockEncoding, product_encodings
from uhlmann_sim.states import (
    QuantumChannel,
    StatePrepOracle,
    amplitude_damping,
    dephasing,
    random_density,
    random_pure,
    unitary_channel,
)
LAY = [("A", 2), ("B", 2)]


class Clock:
    def __init__(self, budget):
        self.budget = budget
        self.t0 = time.perf_counter()

    def check(self):
        el = time.perf_counter() - self.t0
        assert el < self.budget, f"took {el:.1f} s, budget {self.budget} s"
        return el


# -- independent oracles (textbook formulas, computed without the package)


def min_odd_degree(beta, delta):
    u = math.ceil(8 * math.e / beta * math.log(2 / delta))
    return u if u % 2 else u + 1


def sqrtm_h(M):
    w, V = np.linalg.eigh((M + M.conj().T) / 2)
    return (V * np.sqrt(np.clip(w, 0, None))) @ V.conj().T


def reduced_A(v, dA, dB):
    M = v.reshape(dA, dB)
    return M @ M.conj().T


def fidelity_oracle(r, s):
    """F = (tr|√r √s|)² via scipy's sqrtm."""
    a, b = sla.sqrtm(r), sla.sqrtm(s)
    return float(np.sum(np.linalg.svd(a @ b, compute_uv=False))) ** 2


def smin_rank(rho_A, sigma_A, cut=1e-12):
    s = np.linalg.svd(sqrtm_h(sigma_A) @ sqrtm_h(rho_A), compute_uv=False)
    nz = s[s > cut * s.max()]
    return float(nz.min()), nz.size


def random_pair(rng, d):
    return random_pure(d * d, rng), random_pure(d * d, rng)


# ---------------------------------------------------------------------------


@pytest.mark.criterion(1, "exact Uhlmann oracle reaches F(ρ_A, σ_A)")
def test_criterion_01_oracle_exactness(note):
    clk = Clock(10)
    rng = np.random.default_rng(101)
    worst = 0.0
    for k in range(200):
        d = (2, 3, 4)[k % 3]
        r, s = random_pair(rng, d)
        V = uh.exact_uhlmann_isometry(r, s, (d, d))
        out = np.kron(np.eye(d), V) @ r
        achieved = abs(np.vdot(s, out)) ** 2
        target = fidelity_oracle(reduced_A(r, d, d), reduced_A(s, d, d))
        worst = max(worst, abs(achieved - target))
    note(f"max |ΔF| = {worst:.2e}")
    assert worst <= 1e-9
    clk.check()


@pytest.mark.criterion(2, "sign polynomial certification")
def test_criterion_02_sign_polynomial(note):
    clk = Clock(5)
    xs = np.linspace(-1, 1, 200001)
    for beta, delta in [(0.3, 0.1), (0.1, 0.05), (0.5, 0.01)]:
        P = synthesize_sign_polynomial(beta, delta)
        v = P(xs)
        band = np.abs(xs) >= beta
        err = float(np.max(np.abs(v[band] - np.sign(xs[band]))))
        note(f"(β={beta}, δ={delta}): deg {P.degree}, sup err {err:.3e}")
        assert err <= delta
        assert np.max(np.abs(v)) <= 1 + 1e-12
        assert P.degree == min_odd_degree(beta, delta)
    clk.check()


@pytest.mark.criterion(3, "purified query access, fidelity mode")
def test_criterion_03_query_fidelity(note):
    clk = Clock(60)
    rng = np.random.default_rng(303)
    delta = 0.1
    violations, worst = 0, np.inf
    for _ in range(100):
        r, s = random_pair(rng, 2)
        Ur, Us = StatePrepOracle.from_state(r, LAY, "U_rho"), StatePrepOracle.from_state(s, LAY, "U_sigma")
        led = ResourceLedger()
        res = uh.uhlmann_purified_query(Ur, Us, delta, "fidelity", ledger=led)
        F = fidelity_oracle(reduced_A(r, 2, 2), reduced_A(s, 2, 2))
        # achieved fidelity recomputed from the returned unitary, flag traced out
        col = res.output[:, :2]
        achieved = 0.0
        for f in range(2):
            K = np.kron(np.eye(2), col[2 * f:2 * f + 2])
            achieved += abs(np.vdot(s, K @ r)) ** 2
        assert abs(achieved - res.fidelity_achieved) <= 1e-9
        slack = achieved - (F - delta)
        worst = min(worst, slack)
        violations += slack < 0
        s_min, rank = smin_rank(reduced_A(r, 2, 2), reduced_A(s, 2, 2))
        u = min_odd_degree(min(max(s_min, delta / (8 * rank)), 1.0), delta / 4)
        assert res.params["u"] == u
        assert led.total_queries("U_rho") == u and led.total_queries("U_sigma") == u
    note(f"violations {violations}/100, min slack {worst:.3e}")
    assert violations == 0
    clk.check()


@pytest.mark.criterion(4, "purified query access, diamond mode (exact SDP)")
def test_criterion_04_query_diamond(note):
    clk = Clock(300)
    rng = np.random.default_rng(404)
    delta = 0.3
    worst = 0.0
    for _ in range(20):
        r, s = random_pair(rng, 2)
        Ur, Us = StatePrepOracle.from_state(r, LAY, "U_rho"), StatePrepOracle.from_state(s, LAY, "U_sigma")
        res = uh.uhlmann_purified_query(Ur, Us, delta, "diamond")
        M = np.einsum("ab,ac->bc", s.reshape(2, 2), r.reshape(2, 2).conj())
        Vpol, _ = sla.polar(M)  # full rank: sgn^{SV}(M) is the polar unitary
        ideal = dilate_contraction(Vpol)[:, :2]
        d = diamond_distance(QuantumChannel.from_isometry(res.output[:, :2], 4),
                             QuantumChannel.from_isometry(ideal, 4), exact=True).exact
        worst = max(worst, d)
    note(f"max diamond {worst:.3e} (δ = {delta})")
    assert worst <= delta
    clk.check()


def _dme_err(rho, t, m):
    S = partial_swap_power(rho, np.zeros_like(rho), t / m, m)
    return diamond_distance(superop_channel(S, 2, "dme"), unitary_channel(sla.expm(1j * t * rho)),
                            exact=True).exact


@pytest.mark.criterion(5, "density matrix exponentiation")
def test_criterion_05_dme(note):
    clk = Clock(120)
    rng = np.random.default_rng(505)
    plan = DmePlan(2.0, 0.25)
    assert plan.m == 64 == math.ceil(4 * 2.0 ** 2 / Fraction("0.25"))
    assert DmePlan(2.0, 0.1).m == 160 == math.ceil(4 * 2 ** 2 / Fraction("0.1"))
    ratios = []
    for _ in range(5):
        rho = random_density(2, rng)
        ch = dme_exponentiate(rho, plan)
        e1 = diamond_distance(ch, unitary_channel(sla.expm(2j * rho)), exact=True).exact
        assert e1 <= 0.25
        assert abs(e1 - _dme_err(rho, 2.0, 64)) <= 1e-9
        ratios.append(_dme_err(rho, 2.0, 128) / e1)
    note(f"error ratio at 2m: {min(ratios):.3f}..{max(ratios):.3f}")
    assert all(0.45 <= q <= 0.55 for q in ratios)
    clk.check()


@pytest.mark.criterion(6, "controlled-swap DME of Υ and the e^{iK} block form")
def test_criterion_06_dmesub(note):
    clk = Clock(300)
    rng = np.random.default_rng(606)
    worst_block, worst_dd = 0.0, 0.0
    for _ in range(20):
        r, s = random_pair(rng, 2)
        L = coherence_block(r, s, 2)
        # independent block form from the SVD of L
        U, sv, Vh = np.linalg.svd(L)
        V = Vh.conj().T
        ref = np.block([[V @ np.diag(np.cos(sv)) @ Vh, 1j * V @ np.diag(np.sin(sv)) @ U.conj().T],
                        [1j * U @ np.diag(np.sin(sv)) @ Vh, U @ np.diag(np.cos(sv)) @ U.conj().T]])
        K = k_generator(r, s, 2)
        E = sla.expm(1j * K)
        worst_block = max(worst_block, np.max(np.abs(E - ref)))
        ch = dmesub(prepare_upsilon(r, s, 2).matrix, 0.25, 2.0)
        dd = diamond_distance(ch, unitary_channel(E), exact=False)
        # 16-dim channels: certified upper bound from a dual feasible point
        worst_dd = max(worst_dd, dd.upper_bound)
    note(f"block err {worst_block:.1e}, diamond ≤ {worst_dd:.3e}")
    assert worst_block <= 1e-9
    assert worst_dd <= 0.25
    clk.check()


@pytest.mark.criterion(7, "purified sample access, fidelity mode")
def test_criterion_07_sample_fidelity(note):
    clk = Clock(600)
    rng = np.random.default_rng(707)
    delta = 0.2
    worst = np.inf
    for _ in range(30):
        r, s = random_pair(rng, 2)
        led = ResourceLedger()
        res = uh.uhlmann_purified_sample(r, s, delta, "fidelity", ledger=led, dims=(2, 2))
        F = fidelity_oracle(reduced_A(r, 2, 2), reduced_A(s, 2, 2))
        out = res.output.apply(np.outer(r, r.conj()))
        achieved = float(np.real(np.vdot(s, out @ s)))
        assert abs(achieved - res.fidelity_achieved) <= 1e-9
        worst = min(worst, achieved - (F - delta))
        s_min, rank = smin_rank(reduced_A(r, 2, 2), reduced_A(s, 2, 2))
        d1 = Fraction(str(delta)) / 8
        beta = min(max(2 * s_min, float(d1) / rank) / math.pi, 1.0)
        u = min_odd_degree(beta, float(d1))
        m = math.ceil(4 * 2 ** 2 * 2 * u / Fraction(str(delta)))  # 4t²/δ₂, δ₂ = δ/(2u), t = 2
        assert (res.params["u"], res.params["m"], res.params["w"]) == (u, m, u * m)
        assert led.samples["rho"] == u * m
    note(f"min slack {worst:.3e}")
    assert worst >= 0
    clk.check()


@pytest.mark.criterion(8, "canonical purification from samples")
def test_criterion_08_canonical_purification(note):
    clk = Clock(300)
    plus = np.array([1, 1]) / math.sqrt(2)
    cases = {"pure |0>": np.diag([1.0, 0.0]), "pure |+>": np.outer(plus, plus),
             "I/2": np.eye(2) / 2, "diag(0.3,0.7)": np.diag([0.3, 0.7])}
    msgs = []
    for name, w in cases.items():
        st = uh.canonical_purification_alg(w, 0.2)
        exact = np.kron(sqrtm_h(w), np.eye(2)) @ np.eye(2).reshape(-1)
        err = trace_distance(st.matrix, np.outer(exact, exact.conj()))
        msgs.append(f"{name} {err:.3e}")
        assert err <= 0.2
    note(", ".join(msgs))
    clk.check()


@pytest.mark.criterion(9, "mixed sample access and the variant on A")
def test_criterion_09_mixed_and_variant(note):
    clk = Clock(900)
    rng = np.random.default_rng(909)
    delta = 0.25
    worst3, worst5, ratio = np.inf, np.inf, 0.0
    for _ in range(20):
        a, b = random_density(2, rng), random_density(2, rng)
        assert min(np.linalg.eigvalsh(a).min(), np.linalg.eigvalsh(b).min()) > 0
        F = fidelity_oracle(a, b)
        r3 = uh.uhlmann_mixed_sample(a, b, delta)
        r5 = uh.variant_uhlmann_mixed(a, b, delta)
        worst3 = min(worst3, r3.fidelity_achieved - (F - delta))
        worst5 = min(worst5, r5.fidelity_achieved - (F - delta))
        assert r5.params["zeta"] < r3.params["zeta"]
        ratio = max(ratio, r5.params["zeta"] / r3.params["zeta"])
    note(f"min slack {worst3:.3e} / {worst5:.3e}, max ζ5/ζ3 {ratio:.1e}")
    assert worst3 >= 0 and worst5 >= 0
    clk.check()


@pytest.mark.criterion(10, "fidelity estimation in all three access models")
def test_criterion_10_fidelity_estimation(note):
    clk = Clock(900)
    rng = np.random.default_rng(1010)
    msgs = []
    for model, delta in (("purified-query", 0.1), ("purified-sample", 0.2), ("mixed-sample", 0.2)):
        worst = 1.0
        for _ in range(30):
            if model == "mixed-sample":
                a, b = random_density(2, rng), random_density(2, rng)
                inputs, target = (a, b), math.sqrt(fidelity_oracle(a, b))
            else:
                r, s = random_pair(rng, 2)
                inputs = (r, s)
                target = math.sqrt(fidelity_oracle(reduced_A(r, 2, 2), reduced_A(s, 2, 2)))
            rec = app.fidelity_estimate(inputs, delta, model, dims=(2, 2))
            assert abs(rec.target - target) <= 1e-9
            # success mass recomputed from the returned QPE law
            est = rec.plan.estimates()
            succ = float(rec.distribution[np.abs(est - target) <= delta].sum())
            assert abs(succ - rec.success_probability) <= 1e-9
            lb = succ if rec.success_lower_bound is None else rec.success_lower_bound
            worst = min(worst, succ, lb)
        msgs.append(f"{model} min P {worst:.3f}")
        assert worst >= 2 / 3
    note(", ".join(msgs))
    clk.check()


@pytest.mark.criterion(11, "Petz recovery: Uhlmann route against the direct formula")
def test_criterion_11_petz(note):
    clk = Clock(600)
    eps = 0.3
    sigma = np.eye(2) / 2
    msgs = []
    for name, F in (("amplitude-damping(0.3)", amplitude_damping(0.3)), ("dephasing(0.5)", dephasing(0.5))):
        Rd = app.petz_recovery(F, sigma, "direct")
        Ru = app.petz_recovery(F, sigma, "uhlmann", epsilon=eps)
        rng = np.random.default_rng(1111)
        worst = 0.0
        for k in range(500):
            if k % 2:
                Y = random_density(2, rng)
            else:
                v = random_pure(2, rng)
                Y = np.outer(v, v.conj())
            worst = max(worst, trace_distance(Rd.apply(Y), Ru.apply(Y)))
        msgs.append(f"{name} {worst:.2e}")
        assert worst <= eps
    rng = np.random.default_rng(1112)
    inv = 0.0
    for _ in range(20):
        U = random_unitary(2, rng)
        R = app.petz_recovery(unitary_channel(U), random_density(2, rng), "direct")
        X = random_density(2, rng)
        inv = max(inv, trace_distance(R.apply(U @ X @ U.conj().T), X))
    msgs.append(f"unitary inversion {inv:.1e}")
    assert inv <= 1e-10
    note(", ".join(msgs))
    clk.check()


@pytest.mark.criterion(12, "decoupling demonstrations")
def test_criterion_12_decoupling(note):
    clk = Clock(600)
    delta = 0.1
    ident = app.decoupling_demo("entanglement-transmission", "identity", delta)
    assert ident.fidelity >= 1 - delta
    eras = app.decoupling_demo("entanglement-transmission", "erasure", delta)
    assert eras.epsilon > 0 and eras.fidelity >= 1 - eras.epsilon - delta
    msgs = [f"identity F={ident.fidelity:.3f}",
            f"erasure F={eras.fidelity:.3f} ≥ {1 - eras.epsilon - delta:.3f}"]
    for scen in ("random", "max-entangled"):
        m = app.decoupling_demo("state-merging", scen, delta, seed=12)
        msgs.append(f"merging[{scen}] F={m.fidelity:.3f} ≥ {1 - m.epsilon - delta:.3f}")
        assert m.fidelity >= 1 - m.epsilon - delta
    note(", ".join(msgs))
    clk.check()


@pytest.mark.criterion(13, "inequality property suites (1000 instances each)")
def test_criterion_13_inequality_suites(note):
    clk = Clock(120)
    rng = np.random.default_rng(1313)
    N, tol = 1000, 1e-8
    suites = ("fuchs-van de graaf", "powers-størmer", "exponential robustness",
              "min singular product", "qsvt robustness", "block-encoding robustness",
              "block-encoding product")
    worst = dict.fromkeys(suites, -np.inf)
    count = dict.fromkeys(suites, 0)

    def bump(key, v):
        worst[key] = max(worst[key], v)
        count[key] += 1

    k = -1
    while min(count.values()) < N:
        k += 1
        d = 2 + k % 3
        a, b = random_density(d, rng), random_density(d, rng)
        F, sF = fidelity_pair(a, b)
        T = 0.5 * np.sum(np.abs(np.linalg.eigvalsh(a - b)))
        bump("fuchs-van de graaf", max(1 - sF - T, T - math.sqrt(max(0.0, 1 - F))))
        H1 = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        H2 = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        M1, M2 = H1 @ H1.conj().T, H2 @ H2.conj().T  # PSD so the square roots are defined
        lhs = np.linalg.norm(sqrtm_h(M1) - sqrtm_h(M2))
        bump("powers-størmer", lhs - math.sqrt(np.sum(np.abs(np.linalg.eigvalsh(M1 - M2)))))

        A, B = (H1 + H1.conj().T) / 2, (H2 + H2.conj().T) / 2
        t = rng.uniform(-5, 5)
        lhs = op_norm(sla.expm(1j * t * A) - sla.expm(1j * t * B))
        bump("exponential robustness", lhs - abs(t) * op_norm(A - B))

        # rank-deficient pair with im B inside supp A
        ra = int(rng.integers(1, d + 1))
        X = rng.standard_normal((d, ra)) + 1j * rng.standard_normal((d, ra))
        Y = rng.standard_normal((ra, d)) + 1j * rng.standard_normal((ra, d))
        Am = X @ Y
        Pa = np.linalg.pinv(Am) @ Am  # projector onto supp A (row space)
        Bm = Pa @ (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
        if rng.random() < 0.5:
            Bm = Bm @ np.diag(rng.uniform(0, 1, d) > 0.3)

        def smin(M):
            s = np.linalg.svd(M, compute_uv=False)
            nz = s[s > 1e-9 * max(s.max(), 1e-300)]
            return nz.min() if nz.size else np.inf

        if np.isfinite(smin(Bm)):
            bump("min singular product", smin(Am) * smin(Bm) - smin(Am @ Bm))

        # QSVT robustness
        n = 3
        C = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        C = 0.7 * C / (op_norm(C) * (1 + rng.random()))
        E = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        Ct = C + rng.uniform(1e-4, 1e-2) * E / op_norm(E)
        avg = op_norm((C + Ct) / 2)
        if op_norm(Ct) <= 1 and op_norm(C - Ct) + avg ** 2 <= 1:
            P = SIGN_P
            bound = P.effective_degree * math.sqrt(2 / (1 - avg ** 2)) * op_norm(C - Ct)
            bump("qsvt robustness", op_norm(poly_sv(P, C) - poly_sv(P, Ct)) - bound)
            bump("block-encoding robustness",
                 op_norm(dilate_contraction(C) - dilate_contraction(Ct))
                 - math.sqrt(2 / (1 - avg ** 2)) * op_norm(C - Ct))

        # product of block encodings
        al1, al2 = rng.uniform(1, 3, 2)
        e1, e2 = rng.uniform(0, 0.05, 2)
        A1 = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        A2 = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        A1, A2 = A1 / (1.2 * op_norm(A1)), A2 / (1.2 * op_norm(A2))
        G1 = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        G2 = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        M1 = al1 * A1 + 0.999 * e1 * G1 / op_norm(G1)
        M2 = al2 * A2 + 0.999 * e2 * G2 / op_norm(G2)
        be = product_encodings(BlockEncoding.from_contraction(A1, M1, al1, e1),
                               BlockEncoding.from_contraction(A2, M2, al2, e2))
        assert abs(be.eps - (al1 * e2 + al2 * e1)) <= 1e-15 and abs(be.alpha - al1 * al2) <= 1e-12
        # block read straight off the composite unitary: flags (f1, f2) = (0, 0)
        blk = be.unitary.reshape(2, 2, 2, 2, 2, 2)[0, 0, :, 0, 0, :]
        bump("block-encoding product", op_norm(M1 @ M2 - be.alpha * blk) - be.eps)

    note(", ".join(f"{k} {worst[k]:+.1e} (n={count[k]})" for k in suites))
    for key in suites:
        assert count[key] >= N
        assert worst[key] <= tol, f"{key}: violation {worst[key]:.3e}"
    clk.check()


SIGN_P = synthesize_sign_polynomial(0.3, 0.1)
