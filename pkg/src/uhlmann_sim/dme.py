"""Density matrix exponentiation and its controlled ±swap variant.

One DME round adjoins a fresh sample, applies a partial swap e^{±iΔt F}
and discards the sample. On the target this is the superoperator

    X -> c² X + i c s [ξ₀ - ξ₁, X] + s² tr(X) (ξ₀ + ξ₁),   c, s = cos Δt, sin Δt

where the sample is |0><0|⊗ξ₀ + |1><1|⊗ξ₁ and the control picks the sign
of Δt (plain DME is ξ₁ = 0). The m-round channel is the m-th power of
this matrix, taken by repeated squaring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .linalg import (
    DimLayout,
    dag,
    embed_operator,
    expm_hermitian,
    hermitize,
    op_norm,
    partial_trace,
    partial_trace_offdiag,
    swap_operator,
)
from .states import DensityMatrix, QuantumChannel, as_density


def ceil_safe(x, rel=1e-12):
    """ceil that ignores float noise, so 16/0.1 gives 160 and not 161."""
    r = round(x)
    if abs(x - r) <= rel * max(1.0, abs(x)):
        return int(r)
    return int(math.ceil(x))


def dme_steps(t, delta):
    """m = ⌈4t²/δ⌉."""
    return ceil_safe(4 * t * t / delta)


@dataclass(frozen=True)
class DmePlan:
    t: float
    delta: float
    direction: str = "forward"

    def __post_init__(self):
        if self.direction not in ("forward", "inverse"):
            raise ValueError("direction is 'forward' or 'inverse'")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.t < self.delta / 4 * (1 - 1e-12):
            raise ValueError(f"t = {self.t} is below delta/4 = {self.delta / 4}")

    @property
    def m(self):
        return dme_steps(self.t, self.delta)

    @property
    def step(self):
        sign = 1.0 if self.direction == "forward" else -1.0
        return sign * self.t / self.m


# ---------------------------------------------------------------------------
# superoperators


def commutator_superop(K):
    """ad_K as a row-major superoperator: vec([K, X])."""
    d = K.shape[0]
    I = np.eye(d)
    return np.kron(K, I) - np.kron(I, K.T)


def partial_swap_superop(xi0, xi1, dt):
    """One controlled ±swap round with sample |0><0|⊗ξ₀ + |1><1|⊗ξ₁."""
    xi0 = np.asarray(xi0, dtype=complex)
    xi1 = np.asarray(xi1, dtype=complex)
    d = xi0.shape[0]
    c, s = math.cos(dt), math.sin(dt)
    omega = xi0 + xi1
    norm = np.trace(omega).real
    vec_I = np.eye(d).reshape(-1)
    S = c * c * norm * np.eye(d * d, dtype=complex)
    S = S + 1j * c * s * commutator_superop(xi0 - xi1)
    S = S + s * s * np.outer(omega.reshape(-1), vec_I)
    return S


def superop_power(S, m):
    return np.linalg.matrix_power(S, int(m))


def partial_swap_increment(xi0, xi1, dt):
    """S₁ - I for one round, formed without the c² - 1 cancellation."""
    xi0 = np.asarray(xi0, dtype=complex)
    xi1 = np.asarray(xi1, dtype=complex)
    d = xi0.shape[0]
    c, s = math.cos(dt), math.sin(dt)
    omega = xi0 + xi1
    norm = np.trace(omega).real
    vec_I = np.eye(d).reshape(-1)
    # the sample has unit trace; rounding in tr(ω) would otherwise be
    # amplified m-fold by the power
    E = -s * s * np.eye(d * d, dtype=complex)
    E = E + 1j * c * s * commutator_superop(xi0 - xi1)
    return E + s * s * np.outer((omega / norm).reshape(-1), vec_I)


def dme_branch_operator(xi, dt, m):
    """(cos Δt I + i sin Δt ξ)^m: what a register coherence picks up when
    only the ket branch runs the controlled partial swaps."""
    xi = np.asarray(xi, dtype=complex)
    c, s = math.cos(dt), math.sin(dt)
    step = c * np.eye(xi.shape[0]) + 1j * s * xi / np.trace(xi).real
    return np.linalg.matrix_power(step, int(m))


def partial_swap_power(xi0, xi1, dt, m):
    """m rounds of :func:`partial_swap_superop`.

    For small steps the m-th power is exp(m log(I + E)) with the log taken
    from its series; repeated squaring of I + E would lose about m ulps,
    which matters once m reaches 1e8 and more.
    """
    m = int(m)
    E = partial_swap_increment(xi0, xi1, dt)
    e = op_norm(E)
    if e > 1e-3:
        return superop_power(np.eye(E.shape[0]) + E, m)
    L = np.zeros_like(E)
    term = np.eye(E.shape[0], dtype=complex)
    k = 1
    while True:
        term = term @ E
        L = L + ((-1) ** (k + 1) / k) * term
        if e ** (k + 1) < 1e-20 * max(e, 1e-300):
            break
        k += 1
    return expm(m * L)


def apply_superop(S, X):
    d = X.shape[0]
    return (S @ X.reshape(-1)).reshape(d, d)


def apply_superop_on(S, rho, d_sys, d_rest):
    """Apply a d_sys-level superoperator to the leading factor of ``rho``."""
    T = rho.reshape(d_sys, d_rest, d_sys, d_rest).transpose(0, 2, 1, 3)
    T = (S @ T.reshape(d_sys * d_sys, d_rest * d_rest)).reshape(d_sys, d_sys, d_rest, d_rest)
    return T.transpose(0, 2, 1, 3).reshape(rho.shape)


def unitary_superop(U):
    return np.kron(U, U.conj())


def superop_channel(S, d, name):
    ch = QuantumChannel.from_function(lambda r: apply_superop(S, np.asarray(r, dtype=complex)),
                                      d, d, name=name)
    ch.superop_matrix = S
    return ch


def partial_swap_step_literal(X, xi0, xi1, dt):
    """Literal round: adjoin the sample, controlled e^{±iΔtF}, trace the sample.

    Used as the independent route against :func:`partial_swap_superop`.
    """
    d = X.shape[0]
    F = swap_operator(d)
    Up = expm_hermitian(F, dt)
    Um = expm_hermitian(F, -dt)
    out = np.zeros_like(X, dtype=complex)
    for xi, U in ((xi0, Up), (xi1, Um)):
        big = U @ np.kron(xi, X) @ dag(U)
        out += partial_trace(big, [("s", d), ("t", d)], ["s"])
    return out


# ---------------------------------------------------------------------------
# public operations


def dme_exponentiate(samples, plan, ledger=None, name="rho"):
    """Channel approximating X -> e^{±itρ} X e^{∓itρ} from m samples of ρ."""
    rho = as_density(samples)
    d = rho.shape[0]
    m = plan.m
    S = partial_swap_power(rho, np.zeros_like(rho), plan.step, m)
    if ledger is not None:
        ledger.add_samples(name, m)
        ledger.set_param("dme_m", m)
    ch = superop_channel(S, d, f"DME(t={plan.t}, m={m})")
    ch.plan = plan
    return ch


def split_controlled(upsilon, tol=1e-9):
    """Blocks (ξ₀, ξ₁) of |0><0|⊗ξ₀ + |1><1|⊗ξ₁, validating the form."""
    U = np.asarray(upsilon.matrix if hasattr(upsilon, "matrix") else upsilon, dtype=complex)
    n = U.shape[0] // 2
    if U.shape[0] != 2 * n:
        raise ValueError("control factor must be a qubit")
    xi0, xi1 = U[:n, :n], U[n:, n:]
    off = max(np.max(np.abs(U[:n, n:])), np.max(np.abs(U[n:, :n])))
    if off > tol:
        raise ValueError(f"not block diagonal in the control (off-block {off:.2e})")
    if abs(np.trace(xi0).real + np.trace(xi1).real - 1) > tol:
        raise ValueError("block traces do not sum to one")
    return xi0, xi1


def dmesub_superop(upsilon, t, m, direction="forward"):
    xi0, xi1 = split_controlled(upsilon)
    sign = 1.0 if direction == "forward" else -1.0
    return partial_swap_power(xi0, xi1, sign * t / m, m)


def dmesub(upsilon, delta, t, direction="forward", ledger=None, name="Upsilon"):
    """Channel approximating e^{±it(ξ₀-ξ₁)}(·)e^{∓it(ξ₀-ξ₁)} within δ (diamond)."""
    plan = DmePlan(t, delta, direction)
    S = dmesub_superop(upsilon, t, plan.m, direction)
    if ledger is not None:
        ledger.add_samples(name, plan.m)
    d = S.shape[0]
    ch = superop_channel(S, int(round(math.sqrt(d))), f"DMESUB(t={t}, m={plan.m}, {direction})")
    ch.plan = plan
    return ch


# ---------------------------------------------------------------------------
# the Υ state


def _density_on(x, d):
    M = as_density(x)
    if M.shape != (d, d):
        raise ValueError(f"expected a state of dimension {d}, got {M.shape}")
    return M


def prepare_upsilon(rho, sigma, dA, dB=None):
    """Simulate the Υ-preparation circuit gate by gate.

    Registers C1 C2 C3 start in |0>; ρ sits on A1B1 and σ on A2B2 (pure or
    mixed). Gates: H on C1, CNOT C1→C2, H on C3, swap A1B1↔A2B2 when C3 is
    |0>, CZ on C2 C3. C1 and A2 are traced out, leaving C2 C3 A1 B1 B2.
    """
    dB = dA if dB is None else dB
    n = dA * dB
    r = _density_on(rho, n)
    s = _density_on(sigma, n)
    lay = DimLayout([("C1", 2), ("C2", 2), ("C3", 2), ("A1", dA), ("B1", dB), ("A2", dA), ("B2", dB)])
    ket0 = np.array([[1, 0], [0, 0]], dtype=complex)
    state = np.kron(np.kron(np.kron(ket0, ket0), ket0), np.kron(r, s))
    H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
    CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
    CZ = np.diag([1, 1, 1, -1]).astype(complex)
    P0 = np.diag([1, 0]).astype(complex)
    P1 = np.diag([0, 1]).astype(complex)
    cswap = np.kron(P0, swap_operator(n)) + np.kron(P1, np.eye(n * n))
    # the swap acts on (A1 B1) ↔ (A2 B2), which is contiguous in this layout
    gates = [
        embed_operator(H, lay, ["C1"]),
        embed_operator(CNOT, lay, ["C1", "C2"]),
        embed_operator(H, lay, ["C3"]),
        embed_operator(cswap, lay, ["C3", "A1", "B1", "A2", "B2"]),
        embed_operator(CZ, lay, ["C2", "C3"]),
    ]
    for G in gates:
        state = G @ state @ dag(G)
    out = partial_trace(state, lay, ["C1", "A2"])
    out_lay = DimLayout([("C2", 2), ("C3", 2), ("A1", dA), ("B1", dB), ("B2", dB)])
    return DensityMatrix(hermitize(out), out_lay)


def coherence_block(rho, sigma, dA, dB=None):
    """L = tr_{A2}[(ρ ⊗ σ) F] on A1B1B2; equals |ρ><σ| ⊗ tr_A[|σ><ρ|] for pure inputs."""
    dB = dA if dB is None else dB
    n = dA * dB
    r = _density_on(rho, n)
    s = _density_on(sigma, n)
    big = np.kron(r, s) @ swap_operator(n)
    lay = [("A1", dA), ("B1", dB), ("A2", dA), ("B2", dB)]
    return partial_trace(big, lay, ["A2"])


def xi_closed_form(rho, sigma, dA, dB=None):
    """ξ on C3 A1 B1 B2 from its 2x2 block form."""
    dB = dA if dB is None else dB
    n = dA * dB
    r = _density_on(rho, n)
    s = _density_on(sigma, n)
    lay = [("A", dA), ("B", dB)]
    rB = partial_trace(r, lay, ["A"])
    sB = partial_trace(s, lay, ["A"])
    L = coherence_block(r, s, dA, dB)
    top = np.kron(s, rB)
    bot = np.kron(r, sB)
    return 0.5 * np.block([[top, dag(L)], [L, bot]])


def k_generator(rho, sigma, dA, dB=None):
    """K = ξ - ZξZ = [[0, L^†], [L, 0]] on C Â B̂ B."""
    L = coherence_block(rho, sigma, dA, dB)
    Z = np.zeros_like(L)
    return np.block([[Z, dag(L)], [L, Z]])


def sin_cos_blocks(L):
    """(cos^{SV}(L), sin^{SV}(L), cos^{SV}(L^†), sin^{SV}(L^†))."""
    U, s, Vh = np.linalg.svd(L)
    V = dag(Vh)
    cosR = V @ np.diag(np.cos(s)) @ Vh
    cosL = U @ np.diag(np.cos(s)) @ dag(U)
    sinL = U @ np.diag(np.sin(s)) @ Vh
    return cosR, sinL, cosL, dag(sinL)


def ideal_u2(rho, sigma, dA, dB=None):
    """U₂ = -iX e^{iK}: its C = |0> block is sin^{SV}(L)."""
    K = k_generator(rho, sigma, dA, dB)
    n = K.shape[0] // 2
    X = np.kron(np.array([[0, 1], [1, 0]]), np.eye(n))
    return -1j * X @ expm_hermitian(K, 1.0)
