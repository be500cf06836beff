"""Uhlmann transformations: the exact oracle and the five approximate algorithms.

Conventions. A purification |ψ> lives on A ⊗ B with A first. Fidelities are
squared, F = ||√ρ√σ||₁². Every algorithm returns an :class:`UhlmannResult`
carrying the output object, the branch parameters, the resource ledger and
the achieved guarantee.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .dme import (
    ceil_safe,
    partial_swap_power,
    prepare_upsilon,
    split_controlled,
    superop_power,
    apply_superop_on,
    unitary_superop,
)
from .ledger import ResourceLedger
from .linalg import (
    DimLayout,
    dag,
    dilate_contraction,
    embed_operator,
    op_norm,
    partial_trace,
    partial_trace_offdiag,
    permute_systems,
    poly_sv,
    psd_sqrt,
    sign_sv,
    trace_norm,
    hermitize,
)
from .metrics import diamond_distance, fidelity_pair, isometry_diamond_distance, spectrum_stats
from .polynomials import sign_degree, synthesize_sign_polynomial, synthesize_sqrt_polynomial
from .qsp import reflection_phases
from .qsvt import BlockEncoding, build_purified_difference_encoding, product_encodings, qsvt_apply
from .states import (
    DensityMatrix,
    QuantumChannel,
    StatePrepOracle,
    as_density,
    as_vector,
    canonical_purification_exact,
    max_entangled,
)

# DMESUB evolution time inside the sample-access algorithms
DMESUB_T = 2.0


class AccuracyMode:
    """Which guarantee an algorithm targets: diamond distance or fidelity."""

    DIAMOND = "diamond"
    FIDELITY = "fidelity"
    _aliases = {"diamond": "diamond", "⋄": "diamond", "d": "diamond",
                "fidelity": "fidelity", "f": "fidelity", "F": "fidelity"}

    def __init__(self, mode="fidelity"):
        if isinstance(mode, AccuracyMode):
            mode = mode.mode
        key = mode if mode in self._aliases else str(mode).lower()
        if key not in self._aliases:
            raise ValueError(f"unknown accuracy mode {mode!r}")
        self.mode = self._aliases[key]

    @property
    def is_diamond(self):
        return self.mode == self.DIAMOND

    def __eq__(self, other):
        try:
            return self.mode == AccuracyMode(other).mode
        except ValueError:
            return False

    def __hash__(self):
        return hash(self.mode)

    def __repr__(self):
        return f"AccuracyMode({self.mode!r})"

    def __str__(self):
        return self.mode


@dataclass
class UhlmannResult:
    algorithm: str
    mode: str
    delta: float
    params: dict
    ledger: ResourceLedger
    fidelity_target: float | None = None
    fidelity_achieved: float | None = None
    diamond: float | None = None
    output: object = None
    flags: list = field(default_factory=list)

    @property
    def guarantee_ok(self):
        if self.mode == AccuracyMode.DIAMOND and self.diamond is not None:
            return self.diamond <= self.delta + 1e-9
        if self.fidelity_achieved is None:
            return None
        return self.fidelity_achieved >= self.fidelity_target - self.delta - 1e-12

    def to_dict(self):
        return {
            "algorithm": self.algorithm,
            "mode": self.mode,
            "delta": self.delta,
            "params": _jsonable(self.params),
            "fidelity_target": self.fidelity_target,
            "fidelity_achieved": self.fidelity_achieved,
            "diamond": self.diamond,
            "guarantee_ok": self.guarantee_ok,
            "flags": list(self.flags),
            "ledger": self.ledger.to_dict(),
        }


def _jsonable(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, (np.floating, np.integer)):
            v = v.item()
        if isinstance(v, (int, float, str, bool)) or v is None:
            out[k] = v
        elif isinstance(v, dict):
            out[k] = _jsonable(v)
        elif isinstance(v, (list, tuple)):
            out[k] = [x.item() if isinstance(x, (np.floating, np.integer)) else x for x in v]
    return out


# ---------------------------------------------------------------------------
# helpers


def _split_dims(psi, dims):
    if dims is not None:
        return int(dims[0]), int(dims[1])
    lay = getattr(psi, "layout", None)
    if lay is not None and len(lay.dims) == 2:
        return lay.dims[0], lay.dims[1]
    n = np.asarray(as_vector(psi) if np.ndim(psi) == 1 or hasattr(psi, "vector") else psi).shape[0]
    d = int(round(math.sqrt(n)))
    if d * d != n:
        raise ValueError("cannot infer A ⊗ B dimensions; pass dims=(dA, dB)")
    return d, d


def reduced_A(psi, dA, dB):
    v = np.asarray(as_vector(psi)).reshape(dA, dB)
    return v @ dag(v)


def reduced_B(psi, dA, dB):
    v = np.asarray(as_vector(psi)).reshape(dA, dB)
    return (dag(v) @ v).T


def uhlmann_operator(rho_vec, sigma_vec, dA, dB):
    """M = tr_A[|σ><ρ|] as an operator on B."""
    r = np.asarray(rho_vec).reshape(dA, dB)
    s = np.asarray(sigma_vec).reshape(dA, dB)
    return s.T @ r.conj()


def _stats(rho_A, sigma_A, s_min, r):
    st = spectrum_stats(rho_A, sigma_A)
    s = st.s_min if s_min is None else s_min
    rank = st.r if r is None else r
    return st, s, rank


@lru_cache(maxsize=256)
def sign_polynomial(beta, delta):
    return synthesize_sign_polynomial(beta, delta)


@lru_cache(maxsize=256)
def sign_phases(beta, delta):
    P = sign_polynomial(beta, delta)
    return reflection_phases(P.coefficients)


@lru_cache(maxsize=256)
def sqrt_polynomial(m_min, delta):
    return synthesize_sqrt_polynomial(m_min, delta)


def _apply_isometry_on_B(col, psi, dA, dB, d_flag):
    """(I_A ⊗ col)|ψ> with col: B -> flag ⊗ B; returns array (d_flag, dA, dB)."""
    v = np.asarray(psi).reshape(dA, dB)
    C = col.reshape(d_flag, dB, dB)
    return np.einsum("fij,aj->fai", C, v)


def _fidelity_after(col, psi_rho, psi_sigma, dA, dB, d_flag):
    out = _apply_isometry_on_B(col, psi_rho, dA, dB, d_flag)
    s = np.asarray(psi_sigma).reshape(dA, dB)
    amps = np.einsum("ai,fai->f", s.conj(), out)
    return float(np.sum(np.abs(amps) ** 2))


# ---------------------------------------------------------------------------
# exact oracle


def exact_uhlmann_isometry(rho_pure, sigma_pure, dims=None):
    """V^B = sgn^{SV}(tr_A[|σ><ρ|]); F(V|ρ>, |σ>) equals F(ρ^A, σ^A)."""
    dA, dB = _split_dims(rho_pure, dims)
    r = as_vector(rho_pure)
    s = as_vector(sigma_pure)
    if r.shape != s.shape or r.size != dA * dB:
        raise ValueError("purifications must share the A ⊗ B layout")
    return sign_sv(uhlmann_operator(r, s, dA, dB))


def uhlmann_fidelity_check(rho_pure, sigma_pure, dims=None):
    """(F(V|ρ>, |σ>), F(ρ^A, σ^A)) for the exact oracle."""
    dA, dB = _split_dims(rho_pure, dims)
    r, s = as_vector(rho_pure), as_vector(sigma_pure)
    V = exact_uhlmann_isometry(r, s, (dA, dB))
    out = np.kron(np.eye(dA), V) @ r
    F_after = abs(np.vdot(s, out)) ** 2
    F_exact = fidelity_pair(reduced_A(r, dA, dB), reduced_A(s, dA, dB))[0]
    return float(F_after), float(F_exact)


# ---------------------------------------------------------------------------
# branch parameters (pure functions so they can be checked on their own)


def alg1_params(s_min, r, delta, mode):
    mode = AccuracyMode(mode)
    if mode.is_diamond:
        if s_min is None:
            raise ValueError("diamond mode needs s_min")
        d1, beta = (delta / 3) ** 2, s_min
    else:
        d1 = delta / 4
        beta = max(s_min or 0.0, d1 / (2 * r))
    beta = min(beta, 1.0)
    return {"delta1": d1, "beta": beta, "u": sign_degree(beta, d1)}


def alg2_params(s_min, r, delta, mode):
    mode = AccuracyMode(mode)
    if mode.is_diamond:
        if s_min is None:
            raise ValueError("diamond mode needs s_min")
        d1, beta = (delta / 6) ** 2, 2 * s_min / math.pi
    else:
        d1 = delta / 8
        beta = max(2 * (s_min or 0.0), d1 / r) / math.pi
    beta = min(beta, 1.0)
    u = sign_degree(beta, d1)
    d2 = delta / (2 * u)
    m = ceil_safe(4 * DMESUB_T ** 2 / d2)
    return {"delta1": d1, "beta": beta, "u": u, "delta2": d2, "m": m, "w": u * m}


def alg3_params(s_min, r, delta, mode):
    mode = AccuracyMode(mode)
    if mode.is_diamond:
        d3, beta = (delta / 12) ** 2, 2 * s_min / math.pi
    else:
        d3 = delta / 16
        beta = max(2 * (s_min or 0.0), d3 / r) / math.pi
    beta = min(beta, 1.0)
    u = sign_degree(beta, d3)
    d1 = delta / (2 * (4 * u + 1))
    inner = alg2_params(s_min, r, delta / 2, mode)
    return {"delta3": d3, "beta": beta, "u": u, "delta1": d1, "inner": inner}


def alg4_params(dA, delta):
    d2 = (delta / 6) ** 2
    beta = 1 / (2 * math.sqrt(2 * dA))
    u = sign_degree(beta, d2)
    return {"delta2": d2, "beta": beta, "u": u, "sqrt_delta": delta / (2 * u)}


def sqrt_params(omega_min, delta):
    """BlockEncSqrtState parameters: δ₂ = δ/4, δ₁ = δ/(2l), y, h = y·l."""
    d2 = delta / 4
    R = sqrt_polynomial(omega_min / 2, d2)
    l = R.degree
    d1 = delta / (2 * l)
    y = int(math.ceil((1 / d1) * math.log(1 / d1) ** 2))
    return {"delta2": d2, "l": l, "delta1": d1, "y": y, "h": y * l, "m_min": omega_min / 2}


def alg5_params(s_min, r, delta, mode):
    mode = AccuracyMode(mode)
    if mode.is_diamond:
        d2, beta = (delta / 6) ** 2, s_min / 8
    else:
        d2 = delta / 8
        beta = max(s_min or 0.0, d2 / (2 * r)) / 8
    beta = min(beta, 1.0)
    u = sign_degree(beta, d2)
    return {"delta2": d2, "beta": beta, "u": u, "delta1": delta / (4 * u)}


# ---------------------------------------------------------------------------
# purified query access


def _zero_result(name, mode, delta, ledger, F_target, dB):
    ledger.note("r = 0: supports of the marginals are orthogonal; returning the zero transformation")
    U = dilate_contraction(np.zeros((dB, dB)))
    return UhlmannResult(name, str(mode), delta, {"r": 0}, ledger, F_target, 0.0, None, U,
                         ["r=0 zero transformation"])


def uhlmann_purified_query(Urho, Usig, delta, mode="fidelity", ledger=None, s_min=None, r=None,
                           verify=True):
    """Sign-QSVT of W = U_ρ^†(I ⊗ F)U_σ; returns W̃ on (flag ⊗ B) in the result.

    The encoded block is P_sgn^{SV}(tr_Â[|σ><ρ|]). Oracle queries are charged
    through the block encoding: u in total to each of U_ρ and U_σ.
    """
    mode = AccuracyMode(mode)
    ledger = ledger if ledger is not None else ResourceLedger("alg1")
    if not (0 < delta < 1):
        raise ValueError("delta must lie in (0, 1)")
    dA, dB = Urho.layout.dims
    r_vec, s_vec = Urho.state, Usig.state
    rho_A, sig_A = reduced_A(r_vec, dA, dB), reduced_A(s_vec, dA, dB)
    st, smin, rank = _stats(rho_A, sig_A, s_min, r)
    F_target = fidelity_pair(rho_A, sig_A)[0]
    if rank == 0:
        return _zero_result("alg1", mode, delta, ledger, F_target, dB)
    p = alg1_params(smin, rank, delta, mode)
    P = sign_polynomial(p["beta"], p["delta1"])
    be = build_purified_difference_encoding(Urho, Usig)
    out = qsvt_apply(be, P, ledger, label="W")
    p.update({"s_min": smin, "r": rank, "degree": P.degree, "effective_degree": P.effective_degree})
    for k in ("u", "beta", "delta1"):
        ledger.set_param(k, p[k])
    ledger.set_bound(f"queries:{Urho.name}", p["u"])
    ledger.set_bound(f"queries:{Usig.name}", p["u"])
    res = UhlmannResult("alg1", str(mode), delta, p, ledger, F_target, output=out.unitary,
                        flags=list(P.certificate.get("flags", [])))
    res.block_encoding = out
    if verify:
        col = out.unitary[:, :dB]
        res.fidelity_achieved = _fidelity_after(col, r_vec, s_vec, dA, dB, 2)
        if mode.is_diamond:
            res.diamond = alg1_diamond(out.unitary, be.block, dB)
    return res


def alg1_diamond(W_tilde, M, dB, exact=True):
    """½||W̃∘P₀ - U_ideal∘P₀||_⋄ with U_ideal the dilation of sgn^{SV}(M).

    Both sides are isometries B -> flag ⊗ B, so the SDP value is checked
    against the closed form for isometric channels.
    """
    V1 = W_tilde[:, :dB]
    V2 = dilate_contraction(sign_sv(M))[:, :dB]
    closed = isometry_diamond_distance(V1, V2)
    if not exact:
        return closed
    dd = diamond_distance(QuantumChannel.from_isometry(V1, 2 * dB),
                          QuantumChannel.from_isometry(V2, 2 * dB), exact=True)
    if abs(dd.exact - closed) > 1e-5:
        raise AssertionError(f"diamond routes disagree: SDP {dd.exact:.3e}, closed form {closed:.3e}")
    return float(dd.exact)


# ---------------------------------------------------------------------------
# channel-substituted sign QSVT


class ChannelQSVT:
    """A QSVT sequence where U and U^† are replaced by channels G and G_inv.

    The data register's leading qubit is the flag C with Π = Π̃ = |0><0|_C.
    An extra LCU qubit in |+> selects ±Φ, and a final Hadamard on it makes
    the LCU = 0 block the real polynomial. The remaining uses of the degree
    budget beyond the stored phases are inserted as zero-phase G_inv∘G pairs
    right after the first G, so the channel is used ``uses`` times in total.
    """

    def __init__(self, S_G, S_Ginv, phases, uses):
        self.S_G = S_G
        self.S_Ginv = S_Ginv
        self.phases = np.asarray(phases, dtype=float)
        d = self.phases.size
        if d % 2 == 0:
            raise ValueError("odd phase count expected")
        if uses < d or (uses - d) % 2:
            raise ValueError("uses must be at least the phase count and of the same parity")
        self.uses = uses
        k = (uses - d) // 2
        self.S_first = superop_power(S_G @ S_Ginv, k) @ S_G if k else S_G
        self.d_data = int(round(math.sqrt(S_G.shape[0])))

    def apply(self, rho, d_ref):
        """``rho`` on (data ⊗ ref); returns the output on (data ⊗ LCU ⊗ ref)."""
        dd = self.d_data
        plus = np.full((2, 2), 0.5, dtype=complex)
        # insert the LCU qubit between data and ref
        T = rho.reshape(dd, d_ref, dd, d_ref)
        state = np.einsum("aibj,xy->axibyj", T, plus).reshape(dd * 2 * d_ref, dd * 2 * d_ref)
        d_rest = 2 * d_ref
        zc = np.where(np.arange(dd) < dd // 2, 1.0, -1.0)
        zl = np.concatenate([np.ones(d_ref), -np.ones(d_ref)])
        zz = np.outer(zc, zl).reshape(-1)
        d = self.phases.size
        for i in range(d):
            if i == 0:
                S = self.S_first
            else:
                S = self.S_G if i % 2 == 0 else self.S_Ginv
            state = apply_superop_on(S, state, dd, d_rest)
            ph = np.exp(1j * self.phases[d - 1 - i] * zz)
            state = state * np.outer(ph, ph.conj())
        H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
        Hfull = np.kron(np.kron(np.eye(dd), H), np.eye(d_ref))
        return Hfull @ state @ dag(Hfull)


def _upsilon_superops(rho_in, sigma_in, dA, dB, m, t=DMESUB_T):
    """(S_G, S_Ginv) on C Â B̂ B from Υ built out of the given inputs."""
    ups = prepare_upsilon(rho_in, sigma_in, dA, dB).matrix
    xi0, xi1 = split_controlled(ups)
    S_F = partial_swap_power(xi0, xi1, t / m, m)
    S_Finv = partial_swap_power(xi0, xi1, -t / m, m)
    n = xi0.shape[0] // 2
    X = np.kron(np.array([[0, 1], [1, 0]], dtype=complex), np.eye(n))
    SX = unitary_superop(X)
    return SX @ S_F, S_Finv @ SX


def _sample_pipeline(rho_in, sigma_in, aux_sigma, dA, dB, p, ledger, names=("rho", "sigma")):
    P = sign_polynomial(p["beta"], p["delta1"])
    phases = sign_phases(p["beta"], p["delta1"])
    uses = max(p["u"], P.effective_degree)
    S_G, S_Ginv = _upsilon_superops(rho_in, sigma_in, dA, dB, p["m"])
    engine = ChannelQSVT(S_G, S_Ginv, phases, uses)
    ledger.add_channel_uses("G", (uses + 1) // 2)
    ledger.add_channel_uses("G_inv", (uses - 1) // 2)
    ledger.add_samples("Upsilon", uses * p["m"])
    ledger.add_samples(names[0], uses * p["m"])
    ledger.add_samples(names[1], uses * p["m"])
    ledger.add_samples(names[1] + "_aux", 1)
    engine.aux_sigma = as_density(aux_sigma)
    engine.dims = (dA, dB)
    return engine, P


def run_sample_channel(engine, psi_rho_AB):
    """Output of T on (A ⊗ B): input ρ on AB, |0>_C and the aux σ on Â B̂."""
    return _run_raw(engine, as_density(psi_rho_AB))


def _run_raw(engine, rho_AB):
    dA, dB = engine.dims
    # data = (C, Â, B̂, B), reference = A
    lay = DimLayout([("C", 2), ("Ah", dA), ("Bh", dB), ("A", dA), ("B", dB)])
    c0 = np.diag([1.0, 0.0]).astype(complex)
    full = np.kron(np.kron(c0, engine.aux_sigma), rho_AB)
    full = permute_systems(full, lay, ["C", "Ah", "Bh", "B", "A"])
    out = engine.apply(full, dA)
    out_lay = DimLayout([("C", 2), ("Ah", dA), ("Bh", dB), ("B", dB), ("L", 2), ("A", dA)])
    red = partial_trace(out, out_lay, ["C", "Ah", "Bh", "L"])
    return permute_systems(red, [("B", dB), ("A", dA)], ["A", "B"])


def run_sample_full(engine, rho_AB):
    """Full output on (A, B, C, Â, B̂, L) for input ρ on AB; nothing traced."""
    dA, dB = engine.dims
    lay = DimLayout([("C", 2), ("Ah", dA), ("Bh", dB), ("A", dA), ("B", dB)])
    c0 = np.diag([1.0, 0.0]).astype(complex)
    full = np.kron(np.kron(c0, engine.aux_sigma), as_density(rho_AB))
    full = permute_systems(full, lay, ["C", "Ah", "Bh", "B", "A"])
    out = engine.apply(full, dA)
    out_lay = DimLayout([("C", 2), ("Ah", dA), ("Bh", dB), ("B", dB), ("L", 2), ("A", dA)])
    return permute_systems(out, out_lay, ["A", "B", "C", "Ah", "Bh", "L"])


def sample_channel_on_B(engine):
    """Choi matrix (input first) of the induced channel on B alone."""
    dA, dB = engine.dims
    e00 = np.zeros((dA, dA), dtype=complex)
    e00[0, 0] = 1.0
    J = np.zeros((dB * dB, dB * dB), dtype=complex)
    for i in range(dB):
        for j in range(dB):
            Eij = np.zeros((dB, dB), dtype=complex)
            Eij[i, j] = 1.0
            out = _run_raw(engine, np.kron(e00, Eij))
            outB = partial_trace(out, [("A", dA), ("B", dB)], ["A"])
            J += np.kron(Eij, outB)
    return J


def _ideal_sign_choi(M, dB):
    """Choi matrix of X -> tr_flag[W X W^†], W the dilation column of sgn^{SV}(M)."""
    W = dilate_contraction(sign_sv(M))[:, :dB]
    # flag leads in W; the channel wants the environment last
    W = W.reshape(2, dB, dB).transpose(1, 0, 2).reshape(2 * dB, dB)
    ch = QuantumChannel.from_isometry(W, dB)
    return ch.choi_matrix()


def sample_channel(engine):
    """The channel ρ_AB -> T(ρ_AB) as a :class:`QuantumChannel`."""
    dA, dB = engine.dims
    return QuantumChannel.from_function(lambda r: run_sample_channel(engine, r), dA * dB, dA * dB,
                                        name="T")


def uhlmann_purified_sample(rho_pure, sigma_pure, delta, mode="fidelity", ledger=None, dims=None,
                            s_min=None, r=None, verify=True):
    """Channel-substituted sign QSVT driven by DMESUB on samples of Υ."""
    mode = AccuracyMode(mode)
    ledger = ledger if ledger is not None else ResourceLedger("alg2")
    if not (0 < delta < 1):
        raise ValueError("delta must lie in (0, 1)")
    dA, dB = _split_dims(rho_pure, dims)
    r_vec, s_vec = as_vector(rho_pure), as_vector(sigma_pure)
    rho_A, sig_A = reduced_A(r_vec, dA, dB), reduced_A(s_vec, dA, dB)
    st, smin, rank = _stats(rho_A, sig_A, s_min, r)
    F_target = fidelity_pair(rho_A, sig_A)[0]
    if rank == 0:
        return _zero_result("alg2", mode, delta, ledger, F_target, dB)
    p = alg2_params(smin, rank, delta, mode)
    engine, P = _sample_pipeline(r_vec, s_vec, s_vec, dA, dB, p, ledger)
    p.update({"s_min": smin, "r": rank, "effective_degree": P.effective_degree, "t": DMESUB_T})
    for k in ("u", "m", "w", "beta", "delta1", "delta2"):
        ledger.set_param(k, p[k])
    ledger.set_bound("samples:rho", p["w"])
    ledger.set_bound("samples:sigma", p["w"])
    res = UhlmannResult("alg2", str(mode), delta, p, ledger, F_target, output=sample_channel(engine),
                        flags=list(P.certificate.get("flags", [])))
    res.engine = engine
    if verify:
        out = run_sample_channel(engine, r_vec)
        res.fidelity_achieved = float(np.real(np.vdot(s_vec, out @ s_vec)))
        if mode.is_diamond:
            # distance to the noiseless sign-unitary limit, not to the
            # exact Uhlmann channel
            J = sample_channel_on_B(engine)
            J0 = _ideal_sign_choi(uhlmann_operator(r_vec, s_vec, dA, dB), dB)
            res.diamond = diamond_distance(J, J0, dB, dB).exact
            ledger.note("diamond value is measured against the exact sign-unitary channel")
    return res


# ---------------------------------------------------------------------------
# √ω block encoding and canonical purification


def block_enc_sqrt_state(omega, delta, ledger=None, inverse=False, name="omega"):
    """Unitary channel block-encoding R(ω/2) ≈ √ω/(2√2) on (flag ⊗ A).

    The samples-to-block-encoding step for ω/2 is emulated by an exact
    dilation; the square-root polynomial is then applied to its block.
    Charges h = y·l samples of ω.
    """
    w = as_density(omega)
    d = w.shape[0]
    ev = np.linalg.eigvalsh(hermitize(w))
    omega_min = float(ev[ev > 1e-12 * ev.max()].min())
    p = sqrt_params(omega_min, delta)
    R = sqrt_polynomial(p["m_min"], p["delta2"])
    U1 = BlockEncoding.from_contraction(w / 2, target=w / 2)
    U2 = qsvt_apply(U1, R, None)
    target = psd_sqrt(w) / (2 * math.sqrt(2))
    U2.target = target
    U2.eps = p["delta2"]
    err = U2.certificate_error()
    if err > p["delta2"] + 1e-9:
        raise AssertionError(f"sqrt block misses its certificate: {err:.3e}")
    if ledger is not None:
        ledger.add_samples(name, p["h"])
    U = dag(U2.unitary) if inverse else U2.unitary
    ch = QuantumChannel.from_unitary(U, name=("BlockEncSqrtState†" if inverse else "BlockEncSqrtState"))
    ch.block_encoding = U2
    ch.params = p
    ch.certificate_error = err
    return ch


def canonical_purification_alg(omega, delta, ledger=None, name="omega", return_info=False):
    """Approximate |ω_c> = (√ω ⊗ I)|Γ> from samples of ω by sign amplification.

    G = U₂ (I ⊗ U_Φ) has ⟨0_F| G |0_F 0_AB> = (R(ω/2) ⊗ I)|Φ>, a column of
    norm about 1/(2√(2d)); the sign polynomial at β = 1/(2√(2d)) lifts it
    to unit norm. Returns ω̃_c on A ⊗ B.
    """
    w = as_density(omega)
    d = w.shape[0]
    p = alg4_params(d, delta)
    sq = block_enc_sqrt_state(w, p["sqrt_delta"], None, name=name)
    U2 = sq.block_encoding.unitary  # (flag, A) with R(ω/2) in the flag-0 block
    lay = DimLayout([("F", 2), ("A", d), ("B", d)])
    from .linalg import state_prep_unitary

    UPhi = state_prep_unitary(max_entangled(d))
    G = embed_operator(U2, lay, ["F", "A"]) @ embed_operator(UPhi, lay, ["A", "B"])
    be = BlockEncoding(G, DimLayout([("F", 2)]), 1.0, 1, 0.0, np.array([0]), np.arange(d * d))
    P = sign_polynomial(p["beta"], p["delta2"])
    out = qsvt_apply(be, P, None, label="G")
    col = out.block[:, 0]
    rest = max(0.0, 1.0 - float(np.vdot(col, col).real))
    e0 = np.zeros(d * d)
    e0[0] = 1.0
    state = np.outer(col, col.conj()) + rest * np.outer(e0, e0)
    q = sq.params["h"] * P.degree
    if ledger is not None:
        ledger.add_samples(name, q)
        ledger.set_param(f"q_{name}", q)
        ledger.set_param(f"h_{name}", sq.params["h"])
        ledger.set_param(f"u4_{name}", P.degree)
    state = DensityMatrix(hermitize(state), [("A", d), ("B", d)])
    if return_info:
        exact = canonical_purification_exact(w)
        err = 0.5 * trace_norm(state.matrix - np.outer(exact, exact.conj()))
        info = dict(p, q=q, h=sq.params["h"], l=sq.params["l"], y=sq.params["y"],
                    degree=P.degree, error=err)
        return state, info
    return state


# ---------------------------------------------------------------------------
# mixed sample access


def uhlmann_mixed_sample(rho, sigma, delta, mode="fidelity", ledger=None, s_min=None, r=None,
                         verify=True):
    """Canonical purification of both inputs, then the sample algorithm at δ/2.

    The approximate purifications feed Υ (mixed inputs are allowed) and σ̃_c
    is also the auxiliary state on Â B̂. The guarantee is checked on the
    exact canonical purifications.
    """
    mode = AccuracyMode(mode)
    ledger = ledger if ledger is not None else ResourceLedger("alg3")
    rho, sigma = as_density(rho), as_density(sigma)
    d = rho.shape[0]
    st, smin, rank = _stats(rho, sigma, s_min, r)
    F_target = fidelity_pair(rho, sigma)[0]
    if rank == 0:
        return _zero_result("alg3", mode, delta, ledger, F_target, d)
    p = alg3_params(smin, rank, delta, mode)
    sub = ResourceLedger("canonical")
    rho_c, info_r = canonical_purification_alg(rho, p["delta1"], sub, "rho", return_info=True)
    sig_c, info_s = canonical_purification_alg(sigma, p["delta1"], sub, "sigma", return_info=True)
    inner = p["inner"]
    engine, P = _sample_pipeline(rho_c.matrix, sig_c.matrix, sig_c.matrix, d, d, inner, ledger,
                                 names=("rho_c", "sigma_c"))
    uses = max(inner["u"], P.effective_degree)
    # every copy of ρ̃_c (σ̃_c) costs q samples of ρ (σ)
    n_rho = ledger.samples["rho_c"] * info_r["q"]
    n_sig = (ledger.samples["sigma_c"] + ledger.samples["sigma_c_aux"]) * info_s["q"]
    ledger.add_samples("rho", n_rho)
    ledger.add_samples("sigma", n_sig)
    zeta_r = inner["u"] * inner["m"] * info_r["q"]
    zeta_s = inner["u"] * inner["m"] * info_s["q"]
    p.update({"s_min": smin, "r": rank, "q_rho": info_r["q"], "q_sigma": info_s["q"],
              "zeta_rho": zeta_r, "zeta_sigma": zeta_s, "zeta": max(zeta_r, zeta_s),
              "purification_error_rho": info_r["error"], "purification_error_sigma": info_s["error"],
              "uses": uses})
    for k in ("u", "beta", "delta1", "delta3", "zeta"):
        ledger.set_param(k, p[k])
    ledger.set_param("m", inner["m"])
    ledger.set_bound("samples:rho", zeta_r)
    ledger.set_bound("samples:sigma", zeta_s + info_s["q"])
    res = UhlmannResult("alg3", str(mode), delta, p, ledger, F_target, output=sample_channel(engine),
                        flags=list(P.certificate.get("flags", [])))
    res.engine = engine
    res.sigma_c_tilde = sig_c
    if verify:
        rc = canonical_purification_exact(rho)
        sc = canonical_purification_exact(sigma)
        out = run_sample_channel(engine, rc)
        res.fidelity_achieved = float(np.real(np.vdot(sc, out @ sc)))
        if mode.is_diamond:
            J = sample_channel_on_B(engine)
            J0 = _ideal_sign_choi(uhlmann_operator(rc, sc, d, d), d)
            res.diamond = diamond_distance(J, J0, d, d).exact
            ledger.note("diamond value is measured against the exact sign-unitary channel")
    return res


# ---------------------------------------------------------------------------
# variant acting on A


def variant_uhlmann_mixed(rho, sigma, delta, mode="fidelity", ledger=None, s_min=None, r=None,
                          verify=True):
    """V^A = sgn^{SV}(√σ√ρ) from two √-state encodings and one sign QSVT.

    The product of the encodings carries √σ√ρ/8; the sign polynomial uses
    β on that rescaled spectrum. Acts on A of |ρ_c>.
    """
    mode = AccuracyMode(mode)
    ledger = ledger if ledger is not None else ResourceLedger("alg5")
    rho, sigma = as_density(rho), as_density(sigma)
    d = rho.shape[0]
    st, smin, rank = _stats(rho, sigma, s_min, r)
    F_target = fidelity_pair(rho, sigma)[0]
    if rank == 0:
        return _zero_result("alg5", mode, delta, ledger, F_target, d)
    p = alg5_params(smin, rank, delta, mode)
    Fr = block_enc_sqrt_state(rho, p["delta1"], None, name="rho")
    Gs = block_enc_sqrt_state(sigma, p["delta1"], None, name="sigma")
    prod = product_encodings(Gs.block_encoding, Fr.block_encoding)
    P = sign_polynomial(p["beta"], p["delta2"])
    prod.oracle_costs = {"L": (1, 0)}
    out = qsvt_apply(prod, P, ledger, label="L")
    h_r, h_s = Fr.params["h"], Gs.params["h"]
    zeta_r, zeta_s = h_r * P.degree, h_s * P.degree
    ledger.add_samples("rho", zeta_r)
    ledger.add_samples("sigma", zeta_s)
    p.update({"s_min": smin, "r": rank, "h_rho": h_r, "h_sigma": h_s, "zeta_rho": zeta_r,
              "zeta_sigma": zeta_s, "zeta": max(zeta_r, zeta_s), "degree": P.degree,
              "product_eps": prod.eps})
    for k in ("u", "beta", "delta1", "delta2", "zeta"):
        ledger.set_param(k, p[k])
    ledger.set_bound("samples:rho", zeta_r)
    ledger.set_bound("samples:sigma", zeta_s)
    res = UhlmannResult("alg5", str(mode), delta, p, ledger, F_target, output=out.unitary,
                        flags=list(P.certificate.get("flags", [])))
    res.block_encoding = out
    if verify:
        rc = canonical_purification_exact(rho)
        sc = canonical_purification_exact(sigma)
        # act on A: move A last so the helper (which acts on its B slot) applies
        rcT = rc.reshape(d, d).T.reshape(-1)
        scT = sc.reshape(d, d).T.reshape(-1)
        col = out.unitary[:, :d]
        res.fidelity_achieved = _fidelity_after(col, rcT, scT, d, d, 2)
        if mode.is_diamond:
            V = sign_sv(psd_sqrt(sigma) @ psd_sqrt(rho))
            res.diamond = isometry_diamond_distance(col, dilate_contraction(V)[:, :d])
    return res
