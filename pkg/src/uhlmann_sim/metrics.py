"""Fidelity, trace and diamond distances, and spectrum statistics."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, asdict

import numpy as np

from .linalg import SV_CUTOFF, dag, hermitize, psd_sqrt, trace_norm
from .states import QuantumChannel, as_density, max_entangled

# Largest Choi dimension for which the SDP is attempted.
DIAMOND_EXACT_MAX_DIM = 64


def fidelity_pair(rho, sigma):
    """Return ``(F, sqrtF)`` with F = ||sqrt(rho) sqrt(sigma)||_1^2.

    Pure inputs (vectors) are handled without matrix square roots.
    """
    a = np.asarray(rho.vector if hasattr(rho, "vector") else rho)
    b = np.asarray(sigma.vector if hasattr(sigma, "vector") else sigma)
    if a.ndim == 1 and b.ndim == 1:
        s = abs(np.vdot(a, b))
        return float(s * s), float(s)
    if a.ndim == 1 or b.ndim == 1:
        v, M = (a, as_density(sigma)) if a.ndim == 1 else (b, as_density(rho))
        F = float(np.real(np.vdot(v, M @ v)))
        F = min(max(F, 0.0), 1.0)
        return F, float(np.sqrt(F))
    A = psd_sqrt(as_density(rho))
    B = psd_sqrt(as_density(sigma))
    sF = float(np.sum(np.linalg.svd(A @ B, compute_uv=False)))
    sF = min(sF, 1.0)
    return sF * sF, sF


def fidelity(rho, sigma):
    return fidelity_pair(rho, sigma)[0]


def trace_distance(rho, sigma):
    """½||rho - sigma||_1."""
    return 0.5 * trace_norm(as_density(rho) - as_density(sigma))


# ---------------------------------------------------------------------------
# diamond distance


@dataclass
class DiamondResult:
    exact: float | None
    lower_bound: float
    upper_bound: float | None = None

    def __iter__(self):
        return iter((self.exact, self.lower_bound))


def _choi_of(x, d_in=None, d_out=None):
    if isinstance(x, QuantumChannel):
        return x.choi_matrix(), x.d_in, x.d_out
    return np.asarray(x, dtype=complex), d_in, d_out


def diamond_sdp(J, d_in, d_out):
    """½||Φ||_◇ for a Hermitian-preserving, trace-annihilating map with
    unnormalised Choi matrix ``J`` (input factor first).

    Solves  max tr(J W)  s.t.  0 <= W <= rho ⊗ I,  rho a density matrix.
    """
    import cvxpy as cp

    J = hermitize(np.asarray(J, dtype=complex))
    n = d_in * d_out
    W = cp.Variable((n, n), hermitian=True)
    rho = cp.Variable((d_in, d_in), hermitian=True)
    cons = [W >> 0, cp.kron(rho, np.eye(d_out)) - W >> 0, rho >> 0, cp.real(cp.trace(rho)) == 1]
    prob = cp.Problem(cp.Maximize(cp.real(cp.trace(J @ W))), cons)
    with warnings.catch_warnings():
        # "inaccurate" at these tolerances still means a gap far below 1e-6
        warnings.simplefilter("ignore", UserWarning)
        try:
            prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
        except Exception:  # pragma: no cover - fallback solver path
            prob.solve(solver=cp.SCS, eps=1e-9, max_iters=200000)
    return float(max(prob.value, 0.0))


def diamond_lower_bound(J, d_in, d_out):
    """½ trace distance of the outputs on the maximally entangled input."""
    return 0.5 * trace_norm(J / d_in)


def diamond_upper_bound(J, d_in, d_out):
    """½||tr_out |J|||_∞, the dual value at Y₀ = Y₁ = |J|.

    For Hermitian J = P - Q the block matrix [[|J|, -J], [-J, |J|]] is
    [[1,-1],[-1,1]]⊗P + [[1,1],[1,1]]⊗Q >= 0, so the point is dual feasible
    and its value bounds the diamond norm from above.
    """
    w, V = np.linalg.eigh(hermitize(np.asarray(J, dtype=complex)))
    A = (V * np.abs(w)) @ dag(V)
    T = np.trace(A.reshape(d_in, d_out, d_in, d_out), axis1=1, axis2=3)
    return 0.5 * float(np.max(np.linalg.eigvalsh(hermitize(T))))


def diamond_distance(F1, F2, d_in=None, d_out=None, exact=None):
    """Half diamond distance between two channels (or Choi matrices).

    Returns :class:`DiamondResult` with ``exact`` from the SDP when the Choi
    dimension is at most 64, plus a certified bracket: ``lower_bound`` from
    the maximally entangled input and ``upper_bound`` from a dual feasible
    point. ``exact=False`` skips the SDP; ``exact=True`` forces it.
    """
    J1, a1, b1 = _choi_of(F1, d_in, d_out)
    J2, a2, b2 = _choi_of(F2, d_in, d_out)
    if (a1, b1) != (a2, b2) or J1.shape != J2.shape:
        raise ValueError("channel layouts do not match")
    J = J1 - J2
    lb = diamond_lower_bound(J, a1, b1)
    run = (a1 * b1 <= DIAMOND_EXACT_MAX_DIM) if exact is None else exact
    ex = diamond_sdp(J, a1, b1) if run else None
    ub = diamond_upper_bound(J, a1, b1)
    if ex is not None:
        ex = min(max(ex, lb), ub)  # solver slack can sit a hair outside the bracket
    return DiamondResult(ex, lb, ub)


def diamond_sweep_lower_bound(F1, F2, rng, n_samples=2000):
    """Brute-force lower bound: random pure inputs with a same-size reference."""
    J1, d, n = _choi_of(F1)
    J2, _, _ = _choi_of(F2)
    J = hermitize(J1 - J2)
    best = 0.0
    for _ in range(n_samples):
        g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        g = g / np.linalg.norm(g)
        # |psi> = sum g_ri |r>|i>, so (id ⊗ Φ)(psi) = (g ⊗ I) J (g ⊗ I)^†
        A = np.kron(g, np.eye(n))
        best = max(best, 0.5 * trace_norm(A @ J @ dag(A)))
    return best


def isometry_diamond_distance(V1, V2):
    """Exact ½||V1·V1† − V2·V2†||_◇ for isometric channels.

    Equals sqrt(1 − m²), with m the distance from the origin to the
    numerical range of V1^† V2.
    """
    from scipy.optimize import minimize_scalar

    M = dag(np.asarray(V1)) @ np.asarray(V2)
    # min over rho of |tr(rho M)| = distance of the numerical range to 0;
    # support-function form: m = max_θ λ_min(Re(e^{-iθ} M)) clipped at 0.
    def neg(theta):
        H = hermitize(np.exp(-1j * theta) * M)
        return -np.linalg.eigvalsh(H)[0]

    grid = np.linspace(0, 2 * np.pi, 721)
    vals = [-neg(t) for t in grid]
    k = int(np.argmax(vals))
    res = minimize_scalar(neg, bounds=(grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]),
                          method="bounded", options={"xatol": 1e-12})
    m = max(0.0, -res.fun, vals[k])
    m = min(m, 1.0)
    return float(np.sqrt(max(0.0, 1.0 - m * m)))


# ---------------------------------------------------------------------------
# spectrum statistics


@dataclass
class SpectrumStats:
    s_min: float | None
    r: int
    rho_min: float
    sigma_min: float
    kappa_rho: float
    kappa_sigma: float
    r_rho: int
    r_sigma: int
    singular_values: tuple = ()

    def to_dict(self):
        d = asdict(self)
        d["singular_values"] = list(self.singular_values)
        return d


def _min_nonzero_eig(M):
    w = np.linalg.eigvalsh(hermitize(M))
    top = max(w.max(), 1e-300)
    nz = w[w > SV_CUTOFF * top]
    return float(nz.min()), int(nz.size)


def spectrum_stats(rho, sigma, check_purifications=False):
    """Statistics of sqrt(sigma) sqrt(rho) that parameterise every algorithm.

    With ``check_purifications`` the singular values are recomputed from
    tr_{A'}[|sigma_c><rho_c|] of the canonical purifications and compared.
    """
    rho = as_density(rho)
    sigma = as_density(sigma)
    if rho.shape != sigma.shape:
        raise ValueError("states have different dimensions")
    X = psd_sqrt(sigma) @ psd_sqrt(rho)
    s = np.linalg.svd(X, compute_uv=False)
    # absolute floor as well: orthogonal supports leave only rounding noise
    keep = s > max(SV_CUTOFF * (s[0] if s.size else 0.0), 1e-13)
    sv = s[keep]
    rho_min, r_rho = _min_nonzero_eig(rho)
    sigma_min, r_sigma = _min_nonzero_eig(sigma)
    if check_purifications:
        from .states import canonical_purification_exact
        from .linalg import partial_trace_offdiag

        d = rho.shape[0]
        rc = canonical_purification_exact(rho)
        sc = canonical_purification_exact(sigma)
        lay = [("A", d), ("B", d)]
        M = partial_trace_offdiag(np.outer(sc, rc.conj()), lay, lay, ["A"])
        s2 = np.linalg.svd(M, compute_uv=False)
        if np.max(np.abs(np.sort(s2)[::-1] - s)) > 1e-9:
            raise AssertionError("purification singular values disagree with sqrt(sigma)sqrt(rho)")
    return SpectrumStats(
        s_min=float(sv.min()) if sv.size else None,
        r=int(sv.size),
        rho_min=rho_min,
        sigma_min=sigma_min,
        kappa_rho=1.0 / rho_min,
        kappa_sigma=1.0 / sigma_min,
        r_rho=r_rho,
        r_sigma=r_sigma,
        singular_values=tuple(float(x) for x in sv),
    )
