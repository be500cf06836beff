"""Phase factors for quantum signal processing.

Only needed where a QSVT sequence has to be run with *channels* in place of
the block-encoding unitary (the sample-access Uhlmann algorithms). For
unitary inputs the package applies polynomials to singular values directly.

Phases are found in the W_x convention with symmetric phases by Newton's
method on Chebyshev nodes, then converted to the reflection convention

    U_Φ = e^{iφ_1(2Π̃-I)} U e^{iφ_2(2Π-I)} U^† ... e^{iφ_d(2Π̃-I)} U,

whose encoded block has real part P(A) for the target polynomial P.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import chebyshev as C

from .linalg import dag


def _rot(phi):
    """e^{iφZ} as an array of diagonals, shape (..., 2)."""
    phi = np.asarray(phi)
    return np.stack([np.exp(1j * phi), np.exp(-1j * phi)], axis=-1)


def wx_block(psi, x):
    """<0| e^{iψ_0 Z} Π_k W(x) e^{iψ_k Z} |0> for each x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = np.sqrt(np.clip(1 - x * x, 0, None))
    # propagate the row vector <0| from the left
    r = np.zeros((x.size, 2), dtype=complex)
    r[:, 0] = 1.0
    r = r * _rot(psi[0])
    for ph in psi[1:]:
        a = r[:, 0] * x + r[:, 1] * 1j * s
        b = r[:, 0] * 1j * s + r[:, 1] * x
        r = np.stack([a, b], axis=1) * _rot(ph)
    return r[:, 0]


def _full_from_reduced(red, d):
    if (d + 1) % 2 == 0:
        return np.concatenate([red, red[::-1]])
    return np.concatenate([red, red[-2::-1]])


def _residual_and_jacobian(red, d, x, target, need_jac=True):
    psi = _full_from_reduced(red, d)
    n = x.size
    s = np.sqrt(np.clip(1 - x * x, 0, None))
    # prefix rows r_k = <0| e^{iψ_0Z} W ... W   (before e^{iψ_kZ})
    rows = np.empty((d + 1, n, 2), dtype=complex)
    r = np.zeros((n, 2), dtype=complex)
    r[:, 0] = 1.0
    for k in range(d + 1):
        rows[k] = r
        r = r * _rot(psi[k])
        if k < d:
            a = r[:, 0] * x + r[:, 1] * 1j * s
            b = r[:, 0] * 1j * s + r[:, 1] * x
            r = np.stack([a, b], axis=1)
    val = r[:, 0]
    F = val.real - target
    if not need_jac:
        return F, None
    # suffix columns c_k = W e^{iψ_{k+1}Z} ... |0>   (after e^{iψ_kZ})
    cols = np.empty((d + 1, n, 2), dtype=complex)
    c = np.zeros((n, 2), dtype=complex)
    c[:, 0] = 1.0
    for k in range(d, -1, -1):
        cols[k] = c
        c = c * _rot(psi[k])
        if k > 0:
            a = x * c[:, 0] + 1j * s * c[:, 1]
            b = 1j * s * c[:, 0] + x * c[:, 1]
            c = np.stack([a, b], axis=1)
    # d/dψ_k = r_k · iZ e^{iψ_kZ} · c_k
    rot = _rot(psi)  # (d+1, 2)
    dz = np.array([1j, -1j])
    deriv = np.einsum("kni,ki,i,kni->kn", rows, rot, dz, cols).real  # (d+1, n)
    half = red.size
    Jfull = deriv.T  # (n, d+1)
    Jac = Jfull[:, :half].copy()
    mirror = np.arange(d, d - half, -1)
    for j in range(half):
        m = mirror[j]
        if m != j:
            Jac[:, j] += Jfull[:, m]
    return F, Jac


def solve_wx_phases(coef, tol=1e-12, maxiter=60):
    """Symmetric W_x phases ψ_0..ψ_d with Re<0|U_ψ(x)|0> = Σ coef_k T_k(x)."""
    coef = np.asarray(coef, dtype=float)
    d = len(coef) - 1
    while d > 0 and abs(coef[d]) == 0:
        d -= 1
    coef = coef[: d + 1]
    half = (d + 2) // 2  # ceil((d+1)/2)
    j = np.arange(1, half + 1)
    x = np.cos((2 * j - 1) * np.pi / (4 * half))
    target = C.chebval(x, coef)
    red = np.zeros(half)
    red[0] = np.pi / 4
    if d == 0:
        raise ValueError("constant polynomial has no QSP sequence here")
    for it in range(maxiter):
        F, J = _residual_and_jacobian(red, d, x, target)
        err = np.max(np.abs(F))
        if err < tol:
            break
        step = np.linalg.lstsq(J, F, rcond=None)[0]
        red = red - step
    else:
        F, _ = _residual_and_jacobian(red, d, x, target, need_jac=False)
        if np.max(np.abs(F)) > 1e-8:
            raise RuntimeError(f"phase solver did not converge (residual {np.max(np.abs(F)):.2e})")
    return _full_from_reduced(red, d)


def wx_to_reflection(psi):
    """Convert W_x phases to reflection-convention phases φ_1..φ_d."""
    psi = np.asarray(psi, dtype=float)
    d = psi.size - 1
    theta = psi[d] - np.pi / 4 + d * np.pi / 2
    phi = np.empty(d)
    phi[0] = psi[0] - np.pi / 4 + theta
    phi[1:] = psi[1:d] - np.pi / 2
    return phi


def reflection_block(phi, x):
    """<0| Π_k e^{iφ_k Z} R(x) |0> with R(x) = [[x, s], [s, -x]]."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = np.sqrt(np.clip(1 - x * x, 0, None))
    r = np.zeros((x.size, 2), dtype=complex)
    r[:, 0] = 1.0
    for ph in phi:
        r = r * _rot(ph)
        a = r[:, 0] * x + r[:, 1] * s
        b = r[:, 0] * s - r[:, 1] * x
        r = np.stack([a, b], axis=1)
    return r[:, 0]


def reflection_phases(coef, tol=1e-12):
    """Reflection-convention phases whose block has real part Σ coef_k T_k."""
    return wx_to_reflection(solve_wx_phases(coef, tol=tol))


def qsvt_sequence_unitary(U, phi, proj_in, proj_out):
    """Literal QSVT product for a unitary ``U`` (dual route to singular-value maps).

    ``proj_in`` / ``proj_out`` are the projectors Π and Π̃ selecting the
    encoded block. Returns U_Φ; its Π̃·U_Φ·Π block (odd length) carries
    the complex polynomial whose real part is the target.
    """
    n = U.shape[0]
    I = np.eye(n)
    Ud = dag(U)
    d = len(phi)
    out = np.eye(n, dtype=complex)
    # build right-to-left: the rightmost factor is U
    for idx in range(d - 1, -1, -1):
        from_right = d - 1 - idx  # 0 for the rightmost factor
        Uk = U if from_right % 2 == 0 else Ud
        P = proj_out if from_right % 2 == 0 else proj_in
        ph = np.exp(1j * phi[idx]) * P + np.exp(-1j * phi[idx]) * (I - P)
        out = ph @ Uk @ out
    return out
