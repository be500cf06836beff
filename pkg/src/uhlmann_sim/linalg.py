"""Dense complex linear algebra used throughout the package.

Everything here is a pure function on numpy arrays. Matrices are plain
``np.ndarray`` objects with complex dtype; tensor-factor bookkeeping is done
with :class:`DimLayout`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

# Relative cutoff below which a singular value counts as zero.
SV_CUTOFF = 1e-9


@dataclass(frozen=True)
class DimLayout:
    """Ordered tensor factors ``[(label, dim), ...]``."""

    factors: tuple

    def __init__(self, factors):
        if isinstance(factors, dict):
            factors = list(factors.items())
        factors = tuple((str(k), int(d)) for k, d in factors)
        labels = [k for k, _ in factors]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate labels in layout: {labels}")
        for k, d in factors:
            if d < 1:
                raise ValueError(f"factor {k!r} has dimension {d}")
        object.__setattr__(self, "factors", factors)

    @property
    def labels(self):
        return [k for k, _ in self.factors]

    @property
    def dims(self):
        return [d for _, d in self.factors]

    @property
    def total(self):
        return int(np.prod(self.dims)) if self.factors else 1

    def dim(self, label):
        return self.dims[self.index(label)]

    def index(self, label):
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown label {label!r}; layout has {self.labels}") from None

    def without(self, labels):
        labels = set(labels)
        return DimLayout([(k, d) for k, d in self.factors if k not in labels])

    def __add__(self, other):
        return DimLayout(list(self.factors) + list(other.factors))

    def __repr__(self):
        inner = ", ".join(f"{k}:{d}" for k, d in self.factors)
        return f"DimLayout({inner})"


def as_layout(layout):
    if isinstance(layout, DimLayout):
        return layout
    if isinstance(layout, dict):
        return DimLayout(layout)
    layout = list(layout)
    if layout and not isinstance(layout[0], (tuple, list)):
        # bare dimensions get positional labels
        return DimLayout([(str(i), d) for i, d in enumerate(layout)])
    return DimLayout(layout)


def dag(M):
    return np.conj(np.swapaxes(M, -1, -2))


def kron(*ops):
    return reduce(np.kron, ops)


def ket(index, dim):
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def proj(v):
    v = np.asarray(v)
    return np.outer(v, v.conj())


def op_norm(M):
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def trace_norm(M):
    return float(np.sum(np.linalg.svd(M, compute_uv=False)))


def is_unitary(U, tol=1e-10):
    U = np.asarray(U)
    return U.shape[0] == U.shape[1] and op_norm(dag(U) @ U - np.eye(U.shape[0])) <= tol


def hermitize(M):
    return 0.5 * (M + dag(M))


def _lead_phase(v):
    k = int(np.argmax(np.abs(v) > 1e-12 * max(np.abs(v).max(), 1e-300)))
    z = v[k]
    return z / abs(z) if abs(z) > 0 else 1.0


def _fix_phases(U, Vh):
    """Make the first non-negligible entry of each left vector real positive.

    Unpaired vectors (full_matrices on a non-square input) are fixed alone,
    using the first entry of the row for right vectors.
    """
    U = U.copy()
    Vh = Vh.copy()
    k = min(U.shape[1], Vh.shape[0])
    for j in range(U.shape[1]):
        ph = _lead_phase(U[:, j])
        U[:, j] /= ph
        if j < k:
            Vh[j, :] *= ph
    for j in range(k, Vh.shape[0]):
        Vh[j, :] /= _lead_phase(Vh[j, :])
    return U, Vh


def svd(M, full_matrices=False):
    """SVD with descending singular values and a fixed phase convention.

    Returns ``U, s, Vh`` with ``M = U @ diag(s) @ Vh``. For each pair of
    singular vectors the first nonzero component of the left vector is made
    real and positive, so repeated calls agree bit for bit.
    """
    M = np.asarray(M, dtype=complex)
    U, s, Vh = np.linalg.svd(M, full_matrices=full_matrices)
    U, Vh = _fix_phases(U, Vh)
    return U, s, Vh


def numerical_rank(M, cutoff=SV_CUTOFF):
    s = np.linalg.svd(np.asarray(M), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > cutoff * s[0]))


def sign_sv(M, cutoff=SV_CUTOFF):
    """Sign function on singular values: the polar partial isometry of ``M``.

    Singular values below ``cutoff * s_max`` are treated as zero, so the
    result is a partial isometry supported on the numerical row space.
    """
    M = np.asarray(M, dtype=complex)
    if M.size == 0:
        return M.copy()
    U, s, Vh = svd(M)
    if s.size == 0 or s[0] == 0:
        return np.zeros_like(M)
    keep = s > cutoff * s[0]
    return U[:, keep] @ Vh[keep, :]


def polynomial_parity(P):
    """Return ``'odd'`` or ``'even'`` for a polynomial-like object.

    Objects may declare ``parity`` directly; numpy Chebyshev/Polynomial
    series are inspected coefficient by coefficient.
    """
    par = getattr(P, "parity", None)
    if par in ("odd", "even"):
        return par
    coef = getattr(P, "coef", None)
    if coef is None:
        raise ValueError("polynomial has no declared parity")
    coef = np.asarray(coef)
    scale = max(np.abs(coef).max(), 1e-300)
    odd_mass = np.abs(coef[1::2]).max(initial=0.0) / scale
    even_mass = np.abs(coef[0::2]).max(initial=0.0) / scale
    if odd_mass <= 1e-14:
        return "even"
    if even_mass <= 1e-14:
        return "odd"
    raise ValueError("polynomial does not have definite parity")


def poly_sv(P, M, tol=1e-9):
    """Apply a definite-parity polynomial to the singular values of ``M``.

    Odd ``P`` gives ``sum_j P(s_j) |u_j><v_j|``; even ``P`` gives
    ``sum_j P(s_j) |v_j><v_j|`` on the input space (including the kernel,
    where ``P(0)`` acts).
    """
    M = np.asarray(M, dtype=complex)
    parity = polynomial_parity(P)
    if op_norm(M) > 1 + tol:
        raise ValueError(f"operator norm {op_norm(M):.3g} exceeds 1")
    if parity == "odd":
        U, s, Vh = svd(M)
        return (U * np.asarray(P(s), dtype=complex)) @ Vh
    # even: need a full right basis so the kernel picks up P(0)
    _, s, Vh = svd(M, full_matrices=True)
    n = M.shape[1]
    vals = np.full(n, complex(P(np.array([0.0]))[0]))
    vals[: s.size] = P(s)
    return (dag(Vh) * vals) @ Vh


def psd_power(A, p, cutoff=1e-12):
    """Matrix power of a PSD matrix; non-positive powers act on the support only."""
    w, V = np.linalg.eigh(hermitize(np.asarray(A, dtype=complex)))
    w = np.clip(w, 0.0, None)
    if p > 0:
        # eigensolver noise on a rank-deficient input would otherwise turn
        # into spurious support of size noise**p
        top = w.max() if w.size else 0.0
        w = np.where(w > w.size * np.finfo(float).eps * top, w, 0.0)
        f = w ** p
    else:
        top = w.max() if w.size else 0.0
        f = np.where(w > cutoff * max(top, 1e-300), np.abs(w) ** p, 0.0) if top > 0 else np.zeros_like(w)
    return (V * f) @ dag(V)


def psd_sqrt(A):
    return psd_power(A, 0.5)


def expm_hermitian(H, t=1.0):
    """``exp(i t H)`` for Hermitian ``H`` via its eigendecomposition."""
    w, V = np.linalg.eigh(hermitize(H))
    return (V * np.exp(1j * t * w)) @ dag(V)


def partial_trace(M, layout, traced):
    """Trace out the named factors of a square matrix on ``layout``."""
    layout = as_layout(layout)
    if isinstance(traced, str):
        traced = [traced]
    traced = list(traced)
    for lab in traced:
        layout.index(lab)  # raises on unknown labels
    M = np.asarray(M)
    n = layout.total
    if M.shape != (n, n):
        raise ValueError(f"matrix shape {M.shape} does not match layout total {n}")
    dims = layout.dims
    k = len(dims)
    T = M.reshape(dims + dims)
    keep = [i for i, lab in enumerate(layout.labels) if lab not in traced]
    # einsum over all traced axes at once
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    row = list(letters[:k])
    col = list(letters[k:2 * k])
    for i, lab in enumerate(layout.labels):
        if lab in traced:
            col[i] = row[i]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    R = np.einsum("".join(row) + "".join(col) + "->" + out, T)
    d = int(np.prod([dims[i] for i in keep])) if keep else 1
    return R.reshape(d, d)


def partial_trace_offdiag(M, row_layout, col_layout, traced):
    """Partial trace of a possibly rectangular operator.

    ``row_layout`` and ``col_layout`` must both contain the traced labels
    with matching dimensions. Used for objects like tr_A[|s><r|].
    """
    row_layout = as_layout(row_layout)
    col_layout = as_layout(col_layout)
    if isinstance(traced, str):
        traced = [traced]
    M = np.asarray(M)
    rd, cd = row_layout.dims, col_layout.dims
    T = M.reshape(rd + cd)
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    row = list(letters[: len(rd)])
    col = list(letters[len(rd): len(rd) + len(cd)])
    for lab in traced:
        i, j = row_layout.index(lab), col_layout.index(lab)
        if rd[i] != cd[j]:
            raise ValueError(f"traced factor {lab!r} has mismatched dimensions")
        col[j] = row[i]
    keep_r = [i for i, lab in enumerate(row_layout.labels) if lab not in traced]
    keep_c = [j for j, lab in enumerate(col_layout.labels) if lab not in traced]
    out = "".join(row[i] for i in keep_r) + "".join(col[j] for j in keep_c)
    R = np.einsum("".join(row) + "".join(col) + "->" + out, T)
    return R.reshape(int(np.prod([rd[i] for i in keep_r])), int(np.prod([cd[j] for j in keep_c])))


def permute_systems(M, layout, order):
    """Reorder tensor factors of an operator (or vector) to ``order`` (labels)."""
    layout = as_layout(layout)
    perm = [layout.index(lab) for lab in order]
    dims = layout.dims
    M = np.asarray(M)
    if M.ndim == 1:
        return M.reshape(dims).transpose(perm).reshape(-1)
    k = len(dims)
    T = M.reshape(dims + dims).transpose(perm + [p + k for p in perm])
    return T.reshape(M.shape)


def embed_operator(op, layout, targets):
    """Lift an operator acting on ``targets`` (in that order) to all of ``layout``."""
    layout = as_layout(layout)
    targets = list(targets)
    rest = [lab for lab in layout.labels if lab not in targets]
    d_rest = int(np.prod([layout.dim(lab) for lab in rest])) if rest else 1
    big = np.kron(op, np.eye(d_rest))
    cur = DimLayout([(lab, layout.dim(lab)) for lab in targets + rest])
    # big acts on cur ordering; move back to layout ordering
    perm_to = [cur.index(lab) for lab in layout.labels]
    k = len(cur.dims)
    T = big.reshape(cur.dims + cur.dims).transpose(perm_to + [p + k for p in perm_to])
    return T.reshape(layout.total, layout.total)


def apply_on(op, state, layout, targets):
    """Apply ``op`` to ``targets`` of a state vector or density matrix."""
    U = embed_operator(op, layout, targets)
    state = np.asarray(state)
    if state.ndim == 1:
        return U @ state
    return U @ state @ dag(U)


def swap_operator(d):
    """The swap F on C^d ⊗ C^d."""
    S = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            S[j * d + i, i * d + j] = 1.0
    return S


def dilate_contraction(A, tol=1e-9):
    """Unitary dilation of a contraction with one extra flag qubit.

    ``A`` is zero-padded to an ``n x n`` block with ``n = max(rows, cols)``
    and embedded as

        [[A, sqrt(I - A A^†)], [sqrt(I - A^† A), -A^†]],

    which is unitary whenever ``||A|| <= 1``. Singular values above one (up
    to ``tol``) are clamped first.
    """
    A = np.asarray(A, dtype=complex)
    r, c = A.shape
    n = max(r, c)
    Ap = np.zeros((n, n), dtype=complex)
    Ap[:r, :c] = A
    U, s, Vh = np.linalg.svd(Ap)
    if s.size and s[0] > 1 + tol:
        raise ValueError(f"cannot dilate: operator norm {s[0]:.6g} > 1")
    s = np.clip(s, 0.0, 1.0)
    Ap = (U * s) @ Vh
    c_s = np.sqrt(np.clip(1.0 - s ** 2, 0.0, None))
    top_right = (U * c_s) @ dag(U)
    bot_left = (dag(Vh) * c_s) @ Vh
    out = np.empty((2 * n, 2 * n), dtype=complex)
    out[:n, :n] = Ap
    out[:n, n:] = top_right
    out[n:, :n] = bot_left
    out[n:, n:] = -dag(Ap)
    return out


def complete_to_unitary(cols):
    """Extend orthonormal columns to a full unitary (deterministic)."""
    cols = np.atleast_2d(np.asarray(cols, dtype=complex))
    if cols.shape[0] < cols.shape[1]:
        cols = cols.T
    n, k = cols.shape
    Q, _ = np.linalg.qr(np.hstack([cols, np.eye(n, dtype=complex)]))
    # QR may flip phases of the leading columns; put the given ones back
    Q[:, :k] = cols
    # re-orthogonalise the completion against the given block
    rest = Q[:, k:n]
    rest = rest - cols @ (dag(cols) @ rest)
    rest, _ = np.linalg.qr(rest)
    return np.hstack([cols, rest])


def state_prep_unitary(psi):
    """A unitary whose first column is ``psi``."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    psi = psi / np.linalg.norm(psi)
    return complete_to_unitary(psi[:, None])


def random_unitary(d, rng):
    Z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    ph = np.diag(R) / np.abs(np.diag(R))
    return Q * ph


def random_hermitian(d, rng, scale=1.0):
    Z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * hermitize(Z) / np.sqrt(2 * d)
