"""States, state-preparation oracles and quantum channels."""

from __future__ import annotations

import numpy as np

from .linalg import (
    DimLayout,
    as_layout,
    dag,
    hermitize,
    op_norm,
    partial_trace,
    psd_sqrt,
    state_prep_unitary,
)


# ---------------------------------------------------------------------------
# states


class PureState:
    """A normalised state vector on a labelled layout."""

    def __init__(self, amplitudes, layout=None, tol=1e-10):
        v = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if layout is None:
            layout = DimLayout([("S", v.size)])
        layout = as_layout(layout)
        if layout.total != v.size:
            raise ValueError("amplitude count does not match layout")
        nrm = np.linalg.norm(v)
        if abs(nrm - 1) > tol:
            raise ValueError(f"state norm {nrm} is not 1")
        self.vector = v
        self.layout = layout

    @property
    def dm(self):
        return np.outer(self.vector, self.vector.conj())

    def reduced(self, keep):
        traced = [lab for lab in self.layout.labels if lab not in keep]
        return partial_trace(self.dm, self.layout, traced)

    def __array__(self, dtype=None, copy=None):
        return self.vector if dtype is None else self.vector.astype(dtype)


class DensityMatrix:
    """A density matrix on a labelled layout, validated on construction."""

    def __init__(self, matrix, layout=None, tol=1e-10):
        M = np.asarray(matrix, dtype=complex)
        if layout is None:
            layout = DimLayout([("S", M.shape[0])])
        layout = as_layout(layout)
        if M.shape != (layout.total, layout.total):
            raise ValueError("matrix shape does not match layout")
        if op_norm(M - dag(M)) > tol:
            raise ValueError("matrix is not Hermitian")
        if abs(np.trace(M) - 1) > tol:
            raise ValueError(f"trace {np.trace(M).real} is not 1")
        if np.linalg.eigvalsh(hermitize(M)).min() < -tol:
            raise ValueError("matrix is not positive semidefinite")
        self.matrix = hermitize(M)
        self.layout = layout

    def reduced(self, keep):
        traced = [lab for lab in self.layout.labels if lab not in keep]
        return partial_trace(self.matrix, self.layout, traced)

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)


def as_vector(psi):
    if isinstance(psi, PureState):
        return psi.vector
    return np.asarray(psi, dtype=complex).reshape(-1)


def as_density(x):
    """Density matrix from a vector, a PureState/DensityMatrix, or a matrix."""
    if isinstance(x, PureState):
        return x.dm
    if isinstance(x, DensityMatrix):
        return x.matrix
    x = np.asarray(x, dtype=complex)
    if x.ndim == 1:
        return np.outer(x, x.conj())
    return x


def random_pure(d, rng):
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def random_density(d, rng, rank=None):
    """Mixed state from tracing out part of a Gaussian pure state."""
    k = d if rank is None else rank
    G = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    rho = G @ dag(G)
    return hermitize(rho / np.trace(rho).real)


def max_entangled(d):
    """|Φ> = (1/sqrt d) sum_i |ii>."""
    return np.eye(d, dtype=complex).reshape(-1) / np.sqrt(d)


def gamma_vector(d):
    """Unnormalised |Γ> = sum_i |ii>."""
    return np.eye(d, dtype=complex).reshape(-1)


def canonical_purification_exact(omega):
    """(sqrt(omega) ⊗ I)|Γ> as a state vector on A ⊗ B."""
    omega = as_density(omega)
    d = omega.shape[0]
    v = np.kron(psd_sqrt(omega), np.eye(d)) @ gamma_vector(d)
    return v / np.linalg.norm(v)


def purification(rho, d_env=None):
    """Some purification of ``rho`` on A ⊗ E (spectral form, E = rank or d_env)."""
    rho = as_density(rho)
    w, V = np.linalg.eigh(hermitize(rho))
    w = np.clip(w, 0, None)[::-1]
    V = V[:, ::-1]
    d = rho.shape[0]
    d_env = d if d_env is None else d_env
    psi = np.zeros((d, d_env), dtype=complex)
    for k in range(min(d, d_env)):
        psi[:, k] = np.sqrt(w[k]) * V[:, k]
    psi = psi.reshape(-1)
    return psi / np.linalg.norm(psi)


# ---------------------------------------------------------------------------
# oracles


class StatePrepOracle:
    """A state-preparation unitary with forward/inverse query accounting.

    ``U |0> = |psi>``. Calls to :meth:`forward` and :meth:`inverse` bump the
    named counters on the attached ledger (if any).
    """

    def __init__(self, unitary, layout=None, name="U", ledger=None):
        U = np.asarray(unitary, dtype=complex)
        if op_norm(dag(U) @ U - np.eye(U.shape[0])) > 1e-10:
            raise ValueError("oracle matrix is not unitary")
        self.unitary = U
        self.layout = as_layout(layout) if layout is not None else DimLayout([("S", U.shape[0])])
        self.name = name
        self.ledger = ledger

    @classmethod
    def from_state(cls, psi, layout=None, name="U", ledger=None):
        return cls(state_prep_unitary(as_vector(psi)), layout, name, ledger)

    @property
    def state(self):
        return self.unitary[:, 0]

    def forward(self, count=1):
        if self.ledger is not None:
            self.ledger.add_query(self.name, "forward", count)
        return self.unitary

    def inverse(self, count=1):
        if self.ledger is not None:
            self.ledger.add_query(self.name, "inverse", count)
        return dag(self.unitary)


# ---------------------------------------------------------------------------
# channels


class QuantumChannel:
    """A linear CP map given by Kraus operators, a Stinespring isometry, or a
    black-box ``apply`` function.

    Stinespring isometries map ``d_in`` to ``d_out * d_env`` with the output
    factor first and the environment last.
    """

    def __init__(self, d_in, d_out, kraus=None, isometry=None, d_env=None, apply_fn=None,
                 name="channel", env_label="E"):
        self.d_in = int(d_in)
        self.d_out = int(d_out)
        self.name = name
        self.env_label = env_label
        self._kraus = None if kraus is None else [np.asarray(K, dtype=complex) for K in kraus]
        self._iso = None
        self.d_env = d_env
        self._apply_fn = apply_fn
        if isometry is not None:
            V = np.asarray(isometry, dtype=complex)
            if d_env is None:
                d_env = V.shape[0] // self.d_out
            if V.shape != (self.d_out * d_env, self.d_in):
                raise ValueError("isometry shape does not match dimensions")
            self._iso = V
            self.d_env = int(d_env)
        if self._kraus is None and self._iso is None and apply_fn is None:
            raise ValueError("need Kraus operators, an isometry or an apply function")

    # -- construction helpers
    @classmethod
    def from_kraus(cls, kraus, name="channel"):
        K0 = np.asarray(kraus[0])
        return cls(K0.shape[1], K0.shape[0], kraus=kraus, name=name)

    @classmethod
    def from_isometry(cls, V, d_out, name="channel", env_label="E"):
        V = np.asarray(V)
        return cls(V.shape[1], d_out, isometry=V, d_env=V.shape[0] // d_out, name=name,
                   env_label=env_label)

    @classmethod
    def from_unitary(cls, U, name="unitary"):
        U = np.asarray(U, dtype=complex)
        return cls(U.shape[1], U.shape[0], kraus=[U], name=name)

    @classmethod
    def from_function(cls, fn, d_in, d_out, name="channel"):
        return cls(d_in, d_out, apply_fn=fn, name=name)

    @classmethod
    def from_choi(cls, J, d_in, d_out, name="channel", cutoff=1e-12):
        """Kraus form from an unnormalised Choi matrix ordered (in, out)."""
        w, V = np.linalg.eigh(hermitize(J))
        kraus = []
        top = max(w.max(), 1e-300)
        for k in range(w.size - 1, -1, -1):
            if w[k] > cutoff * top:
                vec = np.sqrt(w[k]) * V[:, k]
                kraus.append(vec.reshape(d_in, d_out).T)
        return cls(d_in, d_out, kraus=kraus, name=name)

    # -- evaluation
    def apply(self, rho):
        rho = as_density(rho)
        if self._apply_fn is not None:
            return self._apply_fn(rho)
        if self._kraus is not None:
            return sum(K @ rho @ dag(K) for K in self._kraus)
        V = self._iso
        big = V @ rho @ dag(V)
        return partial_trace(big, [("out", self.d_out), ("E", self.d_env)], ["E"])

    __call__ = apply

    def kraus(self):
        if self._kraus is not None:
            return list(self._kraus)
        if self._iso is not None:
            V = self._iso.reshape(self.d_out, self.d_env, self.d_in)
            return [V[:, e, :] for e in range(self.d_env)]
        return QuantumChannel.from_choi(self.choi_matrix(), self.d_in, self.d_out).kraus()

    def stinespring(self):
        """Isometry ``V`` with ``V rho V^† `` on out ⊗ E; Kraus index labels E."""
        if self._iso is not None:
            return self._iso
        K = self.kraus()
        d_env = len(K)
        V = np.zeros((self.d_out, d_env, self.d_in), dtype=complex)
        for e, Ke in enumerate(K):
            V[:, e, :] = Ke
        return V.reshape(self.d_out * d_env, self.d_in)

    def to_stinespring(self):
        V = self.stinespring()
        return QuantumChannel.from_isometry(V, self.d_out, name=self.name, env_label=self.env_label)

    def choi_matrix(self):
        """Unnormalised Choi matrix sum_ij |i><j| ⊗ F(|i><j|), input first."""
        d, n = self.d_in, self.d_out
        if self._apply_fn is None:
            K = self.kraus()
            J = np.zeros((d * n, d * n), dtype=complex)
            for Kk in K:
                v = Kk.T.reshape(-1)  # vec of sum_i |i> ⊗ K|i>
                J += np.outer(v, v.conj())
            return J
        J = np.zeros((d, n, d, n), dtype=complex)
        for i in range(d):
            for j in range(d):
                E = np.zeros((d, d), dtype=complex)
                E[i, j] = 1
                J[i, :, j, :] = self.apply(E)
        return J.reshape(d * n, d * n)

    def choi_state(self):
        return self.choi_matrix() / self.d_in

    def superop(self):
        """Matrix S with vec(F(X)) = S vec(X) (row-major vec)."""
        if self._apply_fn is None:
            return sum(np.kron(K, K.conj()) for K in self.kraus())
        d = self.d_in
        cols = []
        for idx in range(d * d):
            E = np.zeros(d * d, dtype=complex)
            E[idx] = 1
            cols.append(self.apply(E.reshape(d, d)).reshape(-1))
        return np.array(cols).T

    # -- algebra
    def compose(self, other):
        """Return ``self ∘ other``."""
        if other.d_out != self.d_in:
            raise ValueError("dimension mismatch in composition")
        if self._apply_fn is None and other._apply_fn is None:
            K = [A @ B for A in self.kraus() for B in other.kraus()]
            return QuantumChannel.from_kraus(K, name=f"{self.name}∘{other.name}")
        return QuantumChannel.from_function(lambda r: self.apply(other.apply(r)), other.d_in,
                                            self.d_out, name=f"{self.name}∘{other.name}")

    def adjoint(self):
        """Hilbert–Schmidt adjoint (unital CP map when self is trace preserving)."""
        return QuantumChannel(self.d_out, self.d_in, kraus=[dag(K) for K in self.kraus()],
                              name=f"{self.name}†")

    def complementary(self):
        """rho -> tr_out[V rho V^†] using the stored Stinespring isometry."""
        if self._iso is None:
            raise ValueError("channel has no Stinespring isometry; call to_stinespring() first")
        V = self._iso
        d_out, d_env = self.d_out, self.d_env

        def fn(rho):
            big = V @ rho @ dag(V)
            return partial_trace(big, [("out", d_out), ("E", d_env)], ["out"])

        W = V.reshape(d_out, d_env, self.d_in).transpose(1, 0, 2).reshape(d_env * d_out, self.d_in)
        return QuantumChannel(self.d_in, d_env, isometry=W, d_env=d_out, name=f"{self.name}^c",
                              env_label="out")

    def is_trace_preserving(self, tol=1e-9):
        S = sum(dag(K) @ K for K in self.kraus())
        return op_norm(S - np.eye(self.d_in)) <= tol


def complementary_channel(F, env="E"):
    """Complementary channel of ``F`` into its environment factor ``env``."""
    if F._iso is None:
        raise ValueError("channel is Kraus-only; convert with to_stinespring() and record the dilation")
    if env not in (F.env_label, "E"):
        raise KeyError(f"unknown environment label {env!r}")
    return F.complementary()


def choi_state(F):
    """(id ⊗ F)(|Φ><Φ|), reference factor first."""
    return F.choi_state()


# ---------------------------------------------------------------------------
# named channels


def identity_channel(d):
    return QuantumChannel.from_kraus([np.eye(d, dtype=complex)], name="identity")


def unitary_channel(U):
    return QuantumChannel.from_unitary(U)


def amplitude_damping(gamma):
    K0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex)
    K1 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex)
    return QuantumChannel.from_kraus([K0, K1], name=f"amplitude_damping({gamma})")


def dephasing(p):
    """rho -> (1 - p) rho + p Z rho Z."""
    K0 = np.sqrt(1 - p) * np.eye(2, dtype=complex)
    K1 = np.sqrt(p) * np.diag([1, -1]).astype(complex)
    return QuantumChannel.from_kraus([K0, K1], name=f"dephasing({p})")


def depolarizing(p, d=2):
    """rho -> (1 - p) rho + p tr(rho) I/d."""
    kraus = [np.sqrt(1 - p + p / d ** 2) * np.eye(d, dtype=complex)]
    # Weyl operators for the remaining weight
    w = np.exp(2j * np.pi / d)
    X = np.roll(np.eye(d), 1, axis=0)
    Z = np.diag(w ** np.arange(d))
    for a in range(d):
        for b in range(d):
            if a == 0 and b == 0:
                continue
            kraus.append(np.sqrt(p) / d * np.linalg.matrix_power(X, a) @ np.linalg.matrix_power(Z, b))
    return QuantumChannel.from_kraus(kraus, name=f"depolarizing({p})")


def partial_trace_channel(layout, traced):
    layout = as_layout(layout)
    keep = layout.without(traced)
    return QuantumChannel.from_function(lambda r: partial_trace(r, layout, traced), layout.total,
                                        keep.total, name=f"tr_{''.join(traced)}")


def erasure(p, d=2):
    """Erasure channel: with probability p the input is replaced by |e> (index d).

    Its Stinespring isometry sends the state to the output with amplitude
    sqrt(1-p) and to the environment with amplitude sqrt(p); both output and
    environment are (d+1)-dimensional.
    """
    D = d + 1
    V = np.zeros((D, D, d), dtype=complex)
    for i in range(d):
        V[i, d, i] = np.sqrt(1 - p)
        V[d, i, i] = np.sqrt(p)
    return QuantumChannel.from_isometry(V.reshape(D * D, d), D, name=f"erasure({p})")
