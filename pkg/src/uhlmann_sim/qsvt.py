"""Block encodings and singular-value transformation of encoded blocks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    DimLayout,
    dag,
    dilate_contraction,
    embed_operator,
    op_norm,
    poly_sv,
    swap_operator,
)
from .polynomials import synthesize_sign_polynomial


@dataclass
class BlockEncoding:
    """A unitary whose corner block encodes ``target / alpha``.

    The block is ``U[out_idx][:, in_idx]``. For the standard form produced
    by :func:`dilate_contraction` the flag is the leading factor and the
    block sits at flag value 0. ``oracle_costs`` maps an oracle name to
    ``(forward, inverse)`` queries per use of ``unitary``.
    """

    unitary: np.ndarray
    flag_layout: DimLayout
    alpha: float
    a: int
    eps: float
    in_idx: np.ndarray
    out_idx: np.ndarray
    target: np.ndarray | None = None
    oracle_costs: dict = field(default_factory=dict)

    def __post_init__(self):
        U = self.unitary
        if op_norm(dag(U) @ U - np.eye(U.shape[0])) > 1e-10:
            raise ValueError("block-encoding matrix is not unitary")
        self.in_idx = np.asarray(self.in_idx, dtype=int)
        self.out_idx = np.asarray(self.out_idx, dtype=int)
        if self.target is not None:
            err = self.certificate_error()
            if err > self.eps + 1e-9:
                raise ValueError(f"certificate violated: {err:.3e} > eps {self.eps:.3e}")

    @property
    def block(self):
        return self.unitary[np.ix_(self.out_idx, self.in_idx)]

    def certificate_error(self):
        return op_norm(self.target - self.alpha * self.block)

    @classmethod
    def from_contraction(cls, A, target=None, alpha=1.0, eps=0.0, oracle_costs=None):
        """Exact one-flag dilation of ``A`` (flag leading, block at flag 0)."""
        A = np.asarray(A, dtype=complex)
        U = dilate_contraction(A)
        return cls(U, DimLayout([("flag", 2)]), alpha, 1, eps, np.arange(A.shape[1]),
                   np.arange(A.shape[0]), target=target, oracle_costs=dict(oracle_costs or {}))

    def charge(self, ledger, n_forward, n_inverse):
        if ledger is None:
            return
        for name, (f, i) in self.oracle_costs.items():
            ledger.add_query(name, "forward", n_forward * f + n_inverse * i)
            ledger.add_query(name, "inverse", n_forward * i + n_inverse * f)


def qsvt_uses(degree, parity):
    """(uses of U, uses of U†) for a degree-``degree`` QSVT sequence."""
    if parity == "odd":
        return (degree + 1) // 2, (degree - 1) // 2
    return degree // 2, degree // 2


def build_purified_difference_encoding(Urho, Usig):
    """W = U_ρ^†(I ⊗ F^{B B̂})U_σ on Â B̂ B; its Â B̂ = |0> block is tr_Â[|σ><ρ|].

    The oracles prepare |ρ> and |σ> on Â B̂ (dimensions taken from their
    layouts, which must have two factors). Building the matrix costs
    nothing; each later use of W is charged one forward query to U_σ and one
    inverse query to U_ρ through ``oracle_costs``.
    """
    lay_r, lay_s = Urho.layout, Usig.layout
    if lay_r.dims != lay_s.dims or len(lay_r.dims) != 2:
        raise ValueError("oracles must share a two-factor layout A ⊗ B")
    dA, dB = lay_r.dims
    Ur = Urho.unitary
    Us = Usig.unitary
    full = DimLayout([("Ahat", dA), ("Bhat", dB), ("B", dB)])
    F = embed_operator(swap_operator(dB), full, ["Bhat", "B"])
    W = embed_operator(dag(Ur), full, ["Ahat", "Bhat"]) @ F @ embed_operator(Us, full, ["Ahat", "Bhat"])
    # target: tr_Â[|σ><ρ|] as an operator on B
    r = Urho.state.reshape(dA, dB)
    s = Usig.state.reshape(dA, dB)
    M = s.T @ r.conj()
    idx = np.arange(dB)  # Â B̂ = 0 block
    return BlockEncoding(W, DimLayout([("Ahat", dA), ("Bhat", dB)]), 1.0,
                         int(math.ceil(math.log2(dA * dB))), 0.0, idx, idx, target=M,
                         oracle_costs={Usig.name: (1, 0), Urho.name: (0, 1)})


def qsvt_apply(be, P, ledger=None, label="U"):
    """Encode P^{(SV)} of the block of ``be`` by singular-value map + dilation.

    Charges the QSVT query count for ``P.degree`` to ``ledger``: (d+1)/2
    uses of U and (d-1)/2 of U^† for odd d, d/2 of each for even d, passed
    through to the oracles behind ``be``.
    """
    if abs(be.alpha - 1) > 1e-12:
        raise ValueError("rescale the block encoding to alpha = 1 first")
    from .linalg import polynomial_parity

    parity = polynomial_parity(P)
    degree = int(getattr(P, "degree"))
    nU, nUd = qsvt_uses(degree, parity)
    if ledger is not None:
        ledger.add_channel_uses(label, nU)
        ledger.add_channel_uses(label + "†", nUd)
    be.charge(ledger, nU, nUd)
    B = be.block
    PB = poly_sv(P, B)
    if be.target is not None:
        target = poly_sv(P, be.target) if op_norm(be.target) <= 1 + 1e-9 else None
    else:
        target = None
    eps = 0.0 if be.eps == 0 else min(2.0, 4 * degree * math.sqrt(be.eps))
    costs = {}
    for name, (f, i) in be.oracle_costs.items():
        costs[name] = (nU * f + nUd * i, nU * i + nUd * f)
    out = BlockEncoding.from_contraction(PB, target=None, eps=eps, oracle_costs=costs)
    if target is not None:
        out.target = target
    return out


def product_encodings(be1, be2):
    """Block encoding of A1 A2 from encodings of A1 and A2.

    Both encodings must be in standard form (leading flag, block at flag
    value 0 over the full system). The certificate composes as
    (α1 α2, a1 + a2, α1 ε2 + α2 ε1).
    """
    n1 = be1.unitary.shape[0] // be1.flag_layout.total
    n2 = be2.unitary.shape[0] // be2.flag_layout.total
    if n1 != n2:
        raise ValueError("system dimensions differ")
    n = n1
    f1, f2 = be1.flag_layout.total, be2.flag_layout.total
    lay = DimLayout([("f1", f1), ("f2", f2), ("sys", n)])
    U1 = embed_operator(be1.unitary, lay, ["f1", "sys"])
    U2 = embed_operator(be2.unitary, lay, ["f2", "sys"])
    U = U1 @ U2
    in_idx = be2.in_idx
    out_idx = be1.out_idx
    target = None
    if be1.target is not None and be2.target is not None:
        t1 = np.zeros((n, n), dtype=complex)
        t1[: be1.target.shape[0], : be1.target.shape[1]] = be1.target
        t2 = np.zeros((n, n), dtype=complex)
        t2[: be2.target.shape[0], : be2.target.shape[1]] = be2.target
        target = (t1 @ t2)[np.ix_(np.arange(len(out_idx)), np.arange(len(in_idx)))]
    eps = be1.alpha * be2.eps + be2.alpha * be1.eps
    costs = dict(be1.oracle_costs)
    for k, (f, i) in be2.oracle_costs.items():
        a, b = costs.get(k, (0, 0))
        costs[k] = (a + f, b + i)
    return BlockEncoding(U, DimLayout([("f1", f1), ("f2", f2)]), be1.alpha * be2.alpha,
                         be1.a + be2.a, eps, in_idx, out_idx, target=target, oracle_costs=costs)


def sign_transform(be, beta, delta, ledger=None, label="U"):
    """Convenience: synthesise the sign polynomial and apply it."""
    P = synthesize_sign_polynomial(beta, delta)
    return qsvt_apply(be, P, ledger, label), P
