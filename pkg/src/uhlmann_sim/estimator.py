"""A fit/transform wrapper around the Uhlmann algorithms.

The interface follows the familiar estimator conventions (constructor
arguments stored verbatim, ``get_params``/``set_params``, ``fit`` returns
self, fitted attributes end in an underscore) without depending on any
machine-learning library.
"""

from __future__ import annotations

import inspect

import numpy as np

from . import uhlmann as uh
from .linalg import dag
from .ledger import ResourceLedger
from .states import StatePrepOracle, as_density, canonical_purification_exact


class NotFittedError(RuntimeError):
    pass


ALGORITHMS = ("exact", "query", "sample", "mixed", "variant")


class UhlmannTransformer:
    """Learn the Uhlmann transformation from ρ to σ, then apply it.

    ``fit(X, y)`` takes the source X and the target y: purifications on
    A ⊗ B for ``exact``, ``query`` and ``sample``, density matrices for
    ``mixed`` and ``variant`` (whose transforms act on canonical
    purifications). ``transform(Z)`` applies the fitted channel to states
    on A ⊗ B, given as vectors or density matrices.
    """

    def __init__(self, delta=0.1, mode="fidelity", algorithm="query", dims=None):
        self.delta = delta
        self.mode = mode
        self.algorithm = algorithm
        self.dims = dims

    # -- parameter protocol
    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [p for p in sig.parameters if p != "self"]

    def get_params(self, deep=True):
        return {k: getattr(self, k) for k in self._param_names()}

    def set_params(self, **params):
        valid = self._param_names()
        for k, v in params.items():
            if k not in valid:
                raise ValueError(f"invalid parameter {k!r} for {type(self).__name__}")
            setattr(self, k, v)
        return self

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"

    # -- fitting
    def _split(self, n):
        if self.dims is not None:
            return tuple(self.dims)
        d = int(round(np.sqrt(n)))
        if d * d != n:
            raise ValueError("pass dims=(dA, dB) for non-square layouts")
        return d, d

    def fit(self, X, y):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        X, y = np.asarray(X, dtype=complex), np.asarray(y, dtype=complex)
        ledger = ResourceLedger(f"transformer[{self.algorithm}]")
        if self.algorithm in ("mixed", "variant"):
            if X.ndim != 2 or y.ndim != 2:
                raise ValueError("mixed algorithms fit density matrices")
            d = X.shape[0]
            self.dims_ = (d, d)
            fn = uh.uhlmann_mixed_sample if self.algorithm == "mixed" else uh.variant_uhlmann_mixed
            self.result_ = fn(X, y, self.delta, self.mode, ledger=ledger)
            self.source_ = canonical_purification_exact(X)
            self.target_ = canonical_purification_exact(y)
        else:
            if X.ndim != 1 or y.ndim != 1:
                raise ValueError("purified algorithms fit state vectors")
            dA, dB = self._split(X.size)
            self.dims_ = (dA, dB)
            self.source_, self.target_ = X / np.linalg.norm(X), y / np.linalg.norm(y)
            if self.algorithm == "exact":
                V = uh.exact_uhlmann_isometry(self.source_, self.target_, (dA, dB))
                Fa, Fe = uh.uhlmann_fidelity_check(self.source_, self.target_, (dA, dB))
                self.result_ = uh.UhlmannResult("exact", str(self.mode), self.delta, {}, ledger,
                                                Fe, Fa, output=V)
            elif self.algorithm == "query":
                lay = [("A", dA), ("B", dB)]
                self.result_ = uh.uhlmann_purified_query(
                    StatePrepOracle.from_state(self.source_, lay, "U_rho"),
                    StatePrepOracle.from_state(self.target_, lay, "U_sigma"),
                    self.delta, self.mode, ledger=ledger)
            else:
                self.result_ = uh.uhlmann_purified_sample(self.source_, self.target_, self.delta,
                                                          self.mode, ledger=ledger, dims=(dA, dB))
        self.ledger_ = ledger
        self.fidelity_ = self.result_.fidelity_achieved
        return self

    def _check(self):
        if not hasattr(self, "result_"):
            raise NotFittedError("call fit before transform")

    # -- applying
    def transform(self, Z):
        """Channel output on A ⊗ B as a density matrix."""
        self._check()
        dA, dB = self.dims_
        rho = as_density(Z)
        alg = self.algorithm
        if alg in ("sample", "mixed"):
            return uh.run_sample_channel(self.result_.engine, rho)
        if alg == "exact":
            K = np.kron(np.eye(dA), self.result_.output)
            return K @ rho @ dag(K)
        U = self.result_.output
        col = U[:, :dB] if alg == "query" else U[:, :dA]
        out = np.zeros((dA * dB, dA * dB), dtype=complex)
        # W̃ is a flag-leading dilation; trace the flag out
        for f in range(2):
            blk = col[f * (col.shape[0] // 2):(f + 1) * (col.shape[0] // 2)]
            K = np.kron(np.eye(dA), blk) if alg == "query" else np.kron(blk, np.eye(dB))
            out += K @ rho @ dag(K)
        return out

    def fit_transform(self, X, y):
        return self.fit(X, y).transform(self.source_)

    def score(self, X=None, y=None):
        """F(T(X), y); defaults to the fitted pair."""
        self._check()
        X = self.source_ if X is None else X
        y = self.target_ if y is None else np.asarray(y, dtype=complex)
        if np.asarray(y).ndim == 2 and self.algorithm in ("mixed", "variant"):
            y = canonical_purification_exact(y)
            X = canonical_purification_exact(X) if np.asarray(X).ndim == 2 else X
        out = self.transform(X)
        return float(np.real(np.vdot(y, out @ y)))
