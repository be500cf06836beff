"""Certified polynomial approximants for sign and square-root transforms.

Both families are built as Chebyshev interpolants of smooth surrogate
functions and then certified on dense grids. A polynomial that fails its
certificate is never returned silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.fft import dct
from scipy.special import erf, erfcinv

GRID_POINTS = 10001
# Below this accuracy double precision cannot certify a sup-norm bound.
DELTA_FLOOR = 1e-13


class CertificationError(RuntimeError):
    pass


def sign_degree(beta, delta):
    """Minimum odd integer u with u >= ceil((8e/beta) ln(2/delta))."""
    u = math.ceil(8 * math.e / beta * math.log(2 / delta))
    return u if u % 2 == 1 else u + 1


def cheb_coefficients(f, n):
    """Chebyshev coefficients of the degree ``n-1`` interpolant at first-kind nodes."""
    theta = np.pi * (np.arange(n) + 0.5) / n
    vals = f(np.cos(theta))
    c = dct(vals, type=2) / n
    c[0] /= 2
    return c


def cheb_eval_nodes(coef, n):
    """Evaluate a Chebyshev series at ``n`` first-kind nodes (via DCT-III)."""
    c = np.zeros(n)
    k = min(len(coef), n)
    c[:k] = coef[:k]
    x = np.cos(np.pi * (np.arange(n) + 0.5) / n)
    c2 = c.copy()
    c2[0] *= 2
    vals = dct(c2, type=3) / 2
    return x, vals


def _grid(lo, hi):
    return np.linspace(lo, hi, GRID_POINTS)


class _ChebPoly:
    """Shared evaluation for Chebyshev-basis polynomials with fixed parity."""

    coefficients: np.ndarray
    parity: str

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return C.chebval(x, self.coefficients)

    @property
    def coef(self):
        return self.coefficients


@dataclass
class SignPolynomial(_ChebPoly):
    """Odd polynomial approximating sgn(x) away from the origin.

    ``degree`` is the query-counting degree u; the stored Chebyshev series
    may be shorter (``effective_degree``) because its tail is numerically
    zero, and padding with zeros does not change the function.
    """

    coefficients: np.ndarray
    degree: int
    beta: float
    delta: float
    effective_degree: int
    certificate: dict = field(default_factory=dict)
    parity: str = "odd"

    def to_dict(self):
        return {"kind": "sign", "beta": self.beta, "delta": self.delta, "degree": self.degree,
                "effective_degree": self.effective_degree, **self.certificate}


@dataclass
class SqrtPolynomial(_ChebPoly):
    """Odd polynomial with R(x) close to sqrt(x)/2 on [m_min, 1] and R(0) = 0."""

    coefficients: np.ndarray
    degree: int
    m_min: float
    delta: float
    constant: float
    certificate: dict = field(default_factory=dict)
    parity: str = "odd"

    def to_dict(self):
        return {"kind": "sqrt", "m_min": self.m_min, "delta": self.delta, "degree": self.degree,
                "constant": self.constant, **self.certificate}


class MonomialPolynomial:
    """x -> x**k, a convenience for identity and squaring checks."""

    def __init__(self, k):
        self.k = int(k)
        self.degree = self.k
        self.parity = "odd" if self.k % 2 else "even"

    def __call__(self, x):
        return np.asarray(x, dtype=float) ** self.k


def _sup_errors(p, lo_target, target, check_lo, check_hi):
    xs = _grid(check_lo, check_hi)
    err_grid = np.max(np.abs(p(xs) - target(xs)))
    return float(err_grid)


def _certify_sign(coef, beta, delta):
    p = lambda x: C.chebval(x, coef)
    xs = _grid(-1, 1)
    px = p(xs)
    band = np.abs(xs) >= beta
    err = float(np.max(np.abs(px[band] - np.sign(xs[band])))) if band.any() else 0.0
    bound = float(np.max(np.abs(px)))
    # dense Chebyshev nodes catch oscillation between uniform grid points
    nfine = max(1 << 14, 8 * len(coef))
    xf, vf = cheb_eval_nodes(coef, nfine)
    bf = float(np.max(np.abs(vf)))
    bandf = np.abs(xf) >= beta
    ef = float(np.max(np.abs(vf[bandf] - np.sign(xf[bandf])))) if bandf.any() else 0.0
    # endpoints of the band, explicitly
    pts = np.array([beta, -beta, 1.0, -1.0])
    ee = float(np.max(np.abs(p(pts) - np.sign(pts))))
    return {
        "grid_sup_error": max(err, ef, ee),
        "grid_max_abs": max(bound, bf),
        "grid_points": GRID_POINTS,
        "fine_points": nfine,
    }


def synthesize_sign_polynomial(beta, delta):
    """Certified odd approximation of sgn on [-1, -beta] ∪ [beta, 1].

    Built from (1 - delta/4) * erf(k x) with erfc(k beta) = delta/2, so the
    surrogate is within 3 delta / 4 of sgn on the band; the Chebyshev tail is
    cut at the first odd degree whose certificate passes.
    """
    if not (0 < beta <= 1):
        raise ValueError("beta must lie in (0, 1]")
    if not (0 < delta < 0.5):
        raise ValueError("delta must lie in (0, 1/2)")
    u = sign_degree(beta, delta)
    flags = []
    d_eff = max(delta, DELTA_FLOOR)
    if d_eff != delta:
        flags.append(f"delta clamped to {DELTA_FLOOR:g} for certification")
    k = float(erfcinv(d_eff / 2)) / beta
    scale = 1 - d_eff / 4
    f = lambda x: scale * erf(k * x)
    n = 1 << max(10, int(math.ceil(math.log2(4 * u + 64))))
    c_full = cheb_coefficients(f, n)
    c_full[0::2] = 0.0
    # start from the degree where the coefficient tail drops below delta/8
    tail = np.cumsum(np.abs(c_full[::-1]))[::-1]
    start = int(np.argmax(tail <= d_eff / 8)) if np.any(tail <= d_eff / 8) else len(c_full) - 1
    deg = start if start % 2 == 1 else start + 1
    cap = 4 * u
    while True:
        coef = c_full[: deg + 1].copy()
        cert = _certify_sign(coef, beta, d_eff)
        if cert["grid_sup_error"] <= d_eff and cert["grid_max_abs"] <= 1.0:
            break
        deg += 2
        if deg > cap:
            raise CertificationError(f"sign polynomial failed certification up to degree {cap}")
    escalated = deg > u
    if escalated:
        flags.append(f"degree escalated beyond u={u} to {deg}")
    cert["flags"] = flags
    return SignPolynomial(coefficients=coef, degree=max(u, deg), beta=beta, delta=delta,
                          effective_degree=deg, certificate=cert)


def _sqrt_target(m_eff, delta):
    # smooth odd step: S(|x|) switches on between 0 and m_eff so that R(0) = 0
    x0 = m_eff / 2
    w = x0 / float(erfcinv(min(2e-3 * delta, 1.0)))

    def f(x):
        ax = np.abs(x)
        S = 0.5 * (erf((ax - x0) / w) - erf((-ax - x0) / w))
        return 0.5 * np.sign(x) * np.sqrt(ax) * S

    return f


def sqrt_degree_constant(degree, m_min, delta):
    base = min(1.0 / m_min, 1.0 / delta ** 2) * math.log(1.0 / delta)
    return degree / base


def synthesize_sqrt_polynomial(m_min, delta, max_degree=200001):
    """Certified odd polynomial R with |R(x) - sqrt(x)/2| <= delta on [m_min, 1].

    When ``m_min`` is below 4 delta^2 the step moves to 4 delta^2 and the
    bound is certified on all of [0, 1] instead, since sqrt(x)/2 <= delta
    there. Odd parity makes R(0) = 0, so kernels of PSD inputs map to zero
    exactly.
    """
    if not (0 < delta < 0.5):
        raise ValueError("delta must lie in (0, 1/2)")
    if not (0 < m_min <= 1):
        raise ValueError("m_min must lie in (0, 1]")
    d_eff = max(delta, DELTA_FLOOR)
    whole = m_min < 4 * d_eff ** 2
    m_eff = 4 * d_eff ** 2 if whole else m_min
    f = _sqrt_target(m_eff, d_eff)
    lo = 0.0 if whole else m_min
    # estimate needed degree from the step width, then refine
    guess = int(40.0 / m_eff) + 64
    n = 1 << max(12, int(math.ceil(math.log2(4 * guess))))
    n = min(n, 1 << 22)
    c_full = cheb_coefficients(f, n)
    c_full[0::2] = 0.0
    tail = np.cumsum(np.abs(c_full[::-1]))[::-1]
    ok = np.nonzero(tail <= d_eff / 4)[0]
    deg = int(ok[0]) if ok.size else n - 1
    deg = deg if deg % 2 == 1 else deg + 1
    deg = max(deg, 1)

    def check(coef):
        xs = _grid(lo, 1.0)
        px = C.chebval(xs, coef)
        err = float(np.max(np.abs(px - 0.5 * np.sqrt(xs))))
        nfine = max(1 << 14, 8 * len(coef))
        xf, vf = cheb_eval_nodes(coef, nfine)
        band = xf >= lo
        errf = float(np.max(np.abs(vf[band] - 0.5 * np.sqrt(xf[band]))))
        bound = max(float(np.max(np.abs(vf))), float(np.max(np.abs(C.chebval(_grid(-1, 1), coef)))))
        return {"grid_sup_error": max(err, errf), "grid_max_abs": bound,
                "certified_on": [lo, 1.0], "grid_points": GRID_POINTS, "fine_points": nfine}

    while True:
        coef = c_full[: deg + 1].copy()
        cert = check(coef)
        if cert["grid_sup_error"] <= d_eff and cert["grid_max_abs"] <= 1.0:
            break
        deg += 2
        if deg > min(max_degree, n - 1):
            raise CertificationError("sqrt polynomial failed certification")
    cert["flags"] = [] if d_eff == delta else [f"delta clamped to {DELTA_FLOOR:g}"]
    const = sqrt_degree_constant(deg, m_min, delta)
    return SqrtPolynomial(coefficients=coef, degree=deg, m_min=m_min, delta=delta, constant=const,
                          certificate=cert)
