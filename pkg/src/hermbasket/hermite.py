"""Probabilists' Hermite algebra and exact moment matching of J(Z) = sum alpha_k He_k(Z)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as P

MONOTONE_RANGE = (-8.0, 8.0)
DEGENERATE_VARIANCE = 1e-14
RESIDUAL_TOL = 1e-10
MAX_RESTARTS = 40

# E[Z^n] for n = 0..30: zero for odd n, (n-1)!! for even n
NORMAL_MOMENTS = np.array(
    [0.0 if n % 2 else float(math.prod(range(n - 1, 0, -2))) for n in range(31)]
)


class MatchFailure(RuntimeError):
    """No set of Hermite coefficients reproduces the target moments."""


@dataclass(frozen=True)
class HermiteExpansion:
    alpha: np.ndarray
    variant: str
    m: int
    residual_norm: float
    iterations: int
    monotone: bool
    restarts: int = 0

    @property
    def polynomial(self) -> Polynomial:
        return hermite_series_to_poly(self.alpha)

    def __call__(self, z):
        return self.polynomial(z)


def hermite_poly(k: int) -> Polynomial:
    """He_k in the monomial basis via He_k = z He_{k-1} - He_{k-1}'."""
    if not 0 <= k <= 12:
        raise ValueError("Hermite degree must be in 0..12")
    h = Polynomial([1.0])
    z = Polynomial([0.0, 1.0])
    for _ in range(k):
        h = z * h - h.deriv()
    return h


_HERMITE_MONO = [hermite_poly(k).coef for k in range(13)]


def hermite_series_to_poly(alpha) -> Polynomial:
    coef = np.zeros(len(alpha))
    for k, a in enumerate(alpha):
        coef[: k + 1] += a * _HERMITE_MONO[k]
    return Polynomial(coef)


def normal_expectation(coef: np.ndarray) -> float:
    """E[p(Z)] for a polynomial given by monomial coefficients (degree <= 30)."""
    n = len(coef)
    if n > NORMAL_MOMENTS.size:
        raise ValueError("polynomial degree too high for the moment table")
    return math.fsum(coef * NORMAL_MOMENTS[:n])


def _powers(coef: np.ndarray, k: int) -> list[np.ndarray]:
    out = [np.array([1.0])]
    for _ in range(k):
        out.append(np.convolve(out[-1], coef))
    return out


def expansion_moment(alpha, k: int) -> float:
    """E[J(Z)^k] computed exactly by expanding J^k in monomials."""
    if k > 6:
        raise ValueError("expansion moments are tabulated up to order 6")
    coef = hermite_series_to_poly(np.asarray(alpha, dtype=float)).coef
    return normal_expectation(_powers(coef, k)[k])


def expansion_moments(alpha, m: int) -> np.ndarray:
    coef = hermite_series_to_poly(np.asarray(alpha, dtype=float)).coef
    pw = _powers(coef, m)
    return np.array([normal_expectation(pw[k]) for k in range(1, m + 1)])


def expansion_moment_jacobian(alpha, m: int) -> np.ndarray:
    """d E[J^k] / d alpha_i for k = 1..m (rows) and i = 1..m-1 (columns).

    Uses d E[J^k]/d alpha_i = k E[J^{k-1} He_i].
    """
    alpha = np.asarray(alpha, dtype=float)
    coef = hermite_series_to_poly(alpha).coef
    pw = _powers(coef, m - 1)
    jac = np.zeros((m, len(alpha) - 1))
    for k in range(1, m + 1):
        for i in range(1, len(alpha)):
            jac[k - 1, i - 1] = k * normal_expectation(np.convolve(pw[k - 1], _HERMITE_MONO[i]))
    return jac


def is_monotone(alpha, lo: float = MONOTONE_RANGE[0], hi: float = MONOTONE_RANGE[1]) -> bool:
    """True when J'(z) > 0 on [lo, hi]."""
    d = hermite_series_to_poly(alpha).deriv()
    if d.degree() < 1:
        return bool(d.coef[0] > 0)
    crit = [z for z in real_roots(d) if lo < z < hi]
    return bool(not crit and d(lo) > 0 and d(hi) > 0)


# -- solver ---------------------------------------------------------------------


def _scales(targets: np.ndarray) -> np.ndarray:
    sd = math.sqrt(max(targets[1] - targets[0] ** 2, 0.0))
    k = np.arange(1, targets.size + 1)
    return np.maximum(np.maximum(np.abs(targets), sd**k), 1e-300)


def residual_norm(alpha, targets) -> float:
    """Largest moment mismatch |E[J^k] - target_k| relative to max(|target_k|, sd^k)."""
    targets = np.asarray(targets, dtype=float)
    got = expansion_moments(alpha, targets.size)
    return float(np.max(np.abs(got - targets) / _scales(targets)))


def canonical_branch(alpha: np.ndarray) -> np.ndarray:
    """Flip odd coefficients when alpha_1 < 0; J(-Z) has the same law as J(Z)."""
    alpha = np.array(alpha, dtype=float)
    if alpha.size > 1 and alpha[1] < 0:
        alpha[1::2] *= -1.0
    return alpha


def _newton(x0: np.ndarray, alpha0: float, targets: np.ndarray, scales: np.ndarray,
            max_iter: int = 100) -> tuple[np.ndarray, float, int]:
    m = targets.size

    def resid(x):
        a = np.concatenate(([alpha0], x))
        return (expansion_moments(a, m)[1:] - targets[1:]) / scales[1:]

    x = x0.copy()
    r = resid(x)
    norm = float(np.max(np.abs(r)))
    it = 0
    for it in range(1, max_iter + 1):
        if norm <= 1e-14:
            break
        jac = expansion_moment_jacobian(np.concatenate(([alpha0], x)), m)[1:] / scales[1:, None]
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        lam = 1.0
        while lam > 1e-10:
            x_new = x + lam * step
            r_new = resid(x_new)
            norm_new = float(np.max(np.abs(r_new)))
            if np.isfinite(norm_new) and norm_new < (1.0 - 1e-4 * lam) * norm:
                break
            lam *= 0.5
        else:
            break
        x, r, norm = x_new, r_new, norm_new
    return x, norm, it


def match_moments(targets, m: int | None = None, variant: str = "A",
                  max_restarts: int = MAX_RESTARTS) -> HermiteExpansion:
    """Coefficients alpha_0..alpha_{m-1} whose J(Z) has exactly the target moments.

    Damped Newton from the Gaussian start alpha = (t_1, sd, 0, ...), then up to
    ``max_restarts`` seeded perturbations of that start.  The alpha_1 > 0 branch
    is returned.

    Raises:
        MatchFailure: no restart reaches a residual below RESIDUAL_TOL.
    """
    targets = np.asarray(targets, dtype=float)
    m = targets.size if m is None else m
    if m not in (4, 6) or targets.size != m:
        raise ValueError("need exactly m targets with m in {4, 6}")
    var = targets[1] - targets[0] ** 2
    if var <= DEGENERATE_VARIANCE:
        if var < -DEGENERATE_VARIANCE:
            raise MatchFailure(f"target variance is negative ({var:.3g})")
        alpha = np.zeros(m)
        alpha[0] = targets[0]
        return HermiteExpansion(alpha, variant, m, residual_norm(alpha, targets), 0, False)

    sd = math.sqrt(var)
    scales = _scales(targets)
    start = np.zeros(m - 1)
    start[0] = sd
    rng = np.random.default_rng(20240607)
    total_iter = 0
    for attempt in range(max_restarts + 1):
        if attempt == 0:
            x0 = start
        else:
            x0 = start * (1.0 + rng.uniform(-0.5, 0.5, m - 1))
            x0[1:] = sd * rng.uniform(-0.5, 0.5, m - 2) / np.array(
                [math.factorial(j) for j in range(2, m)])
        x, _, it = _newton(x0, targets[0], targets, scales)
        total_iter += it
        alpha = canonical_branch(np.concatenate(([targets[0]], x)))
        res = residual_norm(alpha, targets) if np.all(np.isfinite(alpha)) else math.inf
        if res <= RESIDUAL_TOL:
            return HermiteExpansion(alpha, variant, m, res, total_iter, is_monotone(alpha),
                                    restarts=attempt)
    raise MatchFailure(f"moment matching failed after {max_restarts} restarts")


# -- roots ----------------------------------------------------------------------


def real_roots(p: Polynomial | np.ndarray, imag_tol: float = 1e-9) -> list[float]:
    """Sorted real roots from companion-matrix eigenvalues, Newton-polished."""
    coef = np.asarray(p.coef if isinstance(p, Polynomial) else p, dtype=float)
    coef = np.trim_zeros(coef, "b")
    if coef.size < 2:
        return []
    poly = Polynomial(coef)
    dpoly = poly.deriv()
    found = []
    for z in P.polyroots(coef):
        scale = max(1.0, abs(z))
        if abs(z.imag) > imag_tol * scale:
            continue
        x = float(z.real)
        for _ in range(8):
            fx, dfx = poly(x), dpoly(x)
            if dfx == 0 or fx == 0:
                break
            x_new = x - fx / dfx
            if abs(poly(x_new)) >= abs(fx):
                break
            x = x_new
        found.append(x)
    found.sort()
    out = []
    for x in found:
        if not out or abs(x - out[-1]) > 1e-12 * max(1.0, abs(x)):
            out.append(x)
    return out
