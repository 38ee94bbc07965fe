"""Polynomial PML stretching profile for a periodic strip.

The strip is bounded by the interfaces ``x2 = h1`` (top) and ``x2 = h2``
(bottom).  Above and below, absorbing layers of thickness ``dh1`` and ``dh2``
use the complex stretching ``sigma(t) = 1 + (sigma1 + i sigma2) r**m`` where
``r`` is the normalised depth into the layer.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class PMLValidationError(ValueError):
    """Raised when PML parameters violate the admissibility conditions."""


@dataclass(frozen=True)
class PmlProfile:
    h1: float = 0.5
    h2: float = -0.5
    dh1: float = 2.5
    dh2: float = 2.5
    sigma1: float = 14.0
    sigma2: float = 5.0
    m: int = 4

    def __post_init__(self):
        if not self.h1 > self.h2:
            raise PMLValidationError("h1 must lie above h2")
        if self.dh1 <= 0 or self.dh2 <= 0:
            raise PMLValidationError("layer thicknesses must be positive")

    @property
    def strength(self) -> complex:
        return complex(self.sigma1, self.sigma2)

    @property
    def top(self) -> float:
        return self.h1 + self.dh1

    @property
    def bottom(self) -> float:
        return self.h2 - self.dh2

    @property
    def outer_value(self) -> complex:
        """sigma on the outer PML boundaries."""
        return 1.0 + self.strength

    @property
    def mean_stretch(self) -> complex:
        """Average of sigma across a layer: 1 + (sigma1 + i sigma2)/(m+1)."""
        return 1.0 + self.strength / (self.m + 1)

    def _depths(self, t):
        t = np.asarray(t, dtype=float)
        upper = t > self.h1
        lower = t < self.h2
        r = np.zeros_like(t)
        r = np.where(upper, (t - self.h1) / self.dh1, r)
        r = np.where(lower, (self.h2 - t) / self.dh2, r)
        return t, upper, lower, r

    def sigma(self, t):
        t, upper, lower, r = self._depths(t)
        out = 1.0 + self.strength * r ** self.m
        return np.where(upper | lower, out, 1.0 + 0j)

    def sigma_derivatives(self, t, order: int = 3):
        """Return ``[sigma, sigma', ..., sigma^(order)]`` at ``t``.

        Each derivative is taken in ``t`` (chain rule through the
        normalised depth, which flips sign in the lower layer).
        """
        t, upper, lower, r = self._depths(t)
        m = self.m
        out = [self.sigma(t)]
        coef = self.strength
        for k in range(1, order + 1):
            coef = coef * (m - k + 1)
            if m - k < 0:
                term = np.zeros_like(r)
            else:
                term = r ** (m - k)
            up = coef * term / self.dh1 ** k
            lo = coef * term / self.dh2 ** k * (-1) ** k
            val = np.where(upper, up, np.where(lower, lo, 0.0))
            out.append(val + 0j)
        return out

    def dsigma(self, t):
        return self.sigma_derivatives(t, order=1)[1]

    def _excess_integral(self, t):
        # integral of (sigma - 1) from the nearest interface to t
        t, upper, lower, r = self._depths(t)
        m = self.m
        up = self.strength * self.dh1 * r ** (m + 1) / (m + 1)
        lo = -self.strength * self.dh2 * r ** (m + 1) / (m + 1)
        return np.where(upper, up, np.where(lower, lo, 0.0)) + 0j

    def stretched(self, x2):
        """Complex coordinate ``int_0^x2 sigma(t) dt``."""
        x2 = np.asarray(x2, dtype=float)
        return x2 + self._excess_integral(x2) - self._excess_integral(0.0)

    def region(self, x2):
        """0 inside the strip, 1 in the upper layer, 2 in the lower layer."""
        _, upper, lower, _ = self._depths(x2)
        return np.where(upper, 1, np.where(lower, 2, 0))


def sigma(t, profile: PmlProfile):
    return profile.sigma(t)


def stretched_coordinate(x2, profile: PmlProfile):
    return profile.stretched(x2)


@dataclass(frozen=True)
class MaterialParams:
    kappa: float = float(np.pi)
    mu: float = 0.5

    def __post_init__(self):
        if not self.kappa > 0:
            raise PMLValidationError("wavenumber must be positive")
        if not 0.0 < self.mu < 1.0:
            raise PMLValidationError(f"Poisson ratio must lie in (0, 1), got {self.mu}")


@dataclass(frozen=True)
class ValidityReport:
    ok: bool
    lhs: float
    rhs: float
    order_ok: bool
    message: str


def validate(profile: PmlProfile, material: MaterialParams) -> ValidityReport:
    """Check ``1 + sigma1 > sqrt((3+mu)/(1-mu)) sigma2`` and ``m > 3``.

    Violations are reported, not raised, so parameter sweeps can probe the
    admissibility boundary.
    """
    mu = material.mu
    lhs = 1.0 + profile.sigma1
    rhs = float(np.sqrt((3.0 + mu) / (1.0 - mu)) * profile.sigma2)
    order_ok = profile.m > 3
    problems = []
    if not lhs > rhs:
        problems.append(f"1+sigma1={lhs:g} does not exceed {rhs:g}")
    if not order_ok:
        problems.append(f"polynomial order m={profile.m} must exceed 3")
    ok = not problems
    return ValidityReport(ok, lhs, rhs, order_ok, "; ".join(problems) or "ok")


def require_valid(profile: PmlProfile, material: MaterialParams,
                  allow_invalid: bool = False) -> ValidityReport:
    report = validate(profile, material)
    if not report.ok and not allow_invalid:
        raise PMLValidationError(report.message)
    return report


@dataclass(frozen=True)
class GardingConstants:
    c1: float
    c2: float
    assumptions_hold: bool


def garding_constants(profile: PmlProfile, material: MaterialParams) -> GardingConstants:
    """Coercivity and shift constants of the stretched plate form.

    The closed forms were derived for ``mu = 0.5`` and
    ``sigma2 = (1 + sigma1)/3``; ``assumptions_hold`` reports whether the
    given parameters satisfy them.
    """
    s1, s2, m = profile.sigma1, profile.sigma2, profile.m
    kappa, mu = material.kappa, material.mu
    c1 = min(7.0 / 24.0,
             (7.0 / 51.0) * 0.9 ** 3 / (1.0 + s1) ** 3,
             (9.0 / 20.0) / (1.0 + s1) ** 2)
    c2 = max((31.0 / 7.0 + 51.0 * (1.0 + s1) ** 3 / 7.0 * (10.0 / 9.0) ** 3)
             * m ** 2 * (s1 ** 2 + s2 ** 2),
             kappa ** 2 * (1.0 + s1))
    holds = abs(mu - 0.5) < 1e-12 and abs(s2 - (1.0 + s1) / 3.0) < 1e-12
    return GardingConstants(c1, c2, holds)


def _jet_mul(a, b):
    n = min(len(a), len(b))
    out = []
    for k in range(n):
        acc = 0
        binom = 1
        for j in range(k + 1):
            acc = acc + binom * a[j] * b[k - j]
            binom = binom * (k - j) // (j + 1)
        out.append(acc)
    return out


def _stretched_wave_factors(x2, beta, profile: PmlProfile):
    """Factors c2, c4 with ``D^k e^{-i beta x2} = c_k e^{-i beta x2}``.

    ``D = (1/sigma) d/dx2``.  The recursion ``c_{k+1} = (c_k' - i beta c_k)/sigma``
    is carried on truncated Taylor jets so every derivative of sigma enters
    in closed form.
    """
    sig, d1, d2, d3 = profile.sigma_derivatives(x2, order=3)
    inv = 1.0 / sig
    inv_jet = [inv,
               -d1 * inv ** 2,
               -d2 * inv ** 2 + 2 * d1 ** 2 * inv ** 3,
               -d3 * inv ** 2 + 6 * d1 * d2 * inv ** 3 - 6 * d1 ** 3 * inv ** 4]
    c = [np.ones_like(sig), 0 * sig, 0 * sig, 0 * sig, 0 * sig]
    coeffs = [c]
    for _ in range(4):
        shifted = [c[k + 1] - 1j * beta * c[k] for k in range(len(c) - 1)]
        c = _jet_mul(inv_jet, shifted)
        coeffs.append(c)
    return coeffs[2][0], coeffs[4][0]


def source_f(x1, x2, wave, profile: PmlProfile, variant: str = "biharmonic"):
    """Source supported in the upper layer that compensates the incident wave.

    ``variant="biharmonic"`` applies the stretched bi-Laplacian minus kappa^4
    to the plane wave; ``variant="helmholtz_decoupled"`` applies
    ``2 kappa^2 [d1(sigma d1) + d2(sigma^-1 d2) + kappa^2 sigma]``.
    Both vanish identically for ``x2 <= h1``.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    k, a, b = wave.kappa, wave.alpha, wave.beta
    ui = np.exp(1j * (a * x1 - b * x2))
    if variant == "biharmonic":
        c2, c4 = _stretched_wave_factors(x2, b, profile)
        val = (a ** 4 - 2 * a ** 2 * c2 + c4 - k ** 4) * ui
    elif variant == "helmholtz_decoupled":
        sig, ds = profile.sigma_derivatives(x2, order=1)
        val = 2 * k ** 2 * ui * (sig * (k ** 2 - a ** 2) - b ** 2 / sig
                                 + 1j * b * ds / sig ** 2)
    else:
        raise ValueError(f"unknown source variant {variant!r}")
    return np.where(x2 > profile.h1, val, 0.0 + 0j)
