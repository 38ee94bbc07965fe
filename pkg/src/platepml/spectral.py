"""Fourier-mode machinery for quasi-periodic plate waves.

Everything here acts diagonally on the Rayleigh modes
``exp(i alpha_n x1)``, ``alpha_n = alpha + 2 pi n / lattice``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class CutoffError(ValueError):
    """A mode sits exactly at cut-off (|alpha_n| = kappa)."""


@dataclass(frozen=True)
class IncidentWave:
    kappa: float = float(np.pi)
    theta: float = float(np.pi / 3)

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("wavenumber must be positive")
        if not -np.pi / 2 < self.theta < np.pi / 2:
            raise ValueError("incident angle must lie in (-pi/2, pi/2)")

    @property
    def alpha(self) -> float:
        return self.kappa * np.sin(self.theta)

    @property
    def beta(self) -> float:
        return self.kappa * np.cos(self.theta)

    @property
    def gamma(self) -> float:
        return float(np.sqrt(self.kappa ** 2 + self.alpha ** 2))

    def __call__(self, x1, x2):
        return np.exp(1j * (self.alpha * np.asarray(x1) - self.beta * np.asarray(x2)))

    def dx2(self, x1, x2):
        return -1j * self.beta * self(x1, x2)


@dataclass(frozen=True)
class ModeBasis:
    lattice: float
    n_max: int
    kappa: float
    n: np.ndarray = field(repr=False)
    alpha_n: np.ndarray = field(repr=False)
    beta_n: np.ndarray = field(repr=False)
    gamma_n: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return 2 * self.n_max + 1

    @property
    def gamma(self) -> float:
        return float(self.gamma_n[self.n_max])

    @property
    def propagating(self) -> np.ndarray:
        return np.abs(self.alpha_n) < self.kappa

    def index(self, n: int) -> int:
        return n + self.n_max


def make_mode_basis(wave: IncidentWave, lattice: float = 1.0, n_max: int = 20,
                    tol: float = 1e-12) -> ModeBasis:
    n = np.arange(-n_max, n_max + 1)
    alpha_n = wave.alpha + 2.0 * np.pi * n / lattice
    kappa = wave.kappa
    gap = np.abs(np.abs(alpha_n) - kappa)
    if np.any(gap < tol):
        bad = n[gap < tol]
        raise CutoffError(f"modes {bad.tolist()} are at cut-off (|alpha_n| = kappa)")
    beta_n = np.empty(n.size, dtype=complex)
    prop = kappa > np.abs(alpha_n)
    # explicit branch split keeps beta_n exactly real or exactly imaginary
    beta_n[prop] = np.sqrt(kappa ** 2 - alpha_n[prop] ** 2)
    beta_n[~prop] = 1j * np.sqrt(alpha_n[~prop] ** 2 - kappa ** 2)
    gamma_n = np.sqrt(kappa ** 2 + alpha_n ** 2)
    return ModeBasis(lattice, n_max, kappa, n, alpha_n, beta_n, gamma_n)


@dataclass
class TraceCoefficients:
    """Fourier coefficients ``u^(n)(h_k)`` for ``n = -N..N`` on interface ``k``."""

    k: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.ndim != 1 or self.values.size % 2 != 1:
            raise ValueError("trace coefficients need an odd-length 1-D array")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("trace coefficients must be finite")

    @property
    def n_max(self) -> int:
        return (self.values.size - 1) // 2

    @classmethod
    def zeros(cls, basis: ModeBasis, k: int = 1):
        return cls(k, np.zeros(basis.size, dtype=complex))

    @classmethod
    def delta(cls, basis: ModeBasis, n: int = 0, k: int = 1, value: complex = 1.0):
        out = cls.zeros(basis, k)
        out.values[basis.index(n)] = value
        return out

    def evaluate(self, basis: ModeBasis, x1):
        x1 = np.asarray(x1, dtype=float)
        phases = np.exp(1j * np.multiply.outer(x1, basis.alpha_n))
        return phases @ self.values


def _check(basis: ModeBasis, *traces: TraceCoefficients):
    for t in traces:
        if t.values.size != basis.size:
            raise ValueError(f"trace has {t.values.size} modes, basis has {basis.size}")


def trace_norm(coeffs: TraceCoefficients, basis: ModeBasis, s: float) -> float:
    """Weighted norm ``(lattice * sum (1 + alpha_n^2)^s |u_n|^2)^(1/2)``."""
    _check(basis, coeffs)
    w = (1.0 + basis.alpha_n ** 2) ** s
    return float(np.sqrt(basis.lattice * np.sum(w * np.abs(coeffs.values) ** 2)))


def dtn_symbols(basis: ModeBasis, mu: float):
    """Per-mode entries ``(T11, T12, T21, T22)`` of the plate DtN map."""
    a, b, g = basis.alpha_n, basis.beta_n, basis.gamma_n
    t11 = 1j * b * g * (g - 1j * b)
    t12 = -(mu * a ** 2 - 1j * b * g)
    t21 = -(mu * a ** 2 - 1j * b * g)
    t22 = -(g - 1j * b)
    return t11, t12, t21, t22


def apply_dtn(basis: ModeBasis, k: int, f: TraceCoefficients, g: TraceCoefficients,
              mu: float = 0.5):
    """Return ``(N u, M u)`` from the traces ``f = u``, ``g = d_nu u`` on interface k."""
    _check(basis, f, g)
    t11, t12, t21, t22 = dtn_symbols(basis, mu)
    nu = TraceCoefficients(k, t11 * f.values + t12 * g.values)
    mu_ = TraceCoefficients(k, t21 * f.values + t22 * g.values)
    return nu, mu_


def boundary_operators(basis: ModeBasis, k: int, mu: float, d0, d1, d2, d3):
    """Apply the plate edge operators to modal x2-derivative data.

    ``d0..d3`` are TraceCoefficients of ``u, d2 u, d2^2 u, d2^3 u`` on the
    interface.  The normal is ``+x2`` on interface 1 and ``-x2`` on interface 2.
    Returns ``(N u, M u)`` with ``M u = mu d1^2 u + d_nu^2 u`` and
    ``N u = -(2 - mu) d1^2 d_nu u - d_nu^3 u``.
    """
    sgn = 1.0 if k == 1 else -1.0
    a2 = basis.alpha_n ** 2
    m_op = -mu * a2 * d0.values + d2.values
    n_op = sgn * ((2.0 - mu) * a2 * d1.values - d3.values)
    return TraceCoefficients(k, n_op), TraceCoefficients(k, m_op)


def incident_traces(wave: IncidentWave, h1: float, basis: ModeBasis):
    """Single-mode incident data ``(p1, p2)`` on the top interface."""
    a, b, g = wave.alpha, wave.beta, wave.gamma
    phase = np.exp(-1j * b * h1)
    p1 = TraceCoefficients.zeros(basis, 1)
    p2 = TraceCoefficients.zeros(basis, 1)
    p1.values[basis.index(0)] = -(2j * b * a ** 2 + 2 * b ** 2 * g) * phase
    p2.values[basis.index(0)] = -(2 * b ** 2 + 2j * b * g) * phase
    return p1, p2


def _layer_amplitudes(basis: ModeBasis, f: TraceCoefficients, g: TraceCoefficients):
    b, gm = basis.beta_n, basis.gamma_n
    den = gm + 1j * b
    a_coef = (gm * f.values + g.values) / den
    b_coef = (1j * b * f.values - g.values) / den
    return a_coef, b_coef


def _layer_exponentials(basis: ModeBasis, profile, k: int):
    depth = profile.dh1 if k == 1 else profile.dh2
    s = profile.mean_stretch
    return (np.exp(1j * basis.beta_n * s * depth),
            np.exp(-basis.gamma_n * s * depth))


def apply_propagating(basis: ModeBasis, profile, k: int, f: TraceCoefficients,
                      g: TraceCoefficients):
    """Transport interface traces ``(f, g)`` to the outer boundary of layer k.

    Returns the value ``P`` and outward normal derivative ``Q`` of the
    outgoing modal field on the outer PML boundary.
    """
    _check(basis, f, g)
    a_coef, b_coef = _layer_amplitudes(basis, f, g)
    e_prop, e_evan = _layer_exponentials(basis, profile, k)
    outer = profile.outer_value
    p = a_coef * e_prop + b_coef * e_evan
    q = (1j * basis.beta_n * outer * a_coef * e_prop
         - basis.gamma_n * outer * b_coef * e_evan)
    return TraceCoefficients(k, p), TraceCoefficients(k, q)


def propagating_factors(basis: ModeBasis, profile, k: int):
    """Per-mode coefficients with ``P = pf f + pg g`` and ``Q = qf f + qg g``."""
    b, gm = basis.beta_n, basis.gamma_n
    den = gm + 1j * b
    e_prop, e_evan = _layer_exponentials(basis, profile, k)
    outer = profile.outer_value
    pf = (gm * e_prop + 1j * b * e_evan) / den
    pg = (e_prop - e_evan) / den
    qf = outer * 1j * b * gm * (e_prop - e_evan) / den
    qg = outer * (1j * b * e_prop + gm * e_evan) / den
    return pf, pg, qf, qg


def theta(basis: ModeBasis, profile, wave: IncidentWave) -> float:
    """PML efficiency constant (largest of three decay exponentials)."""
    m1 = profile.m + 1
    delta = min(profile.dh1, profile.dh2)
    re_b = basis.beta_n.real[basis.beta_n.real > 0]
    im_b = basis.beta_n.imag[basis.beta_n.imag > 0]
    terms = [np.exp(-(m1 + profile.sigma1) / m1 * delta * wave.gamma)]
    if re_b.size:
        terms.append(np.exp(-profile.sigma2 * delta * re_b.min() / m1))
    if im_b.size:
        terms.append(np.exp(-(m1 + profile.sigma1) / m1 * delta * im_b.min()))
    return float(max(terms))


@dataclass(frozen=True)
class DecayRow:
    dh: float
    norm_p: float
    norm_q: float
    theta: float

    @property
    def ratio_p(self) -> float:
        return self.norm_p / self.theta

    @property
    def ratio_q(self) -> float:
        return self.norm_q / self.theta


def propagating_norms(basis: ModeBasis, profile, k: int = 1):
    """Operator norms of ``P_k`` (into H^{3/2}) and ``Q_k`` (into H^{1/2}).

    The input space carries ``||f||_{3/2} + ||g||_{1/2}``; for diagonal
    operators the norm is the largest single-mode amplification.
    """
    w = np.sqrt(1.0 + basis.alpha_n ** 2)
    pf, pg, qf, qg = propagating_factors(basis, profile, k)
    norm_p = max(np.max(np.abs(pf)), np.max(np.abs(pg) * w))
    norm_q = max(np.max(np.abs(qf) / w), np.max(np.abs(qg)))
    return float(norm_p), float(norm_q)


def operator_decay_report(basis: ModeBasis, profile, wave: IncidentWave, depths,
                          k: int = 1):
    from dataclasses import replace
    rows = []
    for dh in depths:
        prof = replace(profile, dh1=float(dh), dh2=float(dh))
        norm_p, norm_q = propagating_norms(basis, prof, k)
        rows.append(DecayRow(float(dh), norm_p, norm_q, theta(basis, prof, wave)))
    return rows


def _modal_layer_sum(basis, profile, k, f, g, x1, x2, derivative):
    a_coef, b_coef = _layer_amplitudes(basis, f, g)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if k == 1:
        shift = profile.stretched(x2) - profile.stretched(profile.h1)
        sgn = 1.0
    else:
        shift = profile.stretched(x2) - profile.stretched(profile.h2)
        sgn = -1.0
    b, gm = basis.beta_n, basis.gamma_n
    z = np.multiply.outer(shift, np.ones_like(b))
    e_prop = np.exp(sgn * 1j * b * z)
    e_evan = np.exp(-sgn * gm * z)
    if derivative:
        sig = profile.sigma(x2)[..., None]
        e_prop = sgn * 1j * b * sig * e_prop
        e_evan = -sgn * gm * sig * e_evan
    modes = a_coef * e_prop + b_coef * e_evan
    phase = np.exp(1j * np.multiply.outer(x1, basis.alpha_n))
    return np.sum(modes * phase, axis=-1)


def reference_field(basis: ModeBasis, profile, k: int, f: TraceCoefficients,
                    g: TraceCoefficients, x1, x2, wave: IncidentWave | None = None):
    """Outgoing PML field in layer k built from interface traces ``(f, g)``.

    On layer 1 the incident wave is added when ``wave`` is given.
    """
    _check(basis, f, g)
    out = _modal_layer_sum(basis, profile, k, f, g, x1, x2, derivative=False)
    if k == 1 and wave is not None:
        out = out + wave(x1, x2)
    return out


def reference_field_dx2(basis: ModeBasis, profile, k: int, f: TraceCoefficients,
                        g: TraceCoefficients, x1, x2, wave: IncidentWave | None = None):
    """Physical x2-derivative of :func:`reference_field`."""
    _check(basis, f, g)
    out = _modal_layer_sum(basis, profile, k, f, g, x1, x2, derivative=True)
    if k == 1 and wave is not None:
        out = out + wave.dx2(x1, x2)
    return out


def apply_first_order_dtn(basis: ModeBasis, which: str, f: TraceCoefficients):
    if which == "T1":
        sym = 1j * basis.beta_n
    elif which == "T2":
        sym = 1j * basis.gamma_n
    else:
        raise ValueError(f"unknown first-order map {which!r}")
    _check(basis, f)
    return TraceCoefficients(f.k, sym * f.values)


def mode_table(basis: ModeBasis):
    """Rows ``(n, alpha_n, Re beta_n, Im beta_n, gamma_n)``."""
    return [(int(n), float(a), float(b.real), float(b.imag), float(g))
            for n, a, b, g in zip(basis.n, basis.alpha_n, basis.beta_n, basis.gamma_n)]
