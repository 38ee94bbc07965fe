"""Explicit H^2 lifts of boundary data on a periodic strip ``[0, lattice] x [0, h]``.

Three constructions are available:

* ``dirichlet-top``: ``u = L1(x2) sum_n g_n(x2) phi_n e^{i alpha_n x1}`` with value
  data ``phi`` on ``x2 = h`` and homogeneous clamped data on ``x2 = 0``;
* ``dirichlet-bottom``: the mirrored construction with data on ``x2 = 0``;
* ``neumann-top``: per-mode solutions of ``u'''' - 2 a^2 u'' + a^4 u = 0`` with
  ``u = 0`` on both walls, ``u' = 0`` at ``x2 = 0`` and ``u' = phi`` at ``x2 = h``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import ModeBasis, TraceCoefficients, trace_norm

CASES = ("dirichlet-top", "dirichlet-bottom", "neumann-top")


def lambda_n(alpha, h, exp=np.exp):
    """Determinant ``2e^{2ah} - e^{4ah} + 4a^2h^2 e^{2ah} - 1`` of the clamped mode system."""
    t = alpha * h
    e2 = exp(2 * t)
    return 2 * e2 - e2 * e2 + 4 * t * t * e2 - 1


def neumann_coefficients(alpha, h, phi=1.0):
    """Closed-form ``(C1, C2, C3, C4)`` of ``u = C1 e^{ax} + C2 x e^{ax} + C3 e^{-ax} + C4 x e^{-ax}``.

    Direct (unscaled) evaluation; only usable while ``exp(4|alpha| h)`` is finite.
    """
    lam = lambda_n(alpha, h)
    e1 = np.exp(alpha * h)
    e2 = np.exp(2 * alpha * h)
    c1 = phi * h * e1 * (e2 - 1) / lam
    c2 = phi * e1 * (2 * alpha * h - e2 + 1) / lam
    c3 = -phi * h * e1 * (e2 - 1) / lam
    c4 = -phi * e1 * (2 * alpha * h * e2 - e2 + 1) / lam
    return c1, c2, c3, c4


def neumann_system(alpha, h):
    """4x4 matrix of the wall conditions acting on ``(C1, C2, C3, C4)``."""
    ep, em = np.exp(alpha * h), np.exp(-alpha * h)
    return np.array([
        [1.0, 0.0, 1.0, 0.0],
        [alpha, 1.0, -alpha, 1.0],
        [ep, h * ep, em, h * em],
        [alpha * ep, (1 + alpha * h) * ep, -alpha * em, (1 - alpha * h) * em],
    ])


def _neumann_terms(alpha, h, exp=np.exp):
    # u_n / phi = sum_j (p0_j + p1_j x) exp(rate_j x + shift_j) / det, arranged so
    # that every exponent is non-positive on [0, h]
    if alpha > 0:
        t = alpha * h
        det = 2 * exp(-2 * t) - 1 + 4 * t * t * exp(-2 * t) - exp(-4 * t)
        shifts = (-t, -3 * t, -t, -3 * t)
    else:
        t = alpha * h
        det = lambda_n(alpha, h, exp)
        shifts = (3 * t, t, 3 * t, t)
    terms = ((alpha, shifts[0], h, -1.0),
             (alpha, shifts[1], -h, 2 * alpha * h + 1),
             (-alpha, shifts[2], -h, 1 - 2 * alpha * h),
             (-alpha, shifts[3], h, -1.0))
    return terms, det


def neumann_mode(alpha, h, x, deriv=0, exp=np.exp):
    """``d^k u_n / dx^k`` at ``x`` for unit Neumann datum; ``exp`` may be swapped
    for an arbitrary-precision exponential."""
    if alpha == 0:
        cubic = (x ** 3 / h ** 2 - x ** 2 / h,
                 3 * x ** 2 / h ** 2 - 2 * x / h,
                 6 * x / h ** 2 - 2 / h,
                 6 / h ** 2 + 0 * x)
        return cubic[deriv] if deriv < 4 else 0 * x
    terms, det = _neumann_terms(alpha, h, exp)
    total = 0
    for rate, shift, p0, p1 in terms:
        poly = rate ** deriv * (p0 + p1 * x)
        if deriv:
            poly = poly + deriv * rate ** (deriv - 1) * p1
        total = total + poly * exp(rate * x + shift)
    return total / det


def _blend_top(x, h):
    return ((3 * h - 2 * x) * x ** 2 / h ** 3,
            (6 * h * x - 6 * x ** 2) / h ** 3,
            (6 * h - 12 * x) / h ** 3)


def _blend_bottom(x, h):
    return ((h + 2 * x) * (x - h) ** 2 / h ** 3,
            (6 * x ** 2 - 6 * h * x) / h ** 3,
            (12 * x - 6 * h) / h ** 3)


def kink_location(n, h, side="top"):
    """Where the oscillatory correction of mode n switches on (top) or off (bottom)."""
    n = abs(int(n))
    if n == 0:
        return None
    if side == "top":
        return max(h - 2 * np.pi / n, 0.0)
    return min(h, 2 * np.pi / n)


def _profile_factor(n, h, x, side):
    """``(g, g', g'')`` of the mode-n profile correction."""
    k = abs(int(n))
    x = np.asarray(x, dtype=float)
    if side == "top":
        e = np.exp(-k * (h - x))
        g = [e, k * e, k * k * e]
        if k:
            on = (x > kink_location(n, h, "top")) & (x <= h)
            arg = k * (h - x)
            g[0] = g[0] + np.where(on, np.sin(arg), 0.0)
            g[1] = g[1] + np.where(on, -k * np.cos(arg), 0.0)
            g[2] = g[2] + np.where(on, -k * k * np.sin(arg), 0.0)
    else:
        e = np.exp(-k * x)
        g = [e, -k * e, k * k * e]
        if k:
            on = (x >= 0) & (x <= kink_location(n, h, "bottom"))
            arg = k * x
            g[0] = g[0] + np.where(on, np.sin(arg), 0.0)
            g[1] = g[1] + np.where(on, k * np.cos(arg), 0.0)
            g[2] = g[2] + np.where(on, -k * k * np.sin(arg), 0.0)
    return g


@dataclass
class LiftEvaluator:
    case: str
    h: float
    basis: ModeBasis
    phi: TraceCoefficients

    def __post_init__(self):
        if self.case not in CASES:
            raise ValueError(f"unknown lift case {self.case!r}")
        if self.phi.values.size != self.basis.size:
            raise ValueError("trace data and mode basis sizes differ")
        if self.case == "neumann-top":
            for a in self.basis.alpha_n:
                if a != 0:
                    lam = abs(lambda_n(a, self.h)) if abs(a * self.h) < 150 else np.inf
                    assert lam > 1e-300, f"vanishing mode determinant at alpha={a}"

    @property
    def default_order(self) -> float:
        return 0.5 if self.case == "neumann-top" else 1.5

    def mode_profiles(self, x2, deriv: int = 0):
        """Array ``(len(x2), modes)`` of ``d^deriv u_n / dx2^deriv`` including phi_n."""
        x2 = np.atleast_1d(np.asarray(x2, dtype=float))
        cols = []
        for n, a in zip(self.basis.n, self.basis.alpha_n):
            if self.case == "neumann-top":
                cols.append(neumann_mode(a, self.h, x2, deriv))
                continue
            side = "top" if self.case == "dirichlet-top" else "bottom"
            blend = _blend_top(x2, self.h) if side == "top" else _blend_bottom(x2, self.h)
            g = _profile_factor(n, self.h, x2, side)
            if deriv == 0:
                col = blend[0] * g[0]
            elif deriv == 1:
                col = blend[1] * g[0] + blend[0] * g[1]
            elif deriv == 2:
                col = blend[2] * g[0] + 2 * blend[1] * g[1] + blend[0] * g[2]
            else:
                raise ValueError("only derivatives up to order 2 are available")
            cols.append(col)
        return np.stack(cols, axis=-1) * self.phi.values

    def _synth(self, x1, x2, deriv2=0, deriv1=0):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        x1b, x2b = np.broadcast_arrays(x1, x2)
        prof = self.mode_profiles(x2b.ravel(), deriv2)
        phase = np.exp(1j * np.multiply.outer(x1b.ravel(), self.basis.alpha_n))
        phase = phase * (1j * self.basis.alpha_n) ** deriv1
        return np.sum(prof * phase, axis=-1).reshape(x1b.shape)

    def __call__(self, x1, x2):
        return self._synth(x1, x2)

    def gradient(self, x1, x2):
        return self._synth(x1, x2, deriv1=1), self._synth(x1, x2, deriv2=1)

    def hessian(self, x1, x2):
        """``(u_11, u_12, u_22)``."""
        return (self._synth(x1, x2, deriv1=2), self._synth(x1, x2, deriv1=1, deriv2=1),
                self._synth(x1, x2, deriv2=2))

    def h2_norm(self, points: int = 64) -> float:
        """Full H^2 norm over the strip from the modal representation."""
        dens = mode_h2_integrals(self.case, self.h, self.basis, points)
        return float(np.sqrt(self.basis.lattice * np.sum(dens * np.abs(self.phi.values) ** 2)))


def _one_mode_basis(basis: ModeBasis, j: int) -> ModeBasis:
    return ModeBasis(basis.lattice, 0, basis.kappa, basis.n[j:j + 1],
                     basis.alpha_n[j:j + 1], basis.beta_n[j:j + 1], basis.gamma_n[j:j + 1])


def _panels(case, h, n, alpha):
    if case == "neumann-top":
        if alpha == 0:
            return [0.0, h]
        width = min(h, 4.0 / abs(alpha))
        return list(np.linspace(0.0, h, int(np.ceil(h / width)) + 1))
    side = "top" if case == "dirichlet-top" else "bottom"
    loc = kink_location(n, h, side)
    if loc is None or loc <= 0 or loc >= h:
        return [0.0, h]
    return [0.0, loc, h]


def mode_h2_integrals(case: str, h: float, basis: ModeBasis, points: int = 64):
    """Per-mode ``int_0^h (1+a^2+a^4)|u_n|^2 + (1+2a^2)|u_n'|^2 + |u_n''|^2`` for unit data.

    Composite Gauss-Legendre with panels split at every kink of the profile.
    """
    nodes, weights = np.polynomial.legendre.leggauss(points)
    out = np.empty(basis.size)
    for j, (n, a) in enumerate(zip(basis.n, basis.alpha_n)):
        edges = _panels(case, h, n, a)
        xs = np.concatenate([0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
                             for lo, hi in zip(edges[:-1], edges[1:])])
        ws = np.concatenate([0.5 * (hi - lo) * weights
                             for lo, hi in zip(edges[:-1], edges[1:])])
        single = LiftEvaluator(case, h, _one_mode_basis(basis, j),
                               TraceCoefficients(1, np.ones(1)))
        u0, u1, u2 = (single.mode_profiles(xs, d)[:, 0] for d in range(3))
        a2 = a * a
        dens = ((1 + a2 + a2 * a2) * np.abs(u0) ** 2
                + (1 + 2 * a2) * np.abs(u1) ** 2 + np.abs(u2) ** 2)
        out[j] = float(np.dot(ws, dens))
    return out


def lift_dirichlet(phi: TraceCoefficients, h: float, basis: ModeBasis,
                   side: str = "top") -> LiftEvaluator:
    if side not in ("top", "bottom"):
        raise ValueError("side must be 'top' or 'bottom'")
    return LiftEvaluator(f"dirichlet-{side}", h, basis, phi)


def lift_neumann(phi: TraceCoefficients, h: float, basis: ModeBasis) -> LiftEvaluator:
    return LiftEvaluator("neumann-top", h, basis, phi)


def stability_ratio(evaluator: LiftEvaluator, s: float | None = None) -> float:
    """``||u||_{H^2(strip)} / ||phi||_{H^s}``."""
    if s is None:
        s = evaluator.default_order
    denom = trace_norm(evaluator.phi, evaluator.basis, s)
    if denom == 0:
        raise ValueError("zero boundary data")
    return evaluator.h2_norm() / denom


def random_traces(basis: ModeBasis, draws: int, s: float, seed: int = 0,
                  n_pool: int = 60):
    """Random trace data with ``H^s``-summable decay.

    Coefficients for ``|n| <= n_pool`` are drawn once; a basis with fewer modes
    sees the central slice, so raising the truncation extends, not replaces,
    each sample.
    """
    if basis.n_max > n_pool:
        raise ValueError("basis exceeds the coefficient pool")
    rng = np.random.default_rng(seed)
    pool = rng.standard_normal((draws, 2 * n_pool + 1)) \
        + 1j * rng.standard_normal((draws, 2 * n_pool + 1))
    n = np.arange(-n_pool, n_pool + 1)
    pool *= (1.0 + n ** 2) ** (-(s + 1) / 2)
    lo = n_pool - basis.n_max
    return [TraceCoefficients(1, row[lo:lo + basis.size]) for row in pool]


def empirical_stability_constant(case: str, h: float, basis: ModeBasis,
                                 draws: int = 100, seed: int = 0) -> float:
    """Largest stability ratio over random trace draws."""
    s = 0.5 if case == "neumann-top" else 1.5
    dens = mode_h2_integrals(case, h, basis)
    weights = (1.0 + basis.alpha_n ** 2) ** s
    worst = 0.0
    for phi in random_traces(basis, draws, s, seed):
        amp = np.abs(phi.values) ** 2
        worst = max(worst, float(np.sqrt(np.sum(dens * amp) / np.sum(weights * amp))))
    return worst


def boundary_residuals(evaluator: LiftEvaluator, samples: int = 100) -> dict:
    """Max deviation of each prescribed wall value over ``samples`` points in x1.

    Keys name the wall (``top`` is ``x2 = h``) and the quantity (value or
    normal derivative).
    """
    ev = evaluator
    x1 = np.linspace(0.0, ev.basis.lattice, samples)
    trace = ev.phi.evaluate(ev.basis, x1)
    top = np.full_like(x1, ev.h)
    bottom = np.zeros_like(x1)
    data = {"top_value": ev(x1, top), "bottom_value": ev(x1, bottom),
            "top_slope": ev.gradient(x1, top)[1], "bottom_slope": ev.gradient(x1, bottom)[1]}
    target = {"dirichlet-top": "top_value", "dirichlet-bottom": "bottom_value",
              "neumann-top": "top_slope"}[ev.case]
    data[target] = data[target] - trace
    return {k: float(np.max(np.abs(v))) for k, v in data.items()}
