"""S^1-invariant Kähler potentials on CP^1 through their symplectic potentials.

A metric on O(1) is encoded by a convex function u on the moment interval
[0, 1] of the form

    u(x) = x log x + (1 - x) log(1 - x) + v(x),     v a polynomial,

and the Kähler potential in the log coordinate s = log|z|^2 is the Legendre
conjugate f(s) = sup_x (x s - u(x)). Monge-Ampère geodesics are the Legendre
conjugates of the straight line u_t = (1 - t) u_0 + t u_1; since the singular
part is shared, u_t is again of the same form with interpolated coefficients.

Root-finding for u'(x) = s runs in the logit variable y = log(x / (1 - x)),
where the equation reads y + v'(sigmoid(y)) = s and has slope
x (1 - x) u''(x) > 0, uniformly well conditioned up to the poles.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate
from scipy.special import expit, xlogy

from .errors import NumericalFailure, PreconditionError
from .measures import ProbabilityMeasure

ROOT_TOL = 1e-12
ROOT_MAXITER = 200
S_TRUNCATION_EPS = 1e-8
RESIDUAL_STEP = 1e-3
VELOCITY_STEP = 1e-4

_CHECK_GRID = np.linspace(0.0, 1.0, 4001)


def _softplus(y):
    return np.logaddexp(0.0, y)


@dataclass(frozen=True, eq=False)
class SymplecticPotential:
    """Guillemin potential plus a polynomial correction ``v`` (coefficients low to high)."""

    poly_coeffs: tuple[float, ...] = (0.0,)
    v: Polynomial = field(init=False, repr=False)

    def __post_init__(self):
        coeffs = tuple(float(c) for c in np.atleast_1d(self.poly_coeffs)) or (0.0,)
        if not all(np.isfinite(coeffs)):
            raise PreconditionError("polynomial coefficients must be finite")
        object.__setattr__(self, "poly_coeffs", coeffs)
        object.__setattr__(self, "v", Polynomial(coeffs))
        # u'' > 0  <=>  1 + x(1-x) v''(x) > 0 on [0, 1]
        x = _CHECK_GRID
        margin = 1.0 + x * (1.0 - x) * self.v.deriv(2)(x) if len(coeffs) > 2 else np.ones_like(x)
        if np.min(margin) <= 0.0:
            raise PreconditionError(
                f"symplectic potential is not strictly convex (min x(1-x)u'' = {np.min(margin):.3g})"
            )

    def __eq__(self, other):
        if not isinstance(other, SymplecticPotential):
            return NotImplemented
        return np.array_equal(np.trim_zeros(np.array(self.poly_coeffs), "b"),
                              np.trim_zeros(np.array(other.poly_coeffs), "b"))

    def __hash__(self):
        return hash(tuple(np.trim_zeros(np.array(self.poly_coeffs), "b")))

    @classmethod
    def fubini_study(cls):
        return cls((0.0,))

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        if "poly" not in obj:
            raise PreconditionError("potential descriptor needs a 'poly' list")
        return cls(tuple(obj["poly"]))

    def to_json(self):
        return {"poly": list(self.poly_coeffs)}

    def shifted(self, poly_coeffs) -> "SymplecticPotential":
        """u + p for a polynomial p (coefficients low to high)."""
        return SymplecticPotential(tuple((self.v + Polynomial(poly_coeffs)).coef))

    @staticmethod
    def interpolate(u0, u1, t):
        p = (1.0 - t) * u0.v + t * u1.v
        return SymplecticPotential(tuple(p.coef))

    @cached_property
    def _dv(self):
        return [self.v.deriv(n) for n in range(5)]

    @cached_property
    def slope_bound(self):
        """Bound on |v'| over [0, 1] used to bracket the logit root."""
        return float(sum(n * abs(c) for n, c in enumerate(self.poly_coeffs))) + 1.0

    # -- values and derivatives on the moment interval

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return xlogy(x, x) + xlogy(1.0 - x, 1.0 - x) + self.v(x)

    def d1(self, x):
        x = np.asarray(x, dtype=float)
        return np.log(x) - np.log1p(-x) + self._dv[1](x)

    def d2(self, x):
        x = np.asarray(x, dtype=float)
        return 1.0 / x + 1.0 / (1.0 - x) + self._dv[2](x)

    def d3(self, x):
        x = np.asarray(x, dtype=float)
        return -1.0 / x**2 + 1.0 / (1.0 - x) ** 2 + self._dv[3](x)

    def d4(self, x):
        x = np.asarray(x, dtype=float)
        return 2.0 / x**3 + 2.0 / (1.0 - x) ** 3 + self._dv[4](x)

    def s_range(self, eps=S_TRUNCATION_EPS):
        """Interval of s on which the moment map lies in [eps, 1 - eps]."""
        return float(self.d1(eps)), float(self.d1(1.0 - eps))

    # -- Legendre duality

    def logit_root(self, s):
        """Solve y + v'(sigmoid(y)) = s elementwise; returns y."""
        s_in = np.asarray(s, dtype=float)
        if not np.all(np.isfinite(s_in)):
            raise PreconditionError("s must be finite")
        if len(self.poly_coeffs) <= 1:
            return s_in.copy()
        s = s_in.ravel()
        dv1, dv2 = self._dv[1], self._dv[2]
        lo = s - self.slope_bound
        hi = s + self.slope_bound
        y = s - dv1(expit(s))
        y = np.clip(y, lo, hi)
        active = np.ones(s.shape, dtype=bool)
        for _ in range(ROOT_MAXITER):
            ya = y[active]
            x = expit(ya)
            h = ya + dv1(x) - s[active]
            dh = 1.0 + dv2(x) * x * (1.0 - x)
            lo_a, hi_a = lo[active], hi[active]
            lo_a = np.where(h < 0, ya, lo_a)
            hi_a = np.where(h > 0, ya, hi_a)
            step = h / dh
            y_new = ya - step
            done = (np.abs(step) <= ROOT_TOL * np.maximum(1.0, np.abs(ya))) | (h == 0)
            # bisect only when a non-negligible Newton step leaves the bracket
            outside = ~done & ((y_new <= lo_a) | (y_new >= hi_a))
            y_new = np.where(outside, 0.5 * (lo_a + hi_a), y_new)
            y[active] = y_new
            lo[active], hi[active] = lo_a, hi_a
            idx = np.flatnonzero(active)
            active[idx[done]] = False
            if not active.any():
                return y.reshape(s_in.shape)
        bad = s[active]
        raise NumericalFailure(
            f"Legendre root-find did not converge in {ROOT_MAXITER} iterations at s={bad.flat[0]!r}",
            s=bad,
        )

    def legendre(self, s):
        """Return (f(s), x_star(s)) with f = sup_x (x s - u(x)) and x_star = f'(s)."""
        y = self.logit_root(s)
        x = expit(y)
        if len(self.poly_coeffs) <= 1:
            f = _softplus(y) - self.v(x)
        else:
            f = _softplus(y) + x * self._dv[1](x) - self.v(x)
        return f, x

    def moment(self, s):
        return expit(self.logit_root(s))

    def f_at(self, x):
        """f(s) at the point s = u'(x): -log(1 - x) + x v'(x) - v(x)."""
        x = np.asarray(x, dtype=float)
        return -np.log1p(-x) + x * self._dv[1](x) - self.v(x)

    def f2_at(self, x):
        """f''(s) expressed through x = f'(s): 1 / u''(x), computed without cancellation."""
        x = np.asarray(x, dtype=float)
        q = x * (1.0 - x)
        return q / (1.0 + q * self._dv[2](x))

    def psi_at(self, x):
        """-log f''(s) = log u''(x); the volume-density weight of the Hilb norm."""
        x = np.asarray(x, dtype=float)
        q = x * (1.0 - x)
        return np.log1p(q * self._dv[2](x)) - np.log(q)

    def psi_derivs_at(self, x):
        """First and second s-derivatives of log u''(x(s))."""
        x = np.asarray(x, dtype=float)
        u2, u3, u4 = self.d2(x), self.d3(x), self.d4(x)
        d1 = u3 / u2**2
        d2 = (u4 / u2**2 - 2.0 * u3**2 / u2**3) / u2
        return d1, d2


class KaehlerPotential:
    """f(s) = u*(s) together with its first two s-derivatives."""

    def __init__(self, u: SymplecticPotential):
        self.u = u

    def __call__(self, s):
        return self.u.legendre(s)[0]

    def d1(self, s):
        return self.u.moment(s)

    def d2(self, s):
        return self.u.f2_at(self.u.moment(s))

    @property
    def asymptotes(self):
        """Limits of f(s) - max(0, s) at s -> -inf and s -> +inf."""
        return -float(self.u.v(0.0)), -float(self.u.v(1.0))


class MAGeodesicToric:
    """Exact Monge-Ampère geodesic between two symplectic potentials."""

    def __init__(self, u0: SymplecticPotential, u1: SymplecticPotential):
        self.u0 = u0
        self.u1 = u1
        self.g = u1.v - u0.v
        crit = [r.real for r in self.g.deriv().roots() if abs(r.imag) < 1e-12 and 0 <= r.real <= 1] \
            if self.g.degree() >= 2 else []
        vals = self.g(np.array([0.0, 1.0] + crit))
        self.g_min = float(vals.min())
        self.g_max = float(vals.max())

    @classmethod
    def from_difference(cls, u0, g_coeffs):
        return cls(u0, u0.shifted(g_coeffs))

    def reversed(self):
        return MAGeodesicToric(self.u1, self.u0)

    def potential(self, t) -> SymplecticPotential:
        if t == 0:
            return self.u0
        if t == 1:
            return self.u1
        return SymplecticPotential.interpolate(self.u0, self.u1, t)

    def to_json(self):
        return {"u0": self.u0.to_json(), "u1": self.u1.to_json()}


def _check_t(t):
    if not (0.0 <= t <= 1.0):
        raise PreconditionError(f"t must lie in [0, 1], got {t!r}")


def legendre_transform(u: SymplecticPotential, s):
    """Convex conjugate f(s) and maximizer x_star; scalars in, scalars out."""
    f, x = u.legendre(s)
    if np.ndim(s) == 0:
        return float(f), float(x)
    return f, x


def ma_potential_at(geo: MAGeodesicToric, t: float) -> KaehlerPotential:
    _check_t(t)
    return KaehlerPotential(geo.potential(t))


def moment_map(geo: MAGeodesicToric, t: float, s):
    _check_t(t)
    x = geo.potential(t).moment(s)
    return float(x) if np.ndim(s) == 0 else x


def velocity(geo: MAGeodesicToric, t: float, s):
    """d/dt f_t(s) = -g(x_t(s)) (envelope theorem)."""
    x = moment_map(geo, t, s)
    v = -geo.g(x)
    return float(v) if np.ndim(s) == 0 else v


def _t_derivatives(geo, t, s, delta):
    fm, xm = geo.potential(t - delta).legendre(s)
    f0, _ = geo.potential(t).legendre(s)
    fp, xp = geo.potential(t + delta).legendre(s)
    return (fp - 2.0 * f0 + fm) / delta**2, (xp - xm) / (2.0 * delta)


def geodesic_residual(geo: MAGeodesicToric, t: float, s, delta: float = RESIDUAL_STEP):
    """Residual of  f_tt - (f_ts)^2 / f_ss  for the invariant geodesic equation.

    t-derivatives are central differences with steps delta and 2 delta combined
    by one Richardson step, so the truncation error is O(delta^4).
    """
    if not (2.0 * delta <= t <= 1.0 - 2.0 * delta):
        raise PreconditionError(f"t={t!r} too close to the boundary for step {delta}")
    s = np.asarray(s, dtype=float)
    tt1, ts1 = _t_derivatives(geo, t, s, delta)
    tt2, ts2 = _t_derivatives(geo, t, s, 2.0 * delta)
    f_tt = (4.0 * tt1 - tt2) / 3.0
    f_ts = (4.0 * ts1 - ts2) / 3.0
    f_ss = geo.potential(t).f2_at(geo.potential(t).moment(s))
    r = f_tt - f_ts**2 / f_ss
    return float(r) if r.ndim == 0 else r


def limit_measure(geo: MAGeodesicToric, grid_size: int) -> ProbabilityMeasure:
    """g pushed forward from Lebesgue measure on [0, 1], sampled at cell midpoints."""
    if grid_size < 2:
        raise PreconditionError("grid_size must be at least 2")
    x = (np.arange(grid_size) + 0.5) / grid_size
    return ProbabilityMeasure.from_atoms(geo.g(x))


def pushforward_at_t(geo: MAGeodesicToric, t: float, grid_size: int,
                     eps: float = S_TRUNCATION_EPS) -> ProbabilityMeasure:
    """(-d/dt f_t) pushed forward from the normalized volume f_t''(s) ds, by midpoint rule in s."""
    _check_t(t)
    if grid_size < 2:
        raise PreconditionError("grid_size must be at least 2")
    u = geo.potential(t)
    s_lo, s_hi = u.s_range(eps)
    ds = (s_hi - s_lo) / grid_size
    s = s_lo + (np.arange(grid_size) + 0.5) * ds
    x = u.moment(s)
    w = u.f2_at(x) * ds
    total = w.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise NumericalFailure("quadrature weights underflowed", t=t)
    return ProbabilityMeasure.from_atoms(geo.g(x), w / total)


def aubin_yau_energy(geo: MAGeodesicToric) -> float:
    """Constant first moment of the limit measure: integral of g over [0, 1]."""
    val, _ = integrate.quad(geo.g, 0.0, 1.0, epsabs=1e-12, epsrel=1e-10)
    return float(val)


def limit_distance(geo: MAGeodesicToric) -> float:
    """L^2(dx) norm of g, the length of the geodesic."""
    val, _ = integrate.quad(lambda x: geo.g(x) ** 2, 0.0, 1.0, epsabs=1e-14, epsrel=1e-12)
    return float(np.sqrt(val))


def subgeodesic_trend(geo: MAGeodesicToric, c: float, fn, ts=(0.0, 0.25, 0.5, 0.75, 1.0), grid_size: int = 20000):
    """Integrals of fn against (-d/dt phi_t)_* dV_t along phi_t = f_t - c t (1 - t).

    This is a subgeodesic for c >= 0. Returns (values, direction) with direction
    in {"increasing", "decreasing", "constant", "mixed"}; nothing is asserted.
    """
    if c < 0:
        raise PreconditionError("c must be nonnegative for a subgeodesic")
    x = (np.arange(grid_size) + 0.5) / grid_size
    vals = np.array([float(np.mean(fn(geo.g(x) + c * (1.0 - 2.0 * t)))) for t in ts])
    diffs = np.diff(vals)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(vals))))
    if np.all(np.abs(diffs) <= tol):
        direction = "constant"
    elif np.all(diffs > -tol):
        direction = "increasing"
    elif np.all(diffs < tol):
        direction = "decreasing"
    else:
        direction = "mixed"
    return vals, direction
