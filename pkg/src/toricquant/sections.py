"""Quantized section spaces and their Gram matrices.

Sections of kL are the monomials z^j (hilb flavor, j = 0..k, norm weighted by
the Kähler volume) and sections of K_X + kL are z^j dz (adjoint flavor,
j = 0..k-2, no volume form). With s = log|z|^2 every invariant Gram entry
reduces to a one-dimensional integral

    hilb:     2 pi  * int exp(j s - W(s)) ds          (W contains -log f'')
    adjoint:  pi/2  * int exp((j + 1) s - W(s)) ds

which is evaluated by Gauss-Legendre quadrature in the moment coordinate of
the weight's reference potential (s = u'(x), ds = u''(x) dx). That change of
variables removes the unbounded s-range and turns the Fubini-Study integrands
into Beta polynomials. Everything is assembled in log space: a Gram matrix is
kept as its log-diagonal plus the unit-diagonal matrix D^-1 G D^-1.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial
from scipy import linalg
from scipy.special import logsumexp, roots_legendre

from .errors import ContractError, NumericalFailure, PositivityError, PreconditionError
from .symbols import Symbol
from .toric import MAGeodesicToric, SymplecticPotential

HILB = "hilb"
ADJOINT = "adjoint"
FLAVORS = (HILB, ADJOINT)


@dataclass(frozen=True)
class SectionSpace:
    k: int
    flavor: str = HILB

    def __post_init__(self):
        if self.flavor not in FLAVORS:
            raise PreconditionError(f"unknown flavor {self.flavor!r}")
        if int(self.k) != self.k:
            raise PreconditionError("k must be an integer")
        if self.flavor == HILB and self.k < 1:
            raise PreconditionError("hilb flavor needs k >= 1")
        if self.flavor == ADJOINT and self.k < 2:
            raise PreconditionError("adjoint flavor needs k >= 2")

    @property
    def dim(self):
        return self.k + 1 if self.flavor == HILB else self.k - 1

    @property
    def base_shift(self):
        return 0 if self.flavor == HILB else 1

    @property
    def angular_constant(self):
        return 2.0 * np.pi if self.flavor == HILB else 0.5 * np.pi

    @property
    def convention_tag(self):
        return "hilb:2pi*int(.)ds" if self.flavor == HILB else "adjoint:pi/2*int(.)ds"

    def to_json(self):
        return {"k": self.k, "flavor": self.flavor}


@dataclass(frozen=True)
class AngularPerturbation:
    """Adds eps * p(x) * cos(m theta) to the weight exponent; p defaults to x(1-x)."""

    eps: float
    m: int
    poly: tuple[float, ...] = (0.0, 1.0, -1.0)

    def values(self, x):
        return Polynomial(self.poly)(x)


@dataclass(frozen=True)
class Weight:
    """Exponent W of the norm density exp(-W).

    W(s) = sum_i c_i f_i(s) + sum_j d_j log u_j''(x_j(s)) + const  [+ angular part],
    with f_i the Legendre conjugates of the listed potentials. ``ref`` fixes the
    moment coordinate used for quadrature and for symbols.
    """

    ref: SymplecticPotential
    terms: tuple[tuple[float, SymplecticPotential], ...]
    density_terms: tuple[tuple[float, SymplecticPotential], ...] = ()
    const: float = 0.0
    angular: AngularPerturbation | None = None

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((float(c), p) for c, p in self.terms if c != 0))
        object.__setattr__(self, "density_terms",
                           tuple((float(c), p) for c, p in self.density_terms if c != 0))

    @property
    def invariant(self):
        return self.angular is None or self.angular.eps == 0.0

    def plus_constant(self, c):
        return Weight(self.ref, self.terms, self.density_terms, self.const + c, self.angular)

    def with_angular(self, angular):
        return Weight(self.ref, self.terms, self.density_terms, self.const, angular)

    def radial(self, s, x_ref=None):
        """Invariant part of W at s; ``x_ref`` short-cuts the reference root-find."""
        s = np.asarray(s, dtype=float)
        cache = {}
        if x_ref is not None:
            cache[self.ref] = (self.ref.f_at(x_ref), x_ref)

        def conj(p):
            if p not in cache:
                cache[p] = p.legendre(s)
            return cache[p]

        out = np.full(s.shape, self.const)
        for c, p in self.terms:
            out = out + c * conj(p)[0]
        for d, p in self.density_terms:
            out = out + d * p.psi_at(conj(p)[1])
        return out


def endpoint_weight(space: SectionSpace, u: SymplecticPotential) -> Weight:
    """exp(-k f) for the adjoint flavor, exp(-k f) f'' for the hilb flavor."""
    if space.flavor == HILB:
        return Weight(u, ((space.k, u),), ((1.0, u),))
    return Weight(u, ((space.k, u),))


@dataclass(frozen=True)
class Quadrature:
    radial_nodes: int | None = None
    angular_nodes: int = 32

    def n_radial(self, k):
        n = self.radial_nodes if self.radial_nodes is not None else 4 * k + 64
        if n < 64:
            raise PreconditionError("need at least 64 radial nodes")
        return n

    def n_angular(self, dim, m):
        if self.angular_nodes < 32:
            raise PreconditionError("need at least 32 angular nodes")
        # alias-free up to frequency dim + a few harmonics of the perturbation
        return max(self.angular_nodes, 2 * (dim + 12 * max(m, 1)))


DEFAULT_QUAD = Quadrature()


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """G = D S D with D = diag(exp(log_diag / 2)) and S unit-diagonal."""

    space: SectionSpace
    log_diag: np.ndarray
    scaled: np.ndarray
    convention_tag: str
    invariant: bool = False
    _chol: np.ndarray | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_raw(cls, space, raw, convention_tag=None):
        """Wrap an explicit (moderately scaled) positive definite matrix."""
        raw = np.asarray(raw, dtype=float)
        d = np.diag(raw).copy()
        if np.any(d <= 0):
            raise NumericalFailure("raw Gram matrix has a nonpositive diagonal entry")
        inv = 1.0 / np.sqrt(d)
        scaled = raw * inv[:, None] * inv[None, :]
        scaled = 0.5 * (scaled + scaled.T)
        np.fill_diagonal(scaled, 1.0)
        invariant = bool(np.all(scaled == np.eye(len(d))))
        return cls(space, np.log(d), scaled, convention_tag or space.convention_tag, invariant)

    @property
    def dim(self):
        return self.log_diag.size

    def raw(self):
        d = np.exp(0.5 * self.log_diag)
        return self.scaled * d[:, None] * d[None, :]

    def cholesky(self):
        if self._chol is None:
            if self.invariant:
                L = np.eye(self.dim)
            else:
                try:
                    L = linalg.cholesky(self.scaled, lower=True)
                except linalg.LinAlgError:
                    lam = linalg.eigvalsh(self.scaled)[0]
                    raise NumericalFailure(
                        f"Gram matrix not positive definite after scaling (smallest pivot {lam:.3e})",
                        smallest=lam,
                    ) from None
            object.__setattr__(self, "_chol", L)
        return self._chol

    def logdet(self):
        L = self.cholesky()
        return float(np.sum(self.log_diag) + 2.0 * np.sum(np.log(np.diag(L))))

    def congruence(self, log_scale):
        """D^T G D for D = diag(exp(log_scale))."""
        return GramMatrix(self.space, self.log_diag + 2.0 * np.asarray(log_scale, dtype=float),
                          self.scaled, self.convention_tag, self.invariant)

    def check_compatible(self, other):
        if self.space != other.space or self.convention_tag != other.convention_tag:
            raise ContractError(
                f"incompatible Gram matrices: {self.space}/{self.convention_tag} vs "
                f"{other.space}/{other.convention_tag}"
            )

    def to_json(self):
        return json.dumps({
            "spec": self.space.to_json(),
            "convention_tag": self.convention_tag,
            "log_diag": self.log_diag.tolist(),
            "scaled": self.scaled.ravel().tolist(),
        })

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        space = SectionSpace(**obj["spec"])
        ld = np.array(obj["log_diag"], dtype=float)
        sc = np.array(obj["scaled"], dtype=float).reshape(ld.size, ld.size)
        return cls(space, ld, sc, obj["convention_tag"], bool(np.all(sc == np.eye(ld.size))))

    def log_diag_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "log_diag"])
        for j, v in enumerate(self.log_diag):
            w.writerow([j, format(v, ".17g")])
        return buf.getvalue()


# -- assembly


@dataclass
class _Nodes:
    x: np.ndarray
    s: np.ndarray
    logc: np.ndarray          # log of everything except exp(j s)
    theta: np.ndarray | None  # angular nodes, None for invariant weights
    ang: np.ndarray | None    # exp(-eps p cos(m theta)), shape (N, Ntheta)


def _nodes(space: SectionSpace, weight: Weight, quad: Quadrature) -> _Nodes:
    n = quad.n_radial(space.k)
    xg, wg = roots_legendre(n)
    x = 0.5 * (xg + 1.0)
    logw = np.log(0.5 * wg)
    ref = weight.ref
    s = ref.d1(x)
    W = weight.radial(s, x_ref=x)
    logc = space.base_shift * s - W + ref.psi_at(x) + logw + np.log(space.angular_constant)
    if weight.invariant:
        return _Nodes(x, s, logc, None, None)
    pert = weight.angular
    n_theta = quad.n_angular(space.dim, pert.m)
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    ang = np.exp(-pert.eps * pert.values(x)[:, None] * np.cos(pert.m * theta)[None, :])
    return _Nodes(x, s, logc, theta, ang)


def _log_diag(space, nodes):
    j = np.arange(space.dim)
    expo = j[:, None] * nodes.s[None, :] + nodes.logc[None, :]
    if nodes.ang is not None:
        expo = expo + np.log(nodes.ang.mean(axis=1))[None, :]
    return logsumexp(expo, axis=1)


def _scaled_matrix(space, nodes, log_diag, sym_vals, need_offdiag):
    """sum_n e_i e_j F_{|i-j|}(n) with e_i = exp((i s + logc - ld_i)/2)."""
    dim = space.dim
    j = np.arange(dim)
    E = np.exp(0.5 * (j[None, :] * nodes.s[:, None] + nodes.logc[:, None] - log_diag[None, :]))
    if nodes.ang is None:
        F0 = sym_vals if sym_vals is not None else np.ones_like(nodes.s)
        diag = np.einsum("ni,n->i", E * E, F0)
        return np.diag(diag) if need_offdiag else diag
    prod = nodes.ang if sym_vals is None else nodes.ang * sym_vals
    n_theta = nodes.theta.size
    cos_tab = np.cos(np.outer(nodes.theta, j)) / n_theta
    F = prod @ cos_tab                         # (N, dim): Fourier mode d of node n
    M = np.zeros((dim, dim))
    M[j, j] = np.einsum("ni,n->i", E * E, F[:, 0])
    for d in range(1, dim):
        band = np.einsum("ni,ni,n->i", E[:, :-d], E[:, d:], F[:, d])
        M[j[:-d], j[d:]] = band
        M[j[d:], j[:-d]] = band
    return M


def gram_matrix(space: SectionSpace, weight: Weight, quad: Quadrature = DEFAULT_QUAD) -> GramMatrix:
    nodes = _nodes(space, weight, quad)
    ld = _log_diag(space, nodes)
    if weight.invariant:
        return GramMatrix(space, ld, np.eye(space.dim), space.convention_tag, True)
    S = _scaled_matrix(space, nodes, ld, None, True)
    S = 0.5 * (S + S.T)
    np.fill_diagonal(S, 1.0)
    G = GramMatrix(space, ld, S, space.convention_tag, False)
    G.cholesky()
    return G


def symbol_gram(space: SectionSpace, weight: Weight, symbol: Symbol, gram: GramMatrix | None = None,
                quad: Quadrature = DEFAULT_QUAD):
    """Symbol-weighted Gram matrix in the D-scaled coordinates of ``gram``.

    Returns (gram, M) where M = D^-1 M_xi D^-1 and M_xi[i, j] = <xi z^i, z^j>.
    For invariant weight and symbol M is returned as its diagonal (1-d array).
    """
    nodes = _nodes(space, weight, quad)
    if gram is None:
        gram = gram_matrix(space, weight, quad)
    invariant = nodes.ang is None and symbol.invariant
    if invariant:
        vals = symbol.values(nodes.x, nodes.s)
        return gram, _scaled_matrix(space, nodes, gram.log_diag, vals, False)
    if nodes.ang is None:
        n_theta = quad.n_angular(space.dim, symbol.angular_m)
        nodes.theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
        nodes.ang = np.ones((nodes.s.size, n_theta))
    vals = symbol.values(nodes.x, nodes.s, nodes.theta)
    M = _scaled_matrix(space, nodes, gram.log_diag, vals, True)
    return gram, 0.5 * (M + M.T)


# -- geodesic weights and the bridge metric


@dataclass(frozen=True)
class Bridge:
    """Parameters of (k - a) f_t + a chi_t + psi_t with chi_t = t f_1 + (1 - t) f_0 - c t (1 - t)."""

    a: float
    c: float

    @classmethod
    def certified(cls, geo, c=None, safety=1.25, floor=0.05, c_floor=1.0):
        """Grid-certified (a, c) with a inflated by ``safety``.

        c defaults to max(safety * c_min, c_floor): near c_min the required a
        blows up, and c of order one keeps a well below one.
        """
        if c is None:
            c = max(certify_bridge(geo, 0.0).c_min * safety, c_floor)
        cert = certify_bridge(geo, c)
        if not cert.passed:
            raise PositivityError(f"bridge convexity fails for c={c}", suggested=cert.c_min * safety)
        return cls(a=max(cert.a_min * safety, floor), c=float(c))


@dataclass(frozen=True)
class BridgeCertificate:
    c: float
    c_min: float
    a_min: float
    margin: float
    passed: bool
    grid_shape: tuple[int, int]


@lru_cache(maxsize=64)
def _certify(u0, u1, c, n_t, n_s):
    t = np.linspace(0.0, 1.0, n_t)[:, None]
    lo = min(u0.s_range()[0], u1.s_range()[0])
    hi = max(u0.s_range()[1], u1.s_range()[1])
    s = np.linspace(lo, hi, n_s)
    x0, x1 = u0.moment(s), u1.moment(s)
    # Hessian of chi in (t, s)
    c_ss = t * u1.f2_at(x1)[None, :] + (1.0 - t) * u0.f2_at(x0)[None, :]
    c_ts = np.broadcast_to((x1 - x0)[None, :], c_ss.shape)
    c_tt = 2.0 * c
    margin = c_tt * c_ss - c_ts**2
    c_min = float(np.max(c_ts**2 / (2.0 * c_ss)))
    passed = bool(np.all(c_ss > 0) and np.min(margin) >= 0.0)
    # Hessian of psi_t = (1 - t) log u0''(x0) + t log u1''(x1): zero tt-entry
    p0d1, p0d2 = u0.psi_derivs_at(x0)
    p1d1, p1d2 = u1.psi_derivs_at(x1)
    y_ts = np.broadcast_to((p1d1 - p0d1)[None, :], c_ss.shape)
    y_ss = t * p1d2[None, :] + (1.0 - t) * p0d2[None, :]
    # smallest a with a*Hchi + Hpsi >= 0: largest root of det(a X + Y) = 0
    A = c_tt * c_ss - c_ts**2
    B = c_tt * y_ss - 2.0 * c_ts * y_ts
    C = -(y_ts**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = np.sqrt(np.maximum(B * B - 4.0 * A * C, 0.0))
        root = np.where(A > 0, (-B + disc) / (2.0 * A), np.inf)
    # diagonal (s, s) entry must be nonnegative as well
    with np.errstate(divide="ignore", invalid="ignore"):
        need_diag = np.where(y_ss < 0, -y_ss / c_ss, 0.0)
    a_min = float(max(np.max(root), np.max(need_diag), 0.0)) if passed else float("inf")
    return BridgeCertificate(float(c), c_min, a_min, float(np.min(margin)), passed, (n_t, n_s))


def certify_bridge(geo: MAGeodesicToric, c: float, n_t: int = 40, n_s: int = 40) -> BridgeCertificate:
    """Grid certificate that chi is convex in (t, s) and the a needed to absorb psi."""
    if c < 0:
        raise PreconditionError("bridge convexity constant c must be nonnegative")
    return _certify(geo.u0, geo.u1, float(c), n_t, n_s)


def bridge_weight(geo: MAGeodesicToric, t: float, c: float) -> Weight:
    """chi_t = t f_1 + (1 - t) f_0 + kappa(t), kappa(t) = -c t (1 - t)."""
    if not 0.0 <= t <= 1.0:
        raise PreconditionError(f"t must lie in [0, 1], got {t!r}")
    cert = certify_bridge(geo, c)
    if not cert.passed:
        raise PositivityError(f"bridge metric not convex for c={c}; need c >= {cert.c_min:.4g}",
                              suggested=cert.c_min)
    return Weight(geo.potential(t), ((t, geo.u1), (1.0 - t, geo.u0)), const=-c * t * (1.0 - t))


def weight_at_t(geo: MAGeodesicToric, t: float, space: SectionSpace, bridge: Bridge | None = None) -> Weight:
    """Norm weight induced by the Monge-Ampère geodesic at time t.

    adjoint: k f_t. hilb without bridge: k f_t - log f_t'' (the Hilb map of f_t).
    hilb with bridge: (k - a) f_t + a chi_t + (1 - t) psi_0 + t psi_1, which has
    nonnegative curvature in (t, s) when (a, c) are certified.
    """
    if not 0.0 <= t <= 1.0:
        raise PreconditionError(f"t must lie in [0, 1], got {t!r}")
    k = space.k
    ut = geo.potential(t)
    if bridge is None:
        return endpoint_weight(space, ut)
    if bridge.a > k:
        raise PreconditionError(f"bridge a={bridge.a} exceeds k={k}")
    chi = bridge_weight(geo, t, bridge.c)
    terms = ((k - bridge.a, ut),) + tuple((bridge.a * c, p) for c, p in chi.terms)
    density = ((1.0 - t, geo.u0), (t, geo.u1)) if space.flavor == HILB else ()
    return Weight(ut, terms, density, bridge.a * chi.const)
