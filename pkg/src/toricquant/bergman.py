"""Bergman kernels of finite geodesics and their Fubini-Study potentials.

Sections are evaluated on the real slice theta = 0, where |z^m|^2 = e^{m s}.
For rotation-invariant norms the kernel does not depend on theta.

Reference metrics tau on the twisting bundle:
  hilb    tau = 0
  adjoint tau = s - 2 log(1 + e^s), the Fubini-Study metric on K_X written
          against the section dz in log coordinates.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from .errors import ContractError, NumericalFailure, PreconditionError
from .geodesics import GeodesicSpectrum
from .sections import ADJOINT, GramMatrix, SectionSpace
from .toric import MAGeodesicToric, legendre_transform

TAIL_POINTS = (-60.0, 60.0)
GRID_START = 257
GRID_MAX_DOUBLINGS = 7
GRID_RTOL = 0.01


def reference_tau(space: SectionSpace, s):
    s = np.asarray(s, dtype=float)
    if space.flavor == ADJOINT:
        return s - 2.0 * np.logaddexp(0.0, s)
    return np.zeros_like(s)


def tau_descriptor(space: SectionSpace) -> str:
    return "s - 2 log(1 + e^s)" if space.flavor == ADJOINT else "0"


@dataclass(frozen=True, eq=False)
class BergmanEvaluation:
    t: float
    k: int
    s_grid: np.ndarray
    log_B: np.ndarray
    reference_tau: str
    space: SectionSpace

    def tau(self):
        return reference_tau(self.space, self.s_grid)


def _check_grid(s_grid):
    s = np.atleast_1d(np.asarray(s_grid, dtype=float))
    if s.size == 0:
        raise ContractError("empty s grid")
    if not np.all(np.isfinite(s)):
        raise ContractError("s grid must be finite")
    return s


def _half_exponents(space: SectionSpace, log_diag, s):
    """y[n, i] = ((i + shift) s_n - ld_i) / 2, the log-modulus of the D-normalized monomials."""
    m = np.arange(space.dim) + space.base_shift
    return 0.5 * (s[:, None] * m[None, :] - log_diag[None, :])


def _log_quadratic(Y, apply):
    """log of y^T Q y with y = exp(Y) per row, where apply(z) returns the vector whose
    squared norm (or inner product) gives the form; rows are rescaled by their max first."""
    mx = Y.max(axis=1, keepdims=True)
    Z = np.exp(Y - mx)
    val = apply(Z)
    if np.any(val <= 0):
        raise NumericalFailure("nonpositive Bergman kernel value", smallest=float(val.min()))
    return np.log(val) + 2.0 * mx[:, 0]


def bergman_kernel_log(spec: GeodesicSpectrum, G0: GramMatrix, t: float, s_grid) -> BergmanEvaluation:
    """log B_t(s) = log sum_j e^{-t lambda_j} |s_j(s)|^2 along the finite geodesic."""
    if not 0.0 <= t <= 1.0:
        raise PreconditionError(f"t must lie in [0, 1], got {t!r}")
    if not np.array_equal(G0.log_diag, spec.G0.log_diag):
        raise ContractError("G0 does not belong to this geodesic")
    s = _check_grid(s_grid)
    space = spec.space
    if spec.invariant:
        ld_t = (1.0 - t) * spec.G0.log_diag + t * spec.G1.log_diag
        m = np.arange(space.dim) + space.base_shift
        log_B = logsumexp(s[:, None] * m[None, :] - ld_t[None, :], axis=1)
    else:
        Y = _half_exponents(space, spec.G0.log_diag, s)
        w = np.exp(-t * (spec.lambdas - spec.center_shift))

        def apply(Z):
            P = Z @ spec.basis
            return (P * P) @ w

        log_B = _log_quadratic(Y, apply) - t * spec.center_shift
    return BergmanEvaluation(float(t), space.k, s, log_B, tau_descriptor(space), space)


def bergman_from_gram(G: GramMatrix, s_grid, t: float = float("nan")) -> BergmanEvaluation:
    """Direct kernel y^H H^{-1} y of a Gram matrix."""
    s = _check_grid(s_grid)
    space = G.space
    if G.invariant:
        m = np.arange(space.dim) + space.base_shift
        log_B = logsumexp(s[:, None] * m[None, :] - G.log_diag[None, :], axis=1)
    else:
        L = G.cholesky()
        Y = _half_exponents(space, G.log_diag, s)

        def apply(Z):
            X = linalg.solve_triangular(L, Z.T, lower=True)
            return np.sum(X * X, axis=0)

        log_B = _log_quadratic(Y, apply)
    return BergmanEvaluation(t, space.k, s, log_B, tau_descriptor(space), space)


def fs_metric(evaluation: BergmanEvaluation):
    """k^-1 (log B - tau) on the evaluation grid."""
    return (evaluation.log_B - evaluation.tau()) / evaluation.k


def _deviation(geo, spec, G0, t, s):
    ev = bergman_kernel_log(spec, G0, t, s)
    f_t, _ = legendre_transform(geo.potential(t), s)
    return np.abs(fs_metric(ev) - f_t)


def deviation_profile(geo: MAGeodesicToric, spec: GeodesicSpectrum, t: float, n: int = GRID_START):
    """(s, fs_metric, f_t) on a uniform grid over the truncated s-range of f_t."""
    lo, hi = geo.potential(t).s_range()
    s = np.linspace(lo, hi, n)
    ev = bergman_kernel_log(spec, spec.G0, t, s)
    f_t, _ = legendre_transform(geo.potential(t), s)
    return s, fs_metric(ev), f_t


def sup_deviation(geo: MAGeodesicToric, spec: GeodesicSpectrum, t: float, k: int | None = None,
                  rtol: float = GRID_RTOL) -> float:
    """sup_s |k^-1 (log B_t - tau) - f_t| on an adaptively doubled grid plus far-tail points."""
    if k is not None and k != spec.k:
        raise ContractError(f"k={k} does not match the geodesic spectrum (k={spec.k})")
    lo, hi = geo.potential(t).s_range()
    tails = np.array(TAIL_POINTS)
    tail_sup = float(np.max(_deviation(geo, spec, spec.G0, t, tails)))
    n = GRID_START
    prev = float(np.max(_deviation(geo, spec, spec.G0, t, np.linspace(lo, hi, n))))
    for _ in range(GRID_MAX_DOUBLINGS):
        n = 2 * n - 1
        cur = float(np.max(_deviation(geo, spec, spec.G0, t, np.linspace(lo, hi, n))))
        if abs(cur - prev) <= rtol * max(abs(cur), np.finfo(float).tiny):
            return max(cur, tail_sup)
        prev = cur
    raise NumericalFailure("sup over the s grid did not stabilize", t=t, k=spec.k, last=prev)


def sup_csv(rows):
    """rows of (k, t, sup_deviation)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "t", "sup_deviation", "sup_deviation_times_k_over_logk"])
    for k, t, d in rows:
        w.writerow([k, format(t, ".17g"), format(d, ".17g"), format(d * k / np.log(k), ".17g")])
    return buf.getvalue()
