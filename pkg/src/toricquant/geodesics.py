"""Geodesics in the space of Hermitian norms on a section space.

The geodesic from H0 to H1 is H_t = H0 exp(t A) with constant tangent A. A
basis orthonormal for H0 that diagonalizes H1 with eigenvalues exp(lambda_j)
diagonalizes every H_t (eigenvalues exp(t lambda_j)), so everything reduces
to the symmetric-definite pencil (H1, H0).

Work happens in the D0-scaled coordinates w = D0 v of the first Gram matrix.
The pencil there is (E S1 E, S0) with E = diag(exp((ld1 - ld0 - c) / 2)) after
a uniform centering shift c; c is added back to all reported log-eigenvalues.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import ContractError, NumericalFailure, OverflowRisk
from .measures import ProbabilityMeasure
from .sections import GramMatrix, SectionSpace

SPREAD_BUDGET = 500.0


@dataclass(frozen=True, eq=False)
class GeodesicSpectrum:
    lambdas: np.ndarray      # ascending pencil log-eigenvalues (center shift included)
    basis: np.ndarray        # columns: S0-orthonormal, pencil-diagonalizing (D0-scaled coords)
    center_shift: float
    space: SectionSpace
    G0: GramMatrix
    G1: GramMatrix
    invariant: bool
    order: np.ndarray        # invariant case: monomial index carried by each eigenvalue

    @property
    def k(self):
        return self.space.k

    @property
    def dim(self):
        return self.lambdas.size

    def pencil_scaling(self):
        """E = exp((ld1 - ld0 - c) / 2), the centered relative diagonal scale."""
        return np.exp(0.5 * (self.G1.log_diag - self.G0.log_diag - self.center_shift))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "j", "lambda_over_k"])
        for j, lam in enumerate(self.lambdas):
            w.writerow([self.k, j, format(lam / self.k, ".17g")])
        return buf.getvalue()

    def to_json(self):
        return json.dumps({
            "spec": self.space.to_json(),
            "lambdas": self.lambdas.tolist(),
            "center_shift": self.center_shift,
            "basis": self.basis.ravel().tolist(),
            "invariant": self.invariant,
        })


def _sign_convention(V):
    """Make the largest-magnitude entry of every column positive."""
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def solve_geodesic(G0: GramMatrix, G1: GramMatrix) -> GeodesicSpectrum:
    G0.check_compatible(G1)
    delta = G1.log_diag - G0.log_diag
    if G0.invariant and G1.invariant:
        order = np.argsort(delta, kind="stable")
        basis = np.eye(delta.size)[:, order]
        return GeodesicSpectrum(delta[order], basis, 0.0, G0.space, G0, G1, True, order)
    c = float(np.mean(delta))
    dc = delta - c
    if np.ptp(dc) > SPREAD_BUDGET:
        raise OverflowRisk(
            f"log-diagonal spread {np.ptp(dc):.1f} exceeds the budget {SPREAD_BUDGET}; "
            "reduce k or the potential difference",
            spread=float(np.ptp(dc)),
        )
    E = np.exp(0.5 * dc)
    B = E[:, None] * G1.scaled * E[None, :]
    try:
        w, V = linalg.eigh(B, G0.scaled)
    except linalg.LinAlgError as exc:
        raise NumericalFailure(f"pencil solve failed: {exc}") from None
    if np.any(w <= 0):
        raise NumericalFailure("pencil has nonpositive eigenvalues", smallest=float(w.min()))
    V = _sign_convention(V)
    return GeodesicSpectrum(np.log(w) + c, V, c, G0.space, G0, G1, False, np.arange(w.size))


def _Ht_scaled(spec: GeodesicSpectrum, t: float):
    """H_t in D0-scaled coordinates divided by exp(t c): S0 V exp(t (lambda - c)) V^T S0."""
    S0 = spec.G0.scaled
    SV = S0 @ spec.basis
    return (SV * np.exp(t * (spec.lambdas - spec.center_shift))[None, :]) @ SV.T


def evaluate_Ht(spec: GeodesicSpectrum, G0: GramMatrix, t: float) -> GramMatrix:
    """Geodesic norm at time t in the monomial basis."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t!r}")
    if G0 is not spec.G0 and not np.array_equal(G0.log_diag, spec.G0.log_diag):
        raise ContractError("G0 does not belong to this geodesic")
    if spec.invariant:
        ld = (1.0 - t) * spec.G0.log_diag + t * spec.G1.log_diag
        return GramMatrix(spec.space, ld, np.eye(spec.dim), spec.G0.convention_tag, True)
    M = _Ht_scaled(spec, t)
    d = np.diag(M).copy()
    inv = 1.0 / np.sqrt(d)
    S = M * inv[:, None] * inv[None, :]
    S = 0.5 * (S + S.T)
    np.fill_diagonal(S, 1.0)
    ld = spec.G0.log_diag + t * spec.center_shift + np.log(d)
    return GramMatrix(spec.space, ld, S, spec.G0.convention_tag, False)


def tangent_spectrum_fd(spec: GeodesicSpectrum, t: float, delta: float = 1e-5):
    """Eigenvalues of H_t^-1 dH_t/dt from central differences of the evaluated geodesic."""
    if spec.invariant:
        ld = lambda tt: (1.0 - tt) * spec.G0.log_diag + tt * spec.G1.log_diag  # noqa: E731
        ratio = (np.exp(ld(t + delta) - ld(t)) - np.exp(ld(t - delta) - ld(t))) / (2.0 * delta)
        return np.sort(ratio)
    Hp = np.exp(delta * spec.center_shift) * _Ht_scaled(spec, t + delta)
    Hm = np.exp(-delta * spec.center_shift) * _Ht_scaled(spec, t - delta)
    H = _Ht_scaled(spec, t)
    D = (Hp - Hm) / (2.0 * delta)
    return linalg.eigh(0.5 * (D + D.T), H, eigvals_only=True)


def spectral_measure(spec: GeodesicSpectrum) -> ProbabilityMeasure:
    """Normalized spectral measure of A / k."""
    return ProbabilityMeasure.from_atoms(spec.lambdas / spec.k)


def z_functional(spec: GeodesicSpectrum) -> float:
    """log det H1 - log det H0 = trace of A."""
    return float(np.sum(spec.lambdas))


def geodesic_distance(spec: GeodesicSpectrum) -> float:
    lam = spec.lambdas / spec.k
    return float(np.sqrt(np.sum(lam**2) / lam.size))


def psd_margin(Ga: GramMatrix, Gb: GramMatrix) -> float:
    """min_u (u*Gb u - u*Ga u) / u*Ga u; nonnegative iff Ga <= Gb."""
    return float(np.expm1(solve_geodesic(Ga, Gb).lambdas[0]))


@dataclass(frozen=True)
class SandwichResult:
    m0: float
    m1: float
    tau0: np.ndarray
    lambdas: np.ndarray
    tau1: np.ndarray
    m0_reversed: float = float("nan")
    m1_reversed: float = float("nan")

    @property
    def ordered_lower(self):
        return float(np.min(self.lambdas - self.tau0))

    @property
    def ordered_upper(self):
        return float(np.min(self.tau1 - self.lambdas))

    @property
    def ordered_reversed(self):
        """min over j of (tau0_j - lambda_j) and (lambda_j - tau1_j)."""
        return float(min(np.min(self.tau0 - self.lambdas), np.min(self.lambdas - self.tau1)))


def toeplitz_in_frames(spec: GeodesicSpectrum, T0, T1):
    """Matrices of T0 in the H0-eigenframe and T1 in the H1-eigenframe of the geodesic."""
    if not (np.array_equal(T0.frame.log_diag, spec.G0.log_diag)
            and np.array_equal(T1.frame.log_diag, spec.G1.log_diag)):
        raise ContractError("Toeplitz operators must be assembled in the H0 and H1 frames")
    if spec.invariant and T0.invariant and T1.invariant:
        return np.diag(T0.symbol_scaled[spec.order]), np.diag(T1.symbol_scaled[spec.order])
    V = spec.basis
    M0 = T0.symbol_scaled_matrix()
    M1 = T1.symbol_scaled_matrix()
    E = spec.pencil_scaling()
    A0 = V.T @ M0 @ V
    scale = np.exp(-0.5 * (spec.lambdas - spec.center_shift))
    A1 = (V.T @ (E[:, None] * M1 * E[None, :]) @ V) * scale[:, None] * scale[None, :]
    return 0.5 * (A0 + A0.T), 0.5 * (A1 + A1.T)


def sandwich_check(G0: GramMatrix, G1: GramMatrix, spec: GeodesicSpectrum, T0, T1) -> SandwichResult:
    """Margins of T0 <= A (w.r.t. H0) and A <= T1 (w.r.t. H1), plus ordered eigenvalues.

    Differentiating H^t <= Gram(f_t) at the endpoints, where equality holds,
    yields the opposite orientation T1 <= A <= T0; its margins are returned as
    ``m0_reversed`` = min eig(T0 - A) and ``m1_reversed`` = min eig(A - T1).
    """
    if not (np.array_equal(G0.log_diag, spec.G0.log_diag) and np.array_equal(G1.log_diag, spec.G1.log_diag)):
        raise ContractError("Gram matrices do not match the geodesic endpoints")
    A0, A1 = toeplitz_in_frames(spec, T0, T1)
    lam = spec.lambdas
    e0 = linalg.eigvalsh(np.diag(lam) - A0)
    e1 = linalg.eigvalsh(A1 - np.diag(lam))
    tau0 = np.sort(linalg.eigvalsh(A0))
    tau1 = np.sort(linalg.eigvalsh(A1))
    return SandwichResult(float(e0[0]), float(e1[0]), tau0, lam, tau1, float(-e0[-1]), float(-e1[-1]))
