"""Toeplitz operators T_xi u = P(xi u) on the quantized section spaces.

Operators are stored in an orthonormal frame of the reference norm (Cholesky
frame of the scaled Gram matrix), so their eigenvalues and operator norms are
the Hilbert-space ones. Invariant weights and symbols give diagonal operators
and skip all matrix work.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg

from .errors import ContractError, PreconditionError
from .measures import ProbabilityMeasure
from .sections import (
    ADJOINT,
    DEFAULT_QUAD,
    HILB,
    Bridge,
    GramMatrix,
    Quadrature,
    SectionSpace,
    Weight,
    endpoint_weight,
    gram_matrix,
    symbol_gram,
)
from .symbols import Symbol, constant
from .toric import MAGeodesicToric


@dataclass(frozen=True, eq=False)
class ToeplitzOperator:
    matrix: np.ndarray            # frame-orthonormal coordinates; 1-d diagonal when invariant
    frame: GramMatrix
    symbol_scaled: np.ndarray     # D^-1 M_xi D^-1 in monomial coordinates (1-d when invariant)
    symbol: Symbol
    weight: Weight
    quad: Quadrature
    frame_label: str = "H"

    @property
    def space(self) -> SectionSpace:
        return self.frame.space

    @property
    def k(self):
        return self.space.k

    @property
    def invariant(self):
        return self.matrix.ndim == 1

    def dense(self):
        return np.diag(self.matrix) if self.invariant else self.matrix

    def symbol_scaled_matrix(self):
        return np.diag(self.symbol_scaled) if self.symbol_scaled.ndim == 1 else self.symbol_scaled

    def eigenvalues(self):
        if self.invariant:
            return np.sort(self.matrix)
        return linalg.eigvalsh(self.matrix)

    def to_json(self):
        return json.dumps({
            "spec": self.space.to_json(),
            "symbol": self.symbol.name,
            "frame": self.frame_label,
            "matrix": self.dense().ravel().tolist(),
        })


def _frame_transform(gram: GramMatrix, M):
    if M.ndim == 1:
        return M.copy()
    L = gram.cholesky()
    X = linalg.solve_triangular(L, M, lower=True)
    T = linalg.solve_triangular(L, X.T, lower=True).T
    return 0.5 * (T + T.T)


def operator_from_raw(gram: GramMatrix, M_raw):
    """Toeplitz matrix L^-1 M L^-T for an explicit symbol-weighted Gram matrix in monomial coordinates."""
    inv = np.exp(-0.5 * gram.log_diag)
    M = np.asarray(M_raw, dtype=float) * inv[:, None] * inv[None, :]
    return _frame_transform(gram, 0.5 * (M + M.T))


def toeplitz_operator(space: SectionSpace, weight: Weight, symbol: Symbol, quad: Quadrature = DEFAULT_QUAD,
                      gram: GramMatrix | None = None, frame_label: str = "H") -> ToeplitzOperator:
    gram, M = symbol_gram(space, weight, symbol, gram, quad)
    if M.ndim == 2 and gram.invariant and np.allclose(M, np.diag(np.diag(M)), atol=0.0, rtol=0.0):
        M = np.diag(M).copy()
    return ToeplitzOperator(_frame_transform(gram, M), gram, M, symbol, weight, quad, frame_label)


def derivative_symbol(geo: MAGeodesicToric, t: float, space: SectionSpace, bridge: Bridge | None = None) -> Symbol:
    """Symbol of the t-derivative of the norm curve: -dW/dt at an endpoint.

    adjoint: k g(x_t). With a bridge the symbol is
    (k - a) g(x_t) - a (f_1 - f_0 + kappa'(t)) - (psi_1 - psi_0) (psi only in hilb flavor).
    """
    k = space.k
    g = geo.g
    if bridge is None:
        if space.flavor == HILB:
            raise ContractError("hilb-flavor derivative operators need a certified bridge")
        return Symbol(lambda x, s: k * g(x), name=f"-k*phidot_{t:g}")
    a, c = bridge.a, bridge.c
    kappa_dot = -c * (1.0 - 2.0 * t)
    u0, u1 = geo.u0, geo.u1
    with_psi = space.flavor == HILB

    def radial(x, s):
        f0, x0 = u0.legendre(s)
        f1, x1 = u1.legendre(s)
        out = (k - a) * g(x) - a * (f1 - f0 + kappa_dot)
        if with_psi:
            out = out - (u1.psi_at(x1) - u0.psi_at(x0))
        return out

    return Symbol(radial, name=f"-d/dt W_{t:g}")


def derivative_toeplitz(geo: MAGeodesicToric, t: float, space: SectionSpace, bridge: Bridge | None = None,
                        quad: Quadrature = DEFAULT_QUAD, scaled: bool = False) -> ToeplitzOperator:
    """Operator of d/dt ||u||^2_t at t in {0, 1}, in the endpoint-orthonormal frame."""
    if t not in (0, 1):
        raise PreconditionError("derivative operators are defined at the endpoints t = 0, 1")
    if bridge is not None and bridge.a > space.k:
        raise PreconditionError(f"bridge a={bridge.a} exceeds k={space.k}")
    sym = derivative_symbol(geo, t, space, bridge)
    if scaled:
        sym = sym.scaled(1.0 / space.k)
    # at the endpoints the bridged weight coincides with the plain endpoint weight
    weight = endpoint_weight(space, geo.potential(t))
    return toeplitz_operator(space, weight, sym, quad, frame_label=f"H{int(t)}")


def limit_integral(weight: Weight, symbol: Symbol) -> float:
    """Integral of the (invariant part of the) symbol against the normalized volume: int_0^1 xi dx."""
    ref = weight.ref

    def f(x):
        return float(symbol.radial(np.array([x]), ref.d1(np.array([x])))[0])

    val, _ = integrate.quad(f, 0.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200, points=[0.5])
    return float(val)


def trace_defect(space: SectionSpace, weight: Weight, symbol: Symbol, quad: Quadrature = DEFAULT_QUAD) -> float:
    T = toeplitz_operator(space, weight, symbol, quad)
    tr = float(np.sum(T.matrix) if T.invariant else np.trace(T.matrix))
    return abs(tr / space.dim - limit_integral(weight, symbol))


def composition_defect(space: SectionSpace, weight: Weight, xi: Symbol, eta: Symbol,
                       quad: Quadrature = DEFAULT_QUAD) -> float:
    """Operator norm of T_xi T_eta - T_{xi eta} in the weight-orthonormal frame."""
    if not (xi.invariant and eta.invariant):
        raise PreconditionError("composition defects need rotation-invariant symbols")
    gram = gram_matrix(space, weight, quad)
    Tx = toeplitz_operator(space, weight, xi, quad, gram)
    Te = toeplitz_operator(space, weight, eta, quad, gram)
    Txe = toeplitz_operator(space, weight, xi * eta, quad, gram)
    if Tx.invariant and Te.invariant and Txe.invariant:
        return float(np.max(np.abs(Tx.matrix * Te.matrix - Txe.matrix)))
    D = Tx.dense() @ Te.dense() - Txe.dense()
    return float(linalg.norm(D, 2))


def perturbation_shift(T: ToeplitzOperator, eps_symbol: Symbol) -> float:
    """max_j |lambda_j(T_{xi + eps}) - lambda_j(T_xi)| over ascending eigenvalues."""
    Tp = toeplitz_operator(T.space, T.weight, T.symbol + eps_symbol, T.quad, T.frame)
    return float(np.max(np.abs(Tp.eigenvalues() - T.eigenvalues())))


def toeplitz_spectral_measure(T: ToeplitzOperator, k: int | None = None) -> ProbabilityMeasure:
    return ProbabilityMeasure.from_atoms(T.eigenvalues())


def diagnostics_csv(rows):
    """rows of (k, diagnostic_name, value)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "diagnostic", "value"])
    for k, name, val in rows:
        w.writerow([k, name, format(val, ".17g")])
    return buf.getvalue()


__all__ = [
    "ADJOINT",
    "HILB",
    "ToeplitzOperator",
    "composition_defect",
    "constant",
    "derivative_symbol",
    "derivative_toeplitz",
    "diagnostics_csv",
    "limit_integral",
    "operator_from_raw",
    "perturbation_shift",
    "toeplitz_operator",
    "toeplitz_spectral_measure",
    "trace_defect",
]
