"""Penalised viscoelastic beam solve.

Strong form of the discrete problem, tested against every ``s_i tau_j``::

    eta_tt + eta_xxxx - eta_txx + (eta_t - v2) / eps = f

where ``v2`` is the vertical fluid velocity sampled on the (lagged) beam.
The time-dependent part is solved for ``w = eta_t`` in the time-mean-free
space and integrated exactly in time; the time mean ``G(x)`` comes from a
static elliptic problem.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import linalg

from .basis import SpectralField, differentiate
from .errors import ConfigurationError, InputDomainError, InternalError

__all__ = ["BeamState", "PenaltyInput", "BeamOperators", "beam_operators",
           "solve_structure", "structure_residual", "beam_load",
           "coercivity_form"]


@dataclass(frozen=True)
class BeamState:
    """Beam displacement with derived fields on demand."""

    eta: SpectralField

    @property
    def eta_t(self):
        return differentiate(self.eta, "t")

    @property
    def eta_x(self):
        return differentiate(self.eta, "x")

    @property
    def eta_xx(self):
        return differentiate(self.eta, "xx")

    @property
    def eta_tx(self):
        return differentiate(self.eta, "tx")

    @property
    def velocity(self):
        """``eta_t`` expressed back on the beam basis (time derivative is closed there)."""
        D = self.eta.time.deriv_matrix()
        return SpectralField(self.eta.space, self.eta.time, self.eta.coeffs @ D.T)


@dataclass(frozen=True)
class PenaltyInput:
    """Data of one beam solve.

    Attributes
    ----------
    t, x : ndarray
        Beam quadrature nodes (uniform, periodic).
    v_e2 : ndarray, shape (Nt, Nx)
        Vertical trace of the lagged fluid velocity.
    f : SpectralField or None
        Beam forcing on a beam-type space.
    eps : float
        Penalty parameter.
    """

    t: np.ndarray
    x: np.ndarray
    v_e2: np.ndarray
    f: SpectralField
    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise InputDomainError(f"eps must be positive, got {self.eps}")
        if np.shape(self.v_e2) != (len(self.t), len(self.x)):
            raise ConfigurationError("trace values do not match the beam grid")


@dataclass(frozen=True)
class BeamOperators:
    """Spatial and temporal matrices of the beam Galerkin system."""

    Ms: np.ndarray
    K1: np.ndarray
    K2: np.ndarray
    gt: np.ndarray
    Dt: np.ndarray
    At: np.ndarray


def beam_operators(space, time) -> BeamOperators:
    return BeamOperators(space.l2_gram(), space.derivative_gram(1), space.derivative_gram(2),
                         time.gram_diagonal(), time.deriv_matrix(), time.antiderivative_matrix())


def beam_load(space, time, f, t=None, x=None, v_e2=None, eps=1.0):
    """``int (f + v2/eps) s_i tau_j`` for all ``(i, j)``.

    The ``f`` part is exact; the trace part uses the uniform rule on the
    nodes ``t x x``.
    """
    out = np.zeros((space.size, time.size))
    if f is not None:
        if f.kind != "beam" or f.space.raw.period != space.L or f.time.T != time.T:
            raise ConfigurationError("beam forcing lives on an incompatible basis")
        fr = f.space.to_raw.T @ f.coeffs
        fr = space.raw.embed(fr, space.raw.K)
        fr = time.embed(fr.T, time.K).T
        out += (space.to_raw * space.raw.gram_diagonal()) @ fr * time.gram_diagonal()
    if v_e2 is not None:
        w = (time.T / len(t)) * (space.L / len(x))
        Et = time.evaluate(t)
        Sx = space.evaluate(x)
        out += (Sx.T @ np.asarray(v_e2).T @ Et) * (w / eps)
    return out


def _apply_operator(ops, X, eta_coeffs, eps):
    """Galerkin residual operator applied to ``eta``; ``X`` is ``eta_t``."""
    g = ops.gt
    return (ops.Ms @ (X @ ops.Dt.T) + ops.K2 @ eta_coeffs + ops.K1 @ X + ops.Ms @ X / eps) * g


def solve_structure(inp: PenaltyInput, space, time) -> BeamState:
    """Lax-Milgram solve of the penalised beam problem.

    Parameters
    ----------
    inp : PenaltyInput
    space : BeamBasis
    time : TimeBasis

    Returns
    -------
    BeamState
    """
    ops = beam_operators(space, time)
    load = beam_load(space, time, inp.f, inp.t, inp.x, inp.v_e2, inp.eps)
    n, nt = space.size, time.size
    X = np.zeros((n, nt))
    if nt > 1:
        # bilinear form on the mean-free time modes j >= 1; columns of the
        # Kronecker factors act on the time index, rows on the space index
        J = slice(1, nt)
        g = np.diag(ops.gt)
        TD = (ops.Dt.T @ g)[J, J]
        TA = (ops.At.T @ g)[J, J]
        T0 = g[J, J]
        B = (np.kron(ops.Ms, TD.T) + np.kron(ops.K2, TA.T)
             + np.kron(ops.K1, T0) + np.kron(ops.Ms, T0) / inp.eps)
        rhs = load[:, J].ravel()
        try:
            sol = linalg.solve(B, rhs)
        except linalg.LinAlgError as exc:
            raise InternalError("singular beam system") from exc
        if not np.all(np.isfinite(sol)):
            raise InternalError("non-finite beam solution")
        X[:, J] = sol.reshape(n, nt - 1)
    eta = X @ ops.At.T
    try:
        eta[:, 0] = linalg.solve(ops.K2 * time.T, load[:, 0], assume_a="pos")
    except linalg.LinAlgError as exc:
        raise InternalError("singular static beam system") from exc
    return BeamState(SpectralField(space, time, eta))


def structure_residual(state: BeamState, inp: PenaltyInput):
    """Residual (left minus right side) tested against every ``s_i tau_j``.

    Returns an array of shape ``(n, 2m + 1)``.
    """
    space, time = state.eta.space, state.eta.time
    ops = beam_operators(space, time)
    C = state.eta.coeffs
    X = C @ ops.Dt.T
    lhs = _apply_operator(ops, X, C, inp.eps)
    return lhs - beam_load(space, time, inp.f, inp.t, inp.x, inp.v_e2, inp.eps)


def coercivity_form(space, time, eps):
    """Matrix of the bilinear form on the mean-free subspace (row index ``(i, j>=1)``)."""
    ops = beam_operators(space, time)
    nt = time.size
    J = slice(1, nt)
    g = np.diag(ops.gt)
    TD = (ops.Dt.T @ g)[J, J]
    TA = (ops.At.T @ g)[J, J]
    T0 = g[J, J]
    return (np.kron(ops.Ms, TD.T) + np.kron(ops.K2, TA.T)
            + np.kron(ops.K1, T0) + np.kron(ops.Ms, T0) / eps)
