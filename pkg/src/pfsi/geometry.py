"""Periodic box, wrapping of the beam height, and traces on the beam curve."""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ConfigurationError, InputDomainError

__all__ = ["DomainSpec", "WrappedHeight", "TraceField", "wrap_eta",
           "trace_velocity", "moving_domain_map", "beam_grid"]


@dataclass(frozen=True)
class DomainSpec:
    """Fluid box ``(0, L) x (-H, H)`` over one time period ``T``."""

    L: float
    H: float
    T: float

    def __post_init__(self):
        for name in ("L", "H", "T"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InputDomainError(f"{name} must be positive and finite, got {v}")

    @property
    def area(self) -> float:
        return 2.0 * self.L * self.H


@dataclass(frozen=True)
class WrappedHeight:
    """Representative ``eta_hat = eta - 2 wind H`` in ``[-H, H)``."""

    eta_hat: np.ndarray
    wind: np.ndarray


def wrap_eta(eta, H) -> WrappedHeight:
    """Reduce beam heights modulo ``2H`` into the half-open interval ``[-H, H)``.

    Works elementwise on arrays; scalars give 0-d results.

    Examples
    --------
    >>> w = wrap_eta(1.5, 1.0)
    >>> float(w.eta_hat), int(w.wind)
    (-0.5, 1)
    """
    if not H > 0:
        raise InputDomainError(f"H must be positive, got {H}")
    eta = np.asarray(eta, dtype=float)
    if not np.all(np.isfinite(eta)):
        raise InputDomainError("eta contains non-finite values")
    wind = np.floor((eta + H) / (2.0 * H))
    hat = eta - 2.0 * wind * H
    # rounding in the division can land one period off at the edges
    hi = hat >= H
    wind = np.where(hi, wind + 1, wind)
    hat = np.where(hi, hat - 2.0 * H, hat)
    lo = hat < -H
    wind = np.where(lo, wind - 1, wind)
    hat = np.where(lo, hat + 2.0 * H, hat)
    return WrappedHeight(hat, wind.astype(np.int64))


def beam_grid(domain, Nt, Nx):
    """Uniform periodic nodes on ``(0, T) x (0, L)``."""
    if Nt < 1 or Nx < 1:
        raise InputDomainError(f"grid sizes must be >= 1, got {(Nt, Nx)}")
    return np.arange(Nt) * (domain.T / Nt), np.arange(Nx) * (domain.L / Nx)


@dataclass(frozen=True)
class TraceField:
    """Fluid velocity sampled on the beam curve.

    Attributes
    ----------
    t, x : ndarray
        Grid nodes.
    eta_hat : ndarray, shape (Nt, Nx)
        Wrapped beam height used for the evaluation.
    values : ndarray, shape (2, Nt, Nx)
        ``u(t_k, x_j, eta_hat[k, j])``.
    """

    t: np.ndarray
    x: np.ndarray
    eta_hat: np.ndarray
    values: np.ndarray

    @property
    def vertical(self):
        return self.values[1]


def trace_velocity(u, eta, grid) -> TraceField:
    """Evaluate a fluid field along the wrapped beam graph.

    Parameters
    ----------
    u : SpectralField
        Fluid velocity.
    eta : SpectralField
        Beam displacement sharing ``u``'s time basis.
    grid : tuple
        Either node counts ``(Nt, Nx)`` or node arrays ``(t, x)``.
    """
    if u.kind != "fluid" or eta.kind != "beam":
        raise ConfigurationError("trace needs a fluid field and a beam field")
    if u.time != eta.time:
        raise ConfigurationError("u and eta are on different time bases")
    if u.space.L != eta.space.L:
        raise ConfigurationError("u and eta live on different lengths L")
    t, x = grid
    if np.ndim(t) == 0:
        Nt, Nx = int(t), int(x)
        if Nt < 1 or Nx < 1:
            raise InputDomainError(f"grid sizes must be >= 1, got {(Nt, Nx)}")
        t = np.arange(Nt) * (u.time.T / Nt)
        x = np.arange(Nx) * (u.space.L / Nx)
    t, x = np.asarray(t, float), np.asarray(x, float)
    hat = wrap_eta(eta.evaluate(t, x), u.space.H).eta_hat
    vals = u.evaluate_on_curve(t, x, hat)
    return TraceField(t, x, hat, vals)


def moving_domain_map(eta, t, x, H):
    """Lower and upper boundary curves ``eta`` and ``eta + 2H`` at time ``t``.

    Reporting helper for the equivalent moving domain; the solver works on
    the fixed box.
    """
    if eta.kind != "beam":
        raise ConfigurationError("moving_domain_map expects a beam field")
    if not (0.0 <= t < eta.time.T):
        raise InputDomainError(f"t must lie in [0, T), got {t}")
    lower = eta.evaluate(np.array([t]), np.asarray(x, float))[0]
    return lower, lower + 2.0 * H
