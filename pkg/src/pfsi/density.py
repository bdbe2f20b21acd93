"""Time-periodic damped continuity equation.

Given a band-limited velocity ``u`` the density solves

    rho_t + div(rho u) - eps Lap(rho) + eps rho = eps M

on the space-time torus ``(0, T) x (0, L) x (-H, H)``.  The unknown is
expanded in complex exponentials ``exp(i (kt wt t + kx wx x + kz wz z))``
with ``|kt| <= Kt``, ``|kx| <= Kx``, ``|kz| <= Kz`` and the equation is
imposed on exactly those modes (Fourier-Galerkin).  Because the products
``rho u`` are trigonometric polynomials, the Galerkin advection term is an
exact, truncated convolution and is assembled as a sparse matrix.

Array axes are always ordered ``(t, x, z)``.
"""

from dataclasses import dataclass, field
import logging
import math

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .basis import pad_spectrum
from .errors import InputDomainError, SolverError

__all__ = ["DensitySolveOptions", "DensityField", "ContinuityResidual",
           "solve_density", "continuity_residual", "density_operator",
           "velocity_spectrum", "DIRECT_LIMIT"]

log = logging.getLogger(__name__)

#: unknown count above which the Krylov path replaces the sparse LU
DIRECT_LIMIT = 20000


@dataclass(frozen=True)
class DensitySolveOptions:
    """Parameters of one density solve.

    Attributes
    ----------
    eps : float
        Damping and diffusion coefficient.
    M : float
        Target mean density ``m0 / |Omega|``.
    band : tuple of int
        Retained harmonics ``(Kt, Kx, Kz)``.
    tol : float
        Relative residual tolerance of the Krylov path.
    maxiter : int
        Krylov iteration cap.
    negativity_tol : float
        ``min rho`` below ``-negativity_tol`` is flagged in the result.
    """

    eps: float
    M: float
    band: tuple
    tol: float = 1e-13
    maxiter: int = 2000
    negativity_tol: float = 0.0

    def __post_init__(self):
        if not self.eps > 0:
            raise InputDomainError(f"eps must be positive, got {self.eps}")
        if not self.M > 0:
            raise InputDomainError(f"M must be positive, got {self.M}")
        if len(self.band) != 3 or min(self.band) < 0:
            raise InputDomainError(f"band must be three nonnegative ints, got {self.band}")


class DensityField:
    """Band-limited space-time density.

    Parameters
    ----------
    hat : ndarray, complex, shape (2Kt+1, 2Kx+1, 2Kz+1)
        Coefficients of ``exp(i k.y)``, index ``k + K`` along each axis.
    periods : tuple
        ``(T, L, 2H)``.
    M : float
        Target mean, kept for diagnostics.
    """

    def __init__(self, hat, periods, M, negativity_tol=0.0, solver_residual=0.0):
        hat = np.asarray(hat, dtype=complex)
        if any(n % 2 == 0 for n in hat.shape) or hat.ndim != 3:
            raise InputDomainError(f"coefficient box must be odd in 3 axes, got {hat.shape}")
        self.hat = hat
        self.periods = tuple(float(p) for p in periods)
        self.M = float(M)
        self.band = tuple((n - 1) // 2 for n in hat.shape)
        self.solver_residual = float(solver_residual)
        self.values = self.on_grid(hat.shape)
        self.min_value = float(self.values.min())
        self.negative = self.min_value < -negativity_tol

    # constructors -----------------------------------------------------

    @classmethod
    def constant(cls, M, band, periods):
        hat = np.zeros(tuple(2 * k + 1 for k in band), dtype=complex)
        hat[tuple(band)] = M
        return cls(hat, periods, M)

    @classmethod
    def from_values(cls, values, periods, M):
        """Interpolant of values on an odd-sized uniform grid."""
        values = np.asarray(values, dtype=float)
        hat = np.fft.fftshift(np.fft.fftn(values) / values.size)
        return cls(hat, periods, M)

    # sampling ---------------------------------------------------------

    @property
    def wavenumbers(self):
        return tuple(2.0 * math.pi / p for p in self.periods)

    @property
    def area(self):
        return self.periods[1] * self.periods[2]

    def spectrum(self, deriv=(0, 0, 0)):
        """Centred coefficients of a mixed partial derivative."""
        h = self.hat
        for ax, (d, w, K) in enumerate(zip(deriv, self.wavenumbers, self.band)):
            if d:
                k = 1j * w * np.arange(-K, K + 1)
                shape = [1, 1, 1]
                shape[ax] = -1
                h = h * (k ** d).reshape(shape)
        return h

    def on_grid(self, shape, deriv=(0, 0, 0)):
        """Values (or derivative values) on a uniform grid of ``shape`` nodes.

        Harmonics that the target grid cannot carry are dropped.
        """
        h = np.fft.ifftshift(self.spectrum(deriv))
        full = pad_spectrum(h, tuple(shape))
        return np.real(np.fft.ifftn(full)) * np.prod(shape)

    def evaluate(self, t, x, z, deriv=(0, 0, 0)):
        """Values on the tensor grid ``t x x x z`` (arbitrary nodes)."""
        h = self.spectrum(deriv)
        E = []
        for nodes, w, K in zip((t, x, z), self.wavenumbers, self.band):
            k = np.arange(-K, K + 1)
            E.append(np.exp(1j * w * np.outer(np.atleast_1d(nodes), k)))
        return np.real(np.einsum("ta,xb,zc,abc->txz", E[0], E[1], E[2], h, optimize=True))

    def resampled(self, band):
        """Same function truncated or zero-padded to another band."""
        shape = tuple(2 * k + 1 for k in band)
        hat = np.zeros(shape, dtype=complex)
        src, dst = [], []
        for Kold, Knew in zip(self.band, band):
            K = min(Kold, Knew)
            src.append(slice(Kold - K, Kold + K + 1))
            dst.append(slice(Knew - K, Knew + K + 1))
        hat[tuple(dst)] = self.hat[tuple(src)]
        return DensityField(hat, self.periods, self.M)

    def slice_mass(self, nt=None):
        """``int_Omega rho(t) dy`` at ``nt`` uniform times (default: own grid)."""
        nt = self.hat.shape[0] if nt is None else nt
        col = np.fft.ifftshift(self.hat[:, self.band[1], self.band[2]])
        col = pad_spectrum(col, (nt,))
        return np.real(np.fft.ifft(col)) * nt * self.area

    @property
    def total_mass(self):
        return self.slice_mass()

    def l2_norm(self):
        """``L^2`` norm over the space-time cylinder (Parseval)."""
        meas = float(np.prod(self.periods))
        return math.sqrt(meas * float(np.sum(np.abs(self.hat) ** 2)))

    def __sub__(self, other):
        band = tuple(max(a, b) for a, b in zip(self.band, other.band))
        a, b = self.resampled(band), other.resampled(band)
        return DensityField(a.hat - b.hat, self.periods, self.M)


def velocity_spectrum(u):
    """Centred complex coefficients of a fluid field, shape ``(2, 2Kt+1, 2Kx+1, 2Kz+1)``."""
    Kt = u.time.K
    Kx, Kz = u.space.raw.fx.K, u.space.raw.fz.K
    shape = (2 * Kt + 1, 2 * Kx + 1, 2 * Kz + 1)
    t = np.arange(shape[0]) * (u.time.T / shape[0])
    x = np.arange(shape[1]) * (u.space.L / shape[1])
    z = np.arange(shape[2]) * (2.0 * u.space.H / shape[2])
    vals = u.evaluate(t, x, z)
    return np.fft.fftshift(np.fft.fftn(vals, axes=(1, 2, 3)), axes=(1, 2, 3)) / np.prod(shape)


def density_operator(u, eps, band, periods):
    """Sparse Galerkin matrix of ``rho -> rho_t + div(rho u) - eps Lap rho + eps rho``."""
    wt, wx, wz = (2.0 * math.pi / p for p in periods)
    Kt, Kx, Kz = band
    shape = (2 * Kt + 1, 2 * Kx + 1, 2 * Kz + 1)
    N = int(np.prod(shape))
    kt, kx, kz = (g.ravel() for g in np.meshgrid(
        np.arange(-Kt, Kt + 1), np.arange(-Kx, Kx + 1), np.arange(-Kz, Kz + 1), indexing="ij"))
    diag = 1j * wt * kt + eps * ((wx * kx) ** 2 + (wz * kz) ** 2 + 1.0)
    rows = [np.arange(N)]
    cols = [np.arange(N)]
    vals = [diag]
    if u is not None:
        uh = velocity_spectrum(u)
        Qt, Qx, Qz = ((n - 1) // 2 for n in uh.shape[1:])
        scale = np.abs(uh).max() if uh.size else 0.0
        for it, jx, jz in zip(*np.nonzero(np.abs(uh).max(axis=0) > 1e-15 * max(scale, 1e-300))):
            qt, qx, qz = it - Qt, jx - Qx, jz - Qz
            st, sx, sz = kt - qt, kx - qx, kz - qz
            inside = (np.abs(st) <= Kt) & (np.abs(sx) <= Kx) & (np.abs(sz) <= Kz)
            if not inside.any():
                continue
            r = np.nonzero(inside)[0]
            c = np.ravel_multi_index((st[r] + Kt, sx[r] + Kx, sz[r] + Kz), shape)
            v = 1j * (wx * kx[r] * uh[0, it, jx, jz] + wz * kz[r] * uh[1, it, jx, jz])
            rows.append(r)
            cols.append(c)
            vals.append(v)
    A = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(N, N)).tocsc()
    return A, diag


def solve_density(u, opts: DensitySolveOptions, periods) -> DensityField:
    """Galerkin solution of the damped continuity equation.

    Parameters
    ----------
    u : SpectralField or None
        Fluid velocity; ``None`` means ``u = 0``.
    opts : DensitySolveOptions
    periods : tuple
        ``(T, L, 2H)``.

    Returns
    -------
    DensityField
        The zero mode equals ``M`` exactly, so every time slice carries
        mass ``M |Omega|``.
    """
    A, diag = density_operator(u, opts.eps, opts.band, periods)
    N = A.shape[0]
    b = np.zeros(N, dtype=complex)
    b[N // 2] = opts.eps * opts.M  # centre of the box is k = 0
    if N <= DIRECT_LIMIT:
        x = splinalg.splu(A).solve(b)
    else:
        pre = splinalg.LinearOperator(A.shape, matvec=lambda v: v / diag, dtype=complex)
        x, info = splinalg.gmres(A, b, M=pre, rtol=opts.tol, atol=0.0, restart=80,
                                 maxiter=opts.maxiter)
        if info != 0:
            res = np.linalg.norm(A @ x - b) / np.linalg.norm(b)
            raise SolverError(f"density GMRES did not converge (info={info})", residual=res)
    res = float(np.linalg.norm(A @ x - b) / np.linalg.norm(b))
    hat = x.reshape(tuple(2 * k + 1 for k in opts.band))
    rho = DensityField(hat, periods, opts.M, opts.negativity_tol, res)
    if rho.negative:
        log.warning("density minimum %.3e below tolerance", rho.min_value)
    return rho


@dataclass(frozen=True)
class ContinuityResidual:
    """Strong ``L^2(Q_T)`` norm and largest Galerkin coefficient of the residual."""

    strong_l2: float
    weak_max: float


def continuity_residual(rho: DensityField, u, eps, M) -> ContinuityResidual:
    """Residual of ``rho_t + div(rho u) - eps Lap rho + eps (rho - M)``.

    The residual is sampled on a grid fine enough that its square is
    integrated exactly.  ``weak_max`` is the largest modulus among the
    normalised Fourier coefficients on the retained density modes (the
    Galerkin equations); with ``eps = 0`` it is the weak continuity
    residual against those modes.
    """
    Ku = (0, 0, 0) if u is None else (u.time.K, u.space.raw.fx.K, u.space.raw.fz.K)
    shape = tuple(2 * (2 * (a + b)) + 1 for a, b in zip(rho.band, Ku))
    T, L, P = rho.periods
    t, x, z = (np.arange(n) * (p / n) for n, p in zip(shape, rho.periods))
    r = rho.on_grid(shape, (1, 0, 0)) + eps * (rho.on_grid(shape) - M)
    r -= eps * (rho.on_grid(shape, (0, 2, 0)) + rho.on_grid(shape, (0, 0, 2)))
    if u is not None:
        from .basis import differentiate
        uv = u.evaluate(t, x, z)
        div = differentiate(u, "x").evaluate(t, x, z)[0] + differentiate(u, "z").evaluate(t, x, z)[1]
        r += uv[0] * rho.on_grid(shape, (0, 1, 0)) + uv[1] * rho.on_grid(shape, (0, 0, 1))
        r += rho.on_grid(shape) * div
    meas = T * L * P
    strong = math.sqrt(float(np.mean(r ** 2)) * meas)
    rh = np.fft.fftn(r) / r.size
    kept = pad_spectrum(pad_spectrum(rh, rho.hat.shape), shape)
    return ContinuityResidual(strong, float(np.abs(kept).max()))
