"""Trigonometric bases in time and space.

Every basis in this module is a finite linear combination of *raw* real
Fourier modes.  A raw 1D family on a period ``P`` with ``K`` harmonics is
indexed as

    0      -> 1
    2k - 1 -> sin(2 pi k x / P)
    2k     -> cos(2 pi k x / P)

so that differentiation, Gram matrices and evaluation are closed-form.
The time basis is the raw family itself; the beam basis is an
H^2-orthonormalised combination of raw modes vanishing at ``x = 0``; the
fluid basis is a selection of raw tensor modes times unit vectors.

A :class:`SpectralField` couples a space basis, a time basis and a real
coefficient matrix of shape ``(space.size, time.size)``.
"""

import math

import numpy as np
from scipy import linalg

from .errors import ConfigurationError, InputDomainError, InternalError

__all__ = [
    "Fourier1D", "TimeBasis", "BeamBasis", "FluidBasis", "VectorFourier2D",
    "SpectralField", "QuadratureRule",
    "make_time_basis", "make_beam_basis", "make_fluid_basis",
    "differentiate", "dealiased_product", "project",
    "pad_spectrum", "truncate_spectrum", "fourier_interpolate",
    "default_node_count",
]


def default_node_count(band):
    """Uniform node count resolving products of two fields of harmonic ``band``."""
    return max(2 * int(band) + 1, 16)


class Fourier1D:
    """Raw real trigonometric family on a periodic interval of length ``period``."""

    kind = "raw1d"

    def __init__(self, period, K):
        if period <= 0:
            raise InputDomainError(f"period must be positive, got {period}")
        if K < 0:
            raise InputDomainError(f"harmonic count must be >= 0, got {K}")
        self.period = float(period)
        self.K = int(K)
        self.size = 2 * self.K + 1
        k = np.zeros(self.size, dtype=int)
        k[1::2] = np.arange(1, self.K + 1)
        k[2::2] = np.arange(1, self.K + 1)
        self.harmonics = k

    @property
    def w(self):
        return 2.0 * math.pi / self.period

    @property
    def wavenumbers(self):
        return self.w * self.harmonics

    def __eq__(self, other):
        return (type(self) is type(other) and self.period == other.period
                and self.K == other.K)

    def __hash__(self):
        return hash((type(self).__name__, self.period, self.K))

    def __repr__(self):
        return f"{type(self).__name__}(period={self.period}, K={self.K})"

    # raw space protocol, so raw families can carry SpectralFields directly
    @property
    def raw(self):
        return self

    @property
    def to_raw(self):
        return np.eye(self.size)

    def evaluate(self, x, deriv=0):
        """Values of all family members (or their ``deriv``-th derivative).

        Returns an array of shape ``x.shape + (size,)``.
        """
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (self.size,))
        if deriv == 0:
            out[..., 0] = 1.0
        if self.K == 0:
            return out
        kw = self.w * np.arange(1, self.K + 1)
        arg = x[..., None] * kw
        shift = deriv * math.pi / 2.0
        scale = kw ** deriv
        out[..., 1::2] = scale * np.sin(arg + shift)
        out[..., 2::2] = scale * np.cos(arg + shift)
        return out

    def deriv_matrix(self, order=1):
        """Matrix ``D`` with ``coeffs(f') = D @ coeffs(f)``."""
        D = np.zeros((self.size, self.size))
        for k in range(1, self.K + 1):
            kw = k * self.w
            s, c = 2 * k - 1, 2 * k
            D[c, s] = kw
            D[s, c] = -kw
        return np.linalg.matrix_power(D, order) if order != 1 else D

    def antiderivative_matrix(self):
        """Mean-free antiderivative: inverse of ``deriv_matrix`` off the constant."""
        A = np.zeros((self.size, self.size))
        for k in range(1, self.K + 1):
            kw = k * self.w
            s, c = 2 * k - 1, 2 * k
            A[s, c] = 1.0 / kw
            A[c, s] = -1.0 / kw
        return A

    def gram_diagonal(self):
        g = np.full(self.size, self.period / 2.0)
        g[0] = self.period
        return g

    def gram(self):
        return np.diag(self.gram_diagonal())

    def l2_gram(self):
        return self.gram()

    def nodes(self, N):
        return np.arange(N) * (self.period / N)

    def embed(self, coeffs, K_new):
        """Zero-pad (or truncate) raw coefficients along axis 0 to ``K_new`` harmonics."""
        coeffs = np.asarray(coeffs)
        out = np.zeros((2 * K_new + 1,) + coeffs.shape[1:])
        n = min(out.shape[0], coeffs.shape[0])
        out[:n] = coeffs[:n]
        return out


class TimeBasis(Fourier1D):
    """Time-periodic basis ``tau_0 .. tau_{2m}`` on ``(0, T)``.

    ``tau_0 = 1``, ``tau_{2k-1} = sin(2 pi k t / T)``,
    ``tau_{2k} = cos(2 pi k t / T)``.
    """

    kind = "time"

    def __init__(self, T, m):
        super().__init__(T, m)

    @property
    def T(self):
        return self.period

    @property
    def m(self):
        return self.K

    def __repr__(self):
        return f"TimeBasis(T={self.T}, m={self.m})"


def make_time_basis(T, m):
    """Time basis with ``2m + 1`` functions; Gram is ``diag(T, T/2, ...)``."""
    if T <= 0:
        raise InputDomainError(f"T must be positive, got {T}")
    if m < 0:
        raise InputDomainError(f"m must be >= 0, got {m}")
    return TimeBasis(T, m)


class BeamBasis:
    """Periodic functions on ``(0, L)`` vanishing at ``x = 0``, H^2-orthonormal.

    Generators ``sin(2 pi k x/L)`` and ``cos(2 pi k x/L) - 1`` are taken in
    interleaved order ``sin_1, cos_1 - 1, sin_2, ...`` and orthonormalised by
    Gram-Schmidt in ``(u, v) -> int u v + u' v' + u'' v''``.  The first ``n``
    functions do not depend on the total count, so bases nest.
    """

    kind = "beam"

    def __init__(self, L, n):
        if L <= 0:
            raise InputDomainError(f"L must be positive, got {L}")
        if n < 1:
            raise InputDomainError(f"beam basis needs n >= 1, got {n}")
        self.L = float(L)
        self.n = self.size = int(n)
        self.raw = Fourier1D(L, (n + 1) // 2)
        gens = np.zeros((n, self.raw.size))
        for i in range(n):
            k = i // 2 + 1
            if i % 2 == 0:
                gens[i, 2 * k - 1] = 1.0
            else:
                gens[i, 2 * k] = 1.0
                gens[i, 0] = -1.0
        kw = self.raw.wavenumbers
        self.h2_metric = self.raw.gram_diagonal() * (1.0 + kw ** 2 + kw ** 4)
        self.to_raw = self._orthonormalise(gens)

    def _orthonormalise(self, gens):
        g = self.h2_metric
        C = np.array(gens, dtype=float)
        for i in range(C.shape[0]):
            for _ in range(2):
                for j in range(i):
                    C[i] -= np.sum(C[i] * g * C[j]) * C[j]
            nrm = math.sqrt(np.sum(C[i] * g * C[i]))
            if nrm < 1e-14:
                raise InternalError("beam generators are linearly dependent")
            C[i] /= nrm
        return C

    def __eq__(self, other):
        return isinstance(other, BeamBasis) and (self.L, self.n) == (other.L, other.n)

    def __hash__(self):
        return hash(("BeamBasis", self.L, self.n))

    def __repr__(self):
        return f"BeamBasis(L={self.L}, n={self.n})"

    def evaluate(self, x, deriv=0):
        return self.raw.evaluate(x, deriv) @ self.to_raw.T

    def l2_gram(self):
        C = self.to_raw
        return (C * self.raw.gram_diagonal()) @ C.T

    def derivative_gram(self, order):
        """``int s_i^(order) s_k^(order) dx`` for all pairs."""
        C = self.to_raw
        kw = self.raw.wavenumbers
        return (C * (self.raw.gram_diagonal() * kw ** (2 * order))) @ C.T

    def h2_gram(self):
        C = self.to_raw
        return (C * self.h2_metric) @ C.T


def make_beam_basis(L, n):
    return BeamBasis(L, n)


class VectorFourier2D:
    """Raw 2-vector tensor modes on the torus ``(0, L) x (-H, H)``.

    Flat index order is ``(component, x-index, z-index)``.
    """

    kind = "fluid"

    def __init__(self, L, H, Kx, Kz):
        if L <= 0 or H <= 0:
            raise InputDomainError(f"L and H must be positive, got {L}, {H}")
        self.L, self.H = float(L), float(H)
        self.fx = Fourier1D(L, Kx)
        self.fz = Fourier1D(2.0 * H, Kz)
        self.shape = (2, self.fx.size, self.fz.size)
        self.size = int(np.prod(self.shape))

    @property
    def raw(self):
        return self

    @property
    def to_raw(self):
        return np.eye(self.size)

    def __eq__(self, other):
        return (isinstance(other, VectorFourier2D) and self.L == other.L and self.H == other.H
                and self.fx.K == other.fx.K and self.fz.K == other.fz.K)

    def __hash__(self):
        return hash(("VectorFourier2D", self.L, self.H, self.fx.K, self.fz.K))

    def gram_diagonal(self):
        g = np.multiply.outer(self.fx.gram_diagonal(), self.fz.gram_diagonal())
        return np.broadcast_to(g, self.shape).ravel()

    def l2_gram(self):
        return np.diag(self.gram_diagonal())


class FluidBasis:
    """Vector fields ``mode(x) mode(z) e_c`` ordered by increasing wavenumber.

    Scalar tensor modes are sorted by ``|k|^2 = (2 pi kx/L)^2 + (pi lz/H)^2``,
    ties broken by ``(kx, lz)`` and then raw index; each scalar mode
    contributes ``e_1`` then ``e_2``.  The first two members are the constant
    fields.
    """

    kind = "fluid"

    def __init__(self, L, H, n):
        if n < 1:
            raise InputDomainError(f"fluid basis needs n >= 1, got {n}")
        self.L, self.H = float(L), float(H)
        self.n = self.size = int(n)
        nscalar = (n + 1) // 2
        kmax = int(math.isqrt(nscalar)) + 2
        cand = []
        for kx in range(kmax + 1):
            for lz in range(kmax + 1):
                kk = (2 * math.pi * kx / L) ** 2 + (math.pi * lz / H) ** 2
                ixs = [0] if kx == 0 else [2 * kx - 1, 2 * kx]
                izs = [0] if lz == 0 else [2 * lz - 1, 2 * lz]
                for ix in ixs:
                    for iz in izs:
                        cand.append((round(kk, 12), kx, lz, ix, iz))
        cand.sort()
        scalars = cand[:nscalar]
        Kx = max(c[1] for c in scalars)
        Kz = max(c[2] for c in scalars)
        self.raw = VectorFourier2D(L, H, Kx, Kz)
        self.modes = []
        for _, kx, lz, ix, iz in scalars:
            for comp in (0, 1):
                self.modes.append((comp, ix, iz))
        self.modes = self.modes[:n]
        C = np.zeros((n, self.raw.size))
        for i, idx in enumerate(self.modes):
            C[i, np.ravel_multi_index(idx, self.raw.shape)] = 1.0
        self.to_raw = C

    def __eq__(self, other):
        return isinstance(other, FluidBasis) and (self.L, self.H, self.n) == (other.L, other.H, other.n)

    def __hash__(self):
        return hash(("FluidBasis", self.L, self.H, self.n))

    def __repr__(self):
        return f"FluidBasis(L={self.L}, H={self.H}, n={self.n})"

    @property
    def band(self):
        """Largest x and z harmonics present."""
        return self.raw.fx.K, self.raw.fz.K

    def gram_diagonal(self):
        return self.to_raw @ self.raw.gram_diagonal()

    def l2_gram(self):
        return np.diag(self.gram_diagonal())

    def tables(self, x, z):
        """Values and gradients of every member on the tensor grid ``x x z``.

        Returns ``(phi, dphi)`` with ``phi[a, c, i, j]`` the ``c``-component at
        ``(x_i, z_j)`` and ``dphi[a, d, c, i, j] = d/dy_d phi_c``.
        """
        Ex = [self.raw.fx.evaluate(x, p) for p in (0, 1)]
        Ez = [self.raw.fz.evaluate(z, p) for p in (0, 1)]
        na = self.n
        phi = np.zeros((na, 2, len(x), len(z)))
        dphi = np.zeros((na, 2, 2, len(x), len(z)))
        for a, (c, ix, iz) in enumerate(self.modes):
            phi[a, c] = np.outer(Ex[0][:, ix], Ez[0][:, iz])
            dphi[a, 0, c] = np.outer(Ex[1][:, ix], Ez[0][:, iz])
            dphi[a, 1, c] = np.outer(Ex[0][:, ix], Ez[1][:, iz])
        return phi, dphi

    def point_values(self, x, z):
        """Members at scattered points; ``x`` and ``z`` broadcast together.

        Returns ``vals[a, c, ...]``.
        """
        x, z = np.broadcast_arrays(np.asarray(x, float), np.asarray(z, float))
        Ex = self.raw.fx.evaluate(x)
        Ez = self.raw.fz.evaluate(z)
        vals = np.zeros((self.n, 2) + x.shape)
        for a, (c, ix, iz) in enumerate(self.modes):
            vals[a, c] = Ex[..., ix] * Ez[..., iz]
        return vals


def make_fluid_basis(L, H, n):
    return FluidBasis(L, H, n)


class SpectralField:
    """Real space-time expansion ``sum_ij c[i, j] space_i tau_j``.

    Parameters
    ----------
    space : BeamBasis, FluidBasis, Fourier1D or VectorFourier2D
    time : TimeBasis
    coeffs : array_like, shape (space.size, time.size)
    """

    def __init__(self, space, time, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (space.size, time.size):
            raise ConfigurationError(
                f"coefficient shape {coeffs.shape} does not match bases "
                f"({space.size}, {time.size})")
        self.space = space
        self.time = time
        self.coeffs = coeffs

    @classmethod
    def zeros(cls, space, time):
        return cls(space, time, np.zeros((space.size, time.size)))

    @property
    def kind(self):
        return "fluid" if self.space.kind == "fluid" else "beam"

    def copy(self):
        return SpectralField(self.space, self.time, self.coeffs.copy())

    def __repr__(self):
        return f"SpectralField({self.space!r}, {self.time!r})"

    def _check_compatible(self, other):
        if not isinstance(other, SpectralField) or self.space != other.space or self.time != other.time:
            raise ConfigurationError("fields live on different bases")

    def __add__(self, other):
        self._check_compatible(other)
        return SpectralField(self.space, self.time, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_compatible(other)
        return SpectralField(self.space, self.time, self.coeffs - other.coeffs)

    def __mul__(self, s):
        return SpectralField(self.space, self.time, self.coeffs * float(s))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def raw_coeffs(self):
        """Coefficients on the raw family: ``(nx, nt)`` or ``(2, nx, nz, nt)``."""
        R = self.space.to_raw.T @ self.coeffs
        if self.kind == "fluid":
            return R.reshape(self.space.raw.shape + (self.time.size,))
        return R

    def to_raw_field(self):
        return SpectralField(self.space.raw, self.time, self.space.to_raw.T @ self.coeffs)

    def with_time(self, time):
        """Same field expressed on a larger (or truncated) time basis."""
        c = self.time.embed(self.coeffs.T, time.K).T
        return SpectralField(self.space, time, c)

    def evaluate(self, t, x, z=None):
        """Values on the tensor grid; ``(Nt, Nx)`` or ``(2, Nt, Nx, Nz)``."""
        Et = self.time.evaluate(np.atleast_1d(t))
        R = self.raw_coeffs()
        if self.kind == "beam":
            if z is not None:
                raise InputDomainError("beam fields have no z coordinate")
            Ex = self.space.raw.evaluate(np.atleast_1d(x))
            return np.einsum("tj,xi,ij->tx", Et, Ex, R, optimize=True)
        if z is None:
            raise InputDomainError("fluid fields need a z grid")
        Ex = self.space.raw.fx.evaluate(np.atleast_1d(x))
        Ez = self.space.raw.fz.evaluate(np.atleast_1d(z))
        return np.einsum("tj,xa,zb,cabj->ctxz", Et, Ex, Ez, R, optimize=True)

    def evaluate_points(self, t, x, z=None):
        """Values at scattered points (arguments broadcast together)."""
        if self.kind == "beam":
            if z is not None:
                raise InputDomainError("beam fields have no z coordinate")
            t, x = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float))
            Et = self.time.evaluate(t)
            Ex = self.space.raw.evaluate(x)
            return np.einsum("...j,...i,ij->...", Et, Ex, self.raw_coeffs(), optimize=True)
        t, x, z = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float),
                                      np.asarray(z, float))
        Et = self.time.evaluate(t)
        Ex = self.space.raw.fx.evaluate(x)
        Ez = self.space.raw.fz.evaluate(z)
        return np.einsum("...j,...a,...b,cabj->c...", Et, Ex, Ez, self.raw_coeffs(),
                         optimize=True)

    def evaluate_on_curve(self, t, x, zgrid):
        """Fluid values at ``(t_k, x_j, zgrid[k, j])``; returns ``(2, Nt, Nx)``."""
        if self.kind != "fluid":
            raise InputDomainError("curve evaluation is defined for fluid fields")
        Et = self.time.evaluate(np.atleast_1d(t))
        Ex = self.space.raw.fx.evaluate(np.atleast_1d(x))
        Ez = self.space.raw.fz.evaluate(np.asarray(zgrid, float))
        A = np.einsum("tj,xa,cabj->cbtx", Et, Ex, self.raw_coeffs(), optimize=True)
        return np.einsum("cbtx,txb->ctx", A, Ez, optimize=True)

    def l2_norm(self):
        """``L^2`` norm over the space-time cylinder (exact)."""
        G = self.space.l2_gram()
        gt = self.time.gram_diagonal()
        return math.sqrt(max(float(np.sum((G @ self.coeffs) * self.coeffs * gt)), 0.0))

    def differentiate(self, which):
        return differentiate(self, which)


def differentiate(field, which):
    """Exact derivative of a spectral field.

    ``which`` is a string of axis letters, e.g. ``"t"``, ``"x"``, ``"xx"``,
    ``"tx"``; ``"z"`` is only valid for fluid fields.  The result lives on
    the raw family of the input space.
    """
    counts = {a: which.count(a) for a in "txz"}
    if set(which) - set("txz"):
        raise InputDomainError(f"unknown derivative selector {which!r}")
    R = field.raw_coeffs()
    if counts["t"]:
        Dt = field.time.deriv_matrix(counts["t"])
        R = np.tensordot(R, Dt, axes=([-1], [1]))
    raw = field.space.raw
    if field.kind == "beam":
        if counts["z"]:
            raise InputDomainError("z-derivative requested for a beam field")
        if counts["x"]:
            R = raw.deriv_matrix(counts["x"]) @ R
        return SpectralField(raw, field.time, R)
    if counts["x"]:
        Dx = raw.fx.deriv_matrix(counts["x"])
        R = np.einsum("pa,cabj->cpbj", Dx, R)
    if counts["z"]:
        Dz = raw.fz.deriv_matrix(counts["z"])
        R = np.einsum("qb,cabj->caqj", Dz, R)
    return SpectralField(raw, field.time, R.reshape(raw.size, field.time.size))


class QuadratureRule:
    """Uniform trapezoidal rule on a periodic box.

    Exact for trigonometric polynomials whose harmonic in each direction is
    below the node count in that direction.
    """

    def __init__(self, periods, counts):
        if len(periods) != len(counts):
            raise ConfigurationError("periods and counts differ in length")
        if any(c < 1 for c in counts):
            raise InputDomainError(f"node counts must be positive, got {counts}")
        self.periods = tuple(float(p) for p in periods)
        self.counts = tuple(int(c) for c in counts)
        self.nodes = [np.arange(c) * (p / c) for p, c in zip(self.periods, self.counts)]
        self.weights = [p / c for p, c in zip(self.periods, self.counts)]

    @property
    def measure(self):
        return float(np.prod(self.periods))

    @property
    def cell_weight(self):
        return float(np.prod(self.weights))

    def integrate(self, values):
        """Integral of values sampled on the tensor grid (trailing axes)."""
        values = np.asarray(values)
        nd = len(self.counts)
        if values.shape[-nd:] != self.counts:
            raise ConfigurationError(
                f"values of shape {values.shape} do not match grid {self.counts}")
        return values.sum(axis=tuple(range(-nd, 0))) * self.cell_weight


# ----------------------------------------------------------------------
# spectral grid transforms


def _axis_blocks(n_from, n_to):
    """Index pairs mapping retained harmonics |k| <= (n_from-1)//2 between grids."""
    K = (min(n_from, n_to) - 1) // 2
    src = np.r_[0:K + 1, n_from - K:n_from] if K > 0 else np.array([0])
    dst = np.r_[0:K + 1, n_to - K:n_to] if K > 0 else np.array([0])
    return src, dst


def pad_spectrum(hat, shape):
    """Move normalised Fourier coefficients onto a grid of another shape.

    Harmonics ``|k| <= (N-1)//2`` are kept; the Nyquist harmonic of an even
    grid is dropped.
    """
    out = np.zeros(shape, dtype=complex)
    idx_src, idx_dst = [], []
    for n_from, n_to in zip(hat.shape, shape):
        s, d = _axis_blocks(n_from, n_to)
        idx_src.append(s)
        idx_dst.append(d)
    out[np.ix_(*idx_dst)] = hat[np.ix_(*idx_src)]
    return out


truncate_spectrum = pad_spectrum


def fourier_interpolate(values, shape):
    """Trigonometric interpolant of grid values, resampled on another grid."""
    values = np.asarray(values, dtype=float)
    hat = np.fft.fftn(values) / values.size
    return np.real(np.fft.ifftn(pad_spectrum(hat, shape)) * np.prod(shape))


def dealiased_product(a, b, c=None):
    """Pointwise product of band-limited grid functions without aliasing.

    Operands are interpolated to a grid with twice the nodes per direction,
    multiplied there and truncated back to the harmonics the original grid
    retains.  Exact (equal to the L^2 projection of the true product) for
    quadratic and cubic products of inputs below the Nyquist harmonic.
    """
    a = np.asarray(a, dtype=float)
    ops = [a, np.asarray(b, dtype=float)] + ([] if c is None else [np.asarray(c, dtype=float)])
    for o in ops[1:]:
        if o.shape != a.shape:
            raise ConfigurationError(f"grid mismatch: {a.shape} vs {o.shape}")
    big = tuple(2 * n for n in a.shape)
    prod = np.ones(big)
    for o in ops:
        prod = prod * fourier_interpolate(o, big)
    hat = np.fft.fftn(prod) / prod.size
    return np.real(np.fft.ifftn(pad_spectrum(hat, a.shape)) * a.size)


def project(values, space, time, quad):
    """Galerkin (L^2) projection of grid values onto ``span{space_i tau_j}``.

    ``values`` is ``(Nt, Nx)`` for beam-type spaces and ``(2, Nt, Nx, Nz)``
    for fluid-type spaces, sampled on ``quad`` (axes ordered t, x[, z]).
    """
    values = np.asarray(values, dtype=float)
    t = quad.nodes[0]
    Et = time.evaluate(t)
    w = quad.cell_weight
    if space.kind == "fluid":
        x, z = quad.nodes[1], quad.nodes[2]
        Ex = space.raw.fx.evaluate(x)
        Ez = space.raw.fz.evaluate(z)
        braw = np.einsum("ctxz,tj,xa,zb->cabj", values, Et, Ex, Ez, optimize=True) * w
        b = space.to_raw @ braw.reshape(space.raw.size, time.size)
    else:
        Ex = space.raw.evaluate(quad.nodes[1])
        b = space.to_raw @ (np.einsum("tx,tj,xi->ij", values, Et, Ex, optimize=True) * w)
    G = space.l2_gram()
    try:
        cf = linalg.cho_factor(G)
    except linalg.LinAlgError as exc:
        raise InternalError("singular Gram matrix in projection") from exc
    c = linalg.cho_solve(cf, b) / time.gram_diagonal()
    return SpectralField(space, time, c)
