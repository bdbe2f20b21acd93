"""Penalised compressible momentum solve for the fluid velocity.

Given a density ``rho``, a lagged velocity ``u~`` and a lagged beam
``eta~`` the unknown ``u`` in ``span{f_i tau_j}`` satisfies, for every
test field ``phi = f_i tau_j``,

    delta (u, phi_t) + (rho u~, phi_t) + (rho u~ (x) u~, grad phi)
      + (rho^gamma + delta rho^a, div phi) - (S(grad u), grad phi)
      - delta (|u|^2 u, phi) - eps (grad rho (x) phi, grad u~)
      + eps/2 ((M - rho) u~, phi) - 1/eps <v - eta~_t e2, psi>_beam
      + (rho F, phi) = 0

with ``v`` and ``psi`` the traces of ``u`` and ``phi`` on the curve
``z = eta~``.  Gradients follow ``(grad u)_{ij} = d_i u_j``.

The terms linear in ``u`` are assembled once per solve; the cubic damping
is handled by Newton's method with an analytic Jacobian and a damped
Picard fallback.
"""

from dataclasses import dataclass, field
import logging
import math

import numpy as np
from scipy import linalg

from .basis import SpectralField, differentiate
from .errors import ConfigurationError, InputDomainError, SolverError
from .geometry import wrap_eta

__all__ = ["FluidParams", "ViscousStressForm", "FluidSolveInfo", "FluidResidual",
           "FluidSystem", "assemble_viscous_form", "solve_fluid", "fluid_residual",
           "fluid_quad_counts", "truncate_forcing", "test_integrals", "stress",
           "default_beam_grid", "TERM_NAMES"]

log = logging.getLogger(__name__)

TERM_NAMES = ("time", "inertia", "convection", "pressure", "viscous", "cubic",
              "eps_grad", "eps_mass", "penalty", "forcing")


@dataclass(frozen=True)
class FluidParams:
    """Physical and regularisation parameters of the momentum equation.

    ``F`` is a fluid-type :class:`SpectralField` (or ``None``); it is
    truncated to the span of the velocity basis before use.
    """

    gamma: float
    a: float
    delta: float
    eps: float
    mu: float
    zeta: float
    M: float
    F: SpectralField = None
    f: SpectralField = None
    convection: bool = True
    cubic: bool = True

    def __post_init__(self):
        if not self.gamma > 1:
            raise InputDomainError(f"gamma must exceed 1, got {self.gamma}")
        if not self.a >= 5:
            raise InputDomainError(f"a must be at least 5, got {self.a}")
        if not self.delta >= 0:
            raise InputDomainError(f"delta must be nonnegative, got {self.delta}")
        if not self.eps > 0:
            raise InputDomainError(f"eps must be positive, got {self.eps}")
        if not (self.mu > 0 and self.zeta > 0):
            raise InputDomainError(f"viscosities must be positive, got {self.mu}, {self.zeta}")
        if not self.M > 0:
            raise InputDomainError(f"M must be positive, got {self.M}")

    @property
    def cubic_coefficient(self):
        return self.delta if self.cubic else 0.0

    def pressure(self, rho):
        r = np.maximum(rho, 0.0)
        return r ** self.gamma + self.delta * r ** self.a


@dataclass(frozen=True)
class ViscousStressForm:
    """Matrix ``A[i, k] = (S(grad f_k), grad f_i)`` over the box."""

    matrix: np.ndarray
    mu: float
    zeta: float


@dataclass
class FluidSolveInfo:
    method: str
    iterations: int
    residual: float
    history: list = field(default_factory=list)


@dataclass(frozen=True)
class FluidResidual:
    """Weak residual per named term, each of shape ``(n, 2m + 1)``."""

    terms: dict
    total: np.ndarray

    def max_abs(self):
        return float(np.abs(self.total).max())


def default_beam_grid(time, beam_space=None, fluid_space=None):
    """Node counts of the beam quadrature, fine enough for squares of beam fields."""
    kb = beam_space.raw.K if beam_space is not None else 1
    kf = fluid_space.raw.fx.K if fluid_space is not None else 1
    return max(32, 4 * time.K + 2), max(32, 4 * max(kb, kf) + 2)


def fluid_quad_counts(space, time, rho_band, exponents=(2.0, 5.0)):
    """Uniform node counts ``(Nt, Nx, Nz)`` for the volume integrals.

    Products of the density with up to three velocity-band factors and the
    cubic damping are integrated exactly; pressure powers with integer
    exponents as well.
    """
    K = (time.K, space.raw.fx.K, space.raw.fz.K)
    p = int(math.ceil(max(exponents)))
    return tuple(max(kr + 3 * k, 4 * k, p * kr + k) + 1 for kr, k in zip(rho_band, K))


def _embed_vector_raw(R, src, dst):
    """Move raw vector coefficients ``(2, nx, nz, nt)`` between raw families."""
    out = np.zeros((2, dst.fx.size, dst.fz.size) + R.shape[3:])
    nx = min(src.fx.size, dst.fx.size)
    nz = min(src.fz.size, dst.fz.size)
    out[:, :nx, :nz] = R[:, :nx, :nz]
    return out


def truncate_forcing(F, space, time):
    """L^2-orthogonal restriction of a fluid-type field to ``span{f_i tau_j}``."""
    if F is None:
        return None
    if F.kind != "fluid" or F.space.raw.L != space.L or F.space.raw.H != space.H:
        raise ConfigurationError("body force lives on an incompatible space")
    R = F.raw_coeffs()
    R = _embed_vector_raw(R, F.space.raw, space.raw)
    R = R.reshape(space.raw.size, F.time.size)
    R = F.time.embed(R.T, time.K).T
    return SpectralField(space, time, space.to_raw @ R)


class _Tables:
    """1D basis tables on a uniform space-time grid."""

    def __init__(self, space, time, counts):
        self.counts = counts
        Nt, Nx, Nz = counts
        self.t = np.arange(Nt) * (time.T / Nt)
        self.x = np.arange(Nx) * (space.L / Nx)
        self.z = np.arange(Nz) * (2.0 * space.H / Nz)
        self.w = (time.T / Nt) * (space.L / Nx) * (2.0 * space.H / Nz)
        self.Et = [time.evaluate(self.t, p) for p in (0, 1)]
        self.Ex = [space.raw.fx.evaluate(self.x, p) for p in (0, 1)]
        self.Ez = [space.raw.fz.evaluate(self.z, p) for p in (0, 1)]


def test_integrals(space, time, tab, vec=None, ten=None, vec_t=None):
    """``(vec, phi) + (ten, grad phi) + (vec_t, phi_t)`` for every ``phi = f_i tau_j``.

    ``vec`` and ``vec_t`` have shape ``(2, Nt, Nx, Nz)``; ``ten[d, c]`` pairs
    with ``d_d phi_c``.
    """
    Et, Ex, Ez = tab.Et, tab.Ex, tab.Ez
    braw = np.zeros((2, space.raw.fx.size, space.raw.fz.size, time.size))
    ein = lambda g, a, b, c: np.einsum("ctxz,tj,xa,zb->cabj", g, a, b, c, optimize=True)
    if vec is not None:
        braw += ein(vec, Et[0], Ex[0], Ez[0])
    if vec_t is not None:
        braw += ein(vec_t, Et[1], Ex[0], Ez[0])
    if ten is not None:
        braw += ein(ten[0], Et[0], Ex[1], Ez[0])
        braw += ein(ten[1], Et[0], Ex[0], Ez[1])
    return space.to_raw @ braw.reshape(space.raw.size, time.size) * tab.w


def stress(grad, mu, zeta):
    """``S[d, c]`` from ``grad[d, c] = d_d u_c`` (any trailing grid shape)."""
    div = grad[0, 0] + grad[1, 1]
    S = mu * (grad + np.swapaxes(grad, 0, 1))
    S[0, 0] += (zeta - mu) * div
    S[1, 1] += (zeta - mu) * div
    return S


def assemble_viscous_form(space, mu, zeta) -> ViscousStressForm:
    """Exact Gram-type matrix of the Newtonian stress on the velocity basis."""
    if not (mu > 0 and zeta > 0):
        raise InputDomainError(f"viscosities must be positive, got {mu}, {zeta}")
    Kx, Kz = space.raw.fx.K, space.raw.fz.K
    Nx, Nz = 2 * Kx + 2, 2 * Kz + 2
    x = np.arange(Nx) * (space.L / Nx)
    z = np.arange(Nz) * (2.0 * space.H / Nz)
    _, dphi = space.tables(x, z)
    S = stress(np.moveaxis(dphi, 0, 2), mu, zeta)  # (d, c, k, x, z)
    w = (space.L / Nx) * (2.0 * space.H / Nz)
    A = np.einsum("idcxz,dckxz->ik", dphi, S, optimize=True) * w
    return ViscousStressForm(A, mu, zeta)


def _beam_trace_tables(space, time, eta_lag, beam_grid):
    Nt, Nx = beam_grid
    tb = np.arange(Nt) * (time.T / Nt)
    xb = np.arange(Nx) * (space.L / Nx)
    hat = wrap_eta(eta_lag.evaluate(tb, xb), space.H).eta_hat
    vals = space.point_values(xb[None, :], hat)  # (n, 2, Nt, Nx)
    Et = time.evaluate(tb)
    w = (time.T / Nt) * (space.L / Nx)
    return tb, xb, hat, vals, Et, w


class FluidSystem:
    """Assembled momentum problem for fixed data ``(rho, u~, eta~)``.

    ``residual(c)`` returns the full weak residual for coefficient matrix
    ``c`` and ``jacobian(c)`` its exact derivative.
    """

    def __init__(self, space, time, rho, u_lag, eta_lag, params: FluidParams,
                 eta_lag_t=None, beam_grid=None):
        self.space, self.time, self.params = space, time, params
        if u_lag is not None and (u_lag.space != space or u_lag.time != time):
            raise ConfigurationError("lagged velocity is on a different basis")
        if eta_lag.time != time:
            raise ConfigurationError("lagged beam is on a different time basis")
        self.beam_grid = beam_grid or default_beam_grid(time, eta_lag.space, space)
        n, nt = space.size, time.size
        self.shape = (n, nt)
        p = params
        gt = time.gram_diagonal()
        Ms = space.l2_gram()
        V = assemble_viscous_form(space, p.mu, p.zeta).matrix
        L = p.delta * np.kron(Ms, time.deriv_matrix().T * gt[None, :]) - np.kron(V, np.diag(gt))
        # penalty block from traces on the lagged curve
        tb, xb, hat, vals, Et, wb = _beam_trace_tables(space, time, eta_lag, self.beam_grid)
        A = np.einsum("ictx,kctx->ikt", vals, vals, optimize=True)
        P = np.einsum("ikt,tj,tl->ijkl", A, Et, Et, optimize=True).reshape(n * nt, n * nt)
        self.penalty_matrix = P * (wb / p.eps)
        self.L = L - self.penalty_matrix
        etat = eta_lag_t if eta_lag_t is not None else differentiate(eta_lag, "t")
        etat_vals = etat.evaluate(tb, xb)
        b = np.einsum("tx,itx,tj->ij", etat_vals, vals[:, 1], Et, optimize=True) * (wb / p.eps)
        # data terms on the volume grid
        counts = fluid_quad_counts(space, time, rho.band, (p.gamma, p.a))
        tab = _Tables(space, time, counts)
        b += _data_terms(space, time, tab, rho, u_lag, p, truncate_forcing(p.F, space, time),
                         combine=True)
        self.b = b
        # cubic damping on the exact 4K+1 grid
        self.cub_counts = tuple(4 * k + 1 for k in (time.K, space.raw.fx.K, space.raw.fz.K))
        ctab = _Tables(space, time, self.cub_counts)
        self.ctab = ctab
        phi_sp, _ = space.tables(ctab.x, ctab.z)  # (n, 2, Nx, Nz)
        Phi = np.einsum("icxz,tj->ijctxz", phi_sp, ctab.Et[0])
        self.Phi = Phi.reshape(n * nt, 2, -1)

    def _values(self, c):
        """Velocity on the cubic grid, shape ``(2, Q)``."""
        return np.einsum("n,ncq->cq", c.ravel(), self.Phi)

    def cubic(self, c):
        """``-delta (|u|^2 u, phi)`` as a flat vector."""
        if self.params.cubic_coefficient == 0:
            return np.zeros(c.size)
        u = self._values(c)
        g = np.sum(u * u, axis=0) * u
        return -self.params.cubic_coefficient * self.ctab.w * np.einsum("cq,ncq->n", g, self.Phi)

    def cubic_jacobian(self, c):
        N = c.size
        if self.params.cubic_coefficient == 0:
            return np.zeros((N, N))
        u = self._values(c)
        u2 = np.sum(u * u, axis=0)
        J = np.zeros((N, N))
        for a in range(2):
            for b in range(2):
                W = 2.0 * u[a] * u[b] + (u2 if a == b else 0.0)
                J += (self.Phi[:, a] * W) @ self.Phi[:, b].T
        return -self.params.cubic_coefficient * self.ctab.w * J

    def residual(self, c):
        c = np.asarray(c).ravel()
        return self.L @ c + self.cubic(c) + self.b.ravel()

    def jacobian(self, c):
        return self.L + self.cubic_jacobian(np.asarray(c).ravel())

    def picard_matrix(self, c):
        """Linear operator with the cubic coefficient ``|u|^2`` frozen at ``c``."""
        N = c.size
        if self.params.cubic_coefficient == 0:
            return self.L
        u2 = np.sum(self._values(np.asarray(c).ravel()) ** 2, axis=0)
        Mq = np.zeros((N, N))
        for a in range(2):
            Mq += (self.Phi[:, a] * u2) @ self.Phi[:, a].T
        return self.L - self.params.cubic_coefficient * self.ctab.w * Mq


def _data_terms(space, time, tab, rho, u_lag, p, F, combine=False):
    """Terms not involving the unknown velocity (volume part)."""
    counts = tab.counts
    r = rho.on_grid(counts)
    gr = np.stack([rho.on_grid(counts, (0, 1, 0)), rho.on_grid(counts, (0, 0, 1))])
    out = {}
    if u_lag is not None:
        ul = u_lag.evaluate(tab.t, tab.x, tab.z)
        gul = np.stack([differentiate(u_lag, "x").evaluate(tab.t, tab.x, tab.z),
                        differentiate(u_lag, "z").evaluate(tab.t, tab.x, tab.z)])
        if p.convection:
            out["inertia"] = test_integrals(space, time, tab, vec_t=r * ul)
            out["convection"] = test_integrals(space, time, tab,
                                               ten=r * ul[:, None] * ul[None, :])
        else:
            out["inertia"] = out["convection"] = np.zeros((space.size, time.size))
        eg = -p.eps * np.einsum("dtxz,dctxz->ctxz", gr, gul)
        out["eps_grad"] = test_integrals(space, time, tab, vec=eg)
        out["eps_mass"] = test_integrals(space, time, tab, vec=0.5 * p.eps * (p.M - r) * ul)
    else:
        z = np.zeros((space.size, time.size))
        out.update(inertia=z, convection=z, eps_grad=z, eps_mass=z)
    pr = p.pressure(r)
    eye = np.zeros((2, 2) + pr.shape)
    eye[0, 0] = eye[1, 1] = pr
    out["pressure"] = test_integrals(space, time, tab, ten=eye)
    if F is not None:
        Fv = F.evaluate(tab.t, tab.x, tab.z)
        out["forcing"] = test_integrals(space, time, tab, vec=r * Fv)
    else:
        out["forcing"] = np.zeros((space.size, time.size))
    if combine:
        return sum(out.values())
    return out


def _stagnated(history, window=10, factor=0.9):
    return len(history) > window and history[-1] > factor * history[-1 - window]


def solve_fluid(rho, u_lag, eta_lag, params: FluidParams, eta_lag_t=None, space=None,
                time=None, beam_grid=None, tol=1e-13, maxiter=50, method="newton",
                return_info=False):
    """Solve the penalised momentum equation for ``u``.

    Parameters
    ----------
    rho : DensityField
    u_lag : SpectralField
        Lagged velocity; also the initial guess.  Its bases define the
        unknown's space unless ``space``/``time`` are given.
    eta_lag : SpectralField or BeamState
        Lagged beam displacement defining the trace curve.
    params : FluidParams
    eta_lag_t : SpectralField, optional
        Beam velocity used in the penalty; defaults to ``d/dt eta_lag``.
    tol : float
        Relative tolerance on the residual (scaled by the data norm).
    method : {"newton", "picard"}

    Returns
    -------
    SpectralField, or ``(SpectralField, FluidSolveInfo)`` with ``return_info``.

    Raises
    ------
    SolverError
        When Newton and the Picard fallback both stop reducing the
        residual by at least 10% over 10 iterations.
    """
    eta_lag = getattr(eta_lag, "eta", eta_lag)
    space = space or u_lag.space
    time = time or u_lag.time
    sysm = FluidSystem(space, time, rho, u_lag, eta_lag, params, eta_lag_t, beam_grid)
    c = (u_lag.coeffs.ravel().copy() if u_lag is not None
         else np.zeros(space.size * time.size))
    scale = max(np.linalg.norm(sysm.b), np.linalg.norm(sysm.L, 2) * np.linalg.norm(c), 1e-300)
    target = tol * scale
    history = []
    R = sysm.residual(c)
    history.append(float(np.linalg.norm(R)))
    used = method
    if history[-1] > target and method == "newton":
        for _ in range(maxiter):
            J = sysm.jacobian(c)
            try:
                dc = linalg.solve(J, -R)
            except linalg.LinAlgError:
                break
            step = 1.0
            while True:
                cn = c + step * dc
                Rn = sysm.residual(cn)
                if np.linalg.norm(Rn) < np.linalg.norm(R) or step < 1e-4:
                    break
                step *= 0.5
            c, R = cn, Rn
            history.append(float(np.linalg.norm(R)))
            if history[-1] <= target or _stagnated(history):
                break
            # quadratic convergence stops once rounding dominates
            if len(history) > 3 and history[-1] > 0.5 * history[-2] and history[-1] < 1e3 * target:
                break
    if history[-1] > max(target, 1e3 * tol * scale) or method == "picard":
        used = "picard" if method == "picard" else "newton+picard"
        theta = 0.5
        for _ in range(max(maxiter, 200)):
            A = sysm.picard_matrix(c)
            cstar = linalg.solve(A, -sysm.b.ravel())
            c = (1 - theta) * c + theta * cstar
            R = sysm.residual(c)
            history.append(float(np.linalg.norm(R)))
            if history[-1] <= target or _stagnated(history):
                break
        if history[-1] > 1e3 * target and _stagnated(history):
            raise SolverError("momentum solve stagnated", residual=history[-1], history=history)
    if history[-1] > 1e3 * target:
        raise SolverError("momentum solve did not converge", residual=history[-1],
                          history=history)
    u = SpectralField(space, time, c.reshape(sysm.shape))
    if return_info:
        return u, FluidSolveInfo(used, len(history) - 1, history[-1] / scale, history)
    return u


def fluid_residual(u, rho, u_lag, eta_lag, params: FluidParams, eta_lag_t=None,
                   beam_grid=None) -> FluidResidual:
    """Weak residual of the momentum equation evaluated term by term.

    Every term is computed from pointwise values on quadrature grids (no
    assembled matrices), so it serves as an independent check of
    :func:`solve_fluid`.
    """
    eta_lag = getattr(eta_lag, "eta", eta_lag)
    space, time, p = u.space, u.time, params
    beam_grid = beam_grid or default_beam_grid(time, eta_lag.space, space)
    counts = fluid_quad_counts(space, time, rho.band, (p.gamma, p.a))
    tab = _Tables(space, time, counts)
    terms = _data_terms(space, time, tab, rho, u_lag, p, truncate_forcing(p.F, space, time))
    uv = u.evaluate(tab.t, tab.x, tab.z)
    terms["time"] = test_integrals(space, time, tab, vec_t=p.delta * uv)
    grad = np.stack([differentiate(u, "x").evaluate(tab.t, tab.x, tab.z),
                     differentiate(u, "z").evaluate(tab.t, tab.x, tab.z)])
    terms["viscous"] = -test_integrals(space, time, tab, ten=stress(grad, p.mu, p.zeta))
    terms["cubic"] = -p.cubic_coefficient * test_integrals(space, time, tab,
                                               vec=np.sum(uv * uv, axis=0) * uv)
    tb, xb, hat, vals, Et, wb = _beam_trace_tables(space, time, eta_lag, beam_grid)
    v = u.evaluate_on_curve(tb, xb, hat)
    etat = eta_lag_t if eta_lag_t is not None else differentiate(eta_lag, "t")
    v[1] -= etat.evaluate(tb, xb)
    terms["penalty"] = -np.einsum("ctx,ictx,tj->ij", v, vals, Et, optimize=True) * (wb / p.eps)
    terms = {k: terms[k] for k in TERM_NAMES}
    return FluidResidual(terms, sum(terms.values()))
