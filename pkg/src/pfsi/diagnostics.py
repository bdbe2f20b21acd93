"""Energies, energy balances and weak residuals of computed states.

All volume integrals use a uniform grid on the space-time box; beam
integrals use the beam quadrature nodes of the stage, which are the same
nodes the solvers use for the penalty coupling.  Every function takes a
state and the :class:`~pfsi.driver.StageContext` it was computed in.
"""

from dataclasses import dataclass, field, asdict
import logging
import math
import warnings

import numpy as np

from .basis import Fourier1D, SpectralField, differentiate
from .fluid import fluid_quad_counts, stress, truncate_forcing
from .geometry import trace_velocity, wrap_eta

__all__ = ["EnergyReport", "BalanceTerms", "WeakResidualReport", "TestPair",
           "energy", "energy_balance", "energy_inequality", "penalty_residual",
           "coupled_weak_residual", "lifted_test_family", "spectral_test_pair",
           "korn_defect", "diagnostic_counts", "inequality_weights"]

log = logging.getLogger(__name__)


def diagnostic_counts(state, ctx, extra_time_band=0, minimum=32):
    """Volume grid for diagnostics: exact for the polynomial integrands."""
    p = ctx.params
    c = fluid_quad_counts(state.u.space, state.u.time, state.rho.band, (p.gamma, p.a))
    c = (c[0] + 2 * extra_time_band, c[1], c[2])
    return tuple(max(n, minimum) for n in c)


class _Volume:
    """Fields of a state sampled on a uniform volume grid."""

    def __init__(self, state, ctx, counts):
        d = ctx.config.domain
        Nt, Nx, Nz = counts
        self.t = np.arange(Nt) * (d.T / Nt)
        self.x = np.arange(Nx) * (d.L / Nx)
        self.z = np.arange(Nz) * (2.0 * d.H / Nz)
        self.wt = d.T / Nt
        self.wyz = (d.L / Nx) * (2.0 * d.H / Nz)
        rho = state.rho
        self.rho = rho.on_grid(counts)
        self.grho = np.stack([rho.on_grid(counts, (0, 1, 0)), rho.on_grid(counts, (0, 0, 1))])
        u = state.u
        self.u = u.evaluate(self.t, self.x, self.z)
        self.gu = np.stack([differentiate(u, "x").evaluate(self.t, self.x, self.z),
                            differentiate(u, "z").evaluate(self.t, self.x, self.z)])
        F = truncate_forcing(ctx.params.F, u.space, u.time)
        self.F = None if F is None else F.evaluate(self.t, self.x, self.z)

    def slice_integral(self, g):
        """``int_Omega g(t) dy`` for every time node."""
        return g.sum(axis=(-2, -1)) * self.wyz


class _Beam:
    """Beam fields on the stage's beam quadrature grid."""

    def __init__(self, state, ctx, t=None):
        tb, xb = ctx.beam_nodes
        self.t = tb if t is None else t
        self.x = xb
        self.wt_b = ctx.config.domain.T / len(tb)
        self.wx = ctx.config.domain.L / len(xb)
        eta = state.eta.eta
        self.eta_t = differentiate(eta, "t").evaluate(self.t, xb)
        self.eta_xx = differentiate(eta, "xx").evaluate(self.t, xb)
        self.eta_tx = differentiate(eta, "tx").evaluate(self.t, xb)
        f = ctx.params.f
        self.f = None if f is None else f.evaluate(self.t, xb)

    def slice_integral(self, g):
        return g.sum(axis=-1) * self.wx


@dataclass
class EnergyReport:
    """Energies and space-time functionals of one state.

    Time series are sampled on ``t``; scalars are integrals over one period.
    """

    t: np.ndarray
    E: np.ndarray
    E_delta: np.ndarray
    dissipation: dict
    forcing_work: dict
    penalty: float
    balance_residual: float
    balance_scale: float
    sup_E: float
    sup_E_delta: float
    mass_error: float
    min_rho: float
    rates: dict = field(default_factory=dict)

    def scalars(self):
        out = {"penalty": self.penalty, "balance_residual": self.balance_residual,
               "balance_scale": self.balance_scale, "sup_E": self.sup_E,
               "sup_E_delta": self.sup_E_delta, "mass_error": self.mass_error,
               "min_rho": self.min_rho}
        out.update({f"dissipation_{k}": v for k, v in self.dissipation.items()})
        out.update({f"work_{k}": v for k, v in self.forcing_work.items()})
        return out


def _time_series(state, ctx, vol, beam):
    p = ctx.params
    r = vol.rho
    rp = np.maximum(r, 0.0)
    u2 = np.sum(vol.u ** 2, axis=0)
    kin = vol.slice_integral(0.5 * r * u2)
    internal = vol.slice_integral(rp ** p.gamma / (p.gamma - 1.0))
    extra = vol.slice_integral(0.5 * p.delta * u2 + p.delta * rp ** p.a / (p.a - 1.0))
    elastic = beam.slice_integral(0.5 * beam.eta_t ** 2 + 0.5 * beam.eta_xx ** 2)
    E = kin + internal + elastic
    return E, E + extra


def penalty_residual(state, ctx, t=None):
    """``int |v - eta_t e2|^2`` over the beam, ``v`` the trace of ``u`` on ``eta``.

    With ``t`` given, returns the spatial integral at those times instead.
    """
    tb, xb = ctx.beam_nodes
    tt = tb if t is None else t
    tr = trace_velocity(state.u, state.eta.eta, (tt, xb))
    d = tr.values.copy()
    d[1] -= differentiate(state.eta.eta, "t").evaluate(tt, xb)
    dens = np.sum(d * d, axis=0).sum(axis=-1) * (ctx.config.domain.L / len(xb))
    if t is not None:
        return dens
    return float(dens.sum() * (ctx.config.domain.T / len(tb)))


@dataclass
class BalanceTerms:
    """Named left and right contributions of the weighted energy balance."""

    lhs: dict
    rhs: dict

    @property
    def LHS(self):
        return float(sum(self.lhs.values()))

    @property
    def RHS(self):
        return float(sum(self.rhs.values()))

    @property
    def residual(self):
        return self.LHS - self.RHS

    @property
    def scale(self):
        return max(abs(self.LHS), abs(self.RHS), 1.0)


def _weight(phi, T):
    """Coefficient vector of a time weight on ``Fourier1D(T, K)``."""
    c = np.atleast_1d(np.asarray(phi, dtype=float))
    if c.size % 2 == 0:
        raise ValueError("time weight needs an odd number of coefficients")
    return Fourier1D(T, (c.size - 1) // 2), c


def energy_balance(state, ctx, phi=(1.0,), physical_only=False) -> BalanceTerms:
    """Both sides of the weighted energy balance.

    Parameters
    ----------
    phi : array_like
        Coefficients of the time weight on ``1, sin, cos, ...`` of period ``T``.
        The discrete identity is exact only for constant weights; other
        weights trigger a warning.
    physical_only : bool
        Keep only the terms that survive in the limit energy inequality
        (kinetic, internal and elastic energy, viscous and structural
        dissipation, forcing work).
    """
    p = ctx.params
    fam, c = _weight(phi, ctx.config.domain.T)
    if fam.K > 0 and not physical_only:
        warnings.warn("energy identity is only guaranteed for constant weights", stacklevel=2)
    counts = diagnostic_counts(state, ctx, fam.K)
    vol = _Volume(state, ctx, counts)
    phv = fam.evaluate(vol.t) @ c
    pht = fam.evaluate(vol.t, 1) @ c
    beam = _Beam(state, ctx)
    phb = fam.evaluate(beam.t) @ c
    beam_v = _Beam(state, ctx, vol.t)

    def vint(g):
        return float(np.sum(vol.slice_integral(g) * phv) * vol.wt)

    def bint(g):
        return float(np.sum(beam.slice_integral(g) * phb) * beam.wt_b)

    r = vol.rho
    rp = np.maximum(r, 0.0)
    u2 = np.sum(vol.u ** 2, axis=0)
    g2 = np.sum(vol.grho ** 2, axis=0)
    S = stress(vol.gu, p.mu, p.zeta)
    visc = np.einsum("dc...,dc...->...", S, vol.gu)
    lhs, rhs = {}, {}
    kin = vol.slice_integral(0.5 * r * u2 + rp ** p.gamma / (p.gamma - 1.0))
    kin = kin + beam_v.slice_integral(0.5 * beam_v.eta_t ** 2 + 0.5 * beam_v.eta_xx ** 2)
    if not physical_only:
        kin = kin + vol.slice_integral(0.5 * p.delta * u2 + p.delta * rp ** p.a / (p.a - 1.0))
    lhs["time"] = -float(np.sum(pht * kin) * vol.wt)
    lhs["viscous"] = vint(visc)
    lhs["beam"] = bint(beam.eta_tx ** 2)
    rhs["f_work"] = bint(beam.f * beam.eta_t) if beam.f is not None else 0.0
    rhs["F_work"] = vint(r * np.sum(vol.u * vol.F, axis=0)) if vol.F is not None else 0.0
    if not physical_only:
        g, a, e, d, M = p.gamma, p.a, p.eps, p.delta, p.M
        lhs["cubic"] = d * vint(u2 ** 2)
        lhs["eps_grad_gamma"] = e * g * vint(rp ** (g - 2.0) * g2)
        lhs["eps_gamma"] = e * g / (g - 1.0) * vint(rp ** g)
        lhs["eps_grad_a"] = e * d * a * vint(rp ** (a - 2.0) * g2)
        lhs["eps_a"] = e * d * a / (a - 1.0) * vint(rp ** a)
        pen = penalty_residual(state, ctx, beam.t)
        lhs["penalty"] = float(np.sum(pen * phb) * beam.wt_b) / e
        rhs["eps_M_gamma"] = e * M * g / (g - 1.0) * vint(rp ** (g - 1.0))
        rhs["eps_M_a"] = e * d * M * a / (a - 1.0) * vint(rp ** (a - 1.0))
    return BalanceTerms(lhs, rhs)


def inequality_weights(T=None):
    """Nonnegative time weights used for the inequality check."""
    s = 1.0 / math.sqrt(2.0)
    return [np.array([1.0]),
            np.array([1.0, 0.0, 1.0]), np.array([1.0, 0.0, -1.0]),
            np.array([1.0, 1.0, 0.0]), np.array([1.0, -1.0, 0.0]),
            np.array([1.0, s, s])]


def energy_inequality(state, ctx, weights=None):
    """Largest relative defect ``max(0, LHS - RHS) / scale`` of the physical inequality.

    Returns ``(defect, per_weight)`` where ``per_weight`` lists
    ``(LHS, RHS, scale)`` for each weight.
    """
    weights = inequality_weights() if weights is None else weights
    rows, worst = [], 0.0
    for w in weights:
        b = energy_balance(state, ctx, w, physical_only=True)
        rows.append((b.LHS, b.RHS, b.scale))
        worst = max(worst, max(0.0, b.LHS - b.RHS) / b.scale)
    return worst, rows


def energy(state, ctx) -> EnergyReport:
    """Energy time series, dissipation, forcing work and the constant-weight balance."""
    p = ctx.params
    counts = diagnostic_counts(state, ctx)
    vol = _Volume(state, ctx, counts)
    beam_v = _Beam(state, ctx, vol.t)
    beam = _Beam(state, ctx)
    E, Ed = _time_series(state, ctx, vol, beam_v)
    S = stress(vol.gu, p.mu, p.zeta)
    u2 = np.sum(vol.u ** 2, axis=0)
    rates = {"viscous": vol.slice_integral(np.einsum("dc...,dc...->...", S, vol.gu)),
             "beam": beam_v.slice_integral(beam_v.eta_tx ** 2),
             "cubic": vol.slice_integral(p.cubic_coefficient * u2 * u2),
             "penalty": penalty_residual(state, ctx, vol.t) / p.eps}
    bal = energy_balance(state, ctx)
    mass = state.rho.slice_mass(counts[0])
    m0 = ctx.config.m0
    diss = {k: bal.lhs[k] for k in ("viscous", "beam", "cubic", "eps_grad_gamma",
                                    "eps_gamma", "eps_grad_a", "eps_a")}
    work = {k: bal.rhs[k] for k in bal.rhs}
    return EnergyReport(
        t=vol.t, E=E, E_delta=Ed, dissipation=diss, forcing_work=work,
        penalty=penalty_residual(state, ctx), balance_residual=bal.residual,
        balance_scale=bal.scale, sup_E=float(E.max()), sup_E_delta=float(Ed.max()),
        mass_error=float(np.abs(mass - m0).max() / m0), min_rho=float(state.rho.min_value),
        rates=rates)


# ----------------------------------------------------------------------
# coupled weak residual


@dataclass
class TestPair:
    """Fluid test field and beam test function, evaluated on demand.

    ``phi(t, x, z)`` returns ``(values, d_t values, grad)`` with shapes
    ``(2, Nt, Nx, Nz)``, ``(2, ...)`` and ``(2, 2, ...)``; ``psi(t, x)``
    returns ``(values, d_t, d_x, d_xx)`` on the beam grid.
    """

    phi: object
    psi: object
    label: str = ""
    trace: object = None


def spectral_test_pair(phi_field, psi_field, label=""):
    """Pair made of two spectral fields (e.g. ``(u, eta_t)``)."""
    def phi(t, x, z):
        return (phi_field.evaluate(t, x, z), differentiate(phi_field, "t").evaluate(t, x, z),
                np.stack([differentiate(phi_field, "x").evaluate(t, x, z),
                          differentiate(phi_field, "z").evaluate(t, x, z)]))

    def psi(t, x):
        return tuple(psi_field.evaluate(t, x) if w == "" else
                     differentiate(psi_field, w).evaluate(t, x) for w in ("", "t", "x", "xx"))

    def trace(t, x, hat):
        return phi_field.evaluate_on_curve(t, x, hat)

    return TestPair(phi, psi, label, trace)


def lifted_test_family(state, ctx, n_space=2, time_modes=(0, 1, 2), kappa=4.0):
    """Pairs ``psi = s_i tau_j`` and ``phi = psi(t, x) chi(z - eta(t, x)) e2``.

    ``chi(s) = exp(kappa (cos(pi s / H) - 1))`` is smooth, ``2H``-periodic and
    equals 1 at ``s = 0``, so the trace of ``phi`` on the beam equals
    ``psi e2`` exactly.  The same ``(i, j)`` labels give the same family at
    every stage as long as the first beam modes coincide (they are nested).
    """
    H = ctx.config.domain.H
    L = ctx.config.domain.L
    from .basis import make_beam_basis
    sp = make_beam_basis(L, n_space)
    tb = state.u.time
    T = tb.T
    eta = state.eta.eta
    k = math.pi / H
    pairs = []
    tfam = Fourier1D(T, max(time_modes) // 2 + 1)
    for i in range(n_space):
        for j in time_modes:
            def psi_parts(t, x, i=i, j=j):
                Et = [tfam.evaluate(t, d)[:, j] for d in (0, 1)]
                Sx = [sp.evaluate(x, d)[:, i] for d in (0, 1, 2)]
                return (np.outer(Et[0], Sx[0]), np.outer(Et[1], Sx[0]),
                        np.outer(Et[0], Sx[1]), np.outer(Et[0], Sx[2]))

            def phi(t, x, z, psi_parts=psi_parts):
                ps, ps_t, ps_x, _ = psi_parts(t, x)
                e = eta.evaluate(t, x)
                e_t = differentiate(eta, "t").evaluate(t, x)
                e_x = differentiate(eta, "x").evaluate(t, x)
                s = z[None, None, :] - e[:, :, None]
                chi = np.exp(kappa * (np.cos(k * s) - 1.0))
                dchi = -kappa * k * np.sin(k * s) * chi
                val = np.zeros((2,) + s.shape)
                val[1] = ps[:, :, None] * chi
                dt = np.zeros_like(val)
                dt[1] = ps_t[:, :, None] * chi - ps[:, :, None] * dchi * e_t[:, :, None]
                grad = np.zeros((2,) + val.shape)
                grad[0, 1] = ps_x[:, :, None] * chi - ps[:, :, None] * dchi * e_x[:, :, None]
                grad[1, 1] = ps[:, :, None] * dchi
                return val, dt, grad

            def trace(t, x, hat, psi_parts=psi_parts):
                s = hat - eta.evaluate(t, x)
                out = np.zeros((2,) + s.shape)
                out[1] = psi_parts(t, x)[0] * np.exp(kappa * (np.cos(k * s) - 1.0))
                return out

            pairs.append(TestPair(phi, psi_parts, f"s{i + 1}tau{j}", trace))
    return pairs


@dataclass
class WeakResidualReport:
    """Coupled momentum residual per test pair, split into groups of terms.

    ``physical`` holds the terms that remain in the limit problem, ``delta``
    and ``eps`` the regularisation terms; ``total`` is their sum.
    ``continuity`` is the weak continuity residual (``b = 0``) for a fixed
    scalar family.  ``constraint`` is the largest mismatch between the
    trace of ``phi`` and ``psi e2`` over the pairs.
    """

    labels: list
    physical: np.ndarray
    delta: np.ndarray
    eps: np.ndarray
    total: np.ndarray
    terms: list
    continuity: float
    constraint: float

    @property
    def physical_norm(self):
        return float(np.sqrt(np.sum(self.physical ** 2)))

    @property
    def total_norm(self):
        return float(np.sqrt(np.sum(self.total ** 2)))


def _continuity_family(T, L, H):
    """Scalar test functions ``(value, d_t, d_x, d_z)`` as callables on a grid."""
    wt, wx, wz = 2 * math.pi / T, 2 * math.pi / L, math.pi / H
    fam = []
    for (a, b, c) in ((0, 1, 0), (0, 0, 1), (1, 1, 0), (1, 0, 1), (0, 1, 1)):
        def f(t, x, z, a=a, b=b, c=c):
            T_, X_, Z_ = np.meshgrid(t, x, z, indexing="ij")
            arg = a * wt * T_ + b * wx * X_ + c * wz * Z_
            s, co = np.sin(arg), np.cos(arg)
            return s, a * wt * co, b * wx * co, c * wz * co
        fam.append(f)
    return fam


def coupled_weak_residual(state, ctx, pairs=None, counts=(32, 32, 64)) -> WeakResidualReport:
    """Residual of the coupled momentum balance for admissible test pairs.

    For each pair the fluid equation tested with ``phi`` and the beam
    equation tested with ``psi`` are added, so the penalty terms cancel:

        delta(u, phi_t) + (rho u, phi_t) + (rho u (x) u, grad phi)
        + (rho^gamma + delta rho^a, div phi) - (S, grad phi)
        - delta(|u|^2 u, phi) - eps(grad rho (x) phi, grad u)
        + eps/2((M - rho) u, phi) + (rho F, phi)
        + <eta_t, psi_t> - <eta_xx, psi_xx> - <eta_tx, psi_x> + <f, psi>.

    Volume integrals use a fixed grid (``counts``) so values are
    comparable between discretisations.
    """
    p = ctx.params
    pairs = lifted_test_family(state, ctx) if pairs is None else pairs
    vol = _Volume(state, ctx, counts)
    beam = _Beam(state, ctx)
    w = vol.wt * vol.wyz
    wb = beam.wt_b * beam.wx
    r = vol.rho
    rp = np.maximum(r, 0.0)
    u = vol.u
    S = stress(vol.gu, p.mu, p.zeta)
    eta = state.eta.eta
    hat = wrap_eta(eta.evaluate(beam.t, beam.x), ctx.config.domain.H).eta_hat
    phys, dl, ep, tot, terms, labels = [], [], [], [], [], []
    constraint = 0.0
    for pr in pairs:
        val, dt, grad = pr.phi(vol.t, vol.x, vol.z)
        div = grad[0, 0] + grad[1, 1]
        ps, ps_t, ps_x, ps_xx = pr.psi(beam.t, beam.x)
        t_ = {}
        t_["inertia"] = np.sum(r * np.sum(u * dt, axis=0)) * w
        t_["convection"] = np.sum(r * np.einsum("d...,c...,dc...->...", u, u, grad)) * w
        t_["pressure"] = np.sum(rp ** p.gamma * div) * w
        t_["viscous"] = -np.sum(np.einsum("dc...,dc...->...", S, grad)) * w
        t_["beam_inertia"] = np.sum(beam.eta_t * ps_t) * wb
        t_["beam_elastic"] = -np.sum(beam.eta_xx * ps_xx) * wb
        t_["beam_viscous"] = -np.sum(beam.eta_tx * ps_x) * wb
        t_["f"] = np.sum(beam.f * ps) * wb if beam.f is not None else 0.0
        t_["F"] = np.sum(r * np.sum(vol.F * val, axis=0)) * w if vol.F is not None else 0.0
        d_ = {"time": p.delta * np.sum(u * dt) * w,
              "pressure_a": p.delta * np.sum(rp ** p.a * div) * w,
              "cubic": -p.delta * np.sum(np.sum(u * u, axis=0) * np.sum(u * val, axis=0)) * w}
        e_ = {"eps_grad": -p.eps * np.sum(np.einsum("d...,c...,dc...->...", vol.grho, val, vol.gu)) * w,
              "eps_mass": 0.5 * p.eps * np.sum((p.M - r) * np.sum(u * val, axis=0)) * w}
        a_, b_, c_ = sum(t_.values()), sum(d_.values()), sum(e_.values())
        phys.append(a_)
        dl.append(b_)
        ep.append(c_)
        tot.append(a_ + b_ + c_)
        terms.append({**t_, **d_, **e_})
        labels.append(pr.label)
        if pr.trace is not None:
            tr = pr.trace(beam.t, beam.x, hat)
            mis = max(np.abs(tr[0]).max(), np.abs(tr[1] - ps).max())
            constraint = max(constraint, float(mis))
    cont = 0.0
    d = ctx.config.domain
    for f in _continuity_family(d.T, d.L, d.H):
        s, st, sx, sz = f(vol.t, vol.x, vol.z)
        cont = max(cont, abs(float(np.sum(r * (st + u[0] * sx + u[1] * sz)) * w)))
    return WeakResidualReport(labels, np.array(phys), np.array(dl), np.array(ep), np.array(tot),
                              terms, cont, constraint)


def korn_defect(w: SpectralField, counts=None):
    """``2||D(w)||^2 - ||grad w||^2 - ||div w||^2`` for a fluid field on the torus."""
    Kt, Kx, Kz = w.time.K, w.space.raw.fx.K, w.space.raw.fz.K
    counts = counts or (2 * Kt + 2, 2 * Kx + 2, 2 * Kz + 2)
    T, L, H = w.time.T, w.space.raw.L, w.space.raw.H
    t = np.arange(counts[0]) * (T / counts[0])
    x = np.arange(counts[1]) * (L / counts[1])
    z = np.arange(counts[2]) * (2 * H / counts[2])
    G = np.stack([differentiate(w, "x").evaluate(t, x, z), differentiate(w, "z").evaluate(t, x, z)])
    D = 0.5 * (G + np.swapaxes(G, 0, 1))
    div = G[0, 0] + G[1, 1]
    wgt = (T / counts[0]) * (L / counts[1]) * (2 * H / counts[2])
    a = 2 * np.sum(D ** 2) * wgt
    b = np.sum(G ** 2) * wgt + np.sum(div ** 2) * wgt
    return float(a - b), float(max(a, b))
