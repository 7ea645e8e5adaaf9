"""Ideal-fluid evolution and the dynamical diagnostics built on it.

The stepper advances the pair (W, A) jointly in a pseudo-spectral
formulation: W by the vorticity equation dW/dt = -curl(W x U), and A by
the corresponding 1-form transport dA_i/dt = -(U.grad)A_i - A_j grad_i U_j.
The velocity is recomputed from W at every substage, quadratic products are
dealiased by the 2/3 rule, and time integration is fixed-step RK4. A is
carried as an independent co-state, so the measured curl(A) - W drift is a
free integration-quality diagnostic.

On top of the stepper:

* the vorticity tendency and Bernoulli head (periodic pressure solve);
* the steady-flow obstruction bound: the squared invariant is bounded by
  C * integral((dW/dt)^2) with C = integral(|W x U|^2 / (U.A)^4) over the
  velocity mask, which is a Cauchy-Schwarz pairing and therefore holds
  exactly for the discrete sums as well;
* the local conservation law for the invariant density c = H . curl(H):
  (d/dt + U.grad) c = div(k W) with k = H^2 + (U.A)^{-1} H . grad(Pi),
  whose residual is measured by centred time differences of stepped
  states.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import config
from .errors import CflViolation, DriftExceeded, MaskTooSmall, ToleranceBreach
from .errors import DenominatorVanishesEverywhere
from .fieldcore import (
    ScalarField,
    VectorField,
    cross,
    curl,
    dot,
    grad,
    integrate,
    inverse_curl,
    magnitude2,
    solve_poisson_zero_mean,
)
from .fieldzoo import FieldBundle, _rel_l2
from .gv import EtaChoice, _eta_parts, gv_invariant, integrability_residual, helicity

_DYN = config.DEFAULTS["dynamics"]
_TOL = config.TOL


def _dealiased_cross(bundle: FieldBundle) -> VectorField:
    """2/3-rule product W x U: inputs truncated, result truncated."""
    g = bundle.grid
    mask = g.dealias_mask
    b = bundle.with_velocity()
    wt = VectorField(g, np.stack([g.irfft(mask * g.rfft(c)) for c in b.W.data]))
    ut = VectorField(g, np.stack([g.irfft(mask * g.rfft(c)) for c in b.U.data]))
    p = cross(wt, ut)
    return VectorField(g, np.stack([g.irfft(mask * g.rfft(c)) for c in p.data]))


def vorticity_rate(bundle: FieldBundle) -> VectorField:
    """Vorticity tendency -curl(W x U) with the dealiased product."""
    g = bundle.grid
    p = _dealiased_cross(bundle)
    return VectorField(g, -curl(p).data)


def bernoulli_head(bundle: FieldBundle) -> ScalarField:
    """Zero-mean Pi = P + U^2/2 from the periodic pressure Poisson problem.

    Taking the divergence of the momentum equation gives
    lap(Pi) = -div(W x U).
    """
    from .fieldcore import div as _div

    p = _dealiased_cross(bundle)
    rhs = ScalarField(bundle.grid, -_div(p).data)
    return solve_poisson_zero_mean(rhs)


# -- obstruction bound ---------------------------------------------------------


@dataclass(eq=False)
class BoundReport:
    """Measured pieces of the steady-flow obstruction inequality."""

    gv: float
    C: float
    enstrophy_rate: float
    slack: float
    E: float
    V: float
    lambda_min: float
    approx_bound_rhs: float
    delta_measure: float
    covered_fraction: float
    uncovered_vorticity_fraction: float
    eps: float

    def to_json_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["schema"] = "wring-bound/1"
        return d


def obstruction_bound(
    bundle: FieldBundle,
    eps: float | None = None,
    *,
    slack_tol: float | None = None,
) -> BoundReport:
    """Evaluate gv^2 <= C * integral((dW/dt)^2) on the velocity mask.

    Both sides are formed from the same smooth product G = W x U: the
    tendency is -curl(G) and the invariant density is G . curl(G)/(U.A)^2,
    so the inequality is a literal Cauchy-Schwarz statement about the
    discrete sums and the reported slack can only be negative at roundoff.

    Raises MaskTooSmall when U.A vanishes over too much of the vorticity
    support (the constant C is then undefined; it is reported, never
    regularized silently).
    """
    if eps is None:
        eps = config.DEFAULTS["eta"]["default_eps"]
    if slack_tol is None:
        slack_tol = _TOL["bound_slack_rel"]
    b = bundle.with_velocity()
    choice = EtaChoice.velocity(eps)
    try:
        G, q, mask, uncovered = _eta_parts(b, choice)
    except DenominatorVanishesEverywhere as exc:
        raise MaskTooSmall(str(exc)) from exc
    max_uncovered = config.DEFAULTS["eta"]["max_uncovered_vorticity_fraction"]
    if uncovered > max_uncovered:
        raise MaskTooSmall(
            f"U.A mask misses {uncovered:.1%} of the vorticity support "
            f"(limit {max_uncovered:.0%}); the bound constant C is undefined here"
        )
    curlG = curl(G)
    cv = b.grid.cell_volume
    q_safe = np.where(mask, q, 1.0)
    gv_val = float(
        np.sum(
            np.where(
                mask,
                np.einsum("i...,i...->...", G.data, curlG.data) / q_safe**2,
                0.0,
            )
        )
    ) * cv
    C = float(np.sum(np.where(mask, np.sum(G.data**2, axis=0) / q_safe**4, 0.0))) * cv
    rate = integrate(magnitude2(curlG))
    slack = C * rate - gv_val**2
    if slack < -slack_tol * C * rate:
        raise ToleranceBreach(
            f"bound slack {slack:g} below -{slack_tol:g} * C * rate; "
            "this should be impossible for consistent inputs"
        )
    E = 0.5 * integrate(magnitude2(b.U))
    V = b.grid.volume
    lam = (2.0 * np.pi / max(b.grid.box)) ** 2
    L7 = V**2 / np.sqrt(lam)
    delta = q - 2.0 * E / V
    return BoundReport(
        gv=gv_val,
        C=C,
        enstrophy_rate=rate,
        slack=slack,
        E=E,
        V=V,
        lambda_min=lam,
        approx_bound_rhs=L7 / (4.0 * E**2) * rate,
        delta_measure=float(np.max(np.abs(delta))) * V / E,
        covered_fraction=float(mask.mean()),
        uncovered_vorticity_fraction=uncovered,
        eps=eps,
    )


# -- time stepping -------------------------------------------------------------


@dataclass(eq=False)
class EvolutionState:
    """Evolving (bundle, t) with fixed time step and integration options."""

    bundle: FieldBundle
    t: float = 0.0
    dt: float = 0.01
    dealias: bool = _DYN["dealias"]
    drift_limit: float = _DYN["drift_limit"]
    reproject: bool = False
    curl_drift: float = 0.0


def cfl_timestep(bundle: FieldBundle, cfl: float | None = None) -> float:
    """Time step for a target advective CFL number."""
    if cfl is None:
        cfl = _DYN["default_cfl"]
    b = bundle.with_velocity()
    umax = b.U.maxnorm()
    if umax == 0.0:
        return 1.0
    return cfl * min(b.grid.spacing) / umax


class _Stepper:
    """Spectral-space RK4 kernel shared by step() and the trackers."""

    def __init__(self, grid, dealias: bool):
        self.g = grid
        self.mask = grid.dealias_mask if dealias else None

    def _trunc(self, spec):
        return spec * self.mask if self.mask is not None else spec

    def to_spec(self, v: VectorField):
        return [self.g.rfft(c) for c in v.data]

    def to_phys(self, specs) -> np.ndarray:
        return np.stack([self.g.irfft(s) for s in specs])

    def velocity_spec(self, w_specs):
        g = self.g
        ikx, iky, ikz = g.ik
        inv = g.inv_k2
        sx, sy, sz = w_specs
        return [
            (iky * sz - ikz * sy) * inv,
            (ikz * sx - ikx * sz) * inv,
            (ikx * sy - iky * sx) * inv,
        ]

    def rhs(self, w_specs, a_specs):
        g = self.g
        ik = g.ik
        wd = [self._trunc(s) for s in w_specs]
        ad = [self._trunc(s) for s in a_specs]
        ud = self.velocity_spec(wd)
        W = self.to_phys(wd)
        A = self.to_phys(ad)
        U = self.to_phys(ud)
        # vorticity: dW/dt = -curl(W x U)
        p = np.stack(
            (
                W[1] * U[2] - W[2] * U[1],
                W[2] * U[0] - W[0] * U[2],
                W[0] * U[1] - W[1] * U[0],
            )
        )
        ps = [self._trunc(g.rfft(c)) for c in p]
        rhs_w = [
            -(ik[1] * ps[2] - ik[2] * ps[1]),
            -(ik[2] * ps[0] - ik[0] * ps[2]),
            -(ik[0] * ps[1] - ik[1] * ps[0]),
        ]
        # co-state: dA_i/dt = -U_j dA_i/dx_j - A_j dU_j/dx_i
        dA = [[g.irfft(ik[j] * ad[i]) for j in range(3)] for i in range(3)]
        dU = [[g.irfft(ik[j] * ud[i]) for j in range(3)] for i in range(3)]
        rhs_a = []
        for i in range(3):
            adv = sum(U[j] * dA[i][j] for j in range(3))
            strain = sum(A[j] * dU[j][i] for j in range(3))
            rhs_a.append(-self._trunc(g.rfft(adv + strain)))
        return rhs_w, rhs_a


def step(state: EvolutionState) -> EvolutionState:
    """One RK4 step of the joint (W, A) transport.

    Preconditions: the advective CFL number |dt| max|U| / min(h) must stay
    below the configured limit. After the step the curl(A) - W residual is
    measured; DriftExceeded is raised if it passes the drift limit (with
    ``reproject`` set, A is instead corrected by the solenoidal field that
    restores consistency exactly).
    """
    b = state.bundle.with_velocity()
    g = b.grid
    cfl = abs(state.dt) * b.U.maxnorm() / min(g.spacing)
    if cfl >= _DYN["cfl_limit"]:
        raise CflViolation(
            f"CFL number {cfl:.3f} at dt={state.dt:g} exceeds {_DYN['cfl_limit']}"
        )
    kern = _Stepper(g, state.dealias)
    w0 = kern.to_spec(b.W)
    a0 = kern.to_spec(b.A)
    dt = state.dt

    def axpy(y, k, c):
        return [yi + c * ki for yi, ki in zip(y, k)]

    kw1, ka1 = kern.rhs(w0, a0)
    kw2, ka2 = kern.rhs(axpy(w0, kw1, dt / 2), axpy(a0, ka1, dt / 2))
    kw3, ka3 = kern.rhs(axpy(w0, kw2, dt / 2), axpy(a0, ka2, dt / 2))
    kw4, ka4 = kern.rhs(axpy(w0, kw3, dt), axpy(a0, ka3, dt))
    w1 = [
        y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        for y, k1, k2, k3, k4 in zip(w0, kw1, kw2, kw3, kw4)
    ]
    a1 = [
        y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        for y, k1, k2, k3, k4 in zip(a0, ka1, ka2, ka3, ka4)
    ]
    W1 = VectorField(g, kern.to_phys(w1))
    A1 = VectorField(g, kern.to_phys(a1))
    drift = _rel_l2(curl(A1), W1)
    if drift > state.drift_limit:
        if state.reproject:
            fix = inverse_curl(VectorField(g, W1.data - curl(A1).data))
            A1 = VectorField(g, A1.data + fix.data)
            drift = _rel_l2(curl(A1), W1)
        else:
            raise DriftExceeded(
                f"curl(A) - W drift {drift:g} exceeds {state.drift_limit:g} "
                "(enable reproject or refine the step)"
            )
    new_bundle = FieldBundle(
        g,
        A1,
        W1,
        U=inverse_curl(W1),
        meta={k: v for k, v in b.meta.items() if k != "residuals"},
    )
    return dataclasses.replace(
        state, bundle=new_bundle, t=state.t + state.dt, curl_drift=drift
    )


# -- invariant tracking ---------------------------------------------------------

SERIES_COLUMNS = (
    "t",
    "helicity",
    "gv",
    "energy",
    "enstrophy",
    "integrability_residual",
    "curl_drift",
)


@dataclass(eq=False)
class InvariantSeries:
    rows: list

    def column(self, name: str) -> np.ndarray:
        i = SERIES_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows])

    def write_csv(self, path) -> None:
        """Fixed column order, 17 significant digits, deterministic bytes."""
        with open(path, "w", newline="") as fh:
            fh.write(",".join(SERIES_COLUMNS) + "\n")
            for row in self.rows:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _sample(state: EvolutionState, choice: EtaChoice) -> tuple:
    b = state.bundle.with_velocity()
    hel = helicity(b)
    res = integrability_residual(b)
    gv_val = gv_invariant(b, choice).value
    energy = 0.5 * integrate(magnitude2(b.U))
    enstrophy = integrate(magnitude2(b.W))
    return (state.t, hel, gv_val, energy, enstrophy, res, state.curl_drift)


def track_invariants(
    state: EvolutionState,
    steps: int,
    record_every: int = 1,
    choice: EtaChoice | None = None,
) -> tuple[EvolutionState, InvariantSeries]:
    """Advance ``steps`` steps, sampling conserved quantities as a series."""
    if choice is None:
        choice = EtaChoice.canonical()
    rows = [_sample(state, choice)]
    for i in range(steps):
        state = step(state)
        if (i + 1) % record_every == 0 or i == steps - 1:
            rows.append(_sample(state, choice))
    return state, InvariantSeries(rows)


# -- local conservation law ------------------------------------------------------


def conservation_residual(
    state: EvolutionState,
    *,
    eps: float | None = None,
    margin: float | None = None,
) -> tuple[ScalarField, ScalarField]:
    """Residual of the transported-density law, and the flux coefficient k.

    With the velocity construction H = (W x U)/(U.A), the density
    c = H . curl(H) obeys (d/dt + U.grad) c = div(k W), where
    k = H^2 + (U.A)^{-1} H . grad(Pi). The time derivative is formed by
    centred differences of the smooth numerator/denominator fields of c on
    states stepped by +-dt, so the residual converges at second order in
    dt toward the spatial-discretization floor.

    The returned fields are zeroed outside a margin mask: points must clear
    ``margin * eps`` relative denominator at all three time levels.
    """
    if eps is None:
        eps = config.DEFAULTS["eta"]["default_eps"]
    if margin is None:
        margin = _DYN["conservation_mask_margin"]
    g = state.bundle.grid
    b0 = state.bundle.with_velocity()
    fwd = step(dataclasses.replace(state, bundle=b0)).bundle
    bwd = step(dataclasses.replace(state, bundle=b0, dt=-state.dt)).bundle

    def parts(b: FieldBundle):
        b = b.with_velocity()
        G = cross(b.W, b.U)
        q = dot(b.U, b.A).data
        N = dot(G, curl(G)).data
        m = np.abs(q) > margin * eps * float(np.max(np.abs(q)))
        return G, q, N, m

    G0, q0, N0, m0 = parts(b0)
    _, qp, Np, mp = parts(fwd)
    _, qm, Nm, mm = parts(bwd)
    mask = m0 & mp & mm
    dt = state.dt
    Ndot = (Np - Nm) / (2.0 * dt)
    qdot = (qp - qm) / (2.0 * dt)
    q_safe = np.where(mask, q0, 1.0)
    pi = bernoulli_head(b0)
    M = ScalarField(g, np.sum(G0.data**2, axis=0) + dot(G0, grad(pi)).data)
    U = b0.U.data
    W = b0.W.data
    gradN = grad(ScalarField(g, N0))
    gradq = grad(ScalarField(g, q0))
    gradM = grad(M)
    u_dot_gradN = np.einsum("i...,i...->...", U, gradN.data)
    u_dot_gradq = np.einsum("i...,i...->...", U, gradq.data)
    w_dot_gradM = np.einsum("i...,i...->...", W, gradM.data)
    w_dot_gradq = np.einsum("i...,i...->...", W, gradq.data)
    dct = Ndot / q_safe**2 - 2.0 * N0 * qdot / q_safe**3
    adv = u_dot_gradN / q_safe**2 - 2.0 * N0 * u_dot_gradq / q_safe**3
    divkw = w_dot_gradM / q_safe**2 - 2.0 * M.data * w_dot_gradq / q_safe**3
    residual = np.where(mask, dct + adv - divkw, 0.0)
    k_field = np.where(mask, M.data / q_safe**2, 0.0)
    return ScalarField(g, residual), ScalarField(g, k_field)
