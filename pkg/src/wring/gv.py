"""The invariant engine.

For an integrable bundle (A.W = 0) there is a dual field H with
A x H = W; the quantity of interest is the volume integral of
H . curl(H), together with the helicity integral of U . W. Two H
constructions are supported:

* Canonical: H = (W x A)/|A|^2, the unique solution orthogonal to A.
  Deterministic and needs no velocity solve.
* Velocity:  H = (W x U)/(U . A), whose density equals
  -(W x U) . dW/dt / (U . A)^2 once the vorticity tendency is known, and
  therefore localizes the obstruction to steady flow.

Both denominators may vanish on lower-dimensional sets (and do so on the
zero set of the potential), so H is only defined on a masked region where
the denominator exceeds a relative threshold eps. The integral is then an
excluded-tube quantity; for the supported families it is independent of
eps, which the test suite checks.

Numerical note: the density is never computed by differentiating the
masked (discontinuous, near-singular) H. Writing H = G/q with G smooth
(W x A or W x U) and q the scalar denominator, the identity
H . curl(H) = G . curl(G) / q^2 holds pointwise because the gradient-of-q
term is perpendicular to G. Spectral derivatives only ever see the smooth
G, and the division happens pointwise on the masked set, so the mask
introduces no Gibbs artefacts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import config
from .errors import (
    DegenerateField,
    DenominatorVanishesEverywhere,
    FluxObstruction,
)
from .fieldcore import (
    ScalarField,
    VectorField,
    cross,
    curl,
    dot,
    grad,
    integrate,
    magnitude2,
)
from .fieldzoo import FieldBundle

_TOL = config.TOL
_ETA = config.DEFAULTS["eta"]


@dataclass(frozen=True)
class EtaChoice:
    """Which dual-field construction to use, and its exclusion threshold.

    ``eps`` is relative: points where the denominator magnitude (|A| for
    the canonical choice, |U.A| for the velocity choice) falls below eps
    times its maximum are excluded from the mask.
    """

    variant: str
    eps: float = _ETA["default_eps"]

    def __post_init__(self):
        if self.variant not in ("canonical", "velocity"):
            raise ValueError(f"unknown eta variant {self.variant!r}")
        if not (0.0 <= self.eps < 1.0):
            raise ValueError("eps must lie in [0, 1)")

    @classmethod
    def canonical(cls, eps: float = _ETA["default_eps"]) -> "EtaChoice":
        return cls("canonical", eps)

    @classmethod
    def velocity(cls, eps: float = _ETA["default_eps"]) -> "EtaChoice":
        return cls("velocity", eps)


@dataclass(eq=False)
class EtaSolution:
    """Masked dual field: A x H = W holds where mask = 1."""

    H: VectorField
    mask: ScalarField
    covered_fraction: float
    uncovered_vorticity_fraction: float
    choice: EtaChoice


@dataclass(eq=False)
class GvResult:
    value: float
    density: ScalarField
    mask: ScalarField
    excluded_volume_fraction: float
    choice: EtaChoice
    richardson_value: float | None = None


def integrability_residual(bundle: FieldBundle) -> float:
    """max|A.W| / (max|A| max|W|); zero means the potential is integrable."""
    a_scale = bundle.A.maxnorm()
    w_scale = bundle.W.maxnorm()
    if a_scale < _TOL["underflow"] or w_scale < _TOL["underflow"]:
        raise DegenerateField("A or W magnitude below underflow threshold")
    return float(np.max(np.abs(dot(bundle.A, bundle.W).data))) / (a_scale * w_scale)


def flux_check(bundle: FieldBundle) -> tuple[float, float, float]:
    """Vorticity flux through the three fundamental 2-tori.

    For a divergence-free field the flux through each family of parallel
    slices is constant and equals the component mean times the transverse
    area. All three must vanish for helicity to be gauge invariant.
    """
    Lx, Ly, Lz = bundle.grid.box
    mx, my, mz = bundle.W.component_means()
    return (mx * Ly * Lz, my * Lx * Lz, mz * Lx * Ly)


def helicity(bundle: FieldBundle, *, flux_tol: float | None = None) -> float:
    """Volume integral of U . W with the zero-mean velocity gauge.

    Raises FluxObstruction if the vorticity carries net flux through a
    fundamental torus (the integral would depend on the potential gauge).
    """
    if flux_tol is None:
        flux_tol = _TOL["flux_rel"]
    fluxes = flux_check(bundle)
    Lx, Ly, Lz = bundle.grid.box
    scale = max(bundle.W.maxabs(), _TOL["underflow"]) * max(Ly * Lz, Lx * Lz, Lx * Ly)
    worst = max(abs(f) for f in fluxes)
    if worst > flux_tol * scale:
        raise FluxObstruction(
            f"fundamental-torus fluxes {fluxes} exceed {flux_tol:g} relative"
        )
    b = bundle.with_velocity()
    return integrate(dot(b.U, b.W))


def _eta_parts(bundle: FieldBundle, choice: EtaChoice):
    """Smooth numerator G, signed denominator q, and the eps mask.

    The excluded set is allowed to contain vorticity: cutting a tube
    around the zero set of the potential is exactly how the invariant is
    defined for singular potentials. What is NOT allowed is a denominator
    that is small everywhere (the construction then never makes sense),
    which raises DenominatorVanishesEverywhere. The fraction of the
    significant-vorticity region left outside the mask is measured and
    reported so callers (notably the obstruction bound) can gate on it.
    """
    a_scale = bundle.A.maxnorm()
    w_scale = bundle.W.maxnorm()
    if a_scale < _TOL["underflow"]:
        raise DegenerateField("potential magnitude below underflow threshold")
    if choice.variant == "canonical":
        G = cross(bundle.W, bundle.A)
        q = magnitude2(bundle.A).data
        mag = np.sqrt(np.sum(bundle.A.data**2, axis=0))
        mask = mag > choice.eps * a_scale
    else:
        b = bundle.with_velocity()
        G = cross(b.W, b.U)
        q = dot(b.U, b.A).data
        mag = np.abs(q)
        u_scale = b.U.maxnorm()
        if float(mag.max()) < 1e-10 * u_scale * a_scale:
            raise DenominatorVanishesEverywhere(
                "U.A is at roundoff level everywhere; the velocity "
                "construction is unusable for this field"
            )
        mask = mag > choice.eps * float(mag.max())
    if w_scale > _TOL["underflow"]:
        wmag = np.sqrt(np.sum(bundle.W.data**2, axis=0))
        significant = wmag > _ETA["vorticity_floor_rel"] * w_scale
        n_sig = int(significant.sum())
        uncovered = float((significant & ~mask).sum()) / n_sig if n_sig else 0.0
    else:
        uncovered = 0.0
    return G, q, mask, uncovered


def solve_eta(bundle: FieldBundle, choice: EtaChoice) -> EtaSolution:
    """Dual field H with A x H = W on the masked region.

    H is zeroed outside the mask. The identity A x H = W holds wherever
    mask = 1 (pointwise algebra given A.W = 0) and is exercised in the
    test suite at 1e-8 relative.
    """
    G, q, mask, uncovered = _eta_parts(bundle, choice)
    q_safe = np.where(mask, q, 1.0)
    H = VectorField(bundle.grid, np.where(mask, G.data / q_safe, 0.0))
    return EtaSolution(
        H=H,
        mask=ScalarField(bundle.grid, mask.astype(np.float64)),
        covered_fraction=float(mask.mean()),
        uncovered_vorticity_fraction=uncovered,
        choice=choice,
    )


def gv_invariant(
    bundle: FieldBundle,
    choice: EtaChoice | None = None,
    *,
    richardson: bool = False,
) -> GvResult:
    """Masked integral of H . curl(H), with its density field.

    The density is formed as G . curl(G) / q^2 (see the module note), so
    the returned field is also meaningful pointwise: for the velocity
    choice it is the local obstruction to steady flow.

    With ``richardson=True`` a second evaluation at eps/2 is combined
    linearly to estimate the eps -> 0 limit (reported alongside, never in
    place of, the masked value).
    """
    if choice is None:
        choice = EtaChoice.canonical()
    G, q, mask, _ = _eta_parts(bundle, choice)
    curlG = curl(G)
    q_safe = np.where(mask, q, 1.0)
    dens = np.where(
        mask, np.einsum("i...,i...->...", G.data, curlG.data) / q_safe**2, 0.0
    )
    density = ScalarField(bundle.grid, dens)
    value = integrate(density)
    extrap = None
    if richardson and choice.eps > 0.0:
        half = gv_invariant(
            bundle,
            EtaChoice(choice.variant, 0.5 * choice.eps),
            richardson=False,
        )
        extrap = 2.0 * half.value - value
    return GvResult(
        value=value,
        density=density,
        mask=ScalarField(bundle.grid, mask.astype(np.float64)),
        excluded_volume_fraction=1.0 - float(mask.mean()),
        choice=choice,
        richardson_value=extrap,
    )


def gauge_shift(H: VectorField, bundle: FieldBundle, f: ScalarField) -> VectorField:
    """The dual-field gauge freedom: H -> H + f A."""
    return VectorField(H.grid, H.data + f.data[None, :, :, :] * bundle.A.data)


def gv_of_field(H: VectorField, mask: ScalarField | None = None) -> float:
    """Direct integral of H . curl(H) for an explicitly supplied field.

    Meant for gauge-shift experiments on bundles whose mask is the whole
    torus; H must be smooth wherever the mask is 1, since curl(H) is
    evaluated spectrally on H itself.
    """
    dens = dot(H, curl(H)).data
    if mask is not None:
        dens = dens * mask.data
    return float(dens.sum()) * H.grid.cell_volume


def helical_compression(bundle: FieldBundle, eps: float | None = None) -> ScalarField:
    """Compression-twist density of the leaf normal field, on the |A| mask.

    N = A/|A| is the unit normal to the surfaces the vorticity is tangent
    to; h = (N . grad) N points along the local compression of those
    surfaces, and h . curl(h) measures how that compression twists from
    leaf to leaf. h is a valid dual-field choice for curl(N) up to gauge,
    so this integrand is the same kind of quantity as the invariant
    density but in a different gauge; it is reported as a diagnostic only.

    Derivatives are taken of the smooth combinations (A . grad)A, |A|^2
    and (A . grad)|A|^2; divisions happen pointwise on the mask.
    """
    if eps is None:
        eps = _ETA["default_eps"]
    g = bundle.grid
    A = bundle.A
    a_scale = A.maxnorm()
    if a_scale < _TOL["underflow"]:
        raise DegenerateField("potential magnitude below underflow threshold")
    mag = np.sqrt(np.sum(A.data**2, axis=0))
    mask = mag > eps * a_scale
    Q = magnitude2(A)
    dA = [grad(ScalarField(g, A.data[i])) for i in range(3)]  # dA[i].data[j] = d_j A_i
    P = VectorField(
        g,
        np.stack([np.einsum("j...,j...->...", A.data, dA[i].data) for i in range(3)]),
    )
    gradQ = grad(Q)
    R = dot(A, gradQ)
    gradR = grad(R)
    curlP = curl(P)
    q = np.where(mask, Q.data, 1.0)
    r = R.data
    # h = P/Q - (R / 2Q^2) A
    h = P.data / q - (r / (2.0 * q**2)) * A.data
    # curl(P/Q) = curl(P)/Q - (gradQ x P)/Q^2
    curl_PQ = curlP.data / q - cross(gradQ, P).data / q**2
    # s = R/(2Q^2); curl(sA) = grad(s) x A + s W
    grad_s = gradR.data / (2.0 * q**2) - (r / q**3) * gradQ.data
    sxA = np.stack(
        (
            grad_s[1] * A.data[2] - grad_s[2] * A.data[1],
            grad_s[2] * A.data[0] - grad_s[0] * A.data[2],
            grad_s[0] * A.data[1] - grad_s[1] * A.data[0],
        )
    )
    curl_h = curl_PQ - sxA - (r / (2.0 * q**2)) * bundle.W.data
    dens = np.where(mask, np.einsum("i...,i...->...", h, curl_h), 0.0)
    return ScalarField(g, dens)


# -- the orchestrated report ---------------------------------------------------


@dataclass(eq=False)
class AnalysisReport:
    """Everything the analysis measured for one bundle, plus tolerances."""

    family: str | None
    grid_n: tuple[int, int, int]
    grid_box: tuple[float, float, float]
    eta_variant: str
    eta_eps: float
    integrability_residual: float
    integrable: bool
    helicity: float | None
    flux_residuals: tuple[float, float, float]
    gv: float | None
    gv_richardson: float | None
    gv_density: ScalarField | None
    excluded_volume_fraction: float | None
    claims: dict = field(default_factory=dict)
    deviations: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    bound: dict | None = None

    SCHEMA = "wring-report/1"

    def to_json_dict(self) -> dict:
        # gv_density is a full 3-D field; it travels as a WRG1 file, never
        # inside the JSON document
        return {
            "schema": self.SCHEMA,
            "family": self.family,
            "grid": {"n": list(self.grid_n), "box": list(self.grid_box)},
            "eta_choice": {"variant": self.eta_variant, "eps": self.eta_eps},
            "integrability_residual": self.integrability_residual,
            "integrable": self.integrable,
            "helicity": self.helicity,
            "flux_residuals": list(self.flux_residuals),
            "gv": self.gv,
            "gv_richardson": self.gv_richardson,
            "excluded_volume_fraction": self.excluded_volume_fraction,
            "claims": self.claims,
            "deviations": self.deviations,
            "tolerances": self.tolerances,
            "bound": self.bound,
        }


def analyze(
    bundle: FieldBundle,
    choice: EtaChoice | None = None,
    *,
    integrability_tol: float | None = None,
    richardson: bool = False,
) -> AnalysisReport:
    """Measure helicity and the invariant, checking claims along the way.

    The invariant is only reported when the integrability residual is
    below tolerance; otherwise the report flags the failure and leaves gv
    unset (it is undefined without an integrable potential). Helicity is
    reported either way, gated by the flux check.
    """
    if choice is None:
        choice = EtaChoice.canonical()
    if integrability_tol is None:
        integrability_tol = _TOL["integrability_rel"]
    bundle = bundle.with_velocity()
    residual = integrability_residual(bundle)
    fluxes = flux_check(bundle)
    hel = helicity(bundle)
    integrable = residual <= integrability_tol
    gv_val = None
    gv_rich = None
    gv_dens = None
    excluded = None
    if integrable:
        result = gv_invariant(bundle, choice, richardson=richardson)
        gv_val = result.value
        gv_rich = result.richardson_value
        gv_dens = result.density
        excluded = result.excluded_volume_fraction
    claims = bundle.claims()
    deviations: dict = {}
    if "helicity" in claims and claims["helicity"] is not None:
        deviations["helicity"] = hel - float(claims["helicity"])
    if gv_val is not None and claims.get("gv") is not None:
        deviations["gv"] = gv_val - float(claims["gv"])
    return AnalysisReport(
        family=bundle.meta.get("family"),
        grid_n=bundle.grid.n,
        grid_box=bundle.grid.box,
        eta_variant=choice.variant,
        eta_eps=choice.eps,
        integrability_residual=residual,
        integrable=integrable,
        helicity=hel,
        flux_residuals=fluxes,
        gv=gv_val,
        gv_richardson=gv_rich,
        gv_density=gv_dens,
        excluded_volume_fraction=excluded,
        claims=claims,
        deviations=deviations,
        tolerances={
            "integrability_rel": integrability_tol,
            "flux_rel": _TOL["flux_rel"],
            "eps": choice.eps,
        },
    )
