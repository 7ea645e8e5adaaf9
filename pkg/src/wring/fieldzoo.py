"""Analytic generators of potential/vorticity pairs with known properties.

Every generator returns a FieldBundle: a consistent triple of the potential
dual A (so the potential 1-form is A's metric dual), the vorticity W with
curl A = W, an optional velocity U, and provenance metadata recording the
family, its parameters, and any analytic claims (integrability, expected
helicity, expected invariant values) that downstream analysis can check.

Families:

* ``gen_clebsch``    A = f grad(g): integrable by construction, W = grad(f) x grad(g).
* ``gen_morse``      Clebsch preset whose potential vanishes at the critical
                     points of a triply periodic g (isolated vorticity zeros).
* ``gen_kupka_tube`` columnar vortex whose potential vanishes on the axis
                     while the vorticity does not (a distinguished closed
                     vortex line).
* ``gen_beltrami_abc`` the ABC eigenfield of curl: NOT integrable, nonzero
                     helicity; used as the negative control.
* ``gen_linked_rings`` two solenoidal vortex tubes with declared fluxes and
                     zero internal twist; helicity target from the linking
                     number.

Volume-preserving maps are built from shear primitives; they are periodic,
unit-Jacobian, closed under composition, and are applied to sampled fields
through exact per-slice Fourier phase shifts.
"""

from __future__ import annotations

import ast
import dataclasses
from dataclasses import dataclass

import numpy as np

from . import config, linkref, wrg1
from .errors import (
    ConsistencyLoss,
    MapNotInvertible,
    NonPeriodic,
    PreconditionError,
    SupportTooLarge,
    TubesOverlap,
    ZeroF,
)
from .fieldcore import (
    Grid3,
    ScalarField,
    VectorField,
    cross,
    curl,
    div,
    dot,
    grad,
    integrate,
    inverse_curl,
    magnitude2,
    spectral_tail_fraction,
)

_TOL = config.TOL


# -- bundles -----------------------------------------------------------------


@dataclass(eq=False)
class FieldBundle:
    """Consistent (potential dual A, vorticity W, velocity U) triple.

    ``meta`` carries family name, creation parameters, claims and measured
    generation residuals; analysis code treats the claims as oracles.
    """

    grid: Grid3
    A: VectorField
    W: VectorField
    U: VectorField | None = None
    meta: dict = dataclasses.field(default_factory=dict)

    def with_velocity(self, **inverse_curl_kwargs) -> "FieldBundle":
        """Return a bundle whose U is filled in (zero-mean inverse curl).

        Keyword arguments (mean_tol, div_tol) pass through to the solve;
        coarse-grid studies of transformed bundles need looser gates.
        """
        if self.U is not None:
            return self
        return dataclasses.replace(self, U=inverse_curl(self.W, **inverse_curl_kwargs))

    def claims(self) -> dict:
        return self.meta.get("claims", {})

    def verify(self) -> dict:
        """Measure the bundle invariants; returns a dict of residuals."""
        w_scale = max(self.W.maxabs(), _TOL["underflow"])
        cons = _rel_l2(curl(self.A), self.W)
        div_res = div(self.W).maxabs() * min(self.grid.spacing) / w_scale
        mean_res = max(abs(m) for m in self.W.component_means()) / w_scale
        out = {
            "curl_consistency": cons,
            "div_w": div_res,
            "mean_w": mean_res,
        }
        if self.claims().get("integrable"):
            a_scale = max(self.A.maxabs(), _TOL["underflow"])
            out["integrability"] = (
                float(np.max(np.abs(dot(self.A, self.W).data))) / (a_scale * w_scale)
            )
        return out

    def save(self, path) -> None:
        fields = {"A": self.A, "W": self.W}
        if self.U is not None:
            fields["U"] = self.U
        wrg1.write_fields(path, self.grid, fields, meta=_json_safe(self.meta))

    @classmethod
    def load(cls, path) -> "FieldBundle":
        grid, fields, meta = wrg1.read_fields(path)
        try:
            A, W = fields["A"], fields["W"]
        except KeyError as exc:
            raise PreconditionError(f"{path}: bundle file lacks field {exc}") from exc
        return cls(grid, A, W, fields.get("U"), meta)


def _rel_l2(a: VectorField, b: VectorField) -> float:
    num = integrate(magnitude2(VectorField(a.grid, a.data - b.data)))
    den = integrate(magnitude2(b))
    if den <= 0.0:
        return float(np.sqrt(num))
    return float(np.sqrt(num / den))


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _snap_zero_mean(v: VectorField, *, tol: float = 1e-3) -> None:
    """Remove roundoff-level component means in place.

    Generators produce analytically mean-free vorticity; a mean beyond
    ``tol`` relative to the field scale signals bad (non-periodic) input.
    """
    scale = max(v.maxabs(), _TOL["underflow"])
    for i, m in enumerate(v.component_means()):
        if abs(m) > tol * scale:
            raise NonPeriodic(
                f"component {i} mean {m:g} too large for a periodic construction"
            )
        v.data[i] -= m


# -- scalar specs ------------------------------------------------------------

_ALLOWED_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "tanh": np.tanh,
}

_ALLOWED_NODES = (
    ast.Expression,
    ast.BinOp,
    ast.UnaryOp,
    ast.Call,
    ast.Name,
    ast.Load,
    ast.Constant,
    ast.Add,
    ast.Sub,
    ast.Mult,
    ast.Div,
    ast.Pow,
    ast.USub,
    ast.UAdd,
)


def eval_scalar_expr(grid: Grid3, expr: str) -> ScalarField:
    """Evaluate a restricted arithmetic expression of x, y, z on the mesh.

    Allowed: the coordinates x, y, z, box lengths Lx, Ly, Lz, pi, numeric
    literals, + - * / ** and the functions sin cos tan exp sqrt abs tanh.
    """
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"bad scalar expression {expr!r}: {exc}") from exc
    names = {"x", "y", "z", "pi", "Lx", "Ly", "Lz"} | set(_ALLOWED_FUNCS)
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ValueError(
                f"bad scalar expression {expr!r}: {type(node).__name__} not allowed"
            )
        if isinstance(node, ast.Name) and node.id not in names:
            raise ValueError(f"bad scalar expression {expr!r}: unknown name {node.id!r}")
        if isinstance(node, ast.Call) and (
            not isinstance(node.func, ast.Name) or node.func.id not in _ALLOWED_FUNCS
        ):
            raise ValueError(f"bad scalar expression {expr!r}: bad function call")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ValueError(f"bad scalar expression {expr!r}: non-numeric constant")
    x, y, z = grid.mesh()
    ns = dict(_ALLOWED_FUNCS)
    ns.update(
        x=x, y=y, z=z, pi=np.pi,
        Lx=grid.box[0], Ly=grid.box[1], Lz=grid.box[2],
    )
    values = eval(compile(tree, "<scalar expr>", "eval"), {"__builtins__": {}}, ns)
    return ScalarField(grid, np.broadcast_to(np.asarray(values, float), grid.shape).copy())


def _as_scalar(grid: Grid3, spec) -> ScalarField:
    if isinstance(spec, ScalarField):
        return spec
    if isinstance(spec, str):
        return eval_scalar_expr(grid, spec)
    if callable(spec):
        return ScalarField.sample(grid, spec)
    raise TypeError(f"cannot interpret scalar spec {spec!r}")


# -- generators --------------------------------------------------------------

CLEBSCH_F = "2 + sin(2*pi*x/Lx)*cos(2*pi*y/Ly)"
MORSE_F = "2 + sin(2*pi*x/Lx)"
MORSE_G = "cos(2*pi*x/Lx) + cos(2*pi*y/Ly) + cos(2*pi*z/Lz)"


def random_trig_scalar(kmax: int, nmodes: int, seed: int, *, offset: float = 2.0, amp: float = 0.9):
    """Deterministic trigonometric polynomial, independent of any grid.

    Returns a callable f(x, y, z) = offset + amp * sum(a_i cos(k_i . x + p_i))
    normalized so the oscillating part stays within [-amp, amp]; with
    amp < offset the result is nowhere zero. Useful as a rich-spectrum
    multiplier whose products genuinely exercise a grid's resolution.
    """
    rng = np.random.default_rng(seed)
    modes = []
    while len(modes) < nmodes:
        k = rng.integers(-kmax, kmax + 1, size=3)
        if not np.any(k):
            continue
        modes.append((k.astype(float), rng.uniform(0.5, 1.0), rng.uniform(0.0, 2.0 * np.pi)))
    total = sum(a for _, a, _ in modes)

    def f(x, y, z):
        acc = 0.0
        for k, a, ph in modes:
            acc = acc + a * np.cos(k[0] * x + k[1] * y + k[2] * z + ph)
        return offset + amp * acc / total

    return f


def gen_clebsch(
    grid: Grid3,
    f=CLEBSCH_F,
    g=None,
    g_linear: tuple[float, float, float] | None = None,
    *,
    name: str = "clebsch",
) -> FieldBundle:
    """Potential A = f grad(g), vorticity W = grad(f) x grad(g).

    ``f`` must be a nowhere-zero periodic scalar. ``g`` may combine a
    periodic part with a linear part ``g_linear . x`` (the linear part is
    not itself periodic but its gradient is, so A stays periodic). With no
    arguments this builds the default family with g = z.

    The construction is integrable pointwise: A.W = f grad(g).(grad(f) x
    grad(g)) vanishes as a triple product with a repeated factor.
    """
    if g is None and g_linear is None:
        g_linear = (0.0, 0.0, 1.0)
    fs = _as_scalar(grid, f)
    f_scale = fs.maxabs()
    if float(np.min(np.abs(fs.data))) < _TOL["zero_f_rel"] * max(f_scale, 1e-300):
        raise ZeroF("f passes too close to zero; the potential would degenerate")
    dg = VectorField.zeros(grid)
    if g is not None:
        dg = grad(_as_scalar(grid, g))
    if g_linear is not None:
        for i, c in enumerate(g_linear):
            dg.data[i] += float(c)
    df = grad(fs)
    A = VectorField(grid, fs.data[None, :, :, :] * dg.data)
    W = cross(df, dg)
    if spectral_tail_fraction(A) > _TOL["spectral_tail_fraction"]:
        raise NonPeriodic("potential has O(1) energy at the grid Nyquist scale")
    _snap_zero_mean(W)
    bundle = FieldBundle(
        grid,
        A,
        W,
        meta={
            "family": name,
            "params": {
                "f": f if isinstance(f, str) else "<callable>",
                "g": g if (g is None or isinstance(g, str)) else "<callable>",
                "g_linear": list(g_linear) if g_linear is not None else None,
            },
            "claims": {
                "integrable": True,
                "first_integral": True,
                "gv": 0.0,
                "helicity": 0.0,
            },
        },
    )
    bundle.meta["residuals"] = bundle.verify()
    return bundle


def gen_morse(grid: Grid3) -> FieldBundle:
    """Clebsch bundle whose potential has isolated zeros.

    The level function has nondegenerate critical points (eight per box),
    where grad(g) and hence A and W vanish; f stays positive there.
    """
    return gen_clebsch(grid, f=MORSE_F, g=MORSE_G, g_linear=None, name="morse")


def default_kupka_profile(r0: float, power: int = 8):
    """C^(power-1) polynomial bump chi(r) = (1 - (r/r0)^2)^power, chi(0) = 1.

    Returns (chi, dchi) callables vanishing identically for r >= r0.
    """

    def chi(r):
        u2 = np.clip((np.asarray(r) / r0) ** 2, 0.0, 1.0)
        return (1.0 - u2) ** power

    def dchi(r):
        r = np.asarray(r)
        u2 = np.clip((r / r0) ** 2, 0.0, 1.0)
        return -2.0 * power * (r / r0**2) * (1.0 - u2) ** (power - 1)

    return chi, dchi


def gen_kupka_tube(
    grid: Grid3,
    r0: float | None = None,
    *,
    power: int | None = None,
    chi=None,
    dchi=None,
    center: tuple[float, float] | None = None,
) -> FieldBundle:
    """Columnar vortex with a potential zero line along its axis.

    A = (-y chi(r), x chi(r), 0) around the box centre (horizontal,
    azimuthal); W = (2 chi + r chi') z_hat. On the axis A = 0 while
    W = 2 chi(0) z_hat is nonzero, so the axis is a distinguished closed
    vortex line. A.W = 0 identically (A horizontal, W vertical), and the
    tube carries zero net flux so it embeds in the torus.
    """
    Lx, Ly, _ = grid.box
    if r0 is None:
        r0 = config.DEFAULTS["kupka"]["r0_box_fraction"] * min(Lx, Ly)
    if not (0.0 < r0 < 0.5 * min(Lx, Ly)):
        raise SupportTooLarge(
            f"profile radius {r0:g} does not fit inside half the box {min(Lx, Ly) / 2:g}"
        )
    if power is None:
        power = config.DEFAULTS["kupka"]["profile_power"]
    if chi is None or dchi is None:
        if chi is not None or dchi is not None:
            raise ValueError("custom profiles need both chi and dchi")
        chi, dchi = default_kupka_profile(r0, power)
    if not chi(0.0) > 0.0:
        raise PreconditionError("profile must satisfy chi(0) > 0")
    cx, cy = center if center is not None else (0.5 * Lx, 0.5 * Ly)
    x, y, _ = grid.mesh()
    dx = x - cx
    dx -= Lx * np.round(dx / Lx)
    dy = y - cy
    dy -= Ly * np.round(dy / Ly)
    r = np.sqrt(dx**2 + dy**2)
    c = chi(r)
    A = VectorField.from_components(grid, -dy * c, dx * c, 0.0)
    wz = 2.0 * c + r * dchi(r)
    W = VectorField.from_components(grid, 0.0, 0.0, wz)
    _snap_zero_mean(W)
    bundle = FieldBundle(
        grid,
        A,
        W,
        meta={
            "family": "kupka",
            "params": {"r0": float(r0), "power": int(power), "center": [cx, cy]},
            "claims": {
                "integrable": True,
                "gv": 0.0,
                "gv_eps_independent": True,
                "helicity": 0.0,
                "zero_line": {"axis": "z", "through": [cx, cy]},
            },
        },
    )
    bundle.meta["residuals"] = bundle.verify()
    return bundle


def gen_beltrami_abc(grid: Grid3, a: float = 1.0, b: float = 1.0, c: float = 1.0) -> FieldBundle:
    """ABC curl-eigenfield: W = k U with k the fundamental wavenumber.

    The natural potential is A = U itself (curl U = k U = W), so
    A.W = k |U|^2 is nonzero on a set of full measure: the bundle is not
    integrable and the analysis refuses its invariant. Helicity is the
    closed form k (a^2 + b^2 + c^2) V.
    """
    Lx, Ly, Lz = grid.box
    if not (abs(Lx - Ly) < 1e-12 * Lx and abs(Lx - Lz) < 1e-12 * Lx):
        raise PreconditionError("ABC field needs a cubic box")
    kappa = 2.0 * np.pi / Lx
    x, y, z = grid.mesh()
    U = VectorField.from_components(
        grid,
        a * np.sin(kappa * z) + c * np.cos(kappa * y),
        b * np.sin(kappa * x) + a * np.cos(kappa * z),
        c * np.sin(kappa * y) + b * np.cos(kappa * x),
    )
    W = VectorField(grid, kappa * U.data)
    helicity = kappa * (a**2 + b**2 + c**2) * grid.volume
    bundle = FieldBundle(
        grid,
        U.copy(),
        W,
        U=U,
        meta={
            "family": "beltrami",
            "params": {"a": a, "b": b, "c": c},
            "claims": {
                "integrable": False,
                "helicity": float(helicity),
                "beltrami_eigenvalue": float(kappa),
            },
        },
    )
    bundle.meta["residuals"] = bundle.verify()
    return bundle


# -- vortex rings ------------------------------------------------------------


@dataclass(frozen=True)
class Ring:
    """A round circle with an orientation: centre, radius and unit normal."""

    center: tuple[float, float, float]
    radius: float
    normal: tuple[float, float, float]

    def frame(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = np.asarray(self.normal, float)
        n = n / np.linalg.norm(n)
        trial = np.array([1.0, 0.0, 0.0])
        if abs(np.dot(trial, n)) > 0.9:
            trial = np.array([0.0, 1.0, 0.0])
        e1 = trial - np.dot(trial, n) * n
        e1 = e1 / np.linalg.norm(e1)
        e2 = np.cross(n, e1)
        return e1, e2, n

    def points(self, samples: int = 256) -> np.ndarray:
        """Sampled closed loop, first point not repeated."""
        e1, e2, n = self.frame()
        t = 2.0 * np.pi * np.arange(samples) / samples
        c = np.asarray(self.center, float)
        return (
            c[None, :]
            + self.radius * np.cos(t)[:, None] * e1[None, :]
            + self.radius * np.sin(t)[:, None] * e2[None, :]
        )


def _tube_vorticity(grid: Grid3, ring: Ring, flux: float, core: float, power: int) -> np.ndarray:
    """Sampled solenoidal tube field: flux-normalized profile along the centreline."""
    x, y, z = grid.mesh()
    e1, e2, n = ring.frame()
    cx, cy, cz = ring.center
    dx = x - cx
    dy = y - cy
    dz = z - cz
    for d, L in zip((dx, dy, dz), grid.box):
        d -= L * np.round(d / L)
    zeta = dx * n[0] + dy * n[1] + dz * n[2]
    px = dx - zeta * n[0]
    py = dy - zeta * n[1]
    pz = dz - zeta * n[2]
    r_pl = np.sqrt(px**2 + py**2 + pz**2)
    s2 = (r_pl - ring.radius) ** 2 + zeta**2
    u2 = np.clip(s2 / core**2, 0.0, 1.0)
    prof = flux * (power + 1) / (np.pi * core**2) * (1.0 - u2) ** power
    safe = np.where(r_pl > 1e-12, r_pl, 1.0)
    tx = (n[1] * pz - n[2] * py) / safe
    ty = (n[2] * px - n[0] * pz) / safe
    tz = (n[0] * py - n[1] * px) / safe
    near_axis = r_pl <= 1e-12
    out = np.stack((prof * tx, prof * ty, prof * tz))
    if np.any(near_axis):
        out[:, near_axis] = 0.0
    return out


def gen_linked_rings(
    grid: Grid3,
    ring1: Ring,
    ring2: Ring,
    core_radius: float | None = None,
    fluxes: tuple[float, float] = (1.0, 1.0),
) -> FieldBundle:
    """Two disjoint vortex tubes; vorticity along the centrelines, zero twist.

    The vortex lines inside each tube are parallel circles (no internal
    linking), so the analytic helicity target is 2 Phi1 Phi2 Lk(1,2), with
    the linking number measured from the centrelines. A is the zero-mean
    inverse curl of W; no integrability is claimed.
    """
    if core_radius is None:
        core_radius = config.DEFAULTS["rings"]["default_core_radius"]
    power = config.DEFAULTS["rings"]["profile_power"]
    half = 0.5 * min(grid.box)
    for ring in (ring1, ring2):
        if ring.radius + core_radius >= half:
            raise SupportTooLarge(
                f"ring of radius {ring.radius:g} plus core {core_radius:g} "
                f"does not fit in half the box {half:g}"
            )
    p1 = ring1.points(512)
    p2 = ring2.points(512)
    dmin = np.min(np.linalg.norm(p1[:, None, :] - p2[None, :, :], axis=-1))
    if dmin <= 2.0 * core_radius:
        raise TubesOverlap(
            f"centreline separation {dmin:g} <= two core radii {2 * core_radius:g}"
        )
    w = _tube_vorticity(grid, ring1, fluxes[0], core_radius, power)
    w += _tube_vorticity(grid, ring2, fluxes[1], core_radius, power)
    W = VectorField(grid, w)
    _snap_zero_mean(W, tol=0.05)
    # exact solenoidal projection: the sampled profile is only divergence
    # free to its smoothness, the projected field is so to roundoff. The
    # Nyquist planes are dropped so curl(inverse_curl(W)) = W holds exactly.
    g = grid
    specs = [g.non_nyquist_mask * g.rfft(c) for c in W.data]
    kdotw = sum(ik * s for ik, s in zip(g.ik, specs))
    W = VectorField(
        g, np.stack([g.irfft(s + ik * kdotw * g.inv_k2) for ik, s in zip(g.ik, specs)])
    )
    _snap_zero_mean(W, tol=0.05)
    A = inverse_curl(W)
    lk_raw = linkref.gauss_linking(p1, p2)
    lk = int(np.rint(lk_raw))
    bundle = FieldBundle(
        grid,
        A,
        W,
        U=A.copy(),
        meta={
            "family": "rings",
            "params": {
                "ring1": dataclasses.asdict(ring1),
                "ring2": dataclasses.asdict(ring2),
                "core_radius": float(core_radius),
                "fluxes": list(map(float, fluxes)),
            },
            "claims": {
                "integrable": False,
                "helicity": float(2.0 * fluxes[0] * fluxes[1] * lk),
                "linking_number": lk,
                "linking_quadrature": float(lk_raw),
            },
        },
    )
    bundle.meta["residuals"] = bundle.verify()
    return bundle


def hopf_rings(
    grid: Grid3,
    fluxes: tuple[float, float] = (1.0, 1.0),
    radius: float = 1.0,
    core_radius: float = 0.3,
) -> FieldBundle:
    """Pair of singly linked rings centred in the box."""
    cx, cy, cz = (L / 2 for L in grid.box)
    ring1 = Ring((cx, cy, cz), radius, (0.0, 0.0, 1.0))
    ring2 = Ring((cx + radius, cy, cz), radius, (0.0, 1.0, 0.0))
    return gen_linked_rings(grid, ring1, ring2, core_radius, fluxes)


def unlinked_rings(
    grid: Grid3,
    fluxes: tuple[float, float] = (1.0, 1.0),
    radius: float = 1.0,
    core_radius: float = 0.3,
    separation: float = 2.2,
) -> FieldBundle:
    """Coaxial parallel rings, linking number zero."""
    cx, cy, cz = (L / 2 for L in grid.box)
    ring1 = Ring((cx, cy, cz - separation / 2), radius, (0.0, 0.0, 1.0))
    ring2 = Ring((cx, cy, cz + separation / 2), radius, (0.0, 0.0, 1.0))
    return gen_linked_rings(grid, ring1, ring2, core_radius, fluxes)


# -- volume-preserving maps --------------------------------------------------

_AXIS_NAMES = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class Shear:
    """x_a -> x_a + amplitude * sin(2 pi wavenumber x_b / L_b); unit Jacobian."""

    axis: int
    shear_axis: int
    amplitude: float
    wavenumber: int = 1

    def __post_init__(self):
        if self.axis not in (0, 1, 2) or self.shear_axis not in (0, 1, 2):
            raise ValueError("axes must be 0, 1 or 2")
        if self.axis == self.shear_axis:
            raise ValueError("shear must couple two distinct axes")
        if self.wavenumber < 1 or int(self.wavenumber) != self.wavenumber:
            raise ValueError("wavenumber must be a positive integer")

    @classmethod
    def from_names(cls, axis: str, shear_axis: str, amplitude: float, wavenumber: int = 1):
        return cls(_AXIS_NAMES[axis], _AXIS_NAMES[shear_axis], amplitude, wavenumber)

    def displacement(self, coords_b: np.ndarray, box_b: float) -> np.ndarray:
        return self.amplitude * np.sin(2.0 * np.pi * self.wavenumber * coords_b / box_b)

    def slope(self, coords_b: np.ndarray, box_b: float) -> np.ndarray:
        k = 2.0 * np.pi * self.wavenumber / box_b
        return self.amplitude * k * np.cos(k * coords_b)


@dataclass(frozen=True)
class DiffeoMap:
    """Ordered composition of shear primitives (first entry applied first)."""

    primitives: tuple[Shear, ...]

    def __post_init__(self):
        object.__setattr__(self, "primitives", tuple(self.primitives))

    def inverse(self) -> "DiffeoMap":
        return DiffeoMap(
            tuple(
                Shear(p.axis, p.shear_axis, -p.amplitude, p.wavenumber)
                for p in reversed(self.primitives)
            )
        )

    def apply_points(self, pts: np.ndarray, box) -> np.ndarray:
        """Map an (m, 3) array of points (useful for testing the geometry)."""
        out = np.array(pts, float, copy=True)
        for p in self.primitives:
            out[:, p.axis] += p.displacement(out[:, p.shear_axis], box[p.shear_axis])
        return out


def _shift_along_axis(grid: Grid3, data: np.ndarray, axis: int, delta: np.ndarray, delta_axis: int) -> np.ndarray:
    """Evaluate data at points displaced by -delta along one axis.

    delta is a 1-D array indexed by the coordinate along ``delta_axis``;
    the shift is constant along ``axis`` for each transverse slice, so a
    Fourier phase shift evaluates the trigonometric interpolant exactly.
    """
    n = grid.n[axis]
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=grid.spacing[axis])
    shape_k = [1, 1, 1]
    shape_k[axis] = n
    shape_d = [1, 1, 1]
    shape_d[delta_axis] = grid.n[delta_axis]
    phase = np.exp(-1j * k.reshape(shape_k) * delta.reshape(shape_d))
    spec = np.fft.fft(data, axis=axis)
    return np.real(np.fft.ifft(spec * phase, axis=axis))


def apply_diffeo(
    bundle: FieldBundle,
    dmap: DiffeoMap,
    *,
    consistency_tol: float | None = None,
) -> FieldBundle:
    """Transform a bundle by a volume-preserving map.

    W is pushed forward as a vector field and A by the inverse-transpose
    Jacobian (the covector law), both sampled exactly on the grid through
    Fourier phase shifts; A.W is therefore preserved pointwise. The
    curl(A') - W' residual is re-measured and must stay below tolerance
    (resolution too coarse for the composed harmonics otherwise).
    """
    if consistency_tol is None:
        consistency_tol = _TOL["curl_consistency_rel"]
    g = bundle.grid
    for p in dmap.primitives:
        if not np.isfinite(p.amplitude) or abs(p.amplitude) >= 0.5 * min(g.box):
            raise MapNotInvertible(
                f"shear amplitude {p.amplitude!r} unreasonable for box {g.box}"
            )
    A = bundle.A.data.copy()
    W = bundle.W.data.copy()
    for p in dmap.primitives:
        if p.amplitude == 0.0:
            continue
        a, b = p.axis, p.shear_axis
        coords_b = g.axes[b]
        delta = p.displacement(coords_b, g.box[b])
        slope = p.slope(coords_b, g.box[b])
        shape_d = [1, 1, 1]
        shape_d[b] = g.n[b]
        slope = slope.reshape(shape_d)
        A = np.stack([_shift_along_axis(g, c, a, delta, b) for c in A])
        W = np.stack([_shift_along_axis(g, c, a, delta, b) for c in W])
        # covector law: component along the shear coordinate picks up -g' A_a
        A[b] = A[b] - slope * A[a]
        # vector law: component along the sheared axis picks up +g' W_b
        W[a] = W[a] + slope * W[b]
    out = FieldBundle(
        g,
        VectorField(g, A),
        VectorField(g, W),
        U=None,
        meta={
            **{k: v for k, v in bundle.meta.items() if k != "residuals"},
            "diffeo": bundle.meta.get("diffeo", [])
            + [dataclasses.asdict(p) for p in dmap.primitives],
        },
    )
    residuals = out.verify()
    out.meta["residuals"] = residuals
    if residuals["curl_consistency"] > consistency_tol:
        raise ConsistencyLoss(
            f"curl(A)-W residual {residuals['curl_consistency']:g} exceeds "
            f"{consistency_tol:g}; raise the resolution or lower the shear"
        )
    return out


# -- CLI-facing family dispatcher ---------------------------------------------


def make_family(grid: Grid3, family: str, params: dict | None = None) -> FieldBundle:
    """Build a named family from a JSON-style parameter dict."""
    p = dict(params or {})
    if family == "clebsch":
        return gen_clebsch(
            grid,
            f=p.get("f", CLEBSCH_F),
            g=p.get("g"),
            g_linear=tuple(p["g_linear"]) if "g_linear" in p else (
                None if "g" in p else (0.0, 0.0, 1.0)
            ),
        )
    if family == "morse":
        return gen_morse(grid)
    if family == "kupka":
        return gen_kupka_tube(
            grid,
            r0=p.get("r0"),
            power=p.get("power"),
        )
    if family == "beltrami":
        return gen_beltrami_abc(grid, p.get("a", 1.0), p.get("b", 1.0), p.get("c", 1.0))
    if family == "rings":
        if "ring1" in p or "ring2" in p:
            ring1 = Ring(**p["ring1"])
            ring2 = Ring(**p["ring2"])
            return gen_linked_rings(
                grid,
                ring1,
                ring2,
                p.get("core_radius"),
                tuple(p.get("fluxes", (1.0, 1.0))),
            )
        return hopf_rings(
            grid,
            fluxes=tuple(p.get("fluxes", (1.0, 1.0))),
            radius=p.get("radius", 1.0),
            core_radius=p.get("core_radius", 0.3),
        )
    if family == "unlinked-rings":
        return unlinked_rings(
            grid,
            fluxes=tuple(p.get("fluxes", (1.0, 1.0))),
            radius=p.get("radius", 1.0),
            core_radius=p.get("core_radius", 0.3),
        )
    raise ValueError(f"unknown family {family!r}")


FAMILIES = ("clebsch", "morse", "kupka", "beltrami", "rings", "unlinked-rings")
