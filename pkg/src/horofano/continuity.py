"""Continuity method for the reduced real Monge-Ampere equation.

The equation is posed on the full space; the solver truncates to a box chosen
from the support-function slopes so the dropped tail mass of exp(-v) is below
1e-8 of the density volume, and extends the potential affinely beyond the box
with the extreme slopes of the gradient polytope (the discrete form of the
"support function plus constant" boundary condition; the constant is read off
the boundary values and reported).  The normalizing constant of the equation
is fixed so that the mass identity  integral exp(-w_t) = V  holds at the
continuous level for every t and every soliton parameter; the discrete solver
inherits it as a diagnostic.

The 1-D path is the supported one: damped Newton on a tridiagonal system,
with convexity and gradient confinement verified on converged states (the
line search gates on the merit, since transient tail dips at rounding scale
would otherwise block legitimate steps) and the translation gauge deflated
exactly at t = 1, where the continuous equation loses its position pinning.
The 2-D path follows the same scheme with the 9-point Hessian-determinant
stencil and is best-effort.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction as Q

import numpy as np

from . import kernels
from .errors import MathValidationError, SolverError
from .polytopes import Polytope
from .problem import HorosphericalProblem
from .rationals import vdot
from .soliton import weighted_mass


@dataclass(frozen=True)
class ContinuityOptions:
    grid: int = 2001
    box: float | None = None
    t0: float = 0.1
    tol: float = 1e-9
    max_newton: int = 60
    step0: float = 0.05
    max_step: float = 0.1
    min_step: float = 1e-4
    window: float = 0.8
    quad_rel_tol: float = 1e-12
    quad_order: int | None = None
    workers: int | None = None


# ---------------------------------------------------------------------------
# reference potential
# ---------------------------------------------------------------------------


class ReferencePotential:
    """Smooth strictly convex log-sum-exp over the vertices of the gradient
    polytope; stays within log(#vertices) of the support function and maps
    gradients into the open polytope."""

    def __init__(self, two_delta: Polytope):
        zero = tuple(Q(0) for _ in range(two_delta.dim))
        if not two_delta.contains(zero, strict=True):
            raise MathValidationError(
                "0 must be interior to the gradient polytope", condition="zero_interior"
            )
        self.polytope = two_delta
        self.vertices = np.array(
            [[float(c) for c in v] for v in two_delta.vertices], dtype=np.float64
        )
        self._check_grid()

    def value(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        z = points @ self.vertices.T
        zmax = z.max(axis=1)
        return zmax + np.log(np.sum(np.exp(z - zmax[:, None]), axis=1))

    def grad(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        z = points @ self.vertices.T
        z -= z.max(axis=1)[:, None]
        w = np.exp(z)
        w /= w.sum(axis=1)[:, None]
        return w @ self.vertices

    def support(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return (points @ self.vertices.T).max(axis=1)

    def _check_grid(self) -> None:
        r = self.vertices.shape[1]
        axes = [np.linspace(-5.0, 5.0, 9)] * r
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
        gap = self.value(pts) - self.support(pts)
        bound = math.log(len(self.vertices)) + 1e-9
        if not np.all((gap >= -1e-9) & (gap <= bound)):
            raise MathValidationError("reference potential drifted from the support function")
        grads = self.grad(pts)
        for normal, offset in self.polytope.facets:
            nf = np.array([float(c) for c in normal])
            # interiority is strict mathematically; far from the polytope the
            # softmax weights underflow and the gradient rounds onto a vertex
            if not np.all(grads @ nf <= float(offset) + 1e-12):
                raise MathValidationError("reference gradient left the gradient polytope")


def reference_potential(two_delta: Polytope) -> ReferencePotential:
    return ReferencePotential(two_delta)


def default_box(two_delta: Polytope, volume: float, xi_norm: float = 0.0) -> float:
    """Half-width making the exp(-support) tail mass below 1e-8 * volume,
    with a margin for the soliton tilt exp(-<grad, xi>) of the density."""
    r_in = min(
        float(off) / math.sqrt(sum(float(c) ** 2 for c in n)) for n, off in two_delta.facets
    )
    d0 = max(math.sqrt(sum(float(c) ** 2 for c in v)) for v in two_delta.vertices)
    target = 1e-8 * float(volume)
    return (math.log(2.0 * two_delta.dim / (r_in * target)) + 4.0 + xi_norm * d0) / r_in


# ---------------------------------------------------------------------------
# shared setup
# ---------------------------------------------------------------------------


@dataclass
class ContinuitySetup:
    hp: HorosphericalProblem
    xi: np.ndarray
    options: ContinuityOptions
    refpot: ReferencePotential
    box: float
    n: int
    h: float
    axis: np.ndarray
    u0: np.ndarray
    c_norm: float
    invc: float
    volume: float
    d0: float
    r_in: float
    bcoef: np.ndarray
    boff: np.ndarray
    qlo: float = 0.0
    qhi: float = 0.0
    conv_floor: float = 0.0
    term_floor: float = 0.0
    closed_l: bool = False
    closed_r: bool = False
    vconst: np.ndarray | None = None


def build_setup(hp: HorosphericalProblem, xi, options: ContinuityOptions) -> ContinuitySetup:
    r = hp.a1_dim
    if r not in (1, 2):
        raise MathValidationError("continuity solver supports r = 1 (and best-effort r = 2)")
    xi = np.asarray([float(v) for v in np.atleast_1d(xi)], dtype=np.float64)
    if xi.shape != (r,):
        raise MathValidationError("soliton parameter has wrong dimension")
    two_delta = hp.two_delta()
    refpot = reference_potential(two_delta)
    vol = float(hp.volume)
    box = options.box if options.box is not None else default_box(
        two_delta, vol, float(np.linalg.norm(xi))
    )
    n = int(options.grid)
    if n < 11:
        raise MathValidationError("grid too coarse")
    axis = np.linspace(-box, box, n)
    h = axis[1] - axis[0]
    # normalization fixed by the continuous mass identity: c = 2^r * V_xi / V
    if np.all(xi == 0.0):
        c_norm = float(2**r)
    else:
        c_norm = (
            2**r
            * weighted_mass(
                hp, xi, rel_tol=options.quad_rel_tol, order=options.quad_order, workers=options.workers
            )
            / vol
        )
    bcoef = np.array([[float(c) for c in f] for f in hp.density.forms]).reshape(
        len(hp.density.forms), r
    )
    boff = np.array([float(vdot(f, hp.kappa)) for f in hp.density.forms])
    d0 = max(
        math.sqrt(sum(float(c) ** 2 for c in v)) for v in two_delta.vertices
    )
    r_in = min(
        float(off) / math.sqrt(sum(float(c) ** 2 for c in n_)) for n_, off in two_delta.facets
    )
    setup = ContinuitySetup(
        hp=hp,
        xi=xi,
        options=options,
        refpot=refpot,
        box=box,
        n=n,
        h=float(h),
        axis=axis,
        u0=np.zeros(0),
        c_norm=c_norm,
        invc=1.0 / c_norm,
        volume=vol,
        d0=d0,
        r_in=r_in,
        bcoef=bcoef,
        boff=boff,
    )
    # admissibility floors above the curvature noise the Newton solves induce
    # on machine-affine tails (observed ~50x the pure representation noise)
    uscale = max(1.0, d0 * box)
    eps = np.finfo(float).eps
    setup.conv_floor = 4096.0 * eps * uscale / h**2
    setup.term_floor = 4096.0 * eps * uscale / h * float(
        max((abs(b) for row in bcoef for b in row), default=0.0)
    )
    if r == 1:
        setup.u0 = refpot.value(axis[:, None])
        lo_vert = min(v[0] for v in two_delta.vertices)
        hi_vert = max(v[0] for v in two_delta.vertices)
        setup.qlo = float(lo_vert)
        setup.qhi = float(hi_vert)
        # the clamped boundary slope may sit on a wall of the density (exact
        # rational test); the node equation degenerates there and is replaced
        # by the affine-extension closure
        for form in hp.density.forms:
            if vdot(form, hp.kappa) - vdot(form, (lo_vert,)) / 2 == 0:
                setup.closed_l = True
            if vdot(form, hp.kappa) - vdot(form, (hi_vert,)) / 2 == 0:
                setup.closed_r = True
    else:
        mesh = np.meshgrid(axis, axis, indexing="ij")
        pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
        setup.u0 = refpot.value(pts).reshape(n, n)
        setup.vconst = _extension_constants_2d(refpot, axis, h)
    return setup


# ---------------------------------------------------------------------------
# states and traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContinuityState:
    t: float
    u: np.ndarray
    w: np.ndarray
    m_t: float
    x_t: tuple[float, ...]
    mass: float
    residual_norm: float
    sup_psi: float
    boundary_offset: float
    grad_margin: float
    centering: float
    newton_iterations: int
    gauge_defect: float = 0.0
    convexity_deficit: float = 0.0


@dataclass(frozen=True)
class StateSummary:
    t: float
    m_t: float
    x_t: tuple[float, ...]
    mass: float
    residual: float
    sup_psi: float
    step: float
    grad_margin: float
    centering: float
    gauge_defect: float = 0.0


@dataclass
class ContinuityTrace:
    states: list[StateSummary] = field(default_factory=list)
    termination: str = "incomplete"
    final_step: float = 0.0
    diverged_at: float | None = None
    volume: float = 0.0
    d0: float = 0.0
    box: float = 0.0
    grid: int = 0
    xi: tuple[float, ...] = ()
    final_state: ContinuityState | None = None

    @property
    def reached_t1(self) -> bool:
        return self.termination == "reached_t1"


# ---------------------------------------------------------------------------
# 1-D solver
# ---------------------------------------------------------------------------


def _rebalance(setup: ContinuitySetup, t: float, u: np.ndarray) -> np.ndarray:
    """Shift the potential so the grid mass identity holds exactly.

    The truncated system has one soft nearly-affine mode (the additive
    constant of the potential, pinned only through exp(-w)); for a uniform
    shift the grid mass scales by exp(-t a), so the equilibrating shift has
    the closed form a = log(mass/V)/t.  Removing it before Newton keeps the
    steps short and well inside the admissible region.
    """
    w = t * u + (1.0 - t) * setup.u0
    wmin = float(np.min(w))
    cell = setup.h ** setup.hp.a1_dim
    mass = cell * float(np.sum(np.exp(-(w - wmin)))) * math.exp(-wmin)
    return u + math.log(mass / setup.volume) / t


def _thomas_transposed(lo, di, up, rhs):
    lo_t = np.concatenate([[0.0], up[:-1]])
    up_t = np.concatenate([lo[1:], [0.0]])
    return kernels.thomas(lo_t, di, up_t, rhs)


def _newton_1d(setup: ContinuitySetup, t: float, init: np.ndarray, force_gauge: bool = False):
    """Damped Newton with translation-gauge deflation near t = 1.

    At t = 1 the deformation term that pins the spatial position of the
    solution vanishes: the continuous equation is translation invariant and
    the discrete Jacobian keeps only an exponentially weak and O(h^2)
    grid-level coupling to the translation mode.  With ``force_gauge`` (used
    exactly at t = 1) the step is computed in the complement of that mode (a
    bordered solve) and the rank-one broken-symmetry defect, which cannot be
    reduced at the given grid spacing, is excluded from the convergence test
    and reported separately as ``gauge_defect``.
    """
    opts = setup.options
    u = _rebalance(setup, t, init)
    xi0 = float(setup.xi[0])
    bc = setup.bcoef[:, 0] if setup.bcoef.size else np.zeros(0)

    def residual(vec, conv_extra=0.0):
        return kernels.residual_1d(
            vec, setup.u0, setup.h, t, xi0, bc, setup.boff, setup.qlo, setup.qhi,
            setup.invc, setup.conv_floor + conv_extra, setup.term_floor + conv_extra,
            setup.closed_l, setup.closed_r,
        )

    f, lo, di, up, ok = residual(u)
    if not ok:
        raise SolverError("initial iterate inadmissible", last_state=u)

    def translation_vector(vec):
        uext = np.concatenate([[vec[0] - setup.h * setup.qlo], vec,
                               [vec[-1] + setup.h * setup.qhi]])
        grad = (uext[2:] - uext[:-2]) / (2.0 * setup.h)
        return grad / np.linalg.norm(grad)

    gauge = None  # (g left-null, c right-null) when deflation is active

    def split(fvec):
        if gauge is None:
            return fvec, 0.0
        g, _ = gauge
        s = float(g @ fvec)
        return fvec - s * g, s

    def singular_pair(lo_, di_, up_):
        """Smallest singular pair by inverse iteration from the translation
        direction; two rounds give the mode to far better accuracy than the
        separation to the rest of the spectrum requires."""
        x = translation_vector(u)
        for _ in range(2):
            y = _thomas_transposed(lo_, di_, up_, x)
            x = kernels.thomas(lo_, di_, up_, y)
            x = x / np.linalg.norm(x)
        jx = di_ * x
        jx[:-1] += up_[:-1] * x[1:]
        jx[1:] += lo_[1:] * x[:-1]
        sigma = float(np.linalg.norm(jx))
        g = _thomas_transposed(lo_, di_, up_, x)
        g = g / np.linalg.norm(g)
        return sigma, g, x

    for it in range(opts.max_newton):
        # gauge deflation is an endpoint device: at t = 1 exactly the
        # translation symmetry is exact and the grid-level defect cannot be
        # reduced; below t = 1 the translation carries real physics (the
        # continuation handles stiffness by shrinking the t-step instead)
        delta_plain = kernels.thomas(lo, di, up, -f)
        if force_gauge:
            _, g_vec, v_vec = singular_pair(lo, di, up)
            gauge = (g_vec, v_vec)
        f_red, defect = split(f)
        rnorm = float(np.max(np.abs(f_red)))
        if rnorm <= opts.tol:
            if not ok:
                # the state solves the equation modulo the broken-symmetry
                # defect, so its curvature is clean only to the same scale
                _, _, _, _, ok = residual(u, conv_extra=20.0 * abs(defect) * setup.c_norm)
            if not ok:
                raise SolverError(
                    "converged state violates convexity or gradient confinement",
                    last_state=u,
                )
            return u, rnorm, it, abs(defect)
        merit = 0.5 * float(f_red @ f_red)
        allowance = 4.0 * np.finfo(float).eps * merit
        if gauge is None:
            delta = delta_plain
        else:
            g, c_vec = gauge
            sol_g = kernels.thomas(lo, di, up, g)
            s = float(c_vec @ delta_plain) / float(c_vec @ sol_g)
            delta = delta_plain - s * sol_g
        # the line search gates on the merit alone; convexity and gradient
        # confinement are verified on the converged state (transient tail
        # dips at rounding scale would otherwise block legitimate steps)
        accepted = False
        lam = 1.0
        for _ in range(22):
            trial = u + lam * delta
            f_t, lo_t, di_t, up_t, ok_t = residual(trial)
            f_t_red, _ = split(f_t)
            with np.errstate(over="ignore"):  # rejected trials may overflow
                merit_t = 0.5 * float(f_t_red @ f_t_red)
            if merit_t <= merit * (1.0 - 2e-4 * lam) + allowance:
                u, f, lo, di, up, ok = trial, f_t, lo_t, di_t, up_t, ok_t
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            raise SolverError("Newton line search stagnated", last_state=u)
    f_red, defect = split(f)
    rnorm = float(np.max(np.abs(f_red)))
    if rnorm <= opts.tol:
        if not ok:
            _, _, _, _, ok = residual(u, conv_extra=20.0 * abs(defect) * setup.c_norm)
        if ok:
            return u, rnorm, opts.max_newton, abs(defect)
    raise SolverError(f"Newton stagnated at residual {rnorm:.3e}", last_state=u)


def _state_1d(setup: ContinuitySetup, t: float, u: np.ndarray, rnorm: float, iters: int, gauge_defect: float = 0.0) -> ContinuityState:
    h, n = setup.h, setup.n
    w = t * u + (1.0 - t) * setup.u0
    imin = int(np.argmin(w))
    ew = np.exp(-w)
    tail_r = math.exp(-(w[-1] + 0.5 * h * setup.qhi)) / setup.qhi
    tail_l = math.exp(-(w[0] + 0.5 * h * (-setup.qlo))) / (-setup.qlo)
    mass = float(h * np.sum(ew) + tail_l + tail_r)
    ughost_l = u[0] - h * setup.qlo
    ughost_r = u[-1] + h * setup.qhi
    uext = np.concatenate([[ughost_l], u, [ughost_r]])
    grad = (uext[2:] - uext[:-2]) / (2.0 * h)
    margin = float(min(setup.qhi - grad.max(), grad.min() - setup.qlo))
    x_l = setup.axis[0] - h
    x_r = setup.axis[-1] + h
    u0ghosts = setup.refpot.value(np.array([[x_l], [x_r]]))
    wext = np.concatenate([[t * ughost_l + (1 - t) * u0ghosts[0]], w,
                           [t * ughost_r + (1 - t) * u0ghosts[1]]])
    wgrad = (wext[2:] - wext[:-2]) / (2.0 * h)
    centering = float(h * np.sum(wgrad * ew))
    # boundary offset: u minus the support function at the right end of the box
    v_right = setup.qhi * setup.axis[-1]
    return ContinuityState(
        t=t,
        u=u,
        w=w,
        m_t=float(w[imin]),
        x_t=(float(setup.axis[imin]),),
        mass=mass,
        residual_norm=rnorm,
        sup_psi=float(np.max(u - setup.u0)),
        boundary_offset=float(u[-1] - v_right),
        grad_margin=margin,
        centering=centering,
        newton_iterations=iters,
        gauge_defect=gauge_defect,
    )


# ---------------------------------------------------------------------------
# 2-D solver (best-effort)
# ---------------------------------------------------------------------------


def _extension_constants_2d(refpot: ReferencePotential, axis: np.ndarray, h: float) -> np.ndarray:
    """v(ghost) - v(clipped node) on the (n+2)^2 extended grid; zero inside."""
    n = axis.shape[0]
    ext_axis = np.concatenate([[axis[0] - h], axis, [axis[-1] + h]])
    mesh = np.meshgrid(ext_axis, ext_axis, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
    v_ext = refpot.support(pts).reshape(n + 2, n + 2)
    ci = np.clip(np.arange(n + 2) - 1, 0, n - 1)
    v_clip = refpot.support(
        np.stack(
            [m.reshape(-1) for m in np.meshgrid(axis[ci], axis[ci], indexing="ij")], axis=1
        )
    ).reshape(n + 2, n + 2)
    return v_ext - v_clip


def _extended_2d(setup: ContinuitySetup, u: np.ndarray) -> np.ndarray:
    n = setup.n
    ci = np.clip(np.arange(n + 2) - 1, 0, n - 1)
    return u[np.ix_(ci, ci)] + setup.vconst


def _residual_2d(setup: ContinuitySetup, t: float, u: np.ndarray):
    """Residual and stencil data; the last entry is the worst concavity on
    the mass-carrying region (the 1e-8 level the box is built on).  Where the
    right side underflows the equation cannot pin the curvature branch of
    the determinant; the deficit is reported, not enforced, on this
    best-effort path."""
    h = setup.h
    ue = _extended_2d(setup, u)
    c = ue[1:-1, 1:-1]
    uxx = (ue[2:, 1:-1] - 2 * c + ue[:-2, 1:-1]) / h**2
    uyy = (ue[1:-1, 2:] - 2 * c + ue[1:-1, :-2]) / h**2
    uxy = (ue[2:, 2:] - ue[2:, :-2] - ue[:-2, 2:] + ue[:-2, :-2]) / (4 * h**2)
    ma = uxx * uyy - uxy**2
    gx = (ue[2:, 1:-1] - ue[:-2, 1:-1]) / (2 * h)
    gy = (ue[1:-1, 2:] - ue[1:-1, :-2]) / (2 * h)
    w = t * u + (1 - t) * setup.u0
    dens = np.ones_like(u)
    for k in range(setup.bcoef.shape[0]):
        term = setup.boff[k] - 0.5 * (setup.bcoef[k, 0] * gx + setup.bcoef[k, 1] * gy)
        if np.any(term < -setup.term_floor):
            return None
        dens *= term
    rhs = np.exp(-w - gx * setup.xi[0] - gy * setup.xi[1])
    f = ma * dens * setup.invc - rhs
    active = rhs > 1e-8 * float(rhs.max())
    deficit = max(0.0, float(-np.min(uxx[active])), float(-np.min(ma[active])))
    return f, ma, uxx, uyy, uxy, gx, gy, dens, rhs, deficit


def _jacobian_2d(setup: ContinuitySetup, t: float, parts) -> "object":
    from scipy.sparse import coo_matrix

    f, ma, uxx, uyy, uxy, gx, gy, dens, rhs, _ = parts
    h, n = setup.h, setup.n
    inv_h2 = 1.0 / h**2
    inv_4h2 = 1.0 / (4 * h**2)
    inv_2h = 1.0 / (2 * h)
    nforms = setup.bcoef.shape[0]
    sd_x = np.zeros_like(gx)
    sd_y = np.zeros_like(gy)
    all_terms = [
        setup.boff[k] - 0.5 * (setup.bcoef[k, 0] * gx + setup.bcoef[k, 1] * gy)
        for k in range(nforms)
    ]
    for k in range(nforms):
        other = np.ones_like(gx)
        for k2 in range(nforms):
            if k2 != k:
                other = other * all_terms[k2]
        sd_x += -0.5 * setup.bcoef[k, 0] * other
        sd_y += -0.5 * setup.bcoef[k, 1] * other
    # coefficients of d/d(uxx), d/d(uyy), d/d(uxy), d/d(gx), d/d(gy), d/d(u)
    a_xx = setup.invc * dens * uyy
    a_yy = setup.invc * dens * uxx
    a_xy = -2.0 * setup.invc * dens * uxy
    a_gx = setup.invc * ma * sd_x + rhs * setup.xi[0]
    a_gy = setup.invc * ma * sd_y + rhs * setup.xi[1]
    rows, cols, vals = [], [], []
    idx = np.arange(n * n).reshape(n, n)
    ci = np.clip(np.arange(-1, n + 1), 0, n - 1)

    def add(di, dj, coeff):
        ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        ti = ci[ii + di + 1]
        tj = ci[jj + dj + 1]
        rows.append(idx.reshape(-1))
        cols.append(idx[ti, tj].reshape(-1))
        vals.append(np.broadcast_to(coeff, (n, n)).reshape(-1).copy())

    add(1, 0, a_xx * inv_h2 + a_gx * inv_2h)
    add(-1, 0, a_xx * inv_h2 - a_gx * inv_2h)
    add(0, 1, a_yy * inv_h2 + a_gy * inv_2h)
    add(0, -1, a_yy * inv_h2 - a_gy * inv_2h)
    add(0, 0, -2.0 * (a_xx + a_yy) * inv_h2 + rhs * t)
    add(1, 1, a_xy * inv_4h2)
    add(-1, -1, a_xy * inv_4h2)
    add(1, -1, -a_xy * inv_4h2)
    add(-1, 1, -a_xy * inv_4h2)
    return coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n * n, n * n),
    ).tocsr()


def _newton_2d(setup: ContinuitySetup, t: float, init: np.ndarray, force_gauge: bool = False):
    """Gauss-Newton with Levenberg regularization (best-effort 2-D path).

    The 9-point Hessian-determinant linearization develops exactly zero rows
    on machine-affine corner regions of the box, so the step is computed from
    the regularized normal equations instead of the raw Jacobian.
    """
    from scipy.sparse import identity
    from scipy.sparse.linalg import spsolve

    opts = setup.options
    u = _rebalance(setup, t, init)
    parts = _residual_2d(setup, t, u)
    if parts is None:
        raise SolverError("initial iterate inadmissible", last_state=u)
    nn = setup.n * setup.n

    def try_step(delta, merit, allowance, halvings):
        nonlocal u, parts
        lam = 1.0
        for _ in range(halvings):
            trial = u + lam * delta
            parts_t = _residual_2d(setup, t, trial)
            if parts_t is not None:
                f_t = parts_t[0]
                if 0.5 * float(np.sum(f_t * f_t)) <= merit * (1.0 - 2e-4 * lam) + allowance:
                    u, parts = trial, parts_t
                    return True
            lam *= 0.5
        return False

    mu = 0.0
    for it in range(opts.max_newton):
        f = parts[0]
        rnorm = float(np.max(np.abs(f)))
        if rnorm <= opts.tol:
            return u, rnorm, it, 0.0
        jac = _jacobian_2d(setup, t, parts).tocsr()
        merit = 0.5 * float(np.sum(f * f))
        allowance = 4.0 * np.finfo(float).eps * merit
        accepted = False
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # spsolve warns on singular rows
            delta = spsolve(jac.tocsc(), -f.reshape(-1))
            if np.all(np.isfinite(delta)):
                accepted = try_step(delta.reshape(setup.n, setup.n), merit, allowance, 4)
            if not accepted:
                jtj = (jac.T @ jac).tocsc()
                jtf = jac.T @ f.reshape(-1)
                scale = float(np.max(jtj.diagonal()))
                mu = max(mu, 1e-10)
                for _ in range(12):
                    reg = jtj + mu * scale * identity(nn, format="csc")
                    delta = spsolve(reg, -jtf).reshape(setup.n, setup.n)
                    if try_step(delta, merit, allowance, 14):
                        accepted = True
                        mu /= 10.0
                        break
                    mu *= 20.0
        if not accepted:
            raise SolverError("Newton line search stagnated", last_state=u)
    f = parts[0]
    rnorm = float(np.max(np.abs(f)))
    if rnorm <= opts.tol:
        return u, rnorm, opts.max_newton, 0.0
    raise SolverError(f"Newton stagnated at residual {rnorm:.3e}", last_state=u)


def _state_2d(setup: ContinuitySetup, t: float, u: np.ndarray, rnorm: float, iters: int, gauge_defect: float = 0.0) -> ContinuityState:
    h, n = setup.h, setup.n
    w = t * u + (1 - t) * setup.u0
    flat = int(np.argmin(w))
    i, j = divmod(flat, n)
    ew = np.exp(-w)
    interior_mass = float(h * h * np.sum(ew))
    boundary = np.concatenate([ew[0, :], ew[-1, :], ew[1:-1, 0], ew[1:-1, -1]])
    tail = float(h * np.sum(boundary) / setup.r_in)
    ue = _extended_2d(setup, u)
    gx = (ue[2:, 1:-1] - ue[:-2, 1:-1]) / (2 * h)
    gy = (ue[1:-1, 2:] - ue[1:-1, :-2]) / (2 * h)
    grads = np.stack([gx.reshape(-1), gy.reshape(-1)], axis=1)
    margin = math.inf
    for normal, offset in setup.refpot.polytope.facets:
        nf = np.array([float(c) for c in normal])
        margin = min(margin, float((float(offset) - grads @ nf).min() / np.linalg.norm(nf)))
    we = t * ue + (1 - t) * setup.refpot.value(
        _ext_points_2d(setup)
    ).reshape(n + 2, n + 2)
    wgx = (we[2:, 1:-1] - we[:-2, 1:-1]) / (2 * h)
    centering = float(h * h * np.sum(wgx * ew))
    v_corner = float(setup.refpot.support(np.array([[setup.axis[-1], setup.axis[-1]]]))[0])
    parts = _residual_2d(setup, t, u)
    deficit = parts[-1] if parts is not None else math.inf
    return ContinuityState(
        t=t,
        u=u,
        w=w,
        m_t=float(w[i, j]),
        x_t=(float(setup.axis[i]), float(setup.axis[j])),
        mass=interior_mass + tail,
        residual_norm=rnorm,
        sup_psi=float(np.max(u - setup.u0)),
        boundary_offset=float(u[-1, -1] - v_corner),
        grad_margin=margin,
        centering=centering,
        newton_iterations=iters,
        gauge_defect=gauge_defect,
        convexity_deficit=deficit,
    )


def _ext_points_2d(setup: ContinuitySetup) -> np.ndarray:
    ext_axis = np.concatenate(
        [[setup.axis[0] - setup.h], setup.axis, [setup.axis[-1] + setup.h]]
    )
    mesh = np.meshgrid(ext_axis, ext_axis, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


# ---------------------------------------------------------------------------
# public driver
# ---------------------------------------------------------------------------


def ma_residual(hp: HorosphericalProblem, u: np.ndarray, t: float, xi,
                options: ContinuityOptions | None = None,
                setup: ContinuitySetup | None = None):
    """Pointwise residual of the normalized discrete equation for a given
    grid potential; returns (residual array, per-point admissibility mask).
    Inadmissible points (negative curvature or escaped gradient beyond the
    rounding floors) are flagged in the mask."""
    if setup is None:
        setup = build_setup(hp, xi, options or ContinuityOptions())
    if hp.a1_dim == 1:
        u = np.asarray(u, dtype=np.float64)
        h = setup.h
        bc = setup.bcoef[:, 0] if setup.bcoef.size else np.zeros(0)
        uext = np.concatenate([[u[0] - h * setup.qlo], u, [u[-1] + h * setup.qhi]])
        second = (uext[2:] - 2 * u + uext[:-2]) / h**2
        grad = (uext[2:] - uext[:-2]) / (2 * h)
        terms = setup.boff[None, :] - 0.5 * grad[:, None] * bc[None, :]
        mask = (second >= -setup.conv_floor) & np.all(terms >= -setup.term_floor, axis=1)
        w = t * u + (1 - t) * setup.u0
        f = (
            second * np.prod(terms, axis=1) * setup.invc
            - np.exp(-w - grad * float(setup.xi[0]))
        )
        if setup.closed_l:
            f[0] = second[0]
        if setup.closed_r:
            f[-1] = second[-1]
        return f, mask
    parts = _residual_2d(setup, t, np.asarray(u, dtype=np.float64))
    if parts is None:
        raise SolverError("potential inadmissible on the grid (gradient escaped)")
    return parts[0], np.ones((setup.n, setup.n), dtype=bool)


def solve_at_t(hp: HorosphericalProblem, t: float, xi, init: np.ndarray | None = None,
               options: ContinuityOptions | None = None,
               setup: ContinuitySetup | None = None) -> ContinuityState:
    """Solve the discrete equation at one value of the deformation parameter.

    Without an initial guess the solver ramps t up from the reference
    potential in a few warm-started stages (a cold Newton start far from t0
    is outside the basin of the equation's strong exponential nonlinearity).
    """
    if setup is None:
        setup = build_setup(hp, xi, options or ContinuityOptions())
    if not 0 < t <= 1:
        raise MathValidationError("t must lie in (0, 1]")
    newton = _newton_1d if hp.a1_dim == 1 else _newton_2d
    mkstate = _state_1d if hp.a1_dim == 1 else _state_2d
    if init is not None:
        force = hp.a1_dim == 1 and t >= 1.0
        u, rnorm, iters, defect = newton(
            setup, t, np.asarray(init, dtype=np.float64), force_gauge=force
        )
        return mkstate(setup, t, u, rnorm, iters, defect)
    t_cur = min(t, setup.options.t0)
    u, rnorm, iters, defect = newton(setup, t_cur, setup.u0.copy())
    step = setup.options.max_step
    while t_cur < t:
        t_try = min(t, t_cur + step)
        force = hp.a1_dim == 1 and t_try >= 1.0
        try:
            u, rnorm, iters, defect = newton(setup, t_try, u, force_gauge=force)
        except SolverError:
            step *= 0.5
            if step < setup.options.min_step:
                raise
            continue
        t_cur = t_try
        step = min(setup.options.max_step, step * 1.5)
    return mkstate(setup, t, u, rnorm, iters, defect)


def continuity_sweep(hp: HorosphericalProblem, xi,
                     options: ContinuityOptions | None = None) -> ContinuityTrace:
    """Advance t from t0 toward 1 with warm starts and adaptive steps."""
    options = options or ContinuityOptions()
    setup = build_setup(hp, xi, options)
    trace = ContinuityTrace(
        volume=setup.volume, d0=setup.d0, box=setup.box, grid=setup.n,
        xi=tuple(float(v) for v in setup.xi),
    )
    solve = _newton_1d if hp.a1_dim == 1 else _newton_2d
    mkstate = _state_1d if hp.a1_dim == 1 else _state_2d

    t = options.t0
    try:
        u, rnorm, iters, defect = solve(setup, t, setup.u0.copy())
    except SolverError:
        trace.termination = "newton_failure"
        trace.final_step = 0.0
        return trace
    state = mkstate(setup, t, u, rnorm, iters, defect)
    if _escaped(state, setup, options):
        trace.termination = "divergence"
        trace.diverged_at = t
        trace.final_step = options.t0
        return trace
    trace.states.append(_summary(state, options.t0))
    trace.final_state = state

    step = options.step0
    while t < 1.0:
        t_try = min(1.0, t + step)
        force = hp.a1_dim == 1 and t_try >= 1.0
        try:
            u_new, rnorm, iters, defect = solve(setup, t_try, u.copy(), force_gauge=force)
            candidate = mkstate(setup, t_try, u_new, rnorm, iters, defect)
        except SolverError:
            step *= 0.5
            if step < options.min_step:
                if hp.a1_dim == 1 and 1.0 - t < 0.01:
                    # the gauge-stiff band just below t = 1 can be
                    # un-navigable by continuation at coarse grids; the
                    # endpoint itself is still solvable with the translation
                    # mode deflated, so hop over the band once
                    try:
                        u_new, rnorm, iters, defect = _newton_1d(
                            setup, 1.0, u.copy(), force_gauge=True
                        )
                        state = mkstate(setup, 1.0, u_new, rnorm, iters, defect)
                        if not _escaped(state, setup, options):
                            trace.states.append(_summary(state, 1.0 - t))
                            trace.final_state = state
                            trace.termination = "reached_t1"
                            trace.final_step = 0.0
                            return trace
                    except SolverError:
                        pass
                trace.termination = "divergence"
                trace.diverged_at = t_try
                trace.final_step = t_try - t
                return trace
            continue
        if _escaped(candidate, setup, options):
            trace.termination = "divergence"
            trace.diverged_at = t_try
            trace.final_step = t_try - t
            trace.final_state = candidate
            return trace
        u, t, state = u_new, t_try, candidate
        trace.states.append(_summary(state, step))
        trace.final_state = state
        step = min(options.max_step, step * 1.3)
    trace.termination = "reached_t1"
    trace.final_step = 0.0
    return trace


def _escaped(state: ContinuityState, setup: ContinuitySetup, options: ContinuityOptions) -> bool:
    return max(abs(c) for c in state.x_t) > options.window * setup.box


def _summary(state: ContinuityState, step: float) -> StateSummary:
    return StateSummary(
        t=state.t, m_t=state.m_t, x_t=state.x_t, mass=state.mass,
        residual=state.residual_norm, sup_psi=state.sup_psi, step=step,
        grad_margin=state.grad_margin, centering=state.centering,
        gauge_defect=state.gauge_defect,
    )


def estimate_rm_numeric(trace: ContinuityTrace) -> tuple[float, float]:
    """Midpoint estimate of the greatest Ricci lower bound from a sweep that
    declared divergence, with the final step as the uncertainty."""
    if trace.termination == "reached_t1":
        return 1.0, 0.0
    if trace.termination != "divergence" or not trace.states:
        raise MathValidationError(
            "estimate needs a sweep that diverged after at least one accepted state"
        )
    last = trace.states[-1].t
    return last + 0.5 * trace.final_step, trace.final_step
