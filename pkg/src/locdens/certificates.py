"""Level-1/Level-2 constants, the four conditions and the theorem bounds."""

from __future__ import annotations

import functools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (
    EpsilonTooLarge,
    OscillationTooLarge,
    Phi1TooLarge,
    WindowMassOne,
    ZExceedsG2Over4,
)
from .linalg import eigvals_sym, inv_pd, inv_sqrt_pd, sherman_morrison_inv
from .model import ModelSpec, eval_basis, eval_kernel
from .quadrature import design, grid_sup

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
LOG_3_2 = math.log(1.5)


def _closed_form_c1_sq(model: ModelSpec):
    if model.d == 1 and model.kernel.kind == "indicator":
        return model.p**2 / 2.0
    return None


def _quad_form_sup(model: ModelSpec, A, kernel_power: int, grid=None) -> float:
    """``sup_t K(t)^k Psi(t)' A^{-1} Psi(t)`` via a Cholesky factor of A."""
    L = np.linalg.cholesky(0.5 * (A + A.T))

    def q(t):
        t = np.asarray(t, dtype=float)
        Psi = eval_basis(model.basis, t).reshape(-1, model.p)
        y = np.linalg.solve(L, Psi.T)
        out = np.sum(y * y, axis=0)
        if kernel_power:
            out = out * eval_kernel(model.kernel, t) ** kernel_power
        return out

    return grid_sup(q, model.d, grid)[0]


def _scale_free(model: ModelSpec) -> ModelSpec:
    # c1 and c2 depend on neither x0 nor h
    return ModelSpec((0.0,) * model.d, 1.0, model.basis, model.kernel, model.quad_order)


@functools.lru_cache(maxsize=256)
def _c_sq(model: ModelSpec, kernel_power: int, grid):
    A = design(model).mat()
    inv_pd(A)  # raises NotPositiveDefinite for a degenerate Gram matrix
    return _quad_form_sup(model, A, kernel_power, grid)


def c1_squared(model: ModelSpec, grid: int | None = None) -> float:
    """``sup_t Psi' (int K Psi Psi')^{-1} Psi``.

    For the 1-D indicator polynomial model the grid value is checked against
    ``p^2 / 2``.
    """
    val = _c_sq(_scale_free(model), 0, grid)
    ref = _closed_form_c1_sq(model)
    if ref is not None and abs(val - ref) > 1e-8 * max(1.0, ref):
        raise ArithmeticError(f"c1^2 grid value {val!r} disagrees with p^2/2 = {ref}")
    return val


def c2_squared(model: ModelSpec, grid: int | None = None) -> float:
    return _c_sq(_scale_free(model), 2, grid)


def phi_constants(f0, c_fh, B_ph, model: ModelSpec, c1: float | None = None):
    """``(phi1, phi2, epsilon, phi1_clamped)``.

    ``phi1^2`` is clamped at zero; ``epsilon`` is infinite once ``c1 phi1 >= 1``.
    """
    if not f0 > 0:
        raise ValueError("f0 must be positive")
    if c_fh < 0 or B_ph < 1:
        raise ValueError("need c_fh >= 0 and B_ph >= 1")
    if c_fh >= 1:
        raise OscillationTooLarge(f"oscillation c_fh = {c_fh:.4g} >= 1")
    IK = model.kernel.integral
    c, lf = c_fh, math.log(f0)
    plus = 2.0 * c * lf - c + (1.0 + c) * math.log1p(c)
    minus = c + (1.0 - c) * math.log1p(-c)
    raw = 2.0 * IK * max(plus, minus)
    clamped = raw < 0
    phi1 = math.sqrt(max(raw, 0.0))
    phi2 = math.sqrt(IK * f0**3) * abs(c - math.log(B_ph))
    c1 = math.sqrt(c1_squared(model)) if c1 is None else c1
    x = c1 * phi1
    eps = max(x / math.sqrt(1.0 - x) if x < 1 else math.inf, c1 * phi2)
    return phi1, phi2, eps, clamped


def small_bandwidth_ok(c1, phi1, phi2) -> bool:
    return c1 * phi1 < GOLDEN and c1 * phi2 < 1.0


def bias_bound(f0, c_fh, B_ph, epsilon, model: ModelSpec) -> float:
    """Right-hand side of the accurate small-bias bound on ``||d0(theta_circ)(theta* - theta_bullet)||``."""
    if epsilon >= 1:
        raise EpsilonTooLarge(f"epsilon = {epsilon:.4g} >= 1")
    IK = model.kernel.integral
    return math.sqrt(model.p * IK) / (1.0 - epsilon) * (1.0 + c_fh) * f0 * abs(B_ph - 1.0)


def a_bound(B_ph, c_fh, f0, epsilon, model: ModelSpec, c1: float | None = None) -> float:
    c1 = math.sqrt(c1_squared(model)) if c1 is None else c1
    return math.sqrt(B_ph * math.exp(c1 * bias_bound(f0, c_fh, B_ph, epsilon, model)))


def a_exact(D2, V2) -> float:
    Dinv = inv_sqrt_pd(D2)
    return math.sqrt(max(float(eigvals_sym(Dinv @ V2 @ Dinv)[-1]), 0.0))


@dataclass(frozen=True)
class CVf:
    value: float
    bound: float
    dense_value: float

    @property
    def bound_ok(self) -> bool:
        return self.value <= self.bound + 1e-8


def C_Vf(oracle, model: ModelSpec, grid: int | None = None, c2_sq=None, c_fh=None) -> CVf:
    """``C_{V,f}`` from ``sup_t K^2 Psi' M^{-1} Psi`` with ``M = A - h^d u u'``.

    ``A = int K^2 f Psi Psi'`` and ``u = int K f Psi``; for the indicator
    kernel this is the rank-one form with the ``h^d / (1 - pr1)`` term.
    """
    from .population import f0_of, oscillation, window_moments

    D = design(model)
    f = oracle.pdf(model.x0_array + model.h * D.rule.nodes)
    pr1 = model.hd * D.scalar(f)
    if pr1 >= 1.0 - 1e-12:
        raise WindowMassOne(f"window mass pr1 = {pr1:.15g}")
    A = D.mat(f, kernel_power=2)
    u = D.vec(f)
    Minv = sherman_morrison_inv(A, u, model.hd)
    # dense route through the variance matrix itself
    M = A - model.hd * np.outer(u, u)
    dense = _quad_form_sup(model, M, 2, grid)

    def q(t):
        t = np.asarray(t, dtype=float)
        Psi = eval_basis(model.basis, t).reshape(-1, model.p)
        k2 = eval_kernel(model.kernel, t) ** 2
        return k2 * np.einsum("ip,pq,iq->i", Psi, Minv, Psi)

    val = grid_sup(q, model.d, grid)[0]
    f0 = f0_of(oracle, model)
    c = oscillation(oracle, model, grid) if c_fh is None else c_fh
    c2s = c2_squared(model, grid) if c2_sq is None else c2_sq
    bound = c2s / ((1.0 - c) * f0) + model.hd / (1.0 - pr1) if c < 1 else math.inf
    return CVf(math.sqrt(val), math.sqrt(bound), math.sqrt(dense))


def choose_g_nu0(C, n, h, d, p):
    """``g`` chosen so that ``nu0^2 = p + 16 g C^3 / sqrt(n h^{3d}) = 2p``."""
    nh3d = n * h ** (3 * d)
    if not nh3d > 0:
        raise ValueError("n h^d must be positive")
    g = p * math.sqrt(nh3d) / (16.0 * C**3)
    return g, math.sqrt(2.0 * p)


def _z_guard(z, g):
    if g is not None and z > g * g / 4.0:
        raise ZExceedsG2Over4(f"z = {z:.4g} exceeds g^2/4 = {g * g / 4.0:.4g}")


def zeta(p, z, a, nu0, g=None, factor: float = 1.0) -> float:
    if not z > 0:
        raise ValueError("z must be positive")
    _z_guard(z, g)
    return factor * a * nu0 * (math.sqrt(p) + math.sqrt(2.0 * z))


def r0(p, z, a, nu0, g=None) -> float:
    _z_guard(z, g)
    return 4.0 * a * nu0 * (math.sqrt(p) + math.sqrt(2.0 * z))


def delta_n(r0, c1, phi1, f0, n, h, d) -> float:
    x = c1 * phi1
    if x >= 1:
        raise Phi1TooLarge(f"c1 * phi1 = {x:.4g} >= 1")
    arg = c1 * r0 / (math.sqrt(1.0 - x) * math.sqrt(f0 * n * h**d))
    return math.expm1(arg) if arg < 700 else math.inf


@dataclass
class Certificate:
    c1: float
    c2: float
    phi1: float
    phi2: float
    epsilon: float
    a: float
    a_exact: float | None
    C_Vf: float
    g: float
    nu0: float
    zeta: float
    r0: float
    delta_n: float
    diamond: float
    conditions: dict
    prob_bound: float
    z: float
    degraded: bool
    zeta_n: float | None = None
    r_n: float | None = None
    c1_squared: float = 0.0
    c2_squared: float = 0.0
    phi1_clamped: bool = False
    C_Vf_bound: float = 0.0
    bias_bound: float = 0.0
    eff_sample_threshold: float = 0.0
    zeta_factor: float = 1.0
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def check_conditions(summary, model: ModelSpec, n, z, oracle=None, *, zeta_factor=1.0,
                     enforce_z_guard: bool = True, grid: int | None = None) -> Certificate:
    """Evaluate every constant and condition for one cell.

    With ``oracle`` given, ``C_Vf`` uses the exact rank-one form and ``a_exact``
    is computed from ``summary.D2``, ``summary.V2``; otherwise only the
    inequality bounds are available.  ``enforce_z_guard=False`` records
    ``z > g^2/4`` in the ED0 flag instead of raising.
    """
    f0, c, B = summary.f0, summary.c_fh, summary.B_ph
    p, d, h = model.p, model.d, model.h
    c1s, c2s = c1_squared(model, grid), c2_squared(model, grid)
    c1, c2 = math.sqrt(c1s), math.sqrt(c2s)
    phi1, phi2, eps, clamped = phi_constants(f0, c, B, model, c1)
    a = a_bound(B, c, f0, eps, model, c1)
    a_ex = None
    if getattr(summary, "V2", None) is not None and getattr(summary, "D2", None) is not None:
        a_ex = a_exact(summary.D2, summary.V2)
    if oracle is not None:
        cv = C_Vf(oracle, model, grid, c2_sq=c2s, c_fh=c)
        Cv, Cv_bound = cv.value, cv.bound
    else:
        if summary.pr1 >= 1.0 - 1e-12:
            raise WindowMassOne(f"window mass pr1 = {summary.pr1:.15g}")
        Cv_bound = math.sqrt(c2s / ((1.0 - c) * f0) + model.hd / (1.0 - summary.pr1))
        Cv = Cv_bound
    g, nu0 = choose_g_nu0(Cv, n, h, d, p)
    ed0 = z <= g * g / 4.0
    if enforce_z_guard and not ed0:
        _z_guard(z, g)
    zt = zeta(p, z, a, nu0, factor=zeta_factor)
    rr = 4.0 * zt
    dn = delta_n(rr, c1, phi1, f0, n, h, d)
    cond_C = rr * (1.0 - dn) >= 2.0 * zt
    zeta_n = r_n = None
    if not cond_C:
        zeta_n = math.sqrt(1.0 - c1 * phi1) * math.sqrt(n * model.hd) * LOG_3_2 / (4.0 * c1 * f0)
        r_n = 4.0 * zeta_n
    thr = f0 * 4.0 * c1 * zt / (LOG_3_2 * math.sqrt(1.0 - c1 * phi1))
    conditions = {
        "I": bool(a_ex is None or a_ex <= a + 1e-8),
        "L0": bool(dn < 1.0),
        "ED0": bool(ed0),
        "C": bool(cond_C),
        "small_bandwidth": bool(small_bandwidth_ok(c1, phi1, phi2)),
        "eff_sample_size": bool(math.sqrt(n * model.hd) >= thr),
    }
    return Certificate(
        c1=c1, c2=c2, phi1=phi1, phi2=phi2, epsilon=eps, a=a, a_exact=a_ex,
        C_Vf=Cv, g=g, nu0=nu0, zeta=zt, r0=rr, delta_n=dn, diamond=rr * dn,
        conditions=conditions,
        prob_bound=2.0 * math.exp(-z) + 8.4 * math.exp(-g * g / 4.0),
        z=float(z), degraded=not cond_C, zeta_n=zeta_n, r_n=r_n,
        c1_squared=c1s, c2_squared=c2s, phi1_clamped=clamped, C_Vf_bound=Cv_bound,
        bias_bound=bias_bound(f0, c, B, eps, model), eff_sample_threshold=thr,
        zeta_factor=float(zeta_factor),
    )


def theorem_bounds(cert: Certificate) -> dict:
    return {
        "concentration_prob": cert.prob_bound,
        "fisher_bound": cert.diamond,
        "wilks_bound_theta": 2.0 * cert.diamond,
        "wilks_bound_xi": 3.0 * cert.diamond,
    }
