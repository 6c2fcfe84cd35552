"""Estimation of the certification constants from discrete data.

All sups are sampled over a tubular neighborhood of the reconstruction
(structured time grid x per-axis corner offsets).  Lipschitz constants of
second derivatives come from difference quotients at half-radius offsets and
carry a safety factor because sampled quotients lower-bound the true sup.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import model, transcription
from .errors import LegendreViolationError, StrongRegularityError
from .numerics import sigma_min


@dataclass
class TubeSpec:
    """Sampling description of the tube around the reconstruction."""

    dx: float = 0.1
    du: float = 0.1
    dp: float = 0.1
    samples_per_axis: int = 3
    time_samples: Optional[int] = None  # default 4 * n_intervals

    def __post_init__(self):
        if min(self.dx, self.du, self.dp) <= 0:
            raise ValueError("tube radii must be positive")
        if self.samples_per_axis < 2:
            raise ValueError("need at least 2 samples per axis")


@dataclass
class ConstantsBundle:
    """Every constant entering the certification inequality."""

    rho: float = math.nan
    L2: float = math.nan
    M2f: float = math.nan
    L21_f: float = math.nan
    L21_L: float = math.nan
    L21_K: float = math.nan
    L21_H: float = math.nan
    P_max: float = math.nan
    C_int: float = math.nan
    c_Pi: float = math.nan
    A_inf: float = math.nan
    B_inf: float = math.nan
    H_ux_inf: float = math.nan
    H_up_inf: float = math.nan
    sigma_min_Mh: float = math.nan
    C_geo: float = math.nan
    C_geo_lift: float = 1.0
    C_geo_restrict: float = 1.0
    C_T: float = math.nan
    C_quad: float = math.nan
    C_Tprime: float = math.nan
    Gamma: float = math.nan
    Gamma_tot: float = math.nan
    Lambda: float = math.nan
    C_xp_inf: float = math.nan
    C_u_inf: float = math.nan
    C_close_inf: float = math.nan
    safety_factor: float = 1.5
    c_xp_scale: float = 1.0
    tube: Optional[TubeSpec] = None
    paper_constants: bool = False
    formulas: dict = field(default_factory=dict)

    def to_dict(self):
        d = {}
        for k, v in self.__dict__.items():
            if k == "tube":
                d[k] = None if v is None else {
                    "dx": v.dx,
                    "du": v.du,
                    "dp": v.dp,
                    "samples_per_axis": v.samples_per_axis,
                    "time_samples": v.time_samples,
                }
            else:
                d[k] = v
        return d


def _spectral_norms(stack):
    """Spectral norm of each matrix in a (..., k, k) stack."""
    if stack.size == 0:
        return np.zeros(stack.shape[:-2])
    return np.linalg.svd(stack, compute_uv=False)[..., 0]


def _axis_offsets(n, m, tube, scale):
    """Per-axis offset vectors (x block then u block) at radius*scale."""
    d = n + m
    radii = np.concatenate([np.full(n, tube.dx), np.full(m, tube.du)])
    offs = []
    for a in range(d):
        e = np.zeros(d)
        e[a] = radii[a] * scale
        offs.append(e)
        offs.append(-e)
    return np.asarray(offs)


def estimate_curvature_bounds(prob, rec, tube: TubeSpec, safety_factor=1.5):
    """Sample the tube and return the smoothness/curvature constants.

    Returns a partially filled :class:`ConstantsBundle` (the geometric and
    derived constants are added by the other operations).
    """
    n, m = prob.n, prob.m
    n_t = tube.time_samples or 4 * rec.mesh.n_intervals
    ts = np.linspace(0.0, rec.T, n_t)
    Xc = rec.X.eval(ts)
    Uc = rec.U.eval(ts)
    Pc = rec.P.eval(ts)

    # offset grid over the (x, u) axes: full-radius corners per axis plus
    # intermediate points when samples_per_axis > 3 (grids nest for odd counts)
    scales = np.linspace(-1.0, 1.0, tube.samples_per_axis)
    scales = scales[scales != 0.0]
    radii = np.concatenate([np.full(n, tube.dx), np.full(m, tube.du)])
    points_x = [Xc]
    points_u = [Uc]
    for a in range(n + m):
        for s in scales:
            dX = np.zeros(n)
            dU = np.zeros(m)
            if a < n:
                dX[a] = radii[a] * s
            else:
                dU[a - n] = radii[a] * s
            points_x.append(Xc + dX)
            points_u.append(Uc + dU)
    X_all = np.concatenate(points_x)
    U_all = np.concatenate(points_u)
    t_all = np.tile(ts, len(points_x))

    _, Fx, Fu, Hf = model.dynamics_batch(prob, t_all, X_all, U_all, order=2)
    _, _, Lh = model.running_cost_batch(prob, t_all, X_all, U_all, order=2)
    f_norms = _spectral_norms(Hf)  # (B, n)
    M2f = float(np.max(f_norms))
    sup_L = float(np.max(_spectral_norms(Lh)))

    # endpoint cost Hessian over the endpoint tube
    x0v = rec.X.eval(0.0)
    xTv = rec.X.eval(rec.T)
    k_norms = []
    for d0 in _endpoint_offsets(n, tube, 1.0):
        ept = model.eval_endpoint_terms(prob, x0v + d0[:n], xTv + d0[n:], rec.lam)
        k_norms.append(float(_spectral_norms(ept.K_hess[None])[0]))
    sup_K = max(k_norms)
    L2 = max(sup_L, M2f, sup_K)

    # strengthened Legendre constant and H-derivative sups need costate
    # offsets as well; contract the dynamics Hessians with each offset p
    p_offsets = [np.zeros(n)]
    for a in range(n):
        for s in scales:
            e = np.zeros(n)
            e[a] = tube.dp * s
            p_offsets.append(e)
    rho = math.inf
    H_ux_inf = 0.0
    P_all_center = np.tile(Pc, (len(points_x), 1))
    for dp in p_offsets:
        Hfull = Lh + np.einsum("bi,bijk->bjk", P_all_center + dp, Hf)
        rho = min(rho, float(np.min(np.linalg.eigvalsh(Hfull[:, n:, n:])[..., 0])))
        H_ux_inf = max(H_ux_inf, float(np.max(_spectral_norms(Hfull[:, n:, :n]))))
    H_up_inf = float(np.max(_spectral_norms(np.swapaxes(Fu, 1, 2))))
    if rho <= 0.0:
        raise LegendreViolationError(
            f"min eigenvalue of H_uu over the tube is {rho:.3e}; "
            "strengthened Legendre condition fails"
        )

    # linearized dynamics along the reconstruction only
    _, Fx_c, Fu_c = model.dynamics_batch(prob, ts, Xc, Uc, order=1)
    A_inf = float(np.max(_spectral_norms(Fx_c)))
    B_inf = float(np.max(_spectral_norms(Fu_c)))
    P_max = float(np.max(np.linalg.norm(Pc, axis=1))) + tube.dp

    # Lipschitz constants of second derivatives: difference quotients between
    # the center and half-radius axis offsets
    half = _axis_offsets(n, m, tube, 0.5)
    B0 = ts.size
    Hf_c = Hf[:B0]
    Lh_c = Lh[:B0]
    L21_f = 0.0
    L21_L = 0.0
    for off in half:
        step = float(np.linalg.norm(off))
        _, _, _, Hf_o = model.dynamics_batch(
            prob, ts, Xc + off[:n], Uc + off[n:], order=2
        )
        _, _, Lh_o = model.running_cost_batch(
            prob, ts, Xc + off[:n], Uc + off[n:], order=2
        )
        L21_f = max(L21_f, float(np.max(_spectral_norms(Hf_o - Hf_c))) / step)
        L21_L = max(L21_L, float(np.max(_spectral_norms(Lh_o - Lh_c))) / step)
    L21_K = 0.0
    ept_c = model.eval_endpoint_terms(prob, x0v, xTv, rec.lam)
    for off in _endpoint_offsets(n, tube, 0.5, include_center=False):
        ept_o = model.eval_endpoint_terms(prob, x0v + off[:n], xTv + off[n:], rec.lam)
        step = float(np.linalg.norm(off))
        L21_K = max(
            L21_K,
            float(_spectral_norms((ept_o.K_hess - ept_c.K_hess)[None])[0]) / step,
        )
    L21_f *= safety_factor
    L21_L *= safety_factor
    L21_K *= safety_factor

    bundle = ConstantsBundle(
        rho=rho,
        L2=L2,
        M2f=M2f,
        L21_f=L21_f,
        L21_L=L21_L,
        L21_K=L21_K,
        L21_H=L21_L + P_max * L21_f,
        P_max=P_max,
        A_inf=A_inf,
        B_inf=B_inf,
        H_ux_inf=H_ux_inf,
        H_up_inf=H_up_inf,
        safety_factor=safety_factor,
        tube=tube,
    )
    bundle.formulas["L21"] = "safety * max ||d2g(c + r/2 e) - d2g(c)|| / (r/2)"
    return bundle


def _endpoint_offsets(n, tube, scale, include_center=True):
    offs = [np.zeros(2 * n)] if include_center else []
    for a in range(2 * n):
        e = np.zeros(2 * n)
        e[a] = tube.dx * scale
        offs.append(e.copy())
        e[a] = -tube.dx * scale
        offs.append(e.copy())
    return offs


def estimate_C_geo(Mh, lift=1.0, restrict=1.0):
    """Geometric constant from the SVD of the discrete collocation Jacobian.

    ``Mh`` is the Jacobian of the collocation equations at the discrete
    solution (compressed form for Hermite-Simpson); the bound is
    lift * restrict / sigma_min(Mh).
    """
    Mh = np.asarray(Mh, dtype=float)
    smin = sigma_min(Mh)
    scale = float(np.max(np.abs(Mh)))
    if smin <= 1e-12 * max(1.0, scale):
        raise StrongRegularityError(
            f"sigma_min of the discrete KKT Jacobian is {smin:.3e}; "
            "strong regularity is violated"
        )
    return {"sigma_min_Mh": smin, "C_geo": lift * restrict / smin}


def compute_C_T(bundle: ConstantsBundle, scheme, T: float) -> float:
    """Projection stability constant c_Pi * exp(A_inf T) * (1 + B_inf / rho)."""
    scheme = transcription.parse_scheme(scheme)
    return scheme.lebesgue * math.exp(bundle.A_inf * T) * (1.0 + bundle.B_inf / bundle.rho)


def compute_quadrature_and_conformity(bundle: ConstantsBundle, scheme, mesh):
    """Quadrature and nonconformity constants, both O(h^2) / O(h^p).

    The quadrature constant uses the linear-in-horizon growth factor
    (1 + A_inf T + B_inf / rho); the Gronwall exponential that appears in
    the projection bound is replaced here because the exponential variant
    dwarfs every other term for mildly stiff dynamics while the quadrature
    error it bounds is a local O(h^2) effect.
    """
    scheme = transcription.parse_scheme(scheme)
    h_max = float(np.max(mesh.h))
    T = mesh.T
    growth = 1.0 + bundle.A_inf * T + bundle.B_inf / bundle.rho
    c_quad = (h_max**2 / 12.0) * bundle.L21_H * growth**2
    c_tprime = scheme.lebesgue * bundle.L2 * h_max**scheme.degree
    return {
        "C_quad": c_quad,
        "C_Tprime": c_tprime,
        "formula_C_quad": "h_max^2/12 * L21_H * (1 + A_inf*T + B_inf/rho)^2",
        "formula_C_Tprime": "c_Pi * L2 * h_max^p",
    }


def compute_Lambda(bundle: ConstantsBundle) -> float:
    """Second-variation Lipschitz constant C_int (L21_H + M2f) + 2 L21_K."""
    return bundle.C_int * (bundle.L21_H + bundle.M2f) + 2.0 * bundle.L21_K


def compute_C_close(bundle: ConstantsBundle, T: float, c_xp_scale=1.0):
    """Proximity constant C_xp + C_u from the strong-regularity bound."""
    c_xp = c_xp_scale * bundle.C_geo * (1.0 + T) * math.exp((bundle.A_inf + bundle.B_inf) * T)
    c_u = (bundle.H_ux_inf + bundle.H_up_inf) * c_xp / bundle.rho + 1.0 / bundle.rho
    return {"C_xp_inf": c_xp, "C_u_inf": c_u, "C_close_inf": c_xp + c_u}


PAPER_CONSTANTS = {
    "C_geo": 53.39,
    "Gamma": 979.47,
    "Lambda": 1.09,
    "C_close_inf": 59.36,
    "C_T": 0.0,
}


def estimate_all(
    prob,
    rec,
    dkkt,
    scheme,
    mesh,
    tube: Optional[TubeSpec] = None,
    safety_factor: float = 1.5,
    c_geo_lift: float = 1.0,
    c_geo_restrict: float = 1.0,
    c_xp_scale: float = 1.0,
    paper_constants: bool = False,
) -> ConstantsBundle:
    """Run the full constants pipeline and return a complete bundle.

    With ``paper_constants`` the benchmark's published values replace the
    estimated C_geo, Gamma, Lambda and C_close (and C_T is dropped), which
    reproduces the published arithmetic chain; everything else is still
    estimated and recorded.
    """
    scheme = transcription.parse_scheme(scheme)
    tube = tube or TubeSpec()
    bundle = estimate_curvature_bounds(prob, rec, tube, safety_factor=safety_factor)
    bundle.c_Pi = scheme.lebesgue
    bundle.C_int = max(mesh.T, 1.0)
    Mh = transcription.collocation_jacobian(prob, dkkt.layout, dkkt.z)
    geo = estimate_C_geo(Mh, lift=c_geo_lift, restrict=c_geo_restrict)
    bundle.sigma_min_Mh = geo["sigma_min_Mh"]
    bundle.C_geo = geo["C_geo"]
    bundle.C_geo_lift = c_geo_lift
    bundle.C_geo_restrict = c_geo_restrict
    bundle.C_T = compute_C_T(bundle, scheme, mesh.T)
    qc = compute_quadrature_and_conformity(bundle, scheme, mesh)
    bundle.C_quad = qc["C_quad"]
    bundle.C_Tprime = qc["C_Tprime"]
    bundle.Gamma = bundle.C_geo * bundle.L2
    bundle.Lambda = compute_Lambda(bundle)
    close = compute_C_close(bundle, mesh.T, c_xp_scale=c_xp_scale)
    bundle.C_xp_inf = close["C_xp_inf"]
    bundle.C_u_inf = close["C_u_inf"]
    bundle.C_close_inf = close["C_close_inf"]
    bundle.c_xp_scale = c_xp_scale
    bundle.formulas.update(
        {
            "C_geo": "lift * restrict / sigma_min(M_h)",
            "C_T": "c_Pi * exp(A_inf * T) * (1 + B_inf / rho)",
            "C_quad": qc["formula_C_quad"],
            "C_Tprime": qc["formula_C_Tprime"],
            "Gamma": "C_geo * L2",
            "Lambda": "C_int * (L21_H + M2f) + 2 * L21_K",
            "C_close": "C_xp + (H_ux + H_up) C_xp / rho + 1 / rho",
        }
    )
    if paper_constants:
        bundle.paper_constants = True
        bundle.C_geo = PAPER_CONSTANTS["C_geo"]
        bundle.Gamma = PAPER_CONSTANTS["Gamma"]
        bundle.Lambda = PAPER_CONSTANTS["Lambda"]
        bundle.C_close_inf = PAPER_CONSTANTS["C_close_inf"]
        bundle.C_T = PAPER_CONSTANTS["C_T"]
    bundle.Gamma_tot = bundle.Gamma + bundle.C_quad + bundle.C_Tprime
    return bundle
