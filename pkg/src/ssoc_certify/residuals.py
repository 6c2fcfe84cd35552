"""Continuous KKT residuals of a reconstruction.

Two flavors are computed:

* dense-grid: composite Gauss-Legendre quadrature of the squared pointwise
  residuals over the reconstruction, split at control breakpoints so every
  quadrature cell sees a smooth integrand.  This is the physically
  meaningful L2 defect of the interpolant and drives mesh refinement.
* node-sampled: the same residuals evaluated at the collocation points with
  the scheme's own quadrature weights and the per-point stationarity
  costates.  At a converged solve these sit at the round-off floor; this is
  the quantity the scalar acceptance test consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import model, transcription
from .errors import DimensionError


@dataclass
class ResidualReport:
    # dense-grid L2 aggregate (Gauss-Legendre over the reconstruction)
    e_dyn_L2: float
    e_stat_L2: float
    e_bc: float
    E_N2: float
    # node-sampled aggregate (collocation points, scheme weights)
    e_dyn_node_L2: float
    e_stat_node_L2: float
    E_N2_node: float
    kkt_node_inf: float
    # sup-norm indicators (dense sampling)
    e_dyn_inf: float
    e_adj_inf: float
    e_stat_inf: float
    E_inf: float  # includes the adjoint residual
    E_inf_basic: float  # dynamics + stationarity + boundary only
    # diagnostics
    e_bc_weighted: Optional[float]
    per_interval: list  # (k, local dyn L2, local stat L2)
    quad_points: int
    inf_samples_per_cell: int

    def to_dict(self):
        d = {
            k: getattr(self, k)
            for k in (
                "e_dyn_L2",
                "e_stat_L2",
                "e_bc",
                "E_N2",
                "e_dyn_node_L2",
                "e_stat_node_L2",
                "E_N2_node",
                "kkt_node_inf",
                "e_dyn_inf",
                "e_adj_inf",
                "e_stat_inf",
                "E_inf",
                "E_inf_basic",
                "e_bc_weighted",
                "quad_points",
                "inf_samples_per_cell",
            )
        }
        d["per_interval"] = [
            {"interval": int(k), "dyn_l2": dy, "stat_l2": st}
            for (k, dy, st) in self.per_interval
        ]
        return d


def _quadrature_cells(rec):
    """Per-cell (interval index, left, right); cells split at control kinks."""
    cells = []
    breaks = rec.U.breaks
    nodes = rec.mesh.nodes
    for i in range(breaks.size - 1):
        left, right = breaks[i], breaks[i + 1]
        k = int(np.searchsorted(nodes, left, side="right") - 1)
        k = min(max(k, 0), nodes.size - 2)
        cells.append((k, left, right))
    return cells


def compute_residuals(prob, rec, quad_points_per_interval: int = 5) -> ResidualReport:
    """Evaluate all residual aggregates of a reconstruction."""
    if quad_points_per_interval < 3:
        raise DimensionError("need at least 3 quadrature points per interval")
    n_inf = 21

    cells = _quadrature_cells(rec)
    gl_x, gl_w = np.polynomial.legendre.leggauss(quad_points_per_interval)
    # quadrature grid over all cells
    t_quad = []
    w_quad = []
    cell_of = []
    for idx, (k, a, b) in enumerate(cells):
        half = 0.5 * (b - a)
        t_quad.append(0.5 * (a + b) + half * gl_x)
        w_quad.append(half * gl_w)
        cell_of.extend([idx] * quad_points_per_interval)
    t_quad = np.concatenate(t_quad)
    w_quad = np.concatenate(w_quad)
    cell_of = np.asarray(cell_of)

    def pointwise(t):
        Xv = rec.X.eval(t)
        Uv = rec.U.eval(t)
        Pv = rec.P.eval(t)
        dXv = rec.X.eval_derivative(t)
        dPv = rec.P.eval_derivative(t)
        F = model.dynamics_batch(prob, t, Xv, Uv)
        hb = model.hamiltonian_batch(prob, t, Xv, Uv, Pv)
        r_dyn = dXv - F
        r_stat = hb.H_u
        r_adj = -dPv - hb.H_x
        return r_dyn, r_stat, r_adj

    r_dyn_q, r_stat_q, _ = pointwise(t_quad)
    dyn_sq = np.einsum("b,bi->b", w_quad, r_dyn_q**2)
    stat_sq = np.einsum("b,bi->b", w_quad, r_stat_q**2)

    n_cells = len(cells)
    dyn_cell = np.zeros(n_cells)
    stat_cell = np.zeros(n_cells)
    np.add.at(dyn_cell, cell_of, dyn_sq)
    np.add.at(stat_cell, cell_of, stat_sq)
    N = rec.mesh.n_intervals
    dyn_int = np.zeros(N)
    stat_int = np.zeros(N)
    for idx, (k, _, _) in enumerate(cells):
        dyn_int[k] += dyn_cell[idx]
        stat_int[k] += stat_cell[idx]
    per_interval = [
        (k, math.sqrt(dyn_int[k]), math.sqrt(stat_int[k])) for k in range(N)
    ]
    e_dyn_L2 = math.sqrt(float(np.sum(dyn_int)))
    e_stat_L2 = math.sqrt(float(np.sum(stat_int)))

    # sup norms on quadrature points plus uniform samples per cell
    t_inf = [t_quad]
    for (_, a, b) in cells:
        t_inf.append(np.linspace(a, b, n_inf))
    t_inf = np.unique(np.concatenate(t_inf))
    r_dyn_i, r_stat_i, r_adj_i = pointwise(t_inf)
    e_dyn_inf = float(np.max(np.abs(r_dyn_i)))
    e_stat_inf = float(np.max(np.abs(r_stat_i)))
    e_adj_inf = float(np.max(np.abs(r_adj_i)))

    # boundary residuals
    x0v = rec.X.eval(0.0)
    xTv = rec.X.eval(rec.T)
    ept = model.eval_endpoint_terms(prob, x0v, xTv, rec.lam)
    e_bc = float(np.linalg.norm(ept.b))
    if prob.x0 is not None:
        e_bc += float(np.linalg.norm(x0v - prob.x0))
    e_bc_weighted = None
    if prob.x0 is not None and prob.x_target is not None:
        n = prob.n
        k_tt = ept.K_hess[n:, n:]
        dxT = xTv - prob.x_target
        e_bc_weighted = float(
            np.linalg.norm(x0v - prob.x0) + math.sqrt(max(dxT @ k_tt @ dxT, 0.0))
        )

    # node-sampled residuals with the per-point stationarity costates
    t_nodes = rec.sample_times
    Xs, Us, Ps = rec.x_samples, rec.u_samples, rec.p_station
    dXs = rec.X.eval_derivative(t_nodes)
    Fs = model.dynamics_batch(prob, t_nodes, Xs, Us)
    hbs = model.hamiltonian_batch(prob, t_nodes, Xs, Us, Ps)
    r_dyn_n = dXs - Fs
    r_stat_n = hbs.H_u
    w_nodes = transcription_weights(rec)
    e_dyn_node = math.sqrt(float(np.einsum("b,bi->", w_nodes, r_dyn_n**2)))
    e_stat_node = math.sqrt(float(np.einsum("b,bi->", w_nodes, r_stat_n**2)))
    kkt_node_inf = max(
        float(np.max(np.abs(r_dyn_n))), float(np.max(np.abs(r_stat_n))), e_bc
    )

    E_N2 = e_dyn_L2 + e_stat_L2 + e_bc
    E_N2_node = e_dyn_node + e_stat_node + e_bc
    E_inf_basic = e_dyn_inf + e_stat_inf + e_bc
    E_inf = e_dyn_inf + e_adj_inf + e_stat_inf + e_bc
    return ResidualReport(
        e_dyn_L2=e_dyn_L2,
        e_stat_L2=e_stat_L2,
        e_bc=e_bc,
        E_N2=E_N2,
        e_dyn_node_L2=e_dyn_node,
        e_stat_node_L2=e_stat_node,
        E_N2_node=E_N2_node,
        kkt_node_inf=kkt_node_inf,
        e_dyn_inf=e_dyn_inf,
        e_adj_inf=e_adj_inf,
        e_stat_inf=e_stat_inf,
        E_inf=E_inf,
        E_inf_basic=E_inf_basic,
        e_bc_weighted=e_bc_weighted,
        per_interval=per_interval,
        quad_points=quad_points_per_interval,
        inf_samples_per_cell=n_inf,
    )


def transcription_weights(rec) -> np.ndarray:
    """Scheme quadrature weights aligned with the reconstruction samples."""
    h = rec.mesh.h
    S = rec.sample_times.size
    w = np.zeros(S)
    if rec.scheme.kind == transcription.TRAPEZOIDAL:
        w[:-1] += 0.5 * h
        w[1:] += 0.5 * h
    else:
        for k in range(rec.mesh.n_intervals):
            w[2 * k] += h[k] / 6.0
            w[2 * k + 1] += 4.0 * h[k] / 6.0
            w[2 * k + 2] += h[k] / 6.0
    return w


def residual_relation_check(report: ResidualReport, T: float) -> bool:
    """Check E_N2 <= sqrt(T) * E_inf + e_bc (basic sup indicator)."""
    return report.E_N2 <= math.sqrt(T) * report.E_inf_basic + report.e_bc + 1e-12


def worst_intervals(report: ResidualReport, fraction: float):
    """Indices of the ceil(q*N) intervals with the largest local residual.

    Sorted by decreasing local squared residual; ties break toward the lower
    interval index.
    """
    if not 0.0 < fraction <= 1.0:
        raise DimensionError("fraction must lie in (0, 1]")
    scores = [(dy * dy + st * st) for (_, dy, st) in report.per_interval]
    count = math.ceil(fraction * len(scores))
    order = sorted(range(len(scores)), key=lambda k: (-scores[k], k))
    return order[:count]
