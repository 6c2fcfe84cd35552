"""Globalized Newton-KKT (SQP) solver for the collocation NLP."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import reconstruction, transcription
from .errors import SolverBreakdownError
from .numerics import LdlFactorization, kkt_matrix


@dataclass
class SolverOptions:
    kkt_tolerance: float = 1e-12
    max_iterations: int = 200
    delta0: float = 1e-8
    delta_max: float = 1e6
    armijo: float = 1e-4
    backtrack: float = 0.5
    penalty_margin: float = 1.1
    polish_steps: int = 3

    def __post_init__(self):
        if self.kkt_tolerance <= 0 or self.max_iterations < 1:
            raise ValueError("tolerance must be positive and max_iterations >= 1")


@dataclass
class SolveReport:
    iterations: int
    kkt_residual: float
    constraint_residual: float
    converged: bool
    delta_final: float
    guess: str
    merit_history: list = field(default_factory=list)

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "kkt_residual": self.kkt_residual,
            "constraint_residual": self.constraint_residual,
            "converged": self.converged,
            "delta_final": self.delta_final,
            "guess": self.guess,
        }


def newton_step(W, J, grad, c, delta=0.0, delta0=1e-8, delta_max=1e6):
    """One regularized saddle solve.

    Solves [[W + dI, J^T], [J, 0]] [dz; nu] = -[grad; c] starting from
    d = delta.  When the LDL^T factorization reports wrong inertia or a
    singular pivot, d is raised to delta0 and then escalated by factors of
    10; past delta_max the step is declared a breakdown.

    Returns (dz, nu, delta_used).
    """
    W = np.asarray(W, dtype=float)
    J = np.asarray(J, dtype=float)
    n_z, n_c = W.shape[0], J.shape[0]
    rhs = -np.concatenate([np.asarray(grad, dtype=float), np.asarray(c, dtype=float)])
    d = float(delta)
    while True:
        fact = LdlFactorization(kkt_matrix(W, J, d))
        if not fact.singular and fact.inertia[0] == n_z and fact.inertia[1] == n_c:
            sol = fact.solve(rhs)
            return sol[:n_z], sol[n_z:], d
        d = delta0 if d == 0.0 else d * 10.0
        if d > delta_max:
            raise SolverBreakdownError(
                "KKT system singular or indefinite after maximal regularization"
            )


def default_initial_guess(prob, layout):
    """Linear state interpolation toward the target, constant control guess."""
    times = layout.sample_times
    x_start = prob.x0 if prob.x0 is not None else np.zeros(prob.n)
    x_end = prob.x_target if prob.x_target is not None else x_start
    tau = (times / prob.T)[:, None]
    X = (1.0 - tau) * x_start[None, :] + tau * x_end[None, :]
    u_const = prob.u_guess if prob.u_guess is not None else np.zeros(prob.m)
    U = np.tile(u_const, (layout.n_samples, 1))
    return layout.pack(X, U)


def solve(prob, mesh, scheme, options: Optional[SolverOptions] = None, initial_guess=None):
    """Solve the collocation NLP to a discrete KKT point.

    Returns (DiscreteKkt, SolveReport).  After reaching the tolerance a few
    plain Newton polish steps are taken while they keep shrinking the max
    KKT residual, so converged points sit as close to the round-off floor as
    the problem allows.  The discrete point is returned even when the
    tolerance was not met (flagged in the report); certification refuses
    non-converged inputs.
    """
    options = options or SolverOptions()
    layout = transcription.assemble(prob, mesh, scheme)
    if initial_guess is None:
        z = default_initial_guess(prob, layout)
        guess_kind = "linear-interpolation"
    else:
        z = np.asarray(initial_guess, dtype=float).copy()
        guess_kind = "user"
    nu = np.zeros(layout.n_c)
    sigma = 1.0
    delta_used = 0.0
    merit_history = []

    def kkt_state(z, nu):
        g = transcription.eval_objective_gradient(prob, layout, z)
        c = transcription.eval_defects(prob, layout, z)
        J = transcription.eval_constraint_jacobian(prob, layout, z)
        res = max(
            float(np.max(np.abs(g + J.T @ nu))),
            float(np.max(np.abs(c))) if c.size else 0.0,
        )
        return g, c, J, res

    g, c, J, res = kkt_state(z, nu)
    iterations = 0

    while res > options.kkt_tolerance and iterations < options.max_iterations:
        iterations += 1
        W = transcription.eval_lagrangian_hessian(prob, layout, z, nu)
        dz, nu_new, delta_used = newton_step(
            W, J, g, c, 0.0, options.delta0, options.delta_max
        )
        sigma = max(sigma, options.penalty_margin * float(np.max(np.abs(nu_new), initial=0.0)))
        f0 = transcription.eval_objective(prob, layout, z)
        theta0 = float(np.sum(np.abs(c)))
        merit0 = f0 + sigma * theta0
        slope = float(g @ dz) - sigma * theta0
        alpha = 1.0
        while alpha >= 1e-12:
            z_trial = z + alpha * dz
            f_t = transcription.eval_objective(prob, layout, z_trial)
            theta_t = float(np.sum(np.abs(transcription.eval_defects(prob, layout, z_trial))))
            merit_t = f_t + sigma * theta_t
            if merit_t <= merit0 + options.armijo * alpha * slope + 1e-14 * max(1.0, abs(merit0)):
                break
            alpha *= options.backtrack
        if alpha < 1e-12:
            break  # merit stalled; report non-convergence below
        merit_history.append(merit_t)
        z = z + alpha * dz
        nu = nu_new
        g, c, J, res = kkt_state(z, nu)

    converged = res <= options.kkt_tolerance
    if converged:
        # push the residual toward the round-off floor, but stay proportional
        # to the requested tolerance so loose solves stay loose
        floor = options.kkt_tolerance * 1e-3
        for _ in range(options.polish_steps):
            if res <= floor:
                break
            W = transcription.eval_lagrangian_hessian(prob, layout, z, nu)
            try:
                dz, nu_new, _ = newton_step(W, J, g, c, 0.0, options.delta0, options.delta_max)
            except SolverBreakdownError:
                break
            g_t, c_t, J_t, res_t = kkt_state(z + dz, nu_new)
            if res_t < res:
                z = z + dz
                nu = nu_new
                g, c, J, res = g_t, c_t, J_t, res_t
            else:
                break

    report = SolveReport(
        iterations=iterations,
        kkt_residual=float(np.max(np.abs(g + J.T @ nu))),
        constraint_residual=float(np.max(np.abs(c))) if c.size else 0.0,
        converged=converged,
        delta_final=delta_used,
        guess=guess_kind,
        merit_history=merit_history,
    )
    X, U = layout.unpack(z)
    _, lam, eta = transcription.split_multipliers(layout, nu)
    p_station, p_nodes, jump = reconstruction.extract_costates(prob, layout, z, nu)
    dkkt = transcription.DiscreteKkt(
        layout=layout,
        z=z,
        x=X,
        u=U,
        nu=nu,
        lam=lam,
        eta=eta,
        p_station=p_station,
        p_nodes=p_nodes,
        costate_jump=jump,
        converged=converged,
    )
    return dkkt, report
