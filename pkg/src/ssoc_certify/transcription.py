"""Collocation transcription: decision vector, defects, Jacobian, Hessian.

Two schemes are supported:

* trapezoidal: states/controls at mesh nodes, one integrated defect per
  interval, trapezoid quadrature for the running cost;
* hermite-simpson (separated form): states/controls at nodes and interval
  midpoints, a Simpson defect plus a Hermite midpoint constraint per
  interval, Simpson quadrature for the running cost.

Boundary equations b(x_0, x_N) = 0 and, when the problem fixes the initial
state, the rows x_0 - x0 = 0 are appended after the interval constraints.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import model
from .errors import DimensionError, MeshError

TRAPEZOIDAL = "trapezoidal"
HERMITE_SIMPSON = "hermite-simpson"


@dataclass(frozen=True)
class Scheme:
    """Collocation scheme descriptor.

    ``degree`` is the state reconstruction degree (1 for trapezoidal, 3 for
    Hermite-Simpson); ``lebesgue`` the interpolation stability constant used
    by the certification bounds (2 covers piecewise linear and cubic Hermite).
    """

    kind: str
    degree: int
    lebesgue: float = 2.0

    def __post_init__(self):
        if self.degree < 1 or self.lebesgue < 1.0:
            raise DimensionError("scheme requires degree >= 1 and lebesgue >= 1")


SCHEMES = {
    TRAPEZOIDAL: Scheme(TRAPEZOIDAL, 1),
    HERMITE_SIMPSON: Scheme(HERMITE_SIMPSON, 3),
}


def parse_scheme(kind) -> Scheme:
    if isinstance(kind, Scheme):
        return kind
    try:
        return SCHEMES[kind]
    except KeyError:
        raise MeshError(
            f"unknown scheme {kind!r}; available: {', '.join(sorted(SCHEMES))}"
        ) from None


class Mesh:
    """Strictly increasing time nodes t_0 = 0 < ... < t_N = T."""

    def __init__(self, nodes):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise MeshError("mesh needs at least two nodes")
        if nodes[0] != 0.0:
            raise MeshError("mesh must start at t = 0")
        if np.any(np.diff(nodes) <= 0):
            raise MeshError("mesh nodes must be strictly increasing")
        self.nodes = nodes

    @classmethod
    def uniform(cls, T, n_intervals):
        if n_intervals < 1:
            raise MeshError("need at least one interval")
        return cls(np.linspace(0.0, float(T), n_intervals + 1))

    @property
    def T(self):
        return float(self.nodes[-1])

    @property
    def n_intervals(self):
        return self.nodes.size - 1

    @property
    def h(self):
        return np.diff(self.nodes)

    def bisect(self, interval_indices) -> "Mesh":
        """New mesh with the given intervals split at their midpoints."""
        extra = [
            0.5 * (self.nodes[k] + self.nodes[k + 1]) for k in interval_indices
        ]
        return Mesh(np.sort(np.concatenate([self.nodes, extra])))


@dataclass
class NlpLayout:
    """Index bookkeeping for the flat decision vector z and constraints c.

    Samples are time-ordered; each sample point carries an (n + m) block of
    states followed by controls. ``sample_times`` includes interval midpoints
    for Hermite-Simpson.
    """

    mesh: Mesh
    scheme: Scheme
    n: int
    m: int
    n_b: int
    fixed_x0: bool
    sample_times: np.ndarray
    n_z: int = field(init=False)
    n_c: int = field(init=False)

    def __post_init__(self):
        self.n_z = self.n_samples * (self.n + self.m)
        per_interval = self.n if self.scheme.kind == TRAPEZOIDAL else 2 * self.n
        self.n_c = (
            self.mesh.n_intervals * per_interval
            + self.n_b
            + (self.n if self.fixed_x0 else 0)
        )

    @property
    def n_samples(self):
        return self.sample_times.size

    @property
    def n_nodes(self):
        return self.mesh.n_intervals + 1

    def node_sample(self, k):
        """Sample index of mesh node k."""
        if self.scheme.kind == TRAPEZOIDAL:
            return k
        return 2 * k

    def mid_sample(self, k):
        """Sample index of the midpoint of interval k (Hermite-Simpson only)."""
        return 2 * k + 1

    def state_slice(self, j):
        base = j * (self.n + self.m)
        return slice(base, base + self.n)

    def control_slice(self, j):
        base = j * (self.n + self.m) + self.n
        return slice(base, base + self.m)

    def defect_rows(self, k):
        if self.scheme.kind == TRAPEZOIDAL:
            return slice(k * self.n, (k + 1) * self.n)
        return slice(2 * k * self.n, (2 * k + 1) * self.n)

    def hermite_rows(self, k):
        return slice((2 * k + 1) * self.n, (2 * k + 2) * self.n)

    @property
    def boundary_rows(self):
        per_interval = self.n if self.scheme.kind == TRAPEZOIDAL else 2 * self.n
        base = self.mesh.n_intervals * per_interval
        return slice(base, base + self.n_b)

    @property
    def x0_rows(self):
        per_interval = self.n if self.scheme.kind == TRAPEZOIDAL else 2 * self.n
        base = self.mesh.n_intervals * per_interval + self.n_b
        if not self.fixed_x0:
            return slice(base, base)
        return slice(base, base + self.n)

    def pack(self, X, U):
        """Stack sample states (S, n) and controls (S, m) into z."""
        X = np.asarray(X, dtype=float)
        U = np.asarray(U, dtype=float)
        if X.shape != (self.n_samples, self.n) or U.shape != (self.n_samples, self.m):
            raise DimensionError("pack: sample arrays have wrong shape")
        return np.hstack([X, U]).reshape(-1)

    def unpack(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape != (self.n_z,):
            raise DimensionError("unpack: z has wrong length")
        blocks = z.reshape(self.n_samples, self.n + self.m)
        return blocks[:, : self.n].copy(), blocks[:, self.n :].copy()


def assemble(prob: model.OcpProblem, mesh: Mesh, scheme) -> NlpLayout:
    """Build the NLP layout for a problem/mesh/scheme triple."""
    scheme = parse_scheme(scheme)
    if abs(mesh.T - prob.T) > 1e-12 * max(1.0, prob.T):
        raise MeshError("mesh horizon does not match the problem horizon")
    nodes = mesh.nodes
    if scheme.kind == TRAPEZOIDAL:
        times = nodes.copy()
    else:
        times = np.empty(2 * mesh.n_intervals + 1)
        times[0::2] = nodes
        times[1::2] = 0.5 * (nodes[:-1] + nodes[1:])
    return NlpLayout(
        mesh=mesh,
        scheme=scheme,
        n=prob.n,
        m=prob.m,
        n_b=prob.n_b,
        fixed_x0=prob.x0 is not None,
        sample_times=times,
    )


def quadrature_weights(layout: NlpLayout) -> np.ndarray:
    """Per-sample running-cost quadrature weights (sum equals T)."""
    h = layout.mesh.h
    w = np.zeros(layout.n_samples)
    if layout.scheme.kind == TRAPEZOIDAL:
        w[:-1] += 0.5 * h
        w[1:] += 0.5 * h
    else:
        for k in range(layout.mesh.n_intervals):
            w[layout.node_sample(k)] += h[k] / 6.0
            w[layout.mid_sample(k)] += 4.0 * h[k] / 6.0
            w[layout.node_sample(k + 1)] += h[k] / 6.0
    return w


def eval_objective(prob, layout, z) -> float:
    X, U = layout.unpack(z)
    w = quadrature_weights(layout)
    L = model.running_cost_batch(prob, layout.sample_times, X, U)
    ept = model.eval_endpoint_terms(prob, X[0], X[-1])
    return float(np.dot(w, L) + ept.K)


def eval_objective_gradient(prob, layout, z) -> np.ndarray:
    X, U = layout.unpack(z)
    w = quadrature_weights(layout)
    _, Lg = model.running_cost_batch(prob, layout.sample_times, X, U, order=1)
    g = (w[:, None] * Lg).reshape(-1)
    ept = model.eval_endpoint_terms(prob, X[0], X[-1])
    g[layout.state_slice(0)] += ept.K_x0
    g[layout.state_slice(layout.n_samples - 1)] += ept.K_xT
    return g


def eval_defects(prob, layout, z) -> np.ndarray:
    """All equality constraints at z (defects, boundary, fixed initial state)."""
    X, U = layout.unpack(z)
    F = model.dynamics_batch(prob, layout.sample_times, X, U)
    c = np.zeros(layout.n_c)
    h = layout.mesh.h
    N = layout.mesh.n_intervals
    if layout.scheme.kind == TRAPEZOIDAL:
        for k in range(N):
            c[layout.defect_rows(k)] = (
                X[k + 1] - X[k] - 0.5 * h[k] * (F[k] + F[k + 1])
            )
    else:
        for k in range(N):
            a, mid, b = (
                layout.node_sample(k),
                layout.mid_sample(k),
                layout.node_sample(k + 1),
            )
            c[layout.defect_rows(k)] = (
                X[b] - X[a] - h[k] / 6.0 * (F[a] + 4.0 * F[mid] + F[b])
            )
            c[layout.hermite_rows(k)] = (
                X[mid] - 0.5 * (X[a] + X[b]) - h[k] / 8.0 * (F[a] - F[b])
            )
    if layout.n_b > 0 or layout.fixed_x0:
        ept = model.eval_endpoint_terms(prob, X[0], X[-1])
        if layout.n_b > 0:
            c[layout.boundary_rows] = ept.b
        if layout.fixed_x0:
            c[layout.x0_rows] = X[0] - prob.x0
    return c


def eval_constraint_jacobian(prob, layout, z) -> np.ndarray:
    """Dense Jacobian of :func:`eval_defects` (n_c x n_z)."""
    X, U = layout.unpack(z)
    _, Fx, Fu = model.dynamics_batch(prob, layout.sample_times, X, U, order=1)
    J = np.zeros((layout.n_c, layout.n_z))
    h = layout.mesh.h
    N = layout.mesh.n_intervals
    n = layout.n
    eye = np.eye(n)

    def put(rows, j, dFx, dFu, shift):
        J[rows, layout.state_slice(j)] += shift + dFx
        J[rows, layout.control_slice(j)] += dFu

    if layout.scheme.kind == TRAPEZOIDAL:
        for k in range(N):
            rows = layout.defect_rows(k)
            put(rows, k, -0.5 * h[k] * Fx[k], -0.5 * h[k] * Fu[k], -eye)
            put(rows, k + 1, -0.5 * h[k] * Fx[k + 1], -0.5 * h[k] * Fu[k + 1], eye)
    else:
        for k in range(N):
            a, mid, b = (
                layout.node_sample(k),
                layout.mid_sample(k),
                layout.node_sample(k + 1),
            )
            rows = layout.defect_rows(k)
            put(rows, a, -h[k] / 6.0 * Fx[a], -h[k] / 6.0 * Fu[a], -eye)
            put(rows, mid, -4.0 * h[k] / 6.0 * Fx[mid], -4.0 * h[k] / 6.0 * Fu[mid], 0.0)
            put(rows, b, -h[k] / 6.0 * Fx[b], -h[k] / 6.0 * Fu[b], eye)
            rows = layout.hermite_rows(k)
            put(rows, a, -h[k] / 8.0 * Fx[a], -h[k] / 8.0 * Fu[a], -0.5 * eye)
            put(rows, mid, np.zeros((n, n)), np.zeros((n, layout.m)), eye)
            put(rows, b, h[k] / 8.0 * Fx[b], h[k] / 8.0 * Fu[b], -0.5 * eye)
    if layout.n_b > 0 or layout.fixed_x0:
        ept = model.eval_endpoint_terms(prob, X[0], X[-1])
        if layout.n_b > 0:
            J[layout.boundary_rows, layout.state_slice(0)] = ept.b_x0
            J[layout.boundary_rows, layout.state_slice(layout.n_samples - 1)] = ept.b_xT
        if layout.fixed_x0:
            J[layout.x0_rows, layout.state_slice(0)] = eye
    return J


def collocation_jacobian(prob, layout, z) -> np.ndarray:
    """Jacobian of the collocation equations in compressed form.

    For Hermite-Simpson the midpoint states are eliminated through the
    Hermite relation, leaving one defect row block per interval over node
    states and all control samples; trapezoidal is already node-based.
    Boundary and fixed-initial-state rows are kept.  This is the matrix
    whose smallest singular value feeds the geometric constant.
    """
    J = eval_constraint_jacobian(prob, layout, z)
    if layout.scheme.kind == TRAPEZOIDAL:
        return J
    blocks = []
    for k in range(layout.mesh.n_intervals):
        simpson = J[layout.defect_rows(k)].copy()
        hermite = J[layout.hermite_rows(k)]
        mid_cols = layout.state_slice(layout.mid_sample(k))
        simpson -= simpson[:, mid_cols] @ hermite
        blocks.append(simpson)
    blocks.append(J[layout.boundary_rows])
    blocks.append(J[layout.x0_rows])
    Jc = np.vstack(blocks)
    keep = np.ones(layout.n_z, dtype=bool)
    for k in range(layout.mesh.n_intervals):
        keep[layout.state_slice(layout.mid_sample(k))] = False
    return Jc[:, keep]


def split_multipliers(layout: NlpLayout, nu_all):
    """Split the raw multiplier vector into (defect part, lambda, eta)."""
    nu_all = np.asarray(nu_all, dtype=float)
    if nu_all.shape != (layout.n_c,):
        raise DimensionError("multiplier vector has wrong length")
    lam = nu_all[layout.boundary_rows]
    eta = nu_all[layout.x0_rows]
    per_interval = layout.n if layout.scheme.kind == TRAPEZOIDAL else 2 * layout.n
    return nu_all[: layout.mesh.n_intervals * per_interval], lam, eta


def sample_multipliers(layout: NlpLayout, nu_all) -> np.ndarray:
    """Accumulated dynamics multiplier s_j for every sample point.

    s_j collects the coefficients with which f(t_j, x_j, u_j) enters the
    constraint rows, weighted by the corresponding multipliers.  It drives
    both the Hessian assembly and the per-point costate scaling: the
    stationarity costate at sample j is s_j / w_j with w_j the running-cost
    quadrature weight.
    """
    nu_defect, _, _ = split_multipliers(layout, nu_all)
    h = layout.mesh.h
    N = layout.mesh.n_intervals
    S = np.zeros((layout.n_samples, layout.n))
    if layout.scheme.kind == TRAPEZOIDAL:
        nu = nu_defect.reshape(N, layout.n)
        for k in range(N):
            S[k] += -0.5 * h[k] * nu[k]
            S[k + 1] += -0.5 * h[k] * nu[k]
    else:
        nu = nu_defect.reshape(N, 2, layout.n)
        for k in range(N):
            sim, her = nu[k, 0], nu[k, 1]
            a, mid, b = (
                layout.node_sample(k),
                layout.mid_sample(k),
                layout.node_sample(k + 1),
            )
            S[a] += -h[k] / 6.0 * sim - h[k] / 8.0 * her
            S[mid] += -4.0 * h[k] / 6.0 * sim
            S[b] += -h[k] / 6.0 * sim + h[k] / 8.0 * her
    return S


def eval_lagrangian_hessian(prob, layout, z, nu_all, lam=None) -> np.ndarray:
    """Hessian of objective + nu.c over z; symmetric dense (n_z x n_z)."""
    X, U = layout.unpack(z)
    if lam is None:
        _, lam, _ = split_multipliers(layout, nu_all)
    w = quadrature_weights(layout)
    S = sample_multipliers(layout, nu_all)
    _, _, _, Hf = model.dynamics_batch(prob, layout.sample_times, X, U, order=2)
    _, _, Lh = model.running_cost_batch(prob, layout.sample_times, X, U, order=2)
    blocks = w[:, None, None] * Lh + np.einsum("bi,bijk->bjk", S, Hf)
    W = np.zeros((layout.n_z, layout.n_z))
    nm = layout.n + layout.m
    for j in range(layout.n_samples):
        base = j * nm
        W[base : base + nm, base : base + nm] += blocks[j]
    ept = model.eval_endpoint_terms(prob, X[0], X[-1], lam)
    first = layout.state_slice(0)
    last = layout.state_slice(layout.n_samples - 1)
    n = layout.n
    W[first, first] += ept.lagr_hess[:n, :n]
    W[last, last] += ept.lagr_hess[n:, n:]
    W[first, last] += ept.lagr_hess[:n, n:]
    W[last, first] += ept.lagr_hess[n:, :n]
    return W


@dataclass
class DiscreteKkt:
    """Discrete primal-dual point produced by the solver.

    ``p_station`` holds the per-sample stationarity costates (raw multiplier
    combinations divided by quadrature weights); ``p_nodes`` the consistent
    node costates used for the continuous reconstruction.  The terminal node
    costate satisfies the endpoint transversality relation up to the solve
    tolerance before anchoring.
    """

    layout: NlpLayout
    z: np.ndarray
    x: np.ndarray  # (S, n) sample states
    u: np.ndarray  # (S, m) sample controls
    nu: np.ndarray  # raw multiplier vector, length n_c
    lam: np.ndarray  # (n_b,)
    eta: np.ndarray  # fixed-initial-state multipliers, (n,) or (0,)
    p_station: np.ndarray  # (S, n)
    p_nodes: np.ndarray  # (N+1, n)
    costate_jump: float  # max left/right disagreement of node costates
    converged: bool

    @property
    def mesh(self):
        return self.layout.mesh

    @property
    def scheme(self):
        return self.layout.scheme
