import numpy as np
import pytest
import scipy.linalg

import ssoc_certify as sc


@pytest.fixture(scope="session")
def lq_problem():
    return sc.builtin_problem("double-integrator-lq")


@pytest.fixture(scope="session")
def quad_problem():
    return sc.builtin_problem("quadrotor")


@pytest.fixture(scope="session")
def lq_run(lq_problem):
    mesh = sc.Mesh.uniform(lq_problem.T, 20)
    return sc.run_certification(lq_problem, mesh, "hermite-simpson")


@pytest.fixture(scope="session")
def quad_run(quad_problem):
    mesh = sc.Mesh.uniform(quad_problem.T, 35)
    return sc.run_certification(quad_problem, mesh, "hermite-simpson")


def lq_exact():
    """Closed-form primal-dual solution of the double-integrator benchmark.

    Solves the linear Hamiltonian boundary value problem with a matrix
    exponential; independent of any collocation machinery.
    """
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    B = np.array([[0.0], [1.0]])
    Q = np.eye(2)
    R = np.array([[1.0]])
    S_T = np.eye(2)
    T = 1.0
    x0 = np.array([1.0, 0.0])
    M = np.block([[A, -B @ np.linalg.inv(R) @ B.T], [-Q, -A.T]])
    PhiT = scipy.linalg.expm(M * T)
    p0 = np.linalg.solve(
        PhiT[2:, 2:] - S_T @ PhiT[:2, 2:], (S_T @ PhiT[:2, :2] - PhiT[2:, :2]) @ x0
    )
    w0 = np.concatenate([x0, p0])

    def evaluate(t):
        w = scipy.linalg.expm(M * t) @ w0
        x, p = w[:2], w[2:]
        u = -np.linalg.solve(R, B.T @ p)
        return x, p, u

    return evaluate


@pytest.fixture(scope="session")
def lq_oracle():
    return lq_exact()
