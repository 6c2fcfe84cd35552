"""Dense linear algebra kernels for certification.

Backed by LAPACK through numpy/scipy; the functions here pin down the
contracts the rest of the package relies on (symmetry checks, rank checks,
inertia-revealing saddle factorization).
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import ConstraintQualificationError, ContractError


def _check_symmetric(A, tol=1e-10):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractError("matrix must be square")
    scale = max(1.0, float(np.max(np.abs(A))) if A.size else 0.0)
    if float(np.max(np.abs(A - A.T))) > tol * scale:
        raise ContractError("matrix is not symmetric within tolerance")
    return A


def sym_eig_min(A, sym_tol=1e-10) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    A = _check_symmetric(A, sym_tol)
    return float(np.linalg.eigvalsh(A)[0])


def sigma_min(A) -> float:
    """Smallest singular value of a dense matrix."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0
    return float(np.linalg.svd(A, compute_uv=False)[-1])


def nullspace_basis(J, rcond=1e-10) -> np.ndarray:
    """Orthonormal basis Z of the null space of a full-row-rank J.

    Raises :class:`ConstraintQualificationError` when J is rank deficient
    relative to ``rcond``.
    """
    J = np.asarray(J, dtype=float)
    n_c, n_z = J.shape
    if n_c == 0:
        return np.eye(n_z)
    U, s, Vt = np.linalg.svd(J, full_matrices=True)
    scale = max(1.0, s[0]) if s.size else 1.0
    if n_c > n_z or s.size < n_c or s[n_c - 1] <= rcond * scale:
        raise ConstraintQualificationError(
            "constraint Jacobian is rank deficient; strong regularity fails"
        )
    return Vt[n_c:].T.copy()


def kkt_matrix(W, J, delta=0.0) -> np.ndarray:
    """Assemble the symmetric saddle matrix [[W + delta I, J^T], [J, 0]]."""
    W = np.asarray(W, dtype=float)
    J = np.asarray(J, dtype=float)
    n_z = W.shape[0]
    n_c = J.shape[0]
    K = np.zeros((n_z + n_c, n_z + n_c))
    K[:n_z, :n_z] = W
    if delta:
        K[:n_z, :n_z] += delta * np.eye(n_z)
    K[:n_z, n_z:] = J.T
    K[n_z:, :n_z] = J
    return K


class LdlFactorization:
    """LDL^T factorization of a symmetric indefinite matrix with inertia."""

    def __init__(self, A, zero_pivot=1e-12):
        A = np.asarray(A, dtype=float)
        self.n = A.shape[0]
        lu, d, perm = scipy.linalg.ldl(A, lower=True)
        self._lu = lu
        self._d = d
        self._perm = perm
        scale = max(1.0, float(np.max(np.abs(d))))
        pos = neg = zero = 0
        eigs = []
        i = 0
        while i < self.n:
            if i + 1 < self.n and d[i + 1, i] != 0.0:
                eigs.extend(np.linalg.eigvalsh(d[i : i + 2, i : i + 2]))
                i += 2
            else:
                eigs.append(d[i, i])
                i += 1
        for e in eigs:
            if abs(e) <= zero_pivot * scale:
                zero += 1
            elif e > 0:
                pos += 1
            else:
                neg += 1
        self.inertia = (pos, neg, zero)
        self._block_eigs = eigs

    @property
    def singular(self):
        return self.inertia[2] > 0

    def solve(self, b):
        """Solve A x = b using the stored factors."""
        b = np.asarray(b, dtype=float)
        perm = self._perm
        L = self._lu[perm]
        y = scipy.linalg.solve_triangular(L, b[perm], lower=True)
        # block-diagonal solve
        d = self._d
        w = np.empty_like(y)
        i = 0
        while i < self.n:
            if i + 1 < self.n and d[i + 1, i] != 0.0:
                w[i : i + 2] = np.linalg.solve(d[i : i + 2, i : i + 2], y[i : i + 2])
                i += 2
            else:
                w[i] = y[i] / d[i, i]
                i += 1
        v = scipy.linalg.solve_triangular(L.T, w, lower=False)
        x = np.empty_like(v)
        x[perm] = v
        return x
