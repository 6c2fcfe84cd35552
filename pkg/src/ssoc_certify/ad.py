"""Second-order forward-mode automatic differentiation.

Values are truncated second-order Taylor expansions over a fixed set of
``d`` seed directions, batched over ``B`` evaluation points:

    val  : (B,)      function value
    grad : (B, d)    directional first derivatives
    hess : (B, d, d) directional second derivatives (symmetric)

Problem callbacks are written against the module-level helpers
(:func:`sin`, :func:`cos`, ...), which dispatch on the operand type so the
same callback runs on plain floats/arrays and on :class:`AdScalar2` values.
"""

from __future__ import annotations

import numpy as np


def _as_batch(value):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    return arr


class AdScalar2:
    """A batch of scalars carrying first and second derivative parts."""

    __slots__ = ("val", "grad", "hess")

    def __init__(self, val, grad, hess):
        self.val = val
        self.grad = grad
        self.hess = hess

    # -- constructors -----------------------------------------------------

    @classmethod
    def constant(cls, value, n_dirs, batch=None):
        val = _as_batch(value)
        if batch is not None and val.shape[0] == 1 and batch > 1:
            val = np.broadcast_to(val, (batch,)).copy()
        b = val.shape[0]
        return cls(val, np.zeros((b, n_dirs)), np.zeros((b, n_dirs, n_dirs)))

    @classmethod
    def variable(cls, value, index, n_dirs):
        val = _as_batch(value)
        b = val.shape[0]
        grad = np.zeros((b, n_dirs))
        grad[:, index] = 1.0
        return cls(val, grad, np.zeros((b, n_dirs, n_dirs)))

    @property
    def n_dirs(self):
        return self.grad.shape[1]

    @property
    def batch(self):
        return self.val.shape[0]

    def _lift(self, other):
        if isinstance(other, AdScalar2):
            return other
        return AdScalar2.constant(other, self.n_dirs, batch=self.batch)

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        o = self._lift(other)
        return AdScalar2(self.val + o.val, self.grad + o.grad, self.hess + o.hess)

    __radd__ = __add__

    def __neg__(self):
        return AdScalar2(-self.val, -self.grad, -self.hess)

    def __sub__(self, other):
        o = self._lift(other)
        return AdScalar2(self.val - o.val, self.grad - o.grad, self.hess - o.hess)

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        o = self._lift(other)
        val = self.val * o.val
        grad = self.grad * o.val[:, None] + o.grad * self.val[:, None]
        cross = np.einsum("bi,bj->bij", self.grad, o.grad)
        hess = (
            self.hess * o.val[:, None, None]
            + o.hess * self.val[:, None, None]
            + cross
            + np.swapaxes(cross, 1, 2)
        )
        return AdScalar2(val, grad, hess)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        return self * o._reciprocal()

    def __rtruediv__(self, other):
        return self._reciprocal() * other

    def __pow__(self, exponent):
        if not np.isscalar(exponent):
            raise TypeError("only scalar exponents are supported")
        e = float(exponent)
        return self._chain(
            self.val**e,
            e * self.val ** (e - 1.0),
            e * (e - 1.0) * self.val ** (e - 2.0),
        )

    def _reciprocal(self):
        inv = 1.0 / self.val
        return self._chain(inv, -(inv**2), 2.0 * inv**3)

    def _chain(self, f, fp, fpp):
        """Compose with a scalar function given value/1st/2nd derivative arrays."""
        grad = fp[:, None] * self.grad
        outer = np.einsum("bi,bj->bij", self.grad, self.grad)
        hess = fp[:, None, None] * self.hess + fpp[:, None, None] * outer
        return AdScalar2(f, grad, hess)


# -- elementary functions, dispatching on operand type ----------------------


def sin(x):
    if isinstance(x, AdScalar2):
        s, c = np.sin(x.val), np.cos(x.val)
        return x._chain(s, c, -s)
    return np.sin(x)


def cos(x):
    if isinstance(x, AdScalar2):
        s, c = np.sin(x.val), np.cos(x.val)
        return x._chain(c, -s, -c)
    return np.cos(x)


def exp(x):
    if isinstance(x, AdScalar2):
        e = np.exp(x.val)
        return x._chain(e, e, e)
    return np.exp(x)


def log(x):
    if isinstance(x, AdScalar2):
        inv = 1.0 / x.val
        return x._chain(np.log(x.val), inv, -(inv**2))
    return np.log(x)


def sqrt(x):
    if isinstance(x, AdScalar2):
        r = np.sqrt(x.val)
        return x._chain(r, 0.5 / r, -0.25 / (r * x.val))
    return np.sqrt(x)


def seed_vector(values, offset, n_dirs):
    """Turn the columns of ``values`` (B, k) into AD variables.

    Column ``i`` becomes the variable with seed direction ``offset + i``.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    return [
        AdScalar2.variable(values[:, i], offset + i, n_dirs)
        for i in range(values.shape[1])
    ]


def constant_vector(values, n_dirs, batch=None):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    return [
        AdScalar2.constant(values[:, i], n_dirs, batch=batch)
        for i in range(values.shape[1])
    ]


def value_of(x):
    """Plain value of an AD scalar or passthrough for arrays."""
    if isinstance(x, AdScalar2):
        return x.val
    return np.asarray(x, dtype=float)
