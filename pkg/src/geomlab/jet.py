"""Order-2 truncated multivariate Taylor arithmetic.

A :class:`Jet2` carries a value together with its gradient and Hessian with
respect to ``dim`` seed variables.  Every operation propagates the three
exactly (up to roundoff), so evaluating a closed-form expression on seeded
jets yields first and second partial derivatives without finite
differences.

The value part of every operation uses the same floating-point operation as
plain evaluation, so ``evaluate(e, seeds).value == evaluate(e, floats)``
bit for bit.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np


class DomainError(ArithmeticError):
    """Raised when an operation leaves its smooth domain."""


class Jet2:
    __slots__ = ("value", "grad", "hess")

    def __init__(self, value: float, grad: np.ndarray, hess: np.ndarray):
        hess = np.asarray(hess, dtype=float)
        self.value = float(value)
        self.grad = np.asarray(grad, dtype=float)
        self.hess = 0.5 * (hess + hess.T)

    @classmethod
    def _raw(cls, value: float, grad: np.ndarray, hess: np.ndarray) -> "Jet2":
        # internal results are symmetric already: skip the copy
        j = object.__new__(cls)
        j.value = float(value)
        j.grad = grad
        j.hess = hess
        return j

    @property
    def dim(self) -> int:
        return self.grad.shape[0]

    @classmethod
    def constant(cls, value: float, dim: int) -> "Jet2":
        return cls._raw(value, np.zeros(dim), np.zeros((dim, dim)))

    def __repr__(self):
        return f"Jet2(value={self.value!r}, grad={self.grad.tolist()!r})"

    def _lift(self, other) -> "Jet2":
        if isinstance(other, Jet2):
            if other.dim != self.dim:
                raise ValueError(f"jet dimension mismatch: {self.dim} vs {other.dim}")
            return other
        return Jet2.constant(float(other), self.dim)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, Jet2):
            return Jet2._raw(self.value + float(other), self.grad.copy(), self.hess.copy())
        o = self._lift(other)
        return Jet2._raw(self.value + o.value, self.grad + o.grad, self.hess + o.hess)

    def __radd__(self, other):
        return Jet2._raw(float(other) + self.value, self.grad.copy(), self.hess.copy())

    def __sub__(self, other):
        if not isinstance(other, Jet2):
            return Jet2._raw(self.value - float(other), self.grad.copy(), self.hess.copy())
        o = self._lift(other)
        return Jet2._raw(self.value - o.value, self.grad - o.grad, self.hess - o.hess)

    def __rsub__(self, other):
        return Jet2._raw(float(other) - self.value, -self.grad, -self.hess)

    def __neg__(self):
        return Jet2._raw(-self.value, -self.grad, -self.hess)

    def __mul__(self, other):
        if not isinstance(other, Jet2):
            c = float(other)
            return Jet2._raw(self.value * c, self.grad * c, self.hess * c)
        o = self._lift(other)
        a, b = self.value, o.value
        cross = np.outer(self.grad, o.grad)
        return Jet2._raw(
            a * b,
            a * o.grad + b * self.grad,
            a * o.hess + b * self.hess + (cross + cross.T),
        )

    def __rmul__(self, other):
        c = float(other)
        return Jet2._raw(c * self.value, c * self.grad, c * self.hess)

    def __truediv__(self, other):
        o = self._lift(other)
        if o.value == 0:
            raise DomainError("division by zero-valued jet")
        q = self.value / o.value
        grad = (self.grad - q * o.grad) / o.value
        cross = np.outer(o.grad, grad)
        hess = (self.hess - q * o.hess - (cross + cross.T)) / o.value
        return Jet2._raw(q, grad, hess)

    def __rtruediv__(self, other):
        return Jet2.constant(float(other), self.dim) / self

    # -- elementary functions ------------------------------------------------

    def _chain(self, f0: float, f1: float, f2: float) -> "Jet2":
        return Jet2._raw(f0, f1 * self.grad, f1 * self.hess + f2 * np.outer(self.grad, self.grad))

    def apply(self, op: str) -> "Jet2":
        """Apply a named unary function (``neg``, ``sqrt``, ``exp``, ...)."""
        x = self.value
        if op == "neg":
            return -self
        if op == "sqrt":
            if x <= 0:
                raise DomainError(f"sqrt of jet with value {x!r}")
            s = math.sqrt(x)
            return self._chain(s, 0.5 / s, -0.25 / (s * x))
        if op == "exp":
            try:
                e = math.exp(x)
            except OverflowError as exc:
                raise DomainError(f"exp overflow at {x!r}") from exc
            return self._chain(e, e, e)
        if op == "log":
            if x <= 0:
                raise DomainError(f"log of jet with value {x!r}")
            return self._chain(math.log(x), 1.0 / x, -1.0 / (x * x))
        if op == "sin":
            s, c = math.sin(x), math.cos(x)
            return self._chain(s, c, -s)
        if op == "cos":
            s, c = math.sin(x), math.cos(x)
            return self._chain(c, -s, -c)
        if op == "tanh":
            t = math.tanh(x)
            d = 1.0 - t * t
            return self._chain(t, d, -2.0 * t * d)
        if op == "abs":
            if x == 0:
                raise DomainError("abs of jet at 0 is not smooth")
            sign = 1.0 if x > 0 else -1.0
            return self._chain(abs(x), sign, 0.0)
        raise ValueError(f"unknown unary op {op!r}")

    def powc(self, c: float) -> "Jet2":
        """``self ** c`` for a constant exponent; requires a positive value."""
        x = self.value
        if x <= 0:
            raise DomainError(f"non-integer power of jet with value {x!r}")
        p = x**c
        return self._chain(p, c * x ** (c - 1.0), c * (c - 1.0) * x ** (c - 2.0))


def seed(point: Sequence[float], index: int) -> Jet2:
    """Jet of the coordinate function ``x[index]`` at ``point``."""
    m = len(point)
    if not 0 <= index < m:
        raise IndexError(f"seed index {index} out of range for dimension {m}")
    grad = np.zeros(m)
    grad[index] = 1.0
    return Jet2._raw(float(point[index]), grad, np.zeros((m, m)))


def seeds(point: Sequence[float]) -> list[Jet2]:
    return [seed(point, i) for i in range(len(point))]
