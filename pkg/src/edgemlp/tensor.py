"""Dense float32 numerics and a seeded random generator.

Matrices are plain ``numpy.ndarray`` objects (row-major, float32 by
default). The helpers here add the shape checks and the domain policy the
rest of the package relies on; the arithmetic itself is numpy's.

Domain policy: ``log`` of a non-positive value, ``sqrt`` of a negative
value, division by zero and ``exp`` overflow raise :class:`DomainError`
instead of returning NaN/Inf.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, DomainError, InvalidParameter

FLOAT = np.float32


def as_matrix(data, dtype=FLOAT) -> np.ndarray:
    m = np.asarray(data, dtype=dtype)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionMismatch(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def _same_shape(a, b):
    if np.shape(a) != np.shape(b):
        raise DimensionMismatch(f"shape {np.shape(a)} != {np.shape(b)}")


def elementwise(op: str, a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Apply a unary (relu, sqrt, exp, log) or binary (add, sub, mul, div, max) op."""
    a = np.asarray(a)
    if op in ("add", "sub", "mul", "div", "max"):
        if b is None:
            raise InvalidParameter(f"{op} needs two operands")
        b = np.asarray(b)
        _same_shape(a, b)
        if op == "add":
            return a + b
        if op == "sub":
            return a - b
        if op == "mul":
            return a * b
        if op == "max":
            return np.maximum(a, b)
        if np.any(b == 0):
            raise DomainError("division by zero")
        return a / b
    if op == "relu":
        return np.maximum(a, 0).astype(a.dtype, copy=False)
    if op == "sqrt":
        if np.any(a < 0):
            raise DomainError("sqrt of a negative value")
        return np.sqrt(a)
    if op == "log":
        if np.any(a <= 0):
            raise DomainError("log of a non-positive value")
        return np.log(a)
    if op == "exp":
        with np.errstate(over="ignore"):
            out = np.exp(a)
        if not np.all(np.isfinite(out)):
            raise DomainError("exp overflow")
        return out
    raise InvalidParameter(f"unknown elementwise op {op!r}")


def row_broadcast(op: str, m: np.ndarray, row: np.ndarray) -> np.ndarray:
    """Combine every row of ``m`` with ``row`` (length = number of columns)."""
    row = np.asarray(row)
    if m.ndim != 2 or row.shape != (m.shape[1],):
        raise DimensionMismatch(f"row of shape {row.shape} does not fit {m.shape}")
    if op == "div" and np.any(row == 0):
        raise DomainError("division by zero")
    ops = {"add": np.add, "sub": np.subtract, "mul": np.multiply, "div": np.divide,
           "max": np.maximum}
    if op not in ops:
        raise InvalidParameter(f"unknown broadcast op {op!r}")
    return ops[op](m, row[None, :])


def reduce(m: np.ndarray, op: str, axis: int = 0) -> np.ndarray:
    """Column-wise (axis=0) or row-wise (axis=1) reduction.

    ``var`` is the biased (population) variance. ``argmax`` breaks ties
    toward the lowest index.
    """
    m = np.asarray(m)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {m.shape}")
    if op == "sum":
        return m.sum(axis=axis)
    if op == "mean":
        return m.mean(axis=axis)
    if op == "var":
        return m.var(axis=axis)
    if op == "max":
        return m.max(axis=axis)
    if op == "argmax":
        return m.argmax(axis=axis)
    raise InvalidParameter(f"unknown reduction {op!r}")


def argmax_rows(m: np.ndarray) -> np.ndarray:
    return reduce(m, "argmax", axis=1)


class Rng:
    """Seeded Philox-4x64 counter-based generator.

    Philox is platform independent, so a given ``(seed, stream)`` pair
    reproduces the same draws everywhere. Independent streams (split,
    init, dropout, epoch shuffles) are derived from the same seed with
    distinct ``stream`` names.
    """

    def __init__(self, seed: int, stream: str = ""):
        if not 0 <= int(seed) < 2**64:
            raise InvalidParameter(f"seed must fit in 64 unsigned bits, got {seed}")
        self.seed = int(seed)
        self.stream = stream
        key = [self.seed & 0xFFFFFFFF, self.seed >> 32] + list(stream.encode())
        self._gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))

    def child(self, stream: str) -> "Rng":
        return Rng(self.seed, f"{self.stream}/{stream}" if self.stream else stream)

    def uniform(self, lo: float, hi: float, shape, dtype=FLOAT) -> np.ndarray:
        if not lo <= hi:
            raise InvalidParameter(f"uniform bounds out of order: {lo} > {hi}")
        return (lo + (hi - lo) * self._gen.random(shape)).astype(dtype)

    def normal(self, mu: float, sigma: float, shape, dtype=FLOAT) -> np.ndarray:
        if sigma < 0:
            raise InvalidParameter(f"sigma must be non-negative, got {sigma}")
        return self._gen.normal(mu, sigma, shape).astype(dtype)

    def bernoulli(self, p: float, shape) -> np.ndarray:
        """Boolean draws that are True with probability ``p``."""
        if not 0.0 <= p <= 1.0:
            raise InvalidParameter(f"probability must lie in [0, 1], got {p}")
        return self._gen.random(shape, dtype=np.float32) < p

    def shuffle(self, indices) -> np.ndarray:
        """Return a shuffled copy of ``indices`` (or of ``arange(indices)`` for an int)."""
        if isinstance(indices, (int, np.integer)):
            if indices < 0:
                raise InvalidParameter("cannot shuffle a negative count")
            return self._gen.permutation(int(indices))
        out = np.array(indices, copy=True)
        self._gen.shuffle(out)
        return out
