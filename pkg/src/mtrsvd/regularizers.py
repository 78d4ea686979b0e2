"""Banded derivative regularizers and the projected operator ``L (I - Vk Vk^T)``.

Both are :class:`scipy.sparse.linalg.LinearOperator` subclasses, so they work
with ``@``, ``.T`` and ``.matvec``/``.rmatvec`` as well as the
``apply``/``apply_transpose`` names used throughout this package.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

STENCILS = {
    "L1": [(1.0, -1.0)],
    "L2": [(-1.0, 2.0, -1.0)],
    "L3": [(1.0, -1.0), (-1.0, 2.0, -1.0)],
}
KINDS = ("L1", "L2", "L3", "identity")


class _ApplyMixin:
    def apply(self, x):
        return self.matvec(x)

    def apply_transpose(self, y):
        return self.rmatvec(y)


class BandedOperator(_ApplyMixin, LinearOperator):
    """Vertical stack of Toeplitz difference stencils acting on ``R^n``.

    A block with stencil ``(c_0, ..., c_w)`` has ``n - w`` rows and maps
    ``x`` to ``y_i = sum_j c_j x_{i+j}``. Both products cost ``O(n)``.
    """

    def __init__(self, n: int, stencils, kind: str = "custom"):
        self.n = int(n)
        self.kind = kind
        self.stencils = [tuple(float(c) for c in s) for s in stencils]
        self.block_rows = [self.n - len(s) + 1 for s in self.stencils]
        if any(r < 1 for r in self.block_rows):
            raise ValueError(f"invalid dimension: n={n} too small for stencil")
        super().__init__(dtype=np.float64, shape=(sum(self.block_rows), self.n))
        # ||L||_2 <= sqrt(||L||_1 ||L||_inf)
        row_sums = [sum(abs(c) for c in s) for s in self.stencils]
        self.norm_hint = float(np.sqrt(sum(row_sums) * max(row_sums)))

    @property
    def bands(self):
        """``(row_offset, column_offset, coefficient)`` for every stored diagonal."""
        out, r0 = [], 0
        for s, rows in zip(self.stencils, self.block_rows):
            out.extend((r0, j, c) for j, c in enumerate(s))
            r0 += rows
        return out

    def _matvec(self, x):
        x = np.ravel(x)
        parts = []
        for s, rows in zip(self.stencils, self.block_rows):
            y = s[0] * x[:rows]
            for j in range(1, len(s)):
                y = y + s[j] * x[j:j + rows]
            parts.append(y)
        return parts[0] if len(parts) == 1 else np.concatenate(parts)

    def _rmatvec(self, y):
        y = np.ravel(y)
        z = np.zeros(self.n, dtype=np.result_type(y, np.float64))
        r0 = 0
        for s, rows in zip(self.stencils, self.block_rows):
            yb = y[r0:r0 + rows]
            for j, c in enumerate(s):
                z[j:j + rows] += c * yb
            r0 += rows
        return z

    def _adjoint(self):
        return _Transposed(self)

    def tosparse(self) -> sp.csr_matrix:
        blocks = []
        for s, rows in zip(self.stencils, self.block_rows):
            blocks.append(sp.diags(list(s), list(range(len(s))), shape=(rows, self.n)))
        return sp.vstack(blocks).tocsr()

    def toarray(self) -> np.ndarray:
        return self.tosparse().toarray()


class IdentityOperator(_ApplyMixin, LinearOperator):
    def __init__(self, n: int):
        self.n = int(n)
        self.kind = "identity"
        self.norm_hint = 1.0
        super().__init__(dtype=np.float64, shape=(self.n, self.n))

    def _matvec(self, x):
        return np.array(np.ravel(x), dtype=float)

    _rmatvec = _matvec

    def _adjoint(self):
        return self

    def toarray(self):
        return np.eye(self.n)


class _Transposed(LinearOperator):
    def __init__(self, op):
        self.op = op
        super().__init__(dtype=op.dtype, shape=(op.shape[1], op.shape[0]))

    def _matvec(self, x):
        return self.op.rmatvec(x)

    def _rmatvec(self, y):
        return self.op.matvec(y)

    def _adjoint(self):
        return self.op


def build_regularizer(kind: str, n: int):
    """Regularization matrix ``L1`` ((n-1) x n), ``L2`` ((n-2) x n), ``L3 = [L1; L2]`` or identity."""
    if n < 3:
        raise ValueError(f"invalid dimension: n={n} < 3")
    if kind == "identity":
        return IdentityOperator(n)
    try:
        stencils = STENCILS[kind]
    except KeyError:
        raise ValueError(f"unknown regularizer kind {kind!r}; expected one of {KINDS}") from None
    return BandedOperator(n, stencils, kind=kind)


def as_dense(op) -> np.ndarray:
    if hasattr(op, "toarray"):
        return np.asarray(op.toarray(), dtype=float)
    return np.asarray(op @ np.eye(op.shape[1]), dtype=float)


class ProjectedRegularizer(_ApplyMixin, LinearOperator):
    """``L (I - Vk Vk^T)`` applied without forming the dense product."""

    def __init__(self, L, Vk):
        Vk = np.asarray(Vk, dtype=float)
        if Vk.ndim != 2:
            Vk = Vk.reshape(L.shape[1], -1)
        if Vk.shape[0] != L.shape[1]:
            raise ValueError(
                f"dimension mismatch: L has {L.shape[1]} columns, Vk has {Vk.shape[0]} rows"
            )
        self.L = L
        self.Vk = Vk
        super().__init__(dtype=np.float64, shape=L.shape)

    def project(self, x):
        """``x - Vk (Vk^T x)``."""
        if self.Vk.shape[1] == 0:
            return x
        return x - self.Vk @ (self.Vk.T @ x)

    def _matvec(self, x):
        return self.L.matvec(self.project(np.ravel(x)))

    def _rmatvec(self, y):
        return self.project(self.L.rmatvec(np.ravel(y)))

    def _adjoint(self):
        return _Transposed(self)

    def toarray(self) -> np.ndarray:
        Ld = as_dense(self.L)
        return Ld - (Ld @ self.Vk) @ self.Vk.T


def projected_regularizer(L, Vk) -> ProjectedRegularizer:
    return ProjectedRegularizer(L, Vk)
