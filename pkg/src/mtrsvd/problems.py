"""One-dimensional Fredholm test problems, noise injection and synthetic spectra.

The four generators follow the classical Regularization Tools
discretizations (midpoint quadrature for ``shaw``, ``gravity`` and
``heat``; Galerkin with box functions for ``deriv2``). The noise-free
right-hand side is always ``b_true = A @ x_true``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io

from .kernels import gaussian_matrix, householder_qr, rng_from

ILLPOSEDNESS = {"shaw": "severe", "gravity": "severe", "heat": "moderate", "deriv2": "mild"}
PROBLEMS = tuple(ILLPOSEDNESS)


@dataclass(frozen=True)
class IllPosedProblem:
    A: np.ndarray
    b_true: np.ndarray
    x_true: np.ndarray
    name: str
    declared_illposedness: str = "unknown"

    @property
    def n(self) -> int:
        return self.A.shape[1]


@dataclass(frozen=True)
class NoisyProblem:
    base: IllPosedProblem
    b: np.ndarray
    epsilon: float
    noise_seed: int

    @property
    def A(self):
        return self.base.A

    @property
    def x_true(self):
        return self.base.x_true

    @property
    def b_true(self):
        return self.base.b_true

    @property
    def name(self):
        return self.base.name


def _shaw(n):
    if n % 2:
        raise ValueError(f"shaw requires even n, got {n}")
    h = np.pi / n
    s = -np.pi / 2 + (np.arange(n) + 0.5) * h
    co, si = np.cos(s), np.sin(s)
    u = np.pi * (si[:, None] + si[None, :])
    A = h * ((co[:, None] + co[None, :]) * np.sinc(u / np.pi)) ** 2
    A = 0.5 * (A + A.T)
    x = 2.0 * np.exp(-6.0 * (s - 0.8) ** 2) + np.exp(-2.0 * (s + 0.5) ** 2)
    return A, x


def _gravity(n, depth=0.25):
    h = 1.0 / n
    t = (np.arange(n) + 0.5) * h
    diff = t[:, None] - t[None, :]
    A = h * depth / (depth ** 2 + diff ** 2) ** 1.5
    x = np.sin(np.pi * t) + 0.5 * np.sin(2 * np.pi * t)
    return A, x


def _heat(n, kappa=1.0):
    if n % 2:
        raise ValueError(f"heat requires even n, got {n}")
    h = 1.0 / n
    t = (np.arange(n) + 0.5) * h
    c = h / (2 * kappa * np.sqrt(np.pi))
    d = 1.0 / (4 * kappa ** 2)
    col = c * t ** -1.5 * np.exp(-d / t)
    idx = np.arange(n)
    lag = idx[:, None] - idx[None, :]
    A = np.where(lag >= 0, col[np.clip(lag, 0, None)], 0.0)
    x = np.zeros(n)
    ti = np.arange(1, n // 2 + 1) * 20.0 / n
    x[: n // 2] = np.where(
        ti < 2, 0.75 * ti ** 2 / 4,
        np.where(ti < 3, 0.75 + (ti - 2) * (3 - ti), 0.75 * np.exp(-(ti - 3) * 2)),
    )
    return A, x


def _deriv2(n):
    h = 1.0 / n
    i = np.arange(1, n + 1, dtype=float)
    # Galerkin entries for the Green's function of -u'' with u(0) = u(1) = 0
    lower = h ** 2 * (i[None, :] - 0.5) * ((i[:, None] - 0.5) * h - 1.0)
    A = np.tril(lower, -1)
    A = A + A.T
    A[np.diag_indices(n)] = h ** 2 * ((i ** 2 - i + 0.25) * h - (i - 2.0 / 3.0))
    x = (np.exp(i * h) - np.exp((i - 1) * h)) / np.sqrt(h)
    return A, x


_GENERATORS = {"shaw": _shaw, "gravity": _gravity, "heat": _heat, "deriv2": _deriv2}


def generate(name: str, n: int) -> IllPosedProblem:
    """Square ``n x n`` discretization of one of ``shaw``, ``gravity``, ``heat``, ``deriv2``."""
    if name not in _GENERATORS:
        raise ValueError(f"unsupported problem {name!r}; expected one of {PROBLEMS}")
    if n < 16:
        raise ValueError(f"n={n} too small; need n >= 16")
    A, x = _GENERATORS[name](int(n))
    return IllPosedProblem(A=A, b_true=A @ x, x_true=x, name=name,
                           declared_illposedness=ILLPOSEDNESS[name])


def add_noise(p: IllPosedProblem, epsilon: float, seed: int) -> NoisyProblem:
    """White Gaussian noise rescaled so that ``||e|| / ||b_true|| == epsilon``."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    e = rng_from(seed).standard_normal(p.b_true.size)
    e *= epsilon * np.linalg.norm(p.b_true) / np.linalg.norm(e)
    return NoisyProblem(base=p, b=p.b_true + e, epsilon=float(epsilon), noise_seed=seed)


def spectrum(kind: str, count: int, rho: float | None = None, alpha: float | None = None,
             zeta: float = 1.0) -> np.ndarray:
    """Prescribed singular values ``rho**-j`` (geometric) or ``zeta * j**-alpha`` (algebraic)."""
    j = np.arange(1, count + 1, dtype=float)
    if kind == "geometric":
        if rho is None or rho <= 1:
            raise ValueError("geometric spectrum needs rho > 1")
        return rho ** -j
    if kind == "algebraic":
        if alpha is None or alpha <= 0.5:
            raise ValueError("algebraic spectrum needs alpha > 1/2")
        if zeta <= 0:
            raise ValueError("algebraic spectrum needs zeta > 0")
        return zeta * j ** -alpha
    raise ValueError(f"unknown spectrum kind {kind!r}")


def _haar(rows, cols, seed, salt):
    Q, _ = householder_qr(gaussian_matrix(rows, cols, seed, salt))
    return Q


def synthetic_spectrum_matrix(kind: str, m: int, n: int, seed: int, rho: float | None = None,
                              alpha: float | None = None, zeta: float = 1.0) -> np.ndarray:
    """``U diag(sigma) V^T`` with Haar-distributed orthonormal factors and a prescribed spectrum."""
    s = min(m, n)
    sigma = spectrum(kind, s, rho=rho, alpha=alpha, zeta=zeta)
    U = _haar(m, s, seed, 1)
    V = _haar(n, s, seed, 2)
    return (U * sigma) @ V.T


def write_matrix(path, A) -> None:
    scipy.io.mmwrite(str(path), np.asarray(A), precision=17)


def read_matrix(path) -> np.ndarray:
    A = scipy.io.mmread(str(path))
    return np.asarray(A.toarray() if hasattr(A, "toarray") else A, dtype=float)


def write_vector(path, v) -> None:
    np.savetxt(path, np.asarray(v, dtype=float).ravel(), fmt="%.17g")


def read_vector(path) -> np.ndarray:
    return np.atleast_1d(np.loadtxt(path, dtype=float))


def load_problem(matrix_path, x_true_path=None, b_path=None, name=None) -> IllPosedProblem:
    """Problem from a Matrix Market ``A`` plus plain-text ``x_true`` and/or ``b`` files."""
    A = read_matrix(matrix_path)
    if x_true_path is not None:
        x = read_vector(x_true_path)
        b = A @ x
    elif b_path is not None:
        b = read_vector(b_path)
        x = np.full(A.shape[1], np.nan)
    else:
        raise ValueError("need x_true or b alongside A")
    return IllPosedProblem(A=A, b_true=b, x_true=x, name=name or Path(matrix_path).stem)
