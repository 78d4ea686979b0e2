"""Closed-form RSVD/TRSVD error bounds and a Monte Carlo harness that checks them.

Bound names
-----------
``basic_logq``        (1 + 6 sqrt((k+q) q log q)) s_{k+1} + 3 sqrt(k+q) tail,   fails w.p. <= 3 q^-q
``simplified_9sqrt``  (1 + 9 sqrt((k+q)(n-k))) s_{k+1},                          fails w.p. <= 3 q^-q
``basic_expq``        (1 + 16 sqrt(1 + k/(q+1))) s_{k+1} + 8 sqrt(k+q)/(q+1) tail, fails w.p. <= 3 e^-q
``simplified_expq``   (1 + 16 sqrt(1 + k/(q+1)) + 8 sqrt((k+q)(n-k))/(q+1)) s_{k+1}
``severe_refined``    basic_expq with tail/s_{k+1} replaced by 1 + T, T the geometric tail sum
``moderate_refined``  basic_expq with tail/s_{k+1} replaced by sqrt(k/(2a-1)) ((k+1)/k)^a
``trsvd_coarse``      s_{k+1} + ||A - Q Q^T A||
``trsvd_improved``    st_{k+1} + ||A - Q Q^T A||

``tail`` is ``(sum_{j>k} s_j^2)^(1/2)`` and ``st_{k+1}`` the (k+1)-th
singular value of the sketched matrix.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass

import numpy as np

from .kernels import derive_seed
from .rsvd import projection_error, rsvd, truncate

BOUND_NAMES = (
    "basic_logq", "simplified_9sqrt", "basic_expq", "simplified_expq",
    "severe_refined", "moderate_refined", "trsvd_coarse", "trsvd_improved",
)
_LOGQ = {"basic_logq", "simplified_9sqrt"}
_TRSVD = {"trsvd_coarse", "trsvd_improved"}


@dataclass(frozen=True)
class BoundSpec:
    name: str

    def __post_init__(self):
        if self.name not in BOUND_NAMES:
            raise ValueError(f"unknown bound {self.name!r}")

    def failure_probability(self, q: int) -> float:
        """Theorem failure probability; 0 for the deterministic TRSVD bounds."""
        if self.name in _TRSVD:
            return 0.0
        if self.name in _LOGQ:
            return 3.0 * float(q) ** -q
        return 3.0 * math.exp(-q)


@dataclass
class BoundCheckRecord:
    bound: str
    observed_error: float
    bound_value: float
    k: int
    q: int
    seed: int
    held: bool


def _as_spec(spec):
    return spec if isinstance(spec, BoundSpec) else BoundSpec(spec)


def severe_tail_sum(rho: float, k: int, n: int) -> float:
    """``sum_{i=1}^{n-k-1} rho^(-2i)`` in closed form."""
    r2 = rho ** -2.0
    return r2 * (1.0 - r2 ** (n - k - 1)) / (1.0 - r2)


def moderate_tail_factor(alpha: float, k: int) -> float:
    return math.sqrt(k / (2.0 * alpha - 1.0)) * ((k + 1.0) / k) ** alpha


def eval_bound(spec, sigma, k: int, q: int, n: int | None = None, *, rho: float | None = None,
               alpha: float | None = None, zeta: float | None = None,
               sigma_tilde_next: float | None = None, projection_error: float | None = None) -> float:
    """Right-hand side of the named bound.

    ``sigma`` holds the singular values of ``A`` in non-increasing order
    (``sigma[j-1]`` is the j-th). ``n`` defaults to ``len(sigma)``. The
    refined bounds need ``rho`` (severe) or ``alpha`` (moderate/mild); the
    TRSVD bounds need ``projection_error`` and, for the improved one,
    ``sigma_tilde_next``. ``zeta`` only scales the spectrum and is accepted
    for symmetry.
    """
    name = _as_spec(spec).name
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.size if n is None else int(n)
    if q < 4:
        raise ValueError("q must be >= 4")
    if k < 1 or k + q >= n:
        raise ValueError(f"need 1 <= k and k + q < n (k={k}, q={q}, n={n})")
    s_next = float(sigma[k]) if k < sigma.size else 0.0
    tail = float(np.sqrt(np.sum(sigma[k:] ** 2)))
    l = k + q
    expq_lead = 1.0 + 16.0 * math.sqrt(1.0 + k / (q + 1.0))

    if name == "basic_logq":
        return (1 + 6 * math.sqrt(l * q * math.log(q))) * s_next + 3 * math.sqrt(l) * tail
    if name == "simplified_9sqrt":
        return (1 + 9 * math.sqrt(l * (n - k))) * s_next
    if name == "basic_expq":
        return expq_lead * s_next + 8 * math.sqrt(l) / (q + 1) * tail
    if name == "simplified_expq":
        return (expq_lead + 8 * math.sqrt(l * (n - k)) / (q + 1)) * s_next
    if name == "severe_refined":
        if rho is None or rho <= 1:
            raise ValueError("invalid input: severe_refined needs rho > 1")
        return (expq_lead + 8 * math.sqrt(l) / (q + 1) * (1 + severe_tail_sum(rho, k, n))) * s_next
    if name == "moderate_refined":
        if alpha is None or alpha <= 0.5:
            raise ValueError("invalid input: moderate_refined needs alpha > 1/2")
        return (expq_lead + 8 * math.sqrt(l) / (q + 1) * moderate_tail_factor(alpha, k)) * s_next
    if projection_error is None:
        raise ValueError(f"invalid input: {name} needs projection_error")
    if name == "trsvd_coarse":
        return s_next + projection_error
    if sigma_tilde_next is None:
        raise ValueError("invalid input: trsvd_improved needs sigma_tilde_next")
    return sigma_tilde_next + projection_error


def fit_geometric(sigma, j_range=None) -> tuple[float, float]:
    """Least-squares fit ``log s_j = log C - j log rho``; returns ``(rho, r_squared)``."""
    j, y = _fit_data(sigma, j_range)
    slope, icpt = np.polyfit(j, y, 1)
    return float(np.exp(-slope)), _r2(y, slope * j + icpt)


def fit_algebraic(sigma, j_range=None) -> tuple[float, float, float]:
    """Least-squares fit ``log s_j = log zeta - alpha log j``; returns ``(alpha, zeta, r_squared)``."""
    j, y = _fit_data(sigma, j_range)
    slope, icpt = np.polyfit(np.log(j), y, 1)
    return float(-slope), float(np.exp(icpt)), _r2(y, slope * np.log(j) + icpt)


def _fit_data(sigma, j_range):
    sigma = np.asarray(sigma, dtype=float)
    lo, hi = j_range if j_range is not None else (1, sigma.size)
    j = np.arange(lo, hi + 1, dtype=float)
    return j, np.log(sigma[lo - 1:hi])


def _r2(y, fit):
    ss = np.sum((y - y.mean()) ** 2)
    return float(1.0 - np.sum((y - fit) ** 2) / ss) if ss > 0 else 1.0


def _check_desk(A):
    if min(A.shape) > 512:
        raise ValueError("size guard: bound checks are limited to min(m, n) <= 512")


def empirical_bound_check(A, spec, k: int, q: int, trials: int, seed: int, *,
                          rho: float | None = None, alpha: float | None = None,
                          sigma: np.ndarray | None = None) -> list[BoundCheckRecord]:
    """Run the RSVD ``trials`` times and compare each observed error with the bound(s).

    ``spec`` may be one bound or a sequence of bounds; one record is
    produced per (trial, bound). Per-trial seeds are derived from ``seed``.
    The observed error is ``||A - Q Q^T A||`` for the RSVD bounds and
    ``||A - A_k||`` for the TRSVD ones.
    """
    A = np.asarray(A, dtype=float)
    _check_desk(A)
    specs = [_as_spec(s) for s in ([spec] if isinstance(spec, (str, BoundSpec)) else spec)]
    if sigma is None:
        sigma = np.linalg.svd(A, compute_uv=False)
    n_eff = min(A.shape)
    out = []
    for t in range(trials):
        ts = derive_seed(seed, t)
        r = rsvd(A, k, q, ts)
        perr = projection_error(A, r)
        approx = None
        for s in specs:
            if s.name in _TRSVD:
                if approx is None:
                    approx = truncate(r, k)
                    terr = float(np.linalg.norm(A - approx.dense(), 2))
                obs = terr
                val = eval_bound(s, sigma, k, q, n_eff, projection_error=perr,
                                 sigma_tilde_next=approx.sigma_tilde_next)
            else:
                obs = perr
                val = eval_bound(s, sigma, k, q, n_eff, rho=rho, alpha=alpha)
            out.append(BoundCheckRecord(bound=s.name, observed_error=obs, bound_value=val,
                                        k=k, q=q, seed=ts, held=bool(obs <= val)))
    return out


def failure_counts(records) -> dict:
    counts = {}
    for r in records:
        counts.setdefault(r.bound, 0)
        counts[r.bound] += 0 if r.held else 1
    return counts


def sharpness_report(A, k_range, q_range, seed: int, trials: int = 1, *,
                     rho: float | None = None, alpha: float | None = None) -> list[dict]:
    """Observed projection error against every applicable bound on a ``(k, q)`` grid.

    One row per cell with the median observed error over ``trials``, each
    bound value and the ratio bound/observed. The refined bounds appear when
    ``rho`` or ``alpha`` is given.
    """
    A = np.asarray(A, dtype=float)
    _check_desk(A)
    sigma = np.linalg.svd(A, compute_uv=False)
    n_eff = min(A.shape)
    names = ["simplified_9sqrt", "basic_logq", "basic_expq", "simplified_expq"]
    if rho is not None:
        names.append("severe_refined")
    if alpha is not None:
        names.append("moderate_refined")
    rows = []
    for k in k_range:
        for q in q_range:
            if k + q >= n_eff:
                continue
            obs = [projection_error(A, rsvd(A, k, q, derive_seed(seed, k, q, t)))
                   for t in range(trials)]
            row = {"k": int(k), "q": int(q), "observed": float(np.median(obs))}
            for name in names:
                v = eval_bound(name, sigma, k, q, n_eff, rho=rho, alpha=alpha)
                row[name] = v
                row[f"ratio_{name}"] = v / row["observed"] if row["observed"] > 0 else math.inf
            rows.append(row)
    return rows


def write_records_csv(records, path) -> None:
    fields = list(BoundCheckRecord.__dataclass_fields__)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in records:
            d = asdict(r)
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in d.items()})


def write_table_csv(rows, path) -> None:
    if not rows:
        raise ValueError("empty table")
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
