"""Finite-scale Lyapunov exponents by grid quadrature and Monte Carlo.

The MC sampler is counter-based: sample i is a pure hash of (seed, i), so
streams are bit-reproducible and independent of evaluation order or worker
count.  Grid quadrature is the midpoint rule on a uniform lattice.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cocycle import batched_log_norms
from .model import JacobiModel

DEFAULT_WORK_BUDGET = 10_000_000_000  # matrix multiplications per job
_CHUNK = 16384  # fixed chunk size keeps reductions independent of threads

KINDS = ("plain", "unimodular", "a_normalized")
_KIND_KEY = {
    "plain": "log_norm",
    "unimodular": "log_norm_u",
    "a_normalized": "log_norm_a",
}


class BudgetError(RuntimeError):
    """A job exceeded the configured work budget."""

    def __init__(self, cost: float, budget: float):
        self.cost = cost
        self.budget = budget
        super().__init__(
            f"estimated cost {cost:.3g} matrix products exceeds budget {budget:.3g}"
        )


def _splitmix64(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):  # wraparound mod 2^64 is the point
        z = (z + np.uint64(0x9E3779B97F4A7C15)).astype(np.uint64)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def counter_uniform(seed: int, idx: np.ndarray) -> np.ndarray:
    """Uniform [0,1) deterministically derived from (seed, idx)."""
    idx = np.asarray(idx, dtype=np.uint64)
    z = _splitmix64(_splitmix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF)) ^ idx)
    return (z >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


@dataclass(frozen=True)
class Sampler:
    """Torus sampler: uniform midpoint grid or counter-based Monte Carlo."""

    kind: str  # "grid" | "mc"
    gx: int = 0
    gy: int = 0
    count: int = 0
    seed: int = 0

    @classmethod
    def grid(cls, gx: int, gy: int | None = None) -> "Sampler":
        gy = gx if gy is None else gy
        if gx < 1 or gy < 1:
            raise ValueError("grid resolutions must be positive")
        return cls("grid", gx=gx, gy=gy)

    @classmethod
    def monte_carlo(cls, count: int, seed: int) -> "Sampler":
        if count < 1:
            raise ValueError("sample count must be positive")
        return cls("mc", count=count, seed=int(seed))

    @property
    def total(self) -> int:
        return self.gx * self.gy if self.kind == "grid" else self.count

    @property
    def descriptor(self) -> str:
        if self.kind == "grid":
            return f"grid:{self.gx}x{self.gy}"
        return f"mc:{self.count}:seed={self.seed}"

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "grid":
            xs = (np.arange(self.gx) + 0.5) / self.gx
            ys = (np.arange(self.gy) + 0.5) / self.gy
            gx, gy = np.meshgrid(xs, ys, indexing="ij")
            return gx.ravel(), gy.ravel()
        idx = np.arange(self.count, dtype=np.uint64)
        x = counter_uniform(self.seed, 2 * idx)
        y = counter_uniform(self.seed, 2 * idx + np.uint64(1))
        return x, y


@dataclass(frozen=True)
class LyapunovEstimate:
    n: int
    kind: str
    E: float
    value: float
    std_error: float
    sampler: str
    model_hash: str
    seed: int | None = None

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "kind": self.kind,
            "E": self.E,
            "value": self.value,
            "std_error": self.std_error,
            "sampler": self.sampler,
            "model_hash": self.model_hash,
            "seed": self.seed,
        }


def thread_count() -> int:
    env = os.environ.get("SKEWSHIFT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _shifted(x: np.ndarray, y: np.ndarray, shift: int, omega: float):
    if shift == 0:
        return x, y
    k = shift
    xs = np.mod(x + k * y + (k * (k - 1) // 2) * omega, 1.0)
    ys = np.mod(y + k * omega, 1.0)
    return xs, ys


def sample_log_norms(
    m: JacobiModel,
    E: float,
    n: int,
    sampler: Sampler,
    kind: str = "plain",
    shift: int = 0,
    threads: int | None = None,
) -> np.ndarray:
    """Per-sample values of (1/n) log||M_n|| for the requested normalization.

    `shift` evaluates at T^shift of each sample point (the grid estimate of
    the same integral, by measure preservation).
    """
    if kind not in _KIND_KEY:
        raise ValueError(f"kind must be one of {KINDS}")
    x, y = sampler.points()
    x, y = _shifted(x, y, shift, m.omega)
    key = _KIND_KEY[kind]
    nthreads = thread_count() if threads is None else max(1, threads)
    chunks = [(i, min(i + _CHUNK, x.size)) for i in range(0, x.size, _CHUNK)]

    def run(span):
        lo, hi = span
        return batched_log_norms(m, x[lo:hi], y[lo:hi], E, n)[key]

    if nthreads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(span) for span in chunks]
    out = np.concatenate(parts) if len(parts) > 1 else parts[0]
    return out / n if n > 0 else out


def lyapunov_finite(
    m: JacobiModel,
    E: float,
    n: int,
    sampler: Sampler,
    kind: str = "plain",
    budget: float = DEFAULT_WORK_BUDGET,
    shift: int = 0,
    threads: int | None = None,
) -> LyapunovEstimate:
    """Mean of (1/n) log||M_n|| over the sampler.

    std_error is the sample standard deviation over sqrt(count) for MC and 0
    for grid quadrature (grid bias is a convergence question, not noise).
    """
    if n < 1:
        raise ValueError("n must be positive")
    cost = float(n) * sampler.total
    if cost > budget:
        raise BudgetError(cost, budget)
    u = sample_log_norms(m, E, n, sampler, kind, shift=shift, threads=threads)
    value = float(np.mean(u))
    if sampler.kind == "mc" and u.size > 1:
        se = float(np.std(u, ddof=1) / math.sqrt(u.size))
    else:
        se = 0.0
    return LyapunovEstimate(
        n=n, kind=kind, E=float(E), value=value, std_error=se,
        sampler=sampler.descriptor, model_hash=m.model_hash,
        seed=sampler.seed if sampler.kind == "mc" else None,
    )


def lyapunov_profile(
    m: JacobiModel,
    E: float,
    scales: list[int],
    sampler: Sampler,
    kind: str = "plain",
    budget: float = DEFAULT_WORK_BUDGET,
    threads: int | None = None,
) -> tuple[list[LyapunovEstimate], list[float]]:
    """Estimates at each scale plus the running infimum (the L(E) proxy)."""
    if list(scales) != sorted(scales):
        raise ValueError("scales must be sorted ascending")
    estimates = []
    running: list[float] = []
    best = math.inf
    for n in scales:
        est = lyapunov_finite(m, E, n, sampler, kind, budget=budget, threads=threads)
        estimates.append(est)
        best = min(best, est.value)
        running.append(best)
    return estimates, running


def lyapunov_all_kinds(
    m: JacobiModel,
    E: float,
    n: int,
    sampler: Sampler,
    budget: float = DEFAULT_WORK_BUDGET,
    threads: int | None = None,
) -> dict[str, LyapunovEstimate]:
    """All three normalizations from a single cocycle sweep."""
    cost = float(n) * sampler.total
    if cost > budget:
        raise BudgetError(cost, budget)
    x, y = sampler.points()
    out = {}
    res = None
    chunks = [(i, min(i + _CHUNK, x.size)) for i in range(0, x.size, _CHUNK)]
    parts = [batched_log_norms(m, x[lo:hi], y[lo:hi], E, n) for lo, hi in chunks]
    for kind, key in _KIND_KEY.items():
        u = np.concatenate([p[key] for p in parts]) / n
        if sampler.kind == "mc" and u.size > 1:
            se = float(np.std(u, ddof=1) / math.sqrt(u.size))
        else:
            se = 0.0
        out[kind] = LyapunovEstimate(
            n=n, kind=kind, E=float(E), value=float(np.mean(u)), std_error=se,
            sampler=sampler.descriptor, model_hash=m.model_hash,
            seed=sampler.seed if sampler.kind == "mc" else None,
        )
    del res
    return out


def almost_invariance_defect(
    m: JacobiModel,
    E: float,
    n: int,
    K: int,
    sampler: Sampler,
    threads: int | None = None,
) -> float:
    """sup over sample points of |(1/K) sum_{k=1..K} u_n(T^k p) - u_n(p)|
    with u_n = (1/n) log||M_n^u||.  The empty average (K = 0) is 0."""
    if K < 0:
        raise ValueError("K must be nonnegative")
    if K == 0:
        return 0.0
    x, y = sampler.points()
    base = sample_log_norms(m, E, n, sampler, "unimodular", threads=threads)
    acc = np.zeros_like(base)
    for k in range(1, K + 1):
        xs, ys = _shifted(x, y, k, m.omega)
        vals = batched_log_norms(m, xs, ys, E, n)["log_norm_u"] / n
        acc += vals
    return float(np.max(np.abs(acc / K - base)))


def subadditivity_check(
    m: JacobiModel,
    E: float,
    n: int,
    msteps: int,
    grid: Sampler,
    threads: int | None = None,
) -> dict:
    """(n+m) L_{n+m} <= n L_n + m L_m on one matched grid.

    The L_m factor is evaluated at T^n of the grid points, so the inequality
    holds pointwise before averaging (||M_{n+m}(p)|| <= ||M_m(T^n p)||
    ||M_n(p)||) and the comparison is exact up to rounding.
    """
    u_full = sample_log_norms(m, E, n + msteps, grid, "plain", threads=threads)
    u_n = sample_log_norms(m, E, n, grid, "plain", threads=threads)
    u_m = sample_log_norms(m, E, msteps, grid, "plain", shift=n, threads=threads)
    lhs = (n + msteps) * float(np.mean(u_full))
    rhs = n * float(np.mean(u_n)) + msteps * float(np.mean(u_m))
    return {
        "n": n, "m": msteps,
        "lhs": lhs, "rhs": rhs, "slack": rhs - lhs,
        "L_n": float(np.mean(u_n)),
        "L_m_shifted": float(np.mean(u_m)),
        "L_sum": float(np.mean(u_full)),
    }
