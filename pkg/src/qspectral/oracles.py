"""Ground-truth engines that share no code path with the spectral formulas.

* :class:`TruncatedChain` holds the absorbed jump chain as plain transition
  probabilities; laws follow from tridiagonal solves, matrix powers and
  matrix exponentials.
* :func:`simulate_observer` / :func:`simulate_fixed_t` are seeded Monte
  Carlo simulators.
* :func:`erlang_stationary` solves the global balance equations.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.linalg import expm, solve_banded
from scipy.sparse.linalg import expm_multiply
from scipy.stats import binom, poisson

from .errors import DomainError, SimulationRunaway, TruncationError
from .spectral_core import QueueParams
from .transient_inf import Pmf

MAX_DIMENSION = 1 << 16
MAX_EVENTS = 10_000_000
BLOCK_SIZE = 1 << 14
OBSERVER = "observer"
FIXED_T = "fixed_t"


def auto_dimension(rho: float, tol: float = 1e-14) -> int:
    """Smallest power of two M with P(Poisson(rho) > M - 2) < tol, doubled once."""
    M = 2
    while poisson.sf(M - 2, rho) >= tol:
        M *= 2
    return 2 * M


@dataclass(frozen=True, eq=False)
class TruncatedChain:
    """Absorbed jump chain on {0..M-1}.

    ``up[n]``, ``down[n]`` and ``exit[n]`` are the probabilities of an
    arrival, a service completion and the observer leaving.  Without a
    capacity the arrival from the top state leaves the truncated space and
    its mass is lost (reported by :meth:`lost_mass`).  With capacity c the
    chain is exact with M = c + 1.
    """

    params: QueueParams
    M: int
    up: np.ndarray = field(init=False)
    down: np.ndarray = field(init=False)
    exit: np.ndarray = field(init=False)

    def __post_init__(self):
        p = self.params
        if p.capacity is not None and self.M != p.capacity + 1:
            raise DomainError("a finite-capacity chain has exactly c + 1 states")
        if self.M < 1:
            raise DomainError("dimension must be positive")
        n = np.arange(self.M, dtype=float)
        arrive = np.full(self.M, p.rho)
        if p.capacity is not None:
            arrive[-1] = 0.0
        total = arrive + n + p.sigma
        for name, v in (("up", arrive / total), ("down", n / total), ("exit", p.sigma / total)):
            v.flags.writeable = False
            object.__setattr__(self, name, v)

    @classmethod
    def for_params(cls, params: QueueParams, M: Optional[int] = None) -> "TruncatedChain":
        if params.capacity is not None:
            return cls(params, params.capacity + 1)
        return cls(params, M or auto_dimension(params.rho))

    def doubled(self) -> "TruncatedChain":
        if self.params.capacity is not None:
            return self
        return TruncatedChain(self.params, 2 * self.M)

    def dense(self) -> np.ndarray:
        return np.diag(self.up[:-1], 1) + np.diag(self.down[1:], -1)

    def row_sums(self) -> np.ndarray:
        """Row sums of A plus absorption; rows that can leave the truncation fall short."""
        return self.dense().sum(axis=1) + self.exit

    def step(self, v: np.ndarray, w: float = 1.0) -> np.ndarray:
        """Row vector times A (departure probabilities scaled by ``w``)."""
        out = np.zeros_like(v)
        out[1:] += v[:-1] * self.up[:-1]
        out[:-1] += w * v[1:] * self.down[1:]
        return out

    def lost_mass(self, v: np.ndarray) -> float:
        return float(v[-1] * self.up[-1])


def _solve_row(chain: TruncatedChain, z: float, w: float = 1.0) -> np.ndarray:
    """u with u^T (z I - A_w) = e_0^T, via a transpose banded solve."""
    M = chain.M
    ab = np.zeros((3, M))
    ab[1] = z
    # (z I - A)^T has super-diagonal -A[n+1, n] and sub-diagonal -A[n, n+1]
    ab[0, 1:] = -w * chain.down[1:]
    ab[2, :-1] = -chain.up[:-1]
    rhs = np.zeros(M)
    rhs[0] = 1.0
    return solve_banded((1, 1), ab, rhs)


def _stable(fn, chain: TruncatedChain, tol: float = 1e-12):
    """Evaluate ``fn(chain)`` and double M until the result moves by < tol."""
    value = fn(chain)
    if chain.params.capacity is not None:
        return value
    while True:
        bigger = chain.doubled()
        new = fn(bigger)
        if np.max(np.abs(np.asarray(new) - np.asarray(value))) < tol:
            return new
        if bigger.M >= MAX_DIMENSION:
            raise TruncationError(f"M-doubling did not settle by M={bigger.M}")
        chain, value = bigger, new


def truncated_resolvent(chain: TruncatedChain, z: float, m: int) -> float:
    """u_m where u^T (z I - A) = e_0^T, i.e. e_0^T (z I - A)^-1 e_m."""
    if not 0 <= m:
        raise DomainError("m must be nonnegative")
    p = chain.params
    if z != 1 and abs(z) <= math.sqrt(p.rho / p.alpha):
        raise DomainError("|z| must exceed the spectral radius bound (or z = 1)")

    def fn(ch):
        if m >= ch.M:
            return 0.0
        return float(_solve_row(ch, z)[m])

    return _stable(fn, chain)


def truncated_power(chain: TruncatedChain, k: int, m: int) -> float:
    """e_0^T A**k e_m by k row-vector steps."""
    if k < 0 or not 0 <= m < chain.M:
        raise DomainError("need k >= 0 and 0 <= m < M")
    v = np.zeros(chain.M)
    v[0] = 1.0
    for _ in range(k):
        v = chain.step(v)
    return float(v[m])


def joint_kappa_nu(chain: TruncatedChain, kmax: Optional[int] = None, tol: float = 1e-14) -> np.ndarray:
    """Table J[k, m] = P(kappa = k, nu = m) for k = 0..kmax.

    Row k is exit[m] * (e_0^T A**(k-1))_m.  Without ``kmax`` rows are added
    until the surviving mass drops below ``tol``.
    """
    if kmax is not None and kmax < 1:
        raise DomainError("kmax must be >= 1")
    v = np.zeros(chain.M)
    v[0] = 1.0
    rows = [np.zeros(chain.M)]
    k = 0
    while True:
        k += 1
        rows.append(chain.exit * v)
        v = chain.step(v)
        if kmax is not None:
            if k >= kmax:
                break
        elif v.sum() < tol:
            break
        if k > MAX_EVENTS:
            raise TruncationError("joint table did not terminate")
    return np.array(rows)


def departures_from_joint(table: np.ndarray) -> np.ndarray:
    """P(d = j) from the joint (kappa, nu) table, d = (kappa - nu - 1) / 2."""
    K, M = table.shape
    k = np.arange(K)[:, None]
    m = np.arange(M)[None, :]
    twice = k - m - 1
    if np.any(table[np.broadcast_to((twice % 2 != 0) | (twice < 0), table.shape)] != 0.0):
        raise DomainError("parity violated: odd kappa - nu - 1 carries mass")
    twice = np.broadcast_to(twice, table.shape)
    sel = (twice >= 0) & (twice % 2 == 0)
    out = np.zeros(max(K // 2 + 1, 1))
    np.add.at(out, twice[sel] // 2, table[sel])
    return out


def nu_oracle(params: QueueParams, mmax: int) -> np.ndarray:
    """P(nu = m) = exit[m] e_0^T (I - A)^-1 e_m."""
    chain = TruncatedChain.for_params(params)

    def fn(ch):
        u = _solve_row(ch, 1.0) * ch.exit
        out = np.zeros(mmax + 1)
        n = min(mmax + 1, ch.M)
        out[:n] = u[:n]
        return out

    return _stable(fn, chain)


def kappa_gf_oracle(params: QueueParams, z: float, blocked_weight: int = 0) -> float:
    """E z**kappa = z e_0^T (I - z A)^-1 exit.

    With a capacity, ``blocked_weight`` is the number of events a blocked
    arrival adds to kappa: 0 (not an event, the chain A^[c]) or 2 (an
    arrival plus the immediate loss of that customer, a self-loop weighted
    z**2).
    """
    if z == 0:
        return 0.0
    p = params
    if p.capacity is None or blocked_weight == 0:
        return _stable(lambda ch: float(_solve_row(ch, 1.0 / z) @ ch.exit), TruncatedChain.for_params(p))
    c = p.capacity
    n = np.arange(c + 1, dtype=float)
    total = p.rho + n + p.sigma
    A = z * (np.diag(p.rho / total[:-1], 1) + np.diag(n[1:] / total[1:], -1))
    A[c, c] = z**blocked_weight * p.rho / total[c]
    u = np.linalg.solve((np.eye(c + 1) - A).T, np.eye(c + 1)[0])
    return float(z * u @ (p.sigma / total))


def d_gf_oracle(params: QueueParams, w: float) -> float:
    """E w**d = e_0^T (I - U - w L)^-1 exit, L the departure part of A."""

    def fn(ch):
        return float(_solve_row(ch, 1.0, w) @ ch.exit)

    return _stable(fn, TruncatedChain.for_params(params))


def d_oracle(params: QueueParams, dmax: int) -> np.ndarray:
    """P(d = j), j = 0..dmax, marginalised from the joint table."""
    chain = TruncatedChain.for_params(params)
    out = departures_from_joint(joint_kappa_nu(chain, tol=1e-16))
    res = np.zeros(dmax + 1)
    n = min(len(out), dmax + 1)
    res[:n] = out[:n]
    return res


# -- fixed horizon -------------------------------------------------------------


def _lattice_generator(rho: float, capacity: Optional[int], M: int, dmax: int):
    """Generator of (n, d) on {0..M-1} x {0..dmax}, index n + M d; outflow past the box is lost."""
    rows, cols, vals = [], [], []
    size = M * (dmax + 1)
    diag = np.zeros(size)
    for d in range(dmax + 1):
        for n in range(M):
            i = n + M * d
            lam = 0.0 if (capacity is not None and n >= capacity) else rho
            diag[i] -= lam + n
            if lam and n + 1 < M:
                rows.append(i), cols.append(i + 1), vals.append(lam)
            if n and d + 1 <= dmax:
                rows.append(i), cols.append(i - 1 + M), vals.append(float(n))
    rows.extend(range(size)), cols.extend(range(size)), vals.extend(diag)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(size, size))


def fixed_t_joint(rho: float, t: float, dmax: int, capacity: Optional[int] = None, M: Optional[int] = None) -> np.ndarray:
    """P(N(t) = n, D(t) = d) on the box n < M, d <= dmax (from N(0) = 0)."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    if M is None:
        M = capacity + 1 if capacity is not None else auto_dimension(rho)
    Q = _lattice_generator(rho, capacity, M, dmax)
    p0 = np.zeros(Q.shape[0])
    p0[0] = 1.0
    p = expm_multiply(Q.T * t, p0) if t > 0 else p0
    return np.clip(p, 0.0, None).reshape(dmax + 1, M).T


def nt_oracle(rho: float, t: float, capacity: Optional[int] = None) -> np.ndarray:
    """P(N(t) = m), m < M, by a dense matrix exponential of the birth-death generator."""
    M = capacity + 1 if capacity is not None else auto_dimension(rho)
    n = np.arange(M, dtype=float)
    lam = np.full(M, rho)
    if capacity is not None:
        lam[-1] = 0.0
    Q = np.diag(lam[:-1], 1) + np.diag(n[1:], -1) - np.diag(lam + n)
    if capacity is None:
        Q[-1, -1] = -n[-1]  # reflect at the top; the Poisson tail there is negligible
    return expm(Q * t)[0]


def kt_gf_oracle(rho: float, t: float, z: float, capacity: Optional[int] = None, blocked_weight: int = 0) -> float:
    """E z**K(t) by the exponential of the z-tilted generator (see :func:`kappa_gf_oracle`)."""
    M = capacity + 1 if capacity is not None else auto_dimension(rho)
    n = np.arange(M, dtype=float)
    lam = np.full(M, rho)
    T = z * (np.diag(lam[:-1], 1) + np.diag(n[1:], -1)) - np.diag(lam + n)
    if capacity is not None:
        T[-1, -1] += rho * z**blocked_weight
    else:
        T[-1, -1] += rho  # reflect at the top; the Poisson tail there is negligible
    return float(z * expm(T * t)[0].sum())


def erlang_stationary(c: int, rho: float) -> Pmf:
    """Stationary law of M/M/c/c from the global balance equations."""
    QueueParams(rho, capacity=c)
    if c == 0:
        return Pmf(np.ones(1), method="oracle")
    n = np.arange(c + 1, dtype=float)
    lam = np.full(c + 1, rho)
    lam[-1] = 0.0
    Q = np.diag(lam[:-1], 1) + np.diag(n[1:], -1) - np.diag(lam + n)
    A = Q.T.copy()
    A[-1] = 1.0
    b = np.zeros(c + 1)
    b[-1] = 1.0
    return Pmf(np.linalg.solve(A, b), method="oracle")


# -- simulation ----------------------------------------------------------------


@dataclass(frozen=True)
class SimConfig:
    params: QueueParams
    replications: int
    seed: int = 0
    mode: str = OBSERVER
    t: Optional[float] = None

    def __post_init__(self):
        if int(self.replications) != self.replications or self.replications < 1:
            raise DomainError("replications must be a positive integer")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.mode == FIXED_T:
            if self.t is None or not self.t >= 0:
                raise DomainError("fixed_t mode needs t >= 0")
        elif self.mode != OBSERVER:
            raise DomainError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True, eq=False)
class EmpiricalLaw:
    """Counts per distinct outcome tuple.

    ``outcomes`` has one row per distinct tuple, columns named by ``names``.
    """

    names: tuple
    outcomes: np.ndarray
    counts: np.ndarray
    replications: int

    def __post_init__(self):
        if int(self.counts.sum()) != self.replications:
            raise DomainError("counts do not add up to the number of replications")

    def __eq__(self, other):
        return (
            isinstance(other, EmpiricalLaw)
            and self.names == other.names
            and self.replications == other.replications
            and np.array_equal(self.outcomes, other.outcomes)
            and np.array_equal(self.counts, other.counts)
        )

    def _col(self, name):
        return self.outcomes[:, self.names.index(name)]

    def marginal_counts(self, name) -> np.ndarray:
        col = self._col(name)
        out = np.zeros(int(col.max()) + 1, dtype=np.int64)
        np.add.at(out, col, self.counts)
        return out

    def frequencies(self, name) -> np.ndarray:
        return self.marginal_counts(name) / self.replications

    def frequency_stderr(self, name) -> np.ndarray:
        p = self.frequencies(name)
        return np.sqrt(p * (1 - p) / self.replications)

    def mean(self, name) -> float:
        return float(self._col(name) @ self.counts / self.replications)

    def stderr(self, name) -> float:
        x = self._col(name).astype(float)
        mu = self.mean(name)
        var = ((x - mu) ** 2) @ self.counts / max(self.replications - 1, 1)
        return math.sqrt(var / self.replications)

    @staticmethod
    def merge(parts) -> "EmpiricalLaw":
        parts = list(parts)
        outcomes = np.concatenate([p.outcomes for p in parts])
        counts = np.concatenate([p.counts for p in parts])
        uniq, inv = np.unique(outcomes, axis=0, return_inverse=True)
        merged = np.zeros(len(uniq), dtype=np.int64)
        np.add.at(merged, inv.ravel(), counts)
        return EmpiricalLaw(parts[0].names, uniq, merged, sum(p.replications for p in parts))


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(block)])))


def _observer_block(params: QueueParams, size: int, rng: np.random.Generator):
    rho, sigma, c = params.rho, params.sigma, params.capacity
    n = np.zeros(size, dtype=np.int64)
    kappa = np.zeros(size, dtype=np.int64)
    arr = np.zeros(size, dtype=np.int64)
    dep = np.zeros(size, dtype=np.int64)
    blocked = np.zeros(size, dtype=np.int64)
    alive = np.arange(size)
    steps = 0
    while alive.size:
        steps += 1
        if steps > MAX_EVENTS:
            raise SimulationRunaway(f"a path exceeded {MAX_EVENTS} events")
        u = rng.random(alive.size)
        nn = n[alive]
        total = rho + nn + sigma
        # one uniform against the cumulative (arrival, departure, exit) probabilities
        is_arr = u * total < rho
        is_dep = ~is_arr & (u * total < rho + nn)
        is_blk = is_arr & (nn == c) if c is not None else np.zeros_like(is_arr)
        is_arr &= ~is_blk
        moved = is_arr | is_dep
        kappa[alive[moved]] += 1
        a_idx, d_idx = alive[is_arr], alive[is_dep]
        n[a_idx] += 1
        arr[a_idx] += 1
        n[d_idx] -= 1
        dep[d_idx] += 1
        blocked[alive[is_blk]] += 1
        leaving = ~(moved | is_blk)
        kappa[alive[leaving]] += 1
        alive = alive[~leaving]
    assert np.all(arr + dep == kappa - 1) and np.all(arr - dep == n)
    return np.stack([n, kappa, arr, dep, blocked], axis=1)


def _fixed_t_block(params: QueueParams, t: float, size: int, rng: np.random.Generator):
    rho, c = params.rho, params.capacity
    n = np.zeros(size, dtype=np.int64)
    arr = np.zeros(size, dtype=np.int64)
    dep = np.zeros(size, dtype=np.int64)
    blocked = np.zeros(size, dtype=np.int64)
    clock = np.zeros(size)
    alive = np.arange(size)
    steps = 0
    while alive.size:
        steps += 1
        if steps > MAX_EVENTS:
            raise SimulationRunaway(f"a path exceeded {MAX_EVENTS} events")
        u = rng.random((2, alive.size))
        nn = n[alive]
        total = rho + nn
        clock[alive] += -np.log1p(-u[0]) / total
        going = clock[alive] <= t
        alive, u1, total, nn = alive[going], u[1][going], total[going], nn[going]
        is_arr = u1 * total < rho
        is_blk = is_arr & (nn == c) if c is not None else np.zeros_like(is_arr)
        is_arr &= ~is_blk
        a_idx, d_idx = alive[is_arr], alive[~(is_arr | is_blk)]
        n[a_idx] += 1
        arr[a_idx] += 1
        n[d_idx] -= 1
        dep[d_idx] += 1
        blocked[alive[is_blk]] += 1
    assert np.all(arr == n + dep)
    return np.stack([n, dep, arr + dep + 1, blocked], axis=1)


def worker_count() -> int:
    env = os.environ.get("QSPECTRAL_THREADS")
    if env:
        try:
            k = int(env)
        except ValueError:
            raise DomainError("QSPECTRAL_THREADS must be a positive integer") from None
        if k < 1:
            raise DomainError("QSPECTRAL_THREADS must be a positive integer")
        return k
    return os.cpu_count() or 1


def _simulate(config: SimConfig, names, block_fn) -> EmpiricalLaw:
    R = config.replications
    sizes = [BLOCK_SIZE] * (R // BLOCK_SIZE) + ([R % BLOCK_SIZE] if R % BLOCK_SIZE else [])

    def run(b):
        rows = block_fn(sizes[b], _block_rng(config.seed, b))
        uniq, counts = np.unique(rows, axis=0, return_counts=True)
        return EmpiricalLaw(names, uniq, counts.astype(np.int64), sizes[b])

    workers = min(worker_count(), len(sizes))
    if workers == 1:
        parts = [run(b) for b in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    return EmpiricalLaw.merge(parts)


def simulate_observer(config: SimConfig) -> EmpiricalLaw:
    """Empirical law of (nu, kappa, a, d, blocked) for an exponential(sigma) observer.

    Blocked arrivals (capacity reached) leave the state unchanged; they are
    not counted in kappa, a or d but tallied in ``blocked``.
    """
    if config.mode != OBSERVER:
        raise DomainError("simulate_observer needs observer mode")
    return _simulate(config, ("nu", "kappa", "a", "d", "blocked"), lambda size, rng: _observer_block(config.params, size, rng))


def simulate_fixed_t(config: SimConfig) -> EmpiricalLaw:
    """Empirical law of (N(t), D(t), K(t), blocked), K(t) = accepted arrivals + departures + 1."""
    if config.mode != FIXED_T:
        raise DomainError("simulate_fixed_t needs fixed_t mode")
    return _simulate(config, ("N", "D", "K", "blocked"), lambda size, rng: _fixed_t_block(config.params, config.t, size, rng))


# -- statistics ------------------------------------------------------------------


def tv_distance(p, q) -> float:
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    n = max(len(p), len(q))
    p = np.pad(p, (0, n - len(p)))
    q = np.pad(q, (0, n - len(q)))
    return 0.5 * float(np.abs(p - q).sum())


def expected_tv(p, n: int) -> float:
    """E TV(empirical, p) for n samples: half the sum of binomial mean absolute deviations / n.

    Uses the exact binomial formula E|X - np| = 2 j (1-p) P(X = j), j = floor(np) + 1.
    """
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    j = np.floor(n * p) + 1
    mad = 2.0 * j * (1.0 - p) * binom.pmf(j, n, p)
    return 0.5 * float(mad.sum()) / n
