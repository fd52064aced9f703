"""Core chain and distribution types, distances, sampling, time reversal.

State indices are 0-based everywhere.  A distribution is a point in the
``d``-simplex, a transition matrix is a row-stochastic ``d x d`` kernel, and
a trajectory is a finite state sequence.  All three are immutable after
construction (backing arrays are marked read-only) and safe to share across
threads; sampling takes an explicit seed and owns its generator state.

Distance conventions used throughout the package:

* ``l1_dist``      -- plain L1 norm of the difference, in [0, 2].
* ``tv_dist``      -- half the L1, in [0, 1].
* ``matrix_tv_norm`` -- half the maximum row-wise L1 between two kernels.

Separation parameters of the identity tester refer to ``matrix_tv_norm``;
a kernel separation of eps therefore means some row differs by 2*eps in L1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatchError,
    NegativeEntryError,
    NonSquareError,
    NotStationaryError,
    PowerIterationNoConvergenceError,
    RowSumOutOfToleranceError,
    TooShortError,
    ZeroStationaryMassError,
)

DEFAULT_TOL = 1e-9


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Distribution:
    """A probability vector over ``d`` states (validated, entries sum to 1)."""

    probs: np.ndarray
    d: int

    def __post_init__(self):
        object.__setattr__(self, "probs", _readonly(np.asarray(self.probs, dtype=float)))

    def min(self) -> float:
        return float(self.probs.min())


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """A validated row-stochastic ``d x d`` transition kernel."""

    rows: np.ndarray
    d: int

    def __post_init__(self):
        object.__setattr__(self, "rows", _readonly(np.asarray(self.rows, dtype=float)))

    def row(self, i: int) -> Distribution:
        return Distribution(self.rows[i], self.d)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A length-``m`` state sequence over alphabet ``{0, ..., d-1}``."""

    states: np.ndarray
    d: int
    m: int

    def __post_init__(self):
        object.__setattr__(self, "states", _readonly(np.asarray(self.states, dtype=np.int64)))


def make_distribution(probs, tol: float = DEFAULT_TOL) -> Distribution:
    """Validate ``probs`` as a distribution; renormalize within ``tol``.

    Raises ``NegativeEntryError`` / ``RowSumOutOfToleranceError`` when the
    vector is not a probability vector up to ``tol``.
    """
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise DimensionMismatchError("distribution must be a non-empty vector")
    if (p < -tol).any():
        raise NegativeEntryError(f"negative entry {p.min():.3e}")
    p = np.clip(p, 0.0, None)
    s = p.sum()
    if abs(s - 1.0) > tol:
        raise RowSumOutOfToleranceError(0, s - 1.0)
    return Distribution(p / s, int(p.size))


def uniform_distribution(d: int) -> Distribution:
    return Distribution(np.full(d, 1.0 / d), d)


def point_mass(i: int, d: int) -> Distribution:
    p = np.zeros(d)
    p[i] = 1.0
    return Distribution(p, d)


def validate_chain(raw, tol: float = DEFAULT_TOL) -> TransitionMatrix:
    """Validate a square matrix as row-stochastic; renormalize rows within ``tol``.

    Reports the worst offending row (index and deviation) when a row sum is
    outside tolerance.
    """
    a = np.asarray(raw, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NonSquareError(f"expected square matrix, got shape {a.shape}")
    if a.shape[0] < 1:
        raise NonSquareError("empty matrix")
    if (a < -tol).any():
        i, j = np.unravel_index(np.argmin(a), a.shape)
        raise NegativeEntryError(f"entry ({i},{j}) = {a[i, j]:.3e} is negative")
    a = np.clip(a, 0.0, None)
    sums = a.sum(axis=1)
    dev = sums - 1.0
    worst = int(np.argmax(np.abs(dev)))
    if abs(dev[worst]) > tol:
        raise RowSumOutOfToleranceError(worst, float(dev[worst]))
    return TransitionMatrix(a / sums[:, None], int(a.shape[0]))


def make_trajectory(states, d: int) -> Trajectory:
    x = np.asarray(states, dtype=np.int64)
    if x.ndim != 1 or x.size < 1:
        raise TooShortError("trajectory must contain at least one state")
    if x.min() < 0 or x.max() >= d:
        raise DimensionMismatchError(
            f"state index out of range [0, {d}) in trajectory"
        )
    return Trajectory(x, int(d), int(x.size))


# ---------------------------------------------------------------------------
# distances


def _check_same_d(p: Distribution, q: Distribution) -> None:
    if p.d != q.d:
        raise DimensionMismatchError(f"dimension mismatch: {p.d} vs {q.d}")


def l1_dist(p: Distribution, q: Distribution) -> float:
    """L1 distance between two distributions, in [0, 2]."""
    _check_same_d(p, q)
    return float(np.abs(p.probs - q.probs).sum())


def tv_dist(p: Distribution, q: Distribution) -> float:
    """Total variation distance (half the L1), in [0, 1]."""
    return 0.5 * l1_dist(p, q)


def hellinger_sq(p: Distribution, q: Distribution) -> float:
    """Squared Hellinger distance ``0.5 * sum (sqrt(p_i) - sqrt(q_i))^2``."""
    _check_same_d(p, q)
    return float(0.5 * ((np.sqrt(p.probs) - np.sqrt(q.probs)) ** 2).sum())


def matrix_tv_norm(a: TransitionMatrix, b: TransitionMatrix) -> float:
    """Half the maximum row-wise L1 distance between two kernels, in [0, 1]."""
    if a.d != b.d:
        raise DimensionMismatchError(f"dimension mismatch: {a.d} vs {b.d}")
    return float(0.5 * np.abs(a.rows - b.rows).sum(axis=1).max())


def _spectral_radius_nonneg(
    g: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 10**6,
    start: str = "random",
    seed: int | None = 0,
) -> float:
    """Perron root of a non-negative matrix by power iteration.

    Stops once the geometric-tail estimate of the remaining error drops below
    ``tol * rho``.  The dominant eigenvalue of a non-negative matrix is real
    and reachable from any strictly positive start vector.
    """
    d = g.shape[0]
    if start == "ones":
        v = np.ones(d)
    else:
        v = 1.0 + np.random.default_rng(seed).random(d)
    v /= v.sum()
    rho_prev = 0.0
    delta_prev = np.inf
    for _ in range(max_iter):
        w = v @ g
        rho = float(w.sum())  # v is L1-normalized and non-negative
        if rho == 0.0:
            return 0.0
        delta = abs(rho - rho_prev)
        if delta_prev < np.inf and delta_prev > 0:
            ratio = min(delta / delta_prev, 0.999999)
            tail = delta * ratio / (1.0 - ratio)
        else:
            tail = delta
        if delta <= tol * rho and tail <= tol * max(rho, 1e-300):
            return rho
        rho_prev = rho
        delta_prev = delta if delta > 0 else delta_prev
        v = w / rho
    raise PowerIterationNoConvergenceError(
        f"power iteration did not converge within {max_iter} iterations"
    )


def kazakos_dist(
    a: TransitionMatrix,
    b: TransitionMatrix,
    tol: float = 1e-10,
    max_iter: int = 10**6,
    start: str = "random",
    seed: int | None = 0,
) -> float:
    """Geometric-mean spectral pseudo-distance between two kernels.

    ``1 - rho(G)`` where ``G(i,j) = sqrt(a(i,j) * b(i,j))`` and ``rho`` is the
    spectral radius, computed by power iteration.  Vanishes whenever the two
    chains share an identical closed communicating component, so it is only a
    pseudo-distance; ``matrix_tv_norm`` dominates it (max row L1 >= 2 * kazakos).
    """
    if a.d != b.d:
        raise DimensionMismatchError(f"dimension mismatch: {a.d} vs {b.d}")
    g = np.sqrt(a.rows * b.rows)
    rho = _spectral_radius_nonneg(g, tol=tol, max_iter=max_iter, start=start, seed=seed)
    return max(0.0, 1.0 - rho)


# ---------------------------------------------------------------------------
# sampling


def _cumulative_rows(rows: np.ndarray) -> np.ndarray:
    c = np.cumsum(rows, axis=1)
    c[:, -1] = 1.0  # guard against  fp undershoot at the right edge
    return c


def _states_from_uniforms(
    cum_init: np.ndarray, cum_rows: np.ndarray, u: np.ndarray
) -> np.ndarray:
    """Inverse-CDF stepping shared by the scalar and batched samplers.

    ``u`` has shape (k, m): one row of uniforms per trajectory.  Identical
    uniforms always produce identical trajectories, so a batch run and k
    single runs with the same per-trajectory seeds agree bit for bit.
    """
    k, m = u.shape
    d = cum_rows.shape[0]
    out = np.empty((k, m), dtype=np.int64)
    s = np.minimum(np.searchsorted(cum_init, u[:, 0], side="right"), d - 1)
    out[:, 0] = s
    for t in range(1, m):
        c = cum_rows[s]
        s = (c <= u[:, t, None]).sum(axis=1)
        np.minimum(s, d - 1, out=s)
        out[:, t] = s
    return out


def sample_trajectory(
    chain: TransitionMatrix, initial: Distribution, m: int, seed: int
) -> Trajectory:
    """Draw a length-``m`` trajectory; bit-reproducible for a fixed seed."""
    if initial.d != chain.d:
        raise DimensionMismatchError(
            f"initial distribution dimension {initial.d} != chain dimension {chain.d}"
        )
    if m < 1:
        raise TooShortError("trajectory length must be >= 1")
    u = np.random.default_rng(seed).random(int(m))
    cum_init = np.cumsum(initial.probs)
    cum_init[-1] = 1.0
    states = _states_from_uniforms(cum_init, _cumulative_rows(chain.rows), u[None, :])[0]
    return Trajectory(states, chain.d, int(m))


def sample_trajectories(
    chain: TransitionMatrix,
    initial: Distribution,
    m: int,
    seeds: list[int] | np.ndarray,
) -> np.ndarray:
    """Draw one trajectory per seed, stepping all of them in lockstep.

    Returns an ``(len(seeds), m)`` int array.  Row ``i`` equals
    ``sample_trajectory(chain, initial, m, seeds[i]).states`` exactly.
    """
    if initial.d != chain.d:
        raise DimensionMismatchError("initial distribution does not match chain")
    if m < 1:
        raise TooShortError("trajectory length must be >= 1")
    u = np.stack([np.random.default_rng(int(s)).random(int(m)) for s in seeds])
    cum_init = np.cumsum(initial.probs)
    cum_init[-1] = 1.0
    return _states_from_uniforms(cum_init, _cumulative_rows(chain.rows), u)


# ---------------------------------------------------------------------------
# time reversal


def time_reversal(chain: TransitionMatrix, pi: Distribution) -> TransitionMatrix:
    """Reversed kernel ``M*(i,j) = pi(j) M(j,i) / pi(i)``.

    ``pi`` must be stationary for ``chain`` (checked to 1e-8) and strictly
    positive.  Reversal is an involution on strictly positive kernels, and a
    reversible chain is a fixed point.
    """
    if pi.d != chain.d:
        raise DimensionMismatchError("stationary vector does not match chain")
    if (pi.probs <= 0).any():
        raise ZeroStationaryMassError("stationary distribution must be strictly positive")
    resid = np.abs(pi.probs @ chain.rows - pi.probs).max()
    if resid > 1e-8:
        raise NotStationaryError(f"pi M != pi (max residual {resid:.3e})")
    rev = (chain.rows * pi.probs[:, None]).T / pi.probs[:, None]
    # rows of rev sum to 1 exactly up to fp noise; renormalize defensively
    return TransitionMatrix(rev / rev.sum(axis=1, keepdims=True), chain.d)


def is_reversible(chain: TransitionMatrix, pi: Distribution, tol: float = 1e-8) -> bool:
    """Detailed-balance check ``pi_i M_ij == pi_j M_ji`` within ``tol``."""
    f = chain.rows * pi.probs[:, None]
    return bool(np.abs(f - f.T).max() <= tol)


# ---------------------------------------------------------------------------
# file formats

# Chain files are JSON: {"d": int, "matrix": [[...], ...], "initial": [...]?}
# Trajectory files are ASCII: whitespace/newline-separated 0-based indices.


def save_chain(
    path: str | Path,
    chain: TransitionMatrix,
    initial: Distribution | None = None,
) -> None:
    doc: dict = {"d": chain.d, "matrix": chain.rows.tolist()}
    if initial is not None:
        doc["initial"] = initial.probs.tolist()
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_chain(path: str | Path) -> tuple[TransitionMatrix, Distribution | None]:
    doc = json.loads(Path(path).read_text())
    chain = validate_chain(doc["matrix"])
    if chain.d != int(doc.get("d", chain.d)):
        raise DimensionMismatchError("declared d does not match matrix shape")
    initial = None
    if doc.get("initial") is not None:
        initial = make_distribution(doc["initial"])
        if initial.d != chain.d:
            raise DimensionMismatchError("initial distribution does not match matrix")
    return chain, initial


def save_trajectory(path: str | Path, x: Trajectory) -> None:
    Path(path).write_text("\n".join(str(int(s)) for s in x.states) + "\n")


def load_trajectory(path: str | Path, d: int) -> Trajectory:
    tokens = Path(path).read_text().split()
    if not tokens:
        raise TooShortError(f"trajectory file {path} is empty")
    return make_trajectory([int(t) for t in tokens], d)
