"""Derived quantities of a fully known reference chain.

Everything here is computed offline, once per reference: stationary
distribution and its minimum entry, the exact mixing time (worst-case start,
total variation threshold 1/4), spectral gaps with the standard two-sided
mixing-time brackets, the stationary-weighted 2/3-norm, and the trajectory
lengths the identity tester needs for a given (eps, delta).

The mixing time takes its supremum over initial distributions at a simplex
vertex (TV is convex in the start), so only point-mass starts are scanned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .chains import Distribution, TransitionMatrix, is_reversible
from .constants import DEFAULT_CONSTANTS, TestingConstants
from .errors import (
    CapExceededError,
    MissingGapError,
    NotErgodicError,
    NotReversibleError,
    NotStationaryError,
    ParameterOutOfRangeError,
    ZeroStationaryMassError,
)
from .iid import iid_base_sample_size, iid_block_count, two_thirds_pseudo_norm


@dataclass(frozen=True)
class ChainAnalysis:
    """Bundle of reference-chain quantities consumed by the tester."""

    d: int
    pi: Distribution
    pi_min: float
    t_mix_exact: int | None          # None when the step cap was hit
    reversible: bool
    gamma_abs: float | None          # absolute spectral gap, reversible only
    gamma_ps: float                  # pseudo-spectral gap (truncated maximum)
    gamma_ps_err: float              # additive truncation error bound
    two_thirds_pi_norm: float
    row_two_thirds_norms: np.ndarray  # per-row 2/3 pseudo-norms


@dataclass(frozen=True)
class SampleComplexityPlan:
    """Required trajectory lengths for both sizing modes, plus diagnostics."""

    m_worst_case: int
    m_instance: int
    eps: float
    delta: float
    constants: TestingConstants
    m_mixing_branch: int
    m_iid_branch_worst: int
    m_iid_branch_instance: int

    def length(self, mode: str) -> int:
        if mode == "worst_case":
            return self.m_worst_case
        if mode == "instance":
            return self.m_instance
        raise ParameterOutOfRangeError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# ergodicity


def check_ergodic(chain: TransitionMatrix) -> None:
    """Raise ``NotErgodicError`` unless the chain is irreducible and aperiodic.

    Exact combinatorial check on the support digraph: strong connectivity,
    then period = gcd of (level[u] + 1 - level[v]) over support edges of a
    BFS level assignment.
    """
    support = csr_matrix(chain.rows > 0.0)
    n_comp, _ = connected_components(support, directed=True, connection="strong")
    if n_comp > 1:
        raise NotErgodicError("reducible", f"{n_comp} strongly connected components")
    order, preds = breadth_first_order(support, 0, directed=True, return_predecessors=True)
    level = np.zeros(chain.d, dtype=np.int64)
    for node in order[1:]:
        level[node] = level[preds[node]] + 1
    rows, cols = (chain.rows > 0.0).nonzero()
    g = 0
    for u, v in zip(rows, cols):
        g = math.gcd(g, int(level[u]) + 1 - int(level[v]))
    if abs(g) != 1:
        raise NotErgodicError("periodic", f"period {abs(g)}")


def stationary_distribution(chain: TransitionMatrix, tol: float = 1e-12) -> Distribution:
    """Unique stationary distribution of an ergodic chain.

    Direct least-squares solve of the singular system with a normalization
    row, refined by fixed-point iteration until ``||pi M - pi||_1 <= tol``.
    """
    check_ergodic(chain)
    d = chain.d
    a = np.vstack([chain.rows.T - np.eye(d), np.ones((1, d))])
    b = np.zeros(d + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    for _ in range(100_000):
        resid = float(np.abs(pi @ chain.rows - pi).sum())
        if resid <= tol:
            break
        pi = pi @ chain.rows
        pi /= pi.sum()
    else:
        raise CapExceededError(100_000, "stationary-distribution refinement")
    return Distribution(pi, d)


# ---------------------------------------------------------------------------
# mixing time and gaps


def exact_mixing_time(
    chain: TransitionMatrix, pi: Distribution, t_cap: int = 10**6
) -> int:
    """Smallest ``t >= 1`` with worst-start TV to ``pi`` at most 1/4."""
    _require_stationary(chain, pi)
    power = chain.rows.copy()
    for t in range(1, t_cap + 1):
        worst = 0.5 * np.abs(power - pi.probs[None, :]).sum(axis=1).max()
        if worst <= 0.25:
            return t
        power = power @ chain.rows
    raise CapExceededError(t_cap, "mixing")


def vertex_tv_profile(
    chain: TransitionMatrix, pi: Distribution, t_max: int
) -> np.ndarray:
    """Worst point-mass-start TV to ``pi`` after t = 1..t_max steps."""
    out = np.empty(t_max)
    power = chain.rows.copy()
    for t in range(t_max):
        out[t] = 0.5 * np.abs(power - pi.probs[None, :]).sum(axis=1).max()
        power = power @ chain.rows
    return out


def _require_stationary(chain: TransitionMatrix, pi: Distribution, tol: float = 1e-8) -> None:
    if pi.d != chain.d:
        raise NotStationaryError("stationary vector dimension mismatch")
    resid = np.abs(pi.probs @ chain.rows - pi.probs).max()
    if resid > tol:
        raise NotStationaryError(f"pi M != pi (max residual {resid:.3e})")


def _symmetrized(chain: TransitionMatrix, pi: Distribution) -> np.ndarray:
    root = np.sqrt(pi.probs)
    return chain.rows * (root[:, None] / root[None, :])


def absolute_spectral_gap(chain: TransitionMatrix, pi: Distribution) -> float:
    """``1 - max(lambda_2, |lambda_d|)`` of a reversible kernel.

    Goes through the pi-symmetrized kernel so the spectrum is real by
    construction.
    """
    _require_stationary(chain, pi)
    if (pi.probs <= 0).any():
        raise ZeroStationaryMassError("stationary distribution must be strictly positive")
    if not is_reversible(chain, pi):
        raise NotReversibleError("chain is not reversible w.r.t. pi")
    lam = np.sort(np.linalg.eigvalsh(_symmetrized(chain, pi)))
    second = lam[-2] if chain.d > 1 else -1.0
    return float(1.0 - max(second, abs(lam[0]) if chain.d > 1 else 0.0))


def pseudo_spectral_gap(
    chain: TransitionMatrix, pi: Distribution, k_max: int
) -> tuple[float, float]:
    """``max_{k <= k_max} gap((M*)^k M^k) / k`` and its truncation error bound.

    ``(M*)^k M^k`` is reversible with a non-negative spectrum, so its gap is
    ``1 - sigma_2(B^k)^2`` for the symmetrized kernel ``B``.  Ignoring
    ``k > k_max`` costs at most ``1 / k_max`` additively.
    """
    if k_max < 1:
        raise ParameterOutOfRangeError("k_max must be >= 1")
    _require_stationary(chain, pi)
    if (pi.probs <= 0).any():
        raise ZeroStationaryMassError("stationary distribution must be strictly positive")
    b = _symmetrized(chain, pi)
    bk = b.copy()
    best = 0.0
    for k in range(1, k_max + 1):
        sigma = np.linalg.svd(bk, compute_uv=False)
        gap = max(0.0, 1.0 - float(sigma[1]) ** 2) if chain.d > 1 else 0.0
        best = max(best, gap / k)
        if k < k_max:
            bk = bk @ b
    return best, 1.0 / k_max


def reversible_mixing_bounds(gamma_abs: float, pi_min: float) -> tuple[float, float]:
    """Two-sided mixing-time bracket from the absolute spectral gap."""
    if not 0 < gamma_abs <= 1:
        raise ParameterOutOfRangeError(f"gamma_abs must be in (0, 1], got {gamma_abs}")
    lower = (1.0 / gamma_abs - 1.0) * math.log(2.0)
    upper = math.log(4.0 / pi_min) / gamma_abs
    return lower, upper


def nonreversible_mixing_bounds(gamma_ps: float, pi_min: float) -> tuple[float, float]:
    """Two-sided mixing-time bracket from the pseudo-spectral gap."""
    if gamma_ps <= 0:
        raise ParameterOutOfRangeError(f"gamma_ps must be positive, got {gamma_ps}")
    lower = 1.0 / (2.0 * gamma_ps)
    upper = (math.log(1.0 / pi_min) + 2.0 * math.log(2.0) + 1.0) / gamma_ps
    return lower, upper


def mixing_time_bounds(analysis: "ChainAnalysis") -> tuple[float, float]:
    """The applicable (reversible or pseudo-spectral) mixing-time bracket."""
    if analysis.reversible:
        if analysis.gamma_abs is None:
            raise MissingGapError("reversible analysis lacks gamma_abs")
        return reversible_mixing_bounds(analysis.gamma_abs, analysis.pi_min)
    if analysis.gamma_ps <= 0:
        raise MissingGapError("pseudo-spectral gap unavailable or zero")
    return nonreversible_mixing_bounds(analysis.gamma_ps, analysis.pi_min)


# ---------------------------------------------------------------------------
# 2/3 norm


def two_thirds_pi_norm(chain: TransitionMatrix, pi: Distribution) -> float:
    """``max_i (sum_j M(i,j)^(2/3))^(3/2) / pi(i)``; always <= sqrt(d)/pi_min."""
    _require_stationary(chain, pi)
    if (pi.probs <= 0).any():
        raise ZeroStationaryMassError("stationary distribution must be strictly positive")
    return float(np.max(row_two_thirds_norms(chain) / pi.probs))


def row_two_thirds_norms(chain: TransitionMatrix) -> np.ndarray:
    return (chain.rows ** (2.0 / 3.0)).sum(axis=1) ** 1.5


# ---------------------------------------------------------------------------
# full analysis


def analyze_chain(
    chain: TransitionMatrix,
    *,
    t_cap: int = 10**6,
    k_max: int | None = None,
    stationary_tol: float = 1e-12,
) -> ChainAnalysis:
    """Compute the full analysis bundle for an ergodic reference chain.

    ``k_max`` for the pseudo-spectral gap defaults to
    ``max(64, 4 * t_mix_exact)``, which is large enough that the truncated
    maximum coincides with the untruncated one.
    """
    pi = stationary_distribution(chain, tol=stationary_tol)
    t_mix = exact_mixing_time(chain, pi, t_cap=t_cap)
    reversible = is_reversible(chain, pi)
    gamma_abs = absolute_spectral_gap(chain, pi) if reversible else None
    if k_max is None:
        k_max = max(64, 4 * t_mix)
    gamma_ps, gamma_ps_err = pseudo_spectral_gap(chain, pi, k_max)
    norms = row_two_thirds_norms(chain)
    return ChainAnalysis(
        d=chain.d,
        pi=pi,
        pi_min=pi.min(),
        t_mix_exact=t_mix,
        reversible=reversible,
        gamma_abs=gamma_abs,
        gamma_ps=gamma_ps,
        gamma_ps_err=gamma_ps_err,
        two_thirds_pi_norm=float(np.max(norms / pi.probs)),
        row_two_thirds_norms=norms,
    )


# ---------------------------------------------------------------------------
# sample complexity


def _row_eps(eps: float) -> float:
    # public eps is a kernel-TV separation; rows get a 2*eps L1 budget,
    # capped at the diameter of the simplex
    return min(2.0 * eps, 2.0)


def mixing_branch_length(
    analysis: ChainAnalysis, delta: float, constants: TestingConstants
) -> int:
    """Trajectory length driven by visit-count concentration."""
    if analysis.t_mix_exact is None:
        raise ParameterOutOfRangeError("analysis has no exact mixing time")
    val = (
        constants.c_m
        * analysis.t_mix_exact
        / analysis.pi_min
        * math.log(analysis.d / (delta * analysis.pi_min))
    )
    return max(2, math.ceil(val))


def iid_branch_length(
    analysis: ChainAnalysis,
    eps: float,
    delta: float,
    mode: str,
    constants: TestingConstants,
) -> int:
    """Smallest ``m`` whose per-state successor budget covers every sub-test.

    The tester hands state ``i`` the successors of its first
    ``ceil((m-1) pi(i) / 2)`` visits, so ``m`` must satisfy
    ``(m-1) pi(i) / 2 >= blocks * n_base(i)`` for all ``i``.
    """
    blocks = iid_block_count(delta / (3.0 * analysis.d))
    eps_row = _row_eps(eps)
    worst = 0.0
    for i in range(analysis.d):
        if mode == "worst_case":
            n_base = iid_base_sample_size(eps_row, d=analysis.d, mode=mode, constants=constants)
        else:
            n_base = max(
                1,
                math.ceil(constants.c_io * float(analysis.row_two_thirds_norms[i]) / eps_row**2),
            )
        worst = max(worst, 2.0 * blocks * n_base / float(analysis.pi.probs[i]))
    return max(2, 1 + math.ceil(worst))


def sample_complexity(
    analysis: ChainAnalysis,
    eps: float,
    delta: float,
    mode: str = "worst_case",
    constants: TestingConstants = DEFAULT_CONSTANTS,
    d: int | None = None,
) -> SampleComplexityPlan:
    """Required trajectory length: max of the mixing and iid branches.

    The worst-case branch scales like ``sqrt(d) / (pi_min eps^2)`` times log
    factors; instance mode replaces ``sqrt(d) / pi_min`` with the
    stationary-weighted 2/3-norm, so it is never larger for equal constants.
    """
    if not 0 < eps < 2:
        raise ParameterOutOfRangeError(f"eps must be in (0, 2), got {eps}")
    if not 0 < delta < 1:
        raise ParameterOutOfRangeError(f"delta must be in (0, 1), got {delta}")
    if d is not None and d != analysis.d:
        raise ParameterOutOfRangeError(f"d={d} does not match analysis d={analysis.d}")
    m_mix = mixing_branch_length(analysis, delta, constants)
    m_iid_wc = iid_branch_length(analysis, eps, delta, "worst_case", constants)
    m_iid_io = iid_branch_length(analysis, eps, delta, "instance", constants)
    return SampleComplexityPlan(
        m_worst_case=max(m_mix, m_iid_wc),
        m_instance=max(m_mix, m_iid_io),
        eps=eps,
        delta=delta,
        constants=constants,
        m_mixing_branch=m_mix,
        m_iid_branch_worst=m_iid_wc,
        m_iid_branch_instance=m_iid_io,
    )
