"""Black-box iid identity testers used per chain state.

The base test compares a weighted, centered chi-square style statistic

    Z = sum_i ((N_i - n q_i)^2 - N_i) / q_i^(2/3)

against a threshold obtained by parametric bootstrap under the null
(``calibrate_threshold``).  With ``q`` uniform the statistic collapses to a
collision-style uniformity statistic; the ``q_i^(2/3)`` weights give it
instance-specific behaviour for skewed references, which is why one code
path serves both the worst-case and the instance-optimal sample sizes.

A sample landing on a zero-probability reference cell is infinite evidence
against identity: the statistic is reported as ``+inf`` and those cells are
excluded from the sum, so ``reject == statistic > threshold`` stays exact.

Confidence is boosted from the base per-invocation level to ``delta`` by a
majority vote over ``ceil(18 ln(2/delta))`` disjoint sample blocks.  The
block count is calibrated against a per-block error level of 1/3: at that
level the binomial tail of the majority actually drops below ``delta``
(``KL(1/2 || 1/3) > 1/18``), which a per-block level of exactly 2/5 would
not achieve.  Ties reject.

Calibrated thresholds depend only on (reference hash, n, level, trials,
seed) and are cached; the cache can be saved to / loaded from a JSON
sidecar.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .chains import Distribution
from .constants import DEFAULT_CONSTANTS, TestingConstants
from .errors import (
    CountMismatchError,
    DimensionMismatchError,
    InsufficientSampleError,
    ParameterOutOfRangeError,
)
from .seeding import split_seed

#: per-invocation failure level of the unamplified tester exposed in configs
BASE_LEVEL = 2.0 / 5.0

#: per-block error level targeted inside the majority-vote amplifier
BLOCK_LEVEL = 1.0 / 3.0


@dataclass(frozen=True)
class IidTestConfig:
    """Frozen configuration of a single iid identity test."""

    reference: Distribution
    eps: float          # row-level L1 separation budget
    delta0: float       # per-invocation failure probability
    threshold: float    # calibrated statistic cutoff
    n_required: int     # observations consumed by one invocation

    def __post_init__(self):
        if not 0 < self.eps <= 2:
            raise ParameterOutOfRangeError(f"eps must be in (0, 2], got {self.eps}")
        if not 0 < self.delta0 < 1:
            raise ParameterOutOfRangeError(f"delta0 must be in (0, 1), got {self.delta0}")
        if self.n_required < 1:
            raise ParameterOutOfRangeError("n_required must be >= 1")


@dataclass(frozen=True)
class IidVerdict:
    reject: bool
    statistic: float
    threshold: float
    n_used: int


def two_thirds_pseudo_norm(q: np.ndarray | Distribution) -> float:
    """``(sum_i q_i^(2/3))^(3/2)``; equals sqrt(d) for uniform, 1 for a point mass."""
    p = q.probs if isinstance(q, Distribution) else np.asarray(q, dtype=float)
    return float((p ** (2.0 / 3.0)).sum() ** 1.5)


def iid_block_count(delta: float, block_level: float = BLOCK_LEVEL) -> int:
    """Number of majority-vote blocks needed to reach confidence ``1 - delta``."""
    if not 0 < delta < 1:
        raise ParameterOutOfRangeError(f"delta must be in (0, 1), got {delta}")
    if delta >= block_level:
        return 1
    return math.ceil(18.0 * math.log(2.0 / delta))


def iid_base_sample_size(
    eps: float,
    *,
    d: int | None = None,
    q: Distribution | None = None,
    mode: str = "worst_case",
    constants: TestingConstants = DEFAULT_CONSTANTS,
) -> int:
    """Per-block sample size for the base tester at L1 budget ``eps``.

    ``worst_case`` mode uses sqrt(d); ``instance`` mode uses the 2/3
    pseudo-norm of the reference row (always <= sqrt(d)).
    """
    if not 0 < eps <= 2:
        raise ParameterOutOfRangeError(f"eps must be in (0, 2], got {eps}")
    if mode == "worst_case":
        if d is None:
            if q is None:
                raise ParameterOutOfRangeError("worst_case mode needs d or q")
            d = q.d
        budget = constants.c_iid * math.sqrt(d)
    elif mode == "instance":
        if q is None:
            raise ParameterOutOfRangeError("instance mode needs the reference q")
        budget = constants.c_io * two_thirds_pseudo_norm(q)
    else:
        raise ParameterOutOfRangeError(f"unknown mode {mode!r}")
    return max(1, math.ceil(budget / eps**2))


def iid_sample_size(
    d: int,
    eps: float,
    delta: float,
    mode: str = "worst_case",
    q: Distribution | None = None,
    constants: TestingConstants = DEFAULT_CONSTANTS,
) -> int:
    """Total observations consumed by the amplified tester: blocks * block size."""
    return iid_block_count(delta) * iid_base_sample_size(
        eps, d=d, q=q, mode=mode, constants=constants
    )


# ---------------------------------------------------------------------------
# statistic


def vv_statistic(counts, q: Distribution, n: int) -> float:
    """Weighted centered chi-square statistic of a size-``n`` histogram.

    Exact enumeration of small multinomials fixes the per-cell null
    expectation at ``E[(N_i - n q_i)^2 - N_i] = -n q_i^2``, so the null mean
    of the statistic is ``-n * sum_i q_i^(4/3) < 0``.  Returns ``+inf`` when
    any count sits on a zero-probability reference cell.
    """
    c = np.asarray(counts, dtype=np.int64)
    if c.ndim != 1 or c.size != q.d:
        raise CountMismatchError(f"counts length {c.size} != alphabet size {q.d}")
    if int(c.sum()) != int(n):
        raise CountMismatchError(f"counts sum to {int(c.sum())}, expected n={n}")
    return float(_statistic_batch(c[None, :], q.probs, n)[0])


def _statistic_batch(count_rows: np.ndarray, q: np.ndarray, n: int) -> np.ndarray:
    """Vectorized statistic over a (blocks, d) matrix of histograms."""
    support = q > 0.0
    z = np.full(count_rows.shape[0], np.inf)
    ok = ~(count_rows[:, ~support] > 0).any(axis=1)
    qs = q[support]
    w = qs ** (-2.0 / 3.0)
    cs = count_rows[np.ix_(ok, support)]
    dev = cs - n * qs[None, :]
    z[ok] = ((dev * dev - cs) * w[None, :]).sum(axis=1)
    return z


# ---------------------------------------------------------------------------
# threshold calibration


def calibrate_threshold(
    q: Distribution, n: int, delta0: float, trials: int, seed: int
) -> float:
    """Empirical ``(1 - delta0)``-quantile of the statistic under the null.

    Parametric bootstrap: simulate ``trials`` iid samples of size ``n`` from
    ``q`` and take the upper quantile (method "higher", so the realized
    false-reject rate is at most ``delta0`` on the simulated sample).
    Deterministic for a fixed seed.
    """
    if trials < 1:
        raise ParameterOutOfRangeError("trials must be >= 1")
    if not 0 < delta0 < 1:
        raise ParameterOutOfRangeError(f"delta0 must be in (0, 1), got {delta0}")
    if n < 1:
        raise ParameterOutOfRangeError("n must be >= 1")
    rng = np.random.default_rng(seed)
    p = q.probs / q.probs.sum()
    counts = rng.multinomial(int(n), p, size=int(trials))
    z = _statistic_batch(counts, q.probs, int(n))
    return float(np.quantile(z, 1.0 - delta0, method="higher"))


def _q_hash(q: Distribution) -> str:
    return hashlib.sha256(np.round(q.probs, 12).tobytes()).hexdigest()[:16]


class ThresholdCache:
    """Thread-safe memo of calibrated thresholds, with a JSON sidecar format.

    Keys are (reference hash, n, delta0, trials, seed), so two processes with
    the same inputs always agree on thresholds regardless of scheduling.
    """

    def __init__(self):
        self._data: dict[tuple, float] = {}
        self._lock = threading.Lock()

    def get_or_compute(
        self, q: Distribution, n: int, delta0: float, trials: int, seed: int
    ) -> float:
        key = (_q_hash(q), int(n), float(delta0), int(trials), int(seed))
        with self._lock:
            hit = self._data.get(key)
        if hit is not None:
            return hit
        value = calibrate_threshold(q, n, delta0, trials, seed)
        with self._lock:
            self._data[key] = value
        return value

    def save(self, path: str | Path) -> None:
        with self._lock:
            doc = [{"key": list(k), "threshold": v} for k, v in self._data.items()]
        Path(path).write_text(json.dumps(doc, indent=2) + "\n")

    def load(self, path: str | Path) -> None:
        doc = json.loads(Path(path).read_text())
        with self._lock:
            for item in doc:
                self._data[tuple(item["key"])] = float(item["threshold"])


_shared_cache = ThresholdCache()


def make_iid_config(
    q: Distribution,
    eps: float,
    delta0: float = BASE_LEVEL,
    *,
    mode: str = "worst_case",
    constants: TestingConstants = DEFAULT_CONSTANTS,
    calib_trials: int = 4000,
    seed: int = 0,
    cache: ThresholdCache | None = None,
) -> IidTestConfig:
    """Build a ready-to-run config: sample size plus calibrated threshold."""
    n = iid_base_sample_size(eps, q=q, mode=mode, constants=constants)
    cache = cache or _shared_cache
    thr = cache.get_or_compute(
        q, n, delta0, calib_trials, split_seed(seed, "threshold", n, _q_hash(q))
    )
    return IidTestConfig(reference=q, eps=eps, delta0=delta0, threshold=thr, n_required=n)


def iid_identity_test(sample, config: IidTestConfig) -> IidVerdict:
    """Run the base test on the first ``config.n_required`` observations."""
    x = np.asarray(sample, dtype=np.int64)
    if x.size < config.n_required:
        raise InsufficientSampleError(config.n_required, x.size)
    n = config.n_required
    head = x[:n]
    if head.min() < 0 or head.max() >= config.reference.d:
        raise DimensionMismatchError("sample contains out-of-range states")
    counts = np.bincount(head, minlength=config.reference.d)
    z = float(_statistic_batch(counts[None, :], config.reference.probs, n)[0])
    return IidVerdict(reject=bool(z > config.threshold), statistic=z,
                      threshold=config.threshold, n_used=n)


# ---------------------------------------------------------------------------
# amplification


def majority_vote_test(
    sample,
    q: Distribution,
    n_base: int,
    blocks: int,
    *,
    delta0: float = BLOCK_LEVEL,
    calib_trials: int = 4000,
    seed: int = 0,
    cache: ThresholdCache | None = None,
) -> IidVerdict:
    """Majority vote of the base test over ``blocks`` disjoint blocks.

    Leftover observations beyond ``blocks * n_base`` are ignored; ties
    reject.  The aggregate verdict is encoded with the rejecting-block count
    as the statistic and ``(blocks - 1) / 2`` as the threshold.
    """
    x = np.asarray(sample, dtype=np.int64)
    need = blocks * n_base
    if x.size < need:
        raise InsufficientSampleError(need, x.size)
    cache = cache or _shared_cache
    thr = cache.get_or_compute(
        q, n_base, delta0, calib_trials, split_seed(seed, "threshold", n_base, _q_hash(q))
    )
    flat = x[:need]
    if flat.min() < 0 or flat.max() >= q.d:
        raise DimensionMismatchError("sample contains out-of-range states")
    # per-block histograms in one pass via offset bincount
    offsets = np.repeat(np.arange(blocks) * q.d, n_base)
    counts = np.bincount(flat + offsets, minlength=blocks * q.d).reshape(blocks, q.d)
    z = _statistic_batch(counts, q.probs, n_base)
    reject_count = int((z > thr).sum())
    return IidVerdict(
        reject=bool(reject_count > (blocks - 1) / 2),
        statistic=float(reject_count),
        threshold=(blocks - 1) / 2,
        n_used=need,
    )


def amplified_test(
    sample,
    q: Distribution,
    eps: float,
    delta: float,
    constants: TestingConstants = DEFAULT_CONSTANTS,
    seed: int = 0,
    *,
    mode: str = "worst_case",
    calib_trials: int = 4000,
    cache: ThresholdCache | None = None,
) -> IidVerdict:
    """Amplified identity test at confidence ``1 - delta``.

    Degenerates to a single base invocation when one block already meets the
    requested confidence.
    """
    n_base = iid_base_sample_size(eps, q=q, mode=mode, constants=constants)
    blocks = iid_block_count(delta)
    return majority_vote_test(
        sample, q, n_base, blocks,
        delta0=BLOCK_LEVEL, calib_trials=calib_trials, seed=seed, cache=cache,
    )
