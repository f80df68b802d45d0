"""Subspace-similarity user clustering and rate-based partition selection.

Two user groups are similar when their estimated channel column spaces share
principal directions. The projection-Frobenius score

    s(H_k, H_j) = trace(P_k P_j) / min(N_k, N_j)

(with P the orthogonal projector onto a column space) is the mean squared
cosine of the principal angles and lives in [0, 1]. For well-separated
cluster sizes the raw score is biased, so it is standardized against the
mean and deviation it takes on independent isotropic subspaces of the same
sizes; those constants are estimated once per (M, N_k, N_j) by Monte Carlo
and cached. Standardization needs M > N_k + N_j, otherwise the raw score is
used as is.

A bottom-up agglomeration merges the most similar pair of clusters one step
at a time, yielding N nested partitions from all-singletons to a single
universal cluster; the level with the best achievable rate is the clustering
decision. For small N an exhaustive sweep over all set partitions serves as
the optimality reference.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .channel import ChannelSet
from .errors import (
    CalibrationError,
    DegenerateInputError,
    NoFeasiblePartitionError,
    ResourceLimitError,
)
from .hrs import HrsConfig, RateBreakdown, evaluate_partition
from .partitions import Partition, enumerate_partitions

CONDITION_LIMIT = 1e12
MIN_CALIBRATION_DRAWS = 2000
EXHAUSTIVE_USER_LIMIT = 6


def projection_matrix(H_j: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto the column space of a full-column-rank matrix."""
    H_j = np.asarray(H_j)
    if H_j.ndim != 2 or H_j.shape[1] > H_j.shape[0]:
        raise DegenerateInputError(f"need a tall matrix, got shape {H_j.shape}")
    basis = _column_space_basis(H_j)
    return basis @ basis.conj().T


def _column_space_basis(H: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the column space, at most min(M, N) vectors.

    Clusters stacked wider than the antenna count generically span the whole
    array space; their projector is built from the min(M, N) leading singular
    vectors. A genuinely rank-deficient column set is rejected.
    """
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[1] < 1:
        raise DegenerateInputError(f"need a nonempty matrix, got shape {H.shape}")
    u, s, _ = np.linalg.svd(H, full_matrices=False)
    if s[-1] == 0.0 or s[0] / s[-1] > CONDITION_LIMIT:
        raise DegenerateInputError(
            f"matrix is numerically rank deficient (condition {s[0] / max(s[-1], np.finfo(float).tiny):.2e})"
        )
    return u


def pf_similarity(H_k: np.ndarray, H_j: np.ndarray) -> float:
    """Projection-Frobenius similarity of two channel column spaces.

    trace(P_k P_j) equals the squared Frobenius norm of U_k^H U_j for
    orthonormal bases U, which avoids forming the M x M projectors. The
    denominator stays min(N_k, N_j) even when a stack exceeds the antenna
    count and its column space saturates.
    """
    u_k = _column_space_basis(H_k)
    u_j = _column_space_basis(H_j)
    overlap = np.linalg.norm(u_k.conj().T @ u_j) ** 2
    return float(overlap / min(H_k.shape[1], H_j.shape[1]))


@dataclass
class SimilarityCalibration:
    """Cached mean/deviation of the similarity of independent random subspaces.

    Keys are (M, N_small, N_large); the score is symmetric so sizes are
    stored sorted.
    """

    num_draws: int = MIN_CALIBRATION_DRAWS
    seed: int = 0
    table: dict[tuple[int, int, int], tuple[float, float]] = field(default_factory=dict)

    @staticmethod
    def for_scenario(m: int, n_users: int, num_draws: int = MIN_CALIBRATION_DRAWS, seed: int = 0) -> "SimilarityCalibration":
        """Precompute every size pair an agglomeration over n_users can need."""
        calib = SimilarityCalibration(num_draws=num_draws, seed=seed)
        for small in range(1, n_users):
            for large in range(small, n_users):
                if small + large <= n_users and m > small + large:
                    calib.ensure(m, small, large)
        return calib

    def key(self, m: int, n_k: int, n_j: int) -> tuple[int, int, int]:
        return (m, min(n_k, n_j), max(n_k, n_j))

    def ensure(self, m: int, n_k: int, n_j: int) -> tuple[float, float]:
        key = self.key(m, n_k, n_j)
        if key not in self.table:
            self.table[key] = calibrate_similarity(
                m, key[1], key[2], self.num_draws, rng_seed=(self.seed, *key)
            )
        return self.table[key]

    def lookup(self, m: int, n_k: int, n_j: int) -> tuple[float, float]:
        key = self.key(m, n_k, n_j)
        if key not in self.table:
            raise CalibrationError(f"no calibration entry for (M, N_k, N_j) = {key}")
        return self.table[key]


def calibrate_similarity(
    m: int, n_k: int, n_j: int, num_draws: int = MIN_CALIBRATION_DRAWS, rng_seed=0
) -> tuple[float, float]:
    """Monte Carlo mean and deviation of the similarity under independence.

    Draws i.i.d. complex Gaussian matrix pairs; the analytic mean for
    isotropic subspaces is N_k N_j / (M min(N_k, N_j)), which the estimate
    approaches at rate 1/sqrt(draws).
    """
    if m <= n_k + n_j:
        raise CalibrationError(
            f"standardization needs M > N_k + N_j, got M={m}, sizes ({n_k}, {n_j})"
        )
    if num_draws < MIN_CALIBRATION_DRAWS:
        raise CalibrationError(f"need at least {MIN_CALIBRATION_DRAWS} draws")
    rng = np.random.default_rng(rng_seed)
    values = np.empty(num_draws)
    for i in range(num_draws):
        a = rng.standard_normal((m, n_k)) + 1j * rng.standard_normal((m, n_k))
        b = rng.standard_normal((m, n_j)) + 1j * rng.standard_normal((m, n_j))
        values[i] = pf_similarity(a, b)
    return float(values.mean()), float(values.std())


def normalized_similarity(
    H_k: np.ndarray, H_j: np.ndarray, calib: SimilarityCalibration | None
) -> float:
    """Standardized similarity when applicable, raw similarity otherwise."""
    n_k, n_j = H_k.shape[1], H_j.shape[1]
    m = H_k.shape[0]
    s = pf_similarity(H_k, H_j)
    if m > n_k + n_j:
        if calib is None:
            raise CalibrationError("calibration required for M > N_k + N_j")
        eta, sigma = calib.lookup(m, n_k, n_j)
        return (s - eta) / sigma
    return s


class MergeStep(NamedTuple):
    level: int  # index of the level the merge produced
    merged: tuple[tuple[int, ...], tuple[int, ...]]
    similarity: float


@dataclass(frozen=True)
class Dendrogram:
    """Nested partitions from all-singletons (level 0) to universal."""

    levels: tuple[Partition, ...]
    merge_trace: tuple[MergeStep, ...]


def agglomerate(H_hat: np.ndarray, calib: SimilarityCalibration | None) -> Dendrogram:
    """Greedy bottom-up clustering of users by channel-subspace similarity.

    At each step every pair of current clusters is scored on the stacked
    channel columns and the highest-scoring pair merges; ties go to the
    lexicographically smallest pair of block minima, which makes the merge
    order reproducible.
    """
    n = H_hat.shape[1]
    if n < 1:
        raise DegenerateInputError("need at least one user")
    blocks = [(u,) for u in range(1, n + 1)]
    levels = [Partition(tuple(blocks))]
    trace: list[MergeStep] = []
    while len(blocks) > 1:
        best_score, best_pair = -np.inf, None
        for i in range(len(blocks)):
            for j in range(i + 1, len(blocks)):
                cols = np.asarray(blocks[i], dtype=int) - 1
                cols_j = np.asarray(blocks[j], dtype=int) - 1
                score = normalized_similarity(H_hat[:, cols], H_hat[:, cols_j], calib)
                if score > best_score:
                    best_score, best_pair = score, (i, j)
        i, j = best_pair
        merged = tuple(sorted(blocks[i] + blocks[j]))
        trace.append(MergeStep(len(levels), (blocks[i], blocks[j]), float(best_score)))
        blocks = [b for k, b in enumerate(blocks) if k not in (i, j)]
        blocks.append(merged)
        blocks.sort(key=lambda b: b[0])
        levels.append(Partition(tuple(blocks)))
    return Dendrogram(tuple(levels), tuple(trace))


def best_partition(
    channels: ChannelSet, dendrogram: Dendrogram, config: HrsConfig
) -> tuple[Partition, RateBreakdown]:
    """Best-rate dendrogram level; ties prefer fewer groups."""
    best: tuple[Partition, RateBreakdown] | None = None
    for level in reversed(dendrogram.levels):  # universal first
        result = evaluate_partition(channels, level, config)
        if not result.feasible:
            continue
        if best is None or result.R_total > best[1].R_total:
            best = (level, result)
    if best is None:
        raise NoFeasiblePartitionError(
            "no dendrogram level is feasible for this antenna count"
        )
    return best


def exhaustive_best(
    channels: ChannelSet, config: HrsConfig
) -> tuple[Partition, RateBreakdown]:
    """Global best partition by full enumeration (small N only)."""
    n = channels.num_users
    if n > EXHAUSTIVE_USER_LIMIT:
        raise ResourceLimitError(
            f"exhaustive search is guarded at {EXHAUSTIVE_USER_LIMIT} users, got {n}"
        )
    best: tuple[Partition, RateBreakdown] | None = None
    for partition in enumerate_partitions(n):
        result = evaluate_partition(channels, partition, config)
        if not result.feasible:
            continue
        if (
            best is None
            or result.R_total > best[1].R_total
            or (
                result.R_total == best[1].R_total
                and partition.num_groups < best[0].num_groups
            )
        ):
            best = (partition, result)
    if best is None:
        raise NoFeasiblePartitionError("every partition is infeasible")
    return best
