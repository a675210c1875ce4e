"""Syndrome-based decoding: sufficient-statistic extraction, the pluggable
bit-flip estimator interface, thresholding, and message reconstruction.

The decoder never sees the codeword, only (|l|, H l^b); the estimator output
is a vector of k logits for the message-domain flip pattern, thresholded at
zero and xored with the hard-decision pseudo-inverse.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .bicm import FrameBatch, TransmissionRecord
from .gf2code import LinearCode
from .modem import hard_split

__all__ = [
    "SufficientStatistic",
    "Estimator",
    "ZeroEstimator",
    "OracleEstimator",
    "DecodeResult",
    "extract_statistic",
    "statistic_batch",
    "decode",
    "decode_batch",
    "make_training_pair",
    "make_training_batch",
    "map_noise_equivalence",
]


@dataclass(frozen=True)
class SufficientStatistic:
    """(|l|, H l^b) packed for the estimator.

    The packed vector has length r = 2n - k: reliabilities first, then the
    syndrome bits mapped to +-1 reals (0 -> +1, 1 -> -1) so both halves live
    on comparable scales.
    """

    reliabilities: np.ndarray  # (n,)
    syndrome: np.ndarray       # (n - k,) bits

    def vector(self) -> np.ndarray:
        return np.concatenate(
            [self.reliabilities, 1.0 - 2.0 * self.syndrome.astype(np.float64)]
        )

    @property
    def r(self) -> int:
        return self.reliabilities.size + self.syndrome.size


class Estimator(Protocol):
    """Bit-flip estimator: batch of packed statistics -> batch of k logits."""

    def predict(self, stats: np.ndarray) -> np.ndarray: ...


class ZeroEstimator:
    """Always predicts 'no flips'; decoding degrades to the hard pseudo-inverse."""

    def __init__(self, k: int):
        self.k = k

    def predict(self, stats: np.ndarray) -> np.ndarray:
        return np.zeros((stats.shape[0], self.k))


class OracleEstimator:
    """Replays known true flip patterns as +-1 logits (testing aid)."""

    def __init__(self, message_flips: np.ndarray):
        self.logits = 2.0 * np.atleast_2d(message_flips).astype(np.float64) - 1.0
        self._row = 0

    def predict(self, stats: np.ndarray) -> np.ndarray:
        out = self.logits[self._row:self._row + stats.shape[0]]
        self._row += stats.shape[0]
        return out


@dataclass(frozen=True)
class DecodeResult:
    u_hat: np.ndarray           # (k,) decoded message
    flip_hat: np.ndarray        # (k,) thresholded flip estimate
    scores: np.ndarray          # (k,) raw logits


def extract_statistic(code: LinearCode, llr: np.ndarray) -> SufficientStatistic:
    """Sufficient statistic (|l|, H l^b) of one LLR frame."""
    llr = np.asarray(llr, dtype=np.float64)
    if llr.shape != (code.n,):
        raise ValueError(f"llr length {llr.shape} != n = {code.n}")
    hard, reliab = hard_split(llr)
    return SufficientStatistic(reliabilities=reliab,
                               syndrome=code.syndrome(hard))


def statistic_batch(code: LinearCode, llr: np.ndarray) -> np.ndarray:
    """Packed statistic vectors for a (B, n) batch of LLR frames: (B, 2n-k)."""
    llr = np.asarray(llr, dtype=np.float64)
    hard, reliab = hard_split(llr)
    syn = code.syndrome(hard).astype(np.float64)
    return np.concatenate([reliab, 1.0 - 2.0 * syn], axis=-1)


def decode(code: LinearCode, llr: np.ndarray, est: Estimator) -> DecodeResult:
    """Estimate the message-domain flips from (|l|, H l^b) and undo them."""
    stat = extract_statistic(code, llr)
    scores = np.asarray(est.predict(stat.vector()[None, :]))[0]
    if scores.shape != (code.k,):
        raise ValueError(f"estimator returned {scores.shape}, expected ({code.k},)")
    flip_hat = (scores > 0).astype(np.uint8)
    hard, _ = hard_split(llr)
    u_hat = code.p_inv_apply(hard) ^ flip_hat
    return DecodeResult(u_hat=u_hat, flip_hat=flip_hat, scores=scores)


def decode_batch(code: LinearCode, llr: np.ndarray, est: Estimator) -> np.ndarray:
    """Vectorized decode of a (B, n) LLR batch; returns (B, k) messages."""
    stats = statistic_batch(code, llr)
    scores = np.asarray(est.predict(stats))
    flip_hat = (scores > 0).astype(np.uint8)
    hard, _ = hard_split(llr)
    return code.p_inv_apply(hard) ^ flip_hat


def make_training_pair(record: TransmissionRecord, code: LinearCode
                       ) -> tuple[SufficientStatistic, np.ndarray]:
    """(input statistic, target flip pattern) from one transmission."""
    stat = extract_statistic(code, record.llr)
    target = code.p_inv_apply(record.hard) ^ record.u
    return stat, target


def make_training_batch(batch: FrameBatch, code: LinearCode
                        ) -> tuple[np.ndarray, np.ndarray]:
    """(B, r) inputs and (B, k) flip targets from a simulated frame batch."""
    x = statistic_batch(code, batch.llr)
    t = code.p_inv_apply(batch.hard) ^ batch.u
    return x, t


def map_noise_equivalence(code: LinearCode, q: float, hard: np.ndarray
                          ) -> tuple[np.ndarray, np.ndarray]:
    """Exhaustive message-side and noise-side MAP under a BSC(q) surrogate.

    Message side: argmax_u P(l^b | encode(u)), i.e. the codeword nearest to
    the hard decisions for q < 0.5.  Noise side: the flip pattern w maximizing
    P(W_u = w | l^b) over the syndrome coset, applied to p_inv(l^b).  Ties go
    to the lexicographically smallest candidate on each side.  Returns both
    message estimates so callers can assert they coincide.
    """
    if code.k > 16:
        raise ValueError("exhaustive equivalence limited to k <= 16")
    if not 0 < q < 0.5:
        raise ValueError("q must be in (0, 0.5)")
    hard = np.asarray(hard, dtype=np.uint8)
    msgs = code.messages()
    cws = code.codebook()

    # message side: minimize Hamming distance, lexicographically first winner
    dists = np.count_nonzero(cws ^ hard, axis=1)
    u_message = msgs[int(np.argmin(dists))]

    # noise side: walk the coset l^b xor C; each member maps to a distinct
    # candidate w = A (l^b xor c), with likelihood q^|w^b| (1-q)^(n-|w^b|)
    coset = hard ^ cws
    weights = np.count_nonzero(coset, axis=1)
    w_candidates = code.p_inv_apply(coset)
    best = None
    for i in range(coset.shape[0]):
        key = (weights[i], tuple(w_candidates[i].tolist()))
        if best is None or key < best[0]:
            best = (key, i)
    w_star = w_candidates[best[1]]
    u_noise = code.p_inv_apply(hard) ^ w_star
    return u_message, u_noise
