"""Empirical types, distances and executable checks of the coordination lemmas.

Total variation here is the *unhalved* L1 distance ``sum |p - q|`` with
maximum 2, not the ``1/2 sum |p - q|`` convention common elsewhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


class LengthMismatch(ValueError):
    pass


class Empty(ValueError):
    pass


class SupportMismatch(ValueError):
    pass


class AbsoluteContinuityViolation(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EmpiricalType:
    """Histogram over a product alphabet, stored densely with shape ``sizes``."""

    counts: np.ndarray
    total: int

    @property
    def sizes(self) -> tuple[int, ...]:
        return self.counts.shape

    def probabilities(self) -> np.ndarray:
        return self.counts / self.total

    def exact(self) -> list[Fraction]:
        """Probabilities as exact fractions (they sum to exactly 1)."""
        return [Fraction(int(c), self.total) for c in self.counts.ravel()]

    def marginal(self, axes) -> "EmpiricalType":
        """Keep only the listed coordinate axes."""
        axes = tuple(np.atleast_1d(axes))
        drop = tuple(a for a in range(self.counts.ndim) if a not in axes)
        return EmpiricalType(self.counts.sum(axis=drop), self.total)

    def tv(self, target) -> float:
        return tv_distance(self.probabilities(), target)

    def kl(self, target) -> float:
        return kl_divergence(self.probabilities(), target)


def empirical_type(sequences, sizes=None) -> EmpiricalType:
    """Joint type of aligned symbol sequences.

    ``sequences`` is a list of equal-length integer arrays (or a single
    array); ``sizes`` gives each alphabet size and defaults to ``max + 1``.
    """
    if isinstance(sequences, np.ndarray) and sequences.ndim == 1:
        sequences = [sequences]
    seqs = [np.asarray(s, dtype=np.int64).ravel() for s in sequences]
    if not seqs or seqs[0].size == 0:
        raise Empty("empirical type of an empty sequence")
    if any(s.size != seqs[0].size for s in seqs):
        raise LengthMismatch("sequences must have equal lengths")
    if sizes is None:
        sizes = tuple(int(s.max()) + 1 for s in seqs)
    sizes = tuple(int(k) for k in sizes)
    keys = np.ravel_multi_index(tuple(seqs), sizes)
    counts = np.bincount(keys, minlength=math.prod(sizes)).reshape(sizes)
    return EmpiricalType(counts, int(seqs[0].size))


def _pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    p = p.probabilities() if isinstance(p, EmpiricalType) else np.asarray(p, dtype=float)
    q = q.probabilities() if isinstance(q, EmpiricalType) else np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise SupportMismatch(f"supports differ: {p.shape} vs {q.shape}")
    return p, q


def tv_distance(p, q) -> float:
    """``sum |p - q|`` over a common support (range ``[0, 2]``)."""
    p, q = _pair(p, q)
    return float(np.abs(p - q).sum())


def kl_divergence(p, q) -> float:
    """``D(p || q)`` in bits."""
    p, q = _pair(p, q)
    mask = p > 0
    if np.any(q[mask] <= 0):
        raise AbsoluteContinuityViolation("q vanishes where p does not")
    return float((p[mask] * np.log2(p[mask] / q[mask])).sum())


def pinsker_bound(divergence_bits: float) -> float:
    """Upper bound on the L1 distance: ``sqrt(2 ln2 D)`` for ``D`` in bits."""
    return math.sqrt(2 * math.log(2) * divergence_bits)


def pinsker_check(p, q) -> bool:
    return tv_distance(p, q) <= pinsker_bound(kl_divergence(p, q)) + 1e-12


def is_typical(sequence, target, epsilon: float, sizes=None) -> bool:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    target = np.asarray(target, dtype=float)
    t = empirical_type(sequence, sizes if sizes is not None else target.shape)
    return t.tv(target) <= epsilon


def mixed_type(seq_a, seq_b, sizes=None) -> EmpiricalType:
    """Type of two equal-length sequences pooled together (the average type)."""
    a = [np.asarray(s).ravel() for s in (seq_a if isinstance(seq_a, (list, tuple)) else [seq_a])]
    b = [np.asarray(s).ravel() for s in (seq_b if isinstance(seq_b, (list, tuple)) else [seq_b])]
    if len(a) != len(b) or any(x.size != y.size for x, y in zip(a, b)):
        raise LengthMismatch("mixed type needs sequences of equal length")
    return empirical_type([np.concatenate([x, y]) for x, y in zip(a, b)], sizes)


def lemma_mixing_check(seq_a, seq_b, target) -> bool:
    """``V(T_mix, P) <= V(T_a, P)/2 + V(T_b, P)/2``."""
    target = np.asarray(target, dtype=float)
    sizes = target.shape
    lhs = mixed_type(seq_a, seq_b, sizes).tv(target)
    rhs = 0.5 * empirical_type(seq_a, sizes).tv(target) + 0.5 * empirical_type(seq_b, sizes).tv(target)
    return lhs <= rhs + 1e-12


def marginal_contraction_check(joint_type, joint_target, axes=(0,)) -> bool:
    """``V`` of the marginals on ``axes`` never exceeds ``V`` of the joints."""
    p, q = _pair(joint_type, joint_target)
    drop = tuple(a for a in range(p.ndim) if a not in tuple(axes))
    return tv_distance(p.sum(axis=drop), q.sum(axis=drop)) <= tv_distance(p, q) + 1e-12


def pinsker_block_bound(profile, sets) -> float:
    """``sqrt(2 ln2 * sum_{j in A_1 u A_2} (1 - H(V^j|V^{1:j-1}S^{1:n})))``.

    Finite-``n`` bound on the L1 distance between the encoder's block law and
    the i.i.d. law of ``(U^{1:n}, S^{1:n})``.
    """
    idx = np.union1d(sets.a1, sets.a2)
    gap = np.clip(1.0 - profile.h_given_s[idx], 0.0, None).sum()
    return pinsker_bound(float(gap))


@dataclass(frozen=True)
class Lemma1Result:
    fraction: float
    distances: np.ndarray


def lemma1_proxy(model, sets, trials: int, rng: np.random.Generator, epsilon0: float = 0.1) -> Lemma1Result:
    """Fraction of single-block encodings with ``V(T_{S U~}, P_SU) <= epsilon0``."""
    from .chain_codec import RandomnessSources, encode_chain

    n = sets.n
    target = model.p_us().T  # [s, u]
    dist = np.empty(trials)
    for t in range(trials):
        s = rng.choice(model.n_s, size=(1, n), p=model.p_s)
        rand = RandomnessSources.draw(sets, rng, rng)
        chain = encode_chain(model, sets, s, rand)
        dist[t] = empirical_type([s[0], chain.u_tilde[0]], target.shape).tv(target)
    return Lemma1Result(float(np.mean(dist <= epsilon0)), dist)
