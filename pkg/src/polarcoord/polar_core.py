"""Polarization transform and successive-cancellation (SC) engine.

Conventions
-----------
* ``G_n = [[1, 0], [1, 1]]^{(x) m}``, natural index order, no bit reversal.
* ``V = B G_n`` where ``B^{1:n}`` are i.i.d. binary symbols paired with side
  information ``W^{1:n}`` drawn from a :class:`PairSource`.
* Positions are 0-based. ``sc_posterior(j, ...)`` conditions on ``V[:j]``.

The SC recursion splits a block into halves: with ``B = (B_a, B_b)`` one has
``V[:n/2] = (B_a xor B_b) G_{n/2}`` and ``V[n/2:] = B_b G_{n/2}``. Pairs of
probabilities ``(P(.=0), P(.=1))`` are carried through the butterfly and
renormalized at every node.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import NamedTuple

import numba
import numpy as np

if "NUMBA_THREADING_LAYER" not in os.environ:
    # The system TBB is too old for numba; avoid the warning on first prange call.
    numba.config.THREADING_LAYER = "omp"

ACT_FIXED = 0
ACT_SAMPLE = 1
ACT_DECIDE = 2
ACT_SAMPLE_AUX = 3

BRUTE_MAX_N = 16


class LengthNotPowerOfTwo(ValueError):
    pass


class IndexOutOfRange(IndexError):
    pass


class AlphabetMismatch(ValueError):
    pass


class FrozenOverlap(ValueError):
    pass


class TooLarge(ValueError):
    pass


def log2_exact(n: int) -> int:
    if n < 1 or n & (n - 1):
        raise LengthNotPowerOfTwo(f"length must be a power of two, got {n}")
    return n.bit_length() - 1


def polar_transform(u) -> np.ndarray:
    """Return ``u G_n`` over GF(2); works on the last axis of a batch too.

    ``G_n`` is an involution, so the same call inverts it.
    """
    x = np.array(u, dtype=np.int8, copy=True)
    n = x.shape[-1]
    log2_exact(n)
    lead = x.shape[:-1]
    half = n // 2
    while half >= 1:
        y = x.reshape(lead + (-1, 2, half))
        y[..., 0, :] ^= y[..., 1, :]
        half //= 2
    return x


@dataclass(frozen=True, eq=False)
class PairSource:
    """I.i.d. law of ``(B, W)``: ``joint[b, w]`` with binary ``B``."""

    joint: np.ndarray

    def __post_init__(self):
        j = np.asarray(self.joint, dtype=float)
        if j.ndim != 2 or j.shape[0] != 2:
            raise AlphabetMismatch(f"joint must have shape (2, |W|), got {j.shape}")
        if np.any(j < 0) or abs(j.sum() - 1.0) > 1e-10:
            raise ValueError("joint must be a probability table")
        object.__setattr__(self, "joint", j)

    @classmethod
    def unconditional(cls, p_b) -> "PairSource":
        return cls(np.asarray(p_b, dtype=float).reshape(2, 1))

    @property
    def w_alphabet_size(self) -> int:
        return self.joint.shape[1]

    def leaf_pairs(self, w) -> tuple[np.ndarray, np.ndarray]:
        """Normalized per-position ``(P(B=0|w_i), P(B=1|w_i))``."""
        w = np.asarray(w)
        if w.size and (w.min() < 0 or w.max() >= self.w_alphabet_size):
            raise AlphabetMismatch("side information outside the source alphabet")
        col = self.joint[:, w]
        tot = col[0] + col[1]
        safe = np.where(tot > 0, tot, 1.0)
        p0 = np.where(tot > 0, col[0] / safe, 0.5)
        return p0, np.where(tot > 0, col[1] / safe, 0.5)

    def sample(self, shape, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Draw i.i.d. ``(B, W)`` arrays of the given shape."""
        flat = rng.choice(self.joint.size, size=shape, p=self.joint.ravel())
        b, w = np.divmod(flat, self.w_alphabet_size)
        return b.astype(np.int8), w


class SCResult(NamedTuple):
    v: np.ndarray
    u: np.ndarray
    post0: np.ndarray
    post1: np.ndarray


@numba.njit(cache=True, inline="always")
def _check(a0, a1, b0, b1):
    q0 = a0 * b0 + a1 * b1
    q1 = a0 * b1 + a1 * b0
    s = q0 + q1
    if s > 0.0:
        return q0 / s, q1 / s
    return 0.5, 0.5


@numba.njit(cache=True, inline="always")
def _bit(a0, a1, b0, b1, c):
    if c == 0:
        r0 = a0 * b0
        r1 = a1 * b1
    else:
        r0 = a1 * b0
        r1 = a0 * b1
    s = r0 + r1
    if s > 0.0:
        return r0 / s, r1 / s
    return 0.5, 0.5


@numba.njit(cache=True)
def _descend(P0, P1, left_bits, j, m):
    n = P0.shape[1]
    if j == 0:
        d = 0
    else:
        t = 0
        x = j ^ (j - 1)
        while x > 1:
            x >>= 1
            t += 1
        d = m - 1 - t
        half = (n >> d) // 2
        for i in range(half):
            P0[d + 1, i], P1[d + 1, i] = _bit(
                P0[d, i], P1[d, i], P0[d, i + half], P1[d, i + half], left_bits[d + 1, i]
            )
        d += 1
    for dd in range(d, m):
        half = (n >> dd) // 2
        for i in range(half):
            P0[dd + 1, i], P1[dd + 1, i] = _check(P0[dd, i], P1[dd, i], P0[dd, i + half], P1[dd, i + half])


@numba.njit(cache=True, parallel=True)
def _sc_kernel(leaf0, leaf1, aux0, aux1, use_aux, action, fixed, uniform):
    batch, n = leaf0.shape
    m = 0
    while (1 << m) < n:
        m += 1
    v_out = np.zeros((batch, n), dtype=np.int8)
    u_out = np.zeros((batch, n), dtype=np.int8)
    post0 = np.zeros((batch, n))
    post1 = np.zeros((batch, n))
    for r in numba.prange(batch):
        P0 = np.empty((m + 1, n))
        P1 = np.empty((m + 1, n))
        P0[0, :] = leaf0[r]
        P1[0, :] = leaf1[r]
        if use_aux:
            Q0 = np.empty((m + 1, n))
            Q1 = np.empty((m + 1, n))
            Q0[0, :] = aux0[r]
            Q1[0, :] = aux1[r]
        else:
            Q0 = np.empty((1, 1))
            Q1 = np.empty((1, 1))
        left_bits = np.zeros((m + 1, n), dtype=np.int8)
        cur = np.zeros(n, dtype=np.int8)
        nxt = np.zeros(n, dtype=np.int8)
        for j in range(n):
            _descend(P0, P1, left_bits, j, m)
            if use_aux:
                _descend(Q0, Q1, left_bits, j, m)
            p0 = P0[m, 0]
            p1 = P1[m, 0]
            s = p0 + p1
            if s > 0.0:
                post0[r, j] = p0 / s
                post1[r, j] = p1 / s
            else:
                post0[r, j] = 0.5
                post1[r, j] = 0.5
            act = action[j]
            if act == 0:
                bit = fixed[r, j]
            elif act == 1:
                bit = 0 if uniform[r, j] < post0[r, j] else 1
            elif act == 2:
                bit = 0 if p0 >= p1 else 1
            else:
                a0 = Q0[m, 0]
                a1 = Q1[m, 0]
                sa = a0 + a1
                pa = a0 / sa if sa > 0.0 else 0.5
                bit = 0 if uniform[r, j] < pa else 1
            v_out[r, j] = bit
            # Propagate re-encoded bits upward while this leaf closes right children.
            cur[0] = bit
            length = 1
            dd = m
            jj = j
            while dd > 0 and (jj & 1) == 1:
                for i in range(length):
                    nxt[i] = left_bits[dd, i] ^ cur[i]
                    nxt[i + length] = cur[i]
                length *= 2
                for i in range(length):
                    cur[i] = nxt[i]
                dd -= 1
                jj >>= 1
            if dd > 0:
                for i in range(length):
                    left_bits[dd, i] = cur[i]
        for i in range(n):
            u_out[r, i] = cur[i]
    return v_out, u_out, post0, post1


def _as_batch(a, dtype) -> np.ndarray:
    a = np.asarray(a, dtype=dtype)
    return a[None, :] if a.ndim == 1 else a


def sc_run(
    leaf0,
    leaf1,
    action,
    fixed=None,
    uniform=None,
    aux0=None,
    aux1=None,
) -> SCResult:
    """Low-level batched SC sweep.

    ``leaf0``/``leaf1`` are ``(batch, n)`` per-position pairs; ``action`` is a
    length-``n`` array of ``ACT_*`` codes shared by the batch. ``ACT_SAMPLE``
    sets ``V^j = 0`` iff ``uniform < P(V^j=0 | ...)``; ``ACT_DECIDE`` sets 0 iff
    the likelihood ratio is at least 1; ``ACT_SAMPLE_AUX`` samples from the
    auxiliary tree built on ``aux0``/``aux1``. Posteriors are always reported
    for the main tree.
    """
    leaf0 = _as_batch(leaf0, np.float64)
    leaf1 = _as_batch(leaf1, np.float64)
    batch, n = leaf0.shape
    log2_exact(n)
    action = np.ascontiguousarray(action, dtype=np.int8)
    if action.shape != (n,):
        raise ValueError("action must have one entry per position")
    fixed = np.zeros((batch, n), np.int8) if fixed is None else np.broadcast_to(_as_batch(fixed, np.int8), (batch, n))
    uniform = np.zeros((batch, n)) if uniform is None else np.broadcast_to(_as_batch(uniform, np.float64), (batch, n))
    use_aux = aux0 is not None
    if use_aux:
        aux0 = np.ascontiguousarray(np.broadcast_to(_as_batch(aux0, np.float64), (batch, n)))
        aux1 = np.ascontiguousarray(np.broadcast_to(_as_batch(aux1, np.float64), (batch, n)))
    else:
        aux0 = aux1 = np.zeros((1, 1))
    return SCResult(
        *_sc_kernel(
            np.ascontiguousarray(leaf0),
            np.ascontiguousarray(leaf1),
            aux0,
            aux1,
            use_aux,
            action,
            np.ascontiguousarray(fixed),
            np.ascontiguousarray(uniform),
        )
    )


def frozen_array(n: int, *assignments) -> np.ndarray:
    """Build an ``int8`` array with -1 for free positions.

    Each assignment is a ``(positions, bits)`` pair; assigning any position
    twice raises :class:`FrozenOverlap`.
    """
    out = np.full(n, -1, dtype=np.int8)
    for pos, bits in assignments:
        pos = np.asarray(pos, dtype=np.int64)
        bits = np.broadcast_to(np.asarray(bits, dtype=np.int8), pos.shape)
        if np.unique(pos).size != pos.size or np.any(out[pos] >= 0):
            raise FrozenOverlap("position assigned more than once")
        out[pos] = bits
    return out


def _normalize_frozen(frozen_map, n: int) -> np.ndarray:
    if frozen_map is None:
        return np.full(n, -1, dtype=np.int8)
    if isinstance(frozen_map, dict):
        return frozen_array(n, (list(frozen_map.keys()), list(frozen_map.values())))
    arr = np.asarray(frozen_map, dtype=np.int8)
    if arr.shape != (n,):
        raise ValueError(f"frozen map must have length {n}")
    return arr


def _check_w(w, source: PairSource) -> np.ndarray:
    w = np.asarray(w, dtype=np.int64)
    log2_exact(w.shape[-1])
    if w.size and (w.min() < 0 or w.max() >= source.w_alphabet_size):
        raise AlphabetMismatch("side information outside the source alphabet")
    return w


def sc_posterior(j: int, v_prefix, w, source: PairSource) -> float:
    """``P(V^j = 0 | V[:j] = v_prefix, W = w)`` (0-based ``j``)."""
    w = _check_w(w, source)
    n = w.size
    if not 0 <= j < n:
        raise IndexOutOfRange(f"j={j} outside [0, {n})")
    v_prefix = np.asarray(v_prefix, dtype=np.int8)
    if v_prefix.size != j:
        raise ValueError(f"prefix must have length {j}")
    fixed = np.zeros(n, dtype=np.int8)
    fixed[:j] = v_prefix
    action = np.full(n, ACT_DECIDE, dtype=np.int8)
    action[:j] = ACT_FIXED
    p0, p1 = source.leaf_pairs(w)
    return float(sc_run(p0, p1, action, fixed).post0[0, j])


def sc_posteriors(v, w, source: PairSource) -> tuple[np.ndarray, np.ndarray]:
    """Posteriors at every position given the realized ``v`` (genie prefix).

    Accepts batches; returns ``(post0, post1)`` with the batch shape.
    """
    w = _check_w(w, source)
    v = np.asarray(v, dtype=np.int8)
    p0, p1 = source.leaf_pairs(w)
    n = v.shape[-1]
    res = sc_run(p0.reshape(-1, n), p1.reshape(-1, n), np.zeros(n, np.int8), v.reshape(-1, n))
    return res.post0.reshape(v.shape), res.post1.reshape(v.shape)


def sc_sample(frozen_map, w, source: PairSource, rng: np.random.Generator) -> np.ndarray:
    """Randomized SC encoding: free positions drawn from their SC posterior.

    ``w`` may hold a batch of side sequences sharing one frozen map. One
    uniform is consumed per position (frozen or not) so that streams stay
    aligned regardless of the frozen pattern.
    """
    w = _check_w(w, source)
    n = w.shape[-1]
    fixed = _normalize_frozen(frozen_map, n)
    action = np.where(fixed >= 0, ACT_FIXED, ACT_SAMPLE).astype(np.int8)
    p0, p1 = source.leaf_pairs(w)
    batch = p0.reshape(-1, n)
    res = sc_run(batch, p1.reshape(-1, n), action, np.maximum(fixed, 0), rng.random(batch.shape))
    return res.v.reshape(w.shape)


def sc_decode(frozen_map, w, source: PairSource) -> np.ndarray:
    """Deterministic SC decoding: a free bit is 0 iff ``L_n >= 1``.

    ``w`` may hold a batch of received sequences sharing one frozen map.
    """
    w = _check_w(w, source)
    n = w.shape[-1]
    fixed = _normalize_frozen(frozen_map, n)
    action = np.where(fixed >= 0, ACT_FIXED, ACT_DECIDE).astype(np.int8)
    p0, p1 = source.leaf_pairs(w)
    res = sc_run(p0.reshape(-1, n), p1.reshape(-1, n), action, np.maximum(fixed, 0))
    return res.v.reshape(w.shape)


def transform_matrix(n: int) -> np.ndarray:
    m = log2_exact(n)
    g = np.ones((1, 1), dtype=np.int64)
    for _ in range(m):
        g = np.kron(np.array([[1, 0], [1, 1]]), g)
    return g


def brute_posterior(j: int, v_prefix, w, source: PairSource) -> float:
    """Exhaustive-enumeration oracle for :func:`sc_posterior` (``n <= 16``)."""
    w = np.asarray(w, dtype=np.int64)
    n = w.size
    if n > BRUTE_MAX_N:
        raise TooLarge(f"n={n} exceeds brute-force limit {BRUTE_MAX_N}")
    g = transform_matrix(n)
    if not 0 <= j < n:
        raise IndexOutOfRange(f"j={j} outside [0, {n})")
    bs = (np.arange(2**n)[:, None] >> np.arange(n)[::-1]) & 1
    weights = np.prod(source.joint[bs, w[None, :]], axis=1)
    vs = (bs @ g) % 2
    prefix = np.asarray(v_prefix, dtype=np.int64)
    match = np.all(vs[:, :j] == prefix[None, :], axis=1)
    tot = weights[match].sum()
    if tot == 0:
        return 0.5
    return float(weights[match & (vs[:, j] == 0)].sum() / tot)
