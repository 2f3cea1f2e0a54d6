"""Randomized oracle and lemma suites shared by the CLI and the test-suite."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .construction import estimate_entropies
from .metrics import (
    empirical_type,
    kl_divergence,
    lemma_mixing_check,
    marginal_contraction_check,
    pinsker_bound,
    tv_distance,
)
from .model import entropy
from .polar_core import PairSource, brute_posterior, polar_transform, sc_posterior, transform_matrix


class SuiteResult(NamedTuple):
    name: str
    instances: int
    failures: int
    worst: float  # largest observed error or slack violation

    @property
    def ok(self) -> bool:
        return self.failures == 0


def random_source(rng: np.random.Generator, w_size: int | None = None) -> PairSource:
    w_size = w_size or int(rng.integers(1, 4))
    joint = rng.dirichlet(np.full(2 * w_size, 0.7)).reshape(2, w_size)
    return PairSource(joint)


def oracle_suite(rng, instances: int = 200, sizes=(2, 4, 8), tol: float = 1e-10) -> SuiteResult:
    """SC posteriors against exhaustive enumeration on random prefixes."""
    worst, fails = 0.0, 0
    for t in range(instances):
        n = sizes[t % len(sizes)]
        src = random_source(rng)
        b, w = src.sample((n,), rng)
        v = polar_transform(b)
        j = int(rng.integers(0, n))
        err = abs(sc_posterior(j, v[:j], w, src) - brute_posterior(j, v[:j], w, src))
        worst = max(worst, err)
        fails += err > tol
    return SuiteResult("oracle", instances, fails, worst)


def involution_suite(rng, instances: int = 200, max_m: int = 10) -> SuiteResult:
    """``G_n`` is its own inverse and agrees with the Kronecker matrix."""
    fails = 0
    for t in range(instances):
        n = 1 << int(rng.integers(1, max_m + 1))
        u = rng.integers(0, 2, n, dtype=np.int8)
        v = polar_transform(u)
        ok = np.array_equal(polar_transform(v), u)
        if n <= 64:
            ok &= np.array_equal(v, (u.astype(np.int64) @ transform_matrix(n)) % 2)
        fails += not ok
    return SuiteResult("involution", instances, fails, 0.0)


def _brute_conditional_entropies(src: PairSource, n: int) -> np.ndarray:
    """``H(V^j | V^{1:j-1}, W)`` by enumerating the joint law of ``(V, W)``."""
    k = src.w_alphabet_size
    g = transform_matrix(n)
    b = (np.arange(2**n)[:, None] >> np.arange(n)[::-1]) & 1
    w = (np.arange(k**n)[:, None] // k ** np.arange(n)[::-1]) % k
    pb_w = np.prod(src.joint[b[:, None, :], w[None, :, :]], axis=2)  # [b, w]
    v = (b @ g) % 2
    out = np.empty(n)
    for j in range(n):
        # P(V[:j+1], W) over prefixes; H(V^j|V^{<j},W) = H(V^{<=j},W) - H(V^{<j},W)
        def joint_entropy(length):
            keys = v[:, :length] @ (1 << np.arange(length)[::-1]) if length else np.zeros(len(v), np.int64)
            tab = np.zeros((1 << length, pb_w.shape[1]))
            np.add.at(tab, keys, pb_w)
            return entropy(tab.ravel())
        out[j] = joint_entropy(j + 1) - joint_entropy(j)
    return out


def chain_rule_suite(rng, instances: int = 30, sizes=(2, 4, 8), tol: float = 1e-8) -> SuiteResult:
    """Exact SC entropies: per position against brute force, and summing to ``n H(B|W)``."""
    worst, fails = 0.0, 0
    for t in range(instances):
        n = sizes[t % len(sizes)]
        src = random_source(rng, w_size=int(rng.integers(1, 3)))
        h = estimate_entropies(src, n, exact=True)
        h_bw = entropy(src.joint.ravel()) - entropy(src.joint.sum(axis=0))
        err = max(abs(h.sum() - n * h_bw), np.abs(h - _brute_conditional_entropies(src, n)).max())
        worst = max(worst, err)
        fails += err > tol
    return SuiteResult("chain rule", instances, fails, worst)


def mixing_suite(rng, instances: int = 1000) -> SuiteResult:
    fails = 0
    for _ in range(instances):
        size = int(rng.integers(2, 5))
        length = int(rng.integers(1, 40))
        target = rng.dirichlet(np.ones(size))
        a = rng.integers(0, size, length)
        # dependent partner: a noisy copy of ``a``
        b = np.where(rng.random(length) < rng.random(), a, rng.integers(0, size, length))
        fails += not lemma_mixing_check(a, b, target)
    return SuiteResult("mixing", instances, fails, 0.0)


def contraction_suite(rng, instances: int = 1000) -> SuiteResult:
    fails = 0
    for _ in range(instances):
        shape = tuple(int(s) for s in rng.integers(2, 4, size=int(rng.integers(2, 4))))
        target = rng.dirichlet(np.ones(int(np.prod(shape)))).reshape(shape)
        length = int(rng.integers(1, 60))
        seqs = [rng.integers(0, s, length) for s in shape]
        t = empirical_type(seqs, shape)
        axes = tuple(sorted(rng.choice(len(shape), size=int(rng.integers(1, len(shape))), replace=False)))
        fails += not marginal_contraction_check(t, target, axes)
    return SuiteResult("contraction", instances, fails, 0.0)


def pinsker_suite(rng, instances: int = 1000) -> SuiteResult:
    worst, fails = -np.inf, 0
    for _ in range(instances):
        size = int(rng.integers(2, 8))
        p = rng.dirichlet(np.full(size, 0.5))
        q = rng.dirichlet(np.full(size, 0.5))
        slack = tv_distance(p, q) - pinsker_bound(kl_divergence(p, q))
        worst = max(worst, slack)
        fails += slack > 1e-12
    return SuiteResult("pinsker", instances, fails, float(worst))


def run(rng: np.random.Generator | None = None, verbose: bool = False) -> bool:
    rng = rng if rng is not None else np.random.default_rng(0)
    suites = (oracle_suite, involution_suite, chain_rule_suite, mixing_suite, contraction_suite, pinsker_suite)
    ok = True
    for suite in suites:
        r = suite(rng)
        ok &= r.ok
        if verbose:
            status = "PASS" if r.ok else "FAIL"
            print(f"{status} {r.name:<12} instances={r.instances} failures={r.failures} worst={r.worst:.3g}")
    return ok
