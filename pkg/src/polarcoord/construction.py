"""Polarized index sets for the auxiliary sequence and the channel input.

Per-position conditional entropies ``H(V^j | V^{1:j-1}, W^{1:n})`` are
estimated by averaging the binary entropy of the SC posterior over i.i.d.
draws (or computed exactly by enumeration for ``n <= 8``); thresholds at
``delta_n = 2^{-n^beta}`` then give the very-high-entropy and high-entropy
sets and the partition ``A_1 .. A_4``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import CoordinationModel, h2
from .polar_core import PairSource, log2_exact, polar_transform, sc_posteriors

CACHE_SCHEMA = "polarcoord.construction/1"
DEFAULT_BETA = 0.25
DEFAULT_SAMPLES = 2000
EXACT_MAX_ROWS = 1 << 22
_CHUNK = 256


class ChainingInfeasible(ValueError):
    """``|A_3| > |A_2|``: the chaining has no room for the undecodable bits."""


class UnsupportedAlphabet(ValueError):
    pass


class CacheMismatch(ValueError):
    pass


def delta_n(n: int, beta: float) -> float:
    return float(2.0 ** (-(n**beta)))


def _posterior_entropy(post0, post1):
    return h2(np.minimum(post0, post1))


def _mc_entropies(source: PairSource, n: int, samples: int, rng: np.random.Generator) -> np.ndarray:
    total = np.zeros(n)
    done = 0
    while done < samples:
        size = min(_CHUNK, samples - done)
        b, w = source.sample((size, n), rng)
        p0, p1 = sc_posteriors(polar_transform(b), w, source)
        total += _posterior_entropy(p0, p1).sum(axis=0)
        done += size
    return total / samples


def _exact_entropies(source: PairSource, n: int) -> np.ndarray:
    k = source.w_alphabet_size
    rows = (2 * k) ** n
    if rows > EXACT_MAX_ROWS:
        raise ValueError(f"exact mode would enumerate {rows} sequences")
    flat = np.arange(rows)
    digits = (flat[:, None] // (2 * k) ** np.arange(n)[::-1]) % (2 * k)
    b, w = np.divmod(digits, k)
    weights = np.prod(source.joint[b, w], axis=1)
    keep = weights > 0
    p0, p1 = sc_posteriors(polar_transform(b[keep]), w[keep], source)
    return weights[keep] @ _posterior_entropy(p0, p1)


def estimate_entropies(
    source: PairSource,
    n: int,
    samples: int = DEFAULT_SAMPLES,
    rng: np.random.Generator | None = None,
    exact: bool = False,
) -> np.ndarray:
    """Per-position ``H(V^j | V^{1:j-1}, W^{1:n})`` for ``V = B G_n``."""
    log2_exact(n)
    if exact:
        return _exact_entropies(source, n)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    return _mc_entropies(source, n, samples, rng if rng is not None else np.random.default_rng())


@dataclass(frozen=True, eq=False)
class EntropyProfile:
    h_given_s: np.ndarray
    h_given_y: np.ndarray
    h_unconditional: np.ndarray
    sample_count: int
    n: int
    exact: bool = False


def estimate_profile(
    model: CoordinationModel,
    n: int,
    samples: int = DEFAULT_SAMPLES,
    rng: np.random.Generator | None = None,
    exact: bool = False,
) -> EntropyProfile:
    rng = rng if rng is not None else np.random.default_rng()
    p_us = model.p_us()
    src_s = PairSource(p_us)
    src_y = PairSource(model.p_uy())
    src_u = PairSource.unconditional(p_us.sum(axis=1))
    return EntropyProfile(
        h_given_s=estimate_entropies(src_s, n, samples, rng, exact),
        h_given_y=estimate_entropies(src_y, n, samples, rng, exact),
        h_unconditional=estimate_entropies(src_u, n, samples, rng, exact),
        sample_count=0 if exact else samples,
        n=n,
        exact=exact,
    )


def _idx(mask) -> np.ndarray:
    return np.flatnonzero(mask).astype(np.int64)


def _largest(candidates: np.ndarray, scores: np.ndarray, count: int) -> np.ndarray:
    """``count`` entries of ``candidates`` with the largest score, lower index first on ties."""
    order = np.lexsort((candidates, -scores[candidates]))
    return np.sort(candidates[order[:count]])


@dataclass(frozen=True, eq=False)
class IndexSets:
    """Index sets over ``[0, n)``; every array is sorted ascending.

    ``a3_carried`` is the part of ``A_3`` that the chaining forwards into
    ``a3_prime`` (the ``k``-th element maps to the ``k``-th). It equals ``A_3``
    unless the sets were built with ``allow_infeasible=True``.
    """

    n: int
    beta: float
    delta_n: float
    v_v: np.ndarray
    v_v_given_s: np.ndarray
    v_v_given_y: np.ndarray
    h_v_given_y: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray
    a4: np.ndarray
    a3_prime: np.ndarray
    a3_carried: np.ndarray = field(default=None)
    beta_v: float | None = None
    delta_v: float | None = None

    def __post_init__(self):
        if self.a3_carried is None:
            object.__setattr__(self, "a3_carried", self.a3)
        if self.beta_v is None:
            object.__setattr__(self, "beta_v", self.beta)
            object.__setattr__(self, "delta_v", self.delta_n)

    @property
    def feasible(self) -> bool:
        return self.a3.size <= self.a2.size

    @property
    def a3_overflow(self) -> np.ndarray:
        return np.setdiff1d(self.a3, self.a3_carried)

    def to_dict(self) -> dict:
        out = {"n": self.n, "beta": self.beta, "delta_n": self.delta_n, "beta_v": self.beta_v, "delta_v": self.delta_v}
        for name in ("v_v", "v_v_given_s", "v_v_given_y", "h_v_given_y", "a1", "a2", "a3", "a4", "a3_prime", "a3_carried"):
            out[name] = getattr(self, name).tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "IndexSets":
        arrays = {k: np.asarray(v, dtype=np.int64) for k, v in d.items() if isinstance(v, list)}
        return cls(
            n=d["n"], beta=d["beta"], delta_n=d["delta_n"], beta_v=d["beta_v"], delta_v=d["delta_v"], **arrays
        )


def _check_beta(beta: float) -> None:
    if not 0 < beta < 0.5:
        raise ValueError("beta must lie in (0, 1/2)")


def build_sets(
    profile: EntropyProfile,
    beta: float = DEFAULT_BETA,
    allow_infeasible: bool = False,
    beta_v: float | None = None,
) -> IndexSets:
    """Threshold the profile and partition ``[0, n)`` into ``A_1 .. A_4``.

    Very-high-entropy sets use ``h > 1 - delta_v`` and the high-entropy set
    uses ``h > delta_n``, where ``delta_n = 2^{-n^beta}`` and ``delta_v`` is
    built the same way from ``beta_v`` (default: ``beta``, i.e. one common
    threshold). A smaller ``beta_v`` enlarges ``A_2`` at finite ``n``.

    ``A'_3`` takes the ``|A_3|`` members of ``A_2`` with the largest
    ``H(V^j|V^{1:j-1}Y^{1:n})``. With ``allow_infeasible=True`` an oversized
    ``A_3`` is forwarded only partially (see :attr:`IndexSets.a3_carried`).
    """
    beta_v = beta if beta_v is None else beta_v
    _check_beta(beta)
    _check_beta(beta_v)
    n = profile.n
    d = delta_n(n, beta)
    dv = delta_n(n, beta_v)
    v_v = profile.h_unconditional > 1 - dv
    v_s = profile.h_given_s > 1 - dv
    v_y = profile.h_given_y > 1 - dv
    h_y = profile.h_given_y > d
    a1, a2, a3, a4 = _idx(v_s & h_y), _idx(v_s & ~h_y), _idx(~v_s & h_y), _idx(~v_s & ~h_y)
    if a3.size <= a2.size:
        a3_prime = _largest(a2, profile.h_given_y, a3.size)
        carried = a3
    elif allow_infeasible:
        a3_prime = a2
        carried = _largest(a3, profile.h_given_y, a2.size)
    else:
        raise ChainingInfeasible(f"|A_3|={a3.size} exceeds |A_2|={a2.size} at n={n}")
    return IndexSets(
        n, beta, d, _idx(v_v), _idx(v_s), _idx(v_y), _idx(h_y), a1, a2, a3, a4, a3_prime, carried, beta_v, dv
    )


@dataclass(frozen=True, eq=False)
class XSets:
    """Sets for the channel-input polarization ``Z = X G_n``.

    ``info_set`` is ordered by increasing ``H(Z^j|Z^{1:j-1}Y^{1:n})`` so that a
    payload shorter than the capacity lands on the most reliable positions.
    """

    n: int
    beta: float
    delta_n: float
    v_x: np.ndarray
    h_x_given_y: np.ndarray
    info_set: np.ndarray
    h_x: np.ndarray
    h_x_given_y_profile: np.ndarray

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "beta": self.beta,
            "delta_n": self.delta_n,
            "v_x": self.v_x.tolist(),
            "h_x_given_y": self.h_x_given_y.tolist(),
            "info_set": self.info_set.tolist(),
            "h_x": self.h_x.tolist(),
            "h_x_given_y_profile": self.h_x_given_y_profile.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "XSets":
        return cls(
            n=d["n"],
            beta=d["beta"],
            delta_n=d["delta_n"],
            v_x=np.asarray(d["v_x"], dtype=np.int64),
            h_x_given_y=np.asarray(d["h_x_given_y"], dtype=np.int64),
            info_set=np.asarray(d["info_set"], dtype=np.int64),
            h_x=np.asarray(d["h_x"], dtype=float),
            h_x_given_y_profile=np.asarray(d["h_x_given_y_profile"], dtype=float),
        )


def build_x_sets(
    model: CoordinationModel,
    n: int,
    samples: int = DEFAULT_SAMPLES,
    rng: np.random.Generator | None = None,
    beta: float = DEFAULT_BETA,
    exact: bool = False,
    beta_v: float | None = None,
) -> XSets:
    """``V_X``, ``H_{X|Y}`` and the information set ``V_X`` minus ``H_{X|Y}``."""
    if model.n_x != 2:
        raise UnsupportedAlphabet(f"channel code needs binary X, got |X|={model.n_x}")
    _check_beta(beta)
    rng = rng if rng is not None else np.random.default_rng()
    p_xy = model.p_xy()
    h_x = estimate_entropies(PairSource.unconditional(p_xy.sum(axis=1)), n, samples, rng, exact)
    h_xy = estimate_entropies(PairSource(p_xy), n, samples, rng, exact)
    d = delta_n(n, beta)
    v_x = h_x > 1 - delta_n(n, beta if beta_v is None else beta_v)
    h_set = h_xy > d
    info = _idx(v_x & ~h_set)
    info = info[np.lexsort((info, h_xy[info]))]
    return XSets(n, beta, d, _idx(v_x), _idx(h_set), info, h_x, h_xy)


@dataclass(frozen=True, eq=False)
class Construction:
    """Everything encoder and decoder must share for one ``(model, n)``."""

    model_hash: str
    n: int
    beta: float
    sample_count: int
    seed: int | None
    profile: EntropyProfile
    sets: IndexSets
    x_sets: XSets | None

    def to_dict(self) -> dict:
        p = self.profile
        return {
            "schema": CACHE_SCHEMA,
            "model_hash": self.model_hash,
            "n": self.n,
            "beta": self.beta,
            "sample_count": self.sample_count,
            "seed": self.seed,
            "profile": {
                "h_given_s": p.h_given_s.tolist(),
                "h_given_y": p.h_given_y.tolist(),
                "h_unconditional": p.h_unconditional.tolist(),
                "exact": p.exact,
            },
            "sets": self.sets.to_dict(),
            "x_sets": None if self.x_sets is None else self.x_sets.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Construction":
        if d.get("schema") != CACHE_SCHEMA:
            raise CacheMismatch(f"unsupported construction schema {d.get('schema')!r}")
        p = d["profile"]
        profile = EntropyProfile(
            np.asarray(p["h_given_s"], dtype=float),
            np.asarray(p["h_given_y"], dtype=float),
            np.asarray(p["h_unconditional"], dtype=float),
            d["sample_count"],
            d["n"],
            p["exact"],
        )
        return cls(
            d["model_hash"],
            d["n"],
            d["beta"],
            d["sample_count"],
            d["seed"],
            profile,
            IndexSets.from_dict(d["sets"]),
            None if d["x_sets"] is None else XSets.from_dict(d["x_sets"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path, model: CoordinationModel | None = None) -> "Construction":
        c = cls.from_dict(json.loads(Path(path).read_text()))
        if model is not None and model.fingerprint() != c.model_hash:
            raise CacheMismatch(f"{path} was built for a different model")
        return c


def construct(
    model: CoordinationModel,
    n: int,
    beta: float = DEFAULT_BETA,
    samples: int = DEFAULT_SAMPLES,
    seed: int | None = None,
    allow_infeasible: bool = False,
    with_channel_code: bool = True,
    beta_v: float | None = None,
) -> Construction:
    """Build (not cache) the shared sets; ``seed`` drives the Monte Carlo."""
    rng = np.random.default_rng(seed)
    profile = estimate_profile(model, n, samples, rng)
    sets = build_sets(profile, beta, allow_infeasible, beta_v)
    x_sets = None
    if with_channel_code and model.n_x == 2:
        x_sets = build_x_sets(model, n, samples, rng, beta, beta_v=beta_v)
    return Construction(model.fingerprint(), n, beta, samples, seed, profile, sets, x_sets)


def cached_construct(cache_dir, model: CoordinationModel, n: int, **kwargs) -> Construction:
    """:func:`construct` with an on-disk JSON cache keyed by every input."""
    cache_dir = Path(cache_dir)
    beta = kwargs.get("beta", DEFAULT_BETA)
    samples = kwargs.get("samples", DEFAULT_SAMPLES)
    seed = kwargs.get("seed")
    flags = f"bv{kwargs.get('beta_v')}_f{int(kwargs.get('allow_infeasible', False))}_c{int(kwargs.get('with_channel_code', True))}"
    name = f"{model.fingerprint()[:16]}_n{n}_b{beta}_s{samples}_seed{seed}_{flags}.json"
    path = cache_dir / name
    if path.exists():
        return Construction.load(path, model)
    c = construct(model, n, **kwargs)
    cache_dir.mkdir(parents=True, exist_ok=True)
    c.save(path)
    return c
