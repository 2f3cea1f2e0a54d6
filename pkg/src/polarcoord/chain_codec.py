"""Block-Markov chained encoder and reverse-order decoder.

Blocks ``0 .. k-1`` carry the source; block ``k`` (the extra one) carries
``V_{k-1}[A_3]`` over the channel code of :mod:`polarcoord.asym_code`.
Bits of ``A_3`` in block ``i`` travel, padded with ``C_2``, inside ``A'_3`` of
block ``i+1``. The decoder therefore runs from the last block backwards.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .asym_code import ChannelCodeSpec, channel_decode, channel_encode
from .construction import IndexSets, XSets
from .model import CoordinationModel
from .polar_core import PairSource, frozen_array, polar_transform, sc_decode, sc_sample

TRACE_SCHEMA = "polarcoord.trace/1"


class InfeasibleSets(ValueError):
    pass


class SourceLengthMismatch(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class LedgerEntry(NamedTuple):
    source: str  # "C1", "C2", "M" or "C_last"
    block: int
    destination: str
    bits: int


@dataclass
class RandomnessSources:
    """Common keys ``c1``/``c2`` plus the encoder-private stream ``local_m``.

    ``shaping_seed`` is the shared seed of the last-block channel code.
    """

    c1: np.ndarray
    c2: np.ndarray
    local_m: np.random.Generator | None
    shaping_seed: int

    @classmethod
    def draw(cls, sets: IndexSets, common: np.random.Generator, local: np.random.Generator) -> "RandomnessSources":
        c1 = common.integers(0, 2, sets.a1.size, dtype=np.int8)
        c2 = common.integers(0, 2, sets.a3.size, dtype=np.int8)
        seed = int(common.integers(0, 2**63 - 1))
        return cls(c1, c2, local, seed)

    def shared(self) -> "RandomnessSources":
        """The decoder's view: everything except the local stream."""
        return RandomnessSources(self.c1, self.c2, None, self.shaping_seed)


@dataclass
class BlockChain:
    """Per-block vectors; rows index blocks ``0 .. k-1``.

    Encoder fields are filled by :func:`encode_chain`; ``y``/``y_last`` by the
    channel; decoder fields by :func:`decode_chain` via :meth:`attach`.
    """

    n: int
    k: int
    s: np.ndarray
    v_tilde: np.ndarray
    u_tilde: np.ndarray
    x: np.ndarray
    payload: np.ndarray
    x_last: np.ndarray | None
    ledger: list[LedgerEntry] = field(default_factory=list)
    s_last: np.ndarray | None = None
    y: np.ndarray | None = None
    y_last: np.ndarray | None = None
    v_hat: np.ndarray | None = None
    u_hat: np.ndarray | None = None
    s_hat: np.ndarray | None = None
    s_hat_last: np.ndarray | None = None

    def attach(self, decoded: "DecodedChain") -> "BlockChain":
        self.v_hat = decoded.v_hat
        self.u_hat = decoded.u_hat
        self.s_hat = decoded.s_hat
        self.s_hat_last = decoded.s_hat_last
        return self

    def decode_success(self) -> bool:
        return self.v_hat is not None and bool(np.array_equal(self.v_hat, self.v_tilde))

    def ledger_bits(self, source: str) -> int:
        return sum(e.bits for e in self.ledger if e.source == source)


class DecodedChain(NamedTuple):
    v_hat: np.ndarray
    u_hat: np.ndarray
    s_hat: np.ndarray
    s_hat_last: np.ndarray | None
    payload_hat: np.ndarray


def draw_conditional(table: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One draw per row of a batch of stochastic rows ``table[..., a]``."""
    cdf = np.cumsum(table, axis=-1)
    u = rng.random(table.shape[:-1])
    out = (u[..., None] >= cdf).sum(axis=-1)
    return np.minimum(out, table.shape[-1] - 1)


def last_block_spec(x_sets: XSets, rand: RandomnessSources) -> ChannelCodeSpec:
    """Channel code of the extra block: ``C_2`` whitens, ``C_1`` is reused for frozen bits."""
    return ChannelCodeSpec.from_x_sets(x_sets, rand.shaping_seed, pad_key=rand.c2, reuse_bits=rand.c1)


def payload_positions(sets: IndexSets, capacity: int | None) -> np.ndarray:
    """Positions of ``A_3`` whose bits the last block carries."""
    pos = sets.a3_carried
    return pos if capacity is None else pos[:capacity]


def _encode_block(i, s_i, prev_v, sets, rand, src, ledger):
    n = sets.n
    free_a2 = sets.a2
    assignments = [(sets.a1, rand.c1)]
    ledger.append(LedgerEntry("C1", i, "A1", int(sets.a1.size)))
    if i > 0 and sets.a3_prime.size:
        carried = sets.a3_carried
        padded = prev_v[carried] ^ rand.c2[: carried.size]
        assignments.append((sets.a3_prime, padded))
        ledger.append(LedgerEntry("C2", i, "A3'", int(carried.size)))
        free_a2 = np.setdiff1d(sets.a2, sets.a3_prime)
    assignments.append((free_a2, rand.local_m.integers(0, 2, free_a2.size, dtype=np.int8)))
    ledger.append(LedgerEntry("M", i, "A2", int(free_a2.size)))
    return sc_sample(frozen_array(n, *assignments), s_i, src, rand.local_m)


def encode_chain(
    model: CoordinationModel,
    sets: IndexSets,
    sources,
    rand: RandomnessSources,
    x_sets: XSets | None = None,
    allow_infeasible: bool = False,
) -> BlockChain:
    """Chained encoding of ``k`` source blocks (rows of ``sources``).

    Without ``x_sets`` the extra channel-code block is skipped (genie runs);
    the payload ``V_{k-1}[A_3]`` is still recorded on the chain.
    """
    sources = np.asarray(sources, dtype=np.int64)
    if sources.ndim != 2 or sources.shape[1] != sets.n:
        raise SourceLengthMismatch(f"expected (k, {sets.n}) source blocks, got {sources.shape}")
    if not sets.feasible and not allow_infeasible:
        raise InfeasibleSets(f"|A_3|={sets.a3.size} > |A_2|={sets.a2.size}")
    k, n = sources.shape
    if k < 1:
        raise SourceLengthMismatch("need at least one source block")
    src = PairSource(model.p_us())
    ledger: list[LedgerEntry] = []

    v_tilde = np.zeros((k, n), np.int8)
    prev = None
    for i in range(k):
        v_tilde[i] = _encode_block(i, sources[i], prev, sets, rand, src, ledger)
        prev = v_tilde[i]
    u_tilde = polar_transform(v_tilde)
    x = draw_conditional(model.p_x_given_us[u_tilde, sources], rand.local_m).astype(np.int64)
    ledger.append(LedgerEntry("M", -1, "X", int(x.size)))

    x_last = None
    capacity = None if x_sets is None else x_sets.info_set.size
    pos = payload_positions(sets, capacity)
    payload = v_tilde[-1][pos].copy()
    if x_sets is not None:
        spec = last_block_spec(x_sets, rand)
        x_last = channel_encode(payload, spec, model, rand.local_m).astype(np.int64)
        ledger.append(LedgerEntry("C2", k, "payload pad", int(pos.size)))
        ledger.append(LedgerEntry("C1", k, "H_X|Y (reused)", spec.reused_bits))
        ledger.append(LedgerEntry("C_last", k, "H_X|Y", spec.common_randomness_bits))
    return BlockChain(n, k, sources, v_tilde, u_tilde, x, payload, x_last, ledger)


def decode_chain(
    model: CoordinationModel,
    sets: IndexSets,
    y_blocks,
    rand: RandomnessSources,
    rng: np.random.Generator,
    x_sets: XSets | None = None,
    y_last=None,
    genie_payload=None,
) -> DecodedChain:
    """Reverse-order decoding of ``k`` blocks.

    The last block's ``A_3`` comes from ``genie_payload`` if given, otherwise
    from ``y_last`` through the channel code. ``rng`` drives the decoder-side
    reconstruction ``Shat ~ P_{Shat|UY}``.
    """
    y_blocks = np.asarray(y_blocks, dtype=np.int64)
    if y_blocks.ndim != 2 or y_blocks.shape[1] != sets.n:
        raise LengthMismatch(f"expected (k, {sets.n}) received blocks, got {y_blocks.shape}")
    k, n = y_blocks.shape
    src = PairSource(model.p_uy())

    if genie_payload is not None:
        payload = np.asarray(genie_payload, dtype=np.int8)
    else:
        if x_sets is None or y_last is None:
            raise ValueError("need x_sets and y_last unless a genie payload is supplied")
        y_last = np.asarray(y_last, dtype=np.int64)
        if y_last.size != n:
            raise LengthMismatch("last block has the wrong length")
        pos = payload_positions(sets, x_sets.info_set.size)
        spec = last_block_spec(x_sets, rand)
        payload = channel_decode(y_last, spec, model, pos.size)

    v_hat = np.zeros((k, n), np.int8)
    known = payload
    for i in range(k - 1, -1, -1):
        carried = sets.a3_carried[: known.size]
        fixed = frozen_array(n, (sets.a1, rand.c1), (carried, known))
        v_hat[i] = sc_decode(fixed, y_blocks[i], src)
        known = v_hat[i][sets.a3_prime] ^ rand.c2[: sets.a3_prime.size]
    u_hat = polar_transform(v_hat)
    s_hat = draw_conditional(model.p_shat_given_uy[u_hat, y_blocks], rng).astype(np.int64)

    s_hat_last = None
    if y_last is not None:
        # No auxiliary sequence exists for the channel-code block; U = 0 stands in.
        y_last = np.asarray(y_last, dtype=np.int64)
        s_hat_last = draw_conditional(model.p_shat_given_uy[0, y_last], rng).astype(np.int64)
    return DecodedChain(v_hat, u_hat, s_hat, s_hat_last, payload)


def common_randomness_rate(sets: IndexSets, k: int) -> float:
    """``|A_1 u A_3| / (k n)`` bits per source symbol."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return np.union1d(sets.a1, sets.a3).size / (k * sets.n)


def last_block_randomness_rate(x_sets: XSets, k: int, reused: int = 0) -> float:
    """Fresh shared randomness of the channel-code block per source symbol.

    ``reused`` counts frozen bits taken from an existing key (``C_1``).
    """
    frozen_shared = np.intersect1d(x_sets.v_x, x_sets.h_x_given_y).size
    return (x_sets.h_x_given_y.size - min(reused, frozen_shared)) / (k * x_sets.n)


def save_trace(path, chain: BlockChain, seeds: dict | None = None) -> None:
    """Dump a chain to ``.npz`` together with the seeds that produced it."""
    arrays = {
        name: getattr(chain, name)
        for name in (
            "s", "v_tilde", "u_tilde", "x", "payload", "x_last", "s_last",
            "y", "y_last", "v_hat", "u_hat", "s_hat", "s_hat_last",
        )
        if getattr(chain, name) is not None
    }
    meta = {
        "schema": TRACE_SCHEMA,
        "n": chain.n,
        "k": chain.k,
        "seeds": seeds or {},
        "ledger": [list(e) for e in chain.ledger],
    }
    np.savez_compressed(path, meta=np.array(json.dumps(meta)), **arrays)


def load_trace(path) -> tuple[BlockChain, dict]:
    with np.load(Path(path), allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("schema") != TRACE_SCHEMA:
            raise ValueError(f"unsupported trace schema {meta.get('schema')!r}")
        arr = {k: data[k] for k in data.files if k != "meta"}
    chain = BlockChain(
        n=meta["n"],
        k=meta["k"],
        s=arr["s"],
        v_tilde=arr["v_tilde"],
        u_tilde=arr["u_tilde"],
        x=arr["x"],
        payload=arr["payload"],
        x_last=arr.get("x_last"),
        ledger=[LedgerEntry(*e) for e in meta["ledger"]],
        s_last=arr.get("s_last"),
        y=arr.get("y"),
        y_last=arr.get("y_last"),
        v_hat=arr.get("v_hat"),
        u_hat=arr.get("u_hat"),
        s_hat=arr.get("s_hat"),
        s_hat_last=arr.get("s_hat_last"),
    )
    return chain, meta["seeds"]
