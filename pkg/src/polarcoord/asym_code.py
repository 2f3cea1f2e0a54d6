"""Polar code for an asymmetric binary-input channel (last chained block).

Positions of ``Z = X G_n`` are used as follows:

==========================  ==========================================
``V_X`` minus ``H_{X|Y}``   payload (whitened), then local filler bits
``V_X`` and ``H_{X|Y}``     shared uniform bits
``H_{X|Y}`` outside ``V_X`` SC shaping from ``P_{Z^j|Z^{1:j-1}}`` with
                            shared uniforms (the decoder replays them)
everything else             SC shaping with encoder-local uniforms
==========================  ==========================================

Only the positions in ``H_{X|Y}`` consume common randomness; the decoder
recovers every other position by SC decisions against ``Y``. Frozen shared
bits may be taken from an already-shared uniform key (``reuse_bits``); only
the remainder is fresh.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .construction import XSets
from .model import CoordinationModel
from .polar_core import (
    ACT_DECIDE,
    ACT_FIXED,
    ACT_SAMPLE,
    ACT_SAMPLE_AUX,
    PairSource,
    polar_transform,
    sc_run,
)


class PayloadTooLarge(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ChannelCodeSpec:
    n: int
    v_x: np.ndarray
    h_x_given_y: np.ndarray
    info_set: np.ndarray
    shaping_seed: int
    pad_key: np.ndarray | None = None
    reuse_bits: np.ndarray | None = None

    @classmethod
    def from_x_sets(cls, x_sets: XSets, shaping_seed: int, pad_key=None, reuse_bits=None) -> "ChannelCodeSpec":
        pad = None if pad_key is None else np.asarray(pad_key, dtype=np.int8)
        reuse = None if reuse_bits is None else np.asarray(reuse_bits, dtype=np.int8)
        return cls(x_sets.n, x_sets.v_x, x_sets.h_x_given_y, x_sets.info_set, int(shaping_seed), pad, reuse)

    @property
    def payload_capacity(self) -> int:
        return int(self.info_set.size)

    @property
    def reused_bits(self) -> int:
        frozen_shared = self.layout()[0]
        available = 0 if self.reuse_bits is None else self.reuse_bits.size
        return int(min(available, frozen_shared.sum()))

    @property
    def common_randomness_bits(self) -> int:
        """Fresh shared bits/uniforms the code consumes.

        Reused key bits and the pad are accounted for by their owner.
        """
        return int(self.h_x_given_y.size) - self.reused_bits

    def shared_randomness(self) -> tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng(self.shaping_seed)
        bits = rng.integers(0, 2, self.n, dtype=np.int8)
        unif = rng.random(self.n)
        if self.reuse_bits is not None:
            pos = np.flatnonzero(self.layout()[0])[: self.reused_bits]
            bits[pos] = self.reuse_bits[: pos.size]
        return bits, unif

    def layout(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Boolean masks ``(frozen_shared, shaped_shared, shaped_local)``."""
        in_v = np.zeros(self.n, bool)
        in_v[self.v_x] = True
        in_h = np.zeros(self.n, bool)
        in_h[self.h_x_given_y] = True
        info = np.zeros(self.n, bool)
        info[self.info_set] = True
        return in_v & in_h, ~in_v & in_h, ~in_v & ~in_h & ~info


def _whiten(bits: np.ndarray, spec: ChannelCodeSpec) -> np.ndarray:
    if spec.pad_key is None:
        return bits
    if spec.pad_key.size < bits.size:
        raise PayloadTooLarge(f"pad key holds {spec.pad_key.size} bits, payload has {bits.size}")
    return bits ^ spec.pad_key[: bits.size]


def encode_z(payload, spec: ChannelCodeSpec, model: CoordinationModel, rng: np.random.Generator) -> np.ndarray:
    """Return the polarized block ``Z``; ``rng`` is encoder-local randomness."""
    payload = np.asarray(payload, dtype=np.int8)
    if payload.size > spec.payload_capacity:
        raise PayloadTooLarge(f"payload of {payload.size} bits exceeds capacity {spec.payload_capacity}")
    n = spec.n
    shared_bits, shared_unif = spec.shared_randomness()
    frozen_shared, shaped_shared, _ = spec.layout()

    fixed = np.zeros(n, np.int8)
    action = np.full(n, ACT_SAMPLE, np.int8)
    carried = spec.info_set[: payload.size]
    filler = spec.info_set[payload.size :]
    fixed[carried] = _whiten(payload, spec)
    fixed[filler] = rng.integers(0, 2, filler.size, dtype=np.int8)
    fixed[frozen_shared] = shared_bits[frozen_shared]
    action[spec.info_set] = ACT_FIXED
    action[frozen_shared] = ACT_FIXED
    uniform = rng.random(n)
    uniform[shaped_shared] = shared_unif[shaped_shared]

    p0, p1 = PairSource.unconditional(model.p_x()).leaf_pairs(np.zeros(n, np.int64))
    return sc_run(p0, p1, action, fixed, uniform).v[0]


def channel_encode(payload, spec: ChannelCodeSpec, model: CoordinationModel, rng: np.random.Generator) -> np.ndarray:
    """Encode ``payload`` into a channel-input block ``X = Z G_n``."""
    return polar_transform(encode_z(payload, spec, model, rng))


def decode_z(y, spec: ChannelCodeSpec, model: CoordinationModel) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    n = spec.n
    if y.size != n:
        raise ValueError(f"expected a block of {n} symbols, got {y.size}")
    shared_bits, shared_unif = spec.shared_randomness()
    frozen_shared, shaped_shared, _ = spec.layout()

    action = np.full(n, ACT_DECIDE, np.int8)
    action[frozen_shared] = ACT_FIXED
    action[shaped_shared] = ACT_SAMPLE_AUX
    fixed = np.where(frozen_shared, shared_bits, 0).astype(np.int8)

    p0, p1 = PairSource(model.p_xy()).leaf_pairs(y)
    a0, a1 = PairSource.unconditional(model.p_x()).leaf_pairs(np.zeros(n, np.int64))
    return sc_run(p0, p1, action, fixed, shared_unif, a0, a1).v[0]


def channel_decode(y, spec: ChannelCodeSpec, model: CoordinationModel, payload_size: int) -> np.ndarray:
    """Recover ``payload_size`` payload bits from a received block."""
    if payload_size > spec.payload_capacity:
        raise PayloadTooLarge(f"payload of {payload_size} bits exceeds capacity {spec.payload_capacity}")
    z = decode_z(y, spec, model)
    return _whiten(z[spec.info_set[:payload_size]], spec)
