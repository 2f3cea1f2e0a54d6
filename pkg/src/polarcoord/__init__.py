"""Polar coding for empirical coordination of a source, a channel and a decoder action."""

from .asym_code import ChannelCodeSpec, channel_decode, channel_encode
from .chain_codec import (
    BlockChain,
    RandomnessSources,
    common_randomness_rate,
    decode_chain,
    encode_chain,
    last_block_randomness_rate,
)
from .construction import Construction, IndexSets, XSets, build_sets, cached_construct, construct
from .metrics import empirical_type, is_typical, kl_divergence, tv_distance
from .model import (
    CoordinationModel,
    build_model,
    bsc_source_model,
    check_region_membership,
    derive_marginals,
    identity_model,
    reference_model,
)
from .polar_core import PairSource, brute_posterior, polar_transform, sc_decode, sc_posterior, sc_sample
from .simharness import ExperimentConfig, run_experiment, simulate_dmc, summarize

__all__ = [
    "BlockChain", "ChannelCodeSpec", "Construction", "CoordinationModel", "ExperimentConfig",
    "IndexSets", "PairSource", "RandomnessSources", "XSets", "brute_posterior", "bsc_source_model",
    "build_model", "build_sets", "cached_construct", "channel_decode", "channel_encode",
    "check_region_membership", "common_randomness_rate", "construct", "decode_chain",
    "derive_marginals", "empirical_type", "encode_chain", "identity_model", "is_typical",
    "kl_divergence", "last_block_randomness_rate", "polar_transform", "reference_model",
    "run_experiment", "sc_decode", "sc_posterior", "sc_sample", "simulate_dmc", "summarize",
    "tv_distance",
]
