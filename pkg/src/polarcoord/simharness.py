"""Seeded experiment sweeps: configuration, channel simulation, CSV records.

Seed derivation
---------------
Every random stream is ``SeedSequence(master_seed, spawn_key=(n, k, trial, role))``
with ``role`` one of :data:`ROLES`. The construction stream uses ``k = trial = 0``
(real trials have ``k >= 1``). Streams are keyed by counters, not drawn in
sequence, so adding trials or sizes never shifts an existing stream.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .chain_codec import (
    RandomnessSources,
    common_randomness_rate,
    decode_chain,
    draw_conditional,
    encode_chain,
)
from .construction import Construction, cached_construct, construct
from .metrics import Empty, empirical_type
from .model import (
    AlphabetMismatch,
    CoordinationModel,
    bsc_source_model,
    check_region_membership,
    identity_model,
    model_from_dict,
    reference_model,
)

CONFIG_SCHEMA = "polarcoord.experiment/1"
ROLES = {"construct": 0, "source": 1, "common": 2, "local": 3, "channel": 4, "decoder": 5}
CSV_COLUMNS = (
    "n", "k", "trial", "seed", "tv_aggregate", "tv_per_block",
    "decode_success", "cr_rate_chain", "cr_rate_last_block", "runtime",
)
PRESETS = {
    "reference": reference_model,
    "identity": identity_model,
    # U = S sent over BSC(0.1): I(U;S) = 1 bit exceeds I(U;Y) ~ 0.53 bit.
    "negative_control": lambda: bsc_source_model(0.0, 0.1),
}


class ConfigError(ValueError):
    pass


class RegionViolation(ValueError):
    pass


@dataclass
class ExperimentConfig:
    model: dict | str = "reference"
    m_exponents: list[int] = field(default_factory=lambda: [8, 10, 12])
    k_values: list[int] = field(default_factory=lambda: [4])
    beta: float = 0.275
    beta_v: float | None = 0.08
    mc_samples: int = 2000
    trials_per_point: int = 50
    master_seed: int = 0
    genie_mode: bool = False
    include_last_block_in_type: bool = False
    output: str = "results.csv"
    allow_infeasible: bool = False
    cache_dir: str | None = None
    record_runtime: bool = False
    schema: str = CONFIG_SCHEMA

    def __post_init__(self):
        if self.schema != CONFIG_SCHEMA:
            raise ConfigError(f"unsupported config schema {self.schema!r}")
        if not self.m_exponents or any(int(m) != m or m < 1 for m in self.m_exponents):
            raise ConfigError("m_exponents must be positive integers")
        if not self.k_values or any(int(k) != k or k < 1 for k in self.k_values):
            raise ConfigError("k_values must be positive integers")
        if self.trials_per_point < 1:
            raise ConfigError("trials_per_point must be >= 1")
        for name in ("beta", "beta_v"):
            b = getattr(self, name)
            if b is not None and not 0 < b < 0.5:
                raise ConfigError(f"{name} must lie in (0, 0.5)")
        if self.mc_samples < 1:
            raise ConfigError("mc_samples must be >= 1")
        self.build_model()

    @property
    def sizes(self) -> list[int]:
        return [1 << int(m) for m in self.m_exponents]

    def build_model(self) -> CoordinationModel:
        if isinstance(self.model, str):
            if self.model not in PRESETS:
                raise ConfigError(f"unknown model preset {self.model!r}; choose from {sorted(PRESETS)}")
            return PRESETS[self.model]()
        return model_from_dict(self.model)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if "schema" not in d:
            raise ConfigError("config is missing its schema string")
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def derive_seed(master_seed: int, n: int, k: int, trial: int, role: str) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(n, k, trial, ROLES[role]))


def stream(master_seed: int, n: int, k: int, trial: int, role: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, n, k, trial, role))


def construction_seed(master_seed: int, n: int) -> int:
    return int(derive_seed(master_seed, n, 0, 0, "construct").generate_state(1, np.uint64)[0])


def simulate_dmc(x, p_y_given_x, rng: np.random.Generator) -> np.ndarray:
    """Pass ``x`` symbol by symbol through the channel rows ``p_y_given_x[x]``."""
    x = np.asarray(x, dtype=np.int64)
    p = np.asarray(p_y_given_x, dtype=float)
    if x.size and (x.min() < 0 or x.max() >= p.shape[0]):
        raise AlphabetMismatch(f"channel input outside alphabet of size {p.shape[0]}")
    return draw_conditional(p[x], rng).astype(np.int64)


class RunRecord(NamedTuple):
    n: int
    k: int
    trial: int
    seed: int
    tv_aggregate: float
    tv_per_block: tuple[float, ...]
    decode_success: bool
    cr_rate_chain: float
    cr_rate_last_block: float
    runtime: float | None = None

    def csv_row(self) -> list[str]:
        return [
            str(self.n),
            str(self.k),
            str(self.trial),
            str(self.seed),
            repr(self.tv_aggregate),
            ";".join(repr(v) for v in self.tv_per_block),
            str(int(self.decode_success)),
            repr(self.cr_rate_chain),
            repr(self.cr_rate_last_block),
            "" if self.runtime is None else f"{self.runtime:.6f}",
        ]

    @classmethod
    def from_csv_row(cls, row: dict) -> "RunRecord":
        blocks = tuple(float(v) for v in row["tv_per_block"].split(";") if v)
        rt = row.get("runtime") or None
        return cls(
            int(row["n"]), int(row["k"]), int(row["trial"]), int(row["seed"]),
            float(row["tv_aggregate"]), blocks, row["decode_success"] == "1",
            float(row["cr_rate_chain"]), float(row["cr_rate_last_block"]),
            None if rt is None else float(rt),
        )


def _block_tv(model, s, x, y, shat) -> float:
    target = model.target_sxyt()
    return empirical_type([s, x, y, shat], target.shape).tv(target)


def run_trial(model: CoordinationModel, con: Construction, config: ExperimentConfig, k: int, trial: int) -> RunRecord:
    """One encode/channel/decode round for ``k`` chained blocks."""
    n = con.n
    seed = config.master_seed
    sets, x_sets = con.sets, con.x_sets
    genie = config.genie_mode or x_sets is None
    t0 = time.perf_counter()

    src = stream(seed, n, k, trial, "source")
    s = src.choice(model.n_s, size=(k, n), p=model.p_s)
    s_last = src.choice(model.n_s, size=n, p=model.p_s)
    rand = RandomnessSources.draw(sets, stream(seed, n, k, trial, "common"), stream(seed, n, k, trial, "local"))
    cr_chain = common_randomness_rate(sets, k)

    try:
        chain = encode_chain(model, sets, s, rand, None if genie else x_sets, config.allow_infeasible)
        chan = stream(seed, n, k, trial, "channel")
        chain.y = simulate_dmc(chain.x, model.p_y_given_x, chan)
        if not genie:
            chain.s_last = s_last
            chain.y_last = simulate_dmc(chain.x_last, model.p_y_given_x, chan)
        decoded = decode_chain(
            model, sets, chain.y, rand.shared(), stream(seed, n, k, trial, "decoder"),
            x_sets=x_sets, y_last=chain.y_last, genie_payload=chain.payload if genie else None,
        )
        chain.attach(decoded)
    except ValueError:
        # A broken trial counts as a decoding failure at maximal distance.
        return RunRecord(n, k, trial, seed, 2.0, (2.0,) * k, False, cr_chain, 0.0,
                         time.perf_counter() - t0 if config.record_runtime else None)

    # Formula audit: key bits actually drawn match |A_1 u A_3| / (k n).
    drawn = rand.c1.size + rand.c2.size
    assert math.isclose(drawn / (k * n), cr_chain, rel_tol=0, abs_tol=1e-15), "randomness ledger mismatch"
    cr_last = 0.0 if genie else chain.ledger_bits("C_last") / (k * n)

    per_block = tuple(_block_tv(model, s[i], chain.x[i], chain.y[i], chain.s_hat[i]) for i in range(k))
    cols = [s.ravel(), chain.x.ravel(), chain.y.ravel(), chain.s_hat.ravel()]
    if config.include_last_block_in_type and not genie:
        extra = [s_last, chain.x_last, chain.y_last, chain.s_hat_last]
        cols = [np.concatenate([a, b]) for a, b in zip(cols, extra)]
    target = model.target_sxyt()
    tv = empirical_type(cols, target.shape).tv(target)
    runtime = time.perf_counter() - t0 if config.record_runtime else None
    return RunRecord(n, k, trial, seed, tv, per_block, chain.decode_success(), cr_chain, cr_last, runtime)


def build_construction(model: CoordinationModel, config: ExperimentConfig, n: int) -> Construction:
    kwargs = dict(
        beta=config.beta,
        samples=config.mc_samples,
        seed=construction_seed(config.master_seed, n),
        allow_infeasible=config.allow_infeasible,
        beta_v=config.beta_v,
    )
    if config.cache_dir:
        return cached_construct(config.cache_dir, model, n, **kwargs)
    return construct(model, n, **kwargs)


def iter_records(config: ExperimentConfig) -> Iterator[RunRecord]:
    """Records in ``(n, k, trial)`` order; the sweep itself writes nothing."""
    model = config.build_model()
    if not config.allow_infeasible:
        rc = check_region_membership(model)
        if not rc.member:
            raise RegionViolation(f"I(U;S) exceeds I(U;Y) by {-rc.margin:.4f} bits; set allow_infeasible to force")
    for n in config.sizes:
        con = build_construction(model, config, n)
        for k in config.k_values:
            for trial in range(config.trials_per_point):
                yield run_trial(model, con, config, k, trial)


def write_csv(records, out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow(r.csv_row())


def run_experiment(config: ExperimentConfig, output=None) -> list[RunRecord]:
    """Run the sweep and write its CSV to ``output`` (default ``config.output``)."""
    records = list(iter_records(config))
    path = Path(output if output is not None else config.output)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    write_csv(records, buf)
    path.write_text(buf.getvalue())
    return records


def read_records(path) -> list[RunRecord]:
    with open(path, newline="") as fh:
        return [RunRecord.from_csv_row(row) for row in csv.DictReader(fh)]


class SummaryRow(NamedTuple):
    n: int
    k: int
    trials: int
    frac_tv_above: float
    median_tv: float
    success_rate: float
    mean_cr_chain: float
    mean_cr_last_block: float


def summarize(records, epsilon: float) -> list[SummaryRow]:
    """Per ``(n, k)``: exact fraction of trials with ``tv_aggregate > epsilon`` and friends."""
    records = list(records)
    if not records:
        raise Empty("no records to summarize")
    groups: dict[tuple[int, int], list[RunRecord]] = {}
    for r in records:
        groups.setdefault((r.n, r.k), []).append(r)
    rows = []
    for (n, k), rs in sorted(groups.items()):
        tv = np.array([r.tv_aggregate for r in rs])
        rows.append(SummaryRow(
            n, k, len(rs),
            float(np.count_nonzero(tv > epsilon)) / len(rs),
            float(np.median(tv)),
            float(np.mean([r.decode_success for r in rs])),
            float(np.mean([r.cr_rate_chain for r in rs])),
            float(np.mean([r.cr_rate_last_block for r in rs])),
        ))
    return rows


def format_summary(rows, epsilon: float) -> str:
    head = f"{'n':>6} {'k':>3} {'trials':>6} {'P(tv>' + format(epsilon, 'g') + ')':>11} {'median tv':>10} {'success':>8} {'cr chain':>9} {'cr last':>9}"
    lines = [head]
    for r in rows:
        lines.append(
            f"{r.n:>6} {r.k:>3} {r.trials:>6} {r.frac_tv_above:>11.3f} {r.median_tv:>10.4f} "
            f"{r.success_rate:>8.3f} {r.mean_cr_chain:>9.5f} {r.mean_cr_last_block:>9.5f}"
        )
    return "\n".join(lines)
