import numpy as np
import pytest

from polarcoord import simharness
from polarcoord.chain_codec import common_randomness_rate
from polarcoord.metrics import Empty, empirical_type
from polarcoord.model import AlphabetMismatch
from polarcoord.simharness import (
    CONFIG_SCHEMA,
    ConfigError,
    ExperimentConfig,
    RegionViolation,
    RunRecord,
    build_construction,
    read_records,
    run_experiment,
    simulate_dmc,
    stream,
    summarize,
)

SMALL = dict(m_exponents=[6, 7], k_values=[2, 4], trials_per_point=3, mc_samples=200, beta=0.3, beta_v=0.1,
             allow_infeasible=True)


def bsc(p):
    return np.array([[1 - p, p], [p, 1 - p]])


def test_dmc_identity_and_extremes(rng):
    x = rng.integers(0, 2, 1000)
    assert np.array_equal(simulate_dmc(x, np.eye(2), rng), x)
    assert np.array_equal(simulate_dmc(x, bsc(0.0), rng), x)
    assert np.array_equal(simulate_dmc(x, bsc(1.0), rng), 1 - x)


def test_dmc_flip_rate():
    rng = np.random.default_rng(0)
    n = 100_000
    x = rng.integers(0, 2, n)
    flips = np.mean(simulate_dmc(x, bsc(0.1), rng) != x)
    assert abs(flips - 0.1) <= 3 * np.sqrt(0.1 * 0.9 / n)


def test_dmc_alphabet_mismatch(rng):
    with pytest.raises(AlphabetMismatch):
        simulate_dmc(np.array([0, 2]), bsc(0.1), rng)


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"trials_per_point": 3})
    with pytest.raises(ConfigError):
        ExperimentConfig(schema="other/1")
    with pytest.raises(ConfigError):
        ExperimentConfig(beta=0.6)
    with pytest.raises(ConfigError):
        ExperimentConfig(trials_per_point=0)
    with pytest.raises(ConfigError):
        ExperimentConfig(model="nope")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"schema": CONFIG_SCHEMA, "colour": "red"})


def test_config_json_round_trip(tmp_path):
    from polarcoord.model import reference_model

    cfg = ExperimentConfig(model=reference_model().to_dict(), **SMALL)
    cfg.save(tmp_path / "c.json")
    back = ExperimentConfig.load(tmp_path / "c.json")
    assert back == cfg
    assert back.build_model().fingerprint() == reference_model().fingerprint()


def test_seed_streams_are_counter_based():
    a = stream(5, 64, 2, 1, "source").random(4)
    b = stream(5, 64, 2, 1, "source").random(4)
    c = stream(5, 64, 2, 1, "channel").random(4)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_identity_pipeline_distance_is_source_type_only(tmp_path):
    cfg = ExperimentConfig(model="identity", m_exponents=[6], k_values=[3], trials_per_point=4, mc_samples=20,
                           output=str(tmp_path / "id.csv"))
    for r in run_experiment(cfg):
        assert r.decode_success
        s = stream(0, 64, 3, r.trial, "source").choice(2, size=(3, 64), p=[0.5, 0.5])
        assert r.tv_aggregate == pytest.approx(empirical_type(s.ravel(), (2,)).tv([0.5, 0.5]), abs=1e-12)


def test_identical_csv_on_replay(tmp_path):
    a = ExperimentConfig(output=str(tmp_path / "a.csv"), **SMALL)
    b = ExperimentConfig(output=str(tmp_path / "b.csv"), **SMALL)
    run_experiment(a)
    run_experiment(b)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_adding_trials_keeps_existing_records(tmp_path):
    few = run_experiment(ExperimentConfig(output=str(tmp_path / "a.csv"), **{**SMALL, "trials_per_point": 2}))
    more = run_experiment(ExperimentConfig(output=str(tmp_path / "b.csv"), **SMALL))
    keyed = {(r.n, r.k, r.trial): r for r in more}
    for r in few:
        assert keyed[(r.n, r.k, r.trial)] == r


def test_csv_round_trip_and_columns(tmp_path):
    cfg = ExperimentConfig(output=str(tmp_path / "r.csv"), **SMALL)
    records = run_experiment(cfg)
    header = (tmp_path / "r.csv").read_text().splitlines()[0]
    assert header == ",".join(simharness.CSV_COLUMNS)
    assert read_records(tmp_path / "r.csv") == records
    assert [(r.n, r.k, r.trial) for r in records] == sorted((r.n, r.k, r.trial) for r in records)
    assert all(r.runtime is None for r in records)


def test_records_audit_common_randomness(tmp_path):
    cfg = ExperimentConfig(output=str(tmp_path / "r.csv"), **SMALL)
    model = cfg.build_model()
    cons = {n: build_construction(model, cfg, n) for n in cfg.sizes}
    for r in run_experiment(cfg):
        assert r.cr_rate_chain == common_randomness_rate(cons[r.n].sets, r.k)
        assert 0 <= r.tv_aggregate <= 2 and all(0 <= v <= 2 for v in r.tv_per_block)
        assert len(r.tv_per_block) == r.k


def test_region_violation_needs_force(tmp_path):
    cfg = ExperimentConfig(model="negative_control", m_exponents=[6], trials_per_point=1, mc_samples=50,
                           output=str(tmp_path / "n.csv"))
    with pytest.raises(RegionViolation):
        run_experiment(cfg)


def test_failed_trial_is_recorded(tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise ValueError("simulated decoder fault")

    monkeypatch.setattr(simharness, "decode_chain", broken)
    cfg = ExperimentConfig(output=str(tmp_path / "f.csv"), **{**SMALL, "m_exponents": [6], "k_values": [2]})
    records = run_experiment(cfg)
    assert len(records) == 3 and not any(r.decode_success for r in records)


def test_summarize_simple_cases():
    zero = [RunRecord(64, 2, t, 0, 0.0, (0.0, 0.0), True, 0.1, 0.0) for t in range(4)]
    assert summarize(zero, 0.01)[0].frac_tv_above == 0.0
    one = [RunRecord(64, 2, 0, 0, 1.5, (1.5, 1.5), False, 0.1, 0.0)]
    row = summarize(one, 1.0)[0]
    assert row.frac_tv_above == 1.0 and row.median_tv == 1.5 and row.success_rate == 0.0
    with pytest.raises(Empty):
        summarize([], 0.1)


def test_summarize_groups_by_size(tmp_path):
    records = run_experiment(ExperimentConfig(output=str(tmp_path / "r.csv"), **SMALL))
    rows = summarize(records, 0.25)
    assert [(r.n, r.k) for r in rows] == [(64, 2), (64, 4), (128, 2), (128, 4)]
    assert all(r.trials == 3 for r in rows)
