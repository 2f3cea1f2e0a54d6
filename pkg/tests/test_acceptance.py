"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py`` (or ``python tests/test_acceptance.py``);
the criterion lines are printed in the terminal summary.
"""

import sys

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES

from polarcoord import selftest
from polarcoord.asym_code import ChannelCodeSpec, channel_decode, channel_encode
from polarcoord.cli import main as cli_main
from polarcoord.construction import build_x_sets
from polarcoord.model import bsc_source_model, h2, identity_model
from polarcoord.simharness import ExperimentConfig, build_construction, run_experiment, simulate_dmc, summarize

SIZES = [8, 10, 12]
TRIALS = 50


def report(num: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {title} -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def cache_dir(tmp_path_factory):
    return str(tmp_path_factory.mktemp("constructions"))


def sweep(cache_dir, tmp, **kw):
    cfg = ExperimentConfig(cache_dir=cache_dir, output=str(tmp / "sweep.csv"), **kw)
    return {r.n: r for r in summarize(run_experiment(cfg), 0.25)}, cfg


def test_criterion_1_oracle_equivalence():
    r = selftest.oracle_suite(np.random.default_rng(1), instances=200, sizes=(2, 4, 8), tol=1e-10)
    report(1, "SC posterior equals brute force", r.ok, f"{r.instances} instances, worst |delta| = {r.worst:.2e}")


def test_criterion_2_involution_and_chain_rule():
    rng = np.random.default_rng(2)
    inv = selftest.involution_suite(rng, instances=200)
    chain = selftest.chain_rule_suite(rng, instances=60, sizes=(2, 4, 8), tol=1e-8)
    report(
        2, "transform involution and chain-rule conservation", inv.ok and chain.ok,
        f"involution failures {inv.failures}/{inv.instances}, chain-rule worst error {chain.worst:.2e}",
    )


def test_criterion_3_lemma_suite():
    rng = np.random.default_rng(3)
    rs = [selftest.mixing_suite(rng, 1000), selftest.contraction_suite(rng, 1000), selftest.pinsker_suite(rng, 1000)]
    detail = ", ".join(f"{r.name} {r.failures}/{r.instances} violations" for r in rs)
    report(3, "mixing, contraction and Pinsker lemmas", all(r.ok for r in rs), detail)


def test_criterion_4_set_rates(cache_dir):
    cfg = ExperimentConfig(cache_dir=cache_dir)
    n = 4096
    s = build_construction(cfg.build_model(), cfg, n).sets
    vs, hy = s.v_v_given_s.size / n, s.h_v_given_y.size / n
    ok = abs(vs - h2(0.11)) <= 0.15 and abs(hy - h2(0.05)) <= 0.15 and s.a2.size >= s.a3.size
    report(
        4, "set rates at n=4096", ok,
        f"|V_V|S|/n={vs:.4f} (target {h2(0.11):.4f}), |H_V|Y|/n={hy:.4f} (target {h2(0.05):.4f}), "
        f"|A2|={s.a2.size} >= |A3|={s.a3.size}",
    )


def test_criterion_5_decoding_reliability(cache_dir, tmp_path):
    rows, _ = sweep(cache_dir, tmp_path, m_exponents=SIZES, k_values=[4], trials_per_point=TRIALS, genie_mode=True)
    rates = [rows[1 << m].success_rate for m in SIZES]
    ok = rates[-1] >= 0.9 and all(a <= b for a, b in zip(rates, rates[1:]))
    report(5, "genie decoding success, k=4", ok, "success " + " -> ".join(f"{r:.2f}" for r in rates) + " over n=2^8,2^10,2^12")


def test_criterion_6_achievability_trend(cache_dir, tmp_path):
    rows, _ = sweep(cache_dir, tmp_path, m_exponents=SIZES, k_values=[4], trials_per_point=TRIALS)
    med = [rows[1 << m].median_tv for m in SIZES]
    within = 1.0 - rows[4096].frac_tv_above
    ok = all(a > b for a, b in zip(med, med[1:])) and within >= 0.8
    report(
        6, "median tv decreasing in n, k=4", ok,
        "median tv " + " -> ".join(f"{v:.4f}" for v in med) + f"; {within:.0%} of runs at n=4096 have tv <= 0.25",
    )


def test_criterion_7_common_randomness(cache_dir, tmp_path):
    cfg = ExperimentConfig(cache_dir=cache_dir, m_exponents=[12], k_values=[4, 8, 16], trials_per_point=3,
                           output=str(tmp_path / "cr.csv"))
    recs = run_experiment(cfg)
    chain = {r.k: r.cr_rate_chain for r in recs}
    halves = chain[4] == 2 * chain[8] and chain[8] == 2 * chain[16]
    total = max(r.cr_rate_chain + r.cr_rate_last_block for r in recs if r.k == 16)
    report(
        7, "common-randomness rate", halves and total <= 0.05,
        f"chain rate k=4,8,16: {chain[4]:.6f}, {chain[8]:.6f}, {chain[16]:.6f}; total at k=16: {total:.5f}",
    )


def _asym_trial_errors(model, x_sets, trials, noisy):
    size = int(0.8 * x_sets.info_set.size)
    errors = 0
    for t in range(trials):
        rng = np.random.default_rng(t)
        spec = ChannelCodeSpec.from_x_sets(x_sets, 10_000 + t)
        payload = rng.integers(0, 2, size, dtype=np.int8)
        x = channel_encode(payload, spec, model, rng)
        y = simulate_dmc(x, model.p_y_given_x, rng) if noisy else x
        errors += not np.array_equal(channel_decode(y, spec, model, size), payload)
    return errors, size


def test_criterion_8_last_block_code():
    n = 4096
    bsc = bsc_source_model(0.0, 0.1)
    xs = build_x_sets(bsc, n, 2000, np.random.default_rng(8), 0.275, beta_v=0.08)
    err, size = _asym_trial_errors(bsc, xs, 100, noisy=True)
    clean = build_x_sets(identity_model(), n, 500, np.random.default_rng(8), 0.275, beta_v=0.08)
    err0, size0 = _asym_trial_errors(identity_model(), clean, 100, noisy=False)
    report(
        8, "channel code at 80% of the information set", err / 100 <= 0.1 and err0 == 0,
        f"BSC(0.1): {err}/100 block errors at {size} bits; noiseless: {err0}/100 at {size0} bits",
    )


def test_criterion_9_negative_control(cache_dir, tmp_path, capsys):
    rejected = cli_main(["check-model", "--model", "negative_control"]) == 1
    capsys.readouterr()
    rows, _ = sweep(cache_dir, tmp_path, model="negative_control", allow_infeasible=True,
                    m_exponents=SIZES, k_values=[4], trials_per_point=TRIALS)
    med = [rows[1 << m].median_tv for m in SIZES]
    # "no improvement": the largest block keeps at least 90% of the smallest block's median distance
    flat = med[-1] >= 0.9 * med[0]
    report(
        9, "negative control rejected, forced run does not improve", rejected and flat,
        f"check-model {'rejects' if rejected else 'accepts'}; forced median tv " + " -> ".join(f"{v:.4f}" for v in med),
    )


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
