"""Experiment harness: config handling, metrics rows, determinism, and
summary recomputation."""
import json

import pytest

from morl_align.errors import ConfigError, EmptySetError
from morl_align.harness import (
    METRICS_COLUMNS,
    SUMMARY_COLUMNS,
    ExperimentConfig,
    MetricsRow,
    empty_summary,
    format_summary_table,
    load_experiment_config,
    read_metrics_csv,
    run_experiment,
    summarize,
    write_metrics_csv,
    write_summary_csv,
)
from morl_align.interpret import InterpreterConfig


def _config(**kwargs):
    defaults = dict(
        interpreters=(InterpreterConfig(ideal_mode="utopia"),),
        selectors=("argmax",),
        users=(
            {"user_id": "u0", "utility": {"kind": "linear", "weights": [0.7, 0.3]},
             "reaction_noise": 0.0},
        ),
        interactions=10,
        seeds=(0, 1),
    )
    defaults.update(kwargs)
    return ExperimentConfig(**defaults)


# -- config validation and round-trip --


def test_config_validation():
    with pytest.raises(ConfigError):
        _config(seeds=())
    with pytest.raises(ConfigError):
        _config(interpreters=())
    with pytest.raises(ConfigError):
        _config(selectors=())
    with pytest.raises(ConfigError):
        _config(users=())
    with pytest.raises(ConfigError):
        _config(interactions=-1)
    with pytest.raises(ConfigError):
        _config(users=(
            {"user_id": "u0", "utility": {"kind": "linear", "weights": [1.0, 0.0]}},
            {"user_id": "u0", "utility": {"kind": "linear", "weights": [0.0, 1.0]}},
        ))
    with pytest.raises(ConfigError):
        _config(schedule=({"at": 3, "user_id": "nobody"},))
    with pytest.raises(ConfigError):
        _config(schedule=({"at": 3, "user_id": "u0", "extra": 1},))


def test_config_round_trip():
    cfg = _config(schedule=({"at": 5, "user_id": "u0"},))
    again = ExperimentConfig.from_dict(cfg.to_dict())
    assert again == cfg
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"no_such_field": 1})


def test_load_experiment_config(tmp_path):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(_config().to_dict()))
    assert load_experiment_config(str(path)) == _config()
    with pytest.raises(ConfigError):
        load_experiment_config(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ConfigError):
        load_experiment_config(str(bad))
    arr = tmp_path / "arr.json"
    arr.write_text("[]")
    with pytest.raises(ConfigError):
        load_experiment_config(str(arr))


def test_interpreter_labels_disambiguate():
    cfg = _config(
        interpreters=(
            InterpreterConfig(),
            InterpreterConfig(tau=(0.1, 0.1)),
            InterpreterConfig(kind="random-baseline"),
        )
    )
    assert cfg.interpreter_labels() == [
        "explicit-eq1#0", "explicit-eq1#1", "random-baseline"
    ]


# -- running --


def test_run_experiment_shape_and_order(treasure_policy_set):
    cfg = _config(selectors=("argmax", "steering"), interactions=10, seeds=(0, 1))
    rows = run_experiment(cfg, policy_set=treasure_policy_set)
    assert len(rows) == 2 * 2 * 10
    assert rows == sorted(
        rows, key=lambda r: (r.interpreter, r.selector, r.seed, r.interaction)
    )
    for row in rows:
        assert row.run_id == f"{row.interpreter}+{row.selector}+s{row.seed}"
        assert row.true_regret >= 0.0
        assert 0 <= row.policy_id < len(treasure_policy_set.policies)
        assert row.xi_error_l1 is not None and row.xi_error_l1 >= 0.0
    noiseless_aligned = [r for r in rows if r.selector == "argmax" and r.interaction == 9]
    assert all(r.aligned for r in noiseless_aligned)  # σ=0 converges well inside 10


def test_run_experiment_parallel_matches_sequential(treasure_policy_set):
    cfg = _config(selectors=("argmax", "steering"), interactions=6, seeds=(0, 1, 2))
    seq = run_experiment(cfg, policy_set=treasure_policy_set, max_workers=1)
    par = run_experiment(cfg, policy_set=treasure_policy_set, max_workers=6)
    assert seq == par


def test_zero_interactions_degenerate(treasure_policy_set):
    cfg = _config(interactions=0, seeds=(0,))
    rows = run_experiment(cfg, policy_set=treasure_policy_set)
    assert rows == []
    frame = empty_summary(cfg)
    assert len(frame) == 1
    assert frame[0]["interpreter"] == "explicit-eq1"
    assert frame[0]["interactions"] == 0
    assert frame[0]["mean_regret"] is None
    with pytest.raises(EmptySetError):
        summarize(rows)


def test_metrics_csv_round_trip(tmp_path, treasure_policy_set):
    cfg = _config(interactions=5, seeds=(0,))
    rows = run_experiment(cfg, policy_set=treasure_policy_set)
    path = str(tmp_path / "metrics.csv")
    write_metrics_csv(rows, path)
    again = read_metrics_csv(path)
    assert again == rows
    with open(path) as fh:
        assert fh.readline().strip() == ",".join(METRICS_COLUMNS)
    bogus = tmp_path / "not-metrics.csv"
    bogus.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ConfigError):
        read_metrics_csv(str(bogus))


def test_byte_identical_outputs(tmp_path, treasure_policy_set):
    cfg = _config(
        selectors=("argmax",),
        users=(
            {"user_id": "u0", "utility": {"kind": "linear", "weights": [0.7, 0.3]},
             "reaction_noise": 0.25},
        ),
        interactions=25,
        seeds=(0, 1, 2),
    )
    blobs = []
    for name in ("a", "b"):
        rows = run_experiment(cfg, policy_set=treasure_policy_set)
        mpath = str(tmp_path / f"metrics-{name}.csv")
        spath = str(tmp_path / f"summary-{name}.csv")
        write_metrics_csv(rows, mpath)
        write_summary_csv(summarize(rows), spath)
        blobs.append((open(mpath, "rb").read(), open(spath, "rb").read()))
    assert blobs[0] == blobs[1]
    # Different seed set -> different bytes.
    other = run_experiment(
        _config(
            selectors=("argmax",),
            users=cfg.users,
            interactions=25,
            seeds=(7,),
        ),
        policy_set=treasure_policy_set,
    )
    opath = str(tmp_path / "metrics-other.csv")
    write_metrics_csv(other, opath)
    assert open(opath, "rb").read() != blobs[0][0]


# -- summaries --


def test_summary_recompute_oracle(tmp_path, treasure_policy_set):
    cfg = _config(
        selectors=("argmax", "steering"),
        users=(
            {"user_id": "u0", "utility": {"kind": "linear", "weights": [0.6, 0.4]},
             "reaction_noise": 0.25},
        ),
        interactions=20,
        seeds=(0, 1, 2, 3),
    )
    rows = run_experiment(cfg, policy_set=treasure_policy_set)
    emitted = summarize(rows)
    path = str(tmp_path / "metrics.csv")
    write_metrics_csv(rows, path)
    recomputed = summarize(read_metrics_csv(path))
    assert recomputed == emitted
    for entry in emitted:
        assert list(entry) == list(SUMMARY_COLUMNS)
        assert 0.0 <= entry["aligned_at_horizon"] <= 1.0


def test_summary_singleton_dataset():
    row = MetricsRow(
        run_id="explicit-eq1+argmax+s0",
        seed=0,
        interaction=0,
        interpreter="explicit-eq1",
        selector="argmax",
        true_regret=0.5,
        aligned=False,
        xi_error_l1=0.2,
        zeta=-0.5,
        policy_id=3,
    )
    (entry,) = summarize([row])
    assert entry["num_seeds"] == 1
    assert entry["interactions"] == 1
    assert entry["mean_regret"] == 0.5
    assert entry["mean_terminal_regret"] == 0.5
    assert entry["median_terminal_regret"] == 0.5
    assert entry["terminal_regret_q25"] == 0.5
    assert entry["terminal_regret_q75"] == 0.5
    assert entry["median_time_to_align"] == 1.0  # never aligned -> horizon
    assert entry["aligned_at_horizon"] == 0.0


def test_time_to_align_is_suffix_based():
    def row(i, aligned):
        return MetricsRow("r", 0, i, "explicit-eq1", "argmax", 0.0 if aligned else 1.0,
                          aligned, None, 0.0, 0)

    # Aligned at 1, relapses at 3, aligned for good from 4.
    rows = [row(0, False), row(1, True), row(2, True), row(3, False), row(4, True),
            row(5, True)]
    (entry,) = summarize(rows)
    assert entry["median_time_to_align"] == 4.0
    assert entry["aligned_at_horizon"] == 1.0


def test_explicit_beats_random_noiseless(treasure_policy_set):
    cfg = _config(
        interpreters=(
            InterpreterConfig(ideal_mode="utopia"),
            InterpreterConfig(kind="random-baseline"),
        ),
        users=(
            {"user_id": "u0", "utility": {"kind": "linear", "weights": [0.8, 0.2]},
             "reaction_noise": 0.0},
        ),
        interactions=40,
        seeds=(0, 1, 2),
    )
    summary = {e["interpreter"]: e for e in summarize(run_experiment(cfg, policy_set=treasure_policy_set))}
    assert summary["explicit-eq1"]["mean_regret"] < summary["random-baseline"]["mean_regret"]


def test_user_switch_schedule(treasure_policy_set):
    cfg = _config(
        users=(
            {"user_id": "aa", "utility": {"kind": "linear", "weights": [0.9, 0.1]},
             "reaction_noise": 0.0},
            {"user_id": "bb", "utility": {"kind": "linear", "weights": [0.1, 0.9]},
             "reaction_noise": 0.0},
        ),
        schedule=({"at": 5, "user_id": "bb"},),
        interactions=45,
        seeds=(0,),
    )
    rows = run_experiment(cfg, policy_set=treasure_policy_set)
    assert len(rows) == 45
    # Before the switch the loop aligns to aa's treasure-heavy taste...
    assert rows[4].policy_id == 3
    # ...afterwards it re-converges to bb, whose optimum is the quick dive.
    assert rows[-1].aligned
    assert rows[-1].policy_id == 0


def test_tlo_user_has_no_xi_error(tmp_path, treasure_policy_set):
    cfg = _config(
        users=(
            {"user_id": "u0",
             "utility": {"kind": "tlo", "priority": [0, 1], "thresholds": [2.0]},
             "reaction_noise": 0.0},
        ),
        interactions=4,
        seeds=(0,),
    )
    rows = run_experiment(cfg, policy_set=treasure_policy_set)
    assert all(r.xi_error_l1 is None for r in rows)
    path = str(tmp_path / "metrics.csv")
    write_metrics_csv(rows, path)
    assert read_metrics_csv(path) == rows


def test_format_summary_table(treasure_policy_set):
    cfg = _config(interactions=5, seeds=(0,))
    text = format_summary_table(summarize(run_experiment(cfg, policy_set=treasure_policy_set)))
    lines = text.splitlines()
    assert lines[0].startswith("interpreter")
    assert lines[1].startswith("---")
    assert "explicit-eq1" in lines[2]
    empty_text = format_summary_table(empty_summary(_config(interactions=0)))
    assert "-" in empty_text.splitlines()[2]
