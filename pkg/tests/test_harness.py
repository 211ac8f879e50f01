import csv
import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgesim.cli import main
from edgesim.config import ConfigError, load_config, parse_config
from edgesim.harness import (
    TRIAL_COLUMNS,
    TrialRow,
    apply_axis,
    read_trials_csv,
    report,
    run_campaign,
    summary_csv,
    summarize,
    sweep,
)

from conftest import make_raw, markov

ROOT = Path(__file__).resolve().parents[1]
EXAMPLE = ROOT / "configs" / "example.json"
GOLDEN = Path(__file__).parent / "golden" / "example_trials.csv"


def write_cfg(tmp_path, **overrides):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(make_raw(**overrides)))
    return p


# --- config -----------------------------------------------------------------

@pytest.mark.parametrize("drop", ["deadline_s", "tasks", "devices", "policy"])
def test_missing_field_is_named(drop):
    raw = make_raw()
    del raw[drop]
    with pytest.raises(ConfigError) as e:
        parse_config(raw)
    assert e.value.where == drop


def test_unknown_field_rejected():
    with pytest.raises(ConfigError) as e:
        parse_config(make_raw(deadlines=600))
    assert e.value.where == "deadlines"
    with pytest.raises(ConfigError) as e:
        parse_config(make_raw(mobility=[{"markov": {"p_leave": 0.3, "p_return": 0.5, "slots": 10}}, None]))
    assert e.value.where == "mobility[0].markov.slots"


@pytest.mark.parametrize("bad,where", [
    ({"deadline_s": 0}, "deadline_s"),
    ({"tasks": {"K": 0, "payload_bytes": 1}}, "tasks.K"),
    ({"mobility": [markov(1.5, 0.5), None]}, "mobility[0].markov"),
    ({"p_model": "sometimes"}, "p_model"),
    ({"trials": 0}, "trials"),
    ({"policy": "Greedy"}, "policy.name"),
    ({"devices": [{"preset": "nexus7"}]}, "devices[0].preset"),
])
def test_invalid_values(bad, where):
    with pytest.raises(ConfigError) as e:
        parse_config(make_raw(**bad))
    assert e.value.where == where


def test_json_syntax_error_has_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "tasks": ,\n}')
    with pytest.raises(ConfigError) as e:
        load_config(p)
    assert e.value.where.endswith(":2:12")


def test_example_config_loads():
    cfg = load_config(EXAMPLE)
    assert cfg.n_workers == 4 and len(cfg.policies) == 3 and cfg.base_seed == 42
    assert cfg.mobility[1] == cfg.mobility[3]


# --- CLI --------------------------------------------------------------------

def test_cli_config_error_exit_2(tmp_path, capsys):
    raw = make_raw()
    del raw["deadline_s"]
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(raw))
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "deadline_s" in capsys.readouterr().err


def test_cli_missing_file_exit_3(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 3
    assert main(["report", str(tmp_path)]) == 3


def test_cli_empty_sweep_values_exit_2(tmp_path):
    p = write_cfg(tmp_path, trials=1)
    assert main(["sweep", "--config", str(p), "--axis", "n_helpers", "--values", ",",
                 "--out", str(tmp_path / "o")]) == 2


def test_cli_run_and_report(tmp_path, capsys):
    p = write_cfg(tmp_path, trials=2, policy=["NoCooperation", "MaccSerial"],
                  mobility=[markov(0.3, 0.5), markov(0.9, 0.9)])
    out = tmp_path / "o"
    assert main(["run", "--config", str(p), "--out", str(out), "--seed", "7"]) == 0
    rows = read_trials_csv(out / "trials.csv")
    assert [r.seed for r in rows] == [7, 8, 7, 8]
    capsys.readouterr()
    assert main(["report", str(out)]) == 0
    text = capsys.readouterr().out
    assert "NoCooperation" in text and "MaccSerial" in text


def test_cli_validate_trace(tmp_path, capsys):
    good = tmp_path / "t.csv"
    good.write_text("slot,device,in_range\n0,1,1\n1,1,0\n0,2,1\n1,2,1\n")
    assert main(["validate-trace", str(good)]) == 0
    assert "2 devices" in capsys.readouterr().out
    bad = tmp_path / "b.csv"
    bad.write_text("slot,device,in_range\n0,1,1\n2,1,0\n")
    assert main(["validate-trace", str(bad)]) == 2


# --- campaigns --------------------------------------------------------------

def test_single_trial_min_mean_max(tmp_path):
    s, = run_campaign(parse_config(make_raw(trials=1, mobility=[markov(0.3, 0.5), None])), tmp_path)
    for stat in (s.completion_s, s.total_mAh, s.master_mAh, s.failed_attempts):
        assert stat.min == stat.mean == stat.max


def test_summary_matches_trials_csv(tmp_path):
    cfg = parse_config(make_raw(trials=5, policy=["FullOffloading", "MaccSerial"],
                                mobility=[markov(0.3, 0.5), markov(0.9, 0.9)]))
    run_campaign(cfg, tmp_path)
    rows = read_trials_csv(tmp_path / "trials.csv")
    assert len(rows) == 10
    assert summary_csv(summarize(rows)) == (tmp_path / "summary.csv").read_text()
    lines = (tmp_path / "trials.csv").read_text().splitlines()
    assert lines[0].startswith("#") and lines[1] == ",".join(TRIAL_COLUMNS)


def test_golden_example_trials(tmp_path):
    run_campaign(EXAMPLE, tmp_path)
    assert (tmp_path / "trials.csv").read_bytes() == GOLDEN.read_bytes()


@settings(max_examples=100)
@given(vals=st.lists(st.tuples(st.floats(0, 1e4), st.floats(0, 100), st.integers(0, 50), st.booleans()),
                     min_size=1, max_size=20))
def test_summary_bounds(vals):
    rows = [TrialRow(i, i, "P", 1, 60, f, float(f"{c:.6f}"), float(f"{e:.6f}"), 0.0, d)
            for i, (c, e, f, d) in enumerate(vals)]
    s, = summarize(rows)
    assert s.trials == len(vals)
    for st_ in (s.completion_s, s.total_mAh, s.failed_attempts):
        assert st_.min <= st_.mean + 1e-9 and st_.mean <= st_.max + 1e-9
    assert 0.0 <= s.deadline_met_rate <= 1.0


# --- sweeps -----------------------------------------------------------------

def test_n_helpers_sweep_five_rows(tmp_path):
    raw = make_raw(trials=1, policy="FullOffloading",
                   devices=[{"preset": "nexus5", "initial_delay_s": 145}, {"preset": "nexus6p"}],
                   mobility=[markov(0.3, 0.5, 5)], mobility_rest=markov(0.9, 0.9, 5))
    points = sweep(parse_config(raw), "n_helpers", ["1", "2", "3", "4", "5"], tmp_path)
    assert [v for v, _ in points] == ["1", "2", "3", "4", "5"]
    with (tmp_path / "sweep.csv").open() as fh:
        recs = list(csv.DictReader(fh))
    assert len(recs) == 5 and recs[0]["axis"] == "n_helpers"
    rows = (tmp_path / "trials.csv").read_text().splitlines()
    assert rows[1].startswith("n_helpers,trial,")


def test_n_helpers_clones_last_and_uses_rest():
    cfg = parse_config(make_raw(devices=[{"preset": "nexus5"}, {"preset": "nexus6p"}],
                                mobility=[markov(0.3, 0.5)], mobility_rest=markov(0.9, 0.9)))
    big = apply_axis(cfg, "n_helpers", 3)
    assert big.n_workers == 3
    assert big.devices[3].name == "nexus6p" and big.devices[3].id == 3
    assert big.mobility[0].p_leave == 0.3 and big.mobility[2].p_leave == 0.9
    assert apply_axis(big, "n_helpers", 1).n_workers == 1


def test_sweep_rejects_empty_and_unknown(tmp_path):
    cfg = parse_config(make_raw(trials=1))
    with pytest.raises(ConfigError):
        sweep(cfg, "n_helpers", [], tmp_path)
    with pytest.raises(ConfigError):
        sweep(cfg, "colour", ["1"], tmp_path)


def test_mobility_by_policy_layout(tmp_path):
    raw = make_raw(trials=2, policy=["NoCooperation", "FullOffloading", "MaccSerial"],
                   devices=[{"preset": "nexus5", "initial_delay_s": 145}, {"preset": "nexus5"}],
                   mobility=[markov(0.3, 0.5)], p_model="leave")
    sweep(parse_config(raw), "slot_s", ["none", "10", "5"], tmp_path)
    text = report(tmp_path)
    block = text.split("\n\n")[0].splitlines()
    assert block[0] == "completion time (s) by slot_s"
    assert block[1].split() == ["slot_s", "NoCooperation", "FullOffloading", "MaccSerial"]
    assert [ln.split()[0] for ln in block[3:]] == ["none", "10", "5"]
    with (tmp_path / "plotdata_completion.csv").open() as fh:
        recs = list(csv.DictReader(fh))
    assert len(recs) == 9 and len({r["series"] for r in recs}) == 3


def test_report_two_series(tmp_path):
    raw = make_raw(trials=1, policy=["FullOffloading", "MaccSerial"], mobility=[markov(0.3, 0.5), None])
    sweep(parse_config(raw), "deadline_s", ["400"], tmp_path)
    report(tmp_path)
    with (tmp_path / "plotdata_total_mAh.csv").open() as fh:
        assert {r["series"] for r in csv.DictReader(fh)} == {"FullOffloading", "MaccSerial"}


def test_report_empty_dir(tmp_path):
    with pytest.raises(FileNotFoundError):
        report(tmp_path)
