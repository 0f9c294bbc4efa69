import csv
import json
from fractions import Fraction as F

import pytest

from ccbandit.cli import COLUMNS, main, result_rows, run_config
from ccbandit.config import ConfigError, list_presets, load_config

SMALL = """\
name: small
instance:
  context_probs: [0.4, 0.6]
  rewards:
    - ["4/15", "8/15", "4/5"]
    - ["2/15", "4/15", "2/5"]
rhos: [0.39, "2/5"]
horizons: [100, 200]
checkpoints: {start: 50, factor: 2}
policies:
  - ALP
  - {name: UCB-EALP2, label: ucb-ealp2-fixed, options: {t1: 40}}
  - {name: eps-first-ALP, options: {explore: 20}}
runs: 40
seed: 3
bounds: true
"""


def write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_presets_listed_and_valid(capsys):
    names = list_presets()
    assert {"two-context", "ten-context", "tiny-dp"} <= set(names)
    for n in names:
        assert main(["validate", n]) == 0
    assert main(["presets"]) == 0
    assert "tiny-dp" in capsys.readouterr().out


def test_two_context_preset_contents():
    cfg = load_config("two-context")
    assert cfg.instance.context_probs == (F(2, 5), F(3, 5))
    assert cfg.instance.expected_rewards[0] == tuple(F(8, 10) * x for x in (F(1, 3), F(2, 3), F(1)))
    assert cfg.instance.expected_rewards[1] == tuple(F(4, 10) * x for x in (F(1, 3), F(2, 3), F(1)))
    assert cfg.rhos == (F(39, 100), F(2, 5), F(41, 100))
    assert {"FLP", "ALP", "EALP", "UCB-ALP", "UCB-FLP", "UCB-EALP"} <= {p.label for p in cfg.policies}


def test_multi_context_preset_contents():
    cfg = load_config("ten-context")
    assert (cfg.instance.J, cfg.instance.K) == (10, 5)
    assert cfg.instance.expected_rewards[2][3] == F(3 * 4, 50)
    assert cfg.rhos == (F(49, 100), F(1, 2), F(51, 100))


@pytest.mark.parametrize(
    "patch,field",
    [
        (("policies:\n  - ALP\n  - {name: UCB-EALP2, label: ucb-ealp2-fixed, options: {t1: 40}}\n  - {name: eps-first-ALP, options: {explore: 20}}\n", "policies: []\n"), "policies"),
        (("runs: 40", "runs: 1"), "runs"),
        (("rhos: [0.39, \"2/5\"]", "rhos: [0.39, abc]"), "rhos.1"),
        (("seed: 3", "seed: 3\ncolour: blue"), "colour"),
        (("  - ALP\n", "  - ALPX\n"), "policies.0"),
        (("{t1: 40}", "{t1: never}"), "policies.1"),
        (("horizons: [100, 200]", "horizons: [100, -5]"), "horizons.1"),
    ],
)
def test_invalid_configs_exit_2(tmp_path, capsys, patch, field):
    text = SMALL.replace(*patch)
    assert text != SMALL
    p = write(tmp_path, text)
    with pytest.raises(ConfigError) as info:
        load_config(p)
    assert ".".join(map(str, info.value.path)) == field
    assert info.value.line is not None
    assert main(["validate", str(p)]) == 2
    assert main(["run", str(p)]) == 2
    err = capsys.readouterr().err
    assert f"cfg.yaml:{info.value.line}" in err


def test_pb_on_three_contexts_names_constraint(tmp_path, capsys):
    text = """\
instance: {context_probs: [0.2, 0.3, 0.5], rewards: [[0.1], [0.2], [0.3]]}
rhos: [0.5]
horizons: [10]
policies: [PB]
runs: 10
"""
    assert main(["validate", str(write(tmp_path, text))]) == 2
    assert "J = 2" in capsys.readouterr().err


def test_dp_size_guard_in_validation(tmp_path):
    text = """\
instance: {context_probs: [0.5, 0.5], rewards: [[0.1], [0.2]]}
rhos: [0.5]
horizons: [5000]
policies: [ALP]
benchmark: dp
runs: 10
"""
    with pytest.raises(ConfigError, match="cells"):
        load_config(write(tmp_path, text))


def test_yaml_syntax_error_has_line(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, "instance: {\nrhos: [0.5\n"))
    assert info.value.line is not None


def test_json_config_accepted(tmp_path):
    doc = {
        "instance": {"context_probs": [1], "rewards": [[0.5, 0.7]], "costs": [[1, 2]]},
        "rhos": [0.8],
        "horizons": [30],
        "policies": ["gALP"],
        "runs": 4,
    }
    cfg = load_config(write(tmp_path, json.dumps(doc), "c.json"))
    assert cfg.instance.costs == ((1, 2),)


def test_run_csv_roundtrip(tmp_path):
    p = write(tmp_path, SMALL)
    out = tmp_path / "res.csv"
    assert main(["run", str(p), "--out", str(out)]) == 0
    with out.open() as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    assert tuple(header) == COLUMNS
    assert header == "policy,T,B,rho,runs,mean_reward,benchmark,regret_mean,regret_ci95,seed,checkpoint".split(",")
    # 2 ratios x (T=100: checkpoints 50,100; T=200: 50,100,200) x 3 policies
    assert len(rows) == 2 * (2 + 3) * 3
    cfg = load_config(p)
    result = run_config(cfg)
    expected = result_rows(result)
    for row, exp in zip(rows, expected):
        rec = dict(zip(header, row))
        assert rec["policy"] == exp["policy"]
        for k in ("mean_reward", "benchmark", "regret_mean", "regret_ci95"):
            assert float(rec[k]) == exp[k]
        # 17 significant digits parse back to the same double
        assert float(rec["rho"]) == float(exp["rho"])
        assert F(float(rec["rho"])).limit_denominator(1000) == exp["rho"]
        assert int(rec["T"]) == exp["T"] and int(rec["checkpoint"]) == exp["checkpoint"]
        assert F(rec["B"]) == exp["B"]
    main_rows = [r for r in rows if r[1] == r[-1]]
    assert len(main_rows) == 2 * 2 * 3
    bounds = (tmp_path / "res.bounds.csv").read_text().splitlines()
    assert bounds[0].startswith("rho,boundary")
    assert len(bounds) == 3


def test_validate_then_run_matches_run(tmp_path):
    p = write(tmp_path, SMALL)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["validate", str(p)]) == 0
    assert main(["run", str(p), "--out", str(a)]) == 0
    assert main(["run", str(p), "--out", str(b), "--threads", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_overrides_and_json(tmp_path):
    p = write(tmp_path, SMALL)
    out = tmp_path / "r.json"
    assert main(["run", str(p), "--runs", "6", "--seed", "9", "--format", "json", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["columns"] == list(COLUMNS)
    assert {r["runs"] for r in doc["rows"]} == {6}
    assert {r["seed"] for r in doc["rows"]} == {9}
    assert all(r["regret_ci95"] is None for r in doc["rows"])
    assert len(doc["bounds"]) == 2


def test_stdout_output(capsys):
    assert main(["run", "tiny-dp", "--runs", "4"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == ",".join(COLUMNS) and len(lines) == 1 + 2 * 3


def test_contract_violation_exit_3(tmp_path, monkeypatch, capsys):
    from ccbandit.policies import ALP

    def greedy(self, t, contexts, budget, uniforms):
        return self._known_best[contexts]

    monkeypatch.setattr(ALP, "act", greedy)
    p = write(tmp_path, SMALL.replace("bounds: true", "bounds: false"))
    assert main(["run", str(p)]) == 3
    assert "contract violation" in capsys.readouterr().err
