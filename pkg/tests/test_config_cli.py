from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from expertrade.cli import main
from expertrade.config import ConfigError, apply_overrides, load_config, make_backends
from expertrade.experts.backends import MockBackend, ScriptedBackend
from expertrade.experts.schema import ExpertKind
from expertrade.synthetic import fixture_dir

FIXTURE = fixture_dir()

SHORT_INI = f"""
[data]
panel = {FIXTURE / 'panel.csv'}
news = {FIXTURE / 'news.jsonl'}
fundamentals = {FIXTURE / 'fundamentals.jsonl'}

[split]
train = 2022-01-01,2022-06-30
valid = 2022-07-01,2022-12-31
test = 2023-01-01,2023-01-10

[run]
seed = 0
k = 3

[ablation]
n = 10
k = 3
trials = 20
"""


def write_ini(tmp_path: Path, text: str) -> Path:
    p = tmp_path / "run.ini"
    p.write_text(text, encoding="utf-8")
    return p


def run_cli(args, capsys):
    code = main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


def test_fixture_config_loads():
    cfg = load_config(FIXTURE / "fixture.ini")
    assert cfg.panel == (FIXTURE / "panel.csv").resolve()
    assert cfg.k == 3 and cfg.seed == 0 and cfg.news_lookback_days == 7
    assert cfg.experts == (ExpertKind.NEWS, ExpertKind.MARKET, ExpertKind.ALPHA, ExpertKind.FUNDAMENTAL)
    assert all(isinstance(b, MockBackend) for b in make_backends(cfg).values())


@pytest.mark.parametrize(
    "text,field",
    [
        ("[run]\nseeed = 1\n", "run.seeed"),
        ("[runn]\nseed = 1\n", "runn"),
        ("[run]\nk = 0\n", "run.k"),
        ("[run]\nk = three\n", "run.k"),
        ("[run]\nexperts = news,weather\n", "run.experts"),
        ("[run]\ncost_rate = 1.5\n", "run.cost_rate"),
        ("[split]\ntrain = 2022-01-01,2021-01-01\nvalid = 2022-07-01,2022-12-31\ntest = 2023-01-01,2023-12-31\n",
         "split.train"),
        ("[backend]\nkind = scripted\n", "backend.script"),
        ("[backend]\nkind = remote\nurl = http://x\n", "backend.model"),
        ("[backend]\nkind = psychic\n", "backend.kind"),
        ("[ablation]\nn = 5\nk = 6\n", "ablation.k"),
    ],
)
def test_config_errors_name_the_field(tmp_path, text, field):
    with pytest.raises(ConfigError) as err:
        load_config(write_ini(tmp_path, text))
    assert err.value.field_path == field


def test_missing_config_file():
    with pytest.raises(ConfigError) as err:
        load_config("/nonexistent/run.ini")
    assert err.value.field_path == "--config"


def test_overrides_win_and_validate(tmp_path):
    cfg = load_config(write_ini(tmp_path, SHORT_INI))
    cfg2 = apply_overrides(cfg, seed=9, k=5, jobs=None, experts="market,alpha")
    assert (cfg2.seed, cfg2.k, cfg2.jobs) == (9, 5, 1)
    assert cfg2.experts == (ExpertKind.MARKET, ExpertKind.ALPHA)
    with pytest.raises(ConfigError) as err:
        apply_overrides(cfg, k=0)
    assert err.value.field_path == "--k"


def test_per_kind_backend_override(tmp_path):
    script = tmp_path / "s.jsonl"
    script.write_text("", encoding="utf-8")
    cfg = load_config(write_ini(tmp_path, "[backend.general_compare]\nkind = scripted\nscript = s.jsonl\n"))
    backends = make_backends(cfg)
    assert isinstance(backends[ExpertKind.GENERAL_COMPARE], ScriptedBackend)
    assert isinstance(backends[ExpertKind.NEWS], MockBackend)


def test_cli_missing_data_path_exits_2(tmp_path, capsys):
    ini = write_ini(tmp_path, SHORT_INI.replace("panel.csv", "absent.csv"))
    code, out, err = run_cli(["--config", ini, "--out", tmp_path / "o", "ingest"], capsys)
    assert code == 2 and out == ""
    payload = json.loads(err)
    assert payload["error"] == "ConfigError" and payload["field"] == "data.panel"


def test_cli_k_zero_is_config_error(tmp_path, capsys):
    ini = write_ini(tmp_path, SHORT_INI)
    code, _, err = run_cli(["--config", ini, "--out", tmp_path / "o", "--k", "0", "backtest"], capsys)
    assert code == 2 and json.loads(err)["field"] == "--k"


def test_cli_ingest(tmp_path, capsys):
    ini = write_ini(tmp_path, SHORT_INI)
    code, out, _ = run_cli(["--config", ini, "--out", tmp_path / "o", "ingest"], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["tickers"] == 30
    assert report["split"]["test"] == {"days": 7, "first": "2023-01-02", "last": "2023-01-10"}
    assert json.loads((tmp_path / "o" / "ingest.json").read_text()) == report


def test_cli_alpha_outputs(tmp_path, capsys):
    ini = write_ini(tmp_path, SHORT_INI)
    code, out, _ = run_cli(["--config", ini, "--out", tmp_path / "o", "alpha"], capsys)
    assert code == 0
    report = json.loads(out)
    with open(tmp_path / "o" / "contributors.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == report["contributor_rows"] == 7 * 30 * 5
    assert {r["rank"] for r in rows} == {"1", "2", "3", "4", "5"}


def test_cli_backtest_flags_override_file(tmp_path, capsys):
    ini = write_ini(tmp_path, SHORT_INI)
    code, out, _ = run_cli(
        ["--config", ini, "--out", tmp_path / "o", "--k", "2", "--experts", "market,alpha", "backtest"], capsys
    )
    assert code == 0
    report = json.loads(out)
    assert report["k"] == 2 and report["experts"] == ["market", "alpha"]
    assert report["days"] == 6 and report["comparisons"] == 6 * 435
    with open(tmp_path / "o" / "curve.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 7 and all(len(r["holdings"].split(";")) == 2 for r in rows[1:])


def test_cli_ablate_rank(tmp_path, capsys):
    ini = write_ini(tmp_path, SHORT_INI)
    code, out, _ = run_cli(["--config", ini, "--out", tmp_path / "o", "ablate-rank"], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["relaxed"]["mean_calls"] == 45.0
    header = (tmp_path / "o" / "ablation.csv").read_text().splitlines()[0]
    assert header == "algorithm,mean_rank_ic,mean_rank_icir,mean_calls,trials,beta,N,K"


def test_cli_selftest(tmp_path, capsys):
    code, out, _ = run_cli(["--out", tmp_path / "o", "selftest"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert all(line.startswith("PASS ") for line in lines[:-1])
    assert json.loads(lines[-1])["failed"] == 0
