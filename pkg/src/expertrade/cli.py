"""Command-line entry point: ingest, alpha, predict, backtest, ablate-rank, selftest."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .alpha.factors import LinearZScoreCombiner, build_factor_matrix, bundled_library_path, load_library, top_k_contributors
from .backtest import StrategyConfig, run_topk
from .config import ConfigError, RunConfig, apply_overrides, load_config, make_backends
from .market_data import load_panel, movement_label, split_chronological
from .metrics import score_predictions, write_metrics_json, metrics_report
from .orchestrator import DataBundle, Pipeline, PipelineConfig, RunLog, load_fundamentals, load_news
from .ranking import NoisyComparatorModel, simulate_ablation, write_ablation_csv
from .reprogram import PatchConfig, Reprogrammer

log = logging.getLogger("expertrade")


def _write_json(path: Path, payload: Any) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _library(cfg: RunConfig):
    return load_library(cfg.alphas if cfg.alphas else bundled_library_path())


def _test_panel(cfg: RunConfig):
    cfg.require("panel", "split")
    panel = load_panel(cfg.panel)
    _, _, test = split_chronological(panel, cfg.split)
    return panel, test


def _pipeline(cfg: RunConfig, panel, run_log: RunLog) -> Pipeline:
    cfg.require("news", "fundamentals")
    data = DataBundle(
        panel,
        load_news(cfg.news),
        load_fundamentals(cfg.fundamentals),
        _library(cfg),
        LinearZScoreCombiner(),
        Reprogrammer.default(cfg.seed, PatchConfig(window=cfg.window)),
    )
    pcfg = PipelineConfig(
        experts=cfg.experts,
        horizon_days=cfg.horizon,
        seed=cfg.seed,
        window=cfg.window,
        top_factors=cfg.top_factors,
        budget=cfg.budget,
        news_lookback_days=cfg.news_lookback_days,
        compare_retries=cfg.compare_retries,
        jobs=cfg.jobs,
    )
    return Pipeline(pcfg, data, make_backends(cfg), run_log)


# ---------------------------------------------------------------------------
# commands


def cmd_ingest(cfg: RunConfig, out: Path) -> dict:
    cfg.require("panel", "split")
    panel = load_panel(cfg.panel)
    parts = split_chronological(panel, cfg.split)
    report = {
        "tickers": len(panel.tickers),
        "dates": len(panel.dates),
        "first": panel.dates[0].isoformat(),
        "last": panel.dates[-1].isoformat(),
        "split": {
            name: {"days": len(p.dates), "first": p.dates[0].isoformat(), "last": p.dates[-1].isoformat()}
            for name, p in zip(("train", "valid", "test"), parts)
        },
    }
    _write_json(out / "ingest.json", report)
    return report


def cmd_alpha(cfg: RunConfig, out: Path) -> dict:
    panel, test = _test_panel(cfg)
    library = _library(cfg)
    fm = build_factor_matrix(library, panel, test.dates)
    fm.to_csv(out / "factors.csv")
    combiner = LinearZScoreCombiner()
    rows = 0
    with open(out / "contributors.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "ticker", "score", "rank", "alpha_id", "contribution"])
        for d in fm.dates:
            result = combiner.combine(fm.at(d))
            for t in fm.tickers:
                if t not in result.scores:
                    continue
                for r, (a, c) in enumerate(top_k_contributors(result.contributions[t], cfg.top_factors), 1):
                    w.writerow([d.isoformat(), t, repr(result.scores[t]), r, a, repr(c)])
                    rows += 1
    report = {"dates": len(fm.dates), "tickers": len(fm.tickers), "alphas": len(fm.alpha_ids), "contributor_rows": rows}
    _write_json(out / "alpha.json", report)
    return report


def cmd_predict(cfg: RunConfig, out: Path) -> dict:
    panel, test = _test_panel(cfg)
    run_log = RunLog()
    pipe = _pipeline(cfg, panel, run_log)
    last = len(panel.dates) - 1 - cfg.horizon
    days = [d for d in test.dates if panel.date_index(d) <= last]
    pairs = [(t, d) for d in days for t in panel.tickers]
    outcomes = pipe.predict_many(pairs)
    labels, preds = [], []
    with open(out / "predictions.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "ticker", "prediction", "label"])
        for (t, d), o in zip(pairs, outcomes):
            y = movement_label(panel, t, d, cfg.horizon)
            labels.append(y)
            preds.append(o.general.prediction)
            w.writerow([d.isoformat(), t, o.general.prediction.value, y.value])
    cm = score_predictions(labels, preds)
    write_metrics_json(cm, out / "metrics.json")
    run_log.write(out / "predict_log.jsonl")
    return {"predictions": len(pairs), "experts": [k.value for k in cfg.experts], **metrics_report(cm)}


def cmd_backtest(cfg: RunConfig, out: Path) -> dict:
    panel, test = _test_panel(cfg)
    if len(test.dates) < 3:
        raise ConfigError("split.test", "backtest needs at least 3 test days")
    run_log = RunLog()
    pipe = _pipeline(cfg, panel, run_log)
    rankings = {}
    calls = fallbacks = 0
    with open(out / "rankings.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "rank", "ticker", "wins"])
        for d in test.dates[:-1]:
            day = pipe.run_ranking_day(panel.tickers, d, cfg.k)
            rankings[d] = day.ranking.order
            calls += day.comparator_calls
            fallbacks += day.fallbacks
            for r, t in enumerate(day.ranking.order, 1):
                w.writerow([d.isoformat(), r, t, day.ranking.wins[t]])
    result = run_topk(panel, rankings, StrategyConfig(k=cfg.k, cost_rate=cfg.cost_rate), test.dates)
    result.to_csv(out / "curve.csv")
    run_log.write(out / "backtest_log.jsonl")
    report = {
        "days": len(result.returns),
        "k": cfg.k,
        "experts": [k.value for k in cfg.experts],
        "comparisons": calls,
        "fallbacks": fallbacks,
        "final_value": float(result.curve[-1]),
        **{k: (None if np.isnan(v) else v) for k, v in result.metrics().items()},
    }
    _write_json(out / "backtest.json", report)
    return report


def cmd_ablate_rank(cfg: RunConfig, out: Path) -> dict:
    model = NoisyComparatorModel.random(cfg.ablation_n, cfg.ablation_beta, cfg.seed)
    rows = simulate_ablation(model, cfg.ablation_k, cfg.ablation_trials, cfg.ablation_algorithms)
    write_ablation_csv(rows, out / "ablation.csv")
    return {r.algorithm: {"mean_rank_ic": r.mean_rank_ic, "mean_calls": r.mean_calls} for r in rows}


def cmd_selftest(cfg: RunConfig, out: Path) -> dict:
    from .selftest import run_all

    results = run_all(cfg.seed)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    report = {"passed": sum(ok for _, ok, _ in results), "failed": sum(not ok for _, ok, _ in results),
              "checks": [{"name": n, "ok": ok, "detail": d} for n, ok, d in results]}
    _write_json(out / "selftest.json", report)
    if report["failed"]:
        raise SelftestFailed(f"{report['failed']} check(s) failed")
    return {"passed": report["passed"], "failed": 0}


class SelftestFailed(RuntimeError):
    pass


COMMANDS = {
    "ingest": cmd_ingest,
    "alpha": cmd_alpha,
    "predict": cmd_predict,
    "backtest": cmd_backtest,
    "ablate-rank": cmd_ablate_rank,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="expertrade", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="INI run configuration")
    parser.add_argument("--seed", type=int, help="root seed (overrides run.seed)")
    parser.add_argument("--out", default="out", help="output directory (default: out)")
    parser.add_argument("--jobs", type=int, help="max concurrent backend calls")
    parser.add_argument("--k", type=int, help="Top-K size for backtests")
    parser.add_argument("--experts", help="comma-separated enabled experts, e.g. news,market")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("command", choices=sorted(COMMANDS))
    return parser


def _error(kind: str, message: str, **extra: Any) -> None:
    payload = {"error": kind, "message": message, **extra}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        cfg = apply_overrides(cfg, seed=args.seed, jobs=args.jobs, k=args.k, experts=args.experts)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        summary = COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        _error("ConfigError", exc.message, field=exc.field_path)
        return 2
    except Exception as exc:  # noqa: BLE001 - report every failure as JSON
        if args.verbose:
            log.exception("command failed")
        _error(type(exc).__name__, str(exc))
        return 1
    print(json.dumps(summary, sort_keys=True))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
