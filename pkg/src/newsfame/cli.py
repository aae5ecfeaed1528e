"""Command-line front end.

One declarative JSON config plus flag overrides (flags win); every command
writes JSON reports and CSV plot data into the output directory and is
deterministic given (config, seed): reruns produce byte-identical files.
Exit status is 0 on success; failures print a machine-readable error
object to stderr and exit nonzero.

The default output directory comes from $NEWSFAME_OUT when set.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import forecast, hmm, io, pulses, series
from .distributions import (
    empirical_ccdf,
    fit_lognormal,
    fit_powerlaw_tail,
    fit_truncated_lognormal,
    powerlaw_tail_prob,
)

COMMANDS = (
    "ingest", "fame", "equivalence", "fit-dist", "detect-pulses", "fit-pulse",
    "train-hmm", "simulate", "forecast-max", "forecast-forward",
    "forecast-ratio", "backtest-max", "backtest-ratio", "report",
)

_DEFAULTS = {
    "series_csv": None,
    "group_json": None,
    "out_dir": os.environ.get("NEWSFAME_OUT", "out"),
    "k_sigma": pulses.DEFAULT_K_SIGMA,
    "group_distance": pulses.DEFAULT_GROUP_DISTANCE,
    "ma_length": pulses.DEFAULT_MA_LENGTH,
    "fame_window": 1,
    "peak_window": 5,
    "horizon_days": 365,
    "historical_span": 365,
    "x_min": 1.0,
    "seed": 0,
    "threads": 1,
    "split_date": None,
    "thresholds": [2.0, 5.0, 10.0],
    "hist_lower": 0.0,
    "hist_upper": 20.0,
    "days": 1000,
    "entities": 1,
    "model_json": None,
    "entity": None,
    "start_date": None,
    "end_date": None,
    "truncate_at": None,
    "ratio_kind": "peak_over_hist",
}


@dataclass
class RunConfig:
    """Validated knobs for one command run. Pulse parameters default to the
    shipped detection settings (k_sigma=5, group_distance=20, ma_length=10);
    fame windows default to 1 day historical and 5 day peak."""

    series_csv: str | None
    group_json: str | None
    out_dir: str
    k_sigma: float
    group_distance: int
    ma_length: int
    fame_window: int
    peak_window: int
    horizon_days: int
    historical_span: int
    x_min: float
    seed: int
    threads: int
    split_date: str | None
    thresholds: list[float]
    hist_lower: float
    hist_upper: float
    days: int
    entities: int
    model_json: str | None
    entity: str | None
    start_date: str | None
    end_date: str | None
    truncate_at: float | None
    ratio_kind: str

    def __post_init__(self):
        if self.fame_window < 1 or self.peak_window < 1:
            raise ValueError("fame windows must be >= 1")
        if self.k_sigma <= 0 or self.group_distance < 1 or self.ma_length < 1:
            raise ValueError("pulse parameters must be positive")
        if self.horizon_days < 1 or self.historical_span < 1:
            raise ValueError("horizon and historical span must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.days < 1 or self.entities < 1:
            raise ValueError("days and entities must be >= 1")
        for name in ("series_csv", "group_json", "model_json"):
            path = getattr(self, name)
            if path is not None and not Path(path).exists():
                raise FileNotFoundError(f"{name.replace('_', '-')}: no such file: {path}")

    @property
    def pulse_params(self) -> pulses.PulseDetectionParams:
        return pulses.PulseDetectionParams(
            self.k_sigma, self.group_distance, self.ma_length)

    def out_path(self, name: str) -> Path:
        out = Path(self.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        return out / name

    def need(self, name: str):
        value = getattr(self, name)
        if value is None:
            raise ValueError(f"this command requires --{name.replace('_', '-')}")
        return value


def _pmap(fn, items, threads: int):
    """Apply fn over items, optionally on a thread pool; order preserved."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _safe_name(entity_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", entity_id)


def _load_series(config: RunConfig):
    return io.load_series_csv(config.need("series_csv"))


def _load_group(config: RunConfig):
    return io.load_group_json(config.need("group_json"))


def _parse_date(text: str) -> dt.date:
    return dt.date.fromisoformat(text)


def _train_entity(entity_series, params):
    extents = pulses.detect_pulses(entity_series, params)
    fitted = pulses.fit_pulses(entity_series, extents)
    path = hmm.label_states(entity_series, fitted)
    return hmm.train_hmm(entity_series, path, fitted), fitted


def cmd_ingest(config: RunConfig) -> list[str]:
    series_map = _load_series(config)
    io.write_series_csv(config.out_path("normalized.csv"), series_map)
    any_series = next(iter(series_map.values()))
    summary = {
        "entities": {
            eid: {
                "days": len(s),
                "total_frequency": float(s.values.sum()),
                "mean_daily_frequency": float(s.values.mean()),
            }
            for eid, s in sorted(series_map.items())
        },
        "start_date": any_series.start_date.isoformat(),
        "end_date": any_series.end_date.isoformat(),
    }
    io.dump_json(config.out_path("ingest_summary.json"), summary)
    return ["normalized.csv", "ingest_summary.json"]


def cmd_fame(config: RunConfig) -> list[str]:
    series_map = _load_series(config)
    report = {}
    rows = []
    for eid, s in sorted(series_map.items()):
        full = series.fame(s, len(s), len(s) - 1)
        peak = None
        if len(s) >= config.peak_window:
            peak = float(series.peak_fame(
                s, (s.start_date, s.end_date), config.peak_window))
        report[eid] = {
            "days": len(s),
            "mean_daily_frequency": float(s.values.mean()),
            "average_fame": float(full),
            "peak_fame": peak,
            "peak_fame_window": config.peak_window,
        }
        if len(s) >= config.fame_window:
            fames = series.fame_series(s, config.fame_window)
            for k, value in enumerate(fames):
                day = s.date_at(config.fame_window - 1 + k)
                rows.append((eid, day.isoformat(), float(value)))
    io.dump_json(config.out_path("fame_report.json"),
                 {"fame_window": config.fame_window, "entities": report})
    io.write_csv(config.out_path("fame_series.csv"),
                 ["entity_id", "date", "fame"], rows)
    return ["fame_report.json", "fame_series.csv"]


def cmd_equivalence(config: RunConfig) -> list[str]:
    series_map = _load_series(config)
    group = _load_group(config)
    # entity magnitude on the raw scale: mean daily frequency
    per_entity = {eid: float(series_map[eid].values.mean())
                  for eid in group.sorted_members()}
    curve = series.fame_equivalence(group, per_entity)
    io.write_csv(config.out_path("equivalence.csv"),
                 ["bottom_pct", "top_pct"],
                 [(float(a), float(b)) for a, b in curve])
    io.dump_json(config.out_path("equivalence.json"), {
        "group": group.name,
        "per_entity_fame": per_entity,
        "pairs": [[float(a), float(b)] for a, b in curve],
    })
    return ["equivalence.csv", "equivalence.json"]


def cmd_fit_dist(config: RunConfig) -> list[str]:
    series_map = _load_series(config)
    out = {"fame_window": config.fame_window, "entities": {}}
    artifacts = []
    for eid, s in sorted(series_map.items()):
        shifted = 1.0 + series.windowed_means(s.values, config.fame_window)
        if config.truncate_at is not None:
            fit = fit_truncated_lognormal(shifted, config.truncate_at)
        else:
            fit = fit_lognormal(shifted)
        out["entities"][eid] = fit.to_dict()
    if config.group_json is not None:
        group = _load_group(config)
        magnitudes = np.array([series_map[eid].values.mean()
                               for eid in group.sorted_members()])
        ccdf = empirical_ccdf(magnitudes[magnitudes > 0])
        tail = fit_powerlaw_tail(ccdf, config.x_min)
        out["group_fame_tail"] = tail.to_dict()
        rows = [(float(x), float(p),
                 powerlaw_tail_prob(tail, float(x)) if x >= tail.x_min else "")
                for x, p in zip(ccdf.xs, ccdf.probs)]
        io.write_csv(config.out_path("entity_fame_ccdf.csv"),
                     ["x", "prob", "fitted_prob"], rows)
        artifacts.append("entity_fame_ccdf.csv")
    io.dump_json(config.out_path("fits.json"), out)
    return ["fits.json"] + artifacts


def _pulse_report(entity_series, fitted):
    report = []
    for p in fitted:
        report.append({
            "start_date": entity_series.date_at(p.start_index).isoformat(),
            "peak_date": entity_series.date_at(p.peak_index).isoformat(),
            "end_date": entity_series.date_at(p.end_index).isoformat(),
            "height": p.height,
            "rise_days": p.rise_days,
            "residual": p.residual,
        })
    return report


def cmd_detect_pulses(config: RunConfig) -> list[str]:
    series_map = _load_series(config)
    params = config.pulse_params
    ids = sorted(series_map)
    detected = _pmap(
        lambda eid: pulses.fit_pulses(
            series_map[eid], pulses.detect_pulses(series_map[eid], params)),
        ids, config.threads)
    report = {}
    artifacts = []
    for eid, fitted in zip(ids, detected):
        s = series_map[eid]
        report[eid] = _pulse_report(s, fitted)
        for k, p in enumerate(fitted):
            seg = s.values[p.start_index:p.end_index + 1]
            t = np.arange(1, seg.size + 1, dtype=float)
            shaped = pulses.pulse_shape(p.height, p.rise_days, t)
            name = f"pulse_{_safe_name(eid)}_{k}.csv"
            io.write_csv(config.out_path(name), ["t", "observed", "fitted"],
                         zip(t.tolist(), seg.tolist(), shaped.tolist()))
            artifacts.append(name)
    io.dump_json(config.out_path("pulses.json"), report)
    return ["pulses.json"] + artifacts


def cmd_fit_pulse(config: RunConfig) -> list[str]:
    series_map = _load_series(config)
    eid = config.need("entity")
    if eid not in series_map:
        raise KeyError(f"entity '{eid}' not in series file")
    s = series_map[eid]
    i0 = s.index_of(_parse_date(config.need("start_date")))
    i1 = s.index_of(_parse_date(config.need("end_date")))
    seg = s.values[i0:i1 + 1]
    height, rise_days, residual = pulses.fit_pulse(seg)
    t = np.arange(1, seg.size + 1, dtype=float)
    io.dump_json(config.out_path("pulse_fit.json"), {
        "entity_id": eid,
        "start_date": s.date_at(i0).isoformat(),
        "end_date": s.date_at(i1).isoformat(),
        "height": height,
        "rise_days": rise_days,
        "residual": residual,
    })
    io.write_csv(config.out_path("pulse_fit.csv"), ["t", "observed", "fitted"],
                 zip(t.tolist(), seg.tolist(),
                     pulses.pulse_shape(height, rise_days, t).tolist()))
    return ["pulse_fit.json", "pulse_fit.csv"]


def cmd_train_hmm(config: RunConfig) -> list[str]:
    series_map = _load_series(config)
    params = config.pulse_params
    ids = sorted(series_map)

    def train(eid):
        try:
            model, _ = _train_entity(series_map[eid], params)
        except Exception as exc:
            raise type(exc)(f"entity '{eid}': {exc}") from exc
        return model

    models = _pmap(train, ids, config.threads)
    io.dump_json(config.out_path("hmm_models.json"),
                 {eid: m.to_dict() for eid, m in zip(ids, models)})
    return ["hmm_models.json"]


def cmd_simulate(config: RunConfig) -> list[str]:
    with open(config.need("model_json")) as fh:
        raw = json.load(fh)
    # accept either one model object or a mapping of entity -> model
    if "beta" in raw:
        model_map = {None: hmm.HmmModel.from_dict(raw)}
    else:
        model_map = {eid: hmm.HmmModel.from_dict(d) for eid, d in sorted(raw.items())}
    out_map = {}
    info = {}
    offset = 0
    for eid, model in model_map.items():
        for k in range(config.entities):
            seed = config.seed + offset
            offset += 1
            name = (f"sim-{seed}" if eid is None else
                    (eid if config.entities == 1 else f"{eid}-{k}"))
            sim_series, path = hmm.simulate(model, config.days, seed,
                                            entity_id=name)
            out_map[name] = sim_series
            info[name] = {
                "seed": seed,
                "peak_day_fraction": float(np.mean(path.states == hmm.PEAK)),
            }
    io.write_series_csv(config.out_path("simulated.csv"), out_map)
    io.dump_json(config.out_path("simulate_summary.json"),
                 {"days": config.days, "entities": info})
    return ["simulated.csv", "simulate_summary.json"]


def cmd_forecast_max(config: RunConfig) -> list[str]:
    series_map = _load_series(config)
    group = _load_group(config)
    params = config.pulse_params
    members = group.sorted_members()
    fits = {}
    models = {}
    for eid in members:
        if eid not in series_map:
            raise KeyError(f"group member '{eid}' missing from series file")
        s = series_map[eid]
        fits[eid] = fit_lognormal(
            1.0 + series.windowed_means(s.values, config.fame_window))
        models[eid], _ = _train_entity(s, params)
    prob_ln = forecast.max_fame_prob_lognormal(fits)
    prob_hmm = forecast.max_fame_prob_hmm(models)
    io.dump_json(config.out_path("max_fame_probs.json"), {
        "group": group.name,
        "fame_window": config.fame_window,
        "entities": {
            eid: {"prob_lognormal": prob_ln[eid], "prob_hmm": prob_hmm[eid]}
            for eid in members
        },
    })
    return ["max_fame_probs.json"]


def cmd_forecast_forward(config: RunConfig) -> list[str]:
    series_map = _load_series(config)
    model = forecast.fit_forward_fame(
        series_map, config.hist_lower, config.hist_upper,
        config.fame_window, config.peak_window, config.x_min)
    evaluations = []
    for threshold in config.thresholds:
        if threshold < model.tail.x_min:
            continue
        result = forecast.become_famous_prob(model, float(threshold))
        evaluations.append({
            "threshold": float(threshold),
            "probability": result.probability,
            "expected_count": result.expected_count,
        })
    io.dump_json(config.out_path("forward_model.json"),
                 {"model": model.to_dict(), "thresholds": evaluations})
    cohort = forecast.forward_fame_cohort(
        series_map, config.hist_lower, config.hist_upper,
        config.fame_window, config.peak_window)
    ccdf = forecast._counting_ccdf(cohort, cohort.size)
    _write_loglog_csv(config.out_path("forward_ccdf.csv"), ccdf, model.tail)
    return ["forward_model.json", "forward_ccdf.csv"]


def _write_loglog_csv(path, ccdf, tail):
    rows = []
    for x, p in zip(ccdf.xs, ccdf.probs):
        fitted = ""
        if x >= tail.x_min:
            fitted = tail.slope * np.log10(x) + tail.intercept
        rows.append((float(np.log10(x)), float(np.log10(p)), fitted))
    io.write_csv(path, ["log10_x", "log10_prob", "log10_fitted"], rows)


def cmd_forecast_ratio(config: RunConfig) -> list[str]:
    series_map = _load_series(config)
    group = _load_group(config)
    model = forecast.fit_ratio_model(
        series_map, group, config.ratio_kind, config.horizon_days,
        config.peak_window, config.historical_span, config.x_min)
    evaluations = [
        {"threshold": float(t),
         "probability": powerlaw_tail_prob(model.tail, float(t))}
        for t in config.thresholds if t >= model.tail.x_min
    ]
    io.dump_json(config.out_path("ratio_model.json"),
                 {"group": group.name, "model": model.to_dict(),
                  "thresholds": evaluations})
    ratios, _ = forecast._fame_ratios(
        series_map, group.members, config.ratio_kind, config.horizon_days,
        config.peak_window, config.historical_span)
    ccdf = forecast._counting_ccdf(ratios, ratios.size)
    _write_loglog_csv(config.out_path("ratio_ccdf.csv"), ccdf, model.tail)
    return ["ratio_model.json", "ratio_ccdf.csv"]


def cmd_backtest_max(config: RunConfig) -> list[str]:
    series_map = _load_series(config)
    group = _load_group(config)
    report = forecast.backtest_max_fame(
        series_map, group, _parse_date(config.need("split_date")),
        config.fame_window, config.pulse_params)
    io.dump_json(config.out_path("backtest_max.json"), {
        "group": group.name,
        "split_date": config.split_date,
        "fame_window": config.fame_window,
        "report": report.to_dict(),
    })
    config.out_path("backtest_max.txt").write_text(
        forecast.format_max_fame_table(report) + "\n")
    return ["backtest_max.json", "backtest_max.txt"]


def cmd_backtest_ratio(config: RunConfig) -> list[str]:
    series_map = _load_series(config)
    group = _load_group(config)
    model, rows = forecast.backtest_ratio_model(
        series_map, group, _parse_date(config.need("split_date")),
        config.thresholds, config.ratio_kind, config.horizon_days,
        config.peak_window, config.historical_span, config.x_min)
    io.dump_json(config.out_path("backtest_ratio.json"), {
        "group": group.name,
        "split_date": config.split_date,
        "model": model.to_dict(),
        "rows": [
            {"threshold": r.threshold, "empirical_count": r.empirical_count,
             "empirical_prob": r.empirical_prob, "model_count": r.model_count,
             "model_prob": r.model_prob}
            for r in rows
        ],
    })
    config.out_path("backtest_ratio.txt").write_text(
        forecast.format_ratio_backtest_table(model, rows) + "\n")
    return ["backtest_ratio.json", "backtest_ratio.txt"]


def cmd_report(config: RunConfig) -> list[str]:
    """End-to-end pipeline over one corpus: ingest, fame, distribution fits,
    pulses, HMM training, and forecasts/backtests when a group and split
    date are configured."""
    artifacts = []
    artifacts += cmd_ingest(config)
    artifacts += cmd_fame(config)
    artifacts += cmd_fit_dist(config)
    artifacts += cmd_detect_pulses(config)
    artifacts += cmd_train_hmm(config)
    if config.group_json is not None:
        artifacts += cmd_equivalence(config)
        artifacts += cmd_forecast_max(config)
        artifacts += cmd_forecast_ratio(config)
        if config.split_date is not None:
            artifacts += cmd_backtest_max(config)
            artifacts += cmd_backtest_ratio(config)
    io.dump_json(config.out_path("manifest.json"), {"artifacts": sorted(artifacts)})
    return artifacts + ["manifest.json"]


_HANDLERS = {
    "ingest": cmd_ingest,
    "fame": cmd_fame,
    "equivalence": cmd_equivalence,
    "fit-dist": cmd_fit_dist,
    "detect-pulses": cmd_detect_pulses,
    "fit-pulse": cmd_fit_pulse,
    "train-hmm": cmd_train_hmm,
    "simulate": cmd_simulate,
    "forecast-max": cmd_forecast_max,
    "forecast-forward": cmd_forecast_forward,
    "forecast-ratio": cmd_forecast_ratio,
    "backtest-max": cmd_backtest_max,
    "backtest-ratio": cmd_backtest_ratio,
    "report": cmd_report,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="newsfame",
        description="Model and forecast daily news-reference time series.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} step")
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--series", dest="series_csv",
                       help="series CSV (entity_id,date,frequency)")
        p.add_argument("--group", dest="group_json",
                       help="group JSON ({name, members})")
        p.add_argument("--out", dest="out_dir",
                       help="output directory (default $NEWSFAME_OUT or ./out)")
        p.add_argument("--k-sigma", dest="k_sigma", type=float,
                       help="pulse peak threshold in series standard deviations "
                            "(default 5)")
        p.add_argument("--group-distance", dest="group_distance", type=int,
                       help="days within which peaks merge (default 20)")
        p.add_argument("--ma-length", dest="ma_length", type=int,
                       help="moving-average days for pulse extension (default 10)")
        p.add_argument("--fame-window", dest="fame_window", type=int,
                       help="historical fame window in days (default 1)")
        p.add_argument("--peak-window", dest="peak_window", type=int,
                       help="peak/future fame window in days (default 5)")
        p.add_argument("--horizon-days", dest="horizon_days", type=int,
                       help="forecast horizon in days (default 365)")
        p.add_argument("--historical-span", dest="historical_span", type=int,
                       help="historical fame span in days (default 365)")
        p.add_argument("--x-min", dest="x_min", type=float,
                       help="power-law tail start (default 1.0)")
        p.add_argument("--seed", type=int, help="RNG seed (default 0)")
        p.add_argument("--threads", type=int,
                       help="worker threads for per-entity steps (default 1)")
        p.add_argument("--split-date", dest="split_date",
                       help="backtest split date (ISO)")
        p.add_argument("--thresholds",
                       help="comma-separated thresholds for tail evaluation")
        p.add_argument("--hist-lower", dest="hist_lower", type=float,
                       help="historical fame band lower bound (default 0)")
        p.add_argument("--hist-upper", dest="hist_upper", type=float,
                       help="historical fame band upper bound (default 20)")
        p.add_argument("--days", type=int, help="days to simulate (default 1000)")
        p.add_argument("--entities", type=int,
                       help="entities to simulate per model (default 1)")
        p.add_argument("--model-json", dest="model_json",
                       help="trained model JSON for simulate")
        p.add_argument("--entity", help="entity id for fit-pulse")
        p.add_argument("--start-date", dest="start_date",
                       help="segment start date for fit-pulse (ISO)")
        p.add_argument("--end-date", dest="end_date",
                       help="segment end date for fit-pulse (ISO)")
        p.add_argument("--truncate-at", dest="truncate_at", type=float,
                       help="left truncation point (log scale) for fit-dist")
        p.add_argument("--ratio-kind", dest="ratio_kind",
                       choices=forecast.RATIO_KINDS,
                       help="ratio numerator: next-period peak or average fame")
    return parser


def _merge_config(args: argparse.Namespace) -> RunConfig:
    merged = dict(_DEFAULTS)
    given = {k: v for k, v in vars(args).items()
             if k not in ("command", "config") and v is not None}
    if args.config is not None:
        with open(args.config) as fh:
            file_conf = json.load(fh)
        unknown = set(file_conf) - set(_DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_conf)
    merged.update(given)
    if isinstance(merged["thresholds"], str):
        merged["thresholds"] = [float(t) for t in merged["thresholds"].split(",")]
    return RunConfig(**{f.name: merged[f.name] for f in fields(RunConfig)})


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _merge_config(args)
        artifacts = _HANDLERS[args.command](config)
    except Exception as exc:
        error = {
            "error": type(exc).__name__,
            "message": str(exc),
            "context": {
                k: v for k, v in (("row", getattr(exc, "row", None)),
                                  ("best_params", getattr(exc, "best_params", None)))
                if v is not None
            },
        }
        print(json.dumps(error, sort_keys=True), file=sys.stderr)
        return 1
    print(json.dumps({"command": args.command, "artifacts": sorted(artifacts)},
                     sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
