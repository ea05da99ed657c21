"""Command line interface.

Subcommands cover the full pipeline: ``copulas`` writes per-window
copula grids, ``detect`` writes the indicator series with classified
periods and a timeline plot, ``cluster`` groups windows by market
state, ``fit`` trains the corner regression model and ``predict``
reconstructs grids and the indicator from corners alone.

Options resolve as defaults < config file < command line. A config file
holds ``key = value`` lines using the long option names. Every command
writes a ``manifest.json`` with the resolved parameters and a sha256
per artifact; a failed run removes whatever it had written.
"""

import argparse
import hashlib
import json
import os
import shutil
import sys
from pathlib import Path

import numpy as np

from . import clustering, regression, report, transport
from .copula import load_copula_csv, save_copula_csv
from .data import load_returns_csv, prices_to_returns
from .indicator import (
    IndicatorSeries,
    classify_periods,
    indicator,
    indicator_series,
    window_grids,
)

DEFAULTS = {
    "kind": "returns",
    "seed": 0,
    "window": 60,
    "grid": 10,
    "samples": 500_000,
    "band": 0.10,
    "binning": "rank",
    "workers": max(1, os.cpu_count() or 1),
    "k": 6,
    "stride": 1,
    "method": "emd-spectral",
    "corner": "lower-left",
    "side": 3,
    "corner_size": 3,
}

_INT_KEYS = {
    "seed",
    "window",
    "grid",
    "samples",
    "workers",
    "k",
    "stride",
    "side",
    "corner_size",
}
_FLOAT_KEYS = {"band"}


class CliError(Exception):
    pass


def _parse_config(path) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise CliError(f"{path}: line {lineno}: expected key = value")
            key = key.strip().replace("-", "_")
            val = val.strip()
            if key not in DEFAULTS:
                raise CliError(f"{path}: line {lineno}: unknown option {key!r}")
            try:
                if key in _INT_KEYS:
                    out[key] = int(val)
                elif key in _FLOAT_KEYS:
                    out[key] = float(val)
                else:
                    out[key] = val
            except ValueError:
                raise CliError(
                    f"{path}: line {lineno}: bad value {val!r} for {key!r}"
                ) from None
    return out


def _resolve(args) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(_parse_config(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    _validate(cfg)
    return cfg


def _validate(cfg):
    if cfg["window"] < 2:
        raise CliError("window must be at least 2")
    if cfg["grid"] < 2:
        raise CliError("grid must be at least 2")
    if cfg["samples"] < cfg["grid"] ** 2:
        raise CliError("samples must be at least grid^2")
    if not 0.0 <= cfg["band"] < 0.5:
        raise CliError("band must lie in [0, 0.5)")
    if cfg["binning"] not in ("rank", "threshold"):
        raise CliError("binning must be 'rank' or 'threshold'")
    if cfg["kind"] not in ("returns", "prices"):
        raise CliError("kind must be 'returns' or 'prices'")
    if cfg["method"] not in ("emd-spectral", "corner-kmedoids"):
        raise CliError("method must be 'emd-spectral' or 'corner-kmedoids'")
    if cfg["corner"] not in (
        "lower-left",
        "lower-right",
        "upper-left",
        "upper-right",
    ):
        raise CliError(f"unknown corner {cfg['corner']!r}")
    for key in ("workers", "k", "stride", "side", "corner_size"):
        if cfg[key] < 1:
            raise CliError(f"{key} must be positive")


def _load_table(args, cfg):
    if not args.input:
        raise CliError("--input is required")
    table = load_returns_csv(args.input)
    if cfg["kind"] == "prices":
        table = prices_to_returns(table)
    return table


def _progress(label: str, quiet: bool):
    if quiet:
        return None

    def cb(done, total):
        step = max(1, total // 20)
        if done % step == 0 or done == total:
            print(f"{label}: {done}/{total}", file=sys.stderr, flush=True)

    return cb


class _Outputs:
    """Tracks written artifacts so a failed run can clean up after itself.

    If the run created the output directory, a failure removes the whole
    directory; otherwise only the files written by this run are removed.
    """

    def __init__(self, outdir):
        self.dir = Path(outdir)
        self.created_dir = not self.dir.exists()
        self.dir.mkdir(parents=True, exist_ok=True)
        self.written = []

    def path(self, name: str) -> Path:
        p = self.dir / name
        self.written.append(p)
        return p

    def discard(self):
        if self.created_dir:
            shutil.rmtree(self.dir, ignore_errors=True)
            return
        for p in self.written:
            try:
                p.unlink()
            except FileNotFoundError:
                pass

    def write_manifest(self, command: str, cfg: dict):
        artifacts = {}
        for p in self.written:
            artifacts[p.name] = hashlib.sha256(p.read_bytes()).hexdigest()
        params = {k: cfg[k] for k in sorted(cfg)}
        canon = json.dumps(params, sort_keys=True).encode()
        payload = {
            "command": command,
            "parameters": params,
            "config_hash": hashlib.sha256(canon).hexdigest(),
            "seed": cfg["seed"],
            "artifacts": artifacts,
        }
        with open(self.dir / "manifest.json", "w", newline="") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _load_copula_dir(path, stride: int):
    d = Path(path)
    files = sorted(d.glob("copula_*.csv"))
    if not files:
        raise CliError(f"no copula_*.csv files in {path}")
    grids = [load_copula_csv(f) for f in files]
    return grids[::stride]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_copulas(args) -> None:
    cfg = _resolve(args)
    table = _load_table(args, cfg)
    grids = window_grids(
        table,
        k=cfg["window"],
        m=cfg["grid"],
        samples=cfg["samples"],
        seed=cfg["seed"],
        binning=cfg["binning"],
        workers=cfg["workers"],
        progress=_progress("copulas", args.quiet),
    )
    out = _Outputs(args.out)
    try:
        for g in grids:
            save_copula_csv(g, out.path(f"copula_{g.window_end.isoformat()}.csv"))
        out.write_manifest("copulas", cfg)
    except BaseException:
        out.discard()
        raise


def _cmd_detect(args) -> None:
    cfg = _resolve(args)
    table = _load_table(args, cfg)
    series = indicator_series(
        table,
        k=cfg["window"],
        m=cfg["grid"],
        samples=cfg["samples"],
        band_fraction=cfg["band"],
        seed=cfg["seed"],
        binning=cfg["binning"],
        workers=cfg["workers"],
        progress=_progress("detect", args.quiet),
    )
    periods = classify_periods(series)
    out = _Outputs(args.out)
    try:
        report.save_indicator_csv(series, out.path("indicator.csv"))
        report.save_periods_json(periods, out.path("periods.json"))
        out.path("timeline.svg").write_text(
            report.timeline_svg(series, periods), newline=""
        )
        out.write_manifest("detect", cfg)
    except BaseException:
        out.discard()
        raise


def _cmd_cluster(args) -> None:
    cfg = _resolve(args)
    if not args.copulas:
        raise CliError("--copulas directory is required")
    grids = _load_copula_dir(args.copulas, cfg["stride"])
    if len(grids) < cfg["k"]:
        raise CliError(f"need at least {cfg['k']} grids, got {len(grids)}")
    method = cfg["method"]
    if method == "emd-spectral":
        dist = transport.distance_matrix(
            grids,
            workers=cfg["workers"],
            progress=_progress("emd", args.quiet),
        )
        assignment = clustering.spectral_clusters(
            clustering.affinity(dist), cfg["k"], seed=cfg["seed"]
        )
    else:
        feats = clustering.corner_feature_matrix(grids, cfg["corner_size"])
        dist = clustering.feature_distance_matrix(feats)
        assignment = clustering.kmedoids(
            dist, cfg["k"], seed=cfg["seed"], is_distance=True
        )
    dates = [g.window_end for g in grids]
    values = [indicator(g, cfg["band"]) for g in grids]
    out = _Outputs(args.out)
    try:
        report.save_distance_csv(dist, out.path(f"distances_{method}.csv"))
        report.save_labels_csv(dates, assignment, out.path(f"labels_{method}.csv"))
        out.path(f"clusters_{method}.svg").write_text(
            report.cluster_svg(dates, values, assignment), newline=""
        )
        out.write_manifest("cluster", cfg)
    except BaseException:
        out.discard()
        raise


def _cmd_fit(args) -> None:
    cfg = _resolve(args)
    if not args.copulas:
        raise CliError("--copulas directory is required")
    grids = _load_copula_dir(args.copulas, cfg["stride"])
    spec = regression.CornerSpec(
        m=grids[0].m, corner=cfg["corner"], side=cfg["side"]
    )
    model = regression.fit_copula_model(
        grids,
        spec,
        window_k=cfg["window"],
        workers=cfg["workers"],
        dataset=Path(args.copulas).name,
        progress=_progress("fit", args.quiet),
    )
    out = _Outputs(args.out)
    try:
        regression.save_model(model, out.path("model.txt"))
        out.write_manifest("fit", cfg)
    except BaseException:
        out.discard()
        raise


def _cmd_predict(args) -> None:
    cfg = _resolve(args)
    if not args.model:
        raise CliError("--model is required")
    model = regression.load_model(args.model)
    if getattr(args, "corner", None) and args.corner != model.spec.corner:
        raise CliError(
            f"model was fitted on the {model.spec.corner} corner, "
            f"not {args.corner}"
        )
    if getattr(args, "side", None) and args.side != model.spec.side:
        raise CliError(
            f"model uses side {model.spec.side}, not {args.side}"
        )
    if cfg["grid"] != model.spec.m:
        raise CliError(
            f"model grid resolution is {model.spec.m}, got --grid {cfg['grid']}"
        )
    table = _load_table(args, cfg)
    est = regression.estimate_for_table(
        model,
        table,
        samples=cfg["samples"],
        seed=cfg["seed"],
        binning=cfg["binning"],
        workers=cfg["workers"],
        progress=_progress("predict", args.quiet),
    )
    values = np.array([indicator(g, cfg["band"]) for g in est])
    series = IndicatorSeries(dates=[g.window_end for g in est], values=values)
    periods = classify_periods(series)
    out = _Outputs(args.out)
    try:
        for g in est:
            save_copula_csv(
                g, out.path(f"estimated_copula_{g.window_end.isoformat()}.csv")
            )
        report.save_indicator_csv(series, out.path("estimated_indicator.csv"))
        report.save_periods_json(periods, out.path("estimated_periods.json"))
        out.path("estimated_timeline.svg").write_text(
            report.timeline_svg(series, periods, title="estimated shock indicator"),
            newline="",
        )
        out.write_manifest("predict", cfg)
    except BaseException:
        out.discard()
        raise


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, *, needs_input: bool):
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="key = value options file")
    p.add_argument("--quiet", action="store_true", help="suppress progress output")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    if needs_input:
        p.add_argument("--input", help="market CSV (date column plus one per asset)")
        p.add_argument("--kind", choices=("returns", "prices"))
        p.add_argument("--window", type=int, help="rolling window length in days")
        p.add_argument("--samples", type=int, help="Monte Carlo portfolios per window")
        p.add_argument("--binning", choices=("rank", "threshold"))
    p.add_argument("--grid", type=int, help="copula grid resolution m")
    p.add_argument("--band", type=float, help="diagonal band fraction")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="copulashock",
        description="copula-based shock detection for asset markets",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("copulas", help="write per-window copula grids")
    _add_common(p, needs_input=True)
    p.set_defaults(func=_cmd_copulas)

    p = sub.add_parser("detect", help="indicator series, periods and timeline")
    _add_common(p, needs_input=True)
    p.set_defaults(func=_cmd_detect)

    corners = ("lower-left", "lower-right", "upper-left", "upper-right")

    p = sub.add_parser("cluster", help="group windows by market state")
    _add_common(p, needs_input=False)
    p.add_argument("--copulas", help="directory of copula_*.csv files")
    p.add_argument("--method", choices=("emd-spectral", "corner-kmedoids"))
    p.add_argument("--k", type=int, help="number of clusters")
    p.add_argument("--stride", type=int, help="keep every n-th grid")
    p.add_argument("--corner-size", dest="corner_size", type=int)
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("fit", help="fit the corner regression model")
    _add_common(p, needs_input=False)
    p.add_argument("--copulas", help="directory of copula_*.csv files")
    p.add_argument("--corner", choices=corners)
    p.add_argument("--side", type=int, help="corner block side length")
    p.add_argument("--stride", type=int, help="keep every n-th grid")
    p.add_argument("--window", type=int, help="window length recorded in the model")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("predict", help="reconstruct grids and indicator from corners")
    _add_common(p, needs_input=True)
    p.add_argument("--model", help="fitted model file")
    p.add_argument("--corner", choices=corners, help="must match the model")
    p.add_argument("--side", type=int, help="must match the model")
    p.set_defaults(func=_cmd_predict)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (CliError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
