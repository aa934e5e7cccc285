"""End-to-end driver: price ingestion, per-series sampling, distance audits
and market analytics, with every artifact checksummed in a run report."""

from __future__ import annotations

import csv
import dataclasses
import datetime as dt
import hashlib
import json
import logging
import math
import os
import re
import shutil
import tempfile
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .changepoint import PosteriorRecord, SamplerConfig, run_chain
from .errors import ConfigError, CpsimError, DataError, NonPositivePrice, ParseError, TooFewSeries, UnsortedDates
from .market_analytics import (
    PricePanel,
    correlation_histogram,
    correlation_matrix,
    log_returns,
    resolve_window,
    rolling_pca,
    rolling_trajectory_norm,
)
from .matrix_analysis import LINKAGES, distance_matrix, hierarchical_cluster, matrix_norm, triangle_test

log = logging.getLogger(__name__)

COMMANDS = ("detect", "distances", "audit", "market", "all")
EMPTY_SET_POLICIES = ("exclude", "error")
REPORT_NAME = "run_report.json"


class PriceGapWarning(UserWarning):
    pass


class DroppedTickerWarning(UserWarning):
    pass


class ExcludedSeriesWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class NamedWindow:
    name: str
    start: dt.date
    end: dt.date

    @classmethod
    def parse(cls, text: str) -> "NamedWindow":
        """Parse ``NAME=YYYY-MM-DD..YYYY-MM-DD``."""
        m = re.fullmatch(r"\s*([A-Za-z0-9_\-]+)\s*=\s*(\S+?)\s*\.\.\s*(\S+)\s*", text)
        if not m:
            raise ConfigError(f"window must look like NAME=START..END, got {text!r}")
        return cls.from_parts(m.group(1), m.group(2), m.group(3))

    @classmethod
    def from_parts(cls, name, start, end) -> "NamedWindow":
        try:
            a = start if isinstance(start, dt.date) else dt.date.fromisoformat(str(start))
            b = end if isinstance(end, dt.date) else dt.date.fromisoformat(str(end))
        except ValueError as exc:
            raise ConfigError(f"window {name!r}: {exc}") from None
        if b < a:
            raise ConfigError(f"window {name!r} ends before it starts")
        return cls(str(name), a, b)

    def to_record(self) -> dict:
        return {"name": self.name, "start": self.start.isoformat(), "end": self.end.isoformat()}


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one run needs.

    ``sampler.seed`` is ignored; each series gets a stream derived from
    ``seed`` and its position in the panel.
    """

    input: str | None = None
    out: str = "out"
    seed: int = 0
    p: float = 1.0
    q: float = 1.0
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    windows: tuple = ()
    linkage: str = "average"
    empty_set_policy: str = "exclude"
    pca_window: int = 45
    top_k: int = 10
    histogram_bins: int = 20
    norm_window: int = 45
    jobs: int = 1

    def __post_init__(self):
        if not self.p > 0:
            raise ConfigError(f"p must be positive, got {self.p}")
        if not self.q >= 1:
            raise ConfigError(f"q must be at least 1, got {self.q}")
        if self.linkage not in LINKAGES:
            raise ConfigError(f"linkage must be one of {LINKAGES}, got {self.linkage!r}")
        if self.empty_set_policy not in EMPTY_SET_POLICIES:
            raise ConfigError(f"empty-set policy must be one of {EMPTY_SET_POLICIES}")
        if not 0 <= self.seed < 2**63:
            raise ConfigError("seed must be a nonnegative 63-bit integer")
        for name in ("pca_window", "top_k", "histogram_bins", "norm_window", "jobs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        names = [w.name for w in self.windows]
        if len(set(names)) != len(names):
            raise ConfigError("window names must be unique")

    def validate_files(self) -> None:
        if self.input is None:
            raise ConfigError("no input file given")
        if not Path(self.input).is_file():
            raise ConfigError(f"input file {self.input!r} does not exist")

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_mapping(cls, data: dict) -> "PipelineConfig":
        data = dict(data or {})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "sampler" in data:
            sc = dict(data["sampler"] or {})
            bad = set(sc) - {f.name for f in dataclasses.fields(SamplerConfig)}
            if bad:
                raise ConfigError(f"unknown sampler keys: {sorted(bad)}")
            data["sampler"] = SamplerConfig(**sc)
        if "windows" in data:
            data["windows"] = tuple(_window_from_config(w) for w in _window_items(data["windows"]))
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_record(self) -> dict:
        rec = dataclasses.asdict(self)
        rec["windows"] = [w.to_record() for w in self.windows]
        return rec


def _window_items(spec):
    if isinstance(spec, dict):
        return [dict(name=k, **v) if isinstance(v, dict) else f"{k}={v}" for k, v in spec.items()]
    if isinstance(spec, (list, tuple)):
        return list(spec)
    raise ConfigError("windows must be a list or a mapping")


def _window_from_config(item) -> NamedWindow:
    if isinstance(item, NamedWindow):
        return item
    if isinstance(item, str):
        return NamedWindow.parse(item)
    if isinstance(item, dict) and {"name", "start", "end"} <= set(item):
        return NamedWindow.from_parts(item["name"], item["start"], item["end"])
    raise ConfigError(f"cannot read window {item!r}")


def load_config(path) -> PipelineConfig:
    """Read a YAML or JSON config file (JSON is valid YAML)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML/JSON: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    return PipelineConfig.from_mapping(data or {})


# ---------------------------------------------------------------------------
# ingestion


@dataclass(frozen=True)
class Ingest:
    panel: PricePanel
    dropped: tuple
    filled: int


def read_price_csv(path) -> Ingest:
    """Parse a wide price file and apply the missing-data policy.

    Gaps are forward-filled; a ticker whose first price is missing cannot be
    filled and is dropped.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty price file", row=1)
    header = [h.strip() for h in rows[0]]
    if len(header) < 2:
        raise ParseError("need a date column and at least one ticker column", row=1)
    tickers = header[1:]
    if len(set(tickers)) != len(tickers) or any(not t for t in tickers):
        raise ParseError("ticker names must be nonempty and unique", row=1)
    dates, values = [], []
    for r, row in enumerate(rows[1:], start=2):
        if not any(c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(row)}", row=r)
        try:
            d = dt.date.fromisoformat(row[0].strip())
        except ValueError:
            raise ParseError(f"not an ISO date: {row[0]!r}", row=r, column=header[0]) from None
        if dates and d <= dates[-1]:
            raise UnsortedDates(f"date {d} at row {r} does not follow {dates[-1]}")
        vals = []
        for c, cell in enumerate(row[1:]):
            cell = cell.strip()
            if cell == "" or cell.lower() in ("na", "nan", "null"):
                vals.append(math.nan)
                continue
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"not a number: {cell!r}", row=r, column=tickers[c]) from None
            if not math.isfinite(v):
                raise ParseError(f"not a finite number: {cell!r}", row=r, column=tickers[c])
            if v <= 0:
                raise NonPositivePrice(f"price {v} at row {r}, column {tickers[c]!r} is not positive")
            vals.append(v)
        dates.append(d)
        values.append(vals)
    if len(dates) < 2:
        raise DataError("price file needs at least two dates")
    P = np.array(values, dtype=np.float64).T
    keep = ~np.isnan(P[:, 0])
    dropped = tuple(t for t, k in zip(tickers, keep) if not k)
    for t in dropped:
        warnings.warn(f"ticker {t!r} has no first price and was dropped", DroppedTickerWarning, stacklevel=2)
    P = P[keep]
    tickers = [t for t, k in zip(tickers, keep) if k]
    if not tickers:
        raise DataError("every ticker was dropped for missing its first price")
    filled = int(np.isnan(P).sum())
    if filled:
        for i in range(P.shape[0]):
            row = P[i]
            idx = np.where(np.isnan(row), 0, np.arange(row.size))
            np.maximum.accumulate(idx, out=idx)
            P[i] = row[idx]
        warnings.warn(f"forward-filled {filled} missing prices", PriceGapWarning, stacklevel=2)
    return Ingest(PricePanel(tuple(tickers), tuple(dates), P), dropped, filled)


def load_price_csv(path) -> PricePanel:
    return read_price_csv(path).panel


def write_price_csv(panel: PricePanel, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *panel.tickers])
        for t, d in enumerate(panel.dates):
            w.writerow([d.isoformat(), *(repr(float(v)) for v in panel.prices[:, t])])


# ---------------------------------------------------------------------------
# run


def series_seed(seed: int, index: int) -> int:
    """Seed of series ``index``, derived from the run seed only."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint64)[0])


def _safe_name(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.\-]", "_", label)


def _sample_one(args):
    ticker, x, sampler = args
    try:
        return PosteriorRecord.from_posterior(ticker, run_chain(x, sampler))
    except CpsimError as exc:
        _add_context(exc, f"series {ticker!r}")
        raise


def _add_context(exc: Exception, ctx: str) -> None:
    if exc.args:
        exc.args = (f"{ctx}: {exc.args[0]}",) + exc.args[1:]
    else:
        exc.args = (ctx,)


class _Writer:
    """Collects artifacts in a staging directory and records their checksums."""

    def __init__(self, root: Path):
        self.root = root
        self.files: dict[str, str] = {}

    def text(self, rel: str, content: str) -> None:
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        data = content.encode("utf-8")
        path.write_bytes(data)
        self.files[rel] = hashlib.sha256(data).hexdigest()

    def json(self, rel: str, obj) -> None:
        self.text(rel, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _series_csv(header: str, keys, values) -> str:
    lines = [header]
    lines += [f"{k},{float(v)!r}" for k, v in zip(keys, values)]
    return "\n".join(lines) + "\n"


def _detect(cfg, ingest, writer, report):
    panel = ingest.panel
    R = log_returns(panel)
    jobs = [
        (t, R.returns[i], dataclasses.replace(cfg.sampler, seed=series_seed(cfg.seed, i)))
        for i, t in enumerate(panel.tickers)
    ]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            records = list(ex.map(_sample_one, jobs))
    else:
        records = [_sample_one(j) for j in jobs]
    names = set()
    for rec in records:
        name = _safe_name(rec.series_id)
        if name in names:
            raise DataError(f"tickers collide after file-name sanitizing: {rec.series_id!r}")
        names.add(name)
        writer.text(f"posteriors/{name}.json", rec.to_json())
    report["series"] = [
        {"series_id": r.series_id, "modal_m": r.modal_m, "n_changepoints": len(r.changepoints.members)}
        for r in records
    ]
    return records, R.length


def _audit(cfg, records, n, writer, report, full: bool):
    kept, excluded = [], []
    for rec in records:
        if rec.changepoints.is_empty:
            if cfg.empty_set_policy == "error":
                raise DataError(f"series {rec.series_id!r} has no change points (modal m = 1)")
            excluded.append(rec.series_id)
            warnings.warn(
                f"series {rec.series_id!r} has no change points and was left out of the distance matrix",
                ExcludedSeriesWarning,
                stacklevel=2,
            )
        else:
            kept.append(rec)
    report["excluded_series"] = excluded
    if len(kept) < 2:
        raise TooFewSeries(f"only {len(kept)} series have change points; a distance matrix needs two")
    D = distance_matrix(
        [r.changepoints for r in kept], n, cfg.p, cfg.q, labels=[r.series_id for r in kept]
    )
    writer.text("distance_matrix.csv", D.to_csv())
    if not full:
        return
    if D.n >= 3:
        tri = triangle_test(D)
        writer.text("triangle_test.json", tri.to_json())
        fail_pct, avg_fail = 100.0 * tri.fail_fraction, tri.mean_fail_ratio
    else:
        writer.json("triangle_test.json", {"skipped": "fewer than three series", "n_triples": 0})
        fail_pct, avg_fail = None, None
    writer.json(
        "matrix_norms.json",
        {
            "n_series": D.n,
            "p": cfg.p,
            "q": cfg.q,
            "l1": matrix_norm(D, "l1"),
            "l2": matrix_norm(D, "l2"),
            "operator": matrix_norm(D, "operator"),
            "fail_percent": fail_pct,
            "average_fail": avg_fail,
        },
    )
    writer.text("dendrogram.csv", hierarchical_cluster(D, cfg.linkage).to_csv())


def _market(cfg, ingest, writer, report):
    panel = ingest.panel
    R = log_returns(panel)
    spec = rolling_pca(R, window=cfg.pca_window, top_k=cfg.top_k)
    writer.text("market/pca_spectrum.csv", spec.to_csv([d.isoformat() for d in R.dates]))
    norms = rolling_trajectory_norm(panel, window=cfg.norm_window)
    writer.text(
        "market/trajectory_norm.csv",
        _series_csv("date,value", [d.isoformat() for d in panel.dates[: norms.size]], norms),
    )
    resolved = {}
    for w in cfg.windows:
        ws = resolve_window(R.dates, w.start, w.end)
        rho = correlation_matrix(R, ws)
        writer.text(f"market/histogram_{_safe_name(w.name)}.csv", correlation_histogram(rho, cfg.histogram_bins).to_csv())
        resolved[w.name] = {"start": R.dates[ws.start].isoformat(), "end": R.dates[ws.end].isoformat()}
    report["windows"] = resolved
    report["negative_eigenvalues"] = len(spec.negative_eigenvalues)


def run_pipeline(config: PipelineConfig, command: str = "all") -> dict:
    """Run ``command`` and write its artifacts under ``config.out``.

    Files are built in a staging directory and moved into place only after
    every step succeeded, so a failing run leaves no partial output behind.
    Returns the run report, which is also written as ``run_report.json``.
    """
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    config.validate_files()
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=out))
    writer = _Writer(staging)
    report = {"command": command, "config": config.to_record()}
    report["config"]["out"] = None  # location does not affect results
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            ingest = read_price_csv(config.input)
            panel = ingest.panel
            report["tickers"] = list(panel.tickers)
            report["dropped_tickers"] = list(ingest.dropped)
            report["filled_prices"] = ingest.filled
            if command in ("detect", "distances", "audit", "all"):
                records, n = _detect(config, ingest, writer, report)
                if command != "detect":
                    _audit(config, records, n, writer, report, full=command in ("audit", "all"))
            if command == "market" or (command == "all" and config.windows):
                _market(config, ingest, writer, report)
        report["warnings"] = sorted({str(w.message) for w in caught})
        for w in caught:
            log.warning("%s", w.message)
        report["files"] = [{"path": k, "sha256": v} for k, v in sorted(writer.files.items())]
        writer.json(REPORT_NAME, report)
        for rel in sorted(writer.files):
            dest = out / rel
            dest.parent.mkdir(parents=True, exist_ok=True)
            os.replace(staging / rel, dest)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    return report


def verify_report(out) -> bool:
    """True when every file listed in the run report exists with its checksum."""
    out = Path(out)
    report = json.loads((out / REPORT_NAME).read_text())
    return all(sha256_file(out / f["path"]) == f["sha256"] for f in report["files"])
