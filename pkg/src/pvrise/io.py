"""Persistence: per-site CSV meter data, JSON feeder config, text reports and plot data."""
from __future__ import annotations

import datetime as _dt
import json
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ConfigError, DatasetParseError, DatasetValidationError
from .model import MINUTES_PER_DAY, SAMPLE_COLUMNS, Dataset, FeederConfig, SiteStream

CSV_COLUMNS = ("date", "minute") + SAMPLE_COLUMNS
CONFIG_FILENAME = "feeder.json"
FLOAT_FORMAT = "%.6f"
MAX_REPORTED_REJECTS = 20


def load_config(path) -> FeederConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("", f"cannot read config {path}: {exc.strerror or exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return FeederConfig.from_dict(data)


def save_config(config: FeederConfig, path):
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n")


def _stream_frame(stream: SiteStream) -> pd.DataFrame:
    order = np.lexsort((stream.minute, stream.day))
    dates = (np.datetime64(stream.start_date, "D") + stream.day[order]).astype(str)
    frame = pd.DataFrame({"date": dates, "minute": stream.minute[order].astype(int)})
    for col in SAMPLE_COLUMNS:
        frame[col] = getattr(stream, col)[order]
    return frame


def write_dataset(dataset: Dataset, directory) -> list:
    """Write ``<site_id>.csv`` per site plus the feeder config echo. Returns the paths."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for sid in dataset.site_ids:
        path = out / f"{sid}.csv"
        frame = _stream_frame(dataset[sid])
        try:
            frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        except OSError as exc:
            raise OSError(f"{path}: {exc}") from exc
        written.append(path)
    cfg_path = out / CONFIG_FILENAME
    save_config(dataset.config, cfg_path)
    written.append(cfg_path)
    return written


def _read_site_csv(path: Path):
    try:
        with path.open() as fh:
            header = fh.readline().rstrip("\r\n").split(",")
    except OSError as exc:
        raise DatasetParseError(path, None, f"cannot open: {exc.strerror or exc}") from None
    if tuple(header) != CSV_COLUMNS:
        missing = [c for c in CSV_COLUMNS if c not in header]
        reason = f"missing column {missing[0]}" if missing else "unexpected header"
        raise DatasetParseError(path, 1, f"{reason}; expected {','.join(CSV_COLUMNS)}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.ParserError as exc:
        raise DatasetParseError(path, None, f"malformed row: {exc}") from None
    parsed = {}
    for col in CSV_COLUMNS:
        raw = frame[col]
        if col == "date":
            vals = pd.to_datetime(raw, format="%Y-%m-%d", errors="coerce")
        else:
            vals = pd.to_numeric(raw, errors="coerce")
        bad = np.flatnonzero(vals.isna().to_numpy())
        if bad.size:
            row = int(bad[0])
            raise DatasetParseError(path, row + 2, f"cannot parse {col}={raw.iloc[row]!r}")
        parsed[col] = vals
    minute = parsed["minute"].to_numpy()
    bad = np.flatnonzero((minute != np.round(minute)) | (minute < 0) | (minute >= MINUTES_PER_DAY))
    if bad.size:
        raise DatasetParseError(path, int(bad[0]) + 2, f"minute out of range: {minute[bad[0]]}")
    dates = parsed["date"].to_numpy().astype("datetime64[D]")
    columns = {c: parsed[c].to_numpy(dtype=float) for c in SAMPLE_COLUMNS}
    return dates, minute.astype(int), columns


def read_dataset(directory, validate: bool = True) -> Dataset:
    """Load a dataset written by :func:`write_dataset`.

    With ``validate`` every row is checked against the meter-sample
    invariants and all offenders are reported together.
    """
    root = Path(directory)
    cfg_path = root / CONFIG_FILENAME
    if not cfg_path.exists():
        raise DatasetParseError(cfg_path, None, "missing feeder config")
    config = load_config(cfg_path)
    raw = {}
    for spec in config.sites:
        path = root / f"{spec.site_id}.csv"
        if path.exists():
            raw[spec.site_id] = (path, *_read_site_csv(path))
    if not raw:
        raise DatasetParseError(root, None, "no site CSV files found")
    nonempty = [d.min() for _, d, _, _ in raw.values() if len(d)]
    start = min(nonempty) if nonempty else np.datetime64(config.start_date, "D")
    streams, rejects, count = {}, [], 0
    for sid, (path, dates, minute, cols) in raw.items():
        day = (dates - start).astype(int)
        order = np.lexsort((minute, day))
        stream = SiteStream(
            sid,
            _dt.date.fromisoformat(str(start)),
            day[order],
            minute[order],
            *(cols[c][order] for c in SAMPLE_COLUMNS),
        )
        if validate:
            reasons = stream.violations(config.site(sid))
            bad = np.flatnonzero(reasons != "")
            count += bad.size
            # report file line numbers, i.e. positions before sorting
            for k in bad[:MAX_REPORTED_REJECTS]:
                rejects.append((str(path), int(order[k]) + 2, reasons[k]))
        streams[sid] = stream
    if count:
        raise DatasetValidationError(count, rejects)
    return Dataset(config, streams)


def _fmt_row(label, cells, label_width, cell_width=10):
    return label.ljust(label_width) + "".join(c.rjust(cell_width) for c in cells) + "\n"


def _table(title, rows, columns):
    label_width = max(len(r[0]) for r in rows) + 2
    text = title + "\n"
    text += _fmt_row("Capacity (KW)", [f"{c.capacity_kw:.2f}" for c in columns], label_width)
    for label, fn in rows:
        text += _fmt_row(label, [fn(c) for c in columns], label_width)
    return text


def _num(value, digits):
    return "n/a" if value is None else f"{value:.{digits}f}"


def report_column_order(results) -> list:
    """Columns run from the highest-impedance site outwards, ties broken by site id."""
    return sorted(results, key=lambda r: (-r.impedance_ohm, r.site_id))


def _write_xy(path: Path, xs, ys):
    with path.open("w") as fh:
        for x, y in zip(xs, ys):
            fh.write(f"{x:.10g} {y:.10g}\n")


def write_report(results, directory) -> list:
    """Write the four summary tables and per-site plot-data files.

    ``results`` is the list returned by :func:`pvrise.analysis.analyze_dataset`.
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    cols = report_column_order(results)

    def stat(attr, field):
        return lambda r: _num(getattr(getattr(r, attr), field) if getattr(r, attr) else None, 4)

    tables = {
        "table1_profile.txt": _table(
            "Impedance (OHM) and average daily energy per system capacity (SC)",
            [
                ("Impedance (OHM)", lambda r: f"{r.impedance_ohm:.3f}"),
                ("Average daily energy/SC", lambda r: _num(r.energy_per_capacity, 2)),
            ],
            cols,
        ),
        "table2_daily_beta.txt": _table(
            "Daily statistics of beta",
            [(name.capitalize() if name != "std" else "STD", stat("daily_summary", name))
             for name in ("minimum", "average", "std")] + [("MAP", stat("daily_summary", "map"))],
            cols,
        ),
        "table3_hourly_beta.txt": _table(
            "Hourly statistics of beta",
            [(name.capitalize() if name != "std" else "STD", stat("hourly_summary", name))
             for name in ("minimum", "average", "std")] + [("MAP", stat("hourly_summary", "map"))],
            cols,
        ),
        "table4_entropy.txt": _table(
            "Entropy of beta (bits)",
            [
                ("Daily entropy", lambda r: _num(r.daily_entropy, 2)),
                ("Hourly entropy", lambda r: _num(r.hourly_entropy, 2)),
            ],
            cols,
        ),
    }
    written = []
    for name, text in tables.items():
        path = out / name
        path.write_text(text)
        written.append(path)
    for r in cols:
        plots = {
            f"beta_daily_{r.site_id}.dat": (r.daily.labels, r.daily.betas),
            f"beta_hourly_{r.site_id}.dat": (r.hourly.labels, r.hourly.betas),
            f"density_daily_{r.site_id}.dat": (
                (r.daily_density.grid, r.daily_density.values) if r.daily_density else ((), ())
            ),
            f"density_hourly_{r.site_id}.dat": (
                (r.hourly_density.grid, r.hourly_density.values) if r.hourly_density else ((), ())
            ),
        }
        for name, (xs, ys) in plots.items():
            path = out / name
            _write_xy(path, xs, ys)
            written.append(path)
    return written


def results_to_dict(results, irradiance_slope=None) -> dict:
    def fit(f):
        return None if f is None else {
            "beta_pu_per_kw": f.beta_pu_per_kw,
            "intercept_pu": f.intercept_pu,
            "n_samples": f.n_samples,
            "residual_std_pu": f.residual_std_pu,
            "explained_variance": f.explained_variance,
        }

    def summary(s):
        return None if s is None else {"minimum": s.minimum, "average": s.average, "std": s.std, "map": s.map}

    sites = []
    for r in results:
        sites.append({
            "site_id": r.site_id,
            "capacity_kw": r.capacity_kw,
            "impedance_ohm": r.impedance_ohm,
            "overall_fit": fit(r.overall),
            "daily_days": len(r.daily),
            "hourly_minutes": len(r.hourly),
            "daily_summary": summary(r.daily_summary),
            "hourly_summary": summary(r.hourly_summary),
            "daily_entropy_bits": r.daily_entropy,
            "hourly_entropy_bits": r.hourly_entropy,
            "energy_per_capacity_kwh_per_kw": r.energy_per_capacity,
        })
    return {"irradiance_slope": irradiance_slope, "sites": sites}


def write_results_json(results, directory, irradiance_slope=None) -> Path:
    path = Path(directory) / "results.json"
    path.write_text(json.dumps(results_to_dict(results, irradiance_slope), indent=2, sort_keys=True) + "\n")
    return path
