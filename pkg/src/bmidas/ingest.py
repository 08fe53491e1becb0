"""CSV ingestion and serialization of mixed-frequency panels.

Two files: a low-frequency one (date column plus the response) and a
high-frequency one (date column plus one column per predictor).  Dates are
parsed as pandas periods of the declared frequencies, which must nest with an
integer ratio m (e.g. quarterly/monthly, m = 3).  The last high-frequency
sub-period of low-frequency period t is lag 0 for t.  Missing values are never
imputed: any gap is an error that lists the offending cells.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .design import MixedFreqPanel


class DataError(OSError):
    """Input files are unreadable or violate the panel contract."""


class FrequencyError(DataError):
    """Low and high frequencies do not nest with an integer ratio."""


@dataclass(frozen=True)
class IngestSpec:
    date_col: str = "date"
    y_col: str = "y"
    x_cols: tuple[str, ...] | None = None     # default: every non-date column
    low_freq: str = "Q"
    high_freq: str = "M"
    C: int = 12
    h: float = 0.0


def _read(path) -> pd.DataFrame:
    try:
        return pd.read_csv(path, float_precision="round_trip")
    except FileNotFoundError as exc:
        raise DataError(f"no such file: {path}") from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc


def parse_periods(values, freq: str, what: str) -> pd.PeriodIndex:
    raw = pd.Series(values).astype(str)
    try:
        return pd.PeriodIndex(raw, freq=freq)
    except (ValueError, TypeError):
        pass
    try:
        return pd.PeriodIndex(pd.to_datetime(raw), freq=freq)
    except (ValueError, TypeError) as exc:
        raise DataError(f"{what}: cannot parse dates as frequency {freq!r}: {exc}") from exc


def frequency_ratio(low: pd.PeriodIndex, high_freq: str) -> int:
    """Number of high-frequency periods per low-frequency period; must be constant."""
    counts = set()
    for p in low:
        first = p.asfreq(high_freq, "start")
        last = p.asfreq(high_freq, "end")
        if first.start_time != p.start_time or last.end_time.floor("D") != p.end_time.floor("D"):
            raise FrequencyError(
                f"frequency mismatch: {high_freq!r} periods do not tile {p} "
                "(non-integer frequency ratio)")
        counts.add((last - first).n + 1)
    if len(counts) != 1:
        raise FrequencyError(f"non-integer frequency ratio: sub-period counts {sorted(counts)}")
    return counts.pop()


def _check_frame(df: pd.DataFrame, periods: pd.PeriodIndex, cols, what: str) -> None:
    dup = periods[periods.duplicated()]
    if len(dup):
        raise DataError(f"{what}: duplicate dates {[str(d) for d in dup[:10]]}")
    if not periods.is_monotonic_increasing:
        raise DataError(f"{what}: dates are not sorted")
    full = pd.period_range(periods[0], periods[-1], freq=periods.freq)
    if len(full) != len(periods):
        missing = full.difference(periods)
        raise DataError(f"{what}: missing dates {[str(d) for d in missing[:10]]}")
    block = df[list(cols)]
    bad = block.isna().to_numpy()
    if bad.any():
        rows, cols_idx = np.nonzero(bad)
        cells = [f"({periods[r]}, {block.columns[c]})" for r, c in zip(rows[:20], cols_idx[:20])]
        more = "" if len(rows) <= 20 else f" and {len(rows) - 20} more"
        raise DataError(f"{what}: missing values at {', '.join(cells)}{more}")
    non_numeric = [c for c in cols if not pd.api.types.is_numeric_dtype(block[c])]
    if non_numeric:
        raise DataError(f"{what}: non-numeric columns {non_numeric}")


def ingest_frames(low: pd.DataFrame, high: pd.DataFrame, spec: IngestSpec) -> MixedFreqPanel:
    for df, what in ((low, "low-frequency file"), (high, "high-frequency file")):
        if spec.date_col not in df.columns:
            raise DataError(f"{what}: no date column {spec.date_col!r}")
    if spec.y_col not in low.columns:
        raise DataError(f"low-frequency file: no response column {spec.y_col!r}")
    x_cols = spec.x_cols or tuple(c for c in high.columns if c != spec.date_col)
    absent = [c for c in x_cols if c not in high.columns]
    if absent or not x_cols:
        raise DataError(f"high-frequency file: missing predictor columns {absent or '(none)'}")
    lp = parse_periods(low[spec.date_col], spec.low_freq, "low-frequency file")
    hp = parse_periods(high[spec.date_col], spec.high_freq, "high-frequency file")
    _check_frame(low, lp, [spec.y_col], "low-frequency file")
    _check_frame(high, hp, x_cols, "high-frequency file")
    m = frequency_ratio(lp, spec.high_freq)
    # offset of the first sub-period of each low period inside the high-frequency array
    head = (lp[0].asfreq(spec.high_freq, "start") - hp[0]).n
    y = low[spec.y_col].to_numpy(dtype=float)
    if head < 0:
        drop = -(head // m)  # ceil(-head / m)
        if drop >= len(y):
            raise DataError("high-frequency data start after the last low-frequency period")
        y, lp = y[drop:], lp[drop:]
        head += drop * m
    x = high[list(x_cols)].to_numpy(dtype=float).T
    return MixedFreqPanel(y=y, x=x, m=m, C=spec.C, h=spec.h, head=head,
                          names=tuple(str(c) for c in x_cols),
                          periods=tuple(str(p) for p in lp))


def ingest_csv(low_freq_path, high_freq_path, spec: IngestSpec = IngestSpec()) -> MixedFreqPanel:
    """Read and align a low/high-frequency CSV pair into a :class:`MixedFreqPanel`."""
    return ingest_frames(_read(low_freq_path), _read(high_freq_path), spec)


def panel_frames(panel: MixedFreqPanel, low_freq: str = "Q", high_freq: str = "M",
                 start: str | None = None, date_col: str = "date", y_col: str = "y"):
    """Inverse of :func:`ingest_frames`; ``start`` dates period 0 when the panel
    carries no periods."""
    if panel.periods is not None:
        lp = parse_periods(list(panel.periods), low_freq, "panel")
    else:
        lp = pd.period_range(start or "2000Q1", periods=panel.T, freq=low_freq)
    if frequency_ratio(lp[:1], high_freq) != panel.m:
        raise FrequencyError(f"frequencies {low_freq}/{high_freq} do not have ratio m={panel.m}")
    h0 = lp[0].asfreq(high_freq, "start") - panel.head
    hp = pd.period_range(h0, periods=panel.x.shape[1], freq=high_freq)
    low = pd.DataFrame({date_col: lp.astype(str), y_col: panel.y})
    high = pd.DataFrame({date_col: hp.astype(str)})
    for name, row in zip(panel.names, panel.x):
        high[name] = row
    return low, high


def write_panel_csv(panel: MixedFreqPanel, low_path, high_path, low_freq: str = "Q",
                    high_freq: str = "M", start: str | None = None) -> None:
    low, high = panel_frames(panel, low_freq, high_freq, start)
    for df, path in ((low, low_path), (high, high_path)):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(path, index=False, float_format="%.17g")


# conventional (low, high) frequency codes for a given ratio
FREQ_PAIRS = {3: ("Q", "M"), 4: ("Y", "Q"), 12: ("Y", "M")}


__all__ = ["IngestSpec", "DataError", "FrequencyError", "ingest_csv", "ingest_frames",
           "panel_frames", "write_panel_csv", "frequency_ratio", "parse_periods", "FREQ_PAIRS"]
