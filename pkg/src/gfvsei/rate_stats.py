"""Per-picture bit logs and the rate figures derived from them.

Ratios are kept as :class:`fractions.Fraction` so that scaling every count
by the same factor leaves them exactly unchanged; rounding happens only
when a percentage is formatted.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import UndefinedRatioError

CSV_HEADER = ["picture", "base_bits", "sei_bits", "is_base"]


@dataclass(frozen=True)
class BitRecord:
    picture_index: int
    base_bits: int
    sei_bits: int
    is_base_picture: bool

    def __post_init__(self):
        if self.base_bits < 0 or self.sei_bits < 0:
            raise ValueError("bit counts must be nonnegative")


@dataclass
class BitLog:
    records: list[BitRecord] = field(default_factory=list)

    def add(self, picture_index: int, base_bits: int, sei_bits: int, is_base: bool) -> None:
        self.records.append(BitRecord(picture_index, base_bits, sei_bits, is_base))

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def base_bits(self) -> int:
        return sum(r.base_bits for r in self.records)

    @property
    def sei_bits(self) -> int:
        return sum(r.sei_bits for r in self.records)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in self.records:
                w.writerow([r.picture_index, r.base_bits, r.sei_bits, int(r.is_base_picture)])

    @classmethod
    def read_csv(cls, path) -> "BitLog":
        log = cls()
        with open(path, newline="") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames != CSV_HEADER:
                raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}")
            for row in reader:
                log.add(int(row["picture"]), int(row["base_bits"]), int(row["sei_bits"]),
                        row["is_base"].strip().lower() in ("1", "true"))
        return log


@dataclass(frozen=True)
class RateSummary:
    base_bits: int
    sei_bits: int
    total_bits: int
    base_ratio_percent: Fraction
    kbps: float
    pictures: int
    fps: float

    def to_json(self) -> str:
        d = asdict(self)
        d["base_ratio_percent"] = float(self.base_ratio_percent)
        d["base_ratio_display"] = format_percent(self.base_ratio_percent)
        return json.dumps(d, indent=2, sort_keys=True) + "\n"


def _require_records(log: BitLog) -> None:
    if not len(log):
        raise ValueError("bit log is empty")


def base_ratio(log: BitLog) -> Fraction:
    """Exact percentage of all bits spent on base pictures."""
    _require_records(log)
    base, total = log.base_bits, log.base_bits + log.sei_bits
    if total == 0:
        raise UndefinedRatioError("log holds no bits at all")
    return Fraction(100 * base, total)


def windowed_base_ratio(log: BitLog, window: int) -> list[Fraction]:
    """``base_ratio`` over consecutive windows of ``window`` pictures."""
    if window < 1:
        raise ValueError("window must be positive")
    out = []
    for start in range(0, len(log), window):
        out.append(base_ratio(BitLog(log.records[start:start + window])))
    return out


def format_percent(ratio: Fraction) -> str:
    """Nearest integer percent, halves rounded up (ratios are nonnegative)."""
    return f"{int(ratio + Fraction(1, 2))}%"


def per_picture_series(log: BitLog, count_base: bool = False) -> list[tuple[int, int]]:
    """(picture, bits) rows. With ``count_base`` off, base pictures contribute
    only their SEI bits."""
    _require_records(log)
    rows = []
    for r in log.records:
        bits = r.sei_bits
        if count_base or not r.is_base_picture:
            bits += r.base_bits
        rows.append((r.picture_index, bits))
    return rows


def write_series_csv(path, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["picture", "bits"])
        w.writerows(rows)


def kbps(log: BitLog, fps: float) -> float:
    _require_records(log)
    if fps <= 0:
        raise ValueError("fps must be positive")
    return (log.base_bits + log.sei_bits) / len(log) * fps / 1000.0


def summarize(log: BitLog, fps: float) -> RateSummary:
    return RateSummary(
        base_bits=log.base_bits,
        sei_bits=log.sei_bits,
        total_bits=log.base_bits + log.sei_bits,
        base_ratio_percent=base_ratio(log),
        kbps=kbps(log, fps),
        pictures=len(log),
        fps=fps,
    )


def write_summary_json(path, summary: RateSummary) -> None:
    Path(path).write_text(summary.to_json())
