"""Per-iteration trace records and their CSV form."""

from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass, fields
from pathlib import Path


@dataclass
class TraceRecord:
    run_id: int
    algorithm: str
    stage: int
    iteration: int
    alpha: float | None
    radius: float | None
    y_norm_sq: float | None
    mean_grad_norm_sq: float | None
    x_consensus_sq: float | None
    y_consensus_sq: float | None
    v_over_alpha_sq: float | None
    potential: float | None
    boundary_touch_count: int
    wall_us: int


FIELDS = tuple(f.name for f in fields(TraceRecord))
_INT_FIELDS = {"run_id", "stage", "iteration", "boundary_touch_count", "wall_us"}
_STR_FIELDS = {"algorithm"}


class TraceSink:
    """Collects records; ``stride`` keeps every k-th iteration (plus any
    record passed with ``force=True``)."""

    def __init__(self, stride: int = 1):
        if stride < 1:
            raise ValueError("stride must be >= 1")
        self.stride = stride
        self.records: list[TraceRecord] = []

    def wants(self, iteration: int) -> bool:
        return iteration % self.stride == 0

    def append(self, rec: TraceRecord, force: bool = False) -> None:
        if force or self.wants(rec.iteration):
            self.records.append(rec)

    def __len__(self):
        return len(self.records)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def format_csv(records) -> str:
    buf = io.StringIO()
    buf.write(",".join(FIELDS) + "\n")
    for r in records:
        buf.write(",".join(_fmt(v) for v in astuple(r)) + "\n")
    return buf.getvalue()


def emit_csv(records, path) -> None:
    try:
        Path(path).write_text(format_csv(records))
    except OSError as exc:
        raise OSError(f"cannot write trace CSV {path}: {exc}") from exc


def _parse(name: str, text: str):
    if name in _STR_FIELDS:
        return text
    if text == "":
        return None
    if name in _INT_FIELDS:
        return int(text)
    return float(text)


def parse_csv(text: str) -> list[TraceRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != FIELDS:
        raise ValueError("unexpected trace CSV header")
    return [TraceRecord(*(_parse(n, t) for n, t in zip(FIELDS, row))) for row in rows[1:]]


def read_csv(path) -> list[TraceRecord]:
    return parse_csv(Path(path).read_text())
