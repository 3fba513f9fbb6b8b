"""Parsing of raw event logs (order placements, phone calls) into typed event streams.

Input files are delimiter-separated text with a mandatory header row. A column
schema maps header names onto the event fields, so real-world column naming is
absorbed here instead of leaking into the pipeline. Malformed rows never abort
a run: they are counted (with line numbers for the first few) and skipped.
Only a schema-level failure (a missing mandatory column) is fatal.
"""

from __future__ import annotations

import io
import sys
from dataclasses import dataclass, field
from typing import IO, Iterable, NamedTuple

BUY = "buy"
SELL = "sell"

#: how many individual row errors keep their line number in the report
MAX_ERROR_SAMPLES = 20


class SchemaError(ValueError):
    """The input header does not provide a mandatory column."""


class OrderEvent(NamedTuple):
    investor_id: str
    stock_id: str
    side: str  # BUY or SELL
    timestamp: int


class CallEvent(NamedTuple):
    caller_id: str
    callee_id: str
    timestamp: int


@dataclass(frozen=True)
class OrderSchema:
    """Column mapping for order logs; values of ``side`` are configurable."""

    investor_id: str = "investor_id"
    stock_id: str = "stock_id"
    side: str = "side"
    timestamp: str = "timestamp"
    delimiter: str = ","
    buy_values: frozenset[str] = frozenset({"B", "b", "buy", "BUY"})
    sell_values: frozenset[str] = frozenset({"S", "s", "sell", "SELL"})


@dataclass(frozen=True)
class CallSchema:
    caller_id: str = "caller_id"
    callee_id: str = "callee_id"
    timestamp: str = "timestamp"
    delimiter: str = ","


@dataclass(frozen=True)
class Blocklist:
    """Externally supplied ids to exclude (robots, fraud, telesales, ...).

    Membership is exact string equality; producing the list is out of scope
    here and delegated to whoever curates it.
    """

    excluded_ids: frozenset[str] = frozenset()

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "Blocklist":
        ids = {ln.strip() for ln in lines}
        ids.discard("")
        return cls(frozenset(ids))

    def __contains__(self, node_id: str) -> bool:
        return node_id in self.excluded_ids

    def __len__(self) -> int:
        return len(self.excluded_ids)


@dataclass
class ParseReport:
    """Accounting for one parsed stream.

    Invariant: n_rows == n_events + n_row_errors + n_self_calls (header row not
    counted in n_rows).
    """

    n_rows: int = 0
    n_events: int = 0
    n_row_errors: int = 0
    n_self_calls: int = 0
    error_samples: list[tuple[int, str]] = field(default_factory=list)

    def _record_error(self, line_no: int, reason: str) -> None:
        self.n_row_errors += 1
        if len(self.error_samples) < MAX_ERROR_SAMPLES:
            self.error_samples.append((line_no, reason))


def _text_lines(stream: IO | Iterable[str]) -> Iterable[str]:
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    if hasattr(stream, "read"):
        probe = getattr(stream, "mode", "")
        if "b" in probe or isinstance(stream, (io.RawIOBase, io.BufferedIOBase, io.BytesIO)):
            return io.TextIOWrapper(stream, encoding="utf-8")
    return stream  # already text lines


def _header_index(header_line: str, delimiter: str, wanted: dict[str, str]) -> dict[str, int]:
    cols = [c.strip() for c in header_line.rstrip("\r\n").split(delimiter)]
    index = {}
    for fieldname, colname in wanted.items():
        try:
            index[fieldname] = cols.index(colname)
        except ValueError:
            raise SchemaError(f"missing mandatory column {colname!r} (for {fieldname})") from None
    return index


def _parse_timestamp(token: str) -> int:
    # sub-second resolution is dropped; "1357000000.25" -> 1357000000
    value = float(token) if ("." in token or "e" in token or "E" in token) else int(token)
    ts = int(value)
    if ts < 0:
        raise ValueError("negative timestamp")
    return ts


def parse_order_log(stream: IO | Iterable[str] | bytes, schema: OrderSchema | None = None) -> tuple[list[OrderEvent], ParseReport]:
    """Parse an order log into events, counting (not raising on) bad rows."""
    schema = schema or OrderSchema()
    lines = iter(_text_lines(stream))
    try:
        header = next(lines)
    except StopIteration:
        raise SchemaError("empty stream: no header row") from None
    idx = _header_index(header, schema.delimiter, {
        "investor_id": schema.investor_id,
        "stock_id": schema.stock_id,
        "side": schema.side,
        "timestamp": schema.timestamp,
    })
    need = max(idx.values()) + 1

    events: list[OrderEvent] = []
    report = ParseReport()
    for line_no, line in enumerate(lines, start=2):
        line = line.rstrip("\r\n")
        if not line:
            continue
        report.n_rows += 1
        parts = line.split(schema.delimiter)
        if len(parts) < need:
            report._record_error(line_no, "too few columns")
            continue
        raw_side = parts[idx["side"]].strip()
        if raw_side in schema.buy_values:
            side = BUY
        elif raw_side in schema.sell_values:
            side = SELL
        else:
            report._record_error(line_no, f"unrecognized side {raw_side!r}")
            continue
        try:
            ts = _parse_timestamp(parts[idx["timestamp"]].strip())
        except ValueError:
            report._record_error(line_no, f"bad timestamp {parts[idx['timestamp']]!r}")
            continue
        events.append(OrderEvent(
            sys.intern(parts[idx["investor_id"]].strip()),
            sys.intern(parts[idx["stock_id"]].strip()),
            side,
            ts,
        ))
    report.n_events = len(events)
    return events, report


def parse_call_log(stream: IO | Iterable[str] | bytes, schema: CallSchema | None = None) -> tuple[list[CallEvent], ParseReport]:
    """Parse a call log; self-calls are rejected and counted separately from bad rows."""
    schema = schema or CallSchema()
    lines = iter(_text_lines(stream))
    try:
        header = next(lines)
    except StopIteration:
        raise SchemaError("empty stream: no header row") from None
    idx = _header_index(header, schema.delimiter, {
        "caller_id": schema.caller_id,
        "callee_id": schema.callee_id,
        "timestamp": schema.timestamp,
    })
    need = max(idx.values()) + 1

    events: list[CallEvent] = []
    report = ParseReport()
    for line_no, line in enumerate(lines, start=2):
        line = line.rstrip("\r\n")
        if not line:
            continue
        report.n_rows += 1
        parts = line.split(schema.delimiter)
        if len(parts) < need:
            report._record_error(line_no, "too few columns")
            continue
        caller = parts[idx["caller_id"]].strip()
        callee = parts[idx["callee_id"]].strip()
        try:
            ts = _parse_timestamp(parts[idx["timestamp"]].strip())
        except ValueError:
            report._record_error(line_no, f"bad timestamp {parts[idx['timestamp']]!r}")
            continue
        if caller == callee:
            report.n_self_calls += 1
            continue
        events.append(CallEvent(sys.intern(caller), sys.intern(callee), ts))
    report.n_events = len(events)
    return events, report


def apply_blocklist(events: Iterable[OrderEvent] | Iterable[CallEvent], blocklist: Blocklist) -> list:
    """Drop every event with a blocklisted participant, preserving order. Idempotent."""
    if not len(blocklist):
        return list(events)
    out = []
    excluded = blocklist.excluded_ids
    for ev in events:
        if isinstance(ev, CallEvent):
            if ev.caller_id in excluded or ev.callee_id in excluded:
                continue
        else:
            if ev.investor_id in excluded:
                continue
        out.append(ev)
    return out
