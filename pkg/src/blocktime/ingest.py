"""Block-timestamp acquisition and inter-block interval extraction.

Sources are CSV exports (``height`` plus an RFC 3339 or epoch-seconds
``time`` column) or a Tendermint-compatible RPC endpoint
(``/block?height=H`` returning ``result.block.header.time``).  Timestamps
are stored as integer nanoseconds since the Unix epoch — proposer header
times, which is the convention documented for all outputs — and intervals
are emitted as floating seconds only at the boundary.

Interval extraction keeps a pair of records only when their heights are
consecutive and the time difference is strictly positive; everything else
is dropped with a logged reason, never silently.
"""

from __future__ import annotations

import csv
import math
import re
import time as _time
from dataclasses import dataclass
from datetime import datetime, timezone
from decimal import Decimal, InvalidOperation

import numpy as np
import requests

from .errors import (
    DomainError,
    FormatError,
    IntegrityError,
    ProtocolError,
    SchemaError,
    TransportError,
)

__all__ = [
    "BlockRecord",
    "CsvSchema",
    "BlockTimeSeries",
    "parse_rfc3339_ns",
    "format_rfc3339_ns",
    "parse_csv",
    "serialize_csv",
    "compute_intervals",
    "write_intervals_csv",
    "read_intervals_csv",
    "fetch_blocks",
]

_NS_PER_S = 10**9

_RFC3339_RE = re.compile(
    r"^(\d{4})-(\d{2})-(\d{2})[Tt ]"
    r"(\d{2}):(\d{2}):(\d{2})"
    r"(?:\.(\d{1,9})\d*)?"
    r"(Z|z|[+-]\d{2}:\d{2})$"
)

_EPOCH_RE = re.compile(r"^[+-]?\d+(\.\d+)?$")


@dataclass(frozen=True)
class BlockRecord:
    """One block: its height and UTC header timestamp in nanoseconds."""

    height: int
    timestamp_ns: int

    def __post_init__(self):
        if isinstance(self.height, bool) or not isinstance(self.height, (int, np.integer)):
            raise DomainError(f"height must be an integer, got {self.height!r}")
        if int(self.height) < 1:
            raise DomainError(f"height must be >= 1, got {self.height}")
        object.__setattr__(self, "height", int(self.height))
        if isinstance(self.timestamp_ns, bool) or not isinstance(
            self.timestamp_ns, (int, np.integer)
        ):
            raise DomainError(f"timestamp_ns must be an integer, got {self.timestamp_ns!r}")
        object.__setattr__(self, "timestamp_ns", int(self.timestamp_ns))


@dataclass(frozen=True)
class CsvSchema:
    """Column names for block-record CSV files."""

    height_column: str = "height"
    time_column: str = "time"

    def __post_init__(self):
        for name in (self.height_column, self.time_column):
            if not isinstance(name, str) or not name.strip():
                raise DomainError(f"column names must be non-empty strings, got {name!r}")
        if self.height_column == self.time_column:
            raise DomainError("height and time columns must differ")


@dataclass(frozen=True)
class BlockTimeSeries:
    """Height-sorted records with their retained intervals and a drop log.

    ``intervals[j]`` (seconds, strictly positive) spans the consecutive
    height pair ``pairs[j]``; ``drop_log`` lists ``(height, reason)`` for
    every record pair that produced no interval.
    """

    records: tuple[BlockRecord, ...]
    intervals: np.ndarray
    pairs: tuple[tuple[int, int], ...]
    drop_log: tuple[tuple[int, str], ...]

    def __post_init__(self):
        records = tuple(self.records)
        heights = [r.height for r in records]
        if heights != sorted(heights) or len(set(heights)) != len(heights):
            raise DomainError("records must be sorted by height and unique")
        intervals = np.asarray(self.intervals, dtype=np.float64)
        if intervals.ndim != 1:
            raise DomainError("intervals must be 1-D")
        if intervals.size and not (intervals > 0.0).all():
            raise DomainError("all retained intervals must be > 0")
        pairs = tuple((int(a), int(b)) for a, b in self.pairs)
        if len(pairs) != intervals.size:
            raise DomainError("pairs must align with intervals")
        for a, b in pairs:
            if b != a + 1:
                raise DomainError(f"interval pair {a}->{b} is not consecutive")
        object.__setattr__(self, "records", records)
        object.__setattr__(self, "intervals", intervals)
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(
            self, "drop_log", tuple((int(h), str(r)) for h, r in self.drop_log)
        )


# ---------------------------------------------------------------------------
# Timestamp parsing/formatting
# ---------------------------------------------------------------------------


def parse_rfc3339_ns(text: str) -> int:
    """Parse an RFC 3339 timestamp to UTC nanoseconds since the epoch.

    Accepts up to nanosecond fractional digits (extra digits are truncated)
    and either ``Z`` or a numeric UTC offset.
    """
    if not isinstance(text, str):
        raise FormatError(f"timestamp must be a string, got {text!r}")
    match = _RFC3339_RE.match(text.strip())
    if match is None:
        raise FormatError(f"not an RFC 3339 timestamp: {text!r}")
    year, month, day, hour, minute, second = (int(match.group(i)) for i in range(1, 7))
    frac = match.group(7)
    nanos = int(frac.ljust(9, "0")) if frac else 0
    offset_text = match.group(8)
    if offset_text in ("Z", "z"):
        offset_s = 0
    else:
        sign = 1 if offset_text[0] == "+" else -1
        offset_s = sign * (int(offset_text[1:3]) * 3600 + int(offset_text[4:6]) * 60)
    if second == 60:
        raise FormatError(f"leap seconds are not supported: {text!r}")
    try:
        moment = datetime(year, month, day, hour, minute, second, tzinfo=timezone.utc)
    except ValueError as exc:
        raise FormatError(f"invalid calendar timestamp {text!r}: {exc}") from exc
    epoch_s = int(moment.timestamp()) - offset_s
    return epoch_s * _NS_PER_S + nanos


def format_rfc3339_ns(timestamp_ns: int) -> str:
    """Format UTC nanoseconds as RFC 3339 with minimal fractional digits."""
    if isinstance(timestamp_ns, bool) or not isinstance(timestamp_ns, (int, np.integer)):
        raise FormatError(f"timestamp_ns must be an integer, got {timestamp_ns!r}")
    seconds, nanos = divmod(int(timestamp_ns), _NS_PER_S)
    moment = datetime.fromtimestamp(seconds, tz=timezone.utc)
    base = moment.strftime("%Y-%m-%dT%H:%M:%S")
    if nanos:
        return f"{base}.{nanos:09d}".rstrip("0") + "Z"
    return base + "Z"


def _parse_epoch_ns(text: str) -> int:
    try:
        value = Decimal(text.strip())
    except InvalidOperation as exc:
        raise FormatError(f"invalid epoch timestamp: {text!r}") from exc
    return int((value * _NS_PER_S).to_integral_value())


def _detect_time_format(text: str) -> str:
    stripped = text.strip()
    if not stripped:
        raise FormatError("empty timestamp")
    return "epoch" if _EPOCH_RE.match(stripped) else "rfc3339"


# ---------------------------------------------------------------------------
# CSV parsing / serialization
# ---------------------------------------------------------------------------


def parse_csv(stream, schema: CsvSchema | None = None, lenient: bool = False,
              error_sink: list | None = None) -> list[BlockRecord]:
    """Parse block records from a CSV text stream.

    The timestamp format (RFC 3339 vs epoch seconds) is auto-detected from
    the first well-formed row and then enforced for the rest of the file.
    In strict mode (default) any malformed rows abort parsing with a
    :class:`FormatError` whose ``row_errors`` lists every offender; in
    lenient mode they are skipped and reported through ``error_sink``.
    """
    schema = schema if schema is not None else CsvSchema()
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        raise SchemaError("CSV input is empty: missing header row")
    missing = [
        column
        for column in (schema.height_column, schema.time_column)
        if column not in reader.fieldnames
    ]
    if missing:
        raise SchemaError(
            f"CSV is missing required column(s) {missing}; header has {reader.fieldnames}"
        )
    records: list[BlockRecord] = []
    row_errors: list[tuple[int, str]] = []
    time_format: str | None = None
    for row_number, row in enumerate(reader, start=2):
        try:
            height_raw = row.get(schema.height_column)
            time_raw = row.get(schema.time_column)
            if height_raw is None or time_raw is None:
                raise FormatError("row is shorter than the header")
            try:
                height = int(height_raw.strip())
            except ValueError as exc:
                raise FormatError(f"invalid height {height_raw!r}") from exc
            if height < 1:
                raise FormatError(f"height must be >= 1, got {height}")
            fmt = _detect_time_format(time_raw)
            if time_format is None:
                time_format = fmt
            elif fmt != time_format:
                raise FormatError(
                    f"mixed timestamp formats: file uses {time_format}, row has {fmt}"
                )
            if fmt == "epoch":
                timestamp_ns = _parse_epoch_ns(time_raw)
            else:
                timestamp_ns = parse_rfc3339_ns(time_raw)
            records.append(BlockRecord(height=height, timestamp_ns=timestamp_ns))
        except FormatError as exc:
            row_errors.append((row_number, str(exc)))
    if row_errors:
        if lenient:
            if error_sink is not None:
                error_sink.extend(row_errors)
        else:
            first_row, first_message = row_errors[0]
            raise FormatError(
                f"{len(row_errors)} malformed row(s); first at row {first_row}: "
                f"{first_message}",
                row_errors=row_errors,
            )
    return records


def serialize_csv(records, stream, schema: CsvSchema | None = None) -> None:
    """Write block records as CSV with RFC 3339 timestamps.

    ``parse_csv`` of the produced text recovers the records exactly.
    """
    schema = schema if schema is not None else CsvSchema()
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow([schema.height_column, schema.time_column])
    for record in records:
        if not isinstance(record, BlockRecord):
            raise DomainError(f"expected BlockRecord, got {record!r}")
        writer.writerow([str(record.height), format_rfc3339_ns(record.timestamp_ns)])


# ---------------------------------------------------------------------------
# Interval extraction
# ---------------------------------------------------------------------------


def compute_intervals(records) -> BlockTimeSeries:
    """Sort records by height and extract positive consecutive intervals.

    Exact duplicates (same height, same timestamp) collapse to one record
    with a log entry; duplicate heights with differing timestamps raise
    :class:`IntegrityError`.  Pairs with a height gap or a non-positive time
    difference contribute no interval and are logged with the reason.
    """
    records = list(records)
    if len(records) < 2:
        raise DomainError("need at least 2 records to compute intervals")
    for record in records:
        if not isinstance(record, BlockRecord):
            raise DomainError(f"expected BlockRecord, got {record!r}")
    ordered = sorted(records, key=lambda r: r.height)
    drop_log: list[tuple[int, str]] = []
    deduped: list[BlockRecord] = [ordered[0]]
    for record in ordered[1:]:
        previous = deduped[-1]
        if record.height == previous.height:
            if record.timestamp_ns != previous.timestamp_ns:
                raise IntegrityError(
                    f"duplicate height {record.height} with differing timestamps"
                )
            drop_log.append((record.height, "duplicate height"))
            continue
        deduped.append(record)
    intervals: list[float] = []
    pairs: list[tuple[int, int]] = []
    for earlier, later in zip(deduped, deduped[1:]):
        if later.height != earlier.height + 1:
            drop_log.append(
                (
                    earlier.height,
                    f"non-consecutive heights {earlier.height}->{later.height}",
                )
            )
            continue
        delta_ns = later.timestamp_ns - earlier.timestamp_ns
        if delta_ns <= 0:
            drop_log.append(
                (
                    earlier.height,
                    f"non-positive interval {earlier.height}->{later.height}",
                )
            )
            continue
        intervals.append(delta_ns / _NS_PER_S)
        pairs.append((earlier.height, later.height))
    return BlockTimeSeries(
        records=tuple(deduped),
        intervals=np.asarray(intervals, dtype=np.float64),
        pairs=tuple(pairs),
        drop_log=tuple(drop_log),
    )


_INTERVAL_HEADER = ["height_from", "height_to", "interval_seconds"]


def write_intervals_csv(series: BlockTimeSeries, stream) -> None:
    """Write ``height_from,height_to,interval_seconds`` rows (full precision)."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(_INTERVAL_HEADER)
    for (height_from, height_to), interval in zip(series.pairs, series.intervals):
        writer.writerow([str(height_from), str(height_to), repr(float(interval))])


def read_intervals_csv(stream) -> tuple[list[tuple[int, int]] | None, np.ndarray]:
    """Read an interval CSV: either the 3-column format or bare intervals.

    Returns ``(pairs, intervals)``; ``pairs`` is ``None`` for the bare
    single-column ``interval_seconds`` format.
    """
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("interval CSV is empty: missing header row") from None
    header = [column.strip() for column in header]
    values: list[float] = []
    if header == _INTERVAL_HEADER:
        pairs: list[tuple[int, int]] | None = []
        for row_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise FormatError(f"row {row_number}: expected 3 columns, got {len(row)}")
            try:
                pairs.append((int(row[0]), int(row[1])))
                values.append(float(row[2]))
            except ValueError as exc:
                raise FormatError(f"row {row_number}: {exc}") from exc
    elif header == ["interval_seconds"]:
        pairs = None
        for row_number, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                values.append(float(row[0]))
            except ValueError as exc:
                raise FormatError(f"row {row_number}: {exc}") from exc
    else:
        raise SchemaError(
            f"unrecognized interval CSV header {header}; expected "
            f"{_INTERVAL_HEADER} or ['interval_seconds']"
        )
    intervals = np.asarray(values, dtype=np.float64)
    if intervals.size and not np.isfinite(intervals).all():
        raise FormatError("interval CSV contains non-finite values")
    return pairs, intervals


# ---------------------------------------------------------------------------
# Tendermint-compatible RPC
# ---------------------------------------------------------------------------


def _record_from_response(payload, requested_height: int) -> BlockRecord:
    node = payload
    for key in ("result", "block", "header"):
        if not isinstance(node, dict) or key not in node:
            raise ProtocolError(
                f"height {requested_height}: response lacks JSON path "
                f"result.block.header (missing {key!r})"
            )
        node = node[key]
    if not isinstance(node, dict) or "time" not in node:
        raise ProtocolError(
            f"height {requested_height}: response lacks JSON path "
            "result.block.header.time"
        )
    if "height" not in node:
        raise ProtocolError(
            f"height {requested_height}: response lacks JSON path "
            "result.block.header.height"
        )
    try:
        height = int(str(node["height"]))
    except ValueError as exc:
        raise ProtocolError(
            f"height {requested_height}: non-integer header.height {node['height']!r}"
        ) from exc
    if height != requested_height:
        raise IntegrityError(
            f"requested height {requested_height} but response carries {height}"
        )
    try:
        timestamp_ns = parse_rfc3339_ns(str(node["time"]))
    except FormatError as exc:
        raise ProtocolError(
            f"height {requested_height}: unparseable header.time: {exc}"
        ) from exc
    return BlockRecord(height=height, timestamp_ns=timestamp_ns)


def fetch_blocks(
    endpoint: str,
    start_height: int,
    end_height: int,
    rate_limit: float = 5.0,
    *,
    timeout: float = 10.0,
    max_retries: int = 3,
    backoff_base: float = 0.25,
    backoff_cap: float = 2.0,
    verify_tls: bool = True,
    bearer_token: str | None = None,
    session=None,
    sleep=_time.sleep,
    monotonic=_time.monotonic,
) -> list[BlockRecord]:
    """Fetch one record per height over ``[start_height, end_height]``.

    Requests are paced so consecutive request starts are at least
    ``1/rate_limit`` seconds apart.  Connection errors, timeouts, and HTTP
    5xx responses are retried with exponential backoff (``backoff_base * 2^a``
    seconds, capped at ``backoff_cap``) up to ``max_retries`` extra attempts,
    after which a :class:`TransportError` reports the last failure.  Other
    HTTP statuses fail immediately.  Malformed bodies raise
    :class:`ProtocolError`; a response whose header height differs from the
    requested one raises :class:`IntegrityError`.
    """
    if isinstance(start_height, bool) or isinstance(end_height, bool):
        raise DomainError("heights must be integers")
    if not isinstance(start_height, (int, np.integer)) or not isinstance(
        end_height, (int, np.integer)
    ):
        raise DomainError("heights must be integers")
    start_height, end_height = int(start_height), int(end_height)
    if start_height < 1 or end_height < start_height:
        raise DomainError(
            f"need 1 <= start_height <= end_height, got [{start_height}, {end_height}]"
        )
    rate_limit = float(rate_limit)
    if not math.isfinite(rate_limit) or rate_limit <= 0.0:
        raise DomainError(f"rate_limit must be finite and > 0, got {rate_limit!r}")
    if max_retries < 0:
        raise DomainError(f"max_retries must be >= 0, got {max_retries}")

    url = endpoint.rstrip("/") + "/block"
    headers = {"Authorization": f"Bearer {bearer_token}"} if bearer_token else {}
    min_gap = 1.0 / rate_limit
    own_session = session is None
    http = session if session is not None else requests.Session()
    records: list[BlockRecord] = []
    next_allowed = monotonic()
    try:
        for height in range(start_height, end_height + 1):
            now = monotonic()
            if now < next_allowed:
                sleep(next_allowed - now)
                now = monotonic()
            next_allowed = now + min_gap
            last_failure = None
            payload = None
            for attempt in range(max_retries + 1):
                if attempt:
                    sleep(min(backoff_cap, backoff_base * 2.0 ** (attempt - 1)))
                try:
                    response = http.get(
                        url,
                        params={"height": str(height)},
                        timeout=timeout,
                        verify=verify_tls,
                        headers=headers,
                    )
                except requests.RequestException as exc:
                    last_failure = f"connection error: {exc}"
                    continue
                status = response.status_code
                if status == 200:
                    try:
                        payload = response.json()
                    except ValueError as exc:
                        raise ProtocolError(
                            f"height {height}: response body is not JSON: {exc}"
                        ) from exc
                    break
                if 500 <= status < 600:
                    last_failure = f"HTTP {status}"
                    continue
                raise TransportError(
                    f"height {height}: HTTP {status} from {url} (not retryable)"
                )
            if payload is None:
                raise TransportError(
                    f"height {height}: giving up on {url} after "
                    f"{max_retries + 1} attempt(s); last failure: {last_failure}"
                )
            records.append(_record_from_response(payload, height))
    finally:
        if own_session:
            http.close()
    return records
