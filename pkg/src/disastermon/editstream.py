"""Unified stream of Wikipedia edit events.

Two sources: a live Server-Sent-Events endpoint (reconnecting with
exponential backoff) and a recorded replay file (newline-delimited JSON
records with ts/language/article/user) delivered at recorded inter-arrival
times scaled by a speed factor, or as fast as possible at speed infinity.
Both yield events in arrival order; malformed records are dropped and
counted, never reordered or retried.
"""

from __future__ import annotations

import collections
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterator

import requests

from .articles import ArticleKey
from .clock import Clock, SystemClock

log = logging.getLogger(__name__)

# Values below this look like epoch seconds; at or above, epoch milliseconds.
_EPOCH_MS_CUTOFF = 10**12


class StreamError(Exception):
    """The stream failed permanently (retries exhausted, bad file, ...)."""


class EventParseError(ValueError):
    """One record could not be turned into an EditEvent."""


@dataclass(frozen=True, slots=True)
class EditEvent:
    key: ArticleKey
    timestamp: int
    editor: str | None = None

    def __post_init__(self) -> None:
        if self.timestamp <= 0:
            raise ValueError("timestamp must be positive epoch milliseconds")


@dataclass(frozen=True)
class FieldMap:
    """Config-time mapping from the wire payload to event fields.

    ``timestamp_unit`` is "ms", "s", or "auto" (numbers below 10^12 are
    treated as epoch seconds — live feeds disagree on the unit).
    """

    language: str = "language"
    article: str = "article"
    timestamp: str = "timestamp"
    editor: str = "user"
    timestamp_unit: str = "auto"


# Replay files always carry epoch milliseconds in "ts".
REPLAY_FIELD_MAP = FieldMap(timestamp="ts", timestamp_unit="ms")


@dataclass(frozen=True)
class LiveSource:
    url: str
    max_retries: int = 10
    backoff_base_ms: int = 1_000
    backoff_cap_ms: int = 60_000


@dataclass(frozen=True)
class ReplaySource:
    path: str | Path
    speed: float = math.inf

    def __post_init__(self) -> None:
        if not self.speed > 0:
            raise ValueError("replay speed factor must be > 0")


StreamSource = LiveSource | ReplaySource


@dataclass
class StreamStats:
    events_in: int = 0
    events_out: int = 0
    events_dropped: int = 0

    def consistent(self) -> bool:
        return self.events_in == self.events_out + self.events_dropped


def parse_edit_event(
    raw: str | dict[str, Any],
    receive_time_ms: int,
    field_map: FieldMap = FieldMap(),
) -> EditEvent:
    """Parse one SSE data payload (JSON text or an already-decoded record).

    Missing language or article is a parse error; a missing timestamp falls
    back to the receive time; unknown fields are ignored. Numeric timestamps
    below 10^12 are taken as epoch seconds.
    """
    if isinstance(raw, str):
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise EventParseError(f"not valid JSON: {exc}") from exc
    else:
        record = raw
    if not isinstance(record, dict):
        raise EventParseError(f"expected an object, got {type(record).__name__}")
    language = record.get(field_map.language)
    article = record.get(field_map.article)
    if not language or not article:
        raise EventParseError("record missing language or article")
    ts_raw = record.get(field_map.timestamp)
    if ts_raw is None:
        ts = receive_time_ms
    else:
        try:
            ts = int(ts_raw)
        except (TypeError, ValueError) as exc:
            raise EventParseError(f"bad timestamp {ts_raw!r}") from exc
        if field_map.timestamp_unit == "s" or (
            field_map.timestamp_unit == "auto" and ts < _EPOCH_MS_CUTOFF
        ):
            ts *= 1000
    editor = record.get(field_map.editor)
    try:
        key = ArticleKey(str(language), str(article))
        return EditEvent(key=key, timestamp=ts, editor=str(editor) if editor else None)
    except ValueError as exc:
        raise EventParseError(str(exc)) from exc


def _iter_replay(
    source: ReplaySource,
    clock: Clock,
    stats: StreamStats,
    field_map: FieldMap,
) -> Iterator[EditEvent]:
    path = Path(source.path)
    if not path.exists():
        raise StreamError(f"replay file not found: {path}")
    previous_ts: int | None = None
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            stats.events_in += 1
            try:
                event = parse_edit_event(line, receive_time_ms=clock.now_ms() or 1,
                                          field_map=field_map)
            except EventParseError as exc:
                stats.events_dropped += 1
                log.warning("dropping replay record: %s", exc)
                continue
            if previous_ts is not None and math.isfinite(source.speed):
                gap = max(0, event.timestamp - previous_ts)
                clock.sleep_ms(gap / source.speed)
            previous_ts = event.timestamp
            clock.advance_to(event.timestamp)
            stats.events_out += 1
            yield event


def _sse_data_payloads(lines: Iterator[str]) -> Iterator[str]:
    """Assemble SSE frames (data: lines up to a blank line) into payloads."""
    data_lines: list[str] = []
    for line in lines:
        line = line.rstrip("\n").rstrip("\r")
        if line == "":
            if data_lines:
                yield "\n".join(data_lines)
                data_lines = []
            continue
        if line.startswith(":"):
            continue
        field_name, _, value = line.partition(":")
        if value.startswith(" "):
            value = value[1:]
        if field_name == "data":
            data_lines.append(value)
        # event/id/retry fields are irrelevant here: every frame is an edit
    if data_lines:
        yield "\n".join(data_lines)


def _default_opener(url: str) -> Iterator[str]:
    response = requests.get(
        url, stream=True,
        headers={"Accept": "text/event-stream", "Cache-Control": "no-cache"},
        timeout=(10, 90),
    )
    response.raise_for_status()
    return response.iter_lines(decode_unicode=True)


def _iter_live(
    source: LiveSource,
    clock: Clock,
    stats: StreamStats,
    field_map: FieldMap,
    opener: Callable[[str], Iterator[str]],
) -> Iterator[EditEvent]:
    failures = 0
    while True:
        try:
            lines = opener(source.url)
        except Exception as exc:
            failures += 1
            if failures > source.max_retries:
                raise StreamError(
                    f"giving up on {source.url} after {failures - 1} retries: {exc}"
                ) from exc
            backoff = min(
                source.backoff_base_ms * 2 ** (failures - 1), source.backoff_cap_ms
            )
            log.warning("stream connect failed (%s), retrying in %d ms", exc, backoff)
            clock.sleep_ms(backoff)
            continue
        failures = 0
        try:
            for payload in _sse_data_payloads(lines):
                stats.events_in += 1
                try:
                    event = parse_edit_event(payload, receive_time_ms=clock.now_ms(),
                                              field_map=field_map)
                except EventParseError as exc:
                    stats.events_dropped += 1
                    log.warning("dropping live event: %s", exc)
                    continue
                stats.events_out += 1
                yield event
        except Exception as exc:
            log.warning("stream disconnected: %s", exc)
        # server closed the stream; treat like a failed connect and back off
        failures += 1
        if failures > source.max_retries:
            raise StreamError(f"giving up on {source.url} after repeated disconnects")
        backoff = min(source.backoff_base_ms * 2 ** (failures - 1), source.backoff_cap_ms)
        clock.sleep_ms(backoff)


def connect(
    source: StreamSource,
    clock: Clock | None = None,
    stats: StreamStats | None = None,
    field_map: FieldMap | None = None,
    opener: Callable[[str], Iterator[str]] | None = None,
) -> Iterator[EditEvent]:
    """Open the stream and yield EditEvents in arrival order.

    ``stats`` (if given) is updated in place with in/out/dropped counters.
    """
    clock = clock or SystemClock()
    stats = stats if stats is not None else StreamStats()
    if isinstance(source, ReplaySource):
        return _iter_replay(source, clock, stats, field_map or REPLAY_FIELD_MAP)
    return _iter_live(source, clock, stats, field_map or FieldMap(), opener or _default_opener)


class EventQueue:
    """Bounded handoff between a stream reader and the ingest worker.

    On overflow the oldest pending event is dropped and counted; the stream
    is lossy by nature, so shedding the backlog beats blocking the reader.
    """

    def __init__(self, capacity: int = 10_000) -> None:
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self._items: collections.deque[EditEvent] = collections.deque()
        self.capacity = capacity
        self.dropped_oldest = 0

    def put(self, event: EditEvent) -> None:
        if len(self._items) >= self.capacity:
            self._items.popleft()
            self.dropped_oldest += 1
        self._items.append(event)

    def get(self) -> EditEvent | None:
        return self._items.popleft() if self._items else None

    def __len__(self) -> int:
        return len(self._items)


def write_replay_file(path: str | Path, events: list[EditEvent]) -> None:
    """Capture events in the replay format (append-only, diff-friendly)."""
    with Path(path).open("a", encoding="utf-8") as fh:
        for event in events:
            record = {
                "ts": event.timestamp,
                "language": event.key.language,
                "article": event.key.title,
                "user": event.editor,
            }
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
