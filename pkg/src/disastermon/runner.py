"""Wiring helpers shared by the CLI and the tests: build clients from
config, bootstrap an engine, and drive the ingest loop for replay or live
operation."""

from __future__ import annotations

import logging
import math
import threading
import time
from pathlib import Path

from .clock import Clock, SimClock, SystemClock
from .config import ServiceConfig
from .editstream import (
    EventQueue,
    LiveSource,
    ReplaySource,
    StreamStats,
    connect,
)
from .engine import MonitorEngine
from .candidates import Journal
from .media import SearchProvider, load_providers
from .wikiclient import FixtureWikiClient, HttpWikiClient, WikiClient

log = logging.getLogger(__name__)


def build_wiki_client(config: ServiceConfig) -> WikiClient:
    if config.fixture_wiki_dir:
        return FixtureWikiClient.from_dir(config.fixture_wiki_dir)
    return HttpWikiClient(endpoint_template=config.wiki_api_template)


def build_providers(config: ServiceConfig) -> list[SearchProvider]:
    if not config.provider_config:
        return []
    return load_providers(config.provider_config)


def journal_path(config: ServiceConfig) -> Path:
    return config.ensure_data_dir() / "journal.ndjson"


def bootstrap_engine(config: ServiceConfig, clock: Clock | None = None) -> MonitorEngine:
    return MonitorEngine(
        config=config,
        wiki_client=build_wiki_client(config),
        providers=build_providers(config),
        clock=clock,
        journal=Journal(journal_path(config)),
    )


def run_replay(config: ServiceConfig) -> tuple[MonitorEngine, StreamStats]:
    """Replay a recorded stream through a fresh engine.

    At infinite speed the engine runs on simulated time driven by the event
    timestamps, so two runs over the same inputs append byte-identical
    journals.
    """
    if not config.replay_path:
        raise ValueError("replay requires a replay file")
    as_fast_as_possible = math.isinf(config.replay_speed)
    clock: Clock = SimClock() if as_fast_as_possible else SystemClock()
    engine = bootstrap_engine(config, clock=clock)
    engine.refresh_monitoring_list()
    stats = StreamStats()
    source = ReplaySource(config.replay_path, speed=config.replay_speed)
    for event in connect(source, clock=clock, stats=stats):
        engine.handle_edit_event(event)
    log.info(
        "replay done: %d events in, %d processed, %d dropped",
        stats.events_in, stats.events_out, stats.events_dropped,
    )
    return engine, stats


def start_refresh_thread(engine: MonitorEngine, interval_s: float) -> threading.Thread:
    def loop() -> None:
        while not engine.closed.wait(interval_s):
            try:
                engine.refresh_monitoring_list()
            except Exception:
                log.exception("monitoring-list refresh failed")

    thread = threading.Thread(target=loop, name="list-refresh", daemon=True)
    thread.start()
    return thread


def run_live(config: ServiceConfig, engine: MonitorEngine) -> None:
    """Consume the live stream until the engine closes.

    The SSE reader feeds a bounded queue; the ingest loop (this thread)
    drains it, so a slow enrichment or HTTP hiccup sheds backlog instead of
    stalling the reader.
    """
    if not config.stream_url:
        raise ValueError("live mode requires a stream URL")
    pending = EventQueue(capacity=config.queue_capacity)
    stats = StreamStats()

    def reader() -> None:
        source = LiveSource(config.stream_url)
        try:
            for event in connect(source, stats=stats, field_map=config.field_map):
                pending.put(event)
                if engine.closed.is_set():
                    return
        except Exception:
            log.exception("edit stream terminated")
            engine.closed.set()

    threading.Thread(target=reader, name="stream-reader", daemon=True).start()
    while not engine.closed.is_set():
        event = pending.get()
        if event is None:
            time.sleep(0.05)
            continue
        try:
            engine.handle_edit_event(event)
        except Exception:
            log.exception("failed to process edit event")
