"""The monitoring loop: stream -> monitoring-list lookup -> spike evaluation
-> geo -> candidate, plus list refresh, journaling, and SSE fan-out.

One ingest worker owns all detector and candidate mutations. Geo and
gallery enrichment degrade a candidate but never block its creation; they
run inline in replay mode (for a deterministic journal) and on a background
thread in live mode. Readers always see immutable snapshots.
"""

from __future__ import annotations

import concurrent.futures
import logging
import queue
import threading
from typing import Any

from . import media as media_mod
from .articles import ArticleKey, ClusterKey, ClusterMap
from .candidates import (
    Candidate,
    CandidateStore,
    Journal,
    build_cap_document,
    candidate_from_record,
    candidate_to_record,
    primary_disaster_type,
)
from .cap import CapDocument, parse_cap, render_cap
from .clock import Clock, SystemClock
from .config import ServiceConfig
from .detector import DetectorState
from .editstream import EditEvent
from .geo import centroid, fetch_cluster_coordinates
from .media import MediaGallery, SearchProvider, gallery_from_record, gallery_to_record
from .rdf import TriplePattern, TripleStore, alert_to_triples, match
from .wikigraph import (
    BuildError,
    MonitoringList,
    MonitoringListBuilder,
    serialize_monitoring_list,
)
from .wikiclient import WikiClient

log = logging.getLogger(__name__)


class MonitorEngine:
    """Owns all mutable monitoring state behind a single writer lock."""

    def __init__(
        self,
        config: ServiceConfig,
        wiki_client: WikiClient,
        providers: list[SearchProvider] | None = None,
        clock: Clock | None = None,
        journal: Journal | None = None,
    ) -> None:
        self.config = config
        self.wiki_client = wiki_client
        self.providers = providers or []
        self.clock = clock or SystemClock()
        self.journal = journal
        self.cap_config = config.resolved_cap()

        self._lock = threading.RLock()
        self._snapshot: tuple[MonitoringList, ClusterMap] | None = None
        self.detector = DetectorState(config.detector)
        self.store = CandidateStore()
        self.triples = TripleStore()
        self.galleries: dict[int, MediaGallery] = {}
        self.cap_documents: dict[int, tuple[CapDocument, bytes]] = {}

        self._seq = 0
        self._subscribers: list[queue.Queue] = []
        self._replaying_journal = False
        self.closed = threading.Event()
        self._enricher: concurrent.futures.ThreadPoolExecutor | None = None
        if not config.enrich_inline:
            self._enricher = concurrent.futures.ThreadPoolExecutor(
                max_workers=2, thread_name_prefix="enrich"
            )
        if journal is not None:
            self._replay_journal()

    # --- snapshot -----------------------------------------------------------

    @property
    def snapshot(self) -> tuple[MonitoringList, ClusterMap] | None:
        return self._snapshot

    def load_snapshot(self, monitoring: MonitoringList, clusters: ClusterMap) -> None:
        self._snapshot = (monitoring, clusters)

    def refresh_monitoring_list(self) -> MonitoringList:
        """Rebuild from the seed; a failed build never replaces a good one."""
        builder = MonitoringListBuilder(self.wiki_client, ArticleKey.parse(self.config.seed))
        try:
            monitoring, clusters, report = builder.build(built_at=self.clock.now_ms())
        except BuildError as exc:
            log.error("monitoring-list rebuild failed, keeping previous snapshot: %s", exc)
            if self._snapshot is None:
                raise
            return self._snapshot[0]
        if not report.ok:
            log.warning("monitoring-list build skipped %d articles", len(report.skipped))
            for subject, reason in report.skipped:
                log.info("  skipped %s: %s", subject, reason)
        self._snapshot = (monitoring, clusters)
        self._write_snapshot_files(monitoring, clusters)
        log.info("monitoring %d candidate Wikipedia articles", len(monitoring))
        return monitoring

    def _write_snapshot_files(self, monitoring: MonitoringList, clusters: ClusterMap) -> None:
        try:
            out = self.config.ensure_data_dir()
            for fmt in ("json", "tsv", "txt"):
                (out / f"monitoring-list.{fmt}").write_bytes(
                    serialize_monitoring_list(monitoring, fmt)
                )
            import json as json_mod

            (out / "clusters.json").write_text(
                json_mod.dumps(clusters.to_records(), ensure_ascii=False, indent=2) + "\n",
                encoding="utf-8",
            )
        except OSError as exc:
            log.warning("could not write snapshot files: %s", exc)

    # --- SSE fan-out -----------------------------------------------------------

    def subscribe(self) -> queue.Queue:
        subscriber: queue.Queue = queue.Queue(maxsize=1000)
        with self._lock:
            self._subscribers.append(subscriber)
        return subscriber

    def unsubscribe(self, subscriber: queue.Queue) -> None:
        with self._lock:
            if subscriber in self._subscribers:
                self._subscribers.remove(subscriber)

    def _publish(self, event: str, data: dict[str, Any]) -> None:
        with self._lock:
            self._seq += 1
            message = {"seq": self._seq, "event": event, "data": data}
            subscribers = list(self._subscribers)
        for subscriber in subscribers:
            try:
                subscriber.put_nowait(message)
            except queue.Full:
                log.warning("dropping SSE message for a slow subscriber")

    # --- journal -----------------------------------------------------------------

    def _journal(self, record: dict[str, Any]) -> None:
        if self.journal is not None and not self._replaying_journal:
            self.journal.append(record)

    def _replay_journal(self) -> None:
        self._replaying_journal = True
        try:
            for record in self.journal.read_all():
                kind = record["type"]
                candidate = candidate_from_record(record["candidate"])
                self.store.restore(candidate)
                if kind == "enriched" and record.get("gallery") is not None:
                    self.galleries[candidate.id] = gallery_from_record(record["gallery"])
                if kind == "confirmed":
                    xml = record["cap_xml"].encode("utf-8")
                    self.cap_documents[candidate.id] = (parse_cap(xml), xml)
                    members = frozenset(
                        ArticleKey.parse(text) for text in record["cluster_members"]
                    )
                    self._publish_alert_triples(candidate, members)
        finally:
            self._replaying_journal = False

    # --- pipeline -------------------------------------------------------------------

    def handle_edit_event(self, event: EditEvent) -> Candidate | None:
        """Process one edit; returns the open/merged candidate when spiking."""
        if self._snapshot is None:
            raise RuntimeError("no monitoring snapshot loaded")
        monitoring, clusters = self._snapshot
        roles = monitoring.lookup(event.key)
        if roles is None:
            return None
        cluster = clusters.resolve(event.key)
        with self._lock:
            self.detector.record(cluster, event.timestamp, now=event.timestamp)
            verdict = self.detector.evaluate(cluster, now=event.timestamp)
            if not verdict.spiking:
                return None
            candidate, created = self.store.open_candidate(
                verdict, roles, centroid=None, now=event.timestamp
            )
            kind = "opened" if created else "merged"
            self._journal({"type": kind, "candidate": candidate_to_record(candidate)})
        self._publish(f"candidate_{kind}", self.candidate_view(candidate.id))
        self._schedule_enrichment(candidate.id, cluster, event.key, event.timestamp)
        return self.store.get(candidate.id)

    def _schedule_enrichment(self, candidate_id: int, cluster: ClusterKey,
                             trigger: ArticleKey, event_ts: int) -> None:
        if self._enricher is None:
            self._enrich(candidate_id, cluster, trigger, event_ts)
        else:
            self._enricher.submit(self._enrich_safely, candidate_id, cluster,
                                  trigger, event_ts)

    def _enrich_safely(self, *args) -> None:
        try:
            self._enrich(*args)
        except Exception:
            log.exception("candidate enrichment failed")

    def _enrich(self, candidate_id: int, cluster: ClusterKey,
                trigger: ArticleKey, event_ts: int) -> None:
        """Geo + gallery follow-up; failures degrade, never abort."""
        assert self._snapshot is not None
        members = sorted(self._snapshot[1].members(cluster))
        center = None
        try:
            points = fetch_cluster_coordinates(
                trigger, [m for m in members if m != trigger], self.wiki_client
            )
            center = centroid(points)
        except Exception:
            log.exception("geo lookup failed for %s", cluster)

        gallery = None
        if self.providers:
            titles_by_language: dict[str, list[str]] = {}
            for member in members:
                titles_by_language.setdefault(member.language, []).append(member.title)
            try:
                report = media_mod.SearchReport()
                items = media_mod.search_all(self.providers, titles_by_language, report)
                for provider, term, error in report.failures:
                    log.warning("provider %s failed for %s: %s", provider, term, error)
                items = media_mod.dedup(items)
                ranked = media_mod.rank(items, self.config.rank_weights, now=event_ts)
                gallery = media_mod.build_gallery(
                    ranked[: self.config.gallery_size],
                    self.config.gallery_style,
                    columns=self.config.gallery_columns,
                )
            except Exception:
                log.exception("gallery build failed for %s", cluster)

        with self._lock:
            if gallery is not None:
                self.galleries[candidate_id] = gallery
            candidate = self.store.attach_gallery(
                candidate_id,
                str(candidate_id) if gallery is not None else None,
                centroid=center,
            )
            self._journal({
                "type": "enriched",
                "candidate": candidate_to_record(candidate),
                "gallery": gallery_to_record(gallery) if gallery is not None else None,
            })
        self._publish("candidate_enriched", self.candidate_view(candidate_id))

    # --- triage -----------------------------------------------------------------------

    def confirm(self, candidate_id: int, operator: str | None) -> tuple[Candidate, CapDocument]:
        with self._lock:
            candidate = self.store.confirm(candidate_id, operator, now=self.clock.now_ms())
            document = build_cap_document(candidate, self.cap_config)
            xml = render_cap(document)
            self.cap_documents[candidate_id] = (document, xml)
            members = (
                self._snapshot[1].members(candidate.cluster)
                if self._snapshot is not None else frozenset({candidate.cluster})
            )
            self._publish_alert_triples(candidate, members)
            self._journal({
                "type": "confirmed",
                "candidate": candidate_to_record(candidate),
                "cluster_members": sorted(str(m) for m in members),
                "cap_xml": xml.decode("utf-8"),
            })
        self._publish("candidate_confirmed", self.candidate_view(candidate_id))
        return candidate, document

    def dismiss(self, candidate_id: int, operator: str | None) -> Candidate:
        with self._lock:
            candidate = self.store.dismiss(candidate_id, operator, now=self.clock.now_ms())
            self._journal({
                "type": "dismissed",
                "candidate": candidate_to_record(candidate),
            })
        self._publish("candidate_dismissed", self.candidate_view(candidate_id))
        return candidate

    def _publish_alert_triples(self, candidate: Candidate,
                               members: frozenset[ArticleKey]) -> None:
        document, _ = self.cap_documents[candidate.id]
        triples = alert_to_triples(
            members,
            sorted({role.disaster_type for role in candidate.roles}),
            document.identifier,
            gallery=self.galleries.get(candidate.id),
            vocab=self.config.vocab,
        )
        self.triples.add(triples)

    # --- read views ----------------------------------------------------------------------

    def candidate_view(self, candidate_id: int) -> dict[str, Any]:
        candidate = self.store.get(candidate_id)
        verdict = candidate.verdict
        view = {
            "id": candidate.id,
            "cluster": str(candidate.cluster),
            "state": candidate.state.value,
            "disaster_type": primary_disaster_type(candidate.roles),
            "roles": sorted(
                ({"kind": role.kind.value, "disaster_type": role.disaster_type}
                 for role in candidate.roles),
                key=lambda r: (r["kind"], r["disaster_type"]),
            ),
            "verdict": {
                "spiking": verdict.spiking,
                "n": verdict.n,
                "latest_interval_ms": verdict.latest_interval_ms,
                "sigma_ms": verdict.sigma_ms,
                "smoothed_ms": verdict.smoothed_ms,
                "threshold_ms": verdict.threshold_ms,
                "evaluated_at": verdict.evaluated_at,
                "insufficient_data": verdict.insufficient_data,
            },
            "centroid": (
                {"lat": candidate.centroid.lat, "lon": candidate.centroid.lon}
                if candidate.centroid is not None else None
            ),
            "gallery": f"/galleries/{candidate.id}" if candidate.id in self.galleries else None,
            "created_at": candidate.created_at,
            "decided_at": candidate.decided_at,
            "operator": candidate.operator,
            "identifier": None,
            "cap": None,
        }
        if candidate.id in self.cap_documents:
            document, _ = self.cap_documents[candidate.id]
            view["identifier"] = document.identifier
            view["cap"] = f"/alerts/{candidate.id}/cap"
        return view

    def candidates_view(self) -> list[dict[str, Any]]:
        return [self.candidate_view(c.id) for c in self.store.all()]

    def alerts_view(self) -> list[dict[str, Any]]:
        return [self.candidate_view(c.id) for c in self.store.confirmed()]

    def gallery_view(self, candidate_id: int) -> dict[str, Any] | None:
        gallery = self.galleries.get(candidate_id)
        return gallery_to_record(gallery) if gallery is not None else None

    def cap_xml(self, candidate_id: int) -> bytes | None:
        entry = self.cap_documents.get(candidate_id)
        return entry[1] if entry is not None else None

    def fragment(self, pattern: TriplePattern, page: int):
        return match(
            self.triples, pattern, page=page,
            page_size=self.config.page_size, base_url=self.config.base_url,
        )

    def close(self) -> None:
        self.closed.set()
        if self._enricher is not None:
            self._enricher.shutdown(wait=True)
