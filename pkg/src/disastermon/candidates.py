"""Candidate lifecycle with a mandatory human gate, CAP construction for
confirmed alerts, and the append-only journal that makes it all replayable.

A spiking cluster opens exactly one candidate at a time: further spikes
merge into the open candidate instead of duplicating it. Only a human
confirm turns a candidate into an alert (and a CAP document); dismissal is
final. Every mutation is journaled as one JSON line so a restart replays
back to the exact pre-crash state.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable

from .articles import ArticleKey, ClusterKey
from .cap import CapArea, CapDocument, format_cap_timestamp, format_circle
from .detector import SpikeVerdict
from .geo import GeoPoint
from .wikigraph import Role, RoleKind


class CandidateState(str, Enum):
    OPEN = "open"
    CONFIRMED = "confirmed"
    DISMISSED = "dismissed"


class CandidateError(Exception):
    pass


class UnknownCandidate(CandidateError):
    pass


class InvalidTransition(CandidateError):
    pass


@dataclass(frozen=True)
class Candidate:
    id: int
    cluster: ClusterKey
    roles: frozenset[Role]
    verdict: SpikeVerdict
    centroid: GeoPoint | None = None
    gallery_ref: str | None = None
    state: CandidateState = CandidateState.OPEN
    created_at: int = 0
    decided_at: int | None = None
    operator: str | None = None

    def __post_init__(self) -> None:
        if (self.decided_at is not None) != (self.state is not CandidateState.OPEN):
            raise ValueError("decided_at is set exactly when the candidate is decided")


# Roles ranked by how strongly they tie an article to a type.
_ROLE_PRECEDENCE = {
    RoleKind.MUTUAL: 0,
    RoleKind.INBOUND: 1,
    RoleKind.OUTBOUND: 2,
    RoleKind.REDIRECT: 3,
}


def primary_disaster_type(roles: Iterable[Role]) -> str:
    """The type the candidate is reported as (strongest role wins)."""
    ordered = sorted(roles, key=lambda r: (_ROLE_PRECEDENCE[r.kind], r.disaster_type))
    if not ordered:
        raise ValueError("candidate has no roles")
    return ordered[0].disaster_type


DEFAULT_CATEGORY_MAP = {
    "Flood": "Geo",
    "Earthquake": "Geo",
    "Tsunami": "Geo",
    "Volcanic eruption": "Geo",
    "Impact event": "Geo",
    "Limnic eruption": "Geo",
    "Cyclone": "Met",
    "Tropical cyclone": "Met",
    "Extratropical cyclone": "Met",
    "Meteorological disaster": "Met",
    "Tornado": "Met",
    "Heat wave": "Met",
    "Drought": "Met",
    "Blizzard": "Met",
    "Hail": "Met",
    "Solar flare": "Met",
    "Gamma-ray burst": "Met",
    "Wildfire": "Fire",
    "Epidemic": "Health",
}


@dataclass(frozen=True)
class CapConfig:
    """Defaults for documents we emit; Exercise status guards against
    accidentally publishing real-looking alerts."""

    sender: str = "alerts@disastermon.invalid"
    sender_name: str = "Wikipedia disaster monitor"
    status: str = "Exercise"
    msg_type: str = "Alert"
    scope: str = "Public"
    identifier_prefix: str = "WDM"
    alert_level: str = "Green"
    circle_radius_km: float = 50.0
    public_base_url: str = "http://localhost:8420"
    category_map: tuple[tuple[str, str], ...] = tuple(sorted(DEFAULT_CATEGORY_MAP.items()))
    default_category: str = "Other"

    def category_for(self, disaster_type: str) -> str:
        return dict(self.category_map).get(disaster_type, self.default_category)


def build_cap_document(candidate: Candidate, config: CapConfig) -> CapDocument:
    """Render a confirmed candidate's alert fields into a CapDocument.

    Severity-style judgments are not derivable yet, so the verdict's raw
    sigma and latest-interval numbers are exposed verbatim as a parameter.
    """
    if candidate.state is not CandidateState.CONFIRMED:
        raise InvalidTransition("CAP documents exist only for confirmed candidates")
    disaster_type = primary_disaster_type(candidate.roles)
    verdict = candidate.verdict
    severity_text = (
        f"latest interval {verdict.latest_interval_ms:.0f} ms"
        f" vs sigma {verdict.sigma_ms:.0f} ms"
        if verdict.sigma_ms is not None and verdict.latest_interval_ms is not None
        else ""
    )
    link = f"{config.public_base_url}/candidates/{candidate.id}"
    if candidate.centroid is not None:
        area = CapArea(
            area_desc=f"{config.circle_radius_km:g} km around the cluster centroid",
            circle=format_circle(
                candidate.centroid.lat, candidate.centroid.lon, config.circle_radius_km
            ),
        )
    else:
        area = CapArea()
    return CapDocument(
        identifier=f"{config.identifier_prefix}_{candidate.id}",
        sender=config.sender,
        sent=format_cap_timestamp(candidate.decided_at or 0),
        status=config.status,
        msg_type=config.msg_type,
        scope=config.scope,
        incidents=str(candidate.id),
        category=config.category_for(disaster_type),
        event=disaster_type,
        urgency="Unknown",
        severity="Unknown",
        certainty="Unknown",
        sender_name=config.sender_name,
        web=link,
        parameters=(
            ("eventid", str(candidate.id)),
            ("alertlevel", config.alert_level),
            ("link", link),
            ("country", ""),
            ("severity", severity_text),
            ("population", ""),
        ),
        area=area,
    )


# --- store ---------------------------------------------------------------------


class CandidateStore:
    """Single-writer candidate registry with snapshot reads.

    ``listener`` (if set) receives (event_name, candidate) after each
    mutation; the engine uses it for journaling and SSE pushes.
    """

    def __init__(self, listener: Callable[[str, Candidate], None] | None = None) -> None:
        self._lock = threading.RLock()
        self._by_id: dict[int, Candidate] = {}
        self._open_by_cluster: dict[ClusterKey, int] = {}
        self._next_id = 1
        self.listener = listener

    def _emit(self, event: str, candidate: Candidate) -> None:
        if self.listener is not None:
            self.listener(event, candidate)

    def open_candidate(
        self,
        verdict: SpikeVerdict,
        roles: frozenset[Role],
        centroid: GeoPoint | None,
        now: int,
    ) -> tuple[Candidate, bool]:
        """Open a candidate for the verdict's cluster, or merge into the
        existing open one. Returns (candidate, created)."""
        if not verdict.spiking:
            raise CandidateError("only spiking verdicts can open candidates")
        with self._lock:
            existing_id = self._open_by_cluster.get(verdict.cluster)
            if existing_id is not None:
                merged = replace(
                    self._by_id[existing_id],
                    verdict=verdict,
                    roles=self._by_id[existing_id].roles | roles,
                    centroid=centroid or self._by_id[existing_id].centroid,
                )
                self._by_id[existing_id] = merged
                self._emit("candidate_merged", merged)
                return merged, False
            candidate = Candidate(
                id=self._next_id,
                cluster=verdict.cluster,
                roles=roles,
                verdict=verdict,
                centroid=centroid,
                created_at=now,
            )
            self._next_id += 1
            self._by_id[candidate.id] = candidate
            self._open_by_cluster[verdict.cluster] = candidate.id
            self._emit("candidate_opened", candidate)
            return candidate, True

    def attach_gallery(self, candidate_id: int, gallery_ref: str | None,
                       centroid: GeoPoint | None = None) -> Candidate:
        with self._lock:
            candidate = self._require(candidate_id)
            enriched = replace(
                candidate,
                gallery_ref=gallery_ref if gallery_ref is not None else candidate.gallery_ref,
                centroid=centroid if centroid is not None else candidate.centroid,
            )
            self._by_id[candidate_id] = enriched
            self._emit("candidate_enriched", enriched)
            return enriched

    def _require(self, candidate_id: int) -> Candidate:
        candidate = self._by_id.get(candidate_id)
        if candidate is None:
            raise UnknownCandidate(f"no candidate {candidate_id}")
        return candidate

    def _decide(self, candidate_id: int, state: CandidateState,
                operator: str | None, now: int) -> Candidate:
        with self._lock:
            candidate = self._require(candidate_id)
            if candidate.state is not CandidateState.OPEN:
                raise InvalidTransition(
                    f"candidate {candidate_id} already {candidate.state.value}"
                )
            decided = replace(
                candidate, state=state, decided_at=now, operator=operator
            )
            self._by_id[candidate_id] = decided
            self._open_by_cluster.pop(candidate.cluster, None)
            return decided

    def confirm(self, candidate_id: int, operator: str | None, now: int) -> Candidate:
        decided = self._decide(candidate_id, CandidateState.CONFIRMED, operator, now)
        self._emit("candidate_confirmed", decided)
        return decided

    def dismiss(self, candidate_id: int, operator: str | None, now: int) -> Candidate:
        decided = self._decide(candidate_id, CandidateState.DISMISSED, operator, now)
        self._emit("candidate_dismissed", decided)
        return decided

    def get(self, candidate_id: int) -> Candidate:
        with self._lock:
            return self._require(candidate_id)

    def all(self) -> list[Candidate]:
        with self._lock:
            return [self._by_id[i] for i in sorted(self._by_id)]

    def confirmed(self) -> list[Candidate]:
        return [c for c in self.all() if c.state is CandidateState.CONFIRMED]

    def restore(self, candidate: Candidate, next_id: int | None = None) -> None:
        """Place a candidate directly (journal replay only)."""
        with self._lock:
            self._by_id[candidate.id] = candidate
            if candidate.state is CandidateState.OPEN:
                self._open_by_cluster[candidate.cluster] = candidate.id
            else:
                self._open_by_cluster.pop(candidate.cluster, None)
            self._next_id = max(self._next_id, candidate.id + 1)
            if next_id is not None:
                self._next_id = max(self._next_id, next_id)


# --- journal --------------------------------------------------------------------


def verdict_to_record(verdict: SpikeVerdict) -> dict[str, Any]:
    return {
        "cluster": str(verdict.cluster),
        "spiking": verdict.spiking,
        "n": verdict.n,
        "latest_interval_ms": verdict.latest_interval_ms,
        "sigma_ms": verdict.sigma_ms,
        "smoothed_ms": verdict.smoothed_ms,
        "threshold_ms": verdict.threshold_ms,
        "evaluated_at": verdict.evaluated_at,
        "insufficient_data": verdict.insufficient_data,
    }


def verdict_from_record(record: dict[str, Any]) -> SpikeVerdict:
    return SpikeVerdict(
        cluster=ArticleKey.parse(record["cluster"]),
        spiking=record["spiking"],
        n=record["n"],
        latest_interval_ms=record["latest_interval_ms"],
        sigma_ms=record["sigma_ms"],
        smoothed_ms=record["smoothed_ms"],
        threshold_ms=record["threshold_ms"],
        evaluated_at=record["evaluated_at"],
        insufficient_data=record["insufficient_data"],
    )


def candidate_to_record(candidate: Candidate) -> dict[str, Any]:
    return {
        "id": candidate.id,
        "cluster": str(candidate.cluster),
        "roles": sorted([role.kind.value, role.disaster_type] for role in candidate.roles),
        "verdict": verdict_to_record(candidate.verdict),
        "centroid": (
            {"lat": candidate.centroid.lat, "lon": candidate.centroid.lon}
            if candidate.centroid is not None else None
        ),
        "gallery_ref": candidate.gallery_ref,
        "state": candidate.state.value,
        "created_at": candidate.created_at,
        "decided_at": candidate.decided_at,
        "operator": candidate.operator,
    }


def candidate_from_record(record: dict[str, Any]) -> Candidate:
    centroid = record.get("centroid")
    return Candidate(
        id=record["id"],
        cluster=ArticleKey.parse(record["cluster"]),
        roles=frozenset(
            Role(RoleKind(kind), type_name) for kind, type_name in record["roles"]
        ),
        verdict=verdict_from_record(record["verdict"]),
        centroid=GeoPoint(centroid["lat"], centroid["lon"]) if centroid else None,
        gallery_ref=record.get("gallery_ref"),
        state=CandidateState(record["state"]),
        created_at=record["created_at"],
        decided_at=record.get("decided_at"),
        operator=record.get("operator"),
    )


class Journal:
    """Append-only NDJSON log; lines are compact and key-sorted so identical
    histories produce byte-identical files."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def append(self, record: dict[str, Any]) -> None:
        line = json.dumps(record, ensure_ascii=False, sort_keys=True,
                          separators=(",", ":"))
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()

    def read_all(self) -> list[dict[str, Any]]:
        if not self.path.exists():
            return []
        records = []
        with self.path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
        return records
