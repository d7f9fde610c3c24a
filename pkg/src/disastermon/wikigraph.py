"""Builds the disasters list and monitoring list from Wikipedia's link graph.

The pipeline starts from a seed article's Main-article hatnotes (the
disaster types), expands each type to all language versions and their
redirects (the "disasters list"), then collects the in- and outbound links
of every one of those articles. Articles appearing on both sides of a type
get the mutual role. Partial failures never abort a build; they are
collected into a BuildReport.
"""

from __future__ import annotations

import enum
import json
import logging
import re
import time
from dataclasses import dataclass, field

from .articles import ArticleKey, ClusterMap
from .wikiclient import WikiClient, WikiClientError

log = logging.getLogger(__name__)


class RoleKind(str, enum.Enum):
    REDIRECT = "redirect"
    INBOUND = "inbound"
    OUTBOUND = "outbound"
    MUTUAL = "mutual"


@dataclass(frozen=True, slots=True, order=True)
class Role:
    """How an article relates to one disaster type."""

    kind: RoleKind
    disaster_type: str


@dataclass(frozen=True)
class DisasterType:
    """One disaster-type article with all its language versions and redirects."""

    name: str
    members: frozenset[ArticleKey]
    redirects: frozenset[ArticleKey] = frozenset()

    def __post_init__(self) -> None:
        if not self.redirects <= self.members:
            raise ValueError("redirects must be a subset of members")


@dataclass
class BuildReport:
    """Articles skipped during a build and why."""

    skipped: list[tuple[str, str]] = field(default_factory=list)

    def record(self, subject: ArticleKey | str, reason: str) -> None:
        self.skipped.append((str(subject), reason))
        log.warning("build skipped %s: %s", subject, reason)

    @property
    def ok(self) -> bool:
        return not self.skipped


@dataclass(frozen=True)
class MonitoringList:
    """Immutable snapshot mapping monitored articles to their roles."""

    entries: dict[ArticleKey, frozenset[Role]]
    built_at: int
    seed: ArticleKey

    def lookup(self, key: ArticleKey) -> frozenset[Role] | None:
        return self.entries.get(key)

    def __len__(self) -> int:
        return len(self.entries)


class BuildError(Exception):
    """The whole build failed; any previous snapshot should be kept."""


# {{Main|...}} and {{Main article|...}} hatnotes; args split on the pipe.
_MAIN_TEMPLATE = re.compile(r"\{\{\s*[Mm]ain(?:\s+[Aa]rticle)?\s*(\|[^{}]*)?\}\}")


def extract_main_article_links(seed_wikitext: str) -> list[str]:
    """Titles referenced by Main-article hatnotes, first-appearance order.

    Named arguments (display labels like ``l1=``) and empty arguments are
    skipped with a warning; an empty result usually means a misconfigured
    seed article.
    """
    titles: list[str] = []
    seen: set[str] = set()
    for match in _MAIN_TEMPLATE.finditer(seed_wikitext):
        args = match.group(1)
        if not args:
            log.warning("main-article hatnote without arguments: %s", match.group(0))
            continue
        for arg in args.lstrip("|").split("|"):
            arg = arg.strip()
            if not arg:
                continue
            if "=" in arg:
                continue
            title = arg.replace("_", " ").strip()
            dedup_key = title.lower()
            if dedup_key in seen:
                continue
            seen.add(dedup_key)
            titles.append(title)
    return titles


def build_disasters_list(
    types: list[str], client: WikiClient, language: str = "en"
) -> tuple[list[DisasterType], BuildReport]:
    """Expand each type title to language versions plus all their redirects.

    A type whose language-link fetch fails is skipped entirely; a version
    whose redirect fetch fails keeps the version but loses its redirects.
    Raises BuildError when nothing at all could be built.
    """
    if not types:
        raise BuildError("no disaster types given")
    report = BuildReport()
    out: list[DisasterType] = []
    for name in types:
        root = ArticleKey(language, name)
        try:
            versions = [root, *client.langlinks(root)]
        except WikiClientError as exc:
            report.record(root, f"langlinks: {exc}")
            continue
        members: set[ArticleKey] = set()
        redirects: set[ArticleKey] = set()
        for version in versions:
            if version in members:
                continue
            members.add(version)
            try:
                for redirect in client.redirects(version):
                    redirects.add(redirect)
                    members.add(redirect)
            except WikiClientError as exc:
                report.record(version, f"redirects: {exc}")
        out.append(DisasterType(name=name, members=frozenset(members),
                                redirects=frozenset(redirects)))
    if not out:
        raise BuildError(f"all {len(types)} disaster types failed to build")
    return out, report


def build_monitoring_list(
    disasters: list[DisasterType],
    client: WikiClient,
    seed: ArticleKey,
    built_at: int | None = None,
    report: BuildReport | None = None,
) -> MonitoringList:
    """Assign inbound/outbound/mutual/redirect roles from the link structure.

    An article enters the list once it earns at least one role; in- and
    outbound roles of the same type combine into the mutual role.
    """
    report = report if report is not None else BuildReport()
    roles: dict[ArticleKey, set[Role]] = {}

    def add(key: ArticleKey, kind: RoleKind, type_name: str) -> None:
        roles.setdefault(key, set()).add(Role(kind, type_name))

    for disaster in disasters:
        for redirect in disaster.redirects:
            add(redirect, RoleKind.REDIRECT, disaster.name)
        for member in sorted(disaster.members):
            try:
                for inbound in client.backlinks(member):
                    add(inbound, RoleKind.INBOUND, disaster.name)
            except WikiClientError as exc:
                report.record(member, f"backlinks: {exc}")
            try:
                for outbound in client.outlinks(member):
                    add(outbound, RoleKind.OUTBOUND, disaster.name)
            except WikiClientError as exc:
                report.record(member, f"outlinks: {exc}")

    for key, role_set in roles.items():
        inbound_types = {r.disaster_type for r in role_set if r.kind is RoleKind.INBOUND}
        outbound_types = {r.disaster_type for r in role_set if r.kind is RoleKind.OUTBOUND}
        for type_name in inbound_types & outbound_types:
            role_set.add(Role(RoleKind.MUTUAL, type_name))

    entries = {key: frozenset(role_set) for key, role_set in roles.items()}
    return MonitoringList(
        entries=entries,
        built_at=built_at if built_at is not None else int(time.time() * 1000),
        seed=seed,
    )


def build_cluster_map(
    disasters: list[DisasterType],
    monitoring: MonitoringList,
    client: WikiClient,
    report: BuildReport | None = None,
) -> ClusterMap:
    """Language-link clusters for every monitored article, fixed at build time.

    Disaster-type versions cluster from the lists already fetched; every
    monitoring entry additionally gets one langlinks call here so the hot
    path never has to. Lookup failures leave the article in a singleton
    cluster.
    """
    report = report if report is not None else BuildReport()
    clusters = ClusterMap()
    for disaster in disasters:
        versions = disaster.members - disaster.redirects
        clusters.add_group(sorted(versions))
    for key in sorted(monitoring.entries):
        try:
            links = client.langlinks(key)
        except WikiClientError as exc:
            report.record(key, f"cluster langlinks: {exc}")
            continue
        if links:
            clusters.add_group([key, *links])
    return clusters


class MonitoringListBuilder:
    """One-call build of (monitoring list, cluster map, report) from a seed."""

    def __init__(self, client: WikiClient, seed: ArticleKey) -> None:
        self.client = client
        self.seed = seed

    def build(self, built_at: int | None = None) -> tuple[MonitoringList, ClusterMap, BuildReport]:
        report = BuildReport()
        try:
            wikitext = self.client.wikitext(self.seed)
        except WikiClientError as exc:
            raise BuildError(f"seed fetch failed: {exc}") from exc
        types = extract_main_article_links(wikitext)
        if not types:
            raise BuildError(f"seed {self.seed} yielded no disaster types")
        disasters, type_report = build_disasters_list(
            types, self.client, language=self.seed.language
        )
        report.skipped.extend(type_report.skipped)
        monitoring = build_monitoring_list(
            disasters, self.client, seed=self.seed, built_at=built_at, report=report
        )
        clusters = build_cluster_map(disasters, monitoring, self.client, report=report)
        return monitoring, clusters, report


SERIALIZATION_FORMATS = ("json", "tsv", "txt")


def serialize_monitoring_list(monitoring: MonitoringList, fmt: str) -> bytes:
    """Render the list as json (lossless), tsv or txt (lossy projections)."""
    if fmt == "json":
        entries = {
            str(key): {
                type_name: sorted(
                    role.kind.value for role in role_set if role.disaster_type == type_name
                )
                for type_name in sorted({role.disaster_type for role in role_set})
            }
            for key, role_set in sorted(monitoring.entries.items())
        }
        doc = {
            "seed": str(monitoring.seed),
            "built_at": monitoring.built_at,
            "entries": entries,
        }
        return (json.dumps(doc, ensure_ascii=False, indent=2, sort_keys=True) + "\n").encode()
    if fmt == "tsv":
        rows = []
        for key, role_set in sorted(monitoring.entries.items()):
            for role in sorted(role_set):
                rows.append(f"{key}\t{role.disaster_type}\t{role.kind.value}")
        return ("\n".join(rows) + ("\n" if rows else "")).encode()
    if fmt == "txt":
        keys = sorted(str(key) for key in monitoring.entries)
        return ("\n".join(keys) + ("\n" if keys else "")).encode()
    raise ValueError(f"unknown monitoring-list format: {fmt!r}")


def deserialize_monitoring_list(data: bytes) -> MonitoringList:
    """Inverse of the json serialization."""
    doc = json.loads(data.decode("utf-8"))
    entries: dict[ArticleKey, frozenset[Role]] = {}
    for key_text, types in doc["entries"].items():
        roles = {
            Role(RoleKind(kind), type_name)
            for type_name, kinds in types.items()
            for kind in kinds
        }
        entries[ArticleKey.parse(key_text)] = frozenset(roles)
    return MonitoringList(
        entries=entries,
        built_at=doc["built_at"],
        seed=ArticleKey.parse(doc["seed"]),
    )
