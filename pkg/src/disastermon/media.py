"""Social-media search, dedup, ranking, and media-gallery assembly.

Providers are pluggable: a file-backed fixture provider for tests and a
generic HTTP provider driven by a URL template plus a response field map.
The scoring formula and the gallery packer are declared simple substitutes
for more elaborate ranking/clustering work and sit behind hooks so they can
be swapped without touching the pipeline.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterable

import requests

log = logging.getLogger(__name__)

SIX_HOURS_MS = 6 * 60 * 60 * 1000


@dataclass(frozen=True)
class MediaItem:
    media_url: str
    micropost_url: str = ""
    poster_url: str = ""
    publication_date: int = 0          # epoch ms
    kind: str = "photo"                # photo | video
    user_profile_url: str = ""
    likes: int | None = None
    shares: int | None = None
    text_html: str = ""
    text_plain: str = ""
    provider: str = ""

    def __post_init__(self) -> None:
        if not self.media_url:
            raise ValueError("media item needs a media_url")
        if self.kind not in ("photo", "video"):
            raise ValueError(f"unknown media kind: {self.kind!r}")
        for count in (self.likes, self.shares):
            if count is not None and count < 0:
                raise ValueError("social-interaction counts must be >= 0")


class ProviderError(Exception):
    pass


class SearchProvider:
    """One online social networking site behind a uniform search call."""

    name: str = "abstract"

    def search(self, term: str, language: str) -> list[MediaItem]:
        raise NotImplementedError


def parse_timestamp_ms(value: Any) -> int:
    """Epoch ms from an int/float or an ISO-8601 string (Z accepted)."""
    if isinstance(value, (int, float)):
        return int(value)
    if isinstance(value, str):
        text = value.replace("Z", "+00:00")
        parsed = datetime.fromisoformat(text)
        if parsed.tzinfo is None:
            parsed = parsed.replace(tzinfo=timezone.utc)
        return int(parsed.timestamp() * 1000)
    raise ValueError(f"unsupported timestamp value: {value!r}")


def item_from_record(record: dict[str, Any], provider: str) -> MediaItem:
    return MediaItem(
        media_url=record["media_url"],
        micropost_url=record.get("micropost_url", ""),
        poster_url=record.get("poster_url", ""),
        publication_date=parse_timestamp_ms(record.get("publication_date", 0)),
        kind=record.get("kind", "photo"),
        user_profile_url=record.get("user_profile_url", ""),
        likes=record.get("likes"),
        shares=record.get("shares"),
        text_html=record.get("text_html", ""),
        text_plain=record.get("text_plain", ""),
        provider=provider,
    )


class FixtureSearchProvider(SearchProvider):
    """Canned results keyed "language:term" from a JSON file or dict."""

    def __init__(self, name: str, results: dict[str, list[dict[str, Any]]],
                 failures: set[str] | None = None) -> None:
        self.name = name
        self._results = results
        self._failures = failures or set()

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureSearchProvider":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(doc["name"], doc.get("results", {}),
                   set(doc.get("failures", [])))

    def search(self, term: str, language: str) -> list[MediaItem]:
        key = f"{language}:{term}"
        if key in self._failures:
            raise ProviderError(f"{self.name} failing for {key}")
        return [item_from_record(r, self.name) for r in self._results.get(key, [])]


def _dig(record: Any, path: str) -> Any:
    value = record
    for part in path.split("."):
        if not isinstance(value, dict) or part not in value:
            return None
        value = value[part]
    return value


class HttpSearchProvider(SearchProvider):
    """Generic JSON-over-HTTP search configured by URL template + field map.

    ``url_template`` gets ``{term}`` and ``{language}``; ``items_path``
    locates the result list in the response; ``field_map`` maps MediaItem
    fields to dotted paths inside each result record.
    """

    def __init__(self, name: str, url_template: str,
                 field_map: dict[str, str],
                 items_path: str = "items",
                 session: Any | None = None,
                 timeout_s: float = 15.0) -> None:
        self.name = name
        self.url_template = url_template
        self.field_map = field_map
        self.items_path = items_path
        self.timeout_s = timeout_s
        self._session = session or requests.Session()

    def search(self, term: str, language: str) -> list[MediaItem]:
        url = self.url_template.format(
            term=requests.utils.quote(term), language=language
        )
        try:
            response = self._session.get(url, timeout=self.timeout_s)
            response.raise_for_status()
            data = response.json()
        except Exception as exc:
            raise ProviderError(f"{self.name} search failed: {exc}") from exc
        raw_items = _dig(data, self.items_path) if self.items_path else data
        items = []
        for raw in raw_items or []:
            record = {
                field_name: _dig(raw, path)
                for field_name, path in self.field_map.items()
                if _dig(raw, path) is not None
            }
            try:
                items.append(item_from_record(record, self.name))
            except (KeyError, ValueError) as exc:
                log.warning("%s: skipping malformed result: %s", self.name, exc)
        return items


def load_providers(path: str | Path) -> list[SearchProvider]:
    """Provider config file: a JSON list of fixture/http provider entries.

    Relative fixture paths resolve against the config file's directory.
    """
    config_path = Path(path)
    entries = json.loads(config_path.read_text(encoding="utf-8"))
    providers: list[SearchProvider] = []
    for entry in entries:
        kind = entry.get("kind", "fixture")
        if kind == "fixture":
            fixture_path = Path(entry["path"])
            if not fixture_path.is_absolute():
                fixture_path = config_path.parent / fixture_path
            providers.append(FixtureSearchProvider.from_file(fixture_path))
        elif kind == "http":
            providers.append(HttpSearchProvider(
                name=entry["name"],
                url_template=entry["url_template"],
                field_map=entry["field_map"],
                items_path=entry.get("items_path", "items"),
            ))
        else:
            raise ValueError(f"unknown provider kind: {kind!r}")
    return providers


# --- search-term matching ----------------------------------------------------

_TRAILING_PARENTHETICAL = re.compile(r"\s*\([^()]*\)\s*$")


def strip_disambiguation(title: str) -> str:
    """Search term for a title: spaces, minus one trailing parenthetical."""
    term = title.replace("_", " ").strip()
    return _TRAILING_PARENTHETICAL.sub("", term).strip()


def language_match(item_language: str, term_language: str) -> bool:
    """True iff the primary language subtags match, case-insensitively."""
    primary = lambda code: code.strip().lower().split("-")[0]
    return primary(item_language) == primary(term_language) != ""


# --- pipeline ------------------------------------------------------------------

@dataclass
class SearchReport:
    failures: list[tuple[str, str, str]] = field(default_factory=list)  # provider, term, error

    @property
    def ok(self) -> bool:
        return not self.failures


def search_all(
    providers: list[SearchProvider],
    titles_by_language: dict[str, list[str]],
    report: SearchReport | None = None,
) -> list[MediaItem]:
    """Fan every (language, stripped title) out to every provider.

    Provider failures are recorded and skipped; duplicates across providers
    survive until dedup.
    """
    if not providers:
        raise ValueError("search_all needs at least one provider")
    report = report if report is not None else SearchReport()
    items: list[MediaItem] = []
    for provider in sorted(providers, key=lambda p: p.name):
        for language in sorted(titles_by_language):
            for title in titles_by_language[language]:
                term = strip_disambiguation(title)
                try:
                    items.extend(provider.search(term, language))
                except ProviderError as exc:
                    report.failures.append((provider.name, f"{language}:{term}", str(exc)))
    return items


def _normalize_url(url: str) -> str:
    scheme, sep, rest = url.partition("://")
    rest = rest.split("#", 1)[0].rstrip("/")
    host, slash, path = rest.partition("/")
    return f"{scheme.lower()}{sep}{host.lower()}{slash}{path}" if sep else url


def _prefer(a: MediaItem, b: MediaItem) -> MediaItem:
    """Duplicate survivor: most likes, then newest, then first seen."""
    a_key = (a.likes or 0, a.publication_date)
    b_key = (b.likes or 0, b.publication_date)
    return b if b_key > a_key else a


FingerprintHook = Callable[[MediaItem], str | None]


def dedup(items: list[MediaItem], fingerprint: FingerprintHook | None = None) -> list[MediaItem]:
    """Remove exact duplicates by normalized media URL, then near-duplicates
    by fingerprint equality when a fingerprint hook can supply one.

    Output preserves first-seen order of the surviving items.
    """
    def collapse(keyed: list[tuple[Any, MediaItem]]) -> list[MediaItem]:
        best: dict[Any, MediaItem] = {}
        first_pos: dict[Any, int] = {}
        unkeyed: list[tuple[int, MediaItem]] = []
        for index, (key, item) in enumerate(keyed):
            if key is None:
                unkeyed.append((index, item))
            elif key in best:
                best[key] = _prefer(best[key], item)
            else:
                best[key] = item
                first_pos[key] = index
        merged = [(pos, best[key]) for key, pos in first_pos.items()] + unkeyed
        return [item for _, item in sorted(merged, key=lambda pair: pair[0])]

    stage1 = collapse([(_normalize_url(item.media_url), item) for item in items])
    if fingerprint is None:
        return stage1
    return collapse([(fingerprint(item), item) for item in stage1])


@dataclass(frozen=True)
class RankWeights:
    likes: float = 1.0
    shares: float = 2.0
    recency: float = 5.0
    recency_halflife_ms: float = SIX_HOURS_MS


def score_item(item: MediaItem, weights: RankWeights, now: int) -> float:
    age = max(0, now - item.publication_date)
    return (
        weights.likes * (item.likes or 0)
        + weights.shares * (item.shares or 0)
        + weights.recency * math.exp(-age / weights.recency_halflife_ms)
    )


def rank(items: list[MediaItem], weights: RankWeights, now: int) -> list[MediaItem]:
    """Stable sort by descending score; ties go to newer, then URL order."""
    return sorted(
        items,
        key=lambda item: (
            -score_item(item, weights, now),
            -item.publication_date,
            item.media_url,
        ),
    )


# --- galleries -------------------------------------------------------------------

STRICT_ORDER_EQUAL_SIZE = "StrictOrderEqualSize"
LOOSE_ORDER_VARYING_SIZE = "LooseOrderVaryingSize"

GALLERY_STYLES = (STRICT_ORDER_EQUAL_SIZE, LOOSE_ORDER_VARYING_SIZE)


@dataclass(frozen=True)
class Tile:
    """One placed item; row/column are grid-unit offsets from the top-left."""

    item: MediaItem
    row: int
    column: int
    width: int
    height: int


@dataclass(frozen=True)
class MediaGallery:
    style: str
    columns: int
    tiles: tuple[Tile, ...]

    def __len__(self) -> int:
        return len(self.tiles)


def _size_class(index: int, total: int) -> int:
    """3 size classes by rank position: top third largest."""
    if total <= 0:
        return 1
    third = math.ceil(total / 3)
    if index < third:
        return 3
    if index < 2 * third:
        return 2
    return 1


def build_gallery(items: list[MediaItem], style: str, columns: int = 4) -> MediaGallery:
    """Lay ranked items out as a gallery.

    StrictOrderEqualSize: uniform unit tiles, row-major, chronological.
    LooseOrderVaryingSize: 3 tile sizes by rank third, packed greedily into
    rows of ``columns * 3`` grid units; an item may be pulled forward past a
    gap, deviating from rank order by at most one row.
    """
    if style not in GALLERY_STYLES:
        raise ValueError(f"unknown gallery style: {style!r}")
    if columns <= 0:
        raise ValueError("columns must be positive")
    if not items:
        return MediaGallery(style=style, columns=columns, tiles=())

    if style == STRICT_ORDER_EQUAL_SIZE:
        ordered = sorted(items, key=lambda i: (i.publication_date, i.media_url))
        tiles = tuple(
            Tile(item=item, row=index // columns, column=index % columns, width=1, height=1)
            for index, item in enumerate(ordered)
        )
        return MediaGallery(style=style, columns=columns, tiles=tiles)

    row_units = columns * 3
    if len(items) == 1:
        tile = Tile(item=items[0], row=0, column=0, width=row_units, height=3)
        return MediaGallery(style=style, columns=columns, tiles=(tile,))

    pending = [(item, _size_class(i, len(items))) for i, item in enumerate(items)]
    tiles: list[Tile] = []
    y = 0
    while pending:
        x = 0
        row_height = 0
        while pending and x < row_units:
            # bounded lookahead: pull a smaller tile forward past at most one
            # row's worth of items, never reordering further than that
            pick = None
            for look, (_, size) in enumerate(pending[: columns + 1]):
                if size <= row_units - x:
                    pick = look
                    break
            if pick is None:
                break
            item, size = pending.pop(pick)
            tiles.append(Tile(item=item, row=y, column=x, width=size, height=size))
            x += size
            row_height = max(row_height, size)
        y += row_height if row_height else 3
    return MediaGallery(style=style, columns=columns, tiles=tuple(tiles))


def gallery_to_record(gallery: MediaGallery) -> dict[str, Any]:
    return {
        "style": gallery.style,
        "columns": gallery.columns,
        "tiles": [
            {
                "row": tile.row, "column": tile.column,
                "width": tile.width, "height": tile.height,
                "item": {
                    "media_url": tile.item.media_url,
                    "micropost_url": tile.item.micropost_url,
                    "poster_url": tile.item.poster_url,
                    "publication_date": tile.item.publication_date,
                    "kind": tile.item.kind,
                    "user_profile_url": tile.item.user_profile_url,
                    "likes": tile.item.likes,
                    "shares": tile.item.shares,
                    "text_html": tile.item.text_html,
                    "text_plain": tile.item.text_plain,
                    "provider": tile.item.provider,
                },
            }
            for tile in gallery.tiles
        ],
    }


def gallery_from_record(record: dict[str, Any]) -> MediaGallery:
    tiles = tuple(
        Tile(
            item=MediaItem(**tile_record["item"]),
            row=tile_record["row"],
            column=tile_record["column"],
            width=tile_record["width"],
            height=tile_record["height"],
        )
        for tile_record in record["tiles"]
    )
    return MediaGallery(style=record["style"], columns=record["columns"], tiles=tiles)
