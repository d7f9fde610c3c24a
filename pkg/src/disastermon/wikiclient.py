"""Wikipedia API access: an abstract client, a file-backed fixture client
for tests, and an HTTP client speaking the MediaWiki action API.

Every operation returns complete results across API pagination. Failures
raise WikiClientError; a client never turns an error into an empty result.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable

import requests

from .articles import ArticleKey, title_for_api


class WikiClientError(Exception):
    """A Wikipedia lookup failed (network, API error, or fixture-declared)."""


class WikiClient:
    """Read-only view of the Wikipedia link structure around one article."""

    def wikitext(self, key: ArticleKey) -> str:
        raise NotImplementedError

    def langlinks(self, key: ArticleKey) -> list[ArticleKey]:
        """Versions of the article in other languages."""
        raise NotImplementedError

    def redirects(self, key: ArticleKey) -> list[ArticleKey]:
        """Alternative titles pointing at the article."""
        raise NotImplementedError

    def backlinks(self, key: ArticleKey) -> list[ArticleKey]:
        """Main-namespace articles linking here, redirects excluded."""
        raise NotImplementedError

    def outlinks(self, key: ArticleKey) -> list[ArticleKey]:
        """Main-namespace articles this article links to."""
        raise NotImplementedError

    def coordinates(self, key: ArticleKey) -> tuple[float, float] | None:
        """Primary (lat, lon) of the article, if geo-referenced."""
        raise NotImplementedError


_LIST_OPS = {"langlinks", "redirects", "backlinks", "links"}


class FixtureWikiClient(WikiClient):
    """Serves canned page records, either in-memory or from a directory of
    JSON files (each ``{"language": ..., "pages": {title: record}}``).

    A record may carry ``"error"`` (fail every operation for that page) or
    ``"errors": {op: message}`` (fail selectively). Pages without a record
    simply have no wikitext, no links and no coordinates.
    """

    def __init__(self, pages: dict[ArticleKey, dict[str, Any]] | None = None) -> None:
        self._pages: dict[ArticleKey, dict[str, Any]] = dict(pages or {})

    @classmethod
    def from_dir(cls, path: str | Path) -> "FixtureWikiClient":
        client = cls()
        directory = Path(path)
        if not directory.is_dir():
            raise WikiClientError(f"fixture directory not found: {directory}")
        for file in sorted(directory.glob("*.json")):
            doc = json.loads(file.read_text(encoding="utf-8"))
            language = doc["language"]
            for title, record in doc.get("pages", {}).items():
                client._pages[ArticleKey(language, title)] = record
        return client

    def add_page(self, key: ArticleKey, record: dict[str, Any]) -> None:
        self._pages[key] = record

    def _record(self, key: ArticleKey, op: str) -> dict[str, Any]:
        record = self._pages.get(key, {})
        if "error" in record:
            raise WikiClientError(f"{op} failed for {key}: {record['error']}")
        op_errors = record.get("errors", {})
        if op in op_errors:
            raise WikiClientError(f"{op} failed for {key}: {op_errors[op]}")
        return record

    def _keys(self, key: ArticleKey, op: str) -> list[ArticleKey]:
        record = self._record(key, op)
        return [ArticleKey.parse(text) for text in record.get(op, [])]

    def wikitext(self, key: ArticleKey) -> str:
        return self._record(key, "wikitext").get("wikitext", "")

    def langlinks(self, key: ArticleKey) -> list[ArticleKey]:
        return self._keys(key, "langlinks")

    def redirects(self, key: ArticleKey) -> list[ArticleKey]:
        return self._keys(key, "redirects")

    def backlinks(self, key: ArticleKey) -> list[ArticleKey]:
        return self._keys(key, "backlinks")

    def outlinks(self, key: ArticleKey) -> list[ArticleKey]:
        record = self._record(key, "links")
        return [ArticleKey.parse(text) for text in record.get("links", [])]

    def coordinates(self, key: ArticleKey) -> tuple[float, float] | None:
        coords = self._record(key, "coordinates").get("coordinates")
        if coords is None:
            return None
        return float(coords[0]), float(coords[1])


class HttpWikiClient(WikiClient):
    """MediaWiki action API client with continuation handling.

    ``endpoint_template`` receives the key's language, e.g. the default
    ``https://{language}.wikipedia.org/w/api.php``.
    """

    def __init__(
        self,
        endpoint_template: str = "https://{language}.wikipedia.org/w/api.php",
        session: Any | None = None,
        timeout_s: float = 30.0,
        user_agent: str = "disastermon/0.1 (monitoring research tool)",
    ) -> None:
        self.endpoint_template = endpoint_template
        self.timeout_s = timeout_s
        self._session = session or requests.Session()
        self._headers = {"User-Agent": user_agent}

    def _query(
        self, key: ArticleKey, params: dict[str, str], with_titles: bool = True
    ) -> Iterable[dict[str, Any]]:
        """Yield one API response page per continuation step."""
        url = self.endpoint_template.format(language=key.language)
        base = {"action": "query", "format": "json", "formatversion": "2"}
        if with_titles:
            base["titles"] = title_for_api(key.title)
        base.update(params)
        continuation: dict[str, str] = {}
        while True:
            try:
                response = self._session.get(
                    url, params={**base, **continuation},
                    headers=self._headers, timeout=self.timeout_s,
                )
                response.raise_for_status()
                data = response.json()
            except Exception as exc:  # requests and JSON errors alike
                raise WikiClientError(f"wiki API query failed for {key}: {exc}") from exc
            if "error" in data:
                raise WikiClientError(f"wiki API error for {key}: {data['error']}")
            yield data
            if "continue" not in data:
                return
            continuation = {k: str(v) for k, v in data["continue"].items() if k != "continue"}

    @staticmethod
    def _first_page(data: dict[str, Any]) -> dict[str, Any]:
        pages = data.get("query", {}).get("pages", [])
        return pages[0] if pages else {}

    def wikitext(self, key: ArticleKey) -> str:
        params = {"prop": "revisions", "rvprop": "content", "rvslots": "main", "rvlimit": "1"}
        for data in self._query(key, params):
            page = self._first_page(data)
            for revision in page.get("revisions", []):
                return revision.get("slots", {}).get("main", {}).get("content", "")
        return ""

    def langlinks(self, key: ArticleKey) -> list[ArticleKey]:
        out: list[ArticleKey] = []
        for data in self._query(key, {"prop": "langlinks", "lllimit": "max"}):
            for link in self._first_page(data).get("langlinks", []):
                out.append(ArticleKey(link["lang"], link["title"]))
        return out

    def redirects(self, key: ArticleKey) -> list[ArticleKey]:
        out: list[ArticleKey] = []
        params = {"prop": "redirects", "rdnamespace": "0", "rdlimit": "max"}
        for data in self._query(key, params):
            for redirect in self._first_page(data).get("redirects", []):
                out.append(ArticleKey(key.language, redirect["title"]))
        return out

    def backlinks(self, key: ArticleKey) -> list[ArticleKey]:
        # blnamespace=0 and nonredirects match the builder's contract:
        # main-namespace backlinks with redirects excluded.
        out: list[ArticleKey] = []
        params = {
            "list": "backlinks",
            "bltitle": title_for_api(key.title),
            "blnamespace": "0",
            "blfilterredir": "nonredirects",
            "bllimit": "max",
        }
        for data in self._query(key, params, with_titles=False):
            for link in data.get("query", {}).get("backlinks", []):
                out.append(ArticleKey(key.language, link["title"]))
        return out

    def outlinks(self, key: ArticleKey) -> list[ArticleKey]:
        out: list[ArticleKey] = []
        params = {"prop": "links", "plnamespace": "0", "pllimit": "max"}
        for data in self._query(key, params):
            for link in self._first_page(data).get("links", []):
                out.append(ArticleKey(key.language, link["title"]))
        return out

    def coordinates(self, key: ArticleKey) -> tuple[float, float] | None:
        for data in self._query(key, {"prop": "coordinates", "colimit": "max"}):
            for coord in self._first_page(data).get("coordinates", []):
                if coord.get("primary", True):
                    return float(coord["lat"]), float(coord["lon"])
        return None
