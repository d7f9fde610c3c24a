"""Article identity: language-qualified keys and language-link clusters.

Titles are kept in Wikipedia's canonical database form: underscores instead
of spaces, runs collapsed, first letter uppercased. Spaces appear only at
the API boundary (the HTTP client converts on the way out).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable


def normalize_title(title: str) -> str:
    """Canonicalize an article title (underscores, first letter uppercase)."""
    cleaned = title.strip().replace(" ", "_")
    while "__" in cleaned:
        cleaned = cleaned.replace("__", "_")
    cleaned = cleaned.strip("_")
    if not cleaned:
        raise ValueError(f"empty article title: {title!r}")
    return cleaned[0].upper() + cleaned[1:]


def title_for_api(title: str) -> str:
    """Render a canonical title back to the space form the wiki API expects."""
    return title.replace("_", " ")


@dataclass(frozen=True, slots=True, order=True)
class ArticleKey:
    """A single article in a single language, rendered as ``language:title``."""

    language: str
    title: str

    def __post_init__(self) -> None:
        if not self.language:
            raise ValueError("language must be non-empty")
        object.__setattr__(self, "language", self.language.strip().lower())
        object.__setattr__(self, "title", normalize_title(self.title))

    def __str__(self) -> str:
        return f"{self.language}:{self.title}"

    @classmethod
    def parse(cls, text: str) -> "ArticleKey":
        """Parse a ``language:title`` rendering. Inverse of ``str()``."""
        language, sep, title = text.partition(":")
        if not sep or not language or not title:
            raise ValueError(f"not a language:title key: {text!r}")
        return cls(language=language, title=title)


# The canonical representative of a language-link cluster: the
# lexicographically smallest member key.
ClusterKey = ArticleKey


class ClusterMap:
    """Groups article keys that are language versions of one another.

    Built once per monitoring-list build from the language-link sets observed
    there; lookups never touch the network. Keys outside any observed group
    resolve to themselves (singleton clusters).
    """

    def __init__(self, groups: Iterable[Iterable[ArticleKey]] = ()) -> None:
        self._parent: dict[ArticleKey, ArticleKey] = {}
        for group in groups:
            self.add_group(group)
        self._compact()

    def add_group(self, group: Iterable[ArticleKey]) -> None:
        keys = list(group)
        for key in keys[1:]:
            self._union(keys[0], key)

    def _find(self, key: ArticleKey) -> ArticleKey:
        parent = self._parent
        if key not in parent:
            return key
        root = key
        while parent[root] != root:
            root = parent[root]
        while parent[key] != root:
            parent[key], key = root, parent[key]
        return root

    def _union(self, a: ArticleKey, b: ArticleKey) -> None:
        ra, rb = self._find(a), self._find(b)
        self._parent.setdefault(ra, ra)
        self._parent.setdefault(rb, rb)
        # Smaller key wins so the representative is stable under insert order.
        if rb < ra:
            ra, rb = rb, ra
        self._parent[rb] = ra

    def _compact(self) -> None:
        for key in list(self._parent):
            self._find(key)

    def resolve(self, key: ArticleKey) -> ClusterKey:
        """Cluster representative for ``key`` (itself when unclustered)."""
        return self._find(key)

    def members(self, key: ArticleKey) -> frozenset[ArticleKey]:
        """All keys in ``key``'s cluster, including ``key``."""
        root = self._find(key)
        found = {k for k in self._parent if self._find(k) == root}
        found.add(key)
        found.add(root)
        return frozenset(found)

    def groups(self) -> list[frozenset[ArticleKey]]:
        by_root: dict[ArticleKey, set[ArticleKey]] = {}
        for key in self._parent:
            by_root.setdefault(self._find(key), set()).add(key)
        return [frozenset(v) for _, v in sorted(by_root.items())]

    def to_records(self) -> list[list[str]]:
        return [sorted(str(k) for k in group) for group in self.groups()]

    @classmethod
    def from_records(cls, records: Iterable[Iterable[str]]) -> "ClusterMap":
        return cls([ArticleKey.parse(k) for k in group] for group in records)
