"""RDF triples about alerts and a Triple Pattern Fragments view over them.

The store keeps three sorted indexes (SPO, POS, OSP) over an immutable
triple snapshot; writers swap the snapshot atomically, readers never block.
Fragments follow the TPF shape: a data page, the exact total match count as
metadata, and hypermedia controls (a URL template plus next/prev links).
"""

from __future__ import annotations

import bisect
import json
import threading
from dataclasses import dataclass
from typing import Any, Iterable, NamedTuple
from urllib.parse import quote, urlencode

XSD_INTEGER = "http://www.w3.org/2001/XMLSchema#integer"
RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
OWL_SAME_AS = "http://www.w3.org/2002/07/owl#sameAs"

DEFAULT_PAGE_SIZE = 100


@dataclass(frozen=True, slots=True)
class IRI:
    value: str

    def __post_init__(self) -> None:
        if "://" not in self.value and not self.value.startswith("urn:"):
            raise ValueError(f"IRI must be absolute: {self.value!r}")


@dataclass(frozen=True, slots=True)
class Literal:
    value: str
    datatype: str | None = None
    language: str | None = None

    def __post_init__(self) -> None:
        if self.datatype and self.language:
            raise ValueError("a literal has a datatype or a language tag, not both")


@dataclass(frozen=True, slots=True)
class Blank:
    label: str

    def __post_init__(self) -> None:
        if not self.label:
            raise ValueError("blank node label must be non-empty")


Term = IRI | Literal | Blank


def integer(value: int) -> Literal:
    return Literal(str(int(value)), datatype=XSD_INTEGER)


_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}


def _escape(text: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in text)


def _unescape(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            out.append({"\\": "\\", '"': '"', "n": "\n", "r": "\r", "t": "\t"}.get(nxt, nxt))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def term_text(term: Term) -> str:
    """Canonical N-Triples-style rendering; also the store's sort key."""
    if isinstance(term, IRI):
        return f"<{term.value}>"
    if isinstance(term, Blank):
        return f"_:{term.label}"
    base = f'"{_escape(term.value)}"'
    if term.language:
        return f"{base}@{term.language}"
    if term.datatype:
        return f"{base}^^<{term.datatype}>"
    return base


def parse_term_text(text: str) -> Term:
    """Inverse of term_text."""
    if text.startswith("<") and text.endswith(">"):
        return IRI(text[1:-1])
    if text.startswith("_:"):
        return Blank(text[2:])
    if text.startswith('"'):
        end = _closing_quote(text)
        value = _unescape(text[1:end])
        rest = text[end + 1:]
        if rest.startswith("@"):
            return Literal(value, language=rest[1:])
        if rest.startswith("^^<") and rest.endswith(">"):
            return Literal(value, datatype=rest[3:-1])
        if rest == "":
            return Literal(value)
    raise ValueError(f"cannot parse term: {text!r}")


def _closing_quote(text: str) -> int:
    i = 1
    while i < len(text):
        if text[i] == "\\":
            i += 2
            continue
        if text[i] == '"':
            return i
        i += 1
    raise ValueError(f"unterminated literal: {text!r}")


@dataclass(frozen=True, slots=True)
class Triple:
    subject: IRI | Blank
    predicate: IRI
    object: Term

    def sort_key(self) -> tuple[str, str, str]:
        return (term_text(self.subject), term_text(self.predicate), term_text(self.object))


@dataclass(frozen=True, slots=True)
class TriplePattern:
    """Selector with any of the three positions unbound (None)."""

    subject: Term | None = None
    predicate: Term | None = None
    object: Term | None = None


class _Snapshot(NamedTuple):
    spo: tuple[Triple, ...]
    pos: tuple[Triple, ...]
    osp: tuple[Triple, ...]
    spo_keys: tuple[tuple[str, str, str], ...]
    pos_keys: tuple[tuple[str, str], ...]
    osp_keys: tuple[tuple[str], ...]
    triples: frozenset[Triple]


def _prefix_range(keys, prefix: tuple[str, ...]) -> tuple[int, int]:
    """Index range of sort keys starting with ``prefix`` (a safe superset)."""
    lo = bisect.bisect_left(keys, prefix)
    bumped = prefix[:-1] + (prefix[-1] + "\x00",)
    hi = bisect.bisect_left(keys, bumped)
    return lo, hi


class TripleStore:
    """Sorted SPO/POS/OSP indexes over an immutable snapshot of triples."""

    def __init__(self, triples: Iterable[Triple] = ()) -> None:
        self._lock = threading.Lock()
        self._snapshot = self._build(set(triples))

    @staticmethod
    def _build(triples: set[Triple]) -> _Snapshot:
        spo = tuple(sorted(triples, key=lambda t: t.sort_key()))
        pos = tuple(sorted(triples, key=lambda t: (term_text(t.predicate),
                                                   term_text(t.object),
                                                   term_text(t.subject))))
        osp = tuple(sorted(triples, key=lambda t: (term_text(t.object),
                                                   term_text(t.subject),
                                                   term_text(t.predicate))))
        return _Snapshot(
            spo=spo, pos=pos, osp=osp,
            spo_keys=tuple(t.sort_key() for t in spo),
            pos_keys=tuple((term_text(t.predicate), term_text(t.object)) for t in pos),
            osp_keys=tuple((term_text(t.object),) for t in osp),
            triples=frozenset(triples),
        )

    def add(self, triples: Iterable[Triple]) -> None:
        with self._lock:
            current = set(self._snapshot.triples)
            current.update(triples)
            self._snapshot = self._build(current)

    def __len__(self) -> int:
        return len(self._snapshot.spo)

    def all_triples(self) -> tuple[Triple, ...]:
        return self._snapshot.spo

    def match_all(self, pattern: TriplePattern) -> list[Triple]:
        """All matches in the canonical (SPO lexicographic) total order."""
        snap = self._snapshot

        def narrowed() -> Iterable[Triple]:
            if pattern.subject is not None:
                lo, hi = _prefix_range(snap.spo_keys, (term_text(pattern.subject),))
                return snap.spo[lo:hi]
            if pattern.predicate is not None:
                prefix = (term_text(pattern.predicate),)
                if pattern.object is not None:
                    prefix += (term_text(pattern.object),)
                lo, hi = _prefix_range(snap.pos_keys, prefix)
                return snap.pos[lo:hi]
            if pattern.object is not None:
                lo, hi = _prefix_range(snap.osp_keys, (term_text(pattern.object),))
                return snap.osp[lo:hi]
            return snap.spo

        matches = [t for t in narrowed() if _matches(t, pattern)]
        matches.sort(key=lambda t: t.sort_key())
        return matches


def _matches(triple: Triple, pattern: TriplePattern) -> bool:
    return (
        (pattern.subject is None or triple.subject == pattern.subject)
        and (pattern.predicate is None or triple.predicate == pattern.predicate)
        and (pattern.object is None or triple.object == pattern.object)
    )


@dataclass(frozen=True)
class Fragment:
    pattern: TriplePattern
    page: int
    page_size: int
    data: tuple[Triple, ...]
    total_matches: int
    template: str
    next_page: str | None
    prev_page: str | None


def _page_url(base_url: str, pattern: TriplePattern, page: int) -> str:
    params = []
    for name, term in (("subject", pattern.subject), ("predicate", pattern.predicate),
                       ("object", pattern.object)):
        if term is not None:
            params.append((name, term_text(term)))
    params.append(("page", str(page)))
    return f"{base_url}/fragments?{urlencode(params, quote_via=quote)}"


def match(
    store: TripleStore,
    pattern: TriplePattern,
    page: int = 1,
    page_size: int = DEFAULT_PAGE_SIZE,
    base_url: str = "http://localhost:8420",
) -> Fragment:
    """One page of the pattern's matches plus exact count and controls.

    Pages past the end return no data but still the correct count; the
    hypermedia controls are always present.
    """
    if page < 1:
        raise ValueError("page numbers start at 1")
    matches = store.match_all(pattern)
    total = len(matches)
    start = (page - 1) * page_size
    data = tuple(matches[start:start + page_size])
    has_next = start + page_size < total
    return Fragment(
        pattern=pattern,
        page=page,
        page_size=page_size,
        data=data,
        total_matches=total,
        template=f"{base_url}/fragments{{?subject,predicate,object,page}}",
        next_page=_page_url(base_url, pattern, page + 1) if has_next else None,
        prev_page=_page_url(base_url, pattern, page - 1) if page > 1 else None,
    )


FRAGMENT_FORMATS = ("turtle", "records")


def _term_record(term: Term) -> dict[str, Any]:
    if isinstance(term, IRI):
        return {"type": "iri", "value": term.value}
    if isinstance(term, Blank):
        return {"type": "blank", "value": term.label}
    record: dict[str, Any] = {"type": "literal", "value": term.value}
    if term.datatype:
        record["datatype"] = term.datatype
    if term.language:
        record["language"] = term.language
    return record


def _term_from_record(record: dict[str, Any]) -> Term:
    kind = record["type"]
    if kind == "iri":
        return IRI(record["value"])
    if kind == "blank":
        return Blank(record["value"])
    if kind == "literal":
        return Literal(record["value"], datatype=record.get("datatype"),
                       language=record.get("language"))
    raise ValueError(f"unknown term record type: {kind!r}")


def _turtle_object(term: Term) -> str:
    # integers render bare, the conventional turtle shorthand
    if isinstance(term, Literal) and term.datatype == XSD_INTEGER:
        return term.value
    return term_text(term)


def render_fragment(fragment: Fragment, fmt: str) -> bytes:
    """Serialize data + metadata + controls as turtle-like text or records."""
    if fmt == "turtle":
        lines = ["# data"]
        for triple in fragment.data:
            lines.append(
                f"{term_text(triple.subject)} {term_text(triple.predicate)} "
                f"{_turtle_object(triple.object)} ."
            )
        lines.append("# metadata")
        lines.append(f"# totalMatches: {fragment.total_matches}")
        lines.append(f"# page: {fragment.page}")
        lines.append(f"# pageSize: {fragment.page_size}")
        lines.append("# controls")
        lines.append(f"# template: {fragment.template}")
        if fragment.next_page:
            lines.append(f"# next: {fragment.next_page}")
        if fragment.prev_page:
            lines.append(f"# prev: {fragment.prev_page}")
        return ("\n".join(lines) + "\n").encode()
    if fmt == "records":
        doc = {
            "pattern": {
                name: (term_text(term) if term is not None else None)
                for name, term in (("subject", fragment.pattern.subject),
                                   ("predicate", fragment.pattern.predicate),
                                   ("object", fragment.pattern.object))
            },
            "data": [
                {
                    "subject": _term_record(t.subject),
                    "predicate": _term_record(t.predicate),
                    "object": _term_record(t.object),
                }
                for t in fragment.data
            ],
            "metadata": {"totalMatches": fragment.total_matches,
                         "page": fragment.page, "pageSize": fragment.page_size},
            "controls": {"template": fragment.template,
                         "next": fragment.next_page, "prev": fragment.prev_page},
        }
        return (json.dumps(doc, ensure_ascii=False, sort_keys=True,
                           separators=(",", ":")) + "\n").encode()
    raise ValueError(f"unknown fragment format: {fmt!r}")


def parse_fragment_records(data: bytes) -> Fragment:
    """Inverse of render_fragment(..., "records")."""
    doc = json.loads(data.decode("utf-8"))
    pattern = TriplePattern(**{
        name: (parse_term_text(text) if text else None)
        for name, text in doc["pattern"].items()
    })
    triples = tuple(
        Triple(
            subject=_term_from_record(r["subject"]),
            predicate=_term_from_record(r["predicate"]),
            object=_term_from_record(r["object"]),
        )
        for r in doc["data"]
    )
    return Fragment(
        pattern=pattern,
        page=doc["metadata"]["page"],
        page_size=doc["metadata"]["pageSize"],
        data=triples,
        total_matches=doc["metadata"]["totalMatches"],
        template=doc["controls"]["template"],
        next_page=doc["controls"]["next"],
        prev_page=doc["controls"]["prev"],
    )


def parse_pattern_param(text: str) -> Term | None:
    """Decode one /fragments query parameter into a term or a variable.

    Empty strings and "?var" forms are variables; quoted strings are
    literals; "_:x" is a blank node; everything else must be an IRI (with
    or without angle brackets).
    """
    text = text.strip()
    if text == "" or text.startswith("?"):
        return None
    if text.startswith('"') or text.startswith("_:") or text.startswith("<"):
        return parse_term_text(text)
    return IRI(text)


# --- alert description triples -------------------------------------------------

@dataclass(frozen=True)
class VocabConfig:
    """IRI bases for the alert vocabulary; the predicate names are fixed,
    their namespace is deliberately not (undecided upstream vocabulary)."""

    dataset_base: str = "http://ex.org"
    vocab_base: str = "http://ex.org/ns#"
    wikipedia_pattern: str = "https://{language}.wikipedia.org/wiki/{title}"
    dbpedia_pattern: str = "http://live.dbpedia.org/page/{title}"

    def predicate(self, name: str) -> "IRI":
        return IRI(self.vocab_base + name)


def _iso_utc(epoch_ms: int) -> str:
    from datetime import datetime, timezone

    return datetime.fromtimestamp(epoch_ms / 1000.0, tz=timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%SZ"
    )


def alert_to_triples(
    cluster_members,
    disaster_types,
    cap_identifier: str,
    gallery=None,
    vocab: VocabConfig = VocabConfig(),
) -> list[Triple]:
    """Describe one confirmed alert as RDF.

    Subject is ``<dataset_base>/disaster/<lang>:<Title>`` (the English
    cluster member when there is one); owl:sameAs links every cluster
    member's Wikipedia URL plus a pattern-derived DBpedia URL for the
    English member; each gallery item becomes one blank node carrying the
    media predicates, with nested social-interaction and micropost nodes.
    """
    members = sorted(cluster_members)
    if not members:
        raise ValueError("an alert needs at least one cluster member")
    english = [m for m in members if m.language == "en"]
    representative = english[0] if english else members[0]
    subject = IRI(f"{vocab.dataset_base}/disaster/{representative}")

    triples: list[Triple] = [
        Triple(subject, IRI(RDF_TYPE), vocab.predicate("Disaster")),
        Triple(subject, vocab.predicate("capIdentifier"), Literal(cap_identifier)),
    ]
    for type_name in sorted(set(disaster_types)):
        triples.append(Triple(subject, vocab.predicate("disasterType"), Literal(type_name)))
    same_as = IRI(OWL_SAME_AS)
    for member in members:
        url = vocab.wikipedia_pattern.format(language=member.language, title=member.title)
        triples.append(Triple(subject, same_as, IRI(url)))
    for member in english:
        triples.append(Triple(
            subject, same_as, IRI(vocab.dbpedia_pattern.format(title=member.title))
        ))

    if gallery is not None:
        counters = {"photo": 0, "video": 0}
        for tile in gallery.tiles:
            item = tile.item
            counters[item.kind] += 1
            node = Blank(f"{item.kind}{counters[item.kind]}")
            interactions = Blank(f"{node.label}Interactions")
            micropost = Blank(f"{node.label}Micropost")
            triples.append(Triple(subject, vocab.predicate("relatedMediaItems"), node))
            triples.append(Triple(node, vocab.predicate("mediaUrl"), Literal(item.media_url)))
            triples.append(Triple(node, vocab.predicate("micropostUrl"),
                                  Literal(item.micropost_url)))
            triples.append(Triple(node, vocab.predicate("posterUrl"),
                                  Literal(item.poster_url)))
            triples.append(Triple(node, vocab.predicate("publicationDate"),
                                  Literal(_iso_utc(item.publication_date))))
            triples.append(Triple(node, vocab.predicate("timestamp"),
                                  integer(item.publication_date)))
            triples.append(Triple(node, vocab.predicate("type"), Literal(item.kind)))
            triples.append(Triple(node, vocab.predicate("userProfileUrl"),
                                  Literal(item.user_profile_url)))
            triples.append(Triple(node, vocab.predicate("socialInteractions"), interactions))
            if item.likes is not None:
                triples.append(Triple(interactions, vocab.predicate("likes"),
                                      integer(item.likes)))
            if item.shares is not None:
                triples.append(Triple(interactions, vocab.predicate("shares"),
                                      integer(item.shares)))
            triples.append(Triple(node, vocab.predicate("micropost"), micropost))
            triples.append(Triple(micropost, vocab.predicate("html"),
                                  Literal(item.text_html)))
            triples.append(Triple(micropost, vocab.predicate("plainText"),
                                  Literal(item.text_plain)))
    return triples
