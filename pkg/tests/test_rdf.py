import random

import pytest
from hypothesis import given, settings, strategies as st

from disastermon.articles import ArticleKey
from disastermon.media import LOOSE_ORDER_VARYING_SIZE, MediaItem, build_gallery
from disastermon.rdf import (
    Blank,
    Fragment,
    IRI,
    Literal,
    OWL_SAME_AS,
    Triple,
    TriplePattern,
    TripleStore,
    VocabConfig,
    alert_to_triples,
    integer,
    match,
    parse_fragment_records,
    parse_pattern_param,
    parse_term_text,
    render_fragment,
    term_text,
)

EX = "http://ex.org/ns#"


def iri(suffix):
    return IRI(f"http://ex.org/{suffix}")


def simple_triple(i, j=0, k=0):
    return Triple(iri(f"s{i}"), iri(f"p{j}"), iri(f"o{k}"))


# --- terms -----------------------------------------------------------------------

def test_term_text_forms():
    assert term_text(IRI("http://a/b")) == "<http://a/b>"
    assert term_text(Blank("x1")) == "_:x1"
    assert term_text(Literal("hi")) == '"hi"'
    assert term_text(Literal("hi", language="en")) == '"hi"@en'
    assert term_text(integer(7)) == '"7"^^<http://www.w3.org/2001/XMLSchema#integer>'


def test_term_text_escaping_round_trip():
    tricky = Literal('say "hi"\nback\\slash\ttab')
    assert parse_term_text(term_text(tricky)) == tricky


def test_parse_term_text_inverse():
    for term in (IRI("urn:x:1"), Blank("b"), Literal("v", datatype="http://d/t"),
                 Literal("v", language="de")):
        assert parse_term_text(term_text(term)) == term


def test_relative_iri_rejected():
    with pytest.raises(ValueError):
        IRI("not-absolute")


def test_literal_datatype_language_exclusive():
    with pytest.raises(ValueError):
        Literal("x", datatype="http://d", language="en")


def test_parse_pattern_param_variables_and_terms():
    assert parse_pattern_param("") is None
    assert parse_pattern_param("?s") is None
    assert parse_pattern_param("http://a/b") == IRI("http://a/b")
    assert parse_pattern_param("<http://a/b>") == IRI("http://a/b")
    assert parse_pattern_param('"lit"') == Literal("lit")
    assert parse_pattern_param("_:b1") == Blank("b1")


# --- store and match --------------------------------------------------------------

def test_empty_store_any_pattern():
    store = TripleStore()
    fragment = match(store, TriplePattern())
    assert fragment.data == ()
    assert fragment.total_matches == 0
    assert fragment.next_page is None
    assert fragment.template


def test_fully_unbound_counts_store_size():
    store = TripleStore(simple_triple(i) for i in range(7))
    fragment = match(store, TriplePattern())
    assert fragment.total_matches == len(store) == 7


def test_paging_250_triples_page_3():
    store = TripleStore(simple_triple(i) for i in range(250))
    fragment = match(store, TriplePattern(), page=3)
    assert len(fragment.data) == 50
    assert fragment.total_matches == 250
    assert fragment.next_page is None
    assert fragment.prev_page is not None


def test_page_past_end_empty_but_counted():
    store = TripleStore(simple_triple(i) for i in range(5))
    fragment = match(store, TriplePattern(), page=9)
    assert fragment.data == ()
    assert fragment.total_matches == 5
    assert fragment.next_page is None


def test_page_validation():
    with pytest.raises(ValueError):
        match(TripleStore(), TriplePattern(), page=0)


def random_store(rng, n):
    triples = {
        Triple(
            iri(f"s{rng.randint(0, 9)}"),
            iri(f"p{rng.randint(0, 4)}"),
            rng.choice([
                iri(f"o{rng.randint(0, 9)}"),
                Literal(f"v{rng.randint(0, 9)}"),
                integer(rng.randint(0, 99)),
            ]),
        )
        for _ in range(n)
    }
    return TripleStore(triples)


def random_pattern(rng, store):
    triples = store.all_triples()
    base = rng.choice(triples) if triples else simple_triple(0)
    return TriplePattern(
        subject=base.subject if rng.random() < 0.5 else None,
        predicate=base.predicate if rng.random() < 0.5 else None,
        object=base.object if rng.random() < 0.5 else None,
    )


def brute_force_count(store, pattern):
    return sum(
        (pattern.subject is None or t.subject == pattern.subject)
        and (pattern.predicate is None or t.predicate == pattern.predicate)
        and (pattern.object is None or t.object == pattern.object)
        for t in store.all_triples()
    )


def test_count_matches_full_scan_on_random_patterns():
    rng = random.Random(2014)
    store = random_store(rng, 800)
    for _ in range(200):
        pattern = random_pattern(rng, store)
        fragment = match(store, pattern)
        assert fragment.total_matches == brute_force_count(store, pattern)


def test_page_partition_reconstructs_match_set():
    rng = random.Random(7)
    store = random_store(rng, 400)
    for _ in range(30):
        pattern = random_pattern(rng, store)
        collected = []
        page = 1
        while True:
            fragment = match(store, pattern, page=page, page_size=37)
            collected.extend(fragment.data)
            if fragment.next_page is None:
                break
            page += 1
        expected = store.match_all(pattern)
        assert collected == expected
        assert len(set(collected)) == len(collected)


def test_pattern_monotonicity_binding_never_increases_count():
    rng = random.Random(99)
    store = random_store(rng, 300)
    for _ in range(50):
        triple = rng.choice(store.all_triples())
        unbound = TriplePattern()
        s_only = TriplePattern(subject=triple.subject)
        s_p = TriplePattern(subject=triple.subject, predicate=triple.predicate)
        full = TriplePattern(triple.subject, triple.predicate, triple.object)
        counts = [match(store, p).total_matches for p in (unbound, s_only, s_p, full)]
        assert counts == sorted(counts, reverse=True)
        assert counts[-1] >= 1


def test_identical_requests_byte_identical():
    rng = random.Random(5)
    store = random_store(rng, 120)
    pattern = TriplePattern(predicate=iri("p1"))
    for fmt in ("turtle", "records"):
        first = render_fragment(match(store, pattern, page=1), fmt)
        second = render_fragment(match(store, pattern, page=1), fmt)
        assert first == second


def test_store_add_swaps_snapshot():
    store = TripleStore([simple_triple(1)])
    before = store.all_triples()
    store.add([simple_triple(2)])
    assert len(store) == 2
    assert len(before) == 1  # old snapshot untouched


# --- rendering ---------------------------------------------------------------------

def test_render_empty_fragment_metadata():
    fragment = match(TripleStore(), TriplePattern())
    text = render_fragment(fragment, "turtle").decode()
    assert "# totalMatches: 0" in text
    assert "# template:" in text


def test_render_unknown_format():
    with pytest.raises(ValueError):
        render_fragment(match(TripleStore(), TriplePattern()), "n3")


def test_records_round_trip():
    rng = random.Random(3)
    store = random_store(rng, 60)
    pattern = TriplePattern(subject=store.all_triples()[0].subject)
    fragment = match(store, pattern, page=1, page_size=10)
    rebuilt = parse_fragment_records(render_fragment(fragment, "records"))
    assert rebuilt == fragment


def test_turtle_renders_integers_bare():
    store = TripleStore([Triple(iri("s"), iri("p"), integer(42))])
    text = render_fragment(match(store, TriplePattern()), "turtle").decode()
    assert " 42 .\n" in text


# --- alert triples -------------------------------------------------------------------

SEASON_CLUSTER = [
    ArticleKey("en", "2014_Pacific_typhoon_season"),
    ArticleKey("de", "Pazifische_Taifunsaison_2014"),
    ArticleKey("zh", "2014年太平洋颱風季"),
]


def gonzalo_gallery():
    video = MediaItem(
        media_url="https://mtc.cdn.vine.co/r/videos/8279.mp4",
        micropost_url="http://twitter.com/gpessoao/status/527603540860997632",
        poster_url="https://v.cdn.vine.co/r/thumbs/231E.jpg",
        publication_date=1414638901000,
        kind="video",
        user_profile_url="http://twitter.com/alejandroriano",
        likes=1, shares=0,
        text_html="Here's Hurricane #Gonzalo as seen from the @Space_Station",
        text_plain="Here's Hurricane Gonzalo as seen from the Space Station",
        provider="twitter",
    )
    photo = MediaItem(
        media_url="https://upload.wikimedia.org/wikipedia/commons/b/bb/Orkan_Gonzalo.jpg",
        micropost_url="https://commons.wikimedia.org/wiki/File:Orkan_Gonzalo.jpg",
        poster_url="https://upload.wikimedia.org/wikipedia/commons/thumb/Orkan.jpg",
        publication_date=1414140016000,
        kind="photo",
        user_profile_url="https://commons.wikimedia.org/wiki/User:Huhu_Uet",
        likes=None, shares=0,
        text_html="Schiffsanleger Wittenbergen - Orkan Gonzalo (22.10.2014) 01",
        text_plain="Schiffsanleger Wittenbergen - Orkan Gonzalo (22.10.2014) 01",
        provider="commons",
    )
    return build_gallery([video, photo], LOOSE_ORDER_VARYING_SIZE, columns=2)


def test_alert_without_gallery_has_only_typing_and_sameas():
    triples = alert_to_triples(SEASON_CLUSTER, ["Tropical cyclone"], "ALERT_1")
    predicates = {t.predicate.value for t in triples}
    assert predicates == {
        "http://www.w3.org/1999/02/22-rdf-syntax-ns#type",
        EX + "capIdentifier",
        EX + "disasterType",
        OWL_SAME_AS,
    }
    subject = triples[0].subject
    assert subject == IRI("http://ex.org/disaster/en:2014_Pacific_typhoon_season")
    sameas_targets = {t.object.value for t in triples if t.predicate.value == OWL_SAME_AS}
    assert "https://de.wikipedia.org/wiki/Pazifische_Taifunsaison_2014" in sameas_targets
    assert "http://live.dbpedia.org/page/2014_Pacific_typhoon_season" in sameas_targets


def test_gallery_item_social_counts_match_listing_shape():
    triples = alert_to_triples(
        [ArticleKey("en", "Hurricane_Gonzalo")], ["Tropical cyclone"], "ALERT_2",
        gallery=gonzalo_gallery(),
    )
    likes = [t for t in triples if t.predicate.value == EX + "likes"]
    shares = [t for t in triples if t.predicate.value == EX + "shares"]
    assert [t.object for t in likes] == [integer(1)]       # photo has no likes count
    assert sorted(t.object.value for t in shares) == ["0", "0"]
    kinds = {t.object.value for t in triples if t.predicate.value == EX + "type"}
    assert kinds == {"video", "photo"}


def test_two_items_two_blank_nodes_and_counting_oracle():
    triples = alert_to_triples(
        [ArticleKey("en", "Hurricane_Gonzalo")], ["Tropical cyclone"], "ALERT_3",
        gallery=gonzalo_gallery(),
    )
    media_nodes = {t.object for t in triples if t.predicate.value == EX + "relatedMediaItems"}
    assert len(media_nodes) == 2
    base = alert_to_triples([ArticleKey("en", "Hurricane_Gonzalo")],
                            ["Tropical cyclone"], "ALERT_3")
    # per item: relatedMediaItems + 8 direct fields + interactions(1 or 2) + micropost(2)
    video_count = 1 + 8 + 2 + 1 + 2
    photo_count = 1 + 8 + 1 + 1 + 2
    assert len(triples) == len(base) + video_count + photo_count


def test_alert_triples_render_sameas_line():
    triples = alert_to_triples([ArticleKey("en", "Hurricane_Gonzalo")],
                               ["Tropical cyclone"], "ALERT_4")
    store = TripleStore(triples)
    text = render_fragment(match(store, TriplePattern()), "turtle").decode()
    assert "<http://www.w3.org/2002/07/owl#sameAs> "\
           "<https://en.wikipedia.org/wiki/Hurricane_Gonzalo>" in text


def test_alert_triples_deterministic():
    gallery = gonzalo_gallery()
    args = (SEASON_CLUSTER, ["Tropical cyclone"], "ALERT_5")
    assert alert_to_triples(*args, gallery=gallery) == alert_to_triples(*args, gallery=gallery)


@settings(max_examples=30)
@given(st.integers(min_value=0, max_value=300), st.integers(min_value=1, max_value=120))
def test_fragment_invariants_random_sizes(n, page_size):
    rng = random.Random(n * 31 + page_size)
    store = random_store(rng, n)
    pattern = random_pattern(rng, store)
    total = match(store, pattern, page_size=page_size).total_matches
    pages = (total + page_size - 1) // page_size or 1
    seen = []
    for page in range(1, pages + 1):
        fragment = match(store, pattern, page=page, page_size=page_size)
        seen.extend(fragment.data)
        assert fragment.total_matches == total
    assert seen == store.match_all(pattern)
