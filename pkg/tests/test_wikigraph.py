import random

import pytest
from hypothesis import given, settings, strategies as st

from disastermon.articles import ArticleKey
from disastermon.wikiclient import FixtureWikiClient
from disastermon.wikigraph import (
    BuildError,
    MonitoringListBuilder,
    Role,
    RoleKind,
    build_disasters_list,
    build_monitoring_list,
    deserialize_monitoring_list,
    extract_main_article_links,
    serialize_monitoring_list,
)

from conftest import SEED

PAPER_TYPES = [
    "Avalanche", "Blizzard", "Cyclone", "Drought", "Earthquake", "Epidemic",
    "Extratropical cyclone", "Flood", "Gamma-ray burst", "Hail", "Heat wave",
    "Impact event", "Limnic eruption", "Meteorological disaster", "Solar flare",
    "Tornado", "Tropical cyclone", "Tsunami", "Volcanic eruption", "Wildfire",
]


# --- independent oracle -----------------------------------------------------
# Recomputes entry/role sets by brute-force traversal of the raw fixture
# dicts, sharing no code with the builder.

def oracle_roles(raw_pages: dict, type_titles: list[str]) -> dict[str, set[tuple[str, str]]]:
    def rec(key):
        return raw_pages.get(key, {})

    result: dict[str, set[tuple[str, str]]] = {}

    def add(key, kind, type_name):
        result.setdefault(key, set()).add((kind, type_name))

    for type_name in type_titles:
        root = "en:" + type_name.replace(" ", "_")
        versions = [root] + list(rec(root).get("langlinks", []))
        members, redirect_members = [], []
        for version in versions:
            members.append(version)
            for redirect in rec(version).get("redirects", []):
                members.append(redirect)
                redirect_members.append(redirect)
        for redirect in redirect_members:
            add(redirect, "redirect", type_name)
        for member in members:
            for inbound in rec(member).get("backlinks", []):
                add(inbound, "inbound", type_name)
            for outbound in rec(member).get("links", []):
                add(outbound, "outbound", type_name)
    for key, kinds in result.items():
        for kind, type_name in list(kinds):
            if kind == "inbound" and ("outbound", type_name) in kinds:
                kinds.add(("mutual", type_name))
    return result


def as_plain(monitoring) -> dict[str, set[tuple[str, str]]]:
    return {
        str(key): {(role.kind.value, role.disaster_type) for role in roles}
        for key, roles in monitoring.entries.items()
    }


# --- hatnote extraction -----------------------------------------------------

def test_extract_main_templates():
    text = "intro {{Main|Tsunami}} more text {{Main|Flood}} end"
    assert extract_main_article_links(text) == ["Tsunami", "Flood"]


def test_extract_handles_main_article_variant_and_duplicates():
    text = "{{Main article|Flood}}{{Main|Flood}}{{main|Tsunami}}"
    assert extract_main_article_links(text) == ["Flood", "Tsunami"]


def test_extract_dedup_matches_regex_oracle():
    text = "{{Main|Flood}}{{Main|Flood}}"
    import re
    expected = sorted({m for m in re.findall(r"\{\{Main\|([^}]*)\}\}", text)})
    assert sorted(extract_main_article_links(text)) == expected


def test_extract_skips_named_args_and_empty():
    text = "{{Main|Flood|l1=The Floods}} {{Main|}} {{Main}}"
    assert extract_main_article_links(text) == ["Flood"]


def test_extract_twenty_types_from_seed_wikitext():
    sections = "\n".join(
        f"== Section {i} ==\n{{{{Main|{title}}}}}\nprose." for i, title in enumerate(PAPER_TYPES)
    )
    titles = extract_main_article_links(sections)
    assert len(titles) == 20
    assert titles == PAPER_TYPES
    for expected in ("Avalanche", "Blizzard", "Wildfire", "Tropical cyclone"):
        assert expected in titles


def test_extract_empty_wikitext_is_valid():
    assert extract_main_article_links("no hatnotes here") == []


# --- disasters list ---------------------------------------------------------

def client_from(raw: dict) -> FixtureWikiClient:
    return FixtureWikiClient(
        {ArticleKey.parse(key): record for key, record in raw.items()}
    )


def test_disasters_list_language_versions_no_redirects():
    client = client_from({
        "en:Natural_disaster": {"langlinks": ["de:Naturkatastrophe", "fr:Catastrophe_naturelle"]},
    })
    types, report = build_disasters_list(["Natural disaster"], client)
    assert report.ok
    (disaster,) = types
    assert disaster.members == {
        ArticleKey("en", "Natural_disaster"),
        ArticleKey("de", "Naturkatastrophe"),
        ArticleKey("fr", "Catastrophe_naturelle"),
    }
    assert ArticleKey("en", "Natural_disaster") in disaster.members


def test_disasters_list_eight_redirects_carry_redirect_role():
    redirects = [
        "en:Natural_Hazard", "en:Natural_disasters", "en:Examples_of_natural_disaster",
        "en:Natural_Disaster", "en:Natural_hazards", "en:Nature_disaster",
        "en:Natural_calamity", "en:Act_of_nature",
    ]
    client = client_from({
        "en:Natural_disaster": {"langlinks": [], "redirects": redirects},
    })
    types, _ = build_disasters_list(["Natural disaster"], client)
    monitoring = build_monitoring_list(types, client, seed=SEED, built_at=0)
    for redirect in redirects:
        roles = monitoring.lookup(ArticleKey.parse(redirect))
        assert roles == {Role(RoleKind.REDIRECT, "Natural disaster")}


def test_disasters_list_skips_failing_type_and_reports():
    client = client_from({
        "en:Flood": {"langlinks": []},
        "en:Earthquake": {"error": "API down"},
    })
    types, report = build_disasters_list(["Flood", "Earthquake"], client)
    assert [t.name for t in types] == ["Flood"]
    assert not report.ok
    assert "Earthquake" in report.skipped[0][0]


def test_disasters_list_total_failure_aborts():
    client = client_from({"en:Flood": {"error": "boom"}})
    with pytest.raises(BuildError):
        build_disasters_list(["Flood"], client)


def random_graph(rng: random.Random, n_types: int, n_nodes: int) -> dict:
    """Random fixture graph over n_nodes articles with n_types type roots."""
    languages = ["en", "de", "fr"]
    raw: dict[str, dict] = {}
    nodes = [f"en:Type_{i}" for i in range(n_types)]
    for i in range(n_nodes - n_types):
        lang = rng.choice(languages)
        nodes.append(f"{lang}:Article_{i}")
    for i in range(n_types):
        root = f"en:Type_{i}"
        others = [n for n in nodes if n != root]
        langlinked = [
            f"{lang}:Type_{i}_{lang}" for lang in languages[1:] if rng.random() < 0.5
        ]
        record = {
            "langlinks": langlinked,
            "redirects": [f"en:Type_{i}_redirect"] if rng.random() < 0.5 else [],
            "backlinks": rng.sample(others, k=min(len(others), rng.randint(0, 6))),
            "links": rng.sample(others, k=min(len(others), rng.randint(0, 6))),
        }
        raw[root] = record
        for version in langlinked:
            raw[version] = {
                "backlinks": rng.sample(others, k=min(len(others), rng.randint(0, 3))),
                "links": rng.sample(others, k=min(len(others), rng.randint(0, 3))),
            }
    return raw


def test_five_type_graph_matches_traversal_oracle():
    rng = random.Random(42)
    raw = random_graph(rng, n_types=5, n_nodes=60)
    type_names = [f"Type {i}" for i in range(5)]
    client = client_from(raw)
    types, report = build_disasters_list(type_names, client)
    assert report.ok
    monitoring = build_monitoring_list(types, client, seed=SEED, built_at=0)
    assert as_plain(monitoring) == oracle_roles(raw, type_names)


def test_oracle_equivalence_on_200_node_graphs():
    for seed in (1, 2, 3):
        rng = random.Random(seed)
        raw = random_graph(rng, n_types=4, n_nodes=200)
        type_names = [f"Type {i}" for i in range(4)]
        client = client_from(raw)
        types, _ = build_disasters_list(type_names, client)
        monitoring = build_monitoring_list(types, client, seed=SEED, built_at=0)
        assert as_plain(monitoring) == oracle_roles(raw, type_names)


def test_monotonicity_adding_a_link_never_removes_entries():
    rng = random.Random(99)
    raw = random_graph(rng, n_types=3, n_nodes=40)
    type_names = [f"Type {i}" for i in range(3)]
    before = build_monitoring_list(
        build_disasters_list(type_names, client_from(raw))[0],
        client_from(raw), seed=SEED, built_at=0,
    )
    raw["en:Type_0"]["backlinks"] = raw["en:Type_0"]["backlinks"] + ["en:Brand_new_article"]
    after = build_monitoring_list(
        build_disasters_list(type_names, client_from(raw))[0],
        client_from(raw), seed=SEED, built_at=0,
    )
    assert set(before.entries) <= set(after.entries)
    for key, roles in before.entries.items():
        assert roles <= after.entries[key]


# --- Figure 1 fixture -------------------------------------------------------

def test_fig1_rammasun_is_inbound_of_tropical_cyclone(fig1_client):
    builder = MonitoringListBuilder(fig1_client, SEED)
    monitoring, _, report = builder.build(built_at=0)
    roles = monitoring.lookup(ArticleKey("en", "Typhoon_Rammasun_(2014)"))
    assert roles == {Role(RoleKind.INBOUND, "Tropical cyclone")}


def test_fig1_typhoon_season_is_mutual(fig1_client):
    builder = MonitoringListBuilder(fig1_client, SEED)
    monitoring, _, _ = builder.build(built_at=0)
    roles = monitoring.lookup(ArticleKey("en", "2014_Pacific_typhoon_season"))
    assert Role(RoleKind.MUTUAL, "Tropical cyclone") in roles
    assert Role(RoleKind.INBOUND, "Tropical cyclone") in roles
    assert Role(RoleKind.OUTBOUND, "Tropical cyclone") in roles


def test_fig1_full_roles_equal_oracle(fig1_client, fig1_raw):
    builder = MonitoringListBuilder(fig1_client, SEED)
    monitoring, _, report = builder.build(built_at=0)
    assert report.ok
    expected = oracle_roles(fig1_raw, ["Tropical cyclone", "Flood", "Earthquake"])
    assert as_plain(monitoring) == expected


def test_fig1_article_without_links_absent(fig1_client):
    builder = MonitoringListBuilder(fig1_client, SEED)
    monitoring, _, _ = builder.build(built_at=0)
    # the seed itself earns no role in this graph
    assert monitoring.lookup(SEED) is None


def test_fig1_clusters_group_language_versions(fig1_client):
    builder = MonitoringListBuilder(fig1_client, SEED)
    _, clusters, _ = builder.build(built_at=0)
    season_en = ArticleKey("en", "2014_Pacific_typhoon_season")
    season_de = ArticleKey("de", "Pazifische_Taifunsaison_2014")
    season_zh = ArticleKey("zh", "2014年太平洋颱風季")
    assert clusters.resolve(season_de) == clusters.resolve(season_en)
    assert clusters.resolve(season_zh) == clusters.resolve(season_en)
    assert clusters.members(season_en) >= {season_en, season_de, season_zh}
    # unclustered articles resolve to themselves
    lone = ArticleKey("en", "Monsoon")
    assert clusters.resolve(lone) == lone


def test_role_closure_invariant(fig1_client):
    builder = MonitoringListBuilder(fig1_client, SEED)
    monitoring, _, _ = builder.build(built_at=0)
    for roles in monitoring.entries.values():
        types_by_kind = {
            kind: {r.disaster_type for r in roles if r.kind is kind} for kind in RoleKind
        }
        assert types_by_kind[RoleKind.MUTUAL] == (
            types_by_kind[RoleKind.INBOUND] & types_by_kind[RoleKind.OUTBOUND]
        )


# --- lookup and serialization -----------------------------------------------

def test_lookup_normalizes_spacing():
    client = client_from({
        "en:Flood": {"backlinks": ["en:2011_Brazil_floods"], "links": []},
    })
    types, _ = build_disasters_list(["Flood"], client)
    monitoring = build_monitoring_list(types, client, seed=SEED, built_at=0)
    spaced = ArticleKey("en", "2011 Brazil floods")
    underscored = ArticleKey("en", "2011_Brazil_floods")
    assert monitoring.lookup(spaced) == monitoring.lookup(underscored) is not None
    assert monitoring.lookup(ArticleKey("en", "Unrelated")) is None


def test_serialize_tsv_row_for_mutual_entry(fig1_client):
    builder = MonitoringListBuilder(fig1_client, SEED)
    monitoring, _, _ = builder.build(built_at=0)
    tsv = serialize_monitoring_list(monitoring, "tsv").decode()
    assert "en:2014_Pacific_typhoon_season\tTropical cyclone\tmutual" in tsv.splitlines()


def test_serialize_json_round_trip(fig1_client):
    builder = MonitoringListBuilder(fig1_client, SEED)
    monitoring, _, _ = builder.build(built_at=1234)
    data = serialize_monitoring_list(monitoring, "json")
    assert deserialize_monitoring_list(data) == monitoring


def test_serialize_empty_list():
    from disastermon.wikigraph import MonitoringList
    empty = MonitoringList(entries={}, built_at=0, seed=SEED)
    assert deserialize_monitoring_list(serialize_monitoring_list(empty, "json")) == empty
    assert serialize_monitoring_list(empty, "txt") == b""


def test_serialize_unknown_format_rejected(fig1_client):
    builder = MonitoringListBuilder(fig1_client, SEED)
    monitoring, _, _ = builder.build(built_at=0)
    with pytest.raises(ValueError):
        serialize_monitoring_list(monitoring, "xml")


role_strategy = st.builds(
    Role,
    kind=st.sampled_from(list(RoleKind)),
    disaster_type=st.sampled_from(["Flood", "Tropical cyclone", "Earthquake"]),
)
key_strategy = st.builds(
    ArticleKey,
    language=st.sampled_from(["en", "de", "zh"]),
    title=st.text(
        alphabet=st.characters(whitelist_categories=("Lu", "Ll", "Nd")),
        min_size=1, max_size=12,
    ),
)


@settings(max_examples=50)
@given(st.dictionaries(key_strategy, st.frozensets(role_strategy, min_size=1), max_size=8),
       st.integers(min_value=0, max_value=2**53))
def test_json_round_trip_property(entries, built_at):
    from disastermon.wikigraph import MonitoringList
    monitoring = MonitoringList(entries=entries, built_at=built_at, seed=SEED)
    data = serialize_monitoring_list(monitoring, "json")
    assert deserialize_monitoring_list(data) == monitoring
