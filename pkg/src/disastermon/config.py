"""Service configuration: one dataclass, loadable from a JSON file, with
every field overridable from the CLI (and env vars via the CLI's
DISASTERMON_ prefix)."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .candidates import CapConfig
from .detector import DetectorConfig
from .editstream import FieldMap
from .media import LOOSE_ORDER_VARYING_SIZE, GALLERY_STYLES, RankWeights
from .rdf import DEFAULT_PAGE_SIZE, VocabConfig


@dataclass
class ServiceConfig:
    seed: str = "en:Natural_disaster"
    stream_url: str | None = None
    replay_path: str | None = None
    replay_speed: float = math.inf
    fixture_wiki_dir: str | None = None
    wiki_api_template: str = "https://{language}.wikipedia.org/w/api.php"
    provider_config: str | None = None
    data_dir: str = "data"
    host: str = "127.0.0.1"
    port: int = 8420
    public_base_url: str | None = None
    refresh_interval_s: int = 3600
    queue_capacity: int = 10_000
    gallery_style: str = LOOSE_ORDER_VARYING_SIZE
    gallery_columns: int = 4
    gallery_size: int = 20
    page_size: int = DEFAULT_PAGE_SIZE
    enrich_inline: bool = False
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    cap: CapConfig = field(default_factory=CapConfig)
    vocab: VocabConfig = field(default_factory=VocabConfig)
    rank_weights: RankWeights = field(default_factory=RankWeights)
    field_map: FieldMap = field(default_factory=FieldMap)

    def __post_init__(self) -> None:
        if self.refresh_interval_s <= 0:
            raise ValueError("refresh interval must be positive")
        if self.gallery_style not in GALLERY_STYLES:
            raise ValueError(f"unknown gallery style: {self.gallery_style!r}")
        if self.page_size <= 0 or self.gallery_columns <= 0 or self.gallery_size <= 0:
            raise ValueError("page size, gallery columns and size must be positive")
        if self.replay_speed <= 0:
            raise ValueError("replay speed must be positive")

    @property
    def base_url(self) -> str:
        return self.public_base_url or f"http://{self.host}:{self.port}"

    def resolved_cap(self) -> CapConfig:
        return dataclasses.replace(self.cap, public_base_url=self.base_url)

    def ensure_data_dir(self) -> Path:
        path = Path(self.data_dir)
        path.mkdir(parents=True, exist_ok=True)
        return path


_NESTED_SECTIONS = {
    "detector": DetectorConfig,
    "cap": CapConfig,
    "vocab": VocabConfig,
    "rank_weights": RankWeights,
    "field_map": FieldMap,
}


def config_from_dict(raw: dict[str, Any]) -> ServiceConfig:
    known = {f.name for f in dataclasses.fields(ServiceConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    kwargs: dict[str, Any] = {}
    for key, value in raw.items():
        if key in _NESTED_SECTIONS and isinstance(value, dict):
            section_cls = _NESTED_SECTIONS[key]
            if key == "cap" and "category_map" in value:
                value = dict(value)
                value["category_map"] = tuple(
                    (k, v) for k, v in sorted(value["category_map"].items())
                )
            kwargs[key] = section_cls(**value)
        elif key == "replay_speed" and value in ("inf", None):
            kwargs[key] = math.inf
        else:
            kwargs[key] = value
    return ServiceConfig(**kwargs)


def load_config(path: str | Path | None, overrides: dict[str, Any] | None = None) -> ServiceConfig:
    """Defaults, then the JSON config file, then non-None overrides."""
    raw: dict[str, Any] = {}
    if path is not None:
        raw.update(json.loads(Path(path).read_text(encoding="utf-8")))
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    return config_from_dict(raw)
