"""Coordinates for spiking articles and the centroid used for maps and CAP areas."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .articles import ArticleKey
from .wikiclient import WikiClient, WikiClientError


@dataclass(frozen=True, slots=True)
class GeoPoint:
    lat: float
    lon: float
    source: ArticleKey | None = None

    def __post_init__(self) -> None:
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")


def fetch_cluster_coordinates(
    key: ArticleKey,
    langlinks: Iterable[ArticleKey],
    client: WikiClient,
) -> list[GeoPoint]:
    """Coordinates of the article and each language version, in query order.

    Versions without coordinates (or whose lookup fails) contribute nothing;
    an empty list means the candidate proceeds without geo data.
    """
    points: list[GeoPoint] = []
    queried: set[ArticleKey] = set()
    for member in [key, *langlinks]:
        if member in queried:
            continue
        queried.add(member)
        try:
            coords = client.coordinates(member)
        except WikiClientError:
            continue
        if coords is None:
            continue
        points.append(GeoPoint(lat=coords[0], lon=coords[1], source=member))
    return points


def centroid(points: list[GeoPoint]) -> GeoPoint | None:
    """Arithmetic mean of latitudes and longitudes; None for no points.

    Deliberately naive: points straddling the antimeridian average toward 0.
    A spherical mean stays behind a future config flag.
    """
    if not points:
        return None
    # fsum is exactly rounded, which makes the mean order-independent
    lat = math.fsum(p.lat for p in points) / len(points)
    lon = math.fsum(p.lon for p in points) / len(points)
    return GeoPoint(lat=lat, lon=lon, source=None)
