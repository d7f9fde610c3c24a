"""Common Alerting Protocol 1.2 encoding and decoding.

Documents are modeled closely after the GDACS feed shape: one <alert> with
one <info> block, flat name/value parameters, and a single area. Parsing
preserves unknown parameters and a polygon area verbatim so that a parsed
feed re-renders without losing fields; documents we emit ourselves always
use a circle ("lat,lon radius-km") instead of the feed's degenerate polygon.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import datetime

CAP_NS = "urn:oasis:names:tc:emergency:cap:1.2"


class CapError(ValueError):
    """Malformed or unsupported CAP document."""


@dataclass(frozen=True)
class CapArea:
    area_desc: str = ""
    circle: str | None = None
    polygon: str | None = None


@dataclass(frozen=True)
class CapDocument:
    identifier: str
    sender: str
    sent: str
    status: str = "Exercise"
    msg_type: str = "Alert"
    scope: str = "Public"
    incidents: str | None = None
    category: str = "Other"
    event: str = ""
    urgency: str = "Unknown"
    severity: str = "Unknown"
    certainty: str = "Unknown"
    sender_name: str = ""
    headline: str = ""
    description: str = ""
    web: str = ""
    parameters: tuple[tuple[str, str], ...] = ()
    area: CapArea | None = None

    def __post_init__(self) -> None:
        if not self.identifier:
            raise CapError("identifier must be non-empty")
        parse_cap_timestamp(self.sent)

    def parameter(self, name: str) -> str | None:
        for key, value in self.parameters:
            if key == name:
                return value
        return None


def parse_cap_timestamp(text: str) -> datetime:
    """Validate the ISO-8601-with-numeric-offset timestamp CAP requires."""
    try:
        parsed = datetime.fromisoformat(text)
    except ValueError as exc:
        raise CapError(f"unparseable sent timestamp: {text!r}") from exc
    if parsed.tzinfo is None:
        raise CapError(f"sent timestamp lacks a numeric offset: {text!r}")
    return parsed


def format_cap_timestamp(epoch_ms: int) -> str:
    from datetime import timezone

    return datetime.fromtimestamp(epoch_ms / 1000.0, tz=timezone.utc).isoformat(
        timespec="seconds"
    )


def _tag(name: str) -> str:
    return f"{{{CAP_NS}}}{name}"


def _child(parent: ET.Element, name: str, text: str | None) -> ET.Element:
    element = ET.SubElement(parent, _tag(name))
    element.text = text if text else None
    return element


def render_cap(doc: CapDocument) -> bytes:
    """Serialize to CAP 1.2 XML with the GDACS element order."""
    ET.register_namespace("", CAP_NS)
    alert = ET.Element(_tag("alert"))
    _child(alert, "identifier", doc.identifier)
    _child(alert, "sender", doc.sender)
    _child(alert, "sent", doc.sent)
    _child(alert, "status", doc.status)
    _child(alert, "msgType", doc.msg_type)
    _child(alert, "scope", doc.scope)
    if doc.incidents is not None:
        _child(alert, "incidents", doc.incidents)
    info = ET.SubElement(alert, _tag("info"))
    _child(info, "category", doc.category)
    _child(info, "event", doc.event)
    _child(info, "urgency", doc.urgency)
    _child(info, "severity", doc.severity)
    _child(info, "certainty", doc.certainty)
    _child(info, "senderName", doc.sender_name)
    _child(info, "headline", doc.headline)
    _child(info, "description", doc.description)
    _child(info, "web", doc.web)
    for name, value in doc.parameters:
        parameter = ET.SubElement(info, _tag("parameter"))
        _child(parameter, "valueName", name)
        _child(parameter, "value", value)
    if doc.area is not None:
        area = ET.SubElement(info, _tag("area"))
        _child(area, "areaDesc", doc.area.area_desc)
        if doc.area.circle is not None:
            _child(area, "circle", doc.area.circle)
        if doc.area.polygon is not None:
            _child(area, "polygon", doc.area.polygon)
    return ET.tostring(alert, encoding="utf-8", xml_declaration=False)


def _text(element: ET.Element | None) -> str:
    if element is None or element.text is None:
        return ""
    return element.text


def _require(parent: ET.Element, name: str) -> str:
    element = parent.find(_tag(name))
    if element is None:
        raise CapError(f"missing {name}")
    return _text(element)


def parse_cap(data: bytes | str) -> CapDocument:
    """Parse CAP 1.2 XML; wrong namespace or absent core fields raise CapError."""
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise CapError(f"not well-formed XML: {exc}") from exc
    if root.tag != _tag("alert"):
        raise CapError(
            f"expected {{{CAP_NS}}}alert, got {root.tag!r}"
        )
    identifier = _require(root, "identifier")
    if not identifier:
        raise CapError("missing identifier")
    sender = _require(root, "sender")
    if not sender:
        raise CapError("missing sender")
    sent = _require(root, "sent")
    if not sent:
        raise CapError("missing sent")
    incidents_el = root.find(_tag("incidents"))
    info = root.find(_tag("info"))
    if info is None:
        raise CapError("missing info")

    parameters: list[tuple[str, str]] = []
    for parameter in info.findall(_tag("parameter")):
        parameters.append((
            _text(parameter.find(_tag("valueName"))),
            _text(parameter.find(_tag("value"))),
        ))

    area_el = info.find(_tag("area"))
    area = None
    if area_el is not None:
        circle_el = area_el.find(_tag("circle"))
        polygon_el = area_el.find(_tag("polygon"))
        area = CapArea(
            area_desc=_text(area_el.find(_tag("areaDesc"))),
            circle=_text(circle_el) if circle_el is not None else None,
            polygon=_text(polygon_el) if polygon_el is not None else None,
        )

    return CapDocument(
        identifier=identifier,
        sender=sender,
        sent=sent,
        status=_text(root.find(_tag("status"))),
        msg_type=_text(root.find(_tag("msgType"))),
        scope=_text(root.find(_tag("scope"))),
        incidents=_text(incidents_el) if incidents_el is not None else None,
        category=_text(info.find(_tag("category"))),
        event=_text(info.find(_tag("event"))),
        urgency=_text(info.find(_tag("urgency"))),
        severity=_text(info.find(_tag("severity"))),
        certainty=_text(info.find(_tag("certainty"))),
        sender_name=_text(info.find(_tag("senderName"))),
        headline=_text(info.find(_tag("headline"))),
        description=_text(info.find(_tag("description"))),
        web=_text(info.find(_tag("web"))),
        parameters=tuple(parameters),
        area=area,
    )


def format_circle(lat: float, lon: float, radius_km: float) -> str:
    """CAP circle value: "lat,lon radius-km" with integral floats trimmed."""

    def fmt(value: float) -> str:
        return str(int(value)) if float(value).is_integer() else repr(float(value))

    return f"{fmt(lat)},{fmt(lon)} {fmt(radius_km)}"
