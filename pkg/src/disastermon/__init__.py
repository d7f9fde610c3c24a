"""Wikipedia-based realtime disaster detection and monitoring service.

The package watches a live (or replayed) stream of Wikipedia edit events,
matches them against a link-structure-derived monitoring list, flags
editing-activity spikes, attaches geo coordinates and social-media
galleries to the resulting candidates, and publishes operator-confirmed
alerts as CAP 1.2 documents queryable through a Triple Pattern Fragments
endpoint.
"""

__version__ = "0.1.0"
