"""Injectable clock so stream replay and the detector are testable without real time."""

from __future__ import annotations

import time


class Clock:
    """Milliseconds since the epoch, plus sleeping. Subclasses may simulate."""

    def now_ms(self) -> int:
        raise NotImplementedError

    def sleep_ms(self, duration_ms: float) -> None:
        raise NotImplementedError

    def advance_to(self, ts_ms: int) -> None:
        """Move simulated time forward; no-op on real clocks."""


class SystemClock(Clock):
    def now_ms(self) -> int:
        return int(time.time() * 1000)

    def sleep_ms(self, duration_ms: float) -> None:
        if duration_ms > 0:
            time.sleep(duration_ms / 1000.0)


class SimClock(Clock):
    """Manually driven clock; sleeps advance time instead of blocking."""

    def __init__(self, start_ms: int = 0) -> None:
        self._now = start_ms
        self.sleeps: list[float] = []

    def now_ms(self) -> int:
        return self._now

    def sleep_ms(self, duration_ms: float) -> None:
        self.sleeps.append(duration_ms)
        if duration_ms > 0:
            self._now += int(duration_ms)

    def advance_to(self, ts_ms: int) -> None:
        if ts_ms > self._now:
            self._now = ts_ms
