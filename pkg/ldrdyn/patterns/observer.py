"""Observer / Subject utilities.

A `Subject` holds callable subscribers which are notified with
``(event_name, payload)``. Propagators emit:

  - 'propagate:start' with payload {'method':..., 'steps':..., 'dt':...}
  - 'propagate:record' with payload {'step':..., 'steps':..., 'row': dict}
  - 'propagate:done' with payload {'method':..., 'records':...}
"""

from __future__ import annotations

import logging
from typing import Any, Callable

logger = logging.getLogger(__name__)

Subscriber = Callable[[str, Any], None]


class Subject:
    """A simple subject that holds subscribers and notifies them."""

    def __init__(self) -> None:
        self._subs: list[Subscriber] = []

    def subscribe(self, fn: Subscriber) -> None:
        """Add a subscriber callable(fn(event_name, payload))."""
        if fn not in self._subs:
            self._subs.append(fn)

    def unsubscribe(self, fn: Subscriber) -> None:
        if fn in self._subs:
            self._subs.remove(fn)

    def notify(self, event: str, payload: Any = None) -> None:
        for fn in list(self._subs):
            try:
                fn(event, payload)
            except Exception:
                # subscriber exceptions shouldn't break a running propagation
                logger.debug("Subscriber %r failed on %s", fn, event, exc_info=True)


class ProgressLogger:
    """Subscriber that logs propagation progress roughly every ``percent`` percent."""

    def __init__(self, percent: int = 10, log: logging.Logger | None = None) -> None:
        self.percent = max(1, percent)
        self.log = log or logger
        self._next = 0

    def __call__(self, event: str, payload: Any) -> None:
        if event == "propagate:start":
            self._next = 0
            self.log.info(
                "Propagating %s: %d steps of dt=%g",
                payload["method"],
                payload["steps"],
                payload["dt"],
            )
        elif event == "propagate:record":
            steps = max(1, payload["steps"])
            done = 100 * payload["step"] // steps
            if done >= self._next:
                row = payload["row"]
                self.log.info("  %3d%%  t=%-8.3f norm=%.12f", done, row["t"], row["norm"])
                self._next = done + self.percent
        elif event == "propagate:done":
            self.log.info("%s finished with %d records", payload["method"], payload["records"])
