"""Event-level detection metrics."""
from __future__ import annotations

import heapq
import logging
from collections.abc import Sequence

from .exceptions import ConfigError
from .models import DetectionReport, PerturbationEvent

_LOGGER = logging.getLogger(__name__)


def match_flags(
    flags: Sequence[int],
    events: Sequence[PerturbationEvent],
    tolerance: int,
) -> list[tuple[int, int]]:
    """Return one-to-one (flag, event index) pairs.

    A flag may match an event when it lies in [start - tolerance, end + tolerance].
    Flags are scanned in time order and each takes the open event that closes
    first, which yields a maximum matching for points against intervals.
    """
    windows = sorted(
        (event.start - tolerance, event.end + tolerance, position)
        for position, event in enumerate(events)
    )

    pairs: list[tuple[int, int]] = []
    open_events: list[tuple[int, int]] = []
    cursor = 0
    for flag in sorted(flags):
        while cursor < len(windows) and windows[cursor][0] <= flag:
            _, end, position = windows[cursor]
            heapq.heappush(open_events, (end, position))
            cursor += 1

        while open_events and open_events[0][0] < flag:
            heapq.heappop(open_events)

        if open_events:
            _, position = heapq.heappop(open_events)
            pairs.append((flag, position))

    return pairs


def f1_score(precision: float, recall: float) -> float:
    """Return the harmonic mean, 0 when both inputs are 0."""
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def evaluate_detection(
    flags: Sequence[int],
    events: Sequence[PerturbationEvent],
    tolerance: int,
) -> DetectionReport:
    """Score flagged indices against ground-truth perturbation events."""
    if tolerance < 0:
        raise ConfigError(f"Match tolerance must be nonnegative, got {tolerance}")  # noqa: EM102

    flags = sorted(int(f) for f in flags)
    pairs = match_flags(flags, events, tolerance)

    precision = len(pairs) / len(flags) if flags else 0.0
    recall = len(pairs) / len(events) if events else 0.0

    report = DetectionReport(
        flags=flags,
        matched_events=sorted(position for _, position in pairs),
        matched_flags=sorted(flag for flag, _ in pairs),
        n_events=len(events),
        precision=precision,
        recall=recall,
        f1=f1_score(precision, recall),
        tolerance=tolerance,
    )
    _LOGGER.debug(
        "Detection: %s flags, %s events, F1 %.3f",
        len(flags),
        len(events),
        report.f1,
    )
    return report
