import os
import time
from contextlib import contextmanager

CRITERIA = ("S", "P")


class Timer:
    """Wall time of a block, reported as zero when timings are disabled."""

    def __init__(self, enabled=True):
        self.enabled = enabled
        self.seconds = 0.0

    @contextmanager
    def measure(self):
        started = time.perf_counter()
        try:
            yield self
        finally:
            if self.enabled:
                self.seconds = time.perf_counter() - started


def parse_criteria(text):
    """'S', 'P', 'S,P' or 'both' to an ordered tuple of criterion kinds."""
    if text.strip().lower() == "both":
        return CRITERIA
    kinds = {kind.strip().upper() for kind in text.split(",") if kind.strip()}
    unknown = kinds - set(CRITERIA)
    if not kinds or unknown:
        raise ValueError(f"criteria must be a subset of {CRITERIA}, got '{text}'")
    return tuple(kind for kind in CRITERIA if kind in kinds)


def weights_slug(name):
    """Weight scheme name usable in file names."""
    return name.replace(":", "-").replace(",", "-").replace("/", "_")


def parse_bool(text):
    return str(text).strip().lower() in ("1", "yes", "true", "on")


def env_int(name):
    value = os.environ.get(name)
    if value is None or not value.strip():
        return None
    try:
        return int(value)
    except ValueError:
        raise ValueError(f"environment variable {name} must be an integer, got '{value}'") from None
