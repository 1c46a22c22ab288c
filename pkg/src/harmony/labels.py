"""Append-only curator label log with newest-wins state reduction.

Records are JSON lines. A crash can leave a truncated final line; replay
tolerates exactly that (a malformed line anywhere else is data corruption
and raises). The current state keeps the newest record per
(source, target, curator); corrections are new appends, never edits.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterator

from .errors import MalformedVerdictError

VERDICTS = ("accept", "reject")


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class MatchLabel:
    source_name: str
    target_name: str
    verdict: str
    curator_id: str
    timestamp: str

    def __post_init__(self) -> None:
        if self.verdict not in VERDICTS:
            raise MalformedVerdictError(self.verdict)

    def key(self) -> tuple[str, str, str]:
        return (self.source_name, self.target_name, self.curator_id)

    def to_dict(self) -> dict:
        return {
            "source": self.source_name,
            "target": self.target_name,
            "verdict": self.verdict,
            "curator": self.curator_id,
            "ts": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MatchLabel":
        return cls(
            source_name=d["source"],
            target_name=d["target"],
            verdict=d["verdict"],
            curator_id=d["curator"],
            timestamp=d["ts"],
        )


class LabelStore:
    """JSONL-backed label log; appends serialize through one lock."""

    def __init__(self, path: str | Path, clock: Callable[[], str] = utc_now_iso):
        self.path = Path(path)
        self.clock = clock
        self._lock = threading.Lock()
        self._records: list[MatchLabel] = []
        if self.path.exists():
            self._records = list(self._replay())

    def _replay(self) -> Iterator[MatchLabel]:
        raw = self.path.read_text(encoding="utf-8")
        lines = raw.split("\n")
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                yield MatchLabel.from_dict(json.loads(line))
            except json.JSONDecodeError:
                if i == len(lines) - 1:
                    # Torn final write; drop it and keep the valid prefix.
                    return
                raise

    def append(
        self, source_name: str, target_name: str, verdict: str, curator_id: str
    ) -> int:
        """Persist one record and return its id (log position)."""
        label = MatchLabel(
            source_name=source_name,
            target_name=target_name,
            verdict=verdict,
            curator_id=curator_id,
            timestamp=self.clock(),
        )
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(label.to_dict(), sort_keys=True) + "\n")
                fh.flush()
            self._records.append(label)
            return len(self._records) - 1

    def __len__(self) -> int:
        return len(self._records)

    def records(self) -> list[MatchLabel]:
        return list(self._records)

    def current_state(self) -> dict[tuple[str, str, str], MatchLabel]:
        """Newest record per (source, target, curator)."""
        state: dict[tuple[str, str, str], MatchLabel] = {}
        for rec in self._records:
            state[rec.key()] = rec
        return state

    def accepted_pairs(self) -> set[tuple[str, str]]:
        """Pairs whose newest record across curators is an accept."""
        latest: dict[tuple[str, str], MatchLabel] = {}
        for rec in self._records:
            latest[(rec.source_name, rec.target_name)] = rec
        return {pair for pair, rec in latest.items() if rec.verdict == "accept"}
