"""Session state for human scoring, persisted as append-only event logs.

Each session owns one JSON-lines file under `<data_dir>/sessions/`; every
line is an event `{"seq", "type", "payload", "timestamp"}` with sequence
numbers starting at 1. State is whatever replaying the log yields, so the
log is the single source of truth. A later score by the same annotator on
the same item supersedes the earlier one; the earlier event stays in the
log.

All mutations go through one lock and hit the log before they touch
in-memory state, so readers only ever observe acknowledged events.
"""

from __future__ import annotations

import csv
import io
import json
import secrets
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from ..errors import (
    CorruptLogError,
    DomainError,
    DuplicateItemIdError,
    EmptyItemsError,
    RangeError,
    UnknownItemError,
    UnknownSessionError,
)


@dataclass(frozen=True)
class AnnotationItem:
    item_id: str
    source: str
    reference: str
    hypothesis: str

    def __post_init__(self):
        if not self.item_id:
            raise DomainError("item_id must be non-empty")


@dataclass
class SessionState:
    session_id: str
    name: str
    created_at: str
    items: list[AnnotationItem]
    # effective scores only; superseded submissions live in the log
    scores: dict[tuple[str, str], float] = field(default_factory=dict)
    next_seq: int = 1

    def item_ids(self) -> list[str]:
        return [item.item_id for item in self.items]


@dataclass
class CmsAggregate:
    per_item: dict  # item_id -> {"mean": float, "n_annotators": int}
    corpus_cms: float | None
    coverage: float

    def to_json_dict(self) -> dict:
        return {
            "per_item": self.per_item,
            "corpus_cms": self.corpus_cms,
            "coverage": self.coverage,
        }


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _validate_items(raw_items) -> list[AnnotationItem]:
    if not raw_items:
        raise EmptyItemsError("a session needs at least one item")
    items = []
    seen = set()
    for item in raw_items:
        if not isinstance(item, AnnotationItem):
            item = AnnotationItem(**item)
        if item.item_id in seen:
            raise DuplicateItemIdError(f"duplicate item_id {item.item_id!r}")
        seen.add(item.item_id)
        items.append(item)
    return items


def _apply_event(state: SessionState | None, event: dict,
                 line_no: int, path) -> SessionState:
    def bad(message: str):
        return CorruptLogError(f"{path}:{line_no}: {message}")

    for key in ("seq", "type", "payload", "timestamp"):
        if key not in event:
            raise bad(f"event missing {key!r}")
    expected = 1 if state is None else state.next_seq
    if event["seq"] != expected:
        raise bad(f"sequence number {event['seq']}, expected {expected}")
    payload = event["payload"]
    if event["type"] == "create":
        if state is not None:
            raise bad("second create event")
        try:
            items = _validate_items(payload["items"])
            state = SessionState(
                session_id=payload["session_id"],
                name=payload["name"],
                created_at=event["timestamp"],
                items=items,
            )
        except (KeyError, TypeError, DomainError) as exc:
            raise bad(f"bad create payload: {exc}") from exc
    elif event["type"] == "score":
        if state is None:
            raise bad("score event before create")
        try:
            annotator = payload["annotator"]
            item_id = payload["item_id"]
            value = payload["value"]
        except (KeyError, TypeError) as exc:
            raise bad(f"bad score payload: {exc}") from exc
        if item_id not in state.item_ids():
            raise bad(f"score for unknown item {item_id!r}")
        if not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
            raise bad(f"score value {value!r} outside [0, 1]")
        state.scores[(annotator, item_id)] = float(value)
    else:
        raise bad(f"unknown event type {event['type']!r}")
    state.next_seq = expected + 1
    return state


def replay_log(path: str | Path) -> SessionState | None:
    """Rebuild session state from one event log; None for an empty file."""
    path = Path(path)
    state: SessionState | None = None
    with path.open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                event = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorruptLogError(f"{path}:{line_no}: {exc}") from exc
            if not isinstance(event, dict):
                raise CorruptLogError(f"{path}:{line_no}: event is not an object")
            state = _apply_event(state, event, line_no, path)
    return state


class CmsStore:
    """All sessions under one data directory, one log file each."""

    def __init__(self, data_dir: str | Path, id_factory=None):
        self.sessions_dir = Path(data_dir) / "sessions"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self._id_factory = id_factory or (lambda: secrets.token_hex(16))
        self._lock = threading.Lock()
        self._sessions: dict[str, SessionState] = {}
        for log_path in sorted(self.sessions_dir.glob("*.jsonl")):
            state = replay_log(log_path)
            if state is not None:
                if state.session_id != log_path.stem:
                    raise CorruptLogError(
                        f"{log_path}: session_id {state.session_id!r} "
                        f"does not match file name"
                    )
                self._sessions[state.session_id] = state

    def _log_path(self, session_id: str) -> Path:
        return self.sessions_dir / f"{session_id}.jsonl"

    def _append(self, session_id: str, seq: int, event_type: str,
                payload: dict) -> str:
        timestamp = _now()
        line = json.dumps(
            {"seq": seq, "type": event_type, "payload": payload,
             "timestamp": timestamp},
            ensure_ascii=False,
        )
        with self._log_path(session_id).open("a", encoding="utf-8") as handle:
            handle.write(line + "\n")
            handle.flush()
        return timestamp

    def _get(self, session_id: str) -> SessionState:
        state = self._sessions.get(session_id)
        if state is None:
            raise UnknownSessionError(f"no session {session_id!r}")
        return state

    def create_session(self, name: str, raw_items) -> SessionState:
        items = _validate_items(raw_items)
        with self._lock:
            session_id = self._id_factory()
            if session_id in self._sessions:
                raise DomainError(f"session id collision on {session_id!r}")
            payload = {
                "session_id": session_id,
                "name": name,
                "items": [vars(item) for item in items],
            }
            timestamp = self._append(session_id, 1, "create", payload)
            state = SessionState(
                session_id=session_id, name=name,
                created_at=timestamp, items=items, next_seq=2,
            )
            self._sessions[session_id] = state
            return state

    def get_session(self, session_id: str) -> SessionState:
        with self._lock:
            return self._get(session_id)

    def submit_score(self, session_id: str, annotator: str,
                     item_id: str, value: float) -> None:
        if not annotator:
            raise DomainError("annotator must be non-empty")
        with self._lock:
            state = self._get(session_id)
            if item_id not in state.item_ids():
                raise UnknownItemError(
                    f"no item {item_id!r} in session {session_id!r}"
                )
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise RangeError(f"score value {value!r} is not a number")
            if not 0.0 <= value <= 1.0:
                raise RangeError(f"score value {value} outside [0, 1]")
            payload = {"annotator": annotator, "item_id": item_id,
                       "value": float(value)}
            self._append(session_id, state.next_seq, "score", payload)
            state.scores[(annotator, item_id)] = float(value)
            state.next_seq += 1

    def next_item(self, session_id: str, annotator: str) -> AnnotationItem | None:
        if not annotator:
            raise DomainError("annotator must be non-empty")
        with self._lock:
            state = self._get(session_id)
            for item in state.items:
                if (annotator, item.item_id) not in state.scores:
                    return item
            return None

    @staticmethod
    def _aggregate_of(state: SessionState) -> CmsAggregate:
        by_item: dict[str, list[float]] = {}
        for (_, item_id), value in state.scores.items():
            by_item.setdefault(item_id, []).append(value)
        per_item = {
            item.item_id: {
                "mean": sum(vals) / len(vals),
                "n_annotators": len(vals),
            }
            for item in state.items
            if (vals := by_item.get(item.item_id))
        }
        means = [entry["mean"] for entry in per_item.values()]
        corpus = sum(means) / len(means) if means else None
        coverage = len(per_item) / len(state.items)
        return CmsAggregate(per_item=per_item, corpus_cms=corpus,
                            coverage=coverage)

    def aggregate(self, session_id: str) -> CmsAggregate:
        with self._lock:
            return self._aggregate_of(self._get(session_id))

    def export_csv(self, session_id: str) -> str:
        with self._lock:
            state = self._get(session_id)
            aggregate = self._aggregate_of(state)
            buffer = io.StringIO()
            writer = csv.writer(buffer, lineterminator="\n")
            writer.writerow(
                ["item_id", "source", "reference", "hypothesis",
                 "n_annotators", "cms_mean"]
            )
            for item in state.items:
                entry = aggregate.per_item.get(item.item_id)
                writer.writerow([
                    item.item_id, item.source, item.reference, item.hypothesis,
                    entry["n_annotators"] if entry else 0,
                    f"{entry['mean']:.4f}" if entry else "",
                ])
            return buffer.getvalue()

    def session_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._sessions)
