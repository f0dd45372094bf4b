"""Annotation-assist service: score a pasted interview, let an expert fix it.

A submitted document is split into sentences, every (sentence, trained
label) pair is scored once, and labels at or above their tuned threshold
become suggestions.  Experts then accept or reject suggestions and add
missed labels; the decision log is the only mutable state, one append-only
JSON-lines file per document, so a session can always be rebuilt by
re-scoring the text (inference is deterministic) and replaying the log.

Missed labels are the expensive mistake in this workflow, so exports lean on
the expert having pruned false positives: a sentence's final label set is
(suggested minus rejected) union added.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from .corpus import tokenize
from .model import Model
from .taxonomy import Taxonomy

_ABBREVIATIONS = frozenset(
    "mr mrs ms dr prof rev fr sr jr st no vs etc e.g i.e cf al approx".split()
)
_TERMINALS = ".!?"


def split_sentences(text: str) -> list[str]:
    """Rule-based splitting at ``.!?`` before whitespace+capital or end.

    A dotted abbreviation directly before the period suppresses the split,
    so "Mr. X came." stays one sentence.
    """
    sentences: list[str] = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        if text[i] not in _TERMINALS:
            i += 1
            continue
        j = i
        while j + 1 < n and text[j + 1] in _TERMINALS:
            j += 1
        k = i - 1
        while k >= 0 and not text[k].isspace():
            k -= 1
        word = text[k + 1 : i].lower().strip("\"'()[]")
        is_abbreviation = text[i] == "." and word in _ABBREVIATIONS
        m = j + 1
        while m < n and text[m].isspace():
            m += 1
        at_end = m >= n
        next_is_capital = m > j + 1 and m < n and text[m].isupper()
        if (at_end or next_is_capital) and not is_abbreviation:
            chunk = text[start : j + 1].strip()
            if chunk:
                sentences.append(chunk)
            start = j + 1
        i = j + 1
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


@dataclass(frozen=True)
class Suggestion:
    label: str
    score: float
    threshold: float

    @property
    def suggested(self) -> bool:
        return self.score >= self.threshold

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "score": round(self.score, 6),
            "threshold": self.threshold,
            "suggested": self.suggested,
        }


class DecisionError(ValueError):
    pass


@dataclass
class DocumentSession:
    """Immutable scores plus an append-only decision log."""

    doc_id: str
    text: str
    sentences: list[str]
    tokens: list[list[str]]
    labels: list[str]
    scores: np.ndarray  # (n_sentences, n_labels)
    thresholds: dict[str, float]
    decisions: list[dict] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.scores.setflags(write=False)  # only the decision log may change

    def suggestion_rows(self) -> list[list[Suggestion]]:
        rows = []
        for s_idx in range(len(self.sentences)):
            row = [
                Suggestion(label, float(self.scores[s_idx, l_idx]), self.thresholds[label])
                for l_idx, label in enumerate(self.labels)
            ]
            row.sort(key=lambda s: (-s.score, s.label))
            rows.append(row)
        return rows

    def _suggested_sets(self) -> list[set[str]]:
        return [
            {s.label for s in row if s.suggested} for row in self.suggestion_rows()
        ]

    def apply_decision(self, idx: int, label: str, action: str) -> dict:
        if not 0 <= idx < len(self.sentences):
            raise DecisionError(f"sentence index {idx} out of range")
        if label not in self.labels:
            raise DecisionError(f"unknown label {label!r}")
        if action not in ("accept", "reject", "add"):
            raise DecisionError(f"unknown action {action!r}")
        suggested = label in self._suggested_sets()[idx]
        added_before = any(
            d["idx"] == idx and d["label"] == label and d["action"] == "add"
            for d in self.decisions
        )
        if action == "add" and suggested:
            raise DecisionError("cannot add a label that is already suggested")
        if action in ("accept", "reject") and not (suggested or added_before):
            raise DecisionError(f"cannot {action} a label that was never suggested or added")
        record = {"seq": len(self.decisions) + 1, "idx": idx, "label": label, "action": action}
        self.decisions.append(record)
        return record

    def final_label_sets(self) -> list[set[str]]:
        """Replay the log over the suggestions: add shows, reject hides."""
        visible = self._suggested_sets()
        for d in sorted(self.decisions, key=lambda d: d["seq"]):
            target = visible[d["idx"]]
            if d["action"] in ("add", "accept"):
                target.add(d["label"])
            else:
                target.discard(d["label"])
        return visible

    def export_gold(self) -> str:
        """JSON-lines of corrected records; ingestible by the corpus loader."""
        lines = []
        for idx, labels in enumerate(self.final_label_sets()):
            record = {
                "id": f"{self.doc_id}-s{idx:03d}",
                "text": self.sentences[idx],
                "t3_labels": sorted(labels),
            }
            if not labels:
                record["empty_labels"] = True
            lines.append(json.dumps(record, ensure_ascii=False, sort_keys=True))
        return "\n".join(lines) + "\n"


def document_id(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


def predict_document(model: Model, text: str, thresholds: dict[str, float] | None = None) -> DocumentSession:
    """Split, score, and package a document session without any persistence."""
    sentences = split_sentences(text)
    if not sentences:
        raise ValueError("empty document")
    tokens = [tokenize(s) for s in sentences]
    empty = [i for i, t in enumerate(tokens) if not t]
    if empty:
        raise ValueError(f"sentence {empty[0]} has no tokens")
    labels = list(model.trained_labels)
    if thresholds is None:
        thresholds = {label: (model.thresholds or {}).get(label, 0.5) for label in labels}
    pairs = [(toks, label) for toks in tokens for label in labels]
    flat = model.score_pairs(pairs)["t3"]
    return DocumentSession(
        doc_id=document_id(text),
        text=text,
        sentences=sentences,
        tokens=tokens,
        labels=labels,
        scores=flat.reshape(len(sentences), len(labels)),
        thresholds=thresholds,
    )


class AnnotationService:
    """Model + taxonomy + per-document decision logs under one directory."""

    def __init__(self, model: Model, data_dir: str | Path):
        self.model = model
        self.taxonomy: Taxonomy = model.taxonomy
        self.labels = list(model.trained_labels)
        self.thresholds = {
            label: (model.thresholds or {}).get(label, 0.5) for label in self.labels
        }
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, DocumentSession] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def _lock_for(self, doc_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(doc_id, threading.Lock())

    def _log_path(self, doc_id: str) -> Path:
        return self.data_dir / f"{doc_id}.jsonl"

    def _score_document(self, doc_id: str, text: str) -> DocumentSession:
        session = predict_document(self.model, text, thresholds=dict(self.thresholds))
        assert session.doc_id == doc_id
        return session

    def predict_document(self, text: str) -> DocumentSession:
        """Create (or rebuild) the session for this text; idempotent."""
        doc_id = document_id(text)
        with self._lock_for(doc_id):
            session = self._sessions.get(doc_id)
            if session is None:
                session = self._score_document(doc_id, text)
                log = self._log_path(doc_id)
                if log.exists():
                    self._replay_log(session, log)
                else:
                    with open(log, "w", encoding="utf-8") as fh:
                        fh.write(json.dumps({"kind": "document", "doc_id": doc_id, "text": text}) + "\n")
                self._sessions[doc_id] = session
            return session

    def _replay_log(self, session: DocumentSession, log: Path) -> None:
        with open(log, encoding="utf-8") as fh:
            for line in fh:
                record = json.loads(line)
                if record.get("kind") == "decision":
                    session.apply_decision(record["idx"], record["label"], record["action"])

    def get_session(self, doc_id: str) -> DocumentSession:
        with self._lock_for(doc_id):
            session = self._sessions.get(doc_id)
            if session is not None:
                return session
            log = self._log_path(doc_id)
            if not log.exists():
                raise KeyError(doc_id)
            with open(log, encoding="utf-8") as fh:
                head = json.loads(fh.readline())
            if head.get("kind") != "document":
                raise ValueError(f"corrupt decision log for {doc_id}")
            session = self._score_document(doc_id, head["text"])
            self._replay_log(session, log)
            self._sessions[doc_id] = session
            return session

    def apply_decision(self, doc_id: str, idx: int, label: str, action: str) -> dict:
        session = self.get_session(doc_id)
        with self._lock_for(doc_id):
            record = session.apply_decision(idx, label, action)
            with open(self._log_path(doc_id), "a", encoding="utf-8") as fh:
                fh.write(json.dumps({"kind": "decision", **record}) + "\n")
            return record

    def export_gold(self, doc_id: str) -> str:
        return self.get_session(doc_id).export_gold()

    def taxonomy_tree(self) -> dict:
        trained = set(self.labels)
        tree: dict = {"t1": []}
        for t1 in self.taxonomy.t1_ids:
            first_t2 = self.taxonomy.t1_members[t1][0]
            t1_name = self.taxonomy.node(self.taxonomy.t2_members[first_t2][0]).t1_name
            groups = []
            for t2 in self.taxonomy.t1_members[t1]:
                members = [self.taxonomy.node(t3) for t3 in self.taxonomy.t2_members[t2]]
                groups.append(
                    {
                        "id": t2,
                        "name": members[0].t2_name,
                        "t3": [
                            {
                                "id": node.t3,
                                "name": node.name,
                                "description": node.description,
                                "trained": node.t3 in trained,
                            }
                            for node in members
                        ],
                    }
                )
            tree["t1"].append({"id": t1, "name": t1_name, "t2": groups})
        return tree

    def session_json(self, session: DocumentSession) -> dict:
        return {
            "doc_id": session.doc_id,
            "sentences": [
                {
                    "idx": idx,
                    "text": session.sentences[idx],
                    "suggestions": [s.to_json() for s in row],
                    "decisions": [d for d in session.decisions if d["idx"] == idx],
                }
                for idx, row in enumerate(session.suggestion_rows())
            ],
        }


# -- HTTP layer ----------------------------------------------------------------

_DOC_ROUTE = re.compile(r"^/documents/([0-9a-f]{12})/(decisions|export)$")


class _Handler(BaseHTTPRequestHandler):
    service: AnnotationService
    static_dir: Path | None = None

    def log_message(self, *args):  # quiet by default; tests capture enough
        pass

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_error_json(self, status: int, code: str, message: str) -> None:
        self._send_json(status, {"code": code, "message": message})

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length", "0"))
        if length == 0:
            return {}
        raw = self.rfile.read(length)
        try:
            payload = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise DecisionError("request body is not valid JSON")
        if not isinstance(payload, dict):
            raise DecisionError("request body must be a JSON object")
        return payload

    def do_GET(self) -> None:
        try:
            if self.path == "/health":
                self._send_json(200, {"status": "ok"})
                return
            if self.path == "/taxonomy":
                self._send_json(200, self.service.taxonomy_tree())
                return
            match = _DOC_ROUTE.match(self.path)
            if match and match.group(2) == "export":
                try:
                    body = self.service.export_gold(match.group(1)).encode("utf-8")
                except KeyError:
                    self._send_error_json(404, "not_found", f"no document {match.group(1)}")
                    return
                self.send_response(200)
                self.send_header("Content-Type", "application/x-ndjson; charset=utf-8")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)
                return
            if self._serve_static():
                return
            self._send_error_json(404, "not_found", f"no route {self.path}")
        except Exception as exc:  # noqa: BLE001 - boundary: report, don't crash the thread
            self._send_error_json(500, "internal", str(exc))

    def _serve_static(self) -> bool:
        if self.static_dir is None:
            return False
        rel = "index.html" if self.path == "/" else self.path.lstrip("/")
        target = (self.static_dir / rel).resolve()
        if not str(target).startswith(str(self.static_dir.resolve())) or not target.is_file():
            return False
        body = target.read_bytes()
        ctype = {
            ".html": "text/html; charset=utf-8",
            ".js": "text/javascript; charset=utf-8",
            ".css": "text/css; charset=utf-8",
        }.get(target.suffix, "application/octet-stream")
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)
        return True

    def do_POST(self) -> None:
        try:
            if self.path == "/documents":
                payload = self._read_body()
                text = payload.get("text")
                if not isinstance(text, str) or not text.strip():
                    self._send_error_json(400, "bad_request", "field 'text' must be a non-empty string")
                    return
                session = self.service.predict_document(text)
                self._send_json(200, self.service.session_json(session))
                return
            match = _DOC_ROUTE.match(self.path)
            if match and match.group(2) == "decisions":
                payload = self._read_body()
                try:
                    record = self.service.apply_decision(
                        match.group(1),
                        int(payload["idx"]),
                        str(payload["label"]),
                        str(payload["action"]),
                    )
                except KeyError as exc:
                    self._send_error_json(404 if exc.args and exc.args[0] == match.group(1) else 400,
                                          "bad_request", f"missing or unknown: {exc}")
                    return
                except DecisionError as exc:
                    self._send_error_json(400, "invalid_decision", str(exc))
                    return
                self._send_json(200, record)
                return
            self._send_error_json(404, "not_found", f"no route {self.path}")
        except DecisionError as exc:
            self._send_error_json(400, "bad_request", str(exc))
        except Exception as exc:  # noqa: BLE001
            self._send_error_json(500, "internal", str(exc))


def make_server(
    service: AnnotationService,
    host: str = "127.0.0.1",
    port: int = 8765,
    static_dir: str | Path | None = None,
) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {
        "service": service,
        "static_dir": Path(static_dir) if static_dir else None,
    })
    return ThreadingHTTPServer((host, port), handler)
