"""HTTP annotation service: exposes one labeling session to a browser
console over a small JSON API.

The protocol is a strict alternation.  ``GET /api/session/next`` issues a
probe (repeat calls re-issue the same one until it is resolved) together
with its top-ranked gallery candidates; ``POST /api/session/annotate``
resolves it — either with a verified gallery match, which becomes an
incremental model update, or with a skip, which retires the probe without
touching the model or the budget.  Posting for any probe other than the
issued one, or posting when none is issued, is a conflict (409).

All session access is funneled through one lock, so an update is never in
flight while another request reads or advances the session.  Every event
is appended to a JSON-lines log (header record first, then one record per
annotation or skip); when the session completes, the model state is saved
as a checkpoint.  Replaying the log's annotation records onto a session
rebuilt from the header configuration reproduces that checkpoint bit for
bit.

Endpoints: GET /api/session/state, GET /api/session/next,
POST /api/session/annotate, GET /api/session/log,
GET /api/thumbnails/{index} (static passthrough when image paths were
provided; the service never decodes images).
"""

from __future__ import annotations

import json
import logging
import mimetypes
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Sequence

import numpy as np

from irs.active import (
    LabelingSession,
    RankList,
    Selection,
    annotation_record,
    apply_annotation,
    header_record,
    rank_session_gallery,
    select_next,
)
from irs.incremental import save_state

logger = logging.getLogger(__name__)

LOG_FILENAME = "session-log.jsonl"
CHECKPOINT_FILENAME = "checkpoint.bin"


class AnnotationService:
    """Session commands behind a lock; the HTTP layer stays protocol-only."""

    def __init__(
        self,
        session: LabelingSession | None,
        *,
        out_dir: str | Path | None = None,
        thumbnails: Sequence[str | Path] | None = None,
    ) -> None:
        self.session = session
        self.lock = threading.RLock()
        self.pending: tuple[Selection, RankList] | None = None
        self.skipped: list[int] = []
        self.records: list[dict] = []
        self.finalized = False
        self.thumbnails = (
            [Path(p) for p in thumbnails] if thumbnails is not None else None
        )
        self.log_path: Path | None = None
        self.checkpoint_path: Path | None = None
        if out_dir is not None:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            self.log_path = out / LOG_FILENAME
            self.checkpoint_path = out / CHECKPOINT_FILENAME
            self.log_path.write_text("")
        if session is not None:
            self._append_record(header_record(session))

    # ----- log plumbing ---------------------------------------------------

    def _append_record(self, record: dict) -> None:
        self.records.append(record)
        if self.log_path is not None:
            with self.log_path.open("a") as fp:
                fp.write(json.dumps(record) + "\n")

    def log_text(self) -> str:
        with self.lock:
            return "".join(json.dumps(r) + "\n" for r in self.records)

    # ----- session commands (called under the lock by the handler) --------

    def _is_complete(self) -> bool:
        s = self.session
        return s.budget_left <= 0 or not s.probe_pool or not s.gallery_pool

    def _stats(self) -> dict:
        annotations = self.session.annotations
        ranks = [a.true_match_rank for a in annotations]
        return {
            "annotations": len(annotations),
            "skipped": len(self.skipped),
            "mean_true_match_rank": float(np.mean(ranks)) if ranks else None,
            "rank_history": ranks,
        }

    def _finalize_if_complete(self) -> bool:
        if not self._is_complete():
            return False
        if not self.finalized:
            self.finalized = True
            self.pending = None
            if self.checkpoint_path is not None:
                save_state(self.session.state, self.checkpoint_path)
            self._append_record({"type": "complete", **self._stats()})
            logger.info(
                "session complete after %d annotations",
                len(self.session.annotations),
            )
        return True

    def state(self) -> tuple[int, dict]:
        with self.lock:
            if self.session is None:
                return 404, {"error": "no active session"}
            s = self.session
            complete = self._finalize_if_complete()
            return 200, {
                "complete": complete,
                "step": len(s.annotations) + 1,
                "budget": s.budget,
                "budget_left": s.budget_left,
                "annotations_done": len(s.annotations),
                "strategy": s.strategy,
                "probe_pool_size": len(s.probe_pool),
                "gallery_pool_size": len(s.gallery_pool),
                "pending_probe": (
                    self.pending[0].probe_index if self.pending else None
                ),
                "config": s.config,
                "dataset": {
                    "name": s.features.name,
                    "d": s.features.dim,
                    "n": s.features.num_samples,
                },
                "stats": self._stats(),
            }

    def _thumbnail_url(self, index: int) -> str | None:
        if self.thumbnails is None or not 0 <= index < len(self.thumbnails):
            return None
        return f"/api/thumbnails/{index}"

    def next(self) -> tuple[int, dict]:
        with self.lock:
            if self.session is None:
                return 404, {"error": "no active session"}
            s = self.session
            if self._finalize_if_complete():
                return 200, {"complete": True, "stats": self._stats()}
            if self.pending is None:
                selection = select_next(s)
                ranklist = rank_session_gallery(s, selection.probe_index)
                self.pending = (selection, ranklist)
            selection, ranklist = self.pending
            window = max(1, s.rank_window)
            ranked = [
                {
                    "index": int(index),
                    "distance": float(distance),
                    "rank": position + 1,
                    "thumbnail": self._thumbnail_url(int(index)),
                }
                for position, (index, distance) in enumerate(
                    zip(ranklist.order[:window], ranklist.distances[:window])
                )
            ]
            return 200, {
                "complete": False,
                "step": len(s.annotations) + 1,
                "budget_left": s.budget_left,
                "strategy": s.strategy,
                "probe": {
                    "index": selection.probe_index,
                    "thumbnail": self._thumbnail_url(selection.probe_index),
                },
                "ranked": ranked,
                "scores": {
                    "epsilon1": selection.epsilon1,
                    "epsilon2": selection.epsilon2,
                    "epsilon3": selection.epsilon3,
                },
            }

    def annotate(self, payload: dict) -> tuple[int, dict]:
        with self.lock:
            if self.session is None:
                return 404, {"error": "no active session"}
            s = self.session
            probe_index = payload.get("probe_index")
            if not isinstance(probe_index, int):
                return 400, {"error": "probe_index (int) is required"}
            if self.pending is None:
                return 409, {
                    "error": "no probe issued; fetch /api/session/next first"
                }
            selection, ranklist = self.pending
            if probe_index != selection.probe_index:
                return 409, {
                    "error": (
                        f"probe {probe_index} is not the issued probe "
                        f"{selection.probe_index}"
                    )
                }

            if payload.get("skip"):
                s.probe_pool.remove(probe_index)
                self.skipped.append(probe_index)
                self.pending = None
                self._append_record(
                    {
                        "type": "skip",
                        "step": len(s.annotations) + 1,
                        "probe_index": probe_index,
                        "chosen_by": selection.chosen_by,
                    }
                )
                return 200, {
                    "updated": False,
                    "skipped": True,
                    "budget_left": s.budget_left,
                    "complete": self._finalize_if_complete(),
                }

            gallery_index = payload.get("gallery_index")
            if not isinstance(gallery_index, int):
                return 400, {"error": "gallery_index (int) is required"}
            if gallery_index not in s.gallery_pool:
                return 409, {
                    "error": (
                        f"gallery sample {gallery_index} is not in the "
                        f"unlabeled gallery pool"
                    )
                }
            annotation = apply_annotation(
                s,
                probe_index,
                gallery_index,
                chosen_by=selection.chosen_by,
                epsilon1=selection.epsilon1,
                epsilon2=selection.epsilon2,
                epsilon3=selection.epsilon3,
                ranklist=ranklist,
            )
            self.pending = None
            self._append_record(annotation_record(annotation))
            return 200, {
                "updated": True,
                "step": annotation.step,
                "true_match_rank": annotation.true_match_rank,
                "budget_left": s.budget_left,
                "complete": self._finalize_if_complete(),
            }

    def thumbnail(self, index: int) -> tuple[bytes, str] | None:
        if self.thumbnails is None or not 0 <= index < len(self.thumbnails):
            return None
        path = self.thumbnails[index]
        if not path.is_file():
            return None
        content_type = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
        return path.read_bytes(), content_type


class _Handler(BaseHTTPRequestHandler):
    service: AnnotationService  # injected by make_server

    protocol_version = "HTTP/1.1"

    def log_message(self, fmt: str, *args) -> None:
        logger.debug("%s %s", self.address_string(), fmt % args)

    def _send_json(self, status: int, body: dict) -> None:
        data = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(data)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(data)

    def _send_bytes(self, data: bytes, content_type: str) -> None:
        self.send_response(200)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(data)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(data)

    def do_OPTIONS(self) -> None:  # noqa: N802 (http.server API)
        # CORS preflight, so a console served from another origin (dev
        # server or local file) can POST JSON annotations
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self) -> None:  # noqa: N802 (http.server API)
        if self.path == "/api/session/state":
            self._send_json(*self.service.state())
        elif self.path == "/api/session/next":
            self._send_json(*self.service.next())
        elif self.path == "/api/session/log":
            self._send_bytes(
                self.service.log_text().encode("utf-8"), "application/x-ndjson"
            )
        elif self.path.startswith("/api/thumbnails/"):
            tail = self.path.rsplit("/", 1)[1]
            found = None
            if tail.isdigit():
                found = self.service.thumbnail(int(tail))
            if found is None:
                self._send_json(404, {"error": f"no thumbnail at {self.path}"})
            else:
                self._send_bytes(*found)
        else:
            self._send_json(404, {"error": f"unknown path {self.path}"})

    def do_POST(self) -> None:  # noqa: N802 (http.server API)
        if self.path != "/api/session/annotate":
            self._send_json(404, {"error": f"unknown path {self.path}"})
            return
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b""
        try:
            payload = json.loads(raw)
            if not isinstance(payload, dict):
                raise ValueError("payload must be a JSON object")
        except ValueError:
            self._send_json(400, {"error": "request body must be a JSON object"})
            return
        self._send_json(*self.service.annotate(payload))


def make_server(
    service: AnnotationService, host: str = "127.0.0.1", port: int = 8008
) -> ThreadingHTTPServer:
    """Bind a threaded HTTP server to the service (port 0 picks a free one)."""
    handler = type("BoundHandler", (_Handler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)


def serve_forever(service: AnnotationService, host: str, port: int) -> None:
    """Run the service until interrupted."""
    server = make_server(service, host=host, port=port)
    logger.info("annotation service listening on %s:%d", *server.server_address[:2])
    print(f"listening on http://{server.server_address[0]}:{server.server_address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
