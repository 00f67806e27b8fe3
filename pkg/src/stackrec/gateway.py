"""HTTP middleware: wayfinding and recommendation endpoints plus transaction logs.

Two wire-attested endpoints:

    GET /api/wayfinder/map_data/{collection}/{bib_id}
    GET /api/recommend/popularnear?x=<real>&y=<real>

plus POST /api/locate for clients without their own positioning.  Every
handled request appends exactly one JSON line to the transaction log; that
log is the input to the telemetry module.
"""

from __future__ import annotations

import json
import logging
import re
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Callable
from urllib.parse import parse_qsl, urlsplit

from . import lccn, locate, stacksmap
from .corpus import CorpusStore
from .lccn import ClassificationOutline
from .locate import Beacon, BeaconObservation, NoKnownBeacons
from .recommend import Recommender
from .stacksmap import StackMap

log = logging.getLogger(__name__)

MODULES = (
    "wayfinder",
    "recommend",
    "catalog",
    "journal",
    "display",
    "hoot",
    "topicspace",
    "account",
    "citation",
)


@dataclass(frozen=True)
class ApiLogEntry:
    timestamp: str                      # ISO 8601
    module: str
    uri: str
    params: dict[str, str] = field(default_factory=dict)
    status: int = 200
    bib_ids: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.uri:
            raise ValueError("uri must be non-empty")
        if self.module not in MODULES:
            raise ValueError(f"unknown module {self.module!r}")
        if not (200 <= self.status < 300) and self.bib_ids:
            raise ValueError("bib_ids must be empty on non-2xx entries")

    def to_json(self) -> str:
        return json.dumps(
            {
                "timestamp": self.timestamp,
                "module": self.module,
                "uri": self.uri,
                "params": self.params,
                "status": self.status,
                "bib_ids": list(self.bib_ids),
            },
            sort_keys=False,
        )

    @classmethod
    def from_json(cls, line: str) -> "ApiLogEntry":
        raw = json.loads(line)
        return cls(
            timestamp=raw["timestamp"],
            module=raw["module"],
            uri=raw["uri"],
            params=dict(raw.get("params", {})),
            status=int(raw["status"]),
            bib_ids=tuple(raw.get("bib_ids", [])),
        )


class TransactionLog:
    """Append-only JSON Lines sink with line-atomic writes."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._fh = open(self.path, "a", encoding="utf-8")
        self.write_errors = 0

    def append(self, entry: ApiLogEntry) -> None:
        line = entry.to_json() + "\n"
        try:
            with self._lock:
                self._fh.write(line)
                self._fh.flush()
        except OSError:
            self.write_errors += 1
            log.exception("transaction log write failed")

    def close(self) -> None:
        with self._lock:
            self._fh.close()


@dataclass(frozen=True)
class MapDataResponse:
    x: int
    y: int
    shelf_number: int
    call_number: str

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "x": self.x,
            "y": self.y,
            "shelf_number": self.shelf_number,
            "call_number": self.call_number,
        }


def _utc_now() -> datetime:
    return datetime.now(timezone.utc)


class Gateway:
    """Request handlers over immutable stores; logging is the only mutation."""

    def __init__(
        self,
        stackmap_: StackMap,
        corpus_: CorpusStore,
        outline: ClassificationOutline,
        txn_log: TransactionLog,
        beacons: list[Beacon] | None = None,
        recommender: Recommender | None = None,
        path_loss_exponent: float = locate.DEFAULT_PATH_LOSS_EXPONENT,
        k_nearest_beacons: int = locate.DEFAULT_K,
        clock: Callable[[], datetime] | None = None,
    ):
        self.stackmap = stackmap_
        self.corpus = corpus_
        self.outline = outline
        self.txn_log = txn_log
        self.beacons = beacons or []
        self.recommender = recommender or Recommender(stackmap_, corpus_, outline)
        self.path_loss_exponent = path_loss_exponent
        self.k_nearest_beacons = k_nearest_beacons
        self.clock = clock or _utc_now

    def _timestamp(self) -> str:
        return self.clock().isoformat()

    def _log(self, module: str, uri: str, params: dict[str, str], status: int,
             bib_ids: tuple[str, ...] = ()) -> None:
        self.txn_log.append(
            ApiLogEntry(
                timestamp=self._timestamp(),
                module=module,
                uri=uri,
                params=params,
                status=status,
                bib_ids=bib_ids if 200 <= status < 300 else (),
            )
        )

    def handle_map_data(self, collection: str, bib_id: str) -> tuple[int, dict]:
        uri = f"/api/wayfinder/map_data/{collection}/{bib_id}"
        params = {"collection": collection, "bib_id": bib_id}
        record = self.corpus.records.get(bib_id)
        if record is None:
            self._log("wayfinder", uri, params, 404)
            return 404, {"error": f"unknown bib_id {bib_id!r}"}
        shelf = stacksmap.shelf_for_call(record.call_number, self.stackmap)
        if shelf is None:
            self._log("wayfinder", uri, params, 404)
            return 404, {"error": f"call number not in open stacks: {record.call_number}"}
        cx, cy = shelf.bounds.center
        response = MapDataResponse(
            x=round(cx),
            y=round(cy),
            shelf_number=shelf.shelf_number,
            call_number=lccn.canonical_format(record.call_number),
        )
        self._log("wayfinder", uri, params, 200, (bib_id,))
        return 200, response.to_dict()

    def handle_popular_near(self, x_raw: str | None, y_raw: str | None) -> tuple[int, dict]:
        uri = f"/api/recommend/popularnear?x={x_raw}&y={y_raw}"
        params = {k: v for k, v in (("x", x_raw), ("y", y_raw)) if v is not None}
        try:
            if x_raw is None or y_raw is None:
                raise ValueError("x and y are required")
            x, y = float(x_raw), float(y_raw)
        except ValueError as exc:
            self._log("recommend", uri, params, 400)
            return 400, {"error": str(exc)}
        result = self.recommender.recommend_near((x, y))
        self._log("recommend", uri, params, 200, tuple(result.bib_ids))
        return 200, result.to_dict()

    def handle_locate(self, body: dict) -> tuple[int, dict]:
        uri = "/api/locate"
        try:
            observations = [
                BeaconObservation(o["beacon_id"], float(o["rssi"]))
                for o in body.get("observations", [])
            ]
        except (KeyError, TypeError, ValueError) as exc:
            self._log("wayfinder", uri, {}, 400)
            return 400, {"error": f"bad observation payload: {exc}"}
        try:
            loc = locate.estimate_position(
                observations, self.beacons, self.k_nearest_beacons, self.path_loss_exponent
            )
        except NoKnownBeacons as exc:
            self._log("wayfinder", uri, {}, 404)
            return 404, {"error": str(exc)}
        self._log("wayfinder", uri, {}, 200)
        return 200, {"v": 1, "x": loc.x, "y": loc.y, "confidence_radius": loc.confidence_radius}


_MAP_DATA_RE = re.compile(r"^/api/wayfinder/map_data/([^/]+)/([^/]+)$")


class _Handler(BaseHTTPRequestHandler):
    gateway: Gateway  # set on the server class

    def _send(self, status: int, body: dict) -> None:
        payload = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def do_GET(self):  # noqa: N802 (BaseHTTPRequestHandler API)
        split = urlsplit(self.path)
        m = _MAP_DATA_RE.match(split.path)
        if m:
            status, body = self.gateway.handle_map_data(m.group(1), m.group(2))
            self._send(status, body)
            return
        if split.path == "/api/recommend/popularnear":
            q = dict(parse_qsl(split.query, keep_blank_values=True))
            status, body = self.gateway.handle_popular_near(q.get("x"), q.get("y"))
            self._send(status, body)
            return
        self._send(404, {"error": "no such endpoint"})

    def do_POST(self):  # noqa: N802
        if urlsplit(self.path).path != "/api/locate":
            self._send(404, {"error": "no such endpoint"})
            return
        length = int(self.headers.get("Content-Length", 0))
        try:
            body = json.loads(self.rfile.read(length) or b"{}")
        except json.JSONDecodeError:
            self._send(400, {"error": "body must be JSON"})
            return
        status, payload = self.gateway.handle_locate(body)
        self._send(status, payload)

    def log_message(self, fmt, *args):
        log.debug("http: " + fmt, *args)


def make_server(gateway: Gateway, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    handler = type("GatewayHandler", (_Handler,), {"gateway": gateway})
    return ThreadingHTTPServer((host, port), handler)


class GatewayServer:
    """A gateway served on a background thread; usable as a context manager."""

    def __init__(self, gateway: Gateway, host: str = "127.0.0.1", port: int = 0):
        self.httpd = make_server(gateway, host, port)
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    def __enter__(self) -> "GatewayServer":
        self.thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        self.thread.join(timeout=5)
