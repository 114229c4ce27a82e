"""HTTP facade over an Engine: catalog, dimension members, query execution and
admin refresh/ETL, speaking UTF-8 JSON.

Queries run against the committed store view, so they stay consistent while an
admin job loads new data; admin endpoints are serialized by a single job lock.
Binds to loopback by default (no authentication on purpose).
"""

from __future__ import annotations

import json
import threading
import traceback
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional
from urllib.parse import parse_qs, urlparse

from .engine import Engine
from .errors import QueryError, StarcubeError
from .etl.pipeline import parse_pipeline_config
from .query import query_from_doc

DEFAULT_PORT = 8741


class ApiError(Exception):
    def __init__(self, status: int, message: str, field: Optional[str] = None,
                 detail: Optional[str] = None):
        self.status = status
        self.body = {"error": message}
        if field is not None:
            self.body["field"] = field
        if detail is not None:
            self.body["detail"] = detail
        super().__init__(message)


class WarehouseApi:
    """Transport-independent request handling; the HTTP handler is a thin shim."""

    def __init__(self, engine: Optional[Engine]):
        self.engine = engine
        self._admin_lock = threading.Lock()
        self._jobs: dict[str, dict] = {}
        self._jobs_guard = threading.Lock()

    # -- dispatch ---------------------------------------------------------------

    def handle(self, method: str, path: str, query: dict[str, str],
               body: Optional[dict]) -> tuple[int, dict]:
        try:
            return 200, self._route(method, path, query, body)
        except ApiError as exc:
            return exc.status, exc.body
        except QueryError as exc:
            body_doc = {"error": str(exc)}
            if exc.field is not None:
                body_doc["field"] = exc.field
            return 400, body_doc
        except StarcubeError as exc:
            return 400, {"error": str(exc)}

    def _route(self, method: str, path: str, query: dict[str, str],
               body: Optional[dict]) -> dict:
        if self.engine is None:
            raise ApiError(503, "warehouse loading")
        parts = [p for p in path.split("/") if p]
        if method == "GET" and parts == ["catalog"]:
            return self.engine.catalog_doc()
        if method == "GET" and len(parts) == 3 and parts[0] == "dimensions" \
                and parts[2] == "members":
            return self._members(parts[1], query)
        if method == "GET" and len(parts) == 3 and parts[:2] == ["admin", "jobs"]:
            return self._job_status(parts[2])
        if method == "POST" and parts == ["query"]:
            return self._query(body)
        if method == "POST" and parts == ["admin", "refresh-views"]:
            return self._refresh_views(body or {})
        if method == "POST" and parts == ["admin", "etl-run"]:
            return self._etl_run(body or {})
        raise ApiError(404, f"no such endpoint: {method} {path}")

    # -- endpoints ----------------------------------------------------------------

    def _members(self, dimension: str, query: dict[str, str]) -> dict:
        level = query.get("level")
        if not level:
            dim = self._dimension_or_404(dimension)
            level = dim.levels[0].name
        try:
            page = int(query.get("page", "1"))
            page_size = int(query.get("page_size", "200"))
        except ValueError:
            raise ApiError(400, "page and page_size must be integers", field="page") from None
        if page < 1 or page_size < 1:
            raise ApiError(400, "page and page_size must be positive", field="page")
        try:
            return self.engine.members_page(
                dimension, level, parent=query.get("parent"), page=page, page_size=page_size
            )
        except KeyError as exc:
            raise ApiError(404, str(exc.args[0])) from None

    def _dimension_or_404(self, name: str):
        try:
            return self.engine.schema.dimension(name)
        except KeyError:
            raise ApiError(404, f"unknown dimension {name!r}") from None

    def _query(self, body: Optional[dict]) -> dict:
        if body is None or not isinstance(body, dict):
            raise ApiError(400, "request body must be a JSON object", field="query")
        force = body.get("force_plan")
        if force is not None and force not in ("mview", "cuboid", "scan"):
            raise ApiError(400, f"unknown force_plan {force!r}", field="force_plan")
        try:
            query = query_from_doc(self.engine.schema, body.get("query", {}))
            grid = self.engine.execute(query, force=force)
        except QueryError as exc:
            body_doc = {"error": str(exc)}
            if exc.field is not None:
                body_doc["field"] = exc.field
            raise ApiError(400, str(exc), field=exc.field) from None
        doc = grid.to_doc()
        response = {
            "epoch": doc.pop("epoch"),
            "plan": doc.pop("plan"),
            "grid": doc,
        }
        if "echo" in body:
            response["echo"] = body["echo"]
        return response

    def _refresh_views(self, body: dict) -> dict:
        if not self._admin_lock.acquire(blocking=False):
            raise ApiError(409, "an admin job is already running")
        try:
            names = body.get("names")
            only_stale = bool(body.get("only_stale", True))
            refreshed = self.engine.refresh_views(names=names, only_stale=only_stale)
            return {"refreshed": refreshed, "epoch": self.engine.view().epoch}
        finally:
            self._admin_lock.release()

    def _etl_run(self, body: dict) -> dict:
        config_path = body.get("config")
        if not config_path:
            raise ApiError(400, "config path required", field="config")
        path = Path(config_path)
        if not path.is_absolute() and self.engine.directory is not None:
            path = self.engine.directory / path
        if not path.exists():
            raise ApiError(400, f"config not found: {path}", field="config")
        if not self._admin_lock.acquire(blocking=False):
            raise ApiError(409, "an admin job is already running")

        job_id = uuid.uuid4().hex
        with self._jobs_guard:
            self._jobs[job_id] = {"job": job_id, "status": "running"}

        def run():
            try:
                config = parse_pipeline_config(path.read_text(encoding="utf-8"), path.parent)
                report = self.engine.run_etl(config)
                with self._jobs_guard:
                    self._jobs[job_id] = {
                        "job": job_id, "status": "done", "report": report.to_doc(),
                    }
            except Exception as exc:  # job failures surface through polling
                with self._jobs_guard:
                    self._jobs[job_id] = {
                        "job": job_id, "status": "failed", "error": str(exc),
                    }
            finally:
                self._admin_lock.release()

        threading.Thread(target=run, name=f"etl-{job_id[:8]}", daemon=True).start()
        return {"job": job_id, "status": "running"}

    def _job_status(self, job_id: str) -> dict:
        with self._jobs_guard:
            job = self._jobs.get(job_id)
        if job is None:
            raise ApiError(404, f"unknown job {job_id!r}")
        return job


class _Handler(BaseHTTPRequestHandler):
    api: WarehouseApi = None  # set by make_server
    protocol_version = "HTTP/1.1"

    def _respond(self, status: int, doc: dict) -> None:
        payload = json.dumps(doc, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(payload)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(payload)

    def _dispatch(self, method: str) -> None:
        parsed = urlparse(self.path)
        query = {k: v[0] for k, v in parse_qs(parsed.query).items()}
        body = None
        length = int(self.headers.get("Content-Length") or 0)
        if length:
            raw = self.rfile.read(length)
            try:
                body = json.loads(raw.decode("utf-8"))
            except (ValueError, UnicodeDecodeError):
                self._respond(400, {"error": "request body is not valid JSON"})
                return
        try:
            status, doc = self.api.handle(method, parsed.path, query, body)
        except Exception:  # last-resort guard; handle() catches expected errors
            traceback.print_exc()
            status, doc = 500, {"error": "internal error"}
        self._respond(status, doc)

    def do_GET(self):  # noqa: N802 (http.server naming)
        self._dispatch("GET")

    def do_POST(self):  # noqa: N802
        self._dispatch("POST")

    def log_message(self, fmt, *args):  # quiet by default
        pass


def make_server(engine: Engine, host: str = "127.0.0.1",
                port: int = DEFAULT_PORT) -> ThreadingHTTPServer:
    api = WarehouseApi(engine)
    handler = type("BoundHandler", (_Handler,), {"api": api})
    return ThreadingHTTPServer((host, port), handler)


def serve(engine: Engine, host: str = "127.0.0.1", port: int = DEFAULT_PORT) -> None:
    httpd = make_server(engine, host, port)
    try:
        httpd.serve_forever()
    finally:
        httpd.server_close()
