"""HTTP prediction service for traffic-management operators.

Endpoints (JSON over HTTP/1.1):

    POST /v1/predict   {"request_id": str?, "incident": {field: value}}
    GET  /v1/health    readiness and model version
    GET  /v1/schema    accepted fields, types, enums, and which feature set

Requests with unknown or invalid fields get a 400 naming every offending
field; prediction without a loaded model gets a 503; unexpected failures
get a 500 carrying an opaque error id (no internals leak). The model is an
immutable object swapped atomically, so concurrent requests are safe and a
reload never exposes a half-loaded model.
"""

from __future__ import annotations

import json
import threading
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional

from . import artifact, pipeline
from .schema import (
    AADT_BINS,
    COUNT_BINS,
    COUNTY_REGIONS,
    DETECTION_METHODS,
    DIRECTIONS,
    EVENT_TYPES,
    FS2_ONLY_FIELDS,
    OPTIONAL_REQUEST_FIELDS,
    REQUIRED_REQUEST_FIELDS,
    RESPONDER_TYPES,
    RecordValidationError,
    TERRAINS,
    record_from_fields,
)

_FIELD_TYPES = {
    "start_time": "timestamp",
    "direction": "enum",
    "county_region": "enum",
    "city_number": "int",
    "event_type": "enum",
    "lanes": "int",
    "only_shoulders_closed": "bool",
    "vehicles": "enum",
    "trucks": "enum",
    "injuries": "bool",
    "fatalities": "bool",
    "detection_method": "enum",
    "route_id": "string",
    "measure": "float",
    "responders": "set",
    "aadt_bin": "enum",
    "hourly_volume": "int",
    "surface_width": "float",
    "surface_type": "int",
    "terrain": "enum",
}
_FIELD_VALUES = {
    "direction": list(DIRECTIONS),
    "county_region": list(COUNTY_REGIONS),
    "event_type": list(EVENT_TYPES),
    "vehicles": list(COUNT_BINS),
    "trucks": list(COUNT_BINS),
    "detection_method": list(DETECTION_METHODS),
    "responders": list(RESPONDER_TYPES),
    "aadt_bin": list(AADT_BINS),
    "terrain": list(TERRAINS),
}


def schema_payload() -> dict:
    """Field catalog served at /v1/schema; drives the operator console form."""
    fields = []
    for name in REQUIRED_REQUEST_FIELDS + tuple(f for f in OPTIONAL_REQUEST_FIELDS if f not in ("id", "duration_minutes")):
        entry = {
            "name": name,
            "type": _FIELD_TYPES[name],
            "required": name in REQUIRED_REQUEST_FIELDS,
            "feature_set": "FS2" if name in FS2_ONLY_FIELDS else "FS1",
        }
        if name in _FIELD_VALUES:
            entry["values"] = _FIELD_VALUES[name]
        fields.append(entry)
    return {"fields": fields}


def recommend_actions(band: str, duration_minutes: float, detour_overhead_minutes: float) -> list:
    """Fixed operator guidance per predicted band.

    A detour is only worth activating when the predicted duration exceeds
    the configured detour overhead, so short predictions suppress it.
    """
    actions = []
    if band == "L":
        if duration_minutes >= detour_overhead_minutes:
            actions.append("evaluate detour activation")
        actions.append("dispatch helper services")
        actions.append("issue traveler delay warning")
    elif band == "M":
        actions.append("dispatch helper services")
        actions.append("issue traveler delay warning")
    else:
        actions.append("monitor incident")
    return actions


class PredictionServer(ThreadingHTTPServer):
    """Threaded HTTP server holding an immutable, hot-swappable model."""

    daemon_threads = True

    def __init__(self, bind, model: Optional[pipeline.FrameworkModel] = None):
        super().__init__(bind, _Handler)
        self._model = model
        self._lock = threading.Lock()

    @property
    def model(self) -> Optional[pipeline.FrameworkModel]:
        return self._model

    def load_model(self, path) -> None:
        loaded = artifact.load_model(path)
        with self._lock:
            self._model = loaded


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def do_OPTIONS(self):
        # CORS preflight for the browser console
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):
        try:
            if self.path == "/v1/health":
                model = self.server.model
                self._send(
                    200,
                    {
                        "status": "ready" if model is not None else "not-ready",
                        "model_version": None if model is None else model.version,
                    },
                )
            elif self.path == "/v1/schema":
                self._send(200, schema_payload())
            else:
                self._send(404, {"error": "unknown path", "path": self.path})
        except Exception:
            self._send_internal_error()

    def do_POST(self):
        try:
            if self.path != "/v1/predict":
                self._send(404, {"error": "unknown path", "path": self.path})
                return
            ctype = (self.headers.get("Content-Type") or "").split(";")[0].strip()
            if ctype != "application/json":
                self._send(400, {"error": "Content-Type must be application/json"})
                return
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length)
            try:
                body = json.loads(raw.decode("utf-8"))
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                self._send(400, {"error": f"malformed JSON body: {exc}"})
                return
            if not isinstance(body, dict) or not isinstance(body.get("incident"), dict):
                self._send(400, {"error": "body must be an object with an 'incident' object"})
                return
            unknown_top = sorted(set(body) - {"request_id", "incident"})
            if unknown_top:
                self._send(400, {"error": "unknown top-level fields", "fields": unknown_top})
                return
            model = self.server.model
            if model is None:
                self._send(503, {"error": "model not loaded"})
                return
            incident = body["incident"]
            try:
                record = record_from_fields(incident, default_id="live")
            except RecordValidationError as exc:
                self._send(400, {"error": "invalid incident fields", "fields": exc.problems})
                return
            result = pipeline.predict_incident(model, record)
            fs2_used = any(incident.get(f) not in (None, "", [], {}) for f in FS2_ONLY_FIELDS)
            self._send(
                200,
                {
                    "request_id": body.get("request_id"),
                    "band": result.band.label,
                    "band_probabilities": list(result.band_probabilities),
                    "duration_minutes": result.duration_minutes,
                    "model_version": result.model_version,
                    "feature_set_used": "FS2" if fs2_used else "FS1",
                    "recommended_actions": recommend_actions(
                        result.band.label, result.duration_minutes, model.detour_overhead_minutes
                    ),
                },
            )
        except Exception:
            self._send_internal_error()

    def _send_internal_error(self):
        error_id = uuid.uuid4().hex
        try:
            self._send(500, {"error": "internal error", "error_id": error_id})
        except Exception:
            pass


def make_server(host: str, port: int, model: Optional[pipeline.FrameworkModel] = None) -> PredictionServer:
    return PredictionServer((host, port), model)


def serve(host: str, port: int, model_path) -> PredictionServer:
    """Load an artifact and serve it until interrupted."""
    server = make_server(host, port)
    server.load_model(model_path)
    return server
