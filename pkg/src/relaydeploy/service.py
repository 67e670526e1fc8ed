"""JSON/HTTP wire protocol over the session store.

Thin by design: every route parses, calls the store, and wraps the result
with the protocol version. All decision logic lives in session.py; a
client that bypasses this service and replays the same event log gets the
same trace.
"""

from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import __version__
from .session import PROTOCOL_VERSION, SessionError, SessionStore


class CreateSessionBody(BaseModel):
    policy_id: str
    mode: str


class MeasurementBody(BaseModel):
    w: Optional[float] = None
    rssi_dbm: Optional[float] = None
    probe_power_dbm: Optional[float] = None
    expected_seq: Optional[int] = None

    def report(self):
        if self.w is not None:
            return {"w": self.w}
        if self.rssi_dbm is not None and self.probe_power_dbm is not None:
            return {"rssi_dbm": self.rssi_dbm,
                    "probe_power_dbm": self.probe_power_dbm}
        return None


class EndLineBody(BaseModel):
    final_offset: Optional[int] = None
    w: Optional[float] = None
    rssi_dbm: Optional[float] = None
    probe_power_dbm: Optional[float] = None
    expected_seq: Optional[int] = None

    def report(self):
        if self.w is not None:
            return {"w": self.w}
        if self.rssi_dbm is not None and self.probe_power_dbm is not None:
            return {"rssi_dbm": self.rssi_dbm,
                    "probe_power_dbm": self.probe_power_dbm}
        return None


def _ok(payload):
    payload = dict(payload)
    payload["protocol_version"] = PROTOCOL_VERSION
    return payload


def build_app(store: SessionStore) -> FastAPI:
    app = FastAPI(title="relay deployment sessions")

    @app.exception_handler(SessionError)
    async def _session_error(request: Request, exc: SessionError):
        return JSONResponse(
            status_code=exc.http_status,
            content=_ok({"error": {"type": type(exc).__name__,
                                   "message": str(exc)}}))

    @app.get("/api/version")
    def version():
        return _ok({"package_version": __version__})

    @app.get("/api/policies")
    def policies():
        return _ok({"policies": store.list_policies()})

    @app.post("/api/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        sess = store.create(body.policy_id, body.mode)
        return _ok({"session": sess.to_dict()})

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        return _ok({"session": store.get_dict(session_id)})

    @app.post("/api/sessions/{session_id}/measurements")
    def report_measurement(session_id: str, body: MeasurementBody):
        instruction = store.report(session_id, body.report(),
                                   expected_seq=body.expected_seq)
        return _ok({"instruction": instruction,
                    "session": store.get_dict(session_id)})

    @app.post("/api/sessions/{session_id}/end-line")
    def end_line(session_id: str, body: EndLineBody):
        trace = store.end_line(session_id, final_offset=body.final_offset,
                               report=body.report(),
                               expected_seq=body.expected_seq)
        return _ok({"trace": trace,
                    "session": store.get_dict(session_id)})

    @app.get("/api/sessions/{session_id}/trace")
    def get_trace(session_id: str):
        return _ok({"trace": store.trace(session_id)})

    @app.get("/api/sessions/{session_id}/scores")
    def get_scores(session_id: str):
        return _ok({"scores": store.scores(session_id)})

    @app.get("/api/sessions/{session_id}/events")
    def get_events(session_id: str):
        return _ok({"events": store.events(session_id)})

    return app
