"""Live audit-session HTTP service.

A session is one audit driven by a human audit board: the service announces
which ballot to retrieve next, the board submits its reading (or reports the
ballot missing), and the running risk, transcript, and verdict are exposed
for inspection.  The board plays the environment; the auditor logic is the
same state machine the in-process game harness uses, so identical seeds and
submissions yield identical transcripts.

Sessions persist as append-only JSONL logs (one file per session); on
restart every log is replayed, so an interrupted audit resumes exactly where
it stopped, with the same pending ballot request.
"""
from __future__ import annotations

import json
import pathlib
import threading
import uuid
from typing import Literal, Optional, Union

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel, Field

from .competitive import CompetitiveJudgeMachine, JudgeConfig
from .cvr import BayesianCvr, ConservativeCvr, parse_cvr
from .engine import CONSISTENT, ComparisonAuditMachine, TestSettings
from .model import Interpretation

MAX_ROWS = 1_000_000


class TestConfigModel(BaseModel):
    alpha: float = 0.05
    gamma: float = 1.1
    max_draws: Optional[int] = None


class ManifestModel(BaseModel):
    schema_version: str = "1"
    candidates: list[str]
    S: int = Field(ge=0)


class CvrPayload(BaseModel):
    label: str
    table: dict


class CreateSessionModel(BaseModel):
    schema_version: str = "1"
    mode: Literal["bayesian", "conservative", "competitive"]
    manifest: ManifestModel
    test: TestConfigModel = TestConfigModel()
    seed: int = 0
    t: int = 1
    session_id: Optional[str] = None
    cvr: Optional[dict] = None
    cvrs: Optional[list[CvrPayload]] = None


class ResponseModel(BaseModel):
    schema_version: str = "1"
    request_index: int
    kind: Literal["interpretation", "no_ballot", "wrong_id"]
    interpretation: Optional[str] = None
    found_id: Optional[str] = None


Machine = Union[ComparisonAuditMachine, CompetitiveJudgeMachine]


class Session:
    def __init__(self, session_id: str, body: CreateSessionModel, log_path: Optional[pathlib.Path]):
        self.id = session_id
        self.body = body
        self.lock = threading.Lock()
        self.log_path = log_path
        self.machine = _build_machine(body)

    # -- views -------------------------------------------------------------

    def view(self) -> dict:
        m = self.machine
        base = {
            "schema_version": "1",
            "session_id": self.id,
            "mode": self.body.mode,
            "seed": self.body.seed,
            "state": "concluded" if m.concluded else "awaiting_ballot",
            "requested_id": m.requested_id,
            "request_index": m.request_index,
        }
        if isinstance(m, ComparisonAuditMachine):
            base.update(
                {
                    "draws": len(m.entries),
                    "risk": m.current_risk,
                    "risk_trajectory": list(m.risk_trajectory()),
                    "delta": m.delta,
                    "test": {
                        "alpha": m.settings.alpha,
                        "gamma": m.settings.gamma,
                        "max_draws": m.max_draws,
                    },
                    "guard_failure": m.guard_failure,
                    "verdict": _comparison_verdict(m),
                    "candidates": list(m.cvr.candidates),
                }
            )
        else:
            base.update(
                {
                    "t": m.config.t,
                    "ballots_requested": len(m._responses),
                    "current_pair": list(m.current_pair) if m.current_pair else None,
                    "pair_tallies": [
                        {
                            "by": r.by,
                            "against": r.against,
                            "votes": r.votes,
                            "requests_answered": len(r.responses),
                            "t": m.config.t,
                            "disqualified": r.disqualified,
                        }
                        for r in m.pair_tallies()
                    ],
                    "verdict": _competitive_verdict(m),
                    "candidates": list(m.candidates),
                }
            )
        return base

    def transcript_json(self) -> str:
        m = self.machine
        if not m.concluded:
            raise HTTPException(status_code=409, detail="audit still in progress")
        if isinstance(m, ComparisonAuditMachine):
            return m.transcript().to_json()
        return m.verdict.to_json()

    # -- mutation ----------------------------------------------------------

    def submit(self, response: ResponseModel) -> dict:
        with self.lock:
            m = self.machine
            if m.concluded:
                raise HTTPException(status_code=409, detail="session already concluded")
            if response.request_index != m.request_index:
                raise HTTPException(
                    status_code=409,
                    detail=f"expected request_index {m.request_index}, "
                    f"got {response.request_index}",
                )
            _apply(m, response)
            self._log({"event": "response", **response.model_dump()})
            return self.view()

    def _log(self, record: dict) -> None:
        if self.log_path is None:
            return
        with open(self.log_path, "a", encoding="utf-8") as f:
            f.write(json.dumps(record, sort_keys=True) + "\n")


def _comparison_verdict(m: ComparisonAuditMachine) -> Optional[dict]:
    if not m.concluded:
        return None
    kind = "consistent" if m.verdict == CONSISTENT else "inconclusive"
    return {"kind": kind, "winner": None, "final_risk": m.current_risk}


def _competitive_verdict(m: CompetitiveJudgeMachine) -> Optional[dict]:
    if not m.concluded:
        return None
    v = m.verdict
    return {
        "kind": v.outcome,
        "winner": v.winner,
        "disqualified": sorted(v.disqualified),
        "ballots_requested": v.ballots_requested,
    }


def _build_machine(body: CreateSessionModel) -> Machine:
    if body.manifest.S > MAX_ROWS:
        raise HTTPException(status_code=413, detail="manifest too large")
    try:
        if body.mode == "competitive":
            if not body.cvrs:
                raise ValueError("competitive sessions need 'cvrs'")
            labeled = []
            for payload in body.cvrs:
                table = parse_cvr(payload.table)
                if not isinstance(table, ConservativeCvr):
                    raise ValueError(f"CVR {payload.label!r} is not conservative")
                labeled.append((payload.label, table))
            return CompetitiveJudgeMachine(
                JudgeConfig(t=body.t, seed=body.seed),
                tuple(body.manifest.candidates),
                body.manifest.S,
                labeled,
            )
        if body.cvr is None:
            raise ValueError(f"{body.mode} sessions need 'cvr'")
        table = parse_cvr(body.cvr)
        expected = BayesianCvr if body.mode == "bayesian" else ConservativeCvr
        if not isinstance(table, expected):
            raise ValueError(f"CVR mode does not match session mode {body.mode!r}")
        return ComparisonAuditMachine(
            table,
            manifest_size=body.manifest.S,
            settings=TestSettings(
                alpha=body.test.alpha,
                gamma=body.test.gamma,
                max_draws=body.test.max_draws,
            ),
            seed=body.seed,
        )
    except HTTPException:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise HTTPException(status_code=400, detail=f"malformed session request: {exc}")


def _apply(machine: Machine, response: ResponseModel) -> None:
    interp = None
    if response.kind == "interpretation":
        if response.interpretation is None:
            raise HTTPException(status_code=400, detail="interpretation bits required")
        try:
            interp = Interpretation.from_string(response.interpretation)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
    try:
        if isinstance(machine, ComparisonAuditMachine):
            machine.submit(response.kind, interp)
        else:
            # the adjudicator treats a wrong-label delivery as no ballot
            machine.submit(interp if response.kind == "interpretation" else None)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc))


class SessionStore:
    def __init__(self, data_dir: Optional[pathlib.Path]):
        self.data_dir = pathlib.Path(data_dir) if data_dir is not None else None
        self.sessions: dict[str, Session] = {}
        if self.data_dir is not None:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            for log in sorted(self.data_dir.glob("*.jsonl")):
                self._replay(log)

    def _replay(self, log: pathlib.Path) -> None:
        with open(log, "r", encoding="utf-8") as f:
            lines = [json.loads(line) for line in f if line.strip()]
        if not lines or lines[0].get("event") != "created":
            return
        created = lines[0]
        session = Session(
            created["session_id"],
            CreateSessionModel.model_validate(created["body"]),
            log,
        )
        for record in lines[1:]:
            if record.get("event") == "response":
                record = {k: v for k, v in record.items() if k != "event"}
                _apply(session.machine, ResponseModel.model_validate(record))
        self.sessions[session.id] = session

    def create(self, body: CreateSessionModel) -> Session:
        sid = body.session_id or uuid.uuid4().hex
        if sid in self.sessions:
            raise HTTPException(status_code=409, detail=f"session {sid!r} exists")
        log_path = self.data_dir / f"{sid}.jsonl" if self.data_dir else None
        session = Session(sid, body, log_path)
        if log_path is not None:
            with open(log_path, "w", encoding="utf-8") as f:
                f.write(
                    json.dumps(
                        {"event": "created", "session_id": sid, "body": body.model_dump()},
                        sort_keys=True,
                    )
                    + "\n"
                )
        self.sessions[sid] = session
        return session

    def get(self, sid: str) -> Session:
        session = self.sessions.get(sid)
        if session is None:
            raise HTTPException(status_code=404, detail=f"no session {sid!r}")
        return session


def create_app(data_dir: Optional[pathlib.Path] = None, console_dir: Optional[pathlib.Path] = None) -> FastAPI:
    app = FastAPI(title="markaudit audit-session service", version="1")
    store = SessionStore(data_dir)
    app.state.store = store

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "sessions": len(store.sessions)}

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionModel) -> dict:
        return store.create(body).view()

    @app.get("/sessions")
    def list_sessions() -> list[dict]:
        return [
            {
                "session_id": s.id,
                "mode": s.body.mode,
                "state": "concluded" if s.machine.concluded else "awaiting_ballot",
            }
            for s in store.sessions.values()
        ]

    @app.get("/sessions/{sid}")
    def get_session(sid: str) -> dict:
        return store.get(sid).view()

    @app.post("/sessions/{sid}/responses")
    def submit_response(sid: str, body: ResponseModel) -> dict:
        return store.get(sid).submit(body)

    @app.get("/sessions/{sid}/transcript", response_class=PlainTextResponse)
    def get_transcript(sid: str) -> str:
        return store.get(sid).transcript_json()

    if console_dir is None:
        default_console = pathlib.Path(__file__).resolve().parents[2] / "frontend" / "dist"
        console_dir = default_console if default_console.is_dir() else None
    if console_dir is not None and pathlib.Path(console_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/console", StaticFiles(directory=str(console_dir), html=True), name="console")

    return app
