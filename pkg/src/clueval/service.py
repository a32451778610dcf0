"""HTTP annotation service.

Exposes the evaluation loop as sessions: create one over a dataset and test
clustering, fetch the pending query batch, post labels (partial batches are
fine), and read back the estimate curve.  Completing a batch advances the
loop synchronously in the request.  Sessions persist to a state directory as
JSON and are resumed transparently after a restart; all loop randomness
derives from the config seed and round index, so a resumed session continues
exactly where it left off.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .data import DataFormatError, load_clustering, load_embeddings
from .pipeline import ExperimentConfig, ExperimentState, StaleLabelError


class SessionCreate(BaseModel):
    config: dict = Field(default_factory=dict)
    dataset_path: str
    clustering_path: str


class LabelItem(BaseModel):
    id: str
    label: int


class LabelSubmission(BaseModel):
    labels: list[LabelItem]


@dataclass
class _Session:
    session_id: str
    dataset_path: str
    clustering_path: str
    state: ExperimentState
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def has_payloads(self) -> bool:
        return all(p is not None for p in self.state.dataset.payloads)


def _session_to_json(s: _Session) -> dict:
    st = s.state
    return {
        "session_id": s.session_id,
        "dataset_path": s.dataset_path,
        "clustering_path": s.clustering_path,
        "config": st.cfg.to_dict(),
        "round": st.round,
        "status": st.status,
        "human": list(st.human.items()),
        "pseudo": list(st.pseudo.items()),
        "staged": list(st.staged.items()),
        "pending": list(st.pending),
        "pending_scores": st._pending_scores,
        "curve": [list(p) for p in st.curve_points],
        "audit": st.audit,
    }


def _session_from_json(raw: dict) -> _Session:
    cfg = ExperimentConfig.from_dict(raw["config"])
    dataset = load_embeddings(raw["dataset_path"])
    clustering = load_clustering(raw["clustering_path"], dataset)
    state = ExperimentState(dataset, clustering, cfg)
    state.human = {k: int(v) for k, v in raw["human"]}
    state.pseudo = {k: int(v) for k, v in raw["pseudo"]}
    state.staged = {k: int(v) for k, v in raw["staged"]}
    state.pending = list(raw["pending"])
    state._pending_scores = raw["pending_scores"]
    state.round = int(raw["round"])
    state.status = raw["status"]
    state.curve_points = [(int(x), float(v)) for x, v in raw["curve"]]
    state.audit = raw["audit"]
    return _Session(raw["session_id"], raw["dataset_path"], raw["clustering_path"], state)


def _summary(s: _Session) -> dict:
    st = s.state
    return {
        "session_id": s.session_id,
        "status": st.status,
        "round": st.round,
        "labels_used": st.labels_used,
        "budget": st.cfg.budget,
        "batch_size": len(st.pending),
        "estimate": st.estimate,
        "metric": st.cfg.metric,
        "k_ref": st.cfg.k_ref,
        "has_payloads": s.has_payloads,
        "suitable_for_human_annotation": s.has_payloads,
    }


def create_app(state_dir: Path, frontend_dir: Path | None = None) -> FastAPI:
    """Build the service; sessions persist under ``state_dir``."""
    state_dir = Path(state_dir)
    state_dir.mkdir(parents=True, exist_ok=True)
    app = FastAPI(title="clueval annotation service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    sessions: dict[str, _Session] = {}
    registry_lock = threading.Lock()

    def _persist(s: _Session) -> None:
        path = state_dir / f"{s.session_id}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(_session_to_json(s)), encoding="utf-8")
        tmp.replace(path)

    def _get(session_id: str) -> _Session:
        with registry_lock:
            if session_id in sessions:
                return sessions[session_id]
            path = state_dir / f"{session_id}.json"
            if not path.exists():
                raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
            try:
                raw = json.loads(path.read_text(encoding="utf-8"))
                session = _session_from_json(raw)
            except (OSError, ValueError, KeyError, DataFormatError) as exc:
                raise HTTPException(status_code=500, detail=f"failed to restore session: {exc}") from exc
            sessions[session_id] = session
            return session

    @app.post("/sessions")
    def create_session(body: SessionCreate) -> dict:
        try:
            cfg = ExperimentConfig.from_dict(body.config)
        except (TypeError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=f"bad config: {exc}") from exc
        try:
            dataset = load_embeddings(body.dataset_path)
            clustering = load_clustering(body.clustering_path, dataset)
            state = ExperimentState(dataset, clustering, cfg)
        except (FileNotFoundError, DataFormatError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        session = _Session(uuid.uuid4().hex, body.dataset_path, body.clustering_path, state)
        with registry_lock:
            sessions[session.session_id] = session
        _persist(session)
        return {"session_id": session.session_id, **_summary(session)}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        session = _get(session_id)
        with session.lock:
            return _summary(session)

    @app.get("/sessions/{session_id}/queries")
    def get_queries(session_id: str) -> dict:
        session = _get(session_id)
        with session.lock:
            st = session.state
            items = []
            for pid in st.pending:
                row = st.dataset.vectors[st.dataset.index_of(pid)]
                items.append(
                    {
                        "id": pid,
                        "payload": st.dataset.payload_of(pid),
                        "vector_preview": [round(float(v), 4) for v in row[:8]],
                        "labeled": pid in st.staged,
                    }
                )
            return {"round": st.round, "status": st.status, "items": items}

    @app.post("/sessions/{session_id}/labels")
    def post_labels(session_id: str, body: LabelSubmission) -> dict:
        session = _get(session_id)
        with session.lock:
            st = session.state
            batch = {}
            for item in body.labels:
                if item.id in batch:
                    raise HTTPException(status_code=400, detail=f"duplicate id {item.id!r} in submission")
                batch[item.id] = item.label
            try:
                st.submit_labels(batch)
            except StaleLabelError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            except ValueError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            _persist(session)
            return {
                "estimate": st.estimate,
                "labels_used": st.labels_used,
                "status": st.status,
                "round": st.round,
                "pending": len(st.pending) - len(st.staged),
            }

    @app.get("/sessions/{session_id}/curve")
    def get_curve(session_id: str) -> dict:
        session = _get(session_id)
        with session.lock:
            st = session.state
            return {
                "metric": st.cfg.metric,
                "points": [{"labels_used": x, "estimate": v} for x, v in st.curve_points],
                "true_value": None,
            }

    if frontend_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True), name="ui")

    return app
