"""Live elicitation sessions behind an HTTP+JSON API.

One session runs the interactive loop for a human decision maker: fit the
posterior, pick the next pair by MCTS, wait for the answer, repeat until
the horizon. State is persisted as an append-only event log plus a
snapshot so a restarted server resumes sessions exactly.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .core import Criterion, PerformanceTable, PreferenceSet, PreferenceStatement
from .inference import InferenceContext, OptimizerConfig, posterior_variance
from .mcts import PolicyConfig, select_question
from .metrics import compute_pwi, compute_rai, f_pwi, f_rai
from .simulation import gen_performance_table

__all__ = ["create_app", "SessionStore"]


class CriterionIn(BaseModel):
    name: str
    scale_min: float
    scale_max: float
    subintervals: int = 2


class TableIn(BaseModel):
    alternatives: list[str]
    criteria: list[CriterionIn]
    performances: list[list[float]]


class SessionConfigIn(BaseModel):
    mcts_budget: int = Field(default=50, ge=1)
    fit_iters: int = Field(default=200, ge=1)
    fit_samples: int = Field(default=2000, ge=1)
    metric_samples: int = Field(default=4000, ge=1)
    async_fit: bool = True
    seed: Optional[int] = None


class CreateSessionIn(BaseModel):
    table: Optional[TableIn] = None
    horizon: int = Field(ge=1)
    config: SessionConfigIn = Field(default_factory=SessionConfigIn)


class AnswerIn(BaseModel):
    preferred: int
    other: int
    idempotency_key: Optional[str] = None


def _demo_table() -> PerformanceTable:
    return gen_performance_table(6, 3, np.random.default_rng(7))


@dataclass
class SessionState:
    id: str
    table: PerformanceTable
    horizon: int
    config: SessionConfigIn
    seed: int
    round: int = 1
    history: PreferenceSet = field(default_factory=PreferenceSet)
    theta: np.ndarray | None = None
    pending_question: Optional[tuple[int, int]] = None
    status: str = "selecting"
    metrics_history: list[dict] = field(default_factory=list)
    created: float = field(default_factory=time.time)
    updated: float = field(default_factory=time.time)
    idempotency_keys: dict = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    ctx: InferenceContext | None = field(default=None, repr=False)


def _table_to_dict(table: PerformanceTable) -> dict:
    return {
        "alternatives": list(table.alternatives),
        "criteria": [
            {"name": c.name, "scale_min": c.scale_min, "scale_max": c.scale_max,
             "subintervals": c.subintervals}
            for c in table.criteria
        ],
        "performances": table.performances.tolist(),
    }


def _table_from_dict(d: dict) -> PerformanceTable:
    criteria = tuple(
        Criterion(c["name"], c["scale_min"], c["scale_max"], c["subintervals"])
        for c in d["criteria"]
    )
    return PerformanceTable(tuple(d["alternatives"]), criteria, np.asarray(d["performances"]))


class SessionStore:
    def __init__(self, data_dir: str | Path, server_seed: int = 0):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.server_seed = server_seed
        self.sessions: dict[str, SessionState] = {}
        for snap in self.data_dir.glob("*/snapshot.json"):
            state = self._load(snap)
            self.sessions[state.id] = state

    # -- persistence -------------------------------------------------------

    def _session_dir(self, sid: str) -> Path:
        d = self.data_dir / sid
        d.mkdir(exist_ok=True)
        return d

    def _append_event(self, sid: str, event: dict) -> None:
        event = dict(event, ts=time.time())
        with (self._session_dir(sid) / "events.jsonl").open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event) + "\n")

    def _snapshot(self, s: SessionState) -> None:
        snap = {
            "id": s.id,
            "table": _table_to_dict(s.table),
            "horizon": s.horizon,
            "config": s.config.model_dump(),
            "seed": s.seed,
            "round": s.round,
            "history": [[st.preferred, st.other] for st in s.history],
            "theta": None if s.theta is None else s.theta.tolist(),
            "pending_question": list(s.pending_question) if s.pending_question else None,
            "status": s.status,
            "metrics_history": s.metrics_history,
            "created": s.created,
            "updated": s.updated,
            "idempotency_keys": s.idempotency_keys,
        }
        path = self._session_dir(s.id) / "snapshot.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(snap))
        tmp.replace(path)

    def _load(self, snap_path: Path) -> SessionState:
        d = json.loads(snap_path.read_text())
        state = SessionState(
            id=d["id"],
            table=_table_from_dict(d["table"]),
            horizon=d["horizon"],
            config=SessionConfigIn(**d["config"]),
            seed=d["seed"],
            round=d["round"],
            history=PreferenceSet(tuple(PreferenceStatement(*p) for p in d["history"])),
            theta=None if d["theta"] is None else np.asarray(d["theta"]),
            pending_question=tuple(d["pending_question"]) if d["pending_question"] else None,
            status="awaiting_answer" if d["status"] in ("fitting", "selecting") else d["status"],
            metrics_history=d["metrics_history"],
            created=d["created"],
            updated=d["updated"],
            idempotency_keys=d.get("idempotency_keys", {}),
        )
        state.ctx = self._make_ctx(state)
        # a crash mid-fit loses only the in-flight transition; recompute it
        if state.status != "done" and state.pending_question is None:
            self._fit_and_select(state)
        return state

    # -- session mechanics ---------------------------------------------------

    def _make_ctx(self, s: SessionState) -> InferenceContext:
        cfg = OptimizerConfig(max_iters=s.config.fit_iters, grad_samples=s.config.fit_samples)
        return InferenceContext(
            s.table, full_config=cfg, rollout_config=OptimizerConfig(
                max_iters=min(100, s.config.fit_iters), grad_samples=min(1000, s.config.fit_samples)
            ),
            base_seed=s.seed,
        )

    def _record_metrics(self, s: SessionState) -> None:
        rng = np.random.default_rng(
            np.random.SeedSequence([s.seed, 100, len(s.history)])
        )
        from .inference import sample_posterior

        samples = sample_posterior(s.theta, s.config.metric_samples, rng)
        pwi = compute_pwi(samples, s.table)
        rai = compute_rai(samples, s.table)
        s.metrics_history.append({
            "round": len(s.history),
            "f_var": posterior_variance(s.theta),
            "f_pwi": f_pwi(pwi),
            "f_rai": f_rai(rai),
            "pwi": pwi.tolist(),
            "rai": rai.tolist(),
        })

    def _fit_and_select(self, s: SessionState) -> None:
        """Refit on the current history, record metrics and pick the next question."""
        if len(s.history) == 0:
            s.theta = np.ones(s.table.gamma)  # first round: posterior equals the prior
        else:
            warm = s.theta
            fit = s.ctx.fit(s.history, budget="full", init_theta=warm)
            s.theta = fit.theta.params
        self._record_metrics(s)
        if len(s.history) >= s.horizon:
            s.status = "done"
            s.pending_question = None
        else:
            s.status = "selecting"
            s.round = len(s.history) + 1
            cfg = PolicyConfig(
                horizon=s.horizon - s.round + 1,
                budget=s.config.mcts_budget,
                rng_seed=int(np.random.SeedSequence([s.seed, 200, s.round]).generate_state(1)[0]),
            )
            s.pending_question = select_question(s.history, s.table, s.ctx, cfg, round_t=1)
            s.status = "awaiting_answer"
            self._append_event(s.id, {"type": "question", "round": s.round,
                                      "pair": list(s.pending_question)})
        s.updated = time.time()
        self._snapshot(s)

    def create(self, payload: CreateSessionIn) -> SessionState:
        if payload.table is None:
            table = _demo_table()
        else:
            try:
                table = _table_from_dict(payload.table.model_dump())
            except ValueError as exc:
                raise HTTPException(status_code=422, detail={"table": str(exc)})
        sid = uuid.uuid4().hex[:12]
        seed = payload.config.seed
        if seed is None:
            seed = int(np.random.SeedSequence([self.server_seed, int(uuid.UUID(hex=sid + "0" * 20).int % (2**31))]).generate_state(1)[0])
        state = SessionState(id=sid, table=table, horizon=payload.horizon,
                             config=payload.config, seed=seed)
        state.ctx = self._make_ctx(state)
        self.sessions[sid] = state
        self._append_event(sid, {"type": "created", "horizon": payload.horizon, "seed": seed})
        self._fit_and_select(state)
        return state

    def get(self, sid: str) -> SessionState:
        state = self.sessions.get(sid)
        if state is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return state

    def submit_answer(self, sid: str, answer: AnswerIn) -> SessionState:
        s = self.get(sid)
        with s.lock:
            if answer.idempotency_key and answer.idempotency_key in s.idempotency_keys:
                return s
            if s.status == "done":
                raise HTTPException(status_code=409, detail="session is done")
            if s.status != "awaiting_answer":
                raise HTTPException(status_code=409, detail=f"session is {s.status}")
            pair = {answer.preferred, answer.other}
            if s.pending_question is None or pair != set(s.pending_question):
                raise HTTPException(status_code=409, detail="answer does not match the pending question")
            statement = PreferenceStatement(answer.preferred, answer.other)
            s.history = s.history.extended(statement)
            if answer.idempotency_key:
                s.idempotency_keys[answer.idempotency_key] = len(s.history)
            s.pending_question = None
            s.status = "fitting"
            s.updated = time.time()
            self._append_event(sid, {"type": "answer", "round": len(s.history),
                                     "preferred": answer.preferred, "other": answer.other})
            self._snapshot(s)
        if s.config.async_fit:
            threading.Thread(target=self._locked_fit, args=(s,), daemon=True).start()
        else:
            self._locked_fit(s)
        return s

    def _locked_fit(self, s: SessionState) -> None:
        with s.lock:
            self._fit_and_select(s)


def _state_view(s: SessionState) -> dict:
    question = None
    if s.pending_question is not None:
        i, j = s.pending_question
        question = {
            "pair": [i, j],
            "alternatives": [
                {"index": i, "id": s.table.alternatives[i],
                 "performances": s.table.performances[i].tolist()},
                {"index": j, "id": s.table.alternatives[j],
                 "performances": s.table.performances[j].tolist()},
            ],
        }
    latest = s.metrics_history[-1] if s.metrics_history else None
    return {
        "id": s.id,
        "status": s.status,
        "round": s.round,
        "horizon": s.horizon,
        "question": question,
        "history": [[st.preferred, st.other] for st in s.history],
        "criteria": [c.name for c in s.table.criteria],
        "alternative_ids": list(s.table.alternatives),
        "posterior": None if s.theta is None else {
            "theta": s.theta.tolist(),
            "mean": (s.theta / s.theta.sum()).tolist(),
            "f_var": posterior_variance(s.theta),
        },
        "metrics": [
            {k: m[k] for k in ("round", "f_var", "f_pwi", "f_rai")} for m in s.metrics_history
        ],
        "pwi": latest["pwi"] if latest else None,
        "rai": latest["rai"] if latest else None,
    }


def create_app(data_dir: str | Path | None = None, server_seed: int | None = None,
               cors_origin: str | None = None) -> FastAPI:
    data_dir = data_dir or os.environ.get("PREFELICIT_DATA_DIR", "./prefelicit-sessions")
    if server_seed is None:
        server_seed = int(os.environ.get("PREFELICIT_SEED", "0"))
    cors_origin = cors_origin or os.environ.get("PREFELICIT_UI_ORIGIN", "*")

    store = SessionStore(data_dir, server_seed)
    app = FastAPI(title="prefelicit session service")
    app.state.store = store
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[cors_origin],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.post("/sessions")
    def create_session(payload: CreateSessionIn):
        state = store.create(payload)
        return {"id": state.id}

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        return _state_view(store.get(sid))

    @app.post("/sessions/{sid}/answer")
    def answer(sid: str, payload: AnswerIn):
        return _state_view(store.submit_answer(sid, payload))

    @app.get("/sessions/{sid}/export")
    def export(sid: str):
        s = store.get(sid)
        return {
            "id": s.id,
            "horizon": s.horizon,
            "statements": [[st.preferred, st.other] for st in s.history],
            "theta": None if s.theta is None else s.theta.tolist(),
            "config": s.config.model_dump(),
            "seed": s.seed,
            "table": _table_to_dict(s.table),
            "metrics": [
                {k: m[k] for k in ("round", "f_var", "f_pwi", "f_rai")} for m in s.metrics_history
            ],
        }

    return app
