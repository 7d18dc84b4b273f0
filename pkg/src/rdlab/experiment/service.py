"""HTTP/JSON API over the study state machine.

Payloads served to participant clients never contain truth metadata
(dgp id, discontinuity, seed); those live only in server-side sidecars
and the aggregate endpoints.
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel

from ..dgp import Dgp
from ..errors import SessionStateError, StudyFull
from .study import EventLog, Study, StudyConfig, create_study, replay


class StudyHost:
    """Holds live studies and their event logs."""

    def __init__(self):
        self.studies: dict[str, Study] = {}

    def add(self, study: Study) -> None:
        self.studies[study.study_id] = study

    def get(self, study_id: str) -> Study:
        if study_id not in self.studies:
            raise KeyError(study_id)
        return self.studies[study_id]

    def find_session(self, session_id: str) -> Study:
        for study in self.studies.values():
            if session_id in study.sessions:
                return study
        raise KeyError(session_id)

    @staticmethod
    def load_from_events(path: str) -> "StudyHost":
        host = StudyHost()
        log = EventLog(path)
        if len(log):
            study = replay(log.events)
            study.log = log  # keep appending to the same file
            host.add(study)
        return host


class CreateStudyBody(BaseModel):
    config: dict
    dgps: list[dict]
    master_seed: int
    study_id: Optional[str] = None


class ResponseBody(BaseModel):
    reported: bool
    bonus: str
    magnitude: Optional[float] = None


class SurveyBody(BaseModel):
    fields: dict


class FinalizeBody(BaseModel):
    attention_check_passed: Optional[bool] = None


def create_app(host: Optional[StudyHost] = None) -> FastAPI:
    host = host if host is not None else StudyHost()
    app = FastAPI(title="rdlab experiment service")
    app.state.host = host
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def _study(study_id: str) -> Study:
        try:
            return host.get(study_id)
        except KeyError:
            raise HTTPException(404, f"unknown study {study_id!r}")

    def _session_study(session_id: str) -> Study:
        try:
            return host.find_session(session_id)
        except KeyError:
            raise HTTPException(404, f"unknown session {session_id!r}")

    @app.post("/studies")
    def post_study(body: CreateStudyBody):
        config = StudyConfig.from_dict(body.config)
        dgps = [Dgp.from_dict(d) for d in body.dgps]
        study = create_study(config, body.master_seed, dgps, study_id=body.study_id)
        host.add(study)
        return {"study_id": study.study_id, "pool_size": len(study.pool)}

    @app.post("/studies/{study_id}/sessions")
    def post_session(study_id: str):
        study = _study(study_id)
        try:
            session = study.open_session()
        except StudyFull as exc:
            raise HTTPException(409, str(exc))
        return {
            "session_id": session.session_id,
            "n_trials": len(session.graph_ids),
            "magnitude_elicitation": study.config.magnitude_elicitation,
        }

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        study = _session_study(session_id)
        s = study.sessions[session_id]
        return {
            "session_id": session_id,
            "n_trials": len(s.graph_ids),
            "answered": len(s.responses),
            "finished": s.finished,
            "magnitude_elicitation": study.config.magnitude_elicitation,
        }

    @app.get("/sessions/{session_id}/trials/{k}")
    def get_trial(session_id: str, k: int):
        study = _session_study(session_id)
        try:
            return study.serve_trial(session_id, k)
        except SessionStateError as exc:
            raise HTTPException(409, str(exc))

    @app.post("/sessions/{session_id}/trials/{k}/response")
    def post_response(session_id: str, k: int, body: ResponseBody):
        study = _session_study(session_id)
        try:
            return study.submit_response(
                session_id, k, body.reported, body.bonus, body.magnitude
            )
        except SessionStateError as exc:
            raise HTTPException(409, str(exc))

    @app.post("/sessions/{session_id}/survey")
    def post_survey(session_id: str, body: SurveyBody):
        study = _session_study(session_id)
        study.submit_survey(session_id, body.fields)
        return {"session_id": session_id, "ok": True}

    @app.post("/sessions/{session_id}/finalize")
    def post_finalize(session_id: str, body: FinalizeBody = FinalizeBody()):
        study = _session_study(session_id)
        try:
            return study.finalize_session(session_id, body.attention_check_passed)
        except SessionStateError as exc:
            raise HTTPException(409, str(exc))

    @app.get("/studies/{study_id}/aggregate")
    def get_aggregate(study_id: str):
        return _study(study_id).aggregate()

    @app.get("/studies/{study_id}/export.csv", response_class=PlainTextResponse)
    def get_export(study_id: str):
        return _study(study_id).export_csv()

    @app.get("/studies/{study_id}/lineup")
    def get_lineup(study_id: str, seed: int = 0):
        """Render a lineup for the first configured DGP; the answer is only
        available from the companion answer endpoint, never in the SVG."""
        from ..dgp import sample_dataset
        from ..plotting import render_lineup

        study = _study(study_id)
        dgp = study.dgps[0]
        real = sample_dataset(dgp, 0.0, seed=derive_answer_seed(seed))
        svg, answer = render_lineup(real, dgp, seed)
        study._lineup_answers = getattr(study, "_lineup_answers", {})
        study._lineup_answers[seed] = answer
        return {"svg": svg, "seed": seed}

    @app.get("/studies/{study_id}/lineup/{seed}/answer")
    def get_lineup_answer(study_id: str, seed: int):
        study = _study(study_id)
        answers = getattr(study, "_lineup_answers", {})
        if seed not in answers:
            raise HTTPException(404, "lineup not generated yet")
        row, col = answers[seed]
        return {"row": row, "col": col}

    return app


def derive_answer_seed(seed: int) -> int:
    from ..rng import derive_seed

    return derive_seed(seed, "lineup-real")
