"""Classification-experiment studies: graph pools, sessions, event log.

A study pre-generates every graph it will ever serve (each graph is seen by
exactly one participant), assigns arriving participants to arms by a
pre-randomized rotation, and records everything in an append-only event
log from which the full state can be rebuilt.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..dgp import Dgp, sample_dataset
from ..errors import SessionStateError, StudyFull
from ..evaluation import (
    ClassificationBatch,
    ResponseRecord,
    export_power_csv,
    export_risk_csv,
    power_curve,
    risk_table_row,
    as_risk_row,
)
from ..plotting import GraphicalParams, RenderedGraph, render_rd_plot
from ..rng import derive_seed, rng_from

N_TRIALS = 11

# Discontinuity slots per session: two zeros, both signs of four magnitudes,
# and one extreme trial whose sign is decided by a per-session seed bit.
MAGNITUDE_SLOTS = (
    0.0, 0.0, 0.1944, -0.1944, 0.324, -0.324, 0.54, -0.54, 0.9, -0.9, None,
)
EXTREME_MAGNITUDE = 1.5


@dataclass(frozen=True)
class Payment:
    base_cents: int = 300
    wager_win_cents: int = 40
    fixed_cents: int = 20

    def __post_init__(self):
        if min(self.base_cents, self.wager_win_cents, self.fixed_cents) < 0:
            raise ValueError("payment amounts must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "base_cents": self.base_cents,
            "wager_win_cents": self.wager_win_cents,
            "fixed_cents": self.fixed_cents,
        }


@dataclass(frozen=True)
class StudyConfig:
    arms: tuple
    dgp_ids: tuple
    participants_per_arm: int = 88
    payment: Payment = Payment()
    magnitude_elicitation: bool = False

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(self.arms))
        object.__setattr__(self, "dgp_ids", tuple(self.dgp_ids))
        if len(self.arms) < 1:
            raise ValueError("need at least one arm")
        if len(self.dgp_ids) != N_TRIALS:
            raise ValueError(f"need exactly {N_TRIALS} DGPs, got {len(self.dgp_ids)}")
        if self.participants_per_arm < 1:
            raise ValueError("participants_per_arm must be positive")

    def to_dict(self) -> dict:
        return {
            "arms": [g.to_dict() for g in self.arms],
            "dgp_ids": list(self.dgp_ids),
            "participants_per_arm": self.participants_per_arm,
            "payment": self.payment.to_dict(),
            "magnitude_elicitation": self.magnitude_elicitation,
        }

    @staticmethod
    def from_dict(d: dict) -> "StudyConfig":
        return StudyConfig(
            arms=tuple(GraphicalParams.from_dict(g) for g in d["arms"]),
            dgp_ids=tuple(d["dgp_ids"]),
            participants_per_arm=int(d.get("participants_per_arm", 88)),
            payment=Payment(**d.get("payment", {})),
            magnitude_elicitation=bool(d.get("magnitude_elicitation", False)),
        )


@dataclass
class Response:
    trial_index: int
    graph_id: str
    reported: bool
    bonus: str
    magnitude: Optional[float]

    def payload(self) -> tuple:
        return (self.trial_index, self.reported, self.bonus, self.magnitude)


@dataclass
class Session:
    session_id: str
    arm_index: int
    slot: int
    graph_ids: tuple  # presentation order, length 11
    responses: list = field(default_factory=list)
    served_up_to: int = -1
    finished: bool = False
    n_correct: Optional[int] = None
    earnings_cents: Optional[int] = None
    attention_check_passed: Optional[bool] = None
    survey: Optional[dict] = None

    @property
    def state(self) -> str:
        if self.finished:
            return "finished"
        if not self.responses:
            return "open"
        return f"in_progress({len(self.responses)})"

    def snapshot(self) -> dict:
        return {
            "session_id": self.session_id,
            "arm_index": self.arm_index,
            "slot": self.slot,
            "graph_ids": list(self.graph_ids),
            "responses": [
                [r.trial_index, r.graph_id, r.reported, r.bonus, r.magnitude]
                for r in self.responses
            ],
            "served_up_to": self.served_up_to,
            "finished": self.finished,
            "n_correct": self.n_correct,
            "earnings_cents": self.earnings_cents,
            "attention_check_passed": self.attention_check_passed,
            "survey": self.survey,
        }


class EventLog:
    """Append-only JSON-lines log; optionally file-backed."""

    def __init__(self, path: Optional[str] = None):
        self.path = path
        self.events: list[dict] = []
        if path:
            try:
                with open(path, "r", encoding="utf-8") as fh:
                    self.events = [json.loads(line) for line in fh if line.strip()]
            except FileNotFoundError:
                pass

    def append(self, event: dict) -> None:
        self.events.append(event)
        if self.path:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(event, sort_keys=True) + "\n")

    def __iter__(self):
        return iter(self.events)

    def __len__(self):
        return len(self.events)


def _trial_plan(master_seed: int, arm: int, slot: int) -> list[dict]:
    """The 11 (dgp index, magnitude) pairs for one participant slot.

    DGP-to-magnitude assignment rotates with the slot so every (dgp,
    magnitude) cell fills evenly within an arm; the presentation order is
    an independent per-slot permutation.
    """
    plan = []
    for j in range(N_TRIALS):
        m = (j + slot) % N_TRIALS
        mag = MAGNITUDE_SLOTS[m]
        if mag is None:
            sign = 1.0 if derive_seed(master_seed, "extreme-sign", arm, slot) % 2 == 0 else -1.0
            mag = sign * EXTREME_MAGNITUDE
        plan.append({"dgp_index": j, "d_multiple": mag})
    order = rng_from(master_seed, "trial-order", arm, slot).permutation(N_TRIALS)
    return [plan[j] for j in order]


class Study:
    """In-memory study state; all mutation funneled through one lock."""

    def __init__(
        self,
        config: StudyConfig,
        master_seed: int,
        dgps: Sequence[Dgp],
        study_id: Optional[str] = None,
        log: Optional[EventLog] = None,
        _replaying: bool = False,
    ):
        by_id = {d.dgp_id: d for d in dgps}
        missing = [i for i in config.dgp_ids if i not in by_id]
        if missing:
            raise ValueError(f"missing DGP definitions for {missing}")
        self.config = config
        self.master_seed = int(master_seed)
        self.dgps = [by_id[i] for i in config.dgp_ids]
        self.study_id = study_id or self._default_id()
        self.log = log if log is not None else EventLog()
        self._lock = threading.Lock()
        self.sessions: dict[str, Session] = {}
        self._session_counter = 0
        self._assignment_cursor = 0
        self._assignments = self._build_assignments()
        self.pool: dict[str, RenderedGraph] = {}
        self._schedules: dict[tuple[int, int], tuple] = {}
        self._generate_pool()
        if not _replaying:
            self._emit(
                {
                    "type": "study_created",
                    "study_id": self.study_id,
                    "master_seed": self.master_seed,
                    "config": config.to_dict(),
                    "dgps": [d.to_dict() for d in self.dgps],
                }
            )

    # -- construction -----------------------------------------------------

    def _default_id(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps(self.config.to_dict(), sort_keys=True).encode())
        h.update(str(self.master_seed).encode())
        return "study-" + h.hexdigest()[:12]

    def _build_assignments(self) -> list[tuple[int, int]]:
        """Pre-randomized (arm, slot) order for arriving participants."""
        order = []
        n_arms = len(self.config.arms)
        for block in range(self.config.participants_per_arm):
            arms = rng_from(self.master_seed, "arm-order", block).permutation(n_arms)
            order.extend((int(a), block) for a in arms)
        return order

    def _generate_pool(self) -> None:
        for a, gamma in enumerate(self.config.arms):
            for p in range(self.config.participants_per_arm):
                plan = _trial_plan(self.master_seed, a, p)
                ids = []
                for t, item in enumerate(plan):
                    j = item["dgp_index"]
                    seed = derive_seed(self.master_seed, "graph", a, p, j)
                    graph_id = f"{self.study_id}-a{a}-p{p}-g{j}"
                    ds = sample_dataset(self.dgps[j], item["d_multiple"], seed)
                    self.pool[graph_id] = render_rd_plot(ds, gamma, graph_id=graph_id)
                    ids.append(graph_id)
                self._schedules[(a, p)] = tuple(ids)

    def pool_hash(self) -> str:
        h = hashlib.sha256()
        for gid in sorted(self.pool):
            g = self.pool[gid]
            h.update(gid.encode())
            h.update(g.svg.encode())
            h.update(g.sidecar_json().encode())
        return h.hexdigest()

    # -- event plumbing ----------------------------------------------------

    def _emit(self, event: dict) -> None:
        event.setdefault("ts", time.time())
        self.log.append(event)

    # -- commands ----------------------------------------------------------

    def open_session(self, _event: Optional[dict] = None) -> Session:
        with self._lock:
            if _event is None:
                if self._assignment_cursor >= len(self._assignments):
                    raise StudyFull("all participant slots are taken")
                arm, slot = self._assignments[self._assignment_cursor]
                session_id = f"{self.study_id}-s{self._session_counter:04d}"
                event = {
                    "type": "session_created",
                    "study_id": self.study_id,
                    "session_id": session_id,
                    "arm": arm,
                    "slot": slot,
                }
                self._emit(event)
            else:
                event = _event
                session_id, arm, slot = event["session_id"], event["arm"], event["slot"]
            self._assignment_cursor += 1
            self._session_counter += 1
            session = Session(
                session_id=session_id,
                arm_index=arm,
                slot=slot,
                graph_ids=self._schedules[(arm, slot)],
            )
            self.sessions[session_id] = session
            return session

    def _session(self, session_id: str) -> Session:
        if session_id not in self.sessions:
            raise SessionStateError(f"unknown session {session_id!r}")
        return self.sessions[session_id]

    def serve_trial(self, session_id: str, trial_index: int) -> dict:
        """SVG and index for the participant's current trial.

        Trials are forward-only: only the first unanswered trial can be
        served, and re-serving it is idempotent.
        """
        with self._lock:
            s = self._session(session_id)
            if s.finished:
                raise SessionStateError("session already finished")
            current = len(s.responses)
            if trial_index != current:
                raise SessionStateError(
                    f"trial {trial_index} is not current (expected {current})"
                )
            if s.served_up_to < trial_index:
                self._emit(
                    {
                        "type": "trial_served",
                        "session_id": session_id,
                        "trial_index": trial_index,
                        "graph_id": s.graph_ids[trial_index],
                    }
                )
                s.served_up_to = trial_index
            graph = self.pool[s.graph_ids[trial_index]]
            return {
                "session_id": session_id,
                "trial_index": trial_index,
                "n_trials": N_TRIALS,
                "svg": graph.svg,
                "magnitude_elicitation": self.config.magnitude_elicitation,
            }

    def submit_response(
        self,
        session_id: str,
        trial_index: int,
        reported: bool,
        bonus: str,
        magnitude: Optional[float] = None,
        _event: Optional[dict] = None,
    ) -> dict:
        """Record one classification; idempotent per (session, trial).

        No correctness feedback is returned.
        """
        with self._lock:
            s = self._session(session_id)
            if _event is None:
                if s.finished:
                    raise SessionStateError("session already finished")
                if bonus not in ("wager", "fixed"):
                    raise SessionStateError(f"unknown bonus choice {bonus!r}")
                needs_magnitude = self.config.magnitude_elicitation and reported
                if needs_magnitude and magnitude is None:
                    raise SessionStateError("magnitude estimate required")
                if magnitude is not None and not needs_magnitude:
                    raise SessionStateError("magnitude estimate not expected")
                if trial_index < len(s.responses):
                    prior = s.responses[trial_index]
                    if prior.payload() == (trial_index, bool(reported), bonus, magnitude):
                        return {"session_id": session_id, "answered": len(s.responses)}
                    raise SessionStateError("conflicting duplicate submission")
                if trial_index != len(s.responses):
                    raise SessionStateError("responses must arrive in order")
                if s.served_up_to < trial_index:
                    raise SessionStateError("trial has not been served")
                event = {
                    "type": "response_submitted",
                    "session_id": session_id,
                    "trial_index": trial_index,
                    "graph_id": s.graph_ids[trial_index],
                    "reported": bool(reported),
                    "bonus": bonus,
                    "magnitude": magnitude,
                }
                self._emit(event)
            else:
                event = _event
            s.responses.append(
                Response(
                    trial_index=event["trial_index"],
                    graph_id=event["graph_id"],
                    reported=event["reported"],
                    bonus=event["bonus"],
                    magnitude=event["magnitude"],
                )
            )
            return {"session_id": session_id, "answered": len(s.responses)}

    def submit_survey(self, session_id: str, fields: dict,
                      _event: Optional[dict] = None) -> None:
        with self._lock:
            s = self._session(session_id)
            if _event is None:
                event = {
                    "type": "survey_submitted",
                    "session_id": session_id,
                    "fields": dict(fields),
                }
                self._emit(event)
            else:
                event = _event
            s.survey = dict(event["fields"])

    def finalize_session(
        self,
        session_id: str,
        attention_check_passed: Optional[bool] = None,
        _event: Optional[dict] = None,
    ) -> dict:
        """Close the session and report earnings and the correct-call tally.

        Wagers pay out only on correct classifications; the fixed bonus is
        unconditional.  Finalizing twice returns the recorded summary.
        """
        with self._lock:
            s = self._session(session_id)
            if _event is None:
                if s.finished:
                    return {
                        "session_id": session_id,
                        "n_correct": s.n_correct,
                        "earnings_cents": s.earnings_cents,
                    }
                if len(s.responses) != N_TRIALS:
                    raise SessionStateError(
                        f"cannot finalize with {len(s.responses)} of {N_TRIALS} responses"
                    )
                pay = self.config.payment
                n_correct = 0
                earnings = pay.base_cents
                for r in s.responses:
                    truth = self.pool[r.graph_id].truth
                    correct = r.reported == (truth["d_multiple"] != 0)
                    n_correct += int(correct)
                    if r.bonus == "wager":
                        earnings += pay.wager_win_cents if correct else 0
                    else:
                        earnings += pay.fixed_cents
                event = {
                    "type": "session_finished",
                    "session_id": session_id,
                    "n_correct": n_correct,
                    "earnings_cents": earnings,
                    "attention_check_passed": attention_check_passed,
                }
                self._emit(event)
            else:
                event = _event
            s.finished = True
            s.n_correct = event["n_correct"]
            s.earnings_cents = event["earnings_cents"]
            s.attention_check_passed = event["attention_check_passed"]
            return {
                "session_id": session_id,
                "n_correct": s.n_correct,
                "earnings_cents": s.earnings_cents,
            }

    # -- aggregation -------------------------------------------------------

    def arm_label(self, arm_index: int) -> str:
        return f"arm{arm_index}"

    def classification_batch(
        self, exclude_failed_attention: bool = False
    ) -> ClassificationBatch:
        records = []
        for s in self.sessions.values():
            if exclude_failed_attention and s.attention_check_passed is False:
                continue
            for r in s.responses:
                truth = self.pool[r.graph_id].truth
                records.append(
                    ResponseRecord(
                        responder_id=s.session_id,
                        graph_id=r.graph_id,
                        dgp_id=truth["dgp_id"],
                        d_multiple=truth["d_multiple"],
                        arm=self.arm_label(s.arm_index),
                        reported_discontinuity=r.reported,
                        bonus_choice=r.bonus,
                        magnitude_estimate=r.magnitude,
                    )
                )
        return ClassificationBatch(tuple(records))

    def aggregate(self) -> dict:
        """Power curves and risk rows per arm, plus session progress."""
        batch = self.classification_batch()
        arms_present = batch.arms()
        out: dict = {
            "study_id": self.study_id,
            "arms": {
                self.arm_label(i): g.to_dict() for i, g in enumerate(self.config.arms)
            },
            "progress": {
                "sessions_opened": len(self.sessions),
                "sessions_finished": sum(1 for s in self.sessions.values() if s.finished),
                "responses": sum(len(s.responses) for s in self.sessions.values()),
            },
            "power_curves": {},
            "risk_table": {"classical": [], "as": []},
        }
        for arm in arms_present:
            out["power_curves"][arm] = [
                {
                    "d": p.d_multiple,
                    "p_hat": p.p_hat,
                    "ci_low": p.ci_low,
                    "ci_high": p.ci_high,
                    "n": p.n,
                }
                for p in power_curve(batch, arm)
            ]
            try:
                r = risk_table_row(batch, arm)
                out["risk_table"]["classical"].append(r.__dict__)
                out["risk_table"]["as"].append(as_risk_row(batch, arm).__dict__)
            except ValueError:
                pass  # not enough coverage of d levels yet
        return out

    def export_csv(self) -> str:
        batch = self.classification_batch()
        arms = batch.arms()
        power = export_power_csv(batch, arms)
        try:
            risks = export_risk_csv(batch, arms)
        except ValueError:
            risks = "section,arm,col1,col2,col3,col4\n"
        return power + risks

    # -- replay and snapshots ----------------------------------------------

    def state_snapshot(self) -> dict:
        return {
            "study_id": self.study_id,
            "master_seed": self.master_seed,
            "config": self.config.to_dict(),
            "pool_hash": self.pool_hash(),
            "assignment_cursor": self._assignment_cursor,
            "sessions": {
                sid: s.snapshot() for sid, s in sorted(self.sessions.items())
            },
        }


def create_study(
    config: StudyConfig,
    master_seed: int,
    dgps: Sequence[Dgp],
    log: Optional[EventLog] = None,
    study_id: Optional[str] = None,
) -> Study:
    return Study(config, master_seed, dgps, study_id=study_id, log=log)


def replay(events) -> Study:
    """Rebuild a study from its event log.

    The graph pool is regenerated deterministically from the recorded
    config and master seed; every derived value in later events is applied
    as recorded.
    """
    events = list(events)
    if not events or events[0]["type"] != "study_created":
        raise ValueError("event log must start with study_created")
    head = events[0]
    config = StudyConfig.from_dict(head["config"])
    dgps = [Dgp.from_dict(d) for d in head["dgps"]]
    study = Study(
        config,
        head["master_seed"],
        dgps,
        study_id=head["study_id"],
        log=EventLog(),
        _replaying=True,
    )
    study.log.events.append(head)
    for ev in events[1:]:
        study.log.events.append(ev)
        kind = ev["type"]
        if kind == "session_created":
            study.open_session(_event=ev)
        elif kind == "trial_served":
            s = study.sessions[ev["session_id"]]
            s.served_up_to = max(s.served_up_to, ev["trial_index"])
        elif kind == "response_submitted":
            study.submit_response(
                ev["session_id"], ev["trial_index"], ev["reported"], ev["bonus"],
                _event=ev,
            )
        elif kind == "survey_submitted":
            study.submit_survey(ev["session_id"], ev["fields"], _event=ev)
        elif kind == "session_finished":
            study.finalize_session(ev["session_id"], _event=ev)
        else:
            raise ValueError(f"unknown event type {kind!r}")
    return study
