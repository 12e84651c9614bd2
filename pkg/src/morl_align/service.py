"""HTTP/JSON session API: drive the alignment loop interactively, with a
human (or scripted client) supplying the reactions.

Sessions live in memory behind per-session locks; they are not durable
across restarts. Policy sets are built lazily per environment and cached
on disk when a cache directory is configured.
"""
from __future__ import annotations

import itertools
import os
import threading
from typing import Literal

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, ConfigDict, Field

import numpy as np

from .envs import resolve_env, rollout
from .errors import ConfigError, MorlAlignError, PhaseError, UnknownIdError
from .interpret import InterpreterConfig
from .learning import LearnerConfig, PolicySet, load_or_build_policy_set
from .loop import AlignmentSession, ProfileStore
from .simulate import user_from_spec

REACTION_RANGE = (-5.0, 5.0)


# -- request / response schemas --


class CreateSessionRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    env: str = "treasure_grid"
    mode: Literal["human-reaction", "simulated-user"] = "human-reaction"
    interpreter: dict = Field(default_factory=dict)
    selector: Literal["argmax", "steering"] = "argmax"
    user_id: str = "user-0"
    simulated_user: dict | None = None
    seed: int = 0
    review_every_k: int = 1


class ReactionRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    zeta: float


class SwitchUserRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    user_id: str
    simulated_user: dict | None = None


class PolicyView(BaseModel):
    policy_id: int
    anchor_weight: list[float]
    scalarization: str
    return_vector: list[float]


class FrontView(BaseModel):
    env: str
    objective_names: list[str]
    policies: list[PolicyView]
    front_order: list[int]
    utopia: list[float]


class SessionDescriptor(BaseModel):
    session_id: str
    env: str
    mode: str
    phase: str
    user_id: str
    selector: str
    interpreter_kind: str
    policy_id: int
    xi: list[float]
    front: FrontView


class TrajectoryView(BaseModel):
    cells: list[list[int]]
    actions: list[str]
    rewards: list[list[float]]
    return_vector: list[float]
    terminated: bool


class StepResponse(BaseModel):
    phase: str
    trajectory: TrajectoryView
    record: dict | None = None  # populated in simulated mode


class StateView(BaseModel):
    session_id: str
    env: str
    mode: str
    phase: str
    user_id: str
    selector: str
    interpreter_kind: str
    policy_id: int
    xi: list[float]
    interaction_count: int
    belief: dict
    population_mean: list[float]
    population_count: int


class ProfileView(BaseModel):
    user_id: str
    xi: list[float]
    preferred_policy_id: int
    interaction_count: int


class EnvView(BaseModel):
    id: str
    kind: str
    width: int
    height: int
    horizon: int
    objective_names: list[str]


def _front_view(env_id: str, policy_set: PolicySet) -> FrontView:
    return FrontView(
        env=env_id,
        objective_names=list(policy_set.env.objective_names),
        policies=[
            PolicyView(
                policy_id=p.policy_id,
                anchor_weight=list(p.anchor_weight),
                scalarization=p.scalarization,
                return_vector=list(p.return_vector),
            )
            for p in policy_set.policies
        ],
        front_order=list(policy_set.front_order),
        utopia=list(policy_set.utopia()),
    )


class _SessionEntry:
    def __init__(self, session_id: str, env_id: str, session: AlignmentSession):
        self.session_id = session_id
        self.env_id = env_id
        self.session = session
        self.lock = threading.Lock()


class SessionRegistry:
    """In-memory session table plus lazily built per-env policy sets."""

    def __init__(self, learner: LearnerConfig | None = None,
                 cache_dir: str | None = None,
                 policy_sets: dict[str, PolicySet] | None = None):
        self.learner = learner or LearnerConfig()
        self.cache_dir = cache_dir
        self._policy_sets: dict[str, PolicySet] = dict(policy_sets or {})
        self._stores: dict[str, ProfileStore] = {}
        self._sessions: dict[str, _SessionEntry] = {}
        self._lock = threading.Lock()
        self._ids = itertools.count()

    def policy_set(self, env_id: str) -> PolicySet:
        with self._lock:
            cached = self._policy_sets.get(env_id)
        if cached is not None:
            return cached
        spec = resolve_env(env_id)  # raises UnknownIdError for bad ids
        ps = load_or_build_policy_set(spec, self.learner, self.cache_dir)
        with self._lock:
            return self._policy_sets.setdefault(env_id, ps)

    def store(self, env_id: str, num_objectives: int) -> ProfileStore:
        with self._lock:
            if env_id not in self._stores:
                self._stores[env_id] = ProfileStore(num_objectives)
            return self._stores[env_id]

    def create(self, request: CreateSessionRequest) -> _SessionEntry:
        policy_set = self.policy_set(request.env)
        interpreter = InterpreterConfig.from_dict(request.interpreter)
        simulated = None
        user_id = request.user_id
        if request.mode == "simulated-user":
            spec = dict(request.simulated_user or {})
            spec.setdefault("user_id", user_id)
            rng = np.random.default_rng(np.random.SeedSequence([request.seed, 1]))
            simulated = user_from_spec(spec, rng=rng)
            user_id = simulated.user_id
        elif request.simulated_user is not None:
            raise ConfigError("simulated_user requires mode 'simulated-user'")
        session = AlignmentSession(
            policy_set,
            self.store(request.env, policy_set.env.num_objectives),
            user_id=user_id,
            interpreter_config=interpreter,
            selector_kind=request.selector,
            seed=request.seed,
            simulated_user=simulated,
            review_every_k=request.review_every_k,
        )
        with self._lock:
            session_id = f"s{next(self._ids)}"
            entry = _SessionEntry(session_id, request.env, session)
            self._sessions[session_id] = entry
        return entry

    def get(self, session_id: str) -> _SessionEntry:
        with self._lock:
            entry = self._sessions.get(session_id)
        if entry is None:
            raise UnknownIdError(f"unknown session {session_id!r}")
        return entry


def _error_payload(code: str, message: str, field_path: str | None = None) -> dict:
    payload = {"code": code, "message": message}
    if field_path is not None:
        payload["field_path"] = field_path
    return payload


def _describe(entry: _SessionEntry) -> SessionDescriptor:
    session = entry.session
    return SessionDescriptor(
        session_id=entry.session_id,
        env=entry.env_id,
        mode=session.mode,
        phase=session.phase,
        user_id=session.user_id,
        selector=session.selector_kind,
        interpreter_kind=session.interpreter_config.kind,
        policy_id=session.selection.policy_id,
        xi=list(session.selection.xi),
        front=_front_view(entry.env_id, session.policy_set),
    )


def create_app(learner: LearnerConfig | None = None, cache_dir: str | None = None,
               policy_sets: dict[str, PolicySet] | None = None,
               static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="morl-align session service", docs_url="/docs")
    registry = SessionRegistry(learner, cache_dir, policy_sets)
    app.state.registry = registry

    @app.exception_handler(UnknownIdError)
    async def _unknown(request: Request, exc: UnknownIdError):
        return JSONResponse(status_code=404, content=_error_payload("unknown-id", str(exc)))

    @app.exception_handler(PhaseError)
    async def _phase(request: Request, exc: PhaseError):
        return JSONResponse(status_code=409, content=_error_payload("phase-violation", str(exc)))

    @app.exception_handler(ConfigError)
    async def _config(request: Request, exc: ConfigError):
        return JSONResponse(status_code=422, content=_error_payload("invalid-config", str(exc)))

    @app.exception_handler(MorlAlignError)
    async def _domain(request: Request, exc: MorlAlignError):
        return JSONResponse(status_code=400, content=_error_payload("domain-error", str(exc)))

    @app.exception_handler(RequestValidationError)
    async def _validation(request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        path = ".".join(str(part) for part in first.get("loc", ()) if part != "body")
        return JSONResponse(
            status_code=422,
            content=_error_payload("validation-error", first.get("msg", "invalid request"),
                                   field_path=path or None),
        )

    @app.get("/api/envs", response_model=list[EnvView])
    def list_envs():
        specs = [resolve_env("treasure_grid"), resolve_env("chore_grid_0")]
        return [
            EnvView(
                id=spec.id,
                kind=spec.kind,
                width=spec.width,
                height=spec.height,
                horizon=spec.horizon,
                objective_names=list(spec.objective_names),
            )
            for spec in specs
        ]

    @app.get("/api/front/{env_id}", response_model=FrontView)
    def get_front(env_id: str):
        return _front_view(env_id, registry.policy_set(env_id))

    @app.post("/api/sessions", response_model=SessionDescriptor, status_code=201)
    def create_session(request: CreateSessionRequest):
        return _describe(registry.create(request))

    @app.post("/api/sessions/{session_id}/step", response_model=StepResponse)
    def step(session_id: str):
        entry = registry.get(session_id)
        with entry.lock:
            session = entry.session
            if session.mode == "simulated-user":
                record = session.run_interaction()
                # Rollouts are deterministic, so the executed trajectory can
                # be re-derived from the record's policy for the response.
                executed = session.policy_set.get(record["policy_before"])
                trajectory = rollout(session.policy_set.env, executed.action_map)
                return StepResponse(
                    phase=session.phase,
                    trajectory=TrajectoryView(**trajectory.to_dict()),
                    record=record,
                )
            trajectory = session.execute_step()
            return StepResponse(
                phase=session.phase,
                trajectory=TrajectoryView(**trajectory.to_dict()),
            )

    @app.post("/api/sessions/{session_id}/reaction")
    def reaction(session_id: str, request: ReactionRequest):
        entry = registry.get(session_id)
        with entry.lock:
            zeta = min(max(request.zeta, REACTION_RANGE[0]), REACTION_RANGE[1])
            return entry.session.submit_reaction(zeta)

    @app.get("/api/sessions/{session_id}/state", response_model=StateView)
    def get_state(session_id: str):
        entry = registry.get(session_id)
        with entry.lock:
            session = entry.session
            return StateView(
                session_id=entry.session_id,
                env=entry.env_id,
                mode=session.mode,
                phase=session.phase,
                user_id=session.user_id,
                selector=session.selector_kind,
                interpreter_kind=session.interpreter_config.kind,
                policy_id=session.selection.policy_id,
                xi=list(session.selection.xi),
                interaction_count=session.profile.interaction_count,
                belief=session.profile.belief.to_dict(),
                population_mean=list(session.store.population.mean()),
                population_count=session.store.population.count,
            )

    @app.get("/api/sessions/{session_id}/audit")
    def get_audit(session_id: str):
        entry = registry.get(session_id)
        with entry.lock:
            return {"session_id": session_id, "records": entry.session.audit_log()}

    @app.post("/api/sessions/{session_id}/user", response_model=ProfileView)
    def switch_user(session_id: str, request: SwitchUserRequest):
        entry = registry.get(session_id)
        with entry.lock:
            session = entry.session
            simulated = None
            if request.simulated_user is not None:
                spec = dict(request.simulated_user)
                spec.setdefault("user_id", request.user_id)
                seed = int(spec.get("seed", 0))
                rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
                simulated = user_from_spec(spec, rng=rng)
            profile = session.switch_user(request.user_id, simulated)
            return ProfileView(
                user_id=profile.user_id,
                xi=list(profile.xi),
                preferred_policy_id=profile.preferred_policy_id,
                interaction_count=profile.interaction_count,
            )

    @app.delete("/api/sessions/{session_id}")
    def close_session(session_id: str):
        entry = registry.get(session_id)
        with entry.lock:
            entry.session.close()
            return {"session_id": session_id, "phase": entry.session.phase}

    if static_dir is not None and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
