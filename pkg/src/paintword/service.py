"""HTTP API over the edit engine: session CRUD, mask upload, edit launch,
live progress streaming (server-sent events), artifact download, and the
model registry listing. Errors are structured JSON {code, message} using the
engine's stable error codes."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse, StreamingResponse

from . import engine
from .errors import (
    AlreadyAccepted, Busy, DimensionMismatch, EmptyMask, EmptyPrompt,
    EngineError, InvalidConfig, InvalidGradient, InvalidLoss, NotCompleted,
    UnknownModel, UnknownToken,
)
from .imageops import png_bytes_to_mask
from .realism import default_realism_proxy
from .registry import ModelRegistry, default_registry
from .schedule import OptimizationSchedule, default_edit_schedule

_STATUS_BY_CODE = {
    DimensionMismatch.code: 400, EmptyMask.code: 400, EmptyPrompt.code: 400,
    UnknownToken.code: 400, InvalidConfig.code: 400, InvalidLoss.code: 400,
    InvalidGradient.code: 400,
    UnknownModel.code: 404, "UNKNOWN_SESSION": 404, "UNKNOWN_EDIT": 404,
    Busy.code: 409, NotCompleted.code: 409, AlreadyAccepted.code: 409,
}


class HttpEngineError(EngineError):
    """Service-level lookup failures that have no engine counterpart."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    preview_every: int = 25
    cma_evaluations: int = 3000
    grad_steps: int = 300
    adapters: tuple = field(default_factory=tuple)  # [{"socket": path}, ...]

    def default_schedule(self) -> OptimizationSchedule:
        return default_edit_schedule(self.cma_evaluations, self.grad_steps)


_ENV_FIELDS = {
    "PAINTWORD_HOST": ("host", str),
    "PAINTWORD_PORT": ("port", int),
    "PAINTWORD_PREVIEW_EVERY": ("preview_every", int),
    "PAINTWORD_CMA_EVALUATIONS": ("cma_evaluations", int),
    "PAINTWORD_GRAD_STEPS": ("grad_steps", int),
}


def load_config(path: str | Path | None = None,
                env: dict | None = None) -> ServiceConfig:
    """Config file (YAML or JSON by extension) with env-var overrides."""
    data: dict = {}
    if path is not None:
        path = Path(path)
        text = path.read_text()
        if path.suffix in (".yaml", ".yml"):
            import yaml
            data = yaml.safe_load(text) or {}
        else:
            data = json.loads(text)
    known = {f for f in ServiceConfig.__dataclass_fields__}
    unknown = set(data) - known
    if unknown:
        raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
    if "adapters" in data:
        data["adapters"] = tuple(data["adapters"])
    cfg = ServiceConfig(**data)
    env = os.environ if env is None else env
    overrides = {}
    for var, (name, cast) in _ENV_FIELDS.items():
        if var in env:
            try:
                overrides[name] = cast(env[var])
            except ValueError as e:
                raise InvalidConfig(f"bad env override {var}={env[var]!r}") from e
    return replace(cfg, **overrides) if overrides else cfg


def build_registry(config: ServiceConfig) -> ModelRegistry:
    registry = default_registry()
    for spec in config.adapters:
        from .adapter import AdapterGeneratorModel
        registry.register_generator(AdapterGeneratorModel(spec["socket"]),
                                    transport="external-adapter")
    return registry


def create_app(config: ServiceConfig | None = None,
               registry: ModelRegistry | None = None) -> FastAPI:
    config = config or ServiceConfig()
    registry = registry or build_registry(config)
    realism = default_realism_proxy()
    sessions: dict[str, engine.EditSession] = {}

    app = FastAPI(title="paintword", version="0.1.0")
    app.state.config = config
    app.state.registry = registry
    app.state.sessions = sessions

    @app.exception_handler(EngineError)
    async def engine_error_handler(_req: Request, err: EngineError):
        return JSONResponse(status_code=_STATUS_BY_CODE.get(err.code, 500),
                            content={"code": err.code, "message": str(err)})

    def get_session(sid: str) -> engine.EditSession:
        s = sessions.get(sid)
        if s is None:
            raise HttpEngineError("UNKNOWN_SESSION", f"no session {sid!r}")
        return s

    def get_handle(s: engine.EditSession, eid: str) -> engine.EditHandle:
        h = s.handles.get(eid)
        if h is None:
            raise HttpEngineError("UNKNOWN_EDIT", f"no edit {eid!r}")
        return h

    @app.post("/v1/sessions", status_code=201)
    async def create_session(request: Request):
        body = await request.json()
        for key in ("generator", "scorer"):
            if key not in body:
                raise InvalidConfig(f"missing field {key!r}")
        s = engine.create_session(registry, body["generator"], body["scorer"],
                                  seed=body.get("seed"))
        sessions[s.session_id] = s
        return {"session_id": s.session_id, "seed": s.seed,
                "image_url": f"/v1/sessions/{s.session_id}/image"}

    @app.get("/v1/sessions/{sid}")
    async def session_summary(sid: str):
        return get_session(sid).summary()

    @app.get("/v1/sessions/{sid}/image")
    async def session_image(sid: str):
        return Response(content=get_session(sid).image_png(),
                        media_type="image/png")

    @app.put("/v1/sessions/{sid}/mask")
    async def upload_mask(sid: str, request: Request):
        s = get_session(sid)
        body = await request.body()
        try:
            mask = png_bytes_to_mask(body)
        except EngineError:
            raise
        except Exception as e:
            raise DimensionMismatch(f"body is not a decodable PNG: {e}") from e
        coverage = engine.set_mask(s, mask)
        return {"mask_coverage": coverage}

    @app.post("/v1/sessions/{sid}/edits", status_code=202)
    async def launch_edit(sid: str, request: Request):
        s = get_session(sid)
        body = await request.json()
        if "text" not in body:
            raise EmptyPrompt("missing field 'text'")
        schedule = (OptimizationSchedule.from_dict(body["schedule"])
                    if body.get("schedule") else config.default_schedule())
        handle = engine.begin_edit(
            s, body["text"], lambda_img=float(body.get("lambda_img", 1.0)),
            schedule=schedule, seed=int(body.get("seed", 0)),
            preview_every=config.preview_every, realism_probe=realism)
        return {"edit_id": handle.edit_id,
                "stream_url": f"/v1/sessions/{sid}/edits/{handle.edit_id}/stream"}

    @app.get("/v1/sessions/{sid}/edits/{eid}/stream")
    async def stream_edit(sid: str, eid: str):
        s = get_session(sid)
        handle = get_handle(s, eid)

        def sse():
            for event in handle.events():
                payload = {k: v for k, v in event.items() if k != "type"}
                if event["type"] == "done":
                    payload["image_url"] = f"/v1/sessions/{sid}/image"
                yield (f"event: {event['type']}\n"
                       f"data: {json.dumps(payload)}\n\n")

        return StreamingResponse(sse(), media_type="text/event-stream")

    @app.post("/v1/sessions/{sid}/edits/{eid}/accept")
    async def accept(sid: str, eid: str):
        s = get_session(sid)
        get_handle(s, eid)
        engine.accept_edit(s, eid)
        return s.summary()

    @app.post("/v1/sessions/{sid}/edits/{eid}/revert")
    async def revert(sid: str, eid: str):
        s = get_session(sid)
        get_handle(s, eid)
        engine.revert_edit(s, eid)
        return s.summary()

    @app.get("/v1/models")
    async def models():
        return {"models": [e.to_dict() for e in registry.entries()]}

    return app


def serve(config: ServiceConfig) -> None:
    import uvicorn
    uvicorn.run(create_app(config), host=config.host, port=config.port,
                log_level="info")
