"""Edit sessions: hold (z, image), ingest mask + prompt, run the optimization
schedule on a worker thread, stream progress, accept or revert.

A session owns a composable canvas (the generator's interior latent or style
field). Each edit splits the *current* canvas against the mask, so accepted
edits become frozen content for subsequent edits; reverting discards the
candidate and leaves the canvas untouched. State machine per session:
idle -> editing -> {completed, failed} -> idle (via accept or revert).
"""

from __future__ import annotations

import base64
import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .container import load_container, save_container
from .errors import (
    AlreadyAccepted, Busy, EmptyMask, EngineError, NotCompleted, UnknownModel,
)
from .generators import (
    GeneratorModel, SplitState, apply_edit_to_canvas, make_split_from_canvas,
)
from .imageops import (
    image_to_png_bytes, mask_to_png_bytes, png_bytes_to_image, png_bytes_to_mask,
    require_nonempty, validate_mask,
)
from .losses import (
    EditObjective, FullImageObjective, LossBreakdown, LossConfig,
)
from .registry import ModelRegistry
from .schedule import (
    OptimizationResult, OptimizationSchedule, default_edit_schedule,
    default_full_image_schedule, run_schedule, validate_schedule,
)
from .scorers import ImageDistance, Prompt, SemanticScorer

PREVIEW_EVERY_DEFAULT = 25


@dataclass
class AppliedEdit:
    edit_id: str
    mask: torch.Tensor
    prompt: Prompt
    lambda_img: float
    schedule: OptimizationSchedule
    seed: int
    split: SplitState | None = None
    result_vec: np.ndarray | None = None
    result_image: torch.Tensor | None = None
    initial_loss: LossBreakdown | None = None
    final_loss: LossBreakdown | None = None
    records: list[dict] = field(default_factory=list)
    accepted: bool = False
    reverted: bool = False
    status: str = "running"            # running | completed | failed
    created_at: float = field(default_factory=time.time)
    completed_at: float | None = None
    error: EngineError | None = None

    def summary(self) -> dict:
        d = {"edit_id": self.edit_id, "prompt": self.prompt.normalized,
             "lambda_img": self.lambda_img, "seed": self.seed,
             "status": self.status, "accepted": self.accepted,
             "reverted": self.reverted, "created_at": self.created_at,
             "completed_at": self.completed_at,
             "schedule": self.schedule.to_dict()}
        if self.initial_loss is not None:
            d["initial_loss"] = self.initial_loss.to_dict()
        if self.final_loss is not None:
            d["final_loss"] = self.final_loss.to_dict()
        if self.error is not None:
            d["error"] = {"code": self.error.code, "message": str(self.error)}
        return d


class EditHandle:
    """Streamable progress for one launched edit. Events are retained so any
    number of late observers replay the full stream; every stream ends with
    exactly one `done` or `error` event."""

    def __init__(self, edit_id: str):
        self.edit_id = edit_id
        self._events: list[dict] = []
        self._cond = threading.Condition()
        self._thread: threading.Thread | None = None
        self._edit: AppliedEdit | None = None
        self._error: EngineError | None = None

    def _push(self, event: dict) -> None:
        with self._cond:
            self._events.append(event)
            self._cond.notify_all()

    def events(self):
        """Yield every event from the beginning; blocks until terminal."""
        idx = 0
        while True:
            with self._cond:
                while idx >= len(self._events):
                    self._cond.wait()
                ev = self._events[idx]
            idx += 1
            yield ev
            if ev["type"] in ("done", "error"):
                return

    def done(self) -> bool:
        with self._cond:
            return bool(self._events) and self._events[-1]["type"] in ("done", "error")

    def result(self, timeout: float | None = None) -> AppliedEdit:
        if self._thread is not None:
            self._thread.join(timeout)
        if self._error is not None:
            raise self._error
        if self._edit is None:
            raise NotCompleted(f"edit {self.edit_id} still running")
        return self._edit


class EditSession:
    def __init__(self, session_id: str, generator: GeneratorModel,
                 scorer: SemanticScorer, generator_name: str, scorer_name: str,
                 z: torch.Tensor, seed: int | None):
        self.session_id = session_id
        self.generator = generator
        self.scorer = scorer
        self.generator_name = generator_name
        self.scorer_name = scorer_name
        self.z = z.detach().clone()
        self.seed = seed
        self.canvas = generator.base_canvas(self.z)
        self.current_image = self._compose()
        self.history: list[AppliedEdit] = []
        self.edits: dict[str, AppliedEdit] = {}
        self.handles: dict[str, EditHandle] = {}
        self.pending_mask: torch.Tensor | None = None
        self.state = "idle"
        self.lock = threading.RLock()

    def _compose(self) -> torch.Tensor:
        with torch.no_grad():
            return self.generator.compose(self.canvas).detach()

    def image_png(self) -> bytes:
        return image_to_png_bytes(self.current_image)

    def summary(self) -> dict:
        return {"session_id": self.session_id, "generator": self.generator_name,
                "scorer": self.scorer_name, "seed": self.seed,
                "state": self.state,
                "history": [e.summary() for e in self.history]}


def create_session(registry: ModelRegistry, generator: str, scorer: str,
                   z: torch.Tensor | None = None,
                   seed: int | None = None) -> EditSession:
    g = registry.get_generator(generator)
    s = registry.get_scorer(scorer)
    if z is None:
        if seed is None:
            seed = int(np.random.default_rng().integers(0, 2 ** 31 - 1))
        rng = np.random.default_rng(seed)
        z = torch.as_tensor(rng.standard_normal(g.latent_dim)).to(g.dtype)
    else:
        if z.numel() != g.latent_dim:
            raise UnknownModel(
                f"latent size {z.numel()} does not fit generator {generator!r}")
        z = z.reshape(g.latent_dim).to(g.dtype)
    return EditSession(uuid.uuid4().hex[:12], g, s, generator, scorer, z, seed)


def set_mask(session: EditSession, mask: torch.Tensor) -> float:
    """Stage a mask for the next edit; returns its coverage fraction."""
    validate_mask(mask)
    if tuple(mask.shape) != tuple(session.generator.image_shape[1:]):
        from .errors import DimensionMismatch
        raise DimensionMismatch(
            f"mask dims {tuple(mask.shape)} != image dims "
            f"{tuple(session.generator.image_shape[1:])}")
    require_nonempty(mask)
    with session.lock:
        session.pending_mask = mask.clone()
    return float(mask.sum()) / mask.numel()


def begin_edit(session: EditSession, prompt: str | Prompt,
               mask: torch.Tensor | None = None, lambda_img: float = 1.0,
               schedule: OptimizationSchedule | None = None, seed: int = 0,
               preview_every: int = PREVIEW_EVERY_DEFAULT,
               realism_probe=None) -> EditHandle:
    """Launch one edit on a worker thread and return its streamable handle."""
    prompt = prompt if isinstance(prompt, Prompt) else Prompt(prompt)
    prompt.require_nonempty()
    with session.lock:
        if session.state != "idle":
            raise Busy(f"session {session.session_id} is {session.state}")
        if mask is None:
            mask = session.pending_mask
        if mask is None:
            raise EmptyMask("no mask uploaded for this session")
        validate_mask(mask)
        require_nonempty(mask)
        cfg = LossConfig(scorer=session.scorer, distance=ImageDistance(),
                         prompt=prompt, mask=mask.clone(), lambda_img=lambda_img)
        split = make_split_from_canvas(session.generator, session.canvas, mask)
        objective = EditObjective(cfg, session.generator, split,
                                  session.current_image)
        if schedule is None:
            schedule = default_edit_schedule()
        validate_schedule(schedule, objective)
        edit = AppliedEdit(edit_id=uuid.uuid4().hex[:12], mask=mask.clone(),
                           prompt=prompt, lambda_img=lambda_img,
                           schedule=schedule, seed=seed, split=split)
        edit.initial_loss = objective.evaluate(objective.initial_vector())
        handle = EditHandle(edit.edit_id)
        session.edits[edit.edit_id] = edit
        session.handles[edit.edit_id] = handle
        session.state = "editing"

    def preview(v: np.ndarray) -> str:
        return base64.b64encode(image_to_png_bytes(objective.render(v))).decode()

    probe = None
    if realism_probe is not None:
        def probe(v):
            return float(realism_probe(objective.render(v)))

    def worker():
        try:
            res = run_schedule(
                schedule, objective, objective.initial_vector(), seed=seed,
                callbacks=[lambda rec: handle._push({"type": "progress", **rec})],
                realism_probe=probe, preview_every=preview_every,
                preview_fn=preview)
            with session.lock:
                edit.result_vec = res.best_vector.copy()
                edit.result_image = objective.render(res.best_vector)
                edit.final_loss = res.best_breakdown
                edit.records = res.records
                edit.status = "completed"
                edit.completed_at = time.time()
                session.state = "completed"
            handle._edit = edit
            handle._push({"type": "done", "edit_id": edit.edit_id,
                          "final_loss": edit.final_loss.to_dict(),
                          "initial_loss": edit.initial_loss.to_dict(),
                          "evaluations": res.evaluations,
                          "wall_time": res.wall_time})
        except EngineError as e:
            with session.lock:
                edit.status = "failed"
                edit.error = e
                edit.completed_at = time.time()
                session.state = "failed"
            handle._error = e
            handle._push({"type": "error", "code": e.code, "message": str(e)})

    handle._thread = threading.Thread(target=worker, daemon=True)
    handle._thread.start()
    return handle


def run_edit(session: EditSession, prompt: str | Prompt, **kwargs) -> AppliedEdit:
    """Blocking convenience wrapper around begin_edit."""
    return begin_edit(session, prompt, **kwargs).result()


def _lookup_edit(session: EditSession, edit_id: str) -> AppliedEdit:
    edit = session.edits.get(edit_id)
    if edit is None:
        raise NotCompleted(f"no edit {edit_id!r} in session {session.session_id}")
    return edit


def accept_edit(session: EditSession, edit_id: str) -> EditSession:
    with session.lock:
        edit = _lookup_edit(session, edit_id)
        if edit.accepted:
            raise AlreadyAccepted(f"edit {edit_id} already accepted")
        if edit.status != "completed" or edit.reverted:
            raise NotCompleted(f"edit {edit_id} is {edit.status}"
                               + (" (reverted)" if edit.reverted else ""))
        w = session.generator.vec_to_latent(edit.result_vec)
        session.canvas = apply_edit_to_canvas(edit.split, w)
        session.current_image = edit.result_image.detach().clone()
        edit.accepted = True
        session.history.append(edit)
        session.state = "idle"
        session.pending_mask = None
    return session


def revert_edit(session: EditSession, edit_id: str) -> EditSession:
    """Decline a completed (or failed) edit; canvas and image are untouched."""
    with session.lock:
        edit = _lookup_edit(session, edit_id)
        if edit.accepted:
            raise AlreadyAccepted(f"edit {edit_id} already accepted")
        if edit.status == "running":
            raise NotCompleted(f"edit {edit_id} still running")
        edit.reverted = True
        session.state = "idle"
    return session


def full_image_generate(registry: ModelRegistry, generator: str, scorer: str,
                        prompt: str | Prompt,
                        schedule: OptimizationSchedule | None = None,
                        seed: int = 0,
                        ) -> tuple[torch.Tensor, LossBreakdown, OptimizationResult]:
    """Text-guided full-image sampling: optimize z under the semantic score."""
    g = registry.get_generator(generator)
    s = registry.get_scorer(scorer)
    prompt = prompt if isinstance(prompt, Prompt) else Prompt(prompt)
    objective = FullImageObjective(g, s, prompt)
    if schedule is None:
        schedule = default_full_image_schedule()
    validate_schedule(schedule, objective)
    z0 = np.random.default_rng(seed).standard_normal(g.latent_dim)
    res = run_schedule(schedule, objective, z0, seed=seed)
    return objective.render(res.best_vector), res.best_breakdown, res


# --- session persistence ------------------------------------------------------
#
# Directory layout:
#   manifest.json      ids, model refs, seed, state, edit history metadata
#   z.bin              latent container
#   current_image.png
#   edit_<i>_mask.png / edit_<i>_w.bin   per accepted edit


def save_session(session: EditSession, directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_container(directory / "z.bin", "latent_vector",
                   {"z": session.z.detach().to(torch.float32).numpy()},
                   meta={"generator": session.generator_name})
    (directory / "current_image.png").write_bytes(session.image_png())
    history = []
    for i, edit in enumerate(session.history):
        mask_name = f"edit_{i}_mask.png"
        w_name = f"edit_{i}_w.bin"
        (directory / mask_name).write_bytes(mask_to_png_bytes(edit.mask))
        save_container(directory / w_name, "region_latent",
                       {"w": np.asarray(edit.result_vec, dtype=np.float32)},
                       meta={"edit_id": edit.edit_id})
        entry = edit.summary()
        entry.update(mask_file=mask_name, result_file=w_name)
        history.append(entry)
    manifest = {
        "session_id": session.session_id,
        "generator": session.generator_name,
        "scorer": session.scorer_name,
        "seed": session.seed,
        "state": "idle",
        "z_file": "z.bin",
        "image_file": "current_image.png",
        "history": history,
    }
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True))
    return directory


def load_session(directory: str | Path, registry: ModelRegistry) -> EditSession:
    """Restore a session by reapplying each stored edit result (no re-run)."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    _, arrays, _ = load_container(directory / manifest["z_file"])
    g = registry.get_generator(manifest["generator"])
    z = torch.as_tensor(arrays["z"]).to(g.dtype)
    session = create_session(registry, manifest["generator"], manifest["scorer"],
                             z=z, seed=manifest["seed"])
    session.session_id = manifest["session_id"]
    for entry in manifest["history"]:
        mask = png_bytes_to_mask((directory / entry["mask_file"]).read_bytes())
        _, warr, _ = load_container(directory / entry["result_file"])
        split = make_split_from_canvas(session.generator, session.canvas, mask)
        w = session.generator.vec_to_latent(
            np.asarray(warr["w"], dtype=np.float64))
        session.canvas = apply_edit_to_canvas(split, w)
        session.current_image = session._compose()
        edit = AppliedEdit(edit_id=entry["edit_id"], mask=mask,
                           prompt=Prompt(entry["prompt"]),
                           lambda_img=entry["lambda_img"],
                           schedule=OptimizationSchedule.from_dict(entry["schedule"]),
                           seed=entry["seed"], split=split,
                           result_vec=np.asarray(warr["w"], dtype=np.float64),
                           result_image=session.current_image.clone(),
                           accepted=True, status="completed")
        session.edits[edit.edit_id] = edit
        session.history.append(edit)
    return session


def replay_session(directory: str | Path, registry: ModelRegistry) -> EditSession:
    """Re-run every accepted edit's optimization from the stored z; with fixed
    seeds this reproduces the stored currentImage bit-exactly."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    _, arrays, _ = load_container(directory / manifest["z_file"])
    g = registry.get_generator(manifest["generator"])
    z = torch.as_tensor(arrays["z"]).to(g.dtype)
    session = create_session(registry, manifest["generator"], manifest["scorer"],
                             z=z, seed=manifest["seed"])
    for entry in manifest["history"]:
        mask = png_bytes_to_mask((directory / entry["mask_file"]).read_bytes())
        edit = run_edit(session, entry["prompt"], mask=mask,
                        lambda_img=entry["lambda_img"],
                        schedule=OptimizationSchedule.from_dict(entry["schedule"]),
                        seed=entry["seed"])
        accept_edit(session, edit.edit_id)
    return session
