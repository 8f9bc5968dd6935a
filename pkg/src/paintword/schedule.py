"""Hybrid optimization schedules: ordered CMA-ES / gradient phases over a
vector objective, with best-so-far tracking, per-step progress records, and
wall-clock budgeting. Mirrors the "CMA followed by Adam" recipe."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .adam import grad_init, grad_step
from .cma import cma_ask, cma_init, cma_tell
from .errors import InvalidConfig
from .losses import LossBreakdown, Objective

# CMA covariance cost grows with dim^2; above this use gradient phases only
CMA_MAX_DIM = 4096


@dataclass(frozen=True)
class Phase:
    method: str                      # "cma" | "grad"
    budget: int                      # evaluations (cma) or steps (grad)
    sigma0: float | None = None      # cma: default 0.5 * std(w0)
    population_size: int | None = None
    step_size: float = 0.02
    beta1: float = 0.9
    beta2: float = 0.999

    def __post_init__(self):
        if self.method not in ("cma", "grad"):
            raise InvalidConfig(f"unknown phase method {self.method!r}")
        if self.budget <= 0:
            raise InvalidConfig("phase budget must be positive")

    def to_dict(self) -> dict:
        d = {"method": self.method, "budget": self.budget}
        if self.method == "cma":
            if self.sigma0 is not None:
                d["sigma0"] = self.sigma0
            if self.population_size is not None:
                d["population_size"] = self.population_size
        else:
            d.update(step_size=self.step_size, beta1=self.beta1, beta2=self.beta2)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Phase":
        return cls(method=d["method"], budget=int(d["budget"]),
                   sigma0=d.get("sigma0"), population_size=d.get("population_size"),
                   step_size=float(d.get("step_size", 0.02)),
                   beta1=float(d.get("beta1", 0.9)), beta2=float(d.get("beta2", 0.999)))


@dataclass(frozen=True)
class OptimizationSchedule:
    phases: tuple[Phase, ...]
    stop_tolerance: float = 0.0
    wall_clock_budget: float | None = None

    def __post_init__(self):
        if not self.phases:
            raise InvalidConfig("schedule needs at least one phase")
        if self.wall_clock_budget is not None and self.wall_clock_budget <= 0:
            raise InvalidConfig("wall clock budget must be positive")

    def to_dict(self) -> dict:
        return {"phases": [p.to_dict() for p in self.phases],
                "stop_tolerance": self.stop_tolerance,
                "wall_clock_budget": self.wall_clock_budget}

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizationSchedule":
        return cls(phases=tuple(Phase.from_dict(p) for p in d["phases"]),
                   stop_tolerance=float(d.get("stop_tolerance", 0.0)),
                   wall_clock_budget=d.get("wall_clock_budget"))


def default_edit_schedule(cma_evaluations: int = 3000, grad_steps: int = 300,
                          step_size: float = 0.02) -> OptimizationSchedule:
    return OptimizationSchedule(phases=(
        Phase("cma", cma_evaluations),
        Phase("grad", grad_steps, step_size=step_size),
    ))


def default_full_image_schedule(cma_evaluations: int = 4000) -> OptimizationSchedule:
    return OptimizationSchedule(phases=(Phase("cma", cma_evaluations),))


@dataclass
class OptimizationResult:
    best_vector: np.ndarray
    best_breakdown: LossBreakdown
    evaluations: int
    wall_time: float
    records: list[dict] = field(default_factory=list)


def validate_schedule(schedule: OptimizationSchedule, objective: Objective) -> None:
    for phase in schedule.phases:
        if phase.method == "grad" and not objective.differentiable:
            raise InvalidConfig(
                "gradient phase requires a differentiable objective")
        if phase.method == "cma" and objective.dim > CMA_MAX_DIM:
            raise InvalidConfig(
                f"CMA phase disallowed for dim {objective.dim} > {CMA_MAX_DIM}")


def _default_sigma0(w0: np.ndarray) -> float:
    s = 0.5 * float(np.std(w0))
    return s if s > 1e-6 else 0.5


def run_schedule(schedule: OptimizationSchedule, objective: Objective,
                 w0: np.ndarray, callbacks=None, seed: int = 0,
                 realism_probe=None, preview_every: int | None = None,
                 preview_fn=None) -> OptimizationResult:
    """Execute the phases in order, carrying best-so-far across them.

    `callbacks` is an optional list of callables receiving one progress record
    per CMA generation / gradient step. `realism_probe`, when given, maps a
    vector to a realism score that is logged but never optimized. Previews
    (`preview_fn(best_vector)`) are attached every `preview_every` evaluations.
    """
    validate_schedule(schedule, objective)
    w0 = np.asarray(w0, dtype=np.float64).ravel()
    start_bd = objective.evaluate(w0)
    if not np.isfinite(start_bd.total):
        raise InvalidConfig("objective is not finite at the starting point")

    callbacks = callbacks or []
    t0 = time.monotonic()
    best_v, best_bd = w0.copy(), start_bd
    evals = 1
    records: list[dict] = []
    step_index = 0
    next_preview_at = 0

    def out_of_time() -> bool:
        return (schedule.wall_clock_budget is not None
                and time.monotonic() - t0 >= schedule.wall_clock_budget)

    def emit(phase_name: str, bd: LossBreakdown, sigma: float | None,
             current_best: np.ndarray) -> None:
        nonlocal step_index, next_preview_at
        step_index += 1
        rec = {
            "phase": phase_name, "step": step_index, "evals": evals,
            "loss_sem": bd.semantic, "loss_img": bd.image,
            "loss_total": bd.total,
            "elapsed_s": time.monotonic() - t0,
        }
        if sigma is not None:
            rec["sigma"] = sigma
        if realism_probe is not None:
            rec["realism_proxy"] = float(realism_probe(current_best))
        if preview_fn is not None and preview_every and evals >= next_preview_at:
            rec["preview_png_b64"] = preview_fn(current_best)
            next_preview_at = evals + preview_every
        records.append(rec)
        for cb in callbacks:
            cb(rec)

    def improved_enough(window: list[float]) -> bool:
        if schedule.stop_tolerance <= 0 or len(window) < 10:
            return True
        return (window[-10] - window[-1]) >= schedule.stop_tolerance

    for pi, phase in enumerate(schedule.phases):
        if out_of_time():
            break
        totals: list[float] = []
        if phase.method == "cma":
            sigma0 = phase.sigma0 if phase.sigma0 is not None else _default_sigma0(best_v)
            st = cma_init(objective.dim, best_v, sigma0,
                          population_size=phase.population_size,
                          seed=seed * 1000003 + pi)
            used = 0
            while used < phase.budget and not out_of_time():
                xs = cma_ask(st)
                bds = objective.evaluate_batch(xs)
                used += len(xs)
                evals += len(xs)
                gen_best = None
                for x, bd in zip(xs, bds):
                    if bd.total < best_bd.total:
                        best_v, best_bd = np.asarray(x, dtype=np.float64).copy(), bd
                    if gen_best is None or bd.total < gen_best.total:
                        gen_best = bd
                st = cma_tell(st, xs, [bd.total for bd in bds])
                emit("cma", gen_best, st.sigma, best_v)
                totals.append(best_bd.total)
                if not improved_enough(totals):
                    break
        else:
            gst = grad_init(objective.dim, phase.step_size, phase.beta1, phase.beta2)
            params = best_v.copy()
            for _ in range(phase.budget):
                if out_of_time():
                    break
                bd, grad = objective.gradient(params)
                evals += 1
                if bd.total < best_bd.total:
                    best_v, best_bd = params.copy(), bd
                gst, params = grad_step(gst, params, grad)
                emit("grad", bd, None, best_v)
                totals.append(best_bd.total)
                if not improved_enough(totals):
                    break
            # score the final iterate too
            bd = objective.evaluate(params)
            evals += 1
            if bd.total < best_bd.total:
                best_v, best_bd = params.copy(), bd

    return OptimizationResult(best_vector=best_v, best_breakdown=best_bd,
                              evaluations=evals, wall_time=time.monotonic() - t0,
                              records=records)
