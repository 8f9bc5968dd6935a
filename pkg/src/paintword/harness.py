"""Batch study runner: word-category edit studies and the optimizer
comparison, with automated proxies standing in for human judgments:

* accuracy proxy:   masked semantic-score delta (after - before)
* realism proxy:    discriminator / moment-statistic score delta
* locality proxy:   mean absolute pixel drift outside the mask

Reports are deterministic given the spec and seeds; wall-clock timings are
kept in a separate non-canonical section so canonical report bytes are
reproducible across reruns.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .engine import accept_edit, create_session, run_edit
from .errors import EngineError, InvalidConfig
from .imageops import invert_mask, masked_project
from .realism import default_realism_proxy
from .registry import ModelRegistry, default_registry
from .schedule import OptimizationSchedule, Phase, default_edit_schedule
from .scorers import Prompt, masked_score
from .shapes import params_from_z, support_mask

CATEGORIES = ("color", "texture", "state", "style", "shape")

# Table-1-shaped annotation: the paper's human-study "accurate (2/2)" row,
# displayed for context only and never compared against proxies.
PAPER_HUMAN_STUDY_ROW = {
    "label": "paper (human study) accurate %",
    "color": 72.8, "texture": 46.5, "state": 40.6, "style": 37.2, "shape": 31.7,
}

WORD_FIXTURE_PATH = Path(__file__).parent / "assets" / "study_words_50.json"


def default_word_fixture() -> list[tuple[str, str]]:
    data = json.loads(WORD_FIXTURE_PATH.read_text())
    return [(e["word"], e["category"]) for e in data["words"]]


@dataclass(frozen=True)
class StudySpec:
    words: tuple[tuple[str, str], ...]
    image_count: int = 3
    seeds: tuple[int, ...] = ()
    schedule_variants: tuple[tuple[str, dict], ...] = ()
    lambda_values: tuple[float, ...] = (1.0,)
    generator: str = "toy-feature"
    scorer: str = "toy-colorshape"
    edit_seed: int = 0

    def __post_init__(self):
        if not self.words:
            raise InvalidConfig("study needs at least one word")
        bad = {c for _, c in self.words} - set(CATEGORIES)
        if bad:
            raise InvalidConfig(f"unknown categories: {sorted(bad)}")
        if self.image_count <= 0:
            raise InvalidConfig("image_count must be positive")

    @property
    def image_seeds(self) -> tuple[int, ...]:
        return self.seeds if self.seeds else tuple(range(self.image_count))

    @property
    def variants(self) -> tuple[tuple[str, OptimizationSchedule], ...]:
        if not self.schedule_variants:
            return (("default", default_edit_schedule()),)
        return tuple((name, OptimizationSchedule.from_dict(d))
                     for name, d in self.schedule_variants)

    def to_dict(self) -> dict:
        return {"words": [list(w) for w in self.words],
                "image_count": self.image_count, "seeds": list(self.seeds),
                "schedule_variants": [[n, d] for n, d in self.schedule_variants],
                "lambda_values": list(self.lambda_values),
                "generator": self.generator, "scorer": self.scorer,
                "edit_seed": self.edit_seed}

    @classmethod
    def from_dict(cls, d: dict) -> "StudySpec":
        return cls(words=tuple((w, c) for w, c in d["words"]),
                   image_count=int(d.get("image_count", 3)),
                   seeds=tuple(d.get("seeds", ())),
                   schedule_variants=tuple(
                       (n, s) for n, s in d.get("schedule_variants", ())),
                   lambda_values=tuple(d.get("lambda_values", (1.0,))),
                   generator=d.get("generator", "toy-feature"),
                   scorer=d.get("scorer", "toy-colorshape"),
                   edit_seed=int(d.get("edit_seed", 0)))

    @classmethod
    def load(cls, path: str | Path) -> "StudySpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class StudyRow:
    word: str
    category: str
    image_seed: int
    variant: str
    lambda_img: float
    score_delta: float | None = None
    outside_drift: float | None = None
    realism_delta: float | None = None
    wall_time_s: float | None = None
    error: str | None = None

    def to_dict(self, include_timings: bool = False) -> dict:
        d = {"word": self.word, "category": self.category,
             "image_seed": self.image_seed, "variant": self.variant,
             "lambda_img": self.lambda_img, "score_delta": self.score_delta,
             "outside_drift": self.outside_drift,
             "realism_delta": self.realism_delta, "error": self.error}
        if include_timings:
            d["wall_time_s"] = self.wall_time_s
        return d


@dataclass
class StudyReport:
    spec: dict
    rows: list[StudyRow] = field(default_factory=list)

    def aggregates(self) -> dict:
        """Per-category means over non-error rows; recomputed from rows."""
        out = {}
        for cat in CATEGORIES:
            rows = [r for r in self.rows if r.category == cat and r.error is None]
            if not rows:
                continue
            out[cat] = {
                "rows": len(rows),
                "mean_score_delta": float(np.mean([r.score_delta for r in rows])),
                "mean_outside_drift": float(np.mean([r.outside_drift for r in rows])),
                "mean_realism_delta": float(np.mean([r.realism_delta for r in rows])),
            }
        return out

    def to_dict(self, include_timings: bool = False) -> dict:
        return {"spec": self.spec,
                "rows": [r.to_dict(include_timings) for r in self.rows],
                "aggregates": self.aggregates(),
                "paper_annotation": PAPER_HUMAN_STUDY_ROW}

    def timings(self) -> dict:
        return {f"{r.word}/{r.image_seed}/{r.variant}/{r.lambda_img}":
                r.wall_time_s for r in self.rows}


def region_mask_for_session(session) -> torch.Tensor:
    """Mask over the scene shape decoded from the session latent (the edit
    region a human would paint), dilated by a small margin."""
    params = params_from_z(session.z.detach().to(torch.float64).numpy())
    h, w = session.generator.image_shape[1:]
    return support_mask(params, h, w, dilate_px=2.0)


def _outside_drift(before: torch.Tensor, after: torch.Tensor,
                   mask: torch.Tensor) -> float:
    inv = invert_mask(mask)
    n_out = float(inv.sum()) * before.shape[0]
    if n_out == 0:
        return 0.0
    diff = masked_project(before - after, inv).abs()
    return float(diff.sum()) / n_out


def run_study(spec: StudySpec, registry: ModelRegistry | None = None,
              realism=None) -> StudyReport:
    registry = registry or default_registry()
    realism = realism or default_realism_proxy()
    scorer = registry.get_scorer(spec.scorer)
    report = StudyReport(spec=spec.to_dict())
    for image_seed in spec.image_seeds:
        for word, category in spec.words:
            for variant_name, schedule in spec.variants:
                for lam in spec.lambda_values:
                    row = StudyRow(word=word, category=category,
                                   image_seed=image_seed, variant=variant_name,
                                   lambda_img=lam)
                    try:
                        session = create_session(registry, spec.generator,
                                                 spec.scorer, seed=image_seed)
                        mask = region_mask_for_session(session)
                        before = session.current_image.clone()
                        prompt = Prompt(word)
                        with torch.no_grad():
                            score_before = float(masked_score(
                                scorer, before, mask, prompt))
                        edit = run_edit(session, prompt, mask=mask,
                                        lambda_img=lam, schedule=schedule,
                                        seed=spec.edit_seed)
                        accept_edit(session, edit.edit_id)
                        after = session.current_image
                        with torch.no_grad():
                            score_after = float(masked_score(
                                scorer, after, mask, prompt))
                        row.score_delta = score_after - score_before
                        row.outside_drift = _outside_drift(before, after, mask)
                        row.realism_delta = (float(realism(after))
                                             - float(realism(before)))
                        row.wall_time_s = (edit.completed_at - edit.created_at)
                    except EngineError as e:
                        row.error = e.code
                    report.rows.append(row)
    return report


# --- optimizer comparison -------------------------------------------------------


def _count_cma_evals(schedule: OptimizationSchedule, dim: int) -> int:
    """Evaluations a schedule will consume on a dim-dimensional objective,
    mirroring the runner's accounting (initial eval, whole CMA generations,
    one eval per grad step, final-iterate eval per grad phase)."""
    from .cma import default_population_size
    total = 1
    for phase in schedule.phases:
        if phase.method == "cma":
            pop = phase.population_size or default_population_size(dim)
            gens = -(-phase.budget // pop)
            total += gens * pop
        else:
            total += phase.budget + 1
    return total


def matched_grad_only(schedule: OptimizationSchedule, dim: int,
                      step_size: float = 0.02) -> OptimizationSchedule:
    """Gradient-only schedule whose evaluation count matches the hybrid's."""
    target = _count_cma_evals(schedule, dim)
    steps = max(1, target - 2)   # initial eval + steps + final-iterate eval
    return OptimizationSchedule(phases=(Phase("grad", steps,
                                              step_size=step_size),))


def run_optimizer_comparison(spec: StudySpec,
                             registry: ModelRegistry | None = None,
                             realism=None) -> dict:
    registry = registry or default_registry()
    realism = realism or default_realism_proxy()
    scorer = registry.get_scorer(spec.scorer)
    generator = registry.get_generator(spec.generator)
    hybrid_name, hybrid = spec.variants[0]
    grad_only = matched_grad_only(hybrid, generator.interior_numel())
    pairs = []
    for image_seed in spec.image_seeds:
        for word, category in spec.words:
            pair = {"image_seed": image_seed, "word": word,
                    "category": category}
            for label, schedule in (("cma_then_grad", hybrid),
                                    ("grad_only", grad_only)):
                session = create_session(registry, spec.generator,
                                         spec.scorer, seed=image_seed)
                mask = region_mask_for_session(session)
                before = session.current_image.clone()
                try:
                    edit = run_edit(session, word, mask=mask,
                                    schedule=schedule, seed=spec.edit_seed)
                    with torch.no_grad():
                        rec = {
                            "final_loss_sem": edit.final_loss.semantic,
                            "final_loss_total": edit.final_loss.total,
                            "realism": float(realism(edit.result_image)),
                            "realism_before": float(realism(before)),
                            "evaluations": edit.records[-1]["evals"]
                            if edit.records else None,
                            "trajectory": [
                                {"evals": r["evals"],
                                 "loss_total": r["loss_total"]}
                                for r in edit.records],
                        }
                except EngineError as e:
                    rec = {"error": e.code}
                pair[label] = rec
            pairs.append(pair)
    budget_hybrid = _count_cma_evals(hybrid, generator.interior_numel())
    budget_grad = _count_cma_evals(grad_only, generator.interior_numel())
    mismatch = abs(budget_hybrid - budget_grad) / budget_hybrid
    if mismatch > 0.01:
        raise InvalidConfig(
            f"budgets differ by {mismatch:.1%} (> 1%): "
            f"{budget_hybrid} vs {budget_grad}")
    # directional observation (Fig.-4-style), recorded but never gating
    valid = [p for p in pairs if "error" not in p["grad_only"]
             and "error" not in p["cma_then_grad"]]
    grad_lower_loss = sum(p["grad_only"]["final_loss_sem"]
                          <= p["cma_then_grad"]["final_loss_sem"]
                          for p in valid)
    cma_higher_realism = sum(p["cma_then_grad"]["realism"]
                             >= p["grad_only"]["realism"] for p in valid)
    return {
        "spec": spec.to_dict(),
        "schedules": {"cma_then_grad": hybrid.to_dict(),
                      "grad_only": grad_only.to_dict()},
        "budgets": {"cma_then_grad": budget_hybrid, "grad_only": budget_grad,
                    "relative_mismatch": mismatch},
        "pairs": pairs,
        "observations": {
            "valid_pairs": len(valid),
            "grad_only_lower_or_equal_semantic_loss": grad_lower_loss,
            "cma_then_grad_higher_or_equal_realism": cma_higher_realism,
        },
    }


# --- rendering ------------------------------------------------------------------


def _fmt(x) -> str:
    if x is None:
        return "—"
    return f"{x:.4f}"


def emit_tables(report: StudyReport | dict, fmt: str) -> str:
    """Render a study report to deterministic text in json, csv or markdown."""
    data = report.to_dict() if isinstance(report, StudyReport) else report
    if fmt == "json":
        return json.dumps(data, sort_keys=True, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        fields = ["word", "category", "image_seed", "variant", "lambda_img",
                  "score_delta", "outside_drift", "realism_delta", "error"]
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in data["rows"]:
            writer.writerow({k: ("" if row.get(k) is None else row.get(k))
                             for k in fields})
        return buf.getvalue()
    if fmt == "markdown":
        agg = data["aggregates"]
        lines = ["| metric | " + " | ".join(CATEGORIES) + " |",
                 "|---" * 6 + "|"]
        for key, label in (("mean_score_delta", "semantic score delta (proxy)"),
                           ("mean_realism_delta", "realism delta (proxy)"),
                           ("mean_outside_drift", "outside-mask drift (proxy)")):
            cells = [_fmt(agg[c][key]) if c in agg else "—" for c in CATEGORIES]
            lines.append(f"| {label} | " + " | ".join(cells) + " |")
        lines.append("| rows | " + " | ".join(
            str(agg[c]["rows"]) if c in agg else "0" for c in CATEGORIES) + " |")
        ann = data.get("paper_annotation", PAPER_HUMAN_STUDY_ROW)
        lines.append(f"| {ann['label']} | " + " | ".join(
            f"{ann[c]:.1f}" for c in CATEGORIES) + " |")
        return "\n".join(lines) + "\n"
    raise InvalidConfig(f"unknown table format {fmt!r}")


def write_report(report: StudyReport, out_dir: str | Path) -> Path:
    """Write canonical report.json (+ per-format tables and a non-canonical
    timing sidecar) into out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(emit_tables(report, "json"))
    (out_dir / "report.csv").write_text(emit_tables(report, "csv"))
    (out_dir / "report.md").write_text(emit_tables(report, "markdown"))
    (out_dir / "timings.json").write_text(
        json.dumps(report.timings(), sort_keys=True, indent=2) + "\n")
    return out_dir
