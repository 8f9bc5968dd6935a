"""Model registry: named generators and scorers, in-process toys or
adapter-backed externals, with capability flags the engine validates against."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidConfig, UnknownModel
from .generators import FeatureMapToyGenerator, GeneratorModel, StyleToyGenerator
from .scorers import ColorShapeScorer, SemanticScorer

ASSETS_DIR = Path(__file__).parent / "assets"


@dataclass
class ModelEntry:
    name: str
    kind: str                      # "generator" | "scorer"
    transport: str                 # "in-process-toy" | "external-adapter"
    model: object
    capabilities: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "transport": self.transport,
                "capabilities": self.capabilities}


class ModelRegistry:
    def __init__(self):
        self._entries: dict[str, ModelEntry] = {}

    def register(self, entry: ModelEntry) -> None:
        if entry.name in self._entries:
            raise InvalidConfig(f"model name {entry.name!r} already registered")
        if entry.kind not in ("generator", "scorer"):
            raise InvalidConfig(f"unknown model kind {entry.kind!r}")
        self._entries[entry.name] = entry

    def register_generator(self, g: GeneratorModel, name: str | None = None,
                           transport: str = "in-process-toy") -> None:
        self.register(ModelEntry(
            name=name or g.name, kind="generator", transport=transport, model=g,
            capabilities={"differentiable": bool(getattr(g, "differentiable", False)),
                          "splitKind": g.split_kind,
                          "dims": {"latent": g.latent_dim,
                                   "interior": g.interior_numel()}}))

    def register_scorer(self, s: SemanticScorer, name: str | None = None,
                        transport: str = "in-process-toy") -> None:
        self.register(ModelEntry(
            name=name or s.name, kind="scorer", transport=transport, model=s,
            capabilities={"differentiable": bool(getattr(s, "differentiable", False))}))

    def _get(self, name: str, kind: str):
        entry = self._entries.get(name)
        if entry is None or entry.kind != kind:
            raise UnknownModel(f"no registered {kind} named {name!r}")
        return entry.model

    def get_generator(self, name: str) -> GeneratorModel:
        return self._get(name, "generator")

    def get_scorer(self, name: str) -> SemanticScorer:
        return self._get(name, "scorer")

    def entries(self) -> list[ModelEntry]:
        return list(self._entries.values())


def trained_feature_toy_path() -> Path:
    return ASSETS_DIR / "toy_feature_trained.bin"


def default_registry(include_trained: bool = True) -> ModelRegistry:
    """Toys only; trained feature-toy weights are used when shipped."""
    reg = ModelRegistry()
    trained = trained_feature_toy_path()
    if include_trained and trained.exists():
        g = FeatureMapToyGenerator.load(trained)
        g.name = "toy-feature"
        reg.register_generator(g)
    else:
        reg.register_generator(FeatureMapToyGenerator(seed=0))
    reg.register_generator(StyleToyGenerator(seed=0))
    reg.register_scorer(ColorShapeScorer())
    return reg
