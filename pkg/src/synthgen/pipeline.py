"""Module registry and sequential pipeline execution."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from synthgen.config import ConfigDocument, Settings, resolve_module_config
from synthgen.errors import DuplicateKey, ModuleError, UnknownModule
from synthgen.render.bvh import BvhCache
from synthgen.render.frames import FrameBuffer
from synthgen.render.tracer import RenderSettings
from synthgen.scene import Scene
from synthgen.writer import SUFFIX

log = logging.getLogger(__name__)

DEFAULT_SEED = 42


@dataclass
class PipelineState:
    scene: Scene = field(default_factory=Scene)
    pending_frames: dict[str, list[FrameBuffer]] = field(default_factory=dict)
    output_dir: Path = Path("output")
    seed: int = DEFAULT_SEED
    threads: int = 1
    render_defaults: RenderSettings = field(default_factory=RenderSettings)
    bvh_cache: BvhCache = field(default_factory=BvhCache)
    dry_run: bool = False
    export_png: bool = False
    module_index: int = 0
    events: list[str] = field(default_factory=list)
    timings: list[tuple[str, float]] = field(default_factory=list)
    written: list[Path] = field(default_factory=list)

    def rng(self) -> np.random.Generator:
        """Random stream for the running module, derived from (seed, module index)."""
        return np.random.default_rng(np.random.SeedSequence([self.seed, self.module_index]))

    def bvh(self):
        return self.bvh_cache.get(self.scene)

    def add_frames(self, frames: list[FrameBuffer]) -> None:
        """Store rendered buffers; re-rendering a pass replaces its previous buffers."""
        fresh: dict[str, list[FrameBuffer]] = {}
        for frame in frames:
            fresh.setdefault(frame.key, []).append(frame)
        for key, group in fresh.items():
            existing = self.pending_frames.get(key)
            if existing and existing[0].pass_name != group[0].pass_name:
                raise DuplicateKey(key)
            if len({f.pass_name for f in group}) > 1:
                raise DuplicateKey(key)
            self.pending_frames[key] = group

    def frames_for(self, keyframe: int) -> list[FrameBuffer]:
        return [f for group in self.pending_frames.values() for f in group if f.keyframe == keyframe]

    def frame_count(self, key: str) -> int:
        return len(self.pending_frames.get(key, []))


class Module:
    """Base class: constructed with resolved settings, run once against the state."""

    name = ""
    renders = False
    writes = False

    def __init__(self, settings: Settings):
        self.settings = settings

    def run(self, state: PipelineState) -> None:
        raise NotImplementedError


REGISTRY: dict[str, type[Module]] = {}


def register(name: str):
    def wrap(cls: type[Module]) -> type[Module]:
        if name in REGISTRY:
            raise ValueError(f"module '{name}' registered twice")
        cls.name = name
        REGISTRY[name] = cls
        return cls

    return wrap


def build_pipeline(doc: ConfigDocument, registry: dict[str, type[Module]] | None = None) -> list[Module]:
    if registry is None:
        import synthgen.modules  # noqa: F401  (registers built-ins)

        registry = REGISTRY
    modules = []
    for entry in doc.modules:
        cls = registry.get(entry.name)
        if cls is None:
            raise UnknownModule(entry.name)
        try:
            modules.append(cls(resolve_module_config(doc, entry)))
        except Exception as exc:
            raise ModuleError(entry.name, exc) from exc
    return modules


def initial_state(doc: ConfigDocument, **overrides: Any) -> PipelineState:
    """Fresh state; seed and output_dir come from ``global.all`` unless overridden."""
    all_scope = doc.global_settings.get("all", {})
    state = PipelineState(
        seed=int(all_scope.get("seed", DEFAULT_SEED)),
        output_dir=Path(all_scope.get("output_dir", "output")),
    )
    for key, value in overrides.items():
        setattr(state, key, value)
    return state


def run_pipeline(modules: list[Module], state: PipelineState) -> PipelineState:
    """Run each module once, in order. On failure, remove containers this run wrote."""
    for index, module in enumerate(modules):
        state.module_index = index
        if state.dry_run and (module.renders or module.writes):
            log.info("dry run: skipping %s", module.name)
            state.events.append(f"skip:{module.name}")
            continue
        start = time.perf_counter()
        try:
            module.run(state)
        except Exception as exc:
            for path in state.written:
                path.unlink(missing_ok=True)
            state.written.clear()
            raise ModuleError(module.name, exc) from exc
        state.timings.append((module.name, time.perf_counter() - start))
        state.events.append(module.name)
    return state


def remove_stale_containers(output_dir: Path) -> None:
    for path in Path(output_dir).glob(f"*{SUFFIX}"):
        path.unlink()
