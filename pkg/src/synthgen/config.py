"""Run configuration: parsing, ``<args:N>`` substitution and settings resolution.

A config document has three sections::

    {
      "setup":   {...},                       # retained, never acted on
      "global":  {"all": {...}},              # defaults visible to every module
      "modules": [{"name": "ns.Module", "config": {...}}, ...]
    }

Files are strict JSON (which is also valid YAML), so ``.json`` and ``.yaml``
extensions are both accepted.
"""

from __future__ import annotations

import copy
import json
import logging
import re
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from synthgen.errors import ConfigSyntaxError, MissingArg, MissingKey, SchemaError

log = logging.getLogger(__name__)

PLACEHOLDER = re.compile(r"^<args:(\d+)>$")

_MISSING = object()


class Settings(Mapping):
    """Read-only settings tree.

    Unlike ``dict.get``, :meth:`get` without a default raises
    :class:`MissingKey` for absent keys.
    """

    def __init__(self, data: Mapping[str, Any] | None = None, path: str = ""):
        self._data = copy.deepcopy(dict(data or {}))
        self._path = path

    def __getitem__(self, key: str) -> Any:
        try:
            value = self._data[key]
        except KeyError:
            raise MissingKey(f"missing setting '{self._key_path(key)}'") from None
        return copy.deepcopy(value)

    def __iter__(self) -> Iterator[str]:
        return iter(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def __repr__(self) -> str:
        return f"Settings({self._data!r})"

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Settings):
            return self._data == other._data
        if isinstance(other, Mapping):
            return self._data == dict(other)
        return NotImplemented

    def _key_path(self, key: str) -> str:
        return f"{self._path}.{key}" if self._path else key

    def get(self, key: str, default: Any = _MISSING) -> Any:
        if key in self._data:
            return self[key]
        if default is _MISSING:
            raise MissingKey(f"missing setting '{self._key_path(key)}'")
        return default

    def sub(self, key: str, default: Any = _MISSING) -> Settings:
        """Nested tree under ``key`` as a :class:`Settings`."""
        value = self.get(key, {} if default is _MISSING else default)
        if value is None:
            value = {}
        if not isinstance(value, Mapping):
            raise SchemaError(f"setting '{self._key_path(key)}' must be an object")
        return Settings(value, self._key_path(key))

    def to_dict(self) -> dict[str, Any]:
        return copy.deepcopy(self._data)


@dataclass(frozen=True)
class SetupSection:
    raw: dict[str, Any] = field(default_factory=dict)

    @property
    def blender_install_path(self) -> str | None:
        return self.raw.get("blender_install_path")

    @property
    def blender_version(self) -> str | None:
        return self.raw.get("blender_version")

    @property
    def pip(self) -> list[str]:
        return list(self.raw.get("pip", []))


@dataclass(frozen=True)
class ModuleEntry:
    name: str
    config: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ConfigDocument:
    setup: SetupSection = field(default_factory=SetupSection)
    global_settings: dict[str, dict[str, Any]] = field(default_factory=dict)
    modules: tuple[ModuleEntry, ...] = ()


def _validate_setup(setup: Any) -> None:
    if not isinstance(setup, dict):
        raise SchemaError("'setup' must be an object")
    for key in ("blender_install_path", "blender_version"):
        if key in setup and not isinstance(setup[key], str):
            raise SchemaError(f"setup.{key} must be a string")
    pip = setup.get("pip", [])
    if not isinstance(pip, list) or not all(isinstance(p, str) for p in pip):
        raise SchemaError("setup.pip must be a list of strings")


def _validate_module_name(name: Any, position: int) -> str:
    if not isinstance(name, str) or not name:
        raise SchemaError(f"modules[{position}].name must be a non-empty string")
    parts = name.split(".")
    if len(parts) != 2 or not all(parts):
        raise SchemaError(
            f"modules[{position}].name '{name}' must look like 'namespace.Module'"
        )
    return name


def _document_from_tree(tree: Any) -> ConfigDocument:
    if not isinstance(tree, dict):
        raise SchemaError("config root must be an object")
    if "modules" not in tree:
        raise SchemaError("config has no 'modules' section")

    setup = tree.get("setup") or {}
    _validate_setup(setup)

    global_settings = tree.get("global") or {}
    if not isinstance(global_settings, dict) or not all(
        isinstance(v, dict) for v in global_settings.values()
    ):
        raise SchemaError("'global' must map scope names to objects")
    for scope in global_settings:
        if scope != "all":
            log.warning("global scope '%s' is ignored; only 'all' is honored", scope)

    raw_modules = tree["modules"]
    if not isinstance(raw_modules, list):
        raise SchemaError("'modules' must be a list")
    modules = []
    for i, raw in enumerate(raw_modules):
        if not isinstance(raw, dict):
            raise SchemaError(f"modules[{i}] must be an object")
        if "name" not in raw:
            raise SchemaError(f"modules[{i}] has no 'name'")
        name = _validate_module_name(raw["name"], i)
        config = raw.get("config") or {}
        if not isinstance(config, dict):
            raise SchemaError(f"modules[{i}].config must be an object")
        modules.append(ModuleEntry(name, copy.deepcopy(config)))

    return ConfigDocument(
        setup=SetupSection(copy.deepcopy(setup)),
        global_settings=copy.deepcopy(global_settings),
        modules=tuple(modules),
    )


def parse_config(text: str) -> ConfigDocument:
    try:
        tree = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    doc = _document_from_tree(tree)
    if doc.setup.raw:
        log.warning(
            "setup section is parsed but not acted on; the renderer is self-contained"
        )
    return doc


def load_config(path: str | Path) -> ConfigDocument:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def config_to_tree(doc: ConfigDocument) -> dict[str, Any]:
    modules = []
    for entry in doc.modules:
        item: dict[str, Any] = {"name": entry.name}
        if entry.config:
            item["config"] = copy.deepcopy(entry.config)
        modules.append(item)
    return {
        "setup": copy.deepcopy(doc.setup.raw),
        "global": copy.deepcopy(doc.global_settings),
        "modules": modules,
    }


def serialize_config(doc: ConfigDocument) -> str:
    return json.dumps(config_to_tree(doc), indent=2)


def _substitute(value: Any, args: list[str], path: str) -> Any:
    if isinstance(value, str):
        m = PLACEHOLDER.match(value)
        if m is None:
            return value
        index = int(m.group(1))
        if index >= len(args):
            raise MissingArg(index, path, len(args))
        return args[index]
    if isinstance(value, dict):
        return {k: _substitute(v, args, f"{path}.{k}" if path else k) for k, v in value.items()}
    if isinstance(value, list):
        return [_substitute(v, args, f"{path}[{i}]") for i, v in enumerate(value)]
    return value


def substitute_args(doc: ConfigDocument, args: list[str]) -> ConfigDocument:
    """Replace every scalar equal to ``<args:N>`` with ``args[N]``.

    Only whole-string placeholders are recognized. Returns a new document.
    """
    args = list(args)
    setup = _substitute(doc.setup.raw, args, "setup")
    _validate_setup(setup)
    modules = tuple(
        ModuleEntry(entry.name, _substitute(entry.config, args, f"modules[{i}].config"))
        for i, entry in enumerate(doc.modules)
    )
    return ConfigDocument(
        setup=SetupSection(setup),
        global_settings=_substitute(doc.global_settings, args, "global"),
        modules=modules,
    )


def iter_placeholders(doc: ConfigDocument) -> Iterator[str]:
    """Yield every remaining placeholder string in the document."""

    def walk(value: Any) -> Iterator[str]:
        if isinstance(value, str) and PLACEHOLDER.match(value):
            yield value
        elif isinstance(value, dict):
            for v in value.values():
                yield from walk(v)
        elif isinstance(value, list):
            for v in value:
                yield from walk(v)

    yield from walk(config_to_tree(doc))


def deep_merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> dict[str, Any]:
    merged = copy.deepcopy(dict(base))
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def resolve_module_config(doc: ConfigDocument, entry: ModuleEntry) -> Settings:
    """Module-local config deep-merged over ``global.all``; local keys win."""
    return Settings(deep_merge(doc.global_settings.get("all", {}), entry.config), entry.name)


def with_global(doc: ConfigDocument, **values: Any) -> ConfigDocument:
    """Copy of ``doc`` with extra keys set in ``global.all``."""
    global_settings = copy.deepcopy(doc.global_settings)
    global_settings.setdefault("all", {}).update(values)
    return ConfigDocument(doc.setup, global_settings, doc.modules)
