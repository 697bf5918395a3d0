"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class SynthgenError(Exception):
    """Base class for all errors raised by synthgen."""


# -- config -----------------------------------------------------------------


class ConfigError(SynthgenError):
    pass


class ConfigSyntaxError(ConfigError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class SchemaError(ConfigError):
    pass


class MissingArg(ConfigError):
    def __init__(self, index: int, key_path: str, n_args: int):
        super().__init__(
            f"<args:{index}> at '{key_path}' needs at least {index + 1} positional "
            f"argument(s), got {n_args}"
        )
        self.index = index
        self.key_path = key_path


class MissingKey(ConfigError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


# -- pipeline ---------------------------------------------------------------


class UnknownModule(SynthgenError):
    def __init__(self, name: str):
        super().__init__(f"unknown module '{name}'")
        self.name = name


class ModuleError(SynthgenError):
    def __init__(self, module_name: str, cause: BaseException):
        super().__init__(f"module '{module_name}' failed: {type(cause).__name__}: {cause}")
        self.module_name = module_name
        self.cause = cause


# -- scene / loader ---------------------------------------------------------


class EmptyMesh(SynthgenError):
    pass


class LoaderError(SynthgenError):
    pass


class ParseError(LoaderError):
    def __init__(self, path: str, line: int, token: str, reason: str = "bad token"):
        super().__init__(f"{path}:{line}: {reason}: {token!r}")
        self.line = line
        self.token = token


class FaceIndexError(LoaderError, IndexError):
    def __init__(self, path: str, line: int, index: int, n_vertices: int):
        super().__init__(
            f"{path}:{line}: face index {index} out of range for {n_vertices} vertices"
        )
        self.line = line
        self.index = index


class FormatError(LoaderError):
    pass


class LineError(LoaderError):
    def __init__(self, path: str, line: int, expected: int, got: int):
        super().__init__(f"{path}:{line}: expected {expected} fields, got {got}")
        self.line = line


# -- sampler ----------------------------------------------------------------


class SamplerError(SynthgenError):
    pass


class UnknownSampler(SamplerError):
    pass


class InvalidSpec(SamplerError):
    pass


class Exhausted(SamplerError):
    def __init__(self, attempts: int, what: str = "sample"):
        super().__init__(f"no valid {what} after {attempts} attempts")
        self.attempts = attempts


# -- render -----------------------------------------------------------------


class EmptyScene(SynthgenError):
    pass


# -- container --------------------------------------------------------------


class ContainerError(SynthgenError):
    pass


class BadMagic(ContainerError):
    pass


class Truncated(ContainerError):
    def __init__(self, offset: int, needed: int):
        super().__init__(f"file truncated at offset {offset} (needed {needed} more bytes)")
        self.offset = offset


class BadDtype(ContainerError):
    pass


class DuplicateKey(ContainerError):
    def __init__(self, key: str):
        super().__init__(f"duplicate container key '{key}'")
        self.key = key
