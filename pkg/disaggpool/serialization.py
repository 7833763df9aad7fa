"""Utilities for reading and writing disaggpool documents."""

from __future__ import annotations

import json
from pathlib import Path
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from typing import Any, Iterator, Type, TypeVar

from apischema import ValidationError
from apischema import deserialize as _deserialize
from apischema import serialize as _serialize

from .exceptions import ConfigurationError, DomainError

T = TypeVar("T")


def deserialize(cls: Type[T], data: Any, **kwargs) -> T:
    """Deserializes a JSON-compatible value into ``cls``.

    Unknown keys are rejected so typos in hand-written files surface early.
    """
    kwargs.setdefault("additional_properties", False)
    return _deserialize(cls, data, **kwargs)


def serialize(cls: Type[T], obj: T, **kwargs) -> Any:
    """Serializes ``obj`` into a JSON-compatible value."""
    kwargs.setdefault("check_type", True)
    return _serialize(cls, obj, **kwargs)


def dump_json(data: Any) -> str:
    """Renders a stable, diff-friendly JSON document."""
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def dump_json_line(data: Any) -> str:
    """Renders one compact JSON-lines record."""
    return json.dumps(data, sort_keys=True, separators=(",", ":")) + "\n"


def load_json_lines(text: str, source: str = "<input>") -> Iterator[tuple[int, Any]]:
    """Yields ``(line number, record)`` pairs, skipping blank lines."""
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as err:
            raise ConfigurationError(f"{source}:{lineno}:{err.colno}: {err.msg}") from err
        yield lineno, record


def format_validation_error(err: ValidationError) -> str:
    """Flattens an apischema error into ``location: message`` lines."""
    lines = []
    for error in err.errors:
        where = ".".join(str(part) for part in error["loc"]) or "<root>"
        lines.append(f"{where}: {error['err']}")
    return "\n".join(lines)


def load_document(cls: Type[T], data: Any, source: str) -> T:
    """Deserializes a document, mapping every failure to a ConfigurationError.

    :param cls: Target type.
    :param data: Parsed JSON/TOML value.
    :param source: Name of the file (or other origin) for error messages.
    """
    try:
        return deserialize(cls, data)
    except ValidationError as err:
        raise ConfigurationError(
            f"{source}: invalid document\n{format_validation_error(err)}"
        ) from err
    except DomainError as err:
        raise ConfigurationError(f"{source}: {err}") from err


def read_toml(path: Path) -> dict[str, Any]:
    """Parses a TOML file, reporting the error position on failure."""
    try:
        with path.open("rb") as f:
            return tomllib.load(f)
    except tomllib.TOMLDecodeError as err:
        raise ConfigurationError(f"{path}: {err}") from err
    except OSError as err:
        raise ConfigurationError(f"{path}: {err.strerror}") from err


def read_json(cls: Type[T], path: Path) -> T:
    """Reads a JSON document into ``cls``."""
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ConfigurationError(
            f"{path}:{err.lineno}:{err.colno}: {err.msg}"
        ) from err
    except OSError as err:
        raise ConfigurationError(f"{path}: {err.strerror}") from err
    return load_document(cls, data, str(path))


def write_json(cls: Type[T], path: Path, obj: T) -> None:
    """Writes ``obj`` as a JSON document."""
    path.write_text(dump_json(serialize(cls, obj)), encoding="utf-8")
