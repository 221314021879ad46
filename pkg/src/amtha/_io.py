import json
import os
from collections.abc import Mapping
from pathlib import Path

from .errors import ParseError


def read_document(source) -> dict:
    """Accept a mapping, a JSON string, or a path to a JSON file."""
    if isinstance(source, Mapping):
        return dict(source)
    if isinstance(source, (str, os.PathLike)):
        text = str(source) if isinstance(source, str) else None
        if text is not None and text.lstrip().startswith(("{", "[")):
            raw = text
        else:
            path = Path(source)
            try:
                raw = path.read_text()
            except OSError as exc:
                raise ParseError(f"cannot read {path}: {exc.strerror}") from None
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ParseError("top-level document must be an object")
        return doc
    raise ParseError(f"unsupported document source {type(source).__name__}")


def write_document(doc: dict, path) -> None:
    Path(path).write_text(dumps(doc))


def dumps(doc: dict) -> str:
    # insertion order is the stable field order; no key sorting
    return json.dumps(doc, indent=2) + "\n"
