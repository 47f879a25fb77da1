import json
import os
import tempfile
from pathlib import Path

from .errors import IoFailure


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` through a temp file in the same directory + rename."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def dumps(obj, indent=None):
    # sort_keys is off on purpose: field order is part of each schema
    return json.dumps(obj, indent=indent, ensure_ascii=True, allow_nan=False)
