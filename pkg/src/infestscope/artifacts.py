"""Artifact plumbing: canonical JSON, atomic writes and provenance manifests."""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from pathlib import Path

SIG_DIGITS = 9


def atomic_write(path, payload: bytes) -> None:
    """Write ``payload`` to a temp file next to ``path`` and rename it into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _canonical(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return int(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError(f"non-finite value {obj!r} cannot be serialized")
        r = float(f"{obj:.{SIG_DIGITS}g}")
        return 0.0 if r == 0 else r
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    # numpy scalars and arrays
    if hasattr(obj, "tolist"):
        return _canonical(obj.tolist())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_json(obj) -> bytes:
    """Sorted keys, floats rounded to 9 significant digits, trailing newline."""
    text = json.dumps(_canonical(obj), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False)
    return (text + "\n").encode("utf-8")


def write_json(path, obj) -> None:
    atomic_write(path, canonical_json(obj))


def read_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"corrupt JSON in {path.name}: {exc.msg} (line {exc.lineno})") from exc


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, subcommand: str, parameters: dict, inputs, artifacts) -> Path:
    """Record parameters plus input/output digests for one subcommand run.

    Paths are stored by file name only so that identical runs in different
    directories produce identical manifests.
    """
    out_dir = Path(out_dir)
    manifest = {
        "subcommand": subcommand,
        "parameters": parameters,
        "inputs": {Path(p).name: sha256_file(p) for p in inputs},
        "artifacts": {Path(p).name: sha256_file(p) for p in artifacts},
    }
    path = out_dir / f"manifest_{subcommand}.json"
    write_json(path, manifest)
    return path
