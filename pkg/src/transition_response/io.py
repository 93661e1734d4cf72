"""Output helpers: atomic CSV/JSON writes with embedded run metadata.

Files are first written to temporaries in the target directory and renamed
only when every file of a run is ready, so a failed run leaves nothing behind.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

from . import __version__

TOOL = "transition-response"


def jsonable(obj):
    """Recursively convert numpy scalars/arrays, dataclasses and tuples for ``json``."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        # JSON has no inf/nan; keep them visible as strings
        return v if math.isfinite(v) else str(v)
    return obj


def metadata(config: dict, seed=None, bounds: dict | None = None) -> dict:
    return {
        "tool": TOOL,
        "version": __version__,
        "config": jsonable(config),
        "seed": seed,
        "bounds": jsonable(bounds or {}),
    }


def json_text(payload: dict) -> str:
    return json.dumps(jsonable(payload), indent=2, sort_keys=False, allow_nan=False) + "\n"


def csv_text(header, rows, meta: dict) -> str:
    """CSV with the metadata as ``#`` comment lines above the header row."""
    buf = io.StringIO()
    for line in json.dumps(jsonable(meta), sort_keys=True).splitlines():
        buf.write("# " + line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def read_csv(path):
    """Inverse of :func:`csv_text`: returns (meta, header, rows as strings)."""
    meta_lines, body = [], []
    with open(path, newline="") as fh:
        for line in fh:
            (meta_lines if line.startswith("#") else body).append(line)
    meta = json.loads("".join(s[2:] for s in meta_lines)) if meta_lines else {}
    rows = list(csv.reader(body))
    return meta, rows[0], rows[1:]


class OutputBundle:
    """Collect output files and publish them together.

    >>> b = OutputBundle(out_dir); b.add("x.json", text); b.commit()
    """

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self._files: dict[str, str] = {}

    def add(self, name: str, text: str):
        self._files[name] = text

    def add_json(self, name: str, payload: dict):
        self.add(name, json_text(payload))

    def add_csv(self, name: str, header, rows, meta: dict):
        self.add(name, csv_text(header, rows, meta))

    @property
    def names(self):
        return list(self._files)

    def commit(self) -> list[Path]:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        temps = []
        try:
            for name, text in self._files.items():
                fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=self.out_dir)
                with os.fdopen(fd, "w") as fh:
                    fh.write(text)
                temps.append((tmp, self.out_dir / name))
        except BaseException:
            for tmp, _ in temps:
                os.unlink(tmp)
            raise
        for tmp, dest in temps:
            os.replace(tmp, dest)
        return [d for _, d in temps]


def write_json_atomic(path, payload: dict) -> Path:
    path = Path(path)
    b = OutputBundle(path.parent)
    b.add_json(path.name, payload)
    return b.commit()[0]


def load_schema(name: str) -> dict:
    """Shipped JSON schema for the ``name`` output (e.g. ``"density"``)."""
    from importlib import resources

    text = resources.files(__package__).joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)
