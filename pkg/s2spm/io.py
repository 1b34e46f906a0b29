"""Persistence: parameter snapshots, reports, digests, run manifests and the
output-directory lock."""
import hashlib
import io
import json
import os
import zipfile
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterator, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd

from . import __version__
from .errors import DomainError
from .model import ModelParams

SNAPSHOT_SUFFIX = ".snapshot"
MANIFEST_NAME = "manifest.json"
LOCK_NAME = ".s2spm.lock"
_FIXED_DATE = (1980, 1, 1, 0, 0, 0)
_META_ENTRY = "meta.json"


def _zip_entry(name: str) -> zipfile.ZipInfo:
    info = zipfile.ZipInfo(name, date_time=_FIXED_DATE)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    return info


def save_snapshot(params: ModelParams, path, meta: Optional[Mapping[str, Any]] = None) -> Path:
    """Zip of ``.npy`` tensors plus a JSON metadata entry; bytes depend only on the inputs."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(path, "w") as zf:
        for name, tensor in sorted(params.tensors().items()):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(tensor), allow_pickle=False)
            zf.writestr(_zip_entry(f"{name}.npy"), buf.getvalue())
        zf.writestr(_zip_entry(_META_ENTRY), json.dumps(dict(meta or {}), sort_keys=True, indent=2))
    return path


def load_snapshot(path) -> Tuple[ModelParams, Dict[str, Any]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"snapshot not found: {path}")
    tensors = {}
    with zipfile.ZipFile(path) as zf:
        for name in zf.namelist():
            if name.endswith(".npy"):
                tensors[name[:-4]] = np.lib.format.read_array(io.BytesIO(zf.read(name)), allow_pickle=False)
        meta = json.loads(zf.read(_META_ENTRY)) if _META_ENTRY in zf.namelist() else {}
    return ModelParams(**tensors), meta


def write_json(data: Any, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def read_json(path) -> Any:
    return json.loads(Path(path).read_text())


def write_csv(frame: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.10g")
    return path


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    config: Dict[str, Any]
    seed: Optional[int] = None
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)
    version: str = __version__
    started: str = field(default_factory=_utc_now)
    finished: Optional[str] = None

    def add_input(self, path) -> None:
        self.inputs[str(path)] = sha256_file(path)

    def index_outputs(self, out_dir, paths: List[Path]) -> None:
        out_dir = Path(out_dir)
        for p in sorted(Path(p) for p in paths):
            if p.name == MANIFEST_NAME:
                continue
            self.outputs[os.path.relpath(p, out_dir)] = sha256_file(p)

    def write(self, out_dir) -> Path:
        self.finished = _utc_now()
        return write_json(self.__dict__, Path(out_dir) / MANIFEST_NAME)


@contextmanager
def output_lock(out_dir) -> Iterator[Path]:
    """Exclusive claim on ``out_dir``; a lock left by another command is a usage error."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise DomainError(f"{out_dir} is locked by another command ({lock})") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield out_dir
    finally:
        lock.unlink(missing_ok=True)
