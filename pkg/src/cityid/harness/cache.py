"""On-disk cache and binary formats.

Matrix record (``.scf``), little-endian::

    b"SCF1" | u32 version | u32 rows | u32 cols | rows*cols f64 (row-major) | u64 checksum

The checksum is the 8-byte BLAKE2b digest of everything before it.

Blob (``.scb``) for bases, models and score matrices: ``b"SCB1" | u32
version | u32 meta length | meta JSON | u32 array count`` followed by, per
array, ``u32 name length | name | matrix record``. Original array shapes
are kept in the meta under ``"shapes"``.

Writers go through a temporary file and ``os.replace`` so concurrent
readers never see a partial entry.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import struct
import tempfile
import warnings
from collections import Counter
from pathlib import Path

import numpy as np

from ..classify import ForestModel, MlpModel, Tree
from ..errors import IoFailure, StaleCache, ValidationError
from ..semantic import BasisMatrix

MATRIX_MAGIC = b"SCF1"
BLOB_MAGIC = b"SCB1"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


class CorruptEntry(ValidationError):
    pass


def _checksum(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=8).digest()


def encode_matrix(arr) -> bytes:
    a = np.asarray(arr, dtype="<f8")
    if a.ndim == 1:
        a = a[None]
    if a.ndim != 2:
        raise ValidationError("matrix records hold 2-D arrays")
    body = _HEADER.pack(MATRIX_MAGIC, VERSION, a.shape[0], a.shape[1]) + np.ascontiguousarray(a).tobytes()
    return body + _checksum(body)


def decode_matrix(buf: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Returns (array, offset just past the record)."""
    if len(buf) - offset < _HEADER.size:
        raise CorruptEntry("truncated matrix header")
    magic, version, rows, cols = _HEADER.unpack_from(buf, offset)
    if magic != MATRIX_MAGIC:
        raise CorruptEntry(f"bad matrix magic {magic!r}")
    if version != VERSION:
        raise CorruptEntry(f"matrix format version {version}, expected {VERSION}")
    end = offset + _HEADER.size + 8 * rows * cols
    if len(buf) < end + 8:
        raise CorruptEntry("truncated matrix payload")
    if _checksum(buf[offset:end]) != buf[end:end + 8]:
        raise CorruptEntry("matrix checksum mismatch")
    data = np.frombuffer(buf, dtype="<f8", count=rows * cols, offset=offset + _HEADER.size)
    return data.reshape(rows, cols).astype(np.float64), end + 8


def encode_blob(meta: dict, arrays: dict) -> bytes:
    meta = dict(meta)
    meta["shapes"] = {k: list(np.shape(v)) for k, v in arrays.items()}
    mbytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
    out = io.BytesIO()
    out.write(BLOB_MAGIC + struct.pack("<II", VERSION, len(mbytes)) + mbytes)
    out.write(struct.pack("<I", len(arrays)))
    for name, arr in arrays.items():
        nb = name.encode()
        a = np.asarray(arr, dtype=np.float64)
        out.write(struct.pack("<I", len(nb)) + nb + encode_matrix(a.reshape(1, -1) if a.ndim != 2 else a))
    return out.getvalue()


def decode_blob(buf: bytes) -> tuple[dict, dict]:
    if buf[:4] != BLOB_MAGIC:
        raise CorruptEntry("bad blob magic")
    version, mlen = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise CorruptEntry(f"blob format version {version}, expected {VERSION}")
    pos = 12
    try:
        meta = json.loads(buf[pos:pos + mlen])
    except ValueError as exc:
        raise CorruptEntry(f"bad blob metadata: {exc}") from None
    pos += mlen
    (count,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    arrays = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<I", buf, pos)
        name = buf[pos + 4:pos + 4 + nlen].decode()
        arr, pos = decode_matrix(buf, pos + 4 + nlen)
        arrays[name] = arr.reshape(meta["shapes"][name])
    return meta, arrays


def atomic_write(path, data: bytes) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def write_matrix(path, arr) -> None:
    atomic_write(path, encode_matrix(arr))


def read_matrix(path) -> np.ndarray:
    return decode_matrix(Path(path).read_bytes())[0]


def write_blob(path, meta: dict, arrays: dict) -> None:
    atomic_write(path, encode_blob(meta, arrays))


def read_blob(path) -> tuple[dict, dict]:
    return decode_blob(Path(path).read_bytes())


def content_key(*parts) -> str:
    """sha256 over a canonical JSON rendering of ``parts``."""
    blob = json.dumps(parts, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def array_digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str((a.dtype.str, a.shape)).encode())
        h.update(a.tobytes())
    return h.hexdigest()


class Cache:
    """Content-addressed store under ``root/<stage>/<key>.<ext>``.

    Keys must cover every parameter that affects the stored bytes. Entries
    that fail to decode are reported as stale and recomputed.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.hits = Counter()
        self.misses = Counter()

    def path(self, stage: str, key: str, ext: str) -> Path:
        return self.root / stage / f"{key}.{ext}"

    def _load(self, stage, key, ext, decode):
        p = self.path(stage, key, ext)
        if not p.exists():
            return None
        try:
            value = decode(p.read_bytes())
        except (CorruptEntry, struct.error, KeyError, UnicodeDecodeError) as exc:
            warnings.warn(f"stale cache entry {p}: {exc}; recomputing", StaleCache, stacklevel=3)
            return None
        return value

    def matrix(self, stage: str, key: str, compute):
        value = self._load(stage, key, "scf", lambda b: decode_matrix(b)[0])
        if value is not None:
            self.hits[stage] += 1
            return value
        self.misses[stage] += 1
        value = np.asarray(compute(), dtype=np.float64)
        write_matrix(self.path(stage, key, "scf"), value)
        return value

    def blob(self, stage: str, key: str, compute):
        """``compute`` returns (meta, arrays); so does this."""
        value = self._load(stage, key, "scb", decode_blob)
        if value is not None:
            self.hits[stage] += 1
            return value
        self.misses[stage] += 1
        meta, arrays = compute()
        write_blob(self.path(stage, key, "scb"), meta, arrays)
        # round-trip so callers see exactly what later cache hits will return
        return decode_blob(encode_blob(meta, arrays))

    def stats(self) -> dict:
        stages = sorted(set(self.hits) | set(self.misses))
        return {s: {"hits": self.hits[s], "misses": self.misses[s]} for s in stages}


# -- domain objects <-> blobs ------------------------------------------------

def basis_to_blob(b: BasisMatrix):
    return {"kind": "basis", "class_names": list(b.class_names), "counts": list(b.counts)}, {"columns": b.columns}


def basis_from_blob(meta, arrays) -> BasisMatrix:
    if meta.get("kind") != "basis":
        raise CorruptEntry("blob is not a basis")
    return BasisMatrix(arrays["columns"], tuple(meta["class_names"]), tuple(meta["counts"]))


def model_to_blob(model):
    if isinstance(model, ForestModel):
        meta = {
            "kind": "forest", "classes": list(model.classes), "n_features": model.n_features,
            "seed": model.seed, "feature_kind": model.feature_kind, "n_trees": len(model.trees),
            "n_train_rows": model.n_train_rows, "info": model.info,
        }
        arrays = {}
        for i, t in enumerate(model.trees):
            arrays[f"t{i}.feature"] = t.feature
            arrays[f"t{i}.threshold"] = t.threshold
            arrays[f"t{i}.left"] = t.left
            arrays[f"t{i}.right"] = t.right
            arrays[f"t{i}.counts"] = t.counts
        return meta, arrays
    if isinstance(model, MlpModel):
        meta = {
            "kind": "mlp", "classes": list(model.classes), "seed": model.seed,
            "activation": model.activation, "feature_kind": model.feature_kind,
            "n_layers": len(model.weights), "initial_loss": model.initial_loss,
            "final_loss": model.final_loss, "n_train_rows": model.n_train_rows,
        }
        arrays = {"mean": model.mean, "std": model.std, "history": np.asarray(model.history, dtype=np.float64)}
        for i, (w, b) in enumerate(zip(model.weights, model.biases)):
            arrays[f"W{i}"] = w
            arrays[f"b{i}"] = b
        return meta, arrays
    raise ValidationError(f"cannot serialize {type(model).__name__}")


def model_from_blob(meta, arrays):
    kind = meta.get("kind")
    if kind == "forest":
        trees = []
        for i in range(meta["n_trees"]):
            trees.append(Tree(
                arrays[f"t{i}.feature"].astype(np.int64),
                arrays[f"t{i}.threshold"],
                arrays[f"t{i}.left"].astype(np.int64),
                arrays[f"t{i}.right"].astype(np.int64),
                arrays[f"t{i}.counts"],
            ))
        return ForestModel(trees, tuple(meta["classes"]), meta["n_features"], meta["seed"],
                           meta["feature_kind"], meta["n_train_rows"], meta["info"])
    if kind == "mlp":
        n = meta["n_layers"]
        return MlpModel(
            [arrays[f"W{i}"] for i in range(n)], [arrays[f"b{i}"] for i in range(n)],
            tuple(meta["classes"]), arrays["mean"], arrays["std"], meta["seed"], meta["activation"],
            meta["feature_kind"], list(arrays["history"]), meta["initial_loss"], meta["final_loss"],
            meta["n_train_rows"],
        )
    raise CorruptEntry(f"unknown model kind {kind!r}")


def model_bytes(model) -> bytes:
    return encode_blob(*model_to_blob(model))
