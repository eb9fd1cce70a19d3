"""On-disk formats for shot sets.

Binary layout (little-endian)::

    "NGRQ" | u32 version=1 | u32 layout | u32 n_qubits | u32 n_classes
    | u32 n_channels | u32 n_samples | u64 n_shots
    then per shot: u64 packed label, f64 pairs (i0, q0, i1, q1, ...) channel-major
    optional trailer: "META" | u32 n_bytes | UTF-8 JSON object of strings

CSV layout: ``# key=value`` header comments, then the column header
``shot,label,ch,idx,i,q`` and one row per sample.
"""

from __future__ import annotations

import csv
import enum
import json
import os
import struct
from pathlib import Path

import numpy as np

from .data import Layout, ShotSet
from .errors import DataError, LabelOutOfRangeError, LengthMismatchError, MalformedHeaderError

MAGIC = b"NGRQ"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIIIQ")
_META_TAG = b"META"
CSV_COLUMNS = ("shot", "label", "ch", "idx", "i", "q")


class Format(enum.Enum):
    BINARY = "binary"
    CSV = "csv"

    @classmethod
    def infer(cls, path, fmt=None) -> "Format":
        if fmt is not None:
            return fmt if isinstance(fmt, Format) else cls(str(fmt).lower())
        return cls.CSV if str(path).lower().endswith(".csv") else cls.BINARY


def _write_bytes(path, payload: bytes) -> None:
    path = Path(path)
    try:
        with open(path, "wb") as fh:
            fh.write(payload)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def shotset_to_bytes(shotset: ShotSet) -> bytes:
    m, c, n = shotset.iq.shape
    head = _HEADER.pack(MAGIC, VERSION, int(shotset.layout), shotset.n_qubits,
                        shotset.n_classes, c, n, m)
    rec = np.empty(m, dtype=[("label", "<u8"), ("iq", "<f8", (c * n * 2,))])
    rec["label"] = shotset.labels.astype(np.uint64)
    rec["iq"] = shotset.iq.astype("<c16").view("<f8").reshape(m, c * n * 2)
    parts = [head, rec.tobytes()]
    if shotset.meta:
        blob = json.dumps(dict(sorted(shotset.meta.items()))).encode("utf-8")
        parts += [_META_TAG, struct.pack("<I", len(blob)), blob]
    return b"".join(parts)


def shotset_from_bytes(buf: bytes) -> ShotSet:
    if len(buf) < _HEADER.size:
        raise MalformedHeaderError(f"file holds {len(buf)} bytes, header needs {_HEADER.size}")
    magic, version, layout, n_qubits, n_classes, c, n, m = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise MalformedHeaderError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise MalformedHeaderError(f"unsupported version {version}")
    if layout not in (0, 1):
        raise MalformedHeaderError(f"unknown layout code {layout}")
    if c == 0 or n == 0:
        raise MalformedHeaderError("n_channels and n_samples must be positive")
    rec_size = 8 + 16 * c * n
    body = len(buf) - _HEADER.size
    need = rec_size * m
    if body < need:
        raise LengthMismatchError(
            f"header declares {m} shots ({need} bytes) but only {body} bytes follow"
        )
    dt = np.dtype([("label", "<u8"), ("iq", "<f8", (c * n * 2,))])
    rec = np.frombuffer(buf, dtype=dt, count=m, offset=_HEADER.size)
    meta = {}
    rest = buf[_HEADER.size + need:]
    if rest:
        if rest[:4] != _META_TAG or len(rest) < 8:
            raise LengthMismatchError(f"{len(rest)} unexpected trailing bytes")
        (k,) = struct.unpack_from("<I", rest, 4)
        if len(rest) != 8 + k:
            raise LengthMismatchError("metadata trailer length mismatch")
        try:
            meta = json.loads(rest[8:].decode("utf-8"))
        except ValueError as exc:
            raise MalformedHeaderError(f"unreadable metadata trailer: {exc}") from exc
    labels = rec["label"]
    n_conf = n_classes**n_qubits
    if m and int(labels.max()) >= n_conf:
        raise LabelOutOfRangeError(f"label {int(labels.max())} outside [0, {n_conf})")
    iq = rec["iq"].reshape(m, c, n, 2).copy().view("<c16")[..., 0]
    return ShotSet(iq=iq, labels=labels.astype(np.int64), n_qubits=n_qubits,
                   n_classes=n_classes, layout=Layout(layout), meta=meta)


def _save_csv(shotset: ShotSet, path) -> None:
    m, c, n = shotset.iq.shape
    try:
        fh = open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    with fh:
        head = {
            "layout": shotset.layout.name.lower(),
            "n_qubits": shotset.n_qubits,
            "n_classes": shotset.n_classes,
            "n_channels": c,
            "n_samples": n,
            "n_shots": m,
        }
        for k, v in head.items():
            fh.write(f"# {k}={v}\n")
        for k, v in sorted(shotset.meta.items()):
            fh.write(f"# meta.{k}={json.dumps(v)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for s in range(m):
            label = int(shotset.labels[s])
            for ch in range(c):
                z = shotset.iq[s, ch]
                for idx in range(n):
                    w.writerow((s, label, ch, idx, repr(float(z[idx].real)), repr(float(z[idx].imag))))


def _load_csv(path) -> ShotSet:
    head: dict[str, str] = {}
    meta: dict[str, str] = {}
    rows = []
    with open(path, newline="") as fh:
        lines = iter(fh)
        header_row = None
        for line in lines:
            if line.startswith("#"):
                key, sep, value = line[1:].strip().partition("=")
                if not sep:
                    raise MalformedHeaderError(f"bad header comment {line.strip()!r}")
                if key.startswith("meta."):
                    meta[key[5:]] = json.loads(value)
                else:
                    head[key.strip()] = value.strip()
                continue
            header_row = next(csv.reader([line]))
            break
        if header_row is None or tuple(h.strip() for h in header_row) != CSV_COLUMNS:
            raise MalformedHeaderError(f"expected columns {','.join(CSV_COLUMNS)}, got {header_row}")
        for lineno, row in enumerate(csv.reader(lines), start=2):
            if not row:
                continue
            if len(row) != len(CSV_COLUMNS):
                raise LengthMismatchError(f"row {lineno}: {len(row)} fields, expected 6")
            rows.append(row)
    try:
        layout = Layout.parse(head.get("layout", "per_qubit_demodulated"))
        n_qubits = int(head.get("n_qubits", 1))
        n_classes = int(head.get("n_classes", 2))
    except ValueError as exc:
        raise MalformedHeaderError(str(exc)) from exc
    if not rows:
        c = int(head.get("n_channels", 1))
        n = int(head.get("n_samples", 1))
        return ShotSet(np.zeros((0, c, n), complex), np.zeros(0, np.int64), n_qubits,
                       n_classes, layout, meta)
    try:
        shot = np.array([int(r[0]) for r in rows])
        label = np.array([int(r[1]) for r in rows])
        ch = np.array([int(r[2]) for r in rows])
        idx = np.array([int(r[3]) for r in rows])
        i = np.array([float(r[4]) for r in rows])
        q = np.array([float(r[5]) for r in rows])
    except ValueError as exc:
        raise LengthMismatchError(f"non-numeric or missing sample value: {exc}") from exc
    m, c, n = shot.max() + 1, ch.max() + 1, idx.max() + 1
    if "n_samples" in head and int(head["n_samples"]) != n:
        raise LengthMismatchError(f"header says n_samples={head['n_samples']}, data has {n}")
    if len(rows) != m * c * n:
        raise LengthMismatchError(f"{len(rows)} rows, expected {m}x{c}x{n}={m * c * n}")
    iq = np.full((m, c, n), np.nan, dtype=np.complex128)
    iq[shot, ch, idx] = i + 1j * q
    if np.isnan(iq).any():
        raise LengthMismatchError("missing (shot, ch, idx) rows")
    labels = np.zeros(m, dtype=np.int64)
    labels[shot] = label
    if np.any(labels[shot] != label):
        raise DataError("inconsistent labels within a shot")
    n_conf = n_classes**n_qubits
    if labels.min() < 0 or labels.max() >= n_conf:
        raise LabelOutOfRangeError(f"label outside [0, {n_conf})")
    return ShotSet(iq, labels, n_qubits, n_classes, layout, meta)


def save_shotset(shotset: ShotSet, path, fmt=None) -> None:
    fmt = Format.infer(path, fmt)
    if fmt is Format.BINARY:
        _write_bytes(path, shotset_to_bytes(shotset))
    else:
        _save_csv(shotset, path)


def load_shotset(path, fmt=None) -> ShotSet:
    fmt = Format.infer(path, fmt)
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such dataset: {path}")
    if fmt is Format.BINARY:
        return shotset_from_bytes(Path(path).read_bytes())
    return _load_csv(path)


# Generic record container shared by weight and model files:
#   4-byte tag | u32 version | u64 payload length | payload


def write_record(path, tag: bytes, payload: bytes, version: int = 1) -> None:
    assert len(tag) == 4
    _write_bytes(path, tag + struct.pack("<IQ", version, len(payload)) + payload)


def read_record(path, tag: bytes) -> tuple[int, bytes]:
    buf = Path(path).read_bytes()
    if len(buf) < 16 or buf[:4] != tag:
        raise MalformedHeaderError(f"{path}: expected {tag!r} record")
    version, size = struct.unpack_from("<IQ", buf, 4)
    if len(buf) - 16 != size:
        raise LengthMismatchError(f"{path}: payload is {len(buf) - 16} bytes, header says {size}")
    return version, buf[16:]
