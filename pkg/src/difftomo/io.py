"""Binary field files and trace datasets.

Field file layout (all little endian)::

    bytes  0-7   magic  b"DTOMOFLD"
    bytes  8-11  format version (uint32, currently 1)
    bytes 12-15  reserved, zero
    float64      half width r_s
    uint32       resolution N
    uint8        kind (0 = real, 1 = complex)
    payload      N*N float64 (real) or 2*N*N float64 (complex, re/im
                 interleaved), row-major with x2 as the slow index

A dataset is a JSON manifest plus one blob per ``(angle, wavenumber)``
holding ``m`` complex128 values (re/im interleaved float64, little endian).
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .fields import (
    AcquisitionConfig,
    ComplexField,
    Dataset,
    Grid,
    RealField,
    SourceConfig,
    Trace,
)

MAGIC = b"DTOMOFLD"
VERSION = 1
_HEADER = struct.Struct("<8sI4sdIB")


class FormatError(ValueError):
    """Raised for malformed or truncated files."""


def field_to_bytes(fld: RealField | ComplexField) -> bytes:
    is_complex = isinstance(fld, ComplexField)
    head = _HEADER.pack(MAGIC, VERSION, b"\0" * 4, fld.grid.half_width, fld.grid.n, int(is_complex))
    vals = np.ascontiguousarray(fld.values)
    if is_complex:
        payload = vals.view(np.float64).astype("<f8").tobytes()
    else:
        payload = vals.astype("<f8").tobytes()
    return head + payload


def field_from_bytes(data: bytes) -> RealField | ComplexField:
    if len(data) < _HEADER.size:
        raise FormatError("truncated header")
    magic, version, _, r_s, n, kind = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported field format version {version}")
    if kind not in (0, 1):
        raise FormatError(f"unknown field kind tag {kind}")
    try:
        grid = Grid(r_s, n)
    except ValueError as exc:
        raise FormatError(str(exc)) from None
    count = n * n * (2 if kind else 1)
    payload = data[_HEADER.size:]
    if len(payload) != 8 * count:
        raise FormatError(f"payload holds {len(payload)} bytes, expected {8 * count}")
    vals = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    if kind:
        return ComplexField(grid, vals.view(np.complex128).reshape(n, n))
    return RealField(grid, vals.reshape(n, n))


def write_field(path, fld) -> None:
    Path(path).write_bytes(field_to_bytes(fld))


def read_field(path):
    return field_from_bytes(Path(path).read_bytes())


def acquisition_to_dict(acq: AcquisitionConfig) -> dict:
    d = asdict(acq)
    d["wavenumbers"] = list(acq.wavenumbers)
    d["angles"] = acq.angles.tolist()
    return d


def acquisition_from_dict(d: dict) -> AcquisitionConfig:
    d = dict(d)
    d.pop("angles", None)
    src = d.pop("source", None) or {}
    return AcquisitionConfig(source=SourceConfig(**src), **d)


def _trace_name(ia: int, ik: int) -> str:
    return f"a{ia:04d}_k{ik:02d}.bin"


def write_dataset(path, dataset: Dataset, extra: dict | None = None) -> None:
    """Write ``path`` (a ``.json`` manifest) and a sibling blob directory."""
    path = Path(path)
    blob_dir = path.with_suffix("")
    blob_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for (ia, ik), trace in sorted(dataset.traces.items()):
        name = _trace_name(ia, ik)
        (blob_dir / name).write_bytes(trace.values.view(np.float64).astype("<f8").tobytes())
        entries.append(
            {"angle_index": ia, "k_index": ik, "file": f"{blob_dir.name}/{name}"}
        )
    manifest = {
        "format": "difftomo-dataset",
        "version": VERSION,
        "kind": dataset.kind,
        "acquisition": acquisition_to_dict(dataset.acquisition),
        "traces": entries,
    }
    if extra:
        manifest["extra"] = extra
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True))


def read_dataset(path) -> Dataset:
    path = Path(path)
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest is not valid JSON: {exc}") from None
    if manifest.get("format") != "difftomo-dataset":
        raise FormatError("not a dataset manifest")
    acq = acquisition_from_dict(manifest["acquisition"])
    x = acq.receiver_x
    traces = {}
    for e in manifest["traces"]:
        raw = (path.parent / e["file"]).read_bytes()
        if len(raw) != 16 * x.size:
            raise FormatError(f"{e['file']}: expected {16 * x.size} bytes, got {len(raw)}")
        vals = np.frombuffer(raw, dtype="<f8").astype(np.float64).view(np.complex128)
        traces[(int(e["angle_index"]), int(e["k_index"]))] = Trace(x, acq.r_m, vals)
    return Dataset(acq, manifest["kind"], traces)


def read_manifest_extra(path) -> dict:
    return json.loads(Path(path).read_text()).get("extra", {})
