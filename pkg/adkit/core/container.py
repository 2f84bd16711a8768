"""ADKH1 tensor container.

Layout: the 5-byte magic ``ADKH1``, an unsigned 64-bit little-endian header
length, a UTF-8 JSON header listing every tensor (name, shape, dtype, byte
offset relative to the data section), then the raw little-endian float32
blobs. Projection heads and memory banks share this container.
"""

import json
import logging
import os
import struct
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple, Union

import numpy as np
from pydantic import Field, NonNegativeInt, ValidationError

from adkit.core.exceptions import CheckpointError, CheckpointNotFoundError
from adkit.schemas import BaseSchema

logger = logging.getLogger(__name__)

MAGIC = b"ADKH1"
_LENGTH = struct.Struct("<Q")
_DTYPE = np.dtype("<f4")

PathLike = Union[str, Path]


class TensorEntry(BaseSchema):
    """Header entry of one stored tensor."""

    name: str = Field(..., min_length=1)
    shape: List[NonNegativeInt]
    dtype: Literal["f32"] = "f32"
    offset: int = Field(..., ge=0)

    @property
    def nbytes(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64)) * _DTYPE.itemsize


class ContainerHeader(BaseSchema):
    """JSON header of an ADKH1 file."""

    tensors: List[TensorEntry]
    meta: Dict[str, Any] = Field(default_factory=dict)


def save_tensors(
    path: PathLike,
    tensors: Mapping[str, np.ndarray],
    meta: Optional[Mapping[str, Any]] = None,
) -> Path:
    """Write tensors to an ADKH1 file atomically.

    Args:
        path: Destination file
        tensors: Named arrays; stored as little-endian float32 in insertion order
        meta: JSON-serializable metadata stored in the header

    Returns:
        The written path
    """
    path = Path(path)
    entries: List[TensorEntry] = []
    blobs: List[bytes] = []
    offset = 0
    for name, array in tensors.items():
        data = np.ascontiguousarray(np.asarray(array, dtype=_DTYPE))
        entries.append(TensorEntry(name=name, shape=list(data.shape), offset=offset))
        blob = data.tobytes()
        blobs.append(blob)
        offset += len(blob)

    header = ContainerHeader(tensors=entries, meta=dict(meta or {}))
    header_bytes = json.dumps(header.model_dump(), sort_keys=True).encode("utf-8")

    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(MAGIC)
            handle.write(_LENGTH.pack(len(header_bytes)))
            handle.write(header_bytes)
            for blob in blobs:
                handle.write(blob)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    logger.info(f"Wrote {len(entries)} tensors ({offset} bytes) to {path}")
    return path


def load_tensors(path: PathLike) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """Read an ADKH1 file.

    Args:
        path: Container file

    Returns:
        Named float32 arrays (insertion order preserved) and header metadata

    Raises:
        CheckpointNotFoundError: If the file does not exist
        CheckpointError: If the file is truncated or malformed
    """
    path = Path(path)
    if not path.is_file():
        raise CheckpointNotFoundError(f"checkpoint not found: {path}")
    raw = path.read_bytes()

    if raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic, expected {MAGIC!r}", offset=0)
    cursor = len(MAGIC)
    if len(raw) < cursor + _LENGTH.size:
        raise CheckpointError(f"{path}: truncated header length", offset=cursor)
    (header_len,) = _LENGTH.unpack_from(raw, cursor)
    cursor += _LENGTH.size
    if len(raw) < cursor + header_len:
        raise CheckpointError(
            f"{path}: header declares {header_len} bytes, file ends early",
            offset=len(raw),
        )
    try:
        header = ContainerHeader.model_validate_json(raw[cursor : cursor + header_len])
    except ValidationError as e:
        raise CheckpointError(f"{path}: invalid header: {e}", offset=cursor)
    cursor += header_len

    data = memoryview(raw)[cursor:]
    tensors: Dict[str, np.ndarray] = {}
    for entry in header.tensors:
        end = entry.offset + entry.nbytes
        if entry.offset > len(data) or end > len(data):
            raise CheckpointError(
                f"{path}: tensor {entry.name!r} needs bytes up to {end}, "
                f"data section has {len(data)}",
                offset=cursor + len(data),
            )
        array = np.frombuffer(data[entry.offset : end], dtype=_DTYPE)
        tensors[entry.name] = array.reshape(entry.shape).astype(np.float32)
    logger.debug(f"Read {len(tensors)} tensors from {path}")
    return tensors, header.meta
