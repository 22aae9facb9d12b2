"""
Named parameter storage and its on-disk container.

The container is the 4-byte magic ``SPC1``, a little-endian uint64 manifest
length, the JSON manifest, then one little-endian float64 blob per parameter
in sorted-path order.
"""

import hashlib
import json
import struct
from pathlib import Path
from typing import Dict, Iterator, List, Tuple

import numpy as np

from src.diffnet.tensor import Tensor
from src.exceptions import SchemaError, ShapeError

MAGIC = b"SPC1"
DTYPE_TAG = "<f8"


class ParamStore:
    """Parameters by path, each with a gradient buffer of the same shape."""

    def __init__(self):
        self._tensors: Dict[str, Tensor] = {}

    def add(self, path: str, value: np.ndarray) -> Tensor:
        if path in self._tensors:
            raise KeyError(f"Parameter {path} already exists")
        value = np.array(value, dtype=np.float64, copy=True)
        tensor = Tensor(value, np.zeros_like(value))
        self._tensors[path] = tensor
        return tensor

    def __getitem__(self, path: str) -> Tensor:
        return self._tensors[path]

    def __contains__(self, path: str) -> bool:
        return path in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> List[str]:
        return sorted(self._tensors)

    def items(self) -> Iterator[Tuple[str, Tensor]]:
        for name in self.names():
            yield name, self._tensors[name]

    def size(self) -> int:
        return sum(t.data.size for t in self._tensors.values())

    def zero_grad(self) -> None:
        for tensor in self._tensors.values():
            tensor.grad = np.zeros_like(tensor.data)

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for name, tensor in self.items():
            digest.update(name.encode())
            digest.update(np.asarray(tensor.shape, dtype="<i8").tobytes())
            digest.update(tensor.data.astype(DTYPE_TAG).tobytes())
        return digest.hexdigest()

    def copy(self) -> "ParamStore":
        clone = ParamStore()
        for name, tensor in self.items():
            clone.add(name, tensor.data)
        return clone

    def load_values(self, other: "ParamStore") -> None:
        """Overwrite values in place from a store with identical layout."""
        if other.names() != self.names():
            raise ShapeError("Parameter stores hold different paths")
        for name, tensor in self.items():
            if other[name].shape != tensor.shape:
                raise ShapeError(
                    f"{name}: shape {other[name].shape} does not match {tensor.shape}"
                )
            tensor.data[...] = other[name].data

    def save(self, path: Path) -> None:
        manifest = {
            "dtype": DTYPE_TAG,
            "params": [
                {"path": name, "shape": list(tensor.shape)} for name, tensor in self.items()
            ],
        }
        header = json.dumps(manifest, sort_keys=True).encode("utf-8")
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<Q", len(header)))
            f.write(header)
            for _, tensor in self.items():
                f.write(tensor.data.astype(DTYPE_TAG).tobytes())

    @classmethod
    def load(cls, path: Path) -> "ParamStore":
        raw = Path(path).read_bytes()
        if raw[:4] != MAGIC:
            raise SchemaError(f"{path} does not start with {MAGIC!r}")
        try:
            (length,) = struct.unpack("<Q", raw[4:12])
            manifest = json.loads(raw[12 : 12 + length].decode("utf-8"))
            entries = manifest["params"]
            if manifest["dtype"] != DTYPE_TAG:
                raise SchemaError(f"{path} has dtype {manifest['dtype']}")
        except (struct.error, json.JSONDecodeError, KeyError, UnicodeDecodeError) as e:
            raise SchemaError(f"{path} has a malformed manifest: {e}") from e

        store = cls()
        offset = 12 + length
        for entry in sorted(entries, key=lambda e: e["path"]):
            shape = tuple(entry["shape"])
            count = int(np.prod(shape, dtype=np.int64))
            end = offset + 8 * count
            if end > len(raw):
                raise SchemaError(f"{path} is truncated at {entry['path']}")
            data = np.frombuffer(raw[offset:end], dtype=DTYPE_TAG).reshape(shape)
            store.add(entry["path"], data)
            offset = end
        if offset != len(raw):
            raise SchemaError(f"{path} has {len(raw) - offset} trailing bytes")
        return store
