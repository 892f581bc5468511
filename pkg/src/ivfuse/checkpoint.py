"""Checkpoint serialization.

Layout: the 4 magic bytes ``HFN1``, a newline, one manifest line per
tensor (``<name> <dtype> <d0,d1,...>``), a blank line, then the raw
little-endian float32 payloads in manifest order. Loading validates the
complete tensor set and every shape against the architecture table before
accepting anything, so a checkpoint that parses is guaranteed to fit the
network exactly.
"""

from __future__ import annotations

import numpy as np

from .errors import CheckpointFormatError, CheckpointSchemaError
from .network import ModelParams, expected_shape, parameter_names
from .tensor import Tensor

MAGIC = b"HFN1"
_DTYPE_TOKEN = "f32"


def save_checkpoint(params: ModelParams, path) -> None:
    names = parameter_names()
    lines = []
    for name in names:
        t = params.tensors[name]
        dims = ",".join(str(d) for d in t.shape)
        lines.append(f"{name} {_DTYPE_TOKEN} {dims}")
    manifest = ("\n".join(lines) + "\n\n").encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC + b"\n")
        fh.write(manifest)
        for name in names:
            fh.write(np.ascontiguousarray(
                params.tensors[name].data, dtype="<f4").tobytes())


def load_checkpoint(path) -> ModelParams:
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(MAGIC + b"\n"):
        raise CheckpointFormatError(f"{path}: bad magic, not a checkpoint")
    body = blob[len(MAGIC) + 1:]
    sep = body.find(b"\n\n")
    if sep < 0:
        raise CheckpointFormatError(f"{path}: unterminated manifest")
    manifest, payload = body[:sep], body[sep + 2:]

    entries: list[tuple[str, tuple[int, ...]]] = []
    for lineno, raw in enumerate(manifest.decode("utf-8").splitlines(), 1):
        fields = raw.split()
        if len(fields) != 3:
            raise CheckpointFormatError(
                f"{path}: manifest line {lineno} malformed: {raw!r}")
        name, dtype_token, dims = fields
        if dtype_token != _DTYPE_TOKEN:
            raise CheckpointFormatError(
                f"{path}: unsupported dtype {dtype_token!r} for {name}")
        try:
            shape = tuple(int(d) for d in dims.split(","))
        except ValueError:
            raise CheckpointFormatError(
                f"{path}: bad shape {dims!r} for {name}") from None
        entries.append((name, shape))

    known = set(parameter_names())
    seen = {name for name, _ in entries}
    if seen != known:
        missing = sorted(known - seen)
        extra = sorted(seen - known)
        raise CheckpointSchemaError(
            f"{path}: tensor set mismatch, missing {missing}, unexpected {extra}")
    for name, shape in entries:
        want = expected_shape(name)
        if shape != want:
            raise CheckpointSchemaError(
                f"{path}: {name} has shape {shape}, expected {want}")

    tensors: dict[str, Tensor] = {}
    offset = 0
    for name, shape in entries:
        count = int(np.prod(shape))
        nbytes = 4 * count
        if offset + nbytes > len(payload):
            raise CheckpointFormatError(
                f"{path}: truncated payload while reading {name}")
        arr = np.frombuffer(
            payload, dtype="<f4", count=count, offset=offset).reshape(shape)
        tensors[name] = Tensor(arr.astype(np.float32))
        offset += nbytes
    if offset != len(payload):
        raise CheckpointFormatError(
            f"{path}: {len(payload) - offset} trailing bytes after payload")
    ordered = {name: tensors[name] for name in parameter_names()}
    return ModelParams(ordered)
