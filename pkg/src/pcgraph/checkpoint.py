"""Binary checkpoint format for masked graph models.

Layout (little-endian throughout):

    magic   4 bytes  b"PCG1"
    u32     format version (1)
    u32     number of layers (L+1), then that many u32 layer widths
    u32     connection-kind bitmask (bit i = i-th ConnectionKind)
    u8      activation code, u8 convention code
    u32     training epoch, u64 seed
    u64     d = number of unmasked weights
    f64*d   weights at unmasked positions, row-major

Only the unmasked entries are stored; the mask itself is rebuilt from the
layer widths and connection kinds, so the payload length always equals d.
The encoding is canonical: loading a file and saving it again reproduces
it byte for byte.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import CONVENTIONS, LayerSpec, activation
from .pcg import PcgModel
from .topology import ConnectionKind, build_mask, parse_kinds

MAGIC = b"PCG1"
VERSION = 1

_ACTIVATION_CODES = {"identity": 0, "tanh": 1, "sigmoid": 2, "relu": 3}
_ACTIVATION_NAMES = {v: k for k, v in _ACTIVATION_CODES.items()}
_CONVENTION_CODES = {name: i for i, name in enumerate(CONVENTIONS)}
_KIND_ORDER = tuple(ConnectionKind)


class CheckpointError(ValueError):
    """Unreadable or inconsistent checkpoint data."""


@dataclass(frozen=True)
class Checkpoint:
    """A trained graph model plus the metadata to rebuild and resume it."""

    layers: LayerSpec
    kinds: tuple[ConnectionKind, ...]
    model: PcgModel
    epoch: int
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "kinds", parse_kinds(self.kinds))
        if not np.array_equal(self.model.mask, build_mask(self.layers, self.kinds)):
            raise CheckpointError("model mask does not match the declared kinds")
        if self.model.activation.name not in _ACTIVATION_CODES:
            raise CheckpointError(f"unsupported activation {self.model.activation.name!r}")
        if not 0 <= self.epoch < 2**32:
            raise CheckpointError("epoch out of range")
        if not 0 <= self.seed < 2**64:
            raise CheckpointError("seed out of range")


def encode(ckpt: Checkpoint) -> bytes:
    """Serialize to the canonical byte layout."""
    sizes = ckpt.layers.sizes
    kind_bits = 0
    for kind in ckpt.kinds:
        kind_bits |= 1 << _KIND_ORDER.index(kind)
    head = struct.pack("<4sII", MAGIC, VERSION, len(sizes))
    head += struct.pack(f"<{len(sizes)}I", *sizes)
    head += struct.pack("<IBB", kind_bits,
                        _ACTIVATION_CODES[ckpt.model.activation.name],
                        _CONVENTION_CODES[ckpt.model.convention])
    head += struct.pack("<IQ", ckpt.epoch, ckpt.seed)
    payload = ckpt.model.weights[ckpt.model.mask].astype("<f8").tobytes()
    head += struct.pack("<Q", len(payload) // 8)
    return head + payload


def decode(data: bytes) -> Checkpoint:
    """Rebuild a checkpoint from bytes, validating every field."""
    view = memoryview(data)

    def take(fmt):
        nonlocal view
        size = struct.calcsize(fmt)
        if len(view) < size:
            raise CheckpointError("truncated checkpoint")
        out = struct.unpack(fmt, view[:size])
        view = view[size:]
        return out

    magic, version, n_layers = take("<4sII")
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"unsupported version {version}")
    if not 2 <= n_layers <= 2**16:
        raise CheckpointError(f"implausible layer count {n_layers}")
    sizes = take(f"<{n_layers}I")
    kind_bits, act_code, conv_code = take("<IBB")
    epoch, seed = take("<IQ")
    (d,) = take("<Q")

    kinds = tuple(
        kind for i, kind in enumerate(_KIND_ORDER) if kind_bits & (1 << i)
    )
    if kind_bits >= 1 << len(_KIND_ORDER):
        raise CheckpointError(f"unknown connection-kind bits {kind_bits:#x}")
    if not kinds:
        raise CheckpointError("checkpoint declares no connection kinds")
    if act_code not in _ACTIVATION_NAMES:
        raise CheckpointError(f"unknown activation code {act_code}")
    if conv_code not in (0, 1):
        raise CheckpointError(f"unknown convention code {conv_code}")

    layers = LayerSpec(sizes)
    mask = build_mask(layers, kinds)
    if d != int(mask.sum()):
        raise CheckpointError(
            f"payload declares {d} weights, mask has {int(mask.sum())}"
        )
    if len(view) != 8 * d:
        raise CheckpointError(
            f"expected {8 * d} payload bytes, found {len(view)}"
        )
    values = np.frombuffer(view, dtype="<f8")
    weights = np.zeros((layers.n_nodes, layers.n_nodes))
    weights[mask] = values
    model = PcgModel(weights, mask, activation(_ACTIVATION_NAMES[act_code]),
                     CONVENTIONS[conv_code], layers.n_in, layers.n_out)
    return Checkpoint(layers, kinds, model, epoch, seed)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode(ckpt))


def load_checkpoint(path) -> Checkpoint:
    try:
        data = Path(path).read_bytes()
    except OSError as err:
        raise CheckpointError(f"cannot read {path}: {err}") from None
    return decode(data)
