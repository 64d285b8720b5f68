"""Versioned binary checkpoint container.

Layout: magic, version, config digest, step counter, then named parameter
blobs as little-endian float64. Loading refuses a digest mismatch so stale
checkpoints cannot silently pair with a different experiment config.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"ATSNCHK1"
VERSION = 1


class CheckpointError(Exception):
    pass


def save_checkpoint(path, net, config_digest: str) -> None:
    pairs = net.named_parameters()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        digest_b = config_digest.encode("ascii")
        fh.write(struct.pack("<H", len(digest_b)))
        fh.write(digest_b)
        fh.write(struct.pack("<QB", net.step_count, 1 if net.pretrained else 0))
        fh.write(struct.pack("<I", len(pairs)))
        for name, param in pairs:
            name_b = name.encode("ascii")
            fh.write(struct.pack("<H", len(name_b)))
            fh.write(name_b)
            fh.write(struct.pack("<B", param.value.ndim))
            for dim in param.value.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(param.value.astype("<f8").tobytes())


def load_checkpoint(path, net, expected_digest: str) -> None:
    """Overwrite net's parameters in place; net must match the saved layout."""
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        (dlen,) = struct.unpack("<H", fh.read(2))
        digest = fh.read(dlen).decode("ascii")
        if digest != expected_digest:
            raise CheckpointError(
                f"{path}: config digest mismatch (file {digest[:12]}…, expected {expected_digest[:12]}…)")
        step_count, pretrained = struct.unpack("<QB", fh.read(9))
        (nblobs,) = struct.unpack("<I", fh.read(4))
        expected = dict(net.named_parameters())
        if nblobs != len(expected):
            raise CheckpointError(
                f"{path}: {nblobs} blobs but net has {len(expected)} parameters")
        for _ in range(nblobs):
            (nlen,) = struct.unpack("<H", fh.read(2))
            name = fh.read(nlen).decode("ascii")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(ndim))
            count = int(np.prod(shape)) if shape else 1
            blob = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(shape)
            if name not in expected:
                raise CheckpointError(f"{path}: unexpected parameter {name!r}")
            param = expected[name]
            if param.value.shape != shape:
                raise CheckpointError(
                    f"{path}: {name} has shape {shape}, net expects {param.value.shape}")
            param.value[...] = blob
    net.step_count = step_count
    net.pretrained = bool(pretrained)
