"""Deterministic child-seed derivation.

A root seed hashed with string labels yields per-task seeds, so parallel or
reordered execution of folds/samplers/rounds cannot change any draw.
"""

import hashlib


def derive_seed(root_seed: int, *labels) -> int:
    payload = repr((int(root_seed),) + tuple(labels)).encode("utf-8")
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")
