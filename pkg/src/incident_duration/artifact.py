"""Versioned, checksummed model artifact files.

Layout: an ASCII magic+version line, a SHA-256 line over the payload, then
a canonical JSON payload (sorted keys, repr-exact floats). Canonical JSON
makes repeated saves of the same model byte-identical and float round trips
exact, so a loaded model predicts bit-identically.
"""

from __future__ import annotations

import hashlib
import json

from .pipeline import FrameworkModel

MAGIC = b"IDPRED/1"


class ArtifactError(ValueError):
    pass


class UnsupportedVersionError(ArtifactError):
    pass


class ChecksumError(ArtifactError):
    pass


def save_model(model: FrameworkModel, path) -> None:
    payload = json.dumps(model.to_state(), sort_keys=True, separators=(",", ":")).encode("utf-8")
    digest = hashlib.sha256(payload).hexdigest().encode("ascii")
    with open(path, "wb") as fh:
        fh.write(MAGIC + b"\n" + digest + b"\n" + payload)


def load_model(path) -> FrameworkModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    head, _, rest = blob.partition(b"\n")
    if not head.startswith(b"IDPRED/"):
        raise ArtifactError("not a model artifact (bad magic)")
    if head != MAGIC:
        raise UnsupportedVersionError(
            f"unsupported artifact version {head.decode('ascii', 'replace')!r}; this build reads {MAGIC.decode()!r}"
        )
    digest, _, payload = rest.partition(b"\n")
    actual = hashlib.sha256(payload).hexdigest().encode("ascii")
    if actual != digest:
        raise ChecksumError("artifact checksum mismatch; the file is corrupt")
    try:
        state = json.loads(payload.decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"artifact payload is not valid JSON: {exc}") from exc
    return FrameworkModel.from_state(state)
