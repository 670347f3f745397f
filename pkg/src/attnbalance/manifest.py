"""Run manifests: reproducibility records for every CLI command.

A manifest snapshots the command name, the resolved configuration (seeds,
alpha, tau, modes), the input paths with their content hashes, the output
file names, and the tool version. Its hash is the SHA-256 of the canonical
JSON without the hash field itself; every output file embeds or references
that hash. Manifests carry no timestamps and record outputs by name only,
so re-running a command with the same inputs and seeds reproduces
byte-identical artifacts wherever they land.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    try:
        with open(path, "rb") as handle:
            for chunk in iter(lambda: handle.read(1 << 16), b""):
                digest.update(chunk)
    except OSError as exc:
        raise DataError(f"cannot hash input {path}: {exc}") from exc
    return digest.hexdigest()


def _canonical(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode()


@dataclass
class RunManifest:
    command: str
    version: str
    config: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)   # name -> {"path": ..., "sha256": ...}
    outputs: list = field(default_factory=list)  # output file names, relative to the run dir

    def add_input(self, name: str, path) -> None:
        self.inputs[name] = {"path": str(path), "sha256": file_sha256(path)}

    def payload(self) -> dict:
        return {
            "command": self.command,
            "version": self.version,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": sorted(self.outputs),
        }

    def hash(self) -> str:
        return hashlib.sha256(_canonical(self.payload())).hexdigest()

    def write(self, path) -> str:
        """Write the manifest (with its own hash embedded) and return the hash."""
        digest = self.hash()
        document = dict(self.payload(), manifest_hash=digest)
        Path(path).write_text(
            json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        return digest
