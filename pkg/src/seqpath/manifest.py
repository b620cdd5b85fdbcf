"""Run manifests: what ran, on which inputs, with which parameters.

The manifest itself is a data artifact and must be byte-identical when a
run is repeated with the same inputs and seed, so it carries content
hashes and parameters but no clock values; wall-clock timestamps go to a
``*.times.json`` sidecar instead.
"""
from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path
from typing import Mapping, Sequence


def sha256_of_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def build_hash() -> str:
    """Short digest of the installed package sources."""
    root = Path(__file__).parent
    digest = hashlib.sha256()
    for source in sorted(root.glob("*.py")):
        digest.update(source.name.encode())
        digest.update(source.read_bytes())
    return digest.hexdigest()[:12]


def write_manifest(
    path,
    subcommand: str,
    parameters: Mapping[str, object],
    inputs: Sequence[str | Path],
    outputs: Sequence[str],
    seed: int | None = None,
) -> None:
    from . import __version__

    doc = {
        "tool": "seqpath",
        "version": __version__,
        "build": build_hash(),
        "subcommand": subcommand,
        "seed": seed,
        "parameters": {k: parameters[k] for k in sorted(parameters)},
        "inputs": {str(p): sha256_of_file(p) for p in inputs},
        "outputs": sorted(str(o) for o in outputs),
    }
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    sidecar = path.with_name(path.name + ".times.json")
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump({"written_at_unix": time.time()}, fh)
        fh.write("\n")
