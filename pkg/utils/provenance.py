"""
Provenance helpers: canonical config hashing and the provenance block
written into every report
"""

import hashlib
import json
from typing import Any, Dict

from config.settings import VERSION


def canonical_json(data: Any) -> str:
    """Sorted keys, no whitespace, round-trip floats"""
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def config_hash(data: Dict[str, Any]) -> str:
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def provenance_block(config_data: Dict[str, Any], seed: int) -> Dict[str, Any]:
    """
    Block sufficient to reproduce a run: config hash, seed and version

    Args:
        config_data: Canonical config dictionary (RunConfig.to_dict())
        seed: Run seed
    """
    return {
        "config_hash": config_hash(config_data),
        "seed": seed,
        "version": VERSION,
    }


def write_json(data: Dict[str, Any], path) -> None:
    """Deterministic JSON artefact (sorted keys, indent 2, trailing newline)"""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")
