import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Union

import yaml

VERSION = "0.1.0"
MANIFEST_FILE = "manifest.yml"


def stage_seed(seed: int, stage: str) -> int:
    """
    Seed of one stage, derived from the run seed and the stage name.
    """
    digest = hashlib.sha256(f"{seed}:{stage}".encode("utf-8")).hexdigest()
    return int(digest[:8], 16)


@dataclass
class RunManifest:
    """
    Record of one stage run, written next to its outputs.

    :param subcommand: The stage.
    :type subcommand: str
    :param config: Every resolved setting the outputs depend on.
    :type config: Dict[str, Any]
    :param inputs: Input role to path.
    :type inputs: Dict[str, str]
    :param outputs: Output role to path.
    :type outputs: Dict[str, str]
    :param seed: The run seed.
    :type seed: int
    :param stage_seed: Seed derived for this stage.
    :type stage_seed: int
    :param version: Package version.
    :type version: str
    :param results: Summary figures of the run; not part of the hash.
    :type results: Dict[str, Any]
    """

    subcommand: str
    config: Dict[str, Any] = field(default_factory=dict)
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)
    seed: int = 0
    stage_seed: int = 0
    version: str = VERSION
    results: Dict[str, Any] = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(
            {"subcommand": self.subcommand, "config": self.config, "seed": self.seed},
            sort_keys=True,
            separators=(",", ":"),
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def to_dict(self) -> Dict[str, Any]:
        return {**asdict(self), "config_hash": self.config_hash}


def write_manifest(out_dir: Union[str, Path], manifest: RunManifest) -> Path:
    path = Path(out_dir) / MANIFEST_FILE
    with open(path, "w") as stream:
        yaml.safe_dump(manifest.to_dict(), stream, sort_keys=True)
    return path


def read_manifest(path: Union[str, Path]) -> Dict[str, Any]:
    with open(path) as stream:
        d: Dict[str, Any] = yaml.safe_load(stream)
        return d
