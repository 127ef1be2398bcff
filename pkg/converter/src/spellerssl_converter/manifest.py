"""Conversion manifests: what was converted, how it was preprocessed,
and the checksums of every output file."""

import hashlib
import json
from dataclasses import asdict, dataclass, field


def sha256_of(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class OutputRecord:
    path: str
    n_trials: int
    sha256: str


@dataclass
class ConversionManifest:
    dataset_id: str
    subject_ids: list
    channel_order: list
    preprocessing: dict
    outputs: list = field(default_factory=list)

    def add_output(self, path, n_trials: int):
        self.outputs.append(OutputRecord(str(path), int(n_trials), sha256_of(path)))

    def write(self, path):
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def read(cls, path) -> "ConversionManifest":
        with open(path) as fh:
            raw = json.load(fh)
        raw["outputs"] = [OutputRecord(**o) for o in raw["outputs"]]
        return cls(**raw)
