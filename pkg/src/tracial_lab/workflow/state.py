"""Run manifests and artifact checksums."""

import hashlib
import json
import logging
import math
from datetime import UTC, datetime
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_serializer

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def file_checksum(path: Path) -> str:
    """SHA-256 of a file, read in chunks."""
    sha = hashlib.sha256()
    with Path(path).open("rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            sha.update(chunk)
    return sha.hexdigest()


class RunArtifact(BaseModel):
    """A file emitted by a scenario run."""

    model_config = ConfigDict(frozen=True)

    name: str = Field(..., description="File name relative to the run directory")
    size_bytes: int = Field(..., description="File size in bytes")
    sha256: str = Field(..., description="SHA-256 checksum")

    @classmethod
    def from_file(cls, path: Path) -> "RunArtifact":
        return cls(name=path.name, size_bytes=path.stat().st_size, sha256=file_checksum(path))

    def validate_in(self, run_dir: Path) -> bool:
        """
        Check that the artifact still exists and matches its checksum.

        Args:
            run_dir: Directory the manifest lives in

        Returns:
            True if the file is present and unchanged
        """
        path = Path(run_dir) / self.name
        if not path.exists():
            return False
        if path.stat().st_size != self.size_bytes:
            return False
        return file_checksum(path) == self.sha256


class RunManifest(BaseModel):
    """Everything needed to reproduce and audit a run; keys serialize in field order."""

    artifact_version: str
    scenario: str
    config: str = Field(..., description="Canonical echo of the scenario config")
    hamiltonian_digest: str
    lattice: dict[str, Any]
    t_max: float | None = Field(default=None, description="Pre-recurrence window")
    started_at: datetime = Field(default_factory=lambda: datetime.now(UTC))
    wall_time_seconds: float = 0.0
    summary: dict[str, float] = Field(default_factory=dict)
    flags: list[str] = Field(default_factory=list)
    artifacts: list[RunArtifact] = Field(default_factory=list)

    @field_serializer("started_at")
    def serialize_datetime(self, dt: datetime) -> str:
        """Serialize datetime to ISO format."""
        return dt.isoformat()

    @field_serializer("t_max")
    def serialize_t_max(self, t: float | None) -> float | str | None:
        """Infinite windows are written as the string 'inf'."""
        if t is not None and math.isinf(t):
            return "inf"
        return t

    def write(self, run_dir: Path) -> Path:
        path = Path(run_dir) / MANIFEST_NAME
        path.write_text(json.dumps(self.model_dump(mode="json"), indent=2) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, run_dir: Path) -> "RunManifest":
        data = json.loads((Path(run_dir) / MANIFEST_NAME).read_text(encoding="utf-8"))
        if data.get("t_max") == "inf":
            data["t_max"] = math.inf
        return cls.model_validate(data)

    def invalid_artifacts(self, run_dir: Path) -> list[str]:
        """Names of artifacts that are missing or whose checksum changed."""
        bad = [a.name for a in self.artifacts if not a.validate_in(run_dir)]
        if bad:
            logger.warning("manifest checksum mismatch in %s: %s", run_dir, ", ".join(bad))
        return bad
