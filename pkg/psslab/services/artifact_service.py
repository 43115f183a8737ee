"""Atomic artifact writing and run manifests."""

from __future__ import annotations

import csv
import io
import logging
import os
from pathlib import Path
from typing import Any, Iterable, Sequence

from pydantic import BaseModel

from common.versioning import get_project_version, get_report_schema_version
from psslab.models.system import SystemConfig
from psslab.schemas.experiment import ExperimentSpec
from psslab.schemas.report import ArtifactEntry, Manifest
from psslab.utils.hash_calculator import HashCalculator

logger = logging.getLogger("psslab.artifacts")

MANIFEST_NAME = "manifest.json"


class ArtifactService:
    """Writes CSV and JSON artifacts and records them in a manifest."""

    @staticmethod
    def write_atomic(path: Path, data: bytes) -> ArtifactEntry:
        """Write to a temporary sibling and rename it over `path`."""
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp_path = path.with_name(f".{path.name}.tmp")
        with tmp_path.open("wb") as fp:
            fp.write(data)
        os.replace(tmp_path, path)
        entry = ArtifactEntry(
            path=path.name,
            sha256=HashCalculator.calculate_bytes_hash(data),
            size_bytes=len(data),
        )
        logger.debug("Wrote %s (%d bytes, sha256 %s)", path, entry.size_bytes, entry.sha256[:12])
        return entry

    @staticmethod
    def write_json(out_dir: Path, name: str, payload: BaseModel | Sequence[BaseModel]) -> ArtifactEntry:
        """Serialize one model, or a list of models, as indented JSON."""
        if isinstance(payload, BaseModel):
            text = payload.model_dump_json(indent=2)
        else:
            text = "[\n" + ",\n".join(item.model_dump_json(indent=2) for item in payload) + "\n]"
        return ArtifactService.write_atomic(out_dir / name, (text + "\n").encode("utf-8"))

    @staticmethod
    def write_csv(
        out_dir: Path, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]
    ) -> ArtifactEntry:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
        return ArtifactService.write_atomic(out_dir / name, buffer.getvalue().encode("utf-8"))

    @staticmethod
    def file_name(experiment: str, policy: str, r: float | None = None, suffix: str = "csv") -> str:
        """`{experiment}_{policy}_{r}.{suffix}`, with characters unsafe in file names replaced."""
        safe_policy = "".join(ch if ch.isalnum() or ch in "-." else "-" for ch in policy)
        stem = f"{experiment}_{safe_policy}" if r is None else f"{experiment}_{safe_policy}_{r:g}"
        return f"{stem}.{suffix}"

    @staticmethod
    def build_manifest(
        command: str,
        seed: int,
        artifacts: list[ArtifactEntry],
        *,
        config: SystemConfig | None = None,
        experiment: ExperimentSpec | None = None,
        topology_path: Path | None = None,
        experiment_path: Path | None = None,
        exit_code: int = 0,
        verdicts: dict[str, str] | None = None,
    ) -> Manifest:
        return Manifest(
            command=command,
            project_version=get_project_version(),
            schema_version=get_report_schema_version(),
            topology=topology_path.name if topology_path is not None else None,
            experiment=experiment_path.name if experiment_path is not None else None,
            seed=seed,
            config_hash=HashCalculator.calculate_config_hash(config, experiment, seed),
            exit_code=exit_code,
            artifacts=sorted(artifacts, key=lambda entry: entry.path),
            verdicts=verdicts or {},
        )

    @staticmethod
    def write_manifest(out_dir: Path, manifest: Manifest) -> ArtifactEntry:
        return ArtifactService.write_json(out_dir, MANIFEST_NAME, manifest)
