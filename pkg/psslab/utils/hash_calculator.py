"""Hash calculator for topologies, experiments and artifacts."""

import hashlib

from pydantic import BaseModel

from psslab.models.system import SystemConfig


class HashCalculator:
    """Calculates SHA-256 hashes over canonical, order-stable strings."""

    @staticmethod
    def calculate_topology_hash(config: SystemConfig) -> str:
        """Calculate hash for a topology.

        Algorithm:
        1. Collect fields: numClasses|numServers|architecture|arrivalRates|activities
        2. Serialize arrival rates as "r1,r2,..." and activities as "i:k:rate,..." (1-based ids,
           declaration order, floats in repr form)
        3. Compute SHA-256 hash

        The topology name is not hashed; renaming a file does not change its results.

        Args:
            config: System topology

        Returns:
            SHA-256 hash as hex string
        """
        arrival_rates = ",".join(repr(float(rate)) for rate in config.arrival_rates)
        activities = ",".join(
            f"{a.class_id + 1}:{a.server_id + 1}:{float(a.rate)!r}" for a in config.activities
        )
        sizes = f"{config.num_classes}|{config.num_servers}|{config.architecture.value}"
        data_string = f"{sizes}|{arrival_rates}|{activities}"
        return hashlib.sha256(data_string.encode("utf-8")).hexdigest()

    @staticmethod
    def calculate_config_hash(config: SystemConfig | None, experiment: BaseModel | None, seed: int) -> str:
        """Calculate the hash recorded in a run manifest.

        Algorithm:
        1. String: "topologyHash|experimentJson|seed", empty parts for missing inputs
        2. SHA-256 hash

        Args:
            config: Topology of the run, if any
            experiment: Parsed experiment file, if any
            seed: Base seed of the run

        Returns:
            SHA-256 hash as hex string
        """
        topology_hash = HashCalculator.calculate_topology_hash(config) if config is not None else ""
        experiment_json = experiment.model_dump_json() if experiment is not None else ""
        data_string = f"{topology_hash}|{experiment_json}|{seed}"
        return hashlib.sha256(data_string.encode("utf-8")).hexdigest()

    @staticmethod
    def calculate_bytes_hash(data: bytes) -> str:
        return hashlib.sha256(data).hexdigest()
