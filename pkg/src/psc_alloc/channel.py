"""Seeded Rayleigh channel generation.

Each Monte-Carlo trial gets its own counter-based stream keyed by
``(master_seed, stream_index)``, so results never depend on the order in
which trials are executed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import NetworkConfig, dbm_to_watts


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_index: int = 0

    def generator(self, *subkey: int) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index, *subkey))
        return np.random.Generator(np.random.Philox(seq))


def sample_channel(cfg: NetworkConfig, rng: RngStream) -> np.ndarray:
    """Draw an ``M x N`` matrix with i.i.d. CN(0, beta) entries.

    Column ``n`` comes from its own sub-stream, so the first ``N`` users
    see the same channels whatever the total user count.
    """
    M, N = cfg.num_antennas, cfg.num_users
    scale = np.sqrt(cfg.beta / 2.0)
    H = np.empty((M, N), dtype=complex)
    for n in range(N):
        z = rng.generator(n).standard_normal((2, M))
        H[:, n] = scale * (z[0] + 1j * z[1])
    return H


def noise_power(cfg: NetworkConfig) -> float:
    return dbm_to_watts(cfg.noise_power_dbm)
