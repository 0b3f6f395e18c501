"""Low-energy sample sources for standard Ising models.

Three interchangeable backends: Metropolis simulated annealing (the batch
runs all reads as vectorized parallel chains, each with its own seeded
stream), exhaustive enumeration (the test oracle), and a client for remote
annealer services speaking a JSON wire format.  Every returned sample stores
the energy re-evaluated from its spins, offset included.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from .ising import StandardIsing, rescale_to_range

EXHAUSTIVE_LIMIT = 24


class SamplerError(RuntimeError):
    """Raised when a sampler backend cannot produce samples."""


@dataclass
class Sample:
    """One annealer readout: spins in {-1,+1}^n and their energy."""

    spins: np.ndarray
    energy: float


class Sampler(Protocol):
    def sample_batch(self, model: StandardIsing, num_reads: int, seed: int = 0) -> list[Sample]:
        """Exactly num_reads samples, deterministic for a fixed seed."""
        ...


def sample_batch(
    sampler: Sampler, model: StandardIsing, num_reads: int, seed: int = 0
) -> list[Sample]:
    """Batch of independent samples with per-read seeds derived from (seed, read)."""
    if num_reads < 1:
        raise ValueError("num_reads must be at least 1")
    return sampler.sample_batch(model, num_reads, seed)


@dataclass
class SaConfig:
    """Sweep budget and geometric temperature schedule for one annealing run.

    Unset temperatures default to the hottest local field for t_hot and
    1e-3 of it for t_cold.
    """

    sweeps: int = 100
    t_hot: float | None = None
    t_cold: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.sweeps < 1:
            raise ValueError("sweeps must be at least 1")
        if self.t_hot is not None and self.t_cold is not None:
            if not (self.t_hot >= self.t_cold > 0):
                raise ValueError("need t_hot >= t_cold > 0")


def default_t_hot(model: StandardIsing) -> float:
    """Largest possible local field magnitude; flips are nearly free at this T."""
    if model.n == 0:
        return 1.0
    sym = model.symmetric_couplings()
    peak = float((np.abs(model.biases) + np.abs(sym).sum(axis=1)).max())
    return peak if peak > 0 else 1.0


def _temperatures(model: StandardIsing, cfg: SaConfig) -> np.ndarray:
    t_hot = cfg.t_hot if cfg.t_hot is not None else default_t_hot(model)
    t_cold = cfg.t_cold if cfg.t_cold is not None else 1e-3 * t_hot
    if not (t_hot >= t_cold > 0):
        raise ValueError("need t_hot >= t_cold > 0")
    return np.geomspace(t_hot, t_cold, cfg.sweeps)


def _anneal_chains(
    model: StandardIsing, temps: np.ndarray, streams: list[np.random.Generator]
) -> np.ndarray:
    """Run one Metropolis chain per stream; returns spins of shape (chains, n).

    A sweep proposes one flip per site in order; acceptance follows
    min(1, exp(-dE / T)).  Each chain returns the lowest-energy state it
    visited rather than its final state, which costs one tracked incumbent
    and markedly raises the ground-state hit rate on frustrated models.
    Local fields are maintained incrementally so a proposal costs O(chains)
    and an acceptance O(chains * n).
    """
    n = model.n
    chains = len(streams)
    sym = model.symmetric_couplings()
    spins = np.empty((chains, n), dtype=float)
    for c, rng in enumerate(streams):
        spins[c] = rng.integers(0, 2, n) * 2.0 - 1.0
    fields = spins @ sym + model.biases
    energies = model.energies(spins)
    best_energy = energies.copy()
    best_spins = spins.copy()

    sweeps = temps.shape[0]
    chunk = max(1, min(sweeps, int(2e6 / max(1, chains * n))))
    done = 0
    while done < sweeps:
        step = min(chunk, sweeps - done)
        uniforms = np.stack([rng.random((step, n)) for rng in streams], axis=0)
        for s in range(step):
            temp = temps[done + s]
            for site in range(n):
                delta = -2.0 * spins[:, site] * fields[:, site]
                accept = uniforms[:, s, site] < np.exp(np.minimum(-delta / temp, 0.0))
                hit = np.flatnonzero(accept)
                if hit.size:
                    spins[hit, site] *= -1.0
                    fields[hit] += 2.0 * spins[hit, site, None] * sym[site]
                    energies[hit] += delta[hit]
                    improved = hit[energies[hit] < best_energy[hit]]
                    if improved.size:
                        best_energy[improved] = energies[improved]
                        best_spins[improved] = spins[improved]
        done += step
    return best_spins


def _chain_streams(seed: int, num_reads: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(num_reads)
    return [np.random.default_rng(child) for child in children]


class SimulatedAnnealingSampler:
    """Metropolis annealer; each read is an independent seeded chain."""

    def __init__(
        self, sweeps: int = 100, t_hot: float | None = None, t_cold: float | None = None
    ):
        self.sweeps = sweeps
        self.t_hot = t_hot
        self.t_cold = t_cold

    def _config(self, seed: int) -> SaConfig:
        return SaConfig(self.sweeps, self.t_hot, self.t_cold, seed)

    def sample_batch(
        self, model: StandardIsing, num_reads: int, seed: int = 0
    ) -> list[Sample]:
        if num_reads < 1:
            raise ValueError("num_reads must be at least 1")
        if model.n == 0:
            return [Sample(np.zeros(0, dtype=np.int8), model.offset) for _ in range(num_reads)]
        temps = _temperatures(model, self._config(seed))
        spins = _anneal_chains(model, temps, _chain_streams(seed, num_reads))
        energies = model.energies(spins)
        return [
            Sample(spins[c].astype(np.int8), float(energies[c])) for c in range(num_reads)
        ]


def simulated_anneal(model: StandardIsing, cfg: SaConfig) -> Sample:
    """Single annealing run from a uniformly random start state."""
    if model.n == 0:
        return Sample(np.zeros(0, dtype=np.int8), model.offset)
    temps = _temperatures(model, cfg)
    spins = _anneal_chains(model, temps, [np.random.default_rng(np.random.SeedSequence(cfg.seed))])
    return Sample(spins[0].astype(np.int8), float(model.energies(spins)[0]))


def _enumerate_spins(n: int, offset: int, count: int) -> np.ndarray:
    """States offset..offset+count-1 as +/-1 rows, most significant site first.

    Ascending state index is ascending lexicographic spin order with -1 < +1.
    """
    codes = np.arange(offset, offset + count, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1
    return bits * 2.0 - 1.0


def _all_state_energies(model: StandardIsing) -> np.ndarray:
    """Energies of all 2^n states, indexed by lexicographic state code."""
    n = model.n
    if n > EXHAUSTIVE_LIMIT:
        raise ValueError(f"exhaustive enumeration capped at n <= {EXHAUSTIVE_LIMIT}")
    total = 1 << n
    energies = np.empty(total)
    block = 1 << 16
    for start in range(0, total, block):
        batch = _enumerate_spins(n, start, min(block, total - start))
        energies[start : start + batch.shape[0]] = model.energies(batch)
    return energies


def exhaustive(model: StandardIsing) -> list[Sample]:
    """All 2^n samples, ascending by energy, ties in lexicographic spin order."""
    if model.n == 0:
        return [Sample(np.zeros(0, dtype=np.int8), model.offset)]
    energies = _all_state_energies(model)
    order = np.argsort(energies, kind="stable")
    n = model.n
    return [
        Sample(_enumerate_spins(n, int(code), 1)[0].astype(np.int8), float(energies[code]))
        for code in order
    ]


class ExhaustiveSampler:
    """Oracle backend: a batch is the num_reads lowest-energy states."""

    def sample_batch(
        self, model: StandardIsing, num_reads: int, seed: int = 0
    ) -> list[Sample]:
        if num_reads < 1:
            raise ValueError("num_reads must be at least 1")
        if model.n == 0:
            return [Sample(np.zeros(0, dtype=np.int8), model.offset) for _ in range(num_reads)]
        energies = _all_state_energies(model)
        take = min(num_reads, energies.size)
        head = np.argpartition(energies, take - 1)[:take]
        # stable order within the selection keeps ties lexicographic
        head = head[np.lexsort((head, energies[head]))]
        batch = [
            Sample(
                _enumerate_spins(model.n, int(code), 1)[0].astype(np.int8),
                float(energies[code]),
            )
            for code in head
        ]
        while len(batch) < num_reads:
            batch.append(Sample(batch[0].spins.copy(), batch[0].energy))
        return batch


def _post_json(url: str, payload: dict, headers: dict, timeout: float) -> dict:
    import requests

    response = requests.post(url, json=payload, headers=headers, timeout=timeout)
    response.raise_for_status()
    return response.json()


class RemoteSampler:
    """Client for an annealer service speaking the JSON wire format.

    Request: {"ising": {"linear", "quadratic", "offset"}, "num_reads",
    "annealing_time_us"}; response: {"samples": [[+/-1, ...]], "energies":
    [...], "num_occurrences": [...]}.  Models are linearly rescaled into the
    programmable range before sending unless ``rescale=False``, and every
    returned energy is replaced by the local evaluation of the unscaled
    model (a mismatch beyond 1e-6 is reported as a warning).
    """

    def __init__(
        self,
        endpoint: str,
        token: str | None = None,
        anneal_time_us: float = 20.0,
        max_retries: int = 3,
        timeout: float = 30.0,
        rescale: bool = True,
        transport: Callable[[str, dict, dict, float], dict] | None = None,
    ):
        self.endpoint = endpoint
        self.token = token
        self.anneal_time_us = anneal_time_us
        self.max_retries = max_retries
        self.timeout = timeout
        self.rescale = rescale
        self.transport = transport or _post_json

    def sample_batch(
        self, model: StandardIsing, num_reads: int, seed: int = 0
    ) -> list[Sample]:
        if num_reads < 1:
            raise ValueError("num_reads must be at least 1")
        if self.rescale:
            wire_model, factor = rescale_to_range(model)
        else:
            wire_model, factor = model, 1.0
            peak = max(
                float(np.abs(model.couplings).max(initial=0.0)),
                float(np.abs(model.biases).max(initial=0.0)),
            )
            if peak > 1.0:
                raise SamplerError(
                    f"model exceeds the programmable range (peak {peak:.3g}); rescale first"
                )
        payload = {
            "ising": wire_model.to_json_dict(),
            "num_reads": num_reads,
            "annealing_time_us": self.anneal_time_us,
        }
        headers = {"Authorization": f"Bearer {self.token}"} if self.token else {}
        response = self._request(payload, headers)
        return self._parse(response, model, wire_model, factor, num_reads)

    def _request(self, payload: dict, headers: dict) -> dict:
        failures = 0
        while True:
            try:
                return self.transport(self.endpoint, payload, headers, self.timeout)
            except SamplerError:
                raise
            except Exception as exc:
                failures += 1
                if failures > self.max_retries:
                    raise SamplerError(
                        f"remote sampler failed after {failures} attempts: {exc}"
                    ) from exc

    def _parse(
        self,
        response: dict,
        model: StandardIsing,
        wire_model: StandardIsing,
        factor: float,
        num_reads: int,
    ) -> list[Sample]:
        try:
            rows = response["samples"]
            energies = response["energies"]
            occurrences = response.get("num_occurrences", [1] * len(rows))
        except (KeyError, TypeError) as exc:
            raise SamplerError(f"malformed response: missing field {exc}") from exc
        if not (len(rows) == len(energies) == len(occurrences)):
            raise SamplerError("malformed response: ragged sample records")
        samples: list[Sample] = []
        for row, reported, count in zip(rows, energies, occurrences):
            spins = np.asarray(row, dtype=np.int8)
            if spins.shape != (model.n,) or not np.all(np.abs(spins) == 1):
                raise SamplerError(f"malformed response: bad spin vector {row!r}")
            local = model.energy(spins)
            expected = wire_model.energy(spins)
            if abs(float(reported) - expected) > 1e-6 * max(1.0, abs(expected)):
                warnings.warn(
                    f"remote energy {reported!r} disagrees with local evaluation "
                    f"{expected!r}; using the local value",
                    stacklevel=2,
                )
            for _ in range(int(count)):
                samples.append(Sample(spins.copy(), local))
        if len(samples) < num_reads:
            raise SamplerError(
                f"malformed response: {len(samples)} of {num_reads} requested samples"
            )
        return samples[:num_reads]
