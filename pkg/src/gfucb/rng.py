"""Seed hierarchy: run seed -> replication seeds -> per-purpose streams.

Streams are PCG64 generators spawned through SeedSequence, so they are
stable across platforms and runs. Environment streams are separated from
algorithm streams so that two algorithms launched with the same replication
seed face byte-identical environments.
"""
from dataclasses import dataclass

from numpy.random import PCG64, Generator, SeedSequence


@dataclass
class RunStreams:
    env_context: Generator
    env_noise: Generator
    algo_init: Generator
    algo_explore: Generator


def spawn_run_streams(seed):
    """Build the four per-run streams from an int seed or a SeedSequence."""
    ss = seed if isinstance(seed, SeedSequence) else SeedSequence(seed)
    kids = ss.spawn(4)
    return RunStreams(*(Generator(PCG64(k)) for k in kids))


def replication_seeds(base_seed, n):
    """Deterministic per-replication SeedSequences for a batch of runs."""
    return [SeedSequence([base_seed, r]) for r in range(n)]
