"""Monte Carlo engine for the validator-broadcast Markov chain.

A candidate block spreads through ``N`` validators by uniform random
push-gossip: when ``i`` validators hold the block, the chance that a given
step adds a new holder is ``p_i = i*(N-i)/N^2``, so the chain's sojourn in
state ``i`` is geometric with mean ``1/p_i``.  A broadcast round is the sum
of those sojourns, either up to full coverage (state ``N-1``) or truncated
at the two-thirds quorum threshold; a block time is ``phases`` independent
rounds (one per consensus vote stage) converted to seconds at ``delta_t``
per step.

Internal arithmetic stays in integer steps; seconds appear only at the
output boundary.  All sampling is reproducible from ``SimConfig.seed`` (see
:func:`run_monte_carlo` for the exact stream layout).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .distributions import MomentSummary
from .errors import DomainError

__all__ = [
    "CHUNK_RUNS",
    "QuorumMode",
    "SimConfig",
    "PhaseTrace",
    "MonteCarloResult",
    "transition_prob",
    "transition_probs",
    "quorum_threshold",
    "simulate_sojourn",
    "simulate_broadcast",
    "simulate_block_time",
    "run_monte_carlo",
    "sojourn_matrix",
]

#: Runs per deterministic RNG chunk (fixed; part of the seed->samples contract).
CHUNK_RUNS = 4096


class QuorumMode(str, Enum):
    """Where a broadcast round stops: full coverage or two-thirds quorum."""

    FULL_BROADCAST = "full"
    TWO_THIRDS = "two-thirds"


def _check_int(value, name: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise DomainError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < minimum:
        raise DomainError(f"{name} must be >= {minimum}, got {value}")
    return value


@dataclass(frozen=True)
class SimConfig:
    """Immutable simulation parameters.

    ``create_offset`` is a constant number of seconds added to every block
    time; block creation is treated as instantaneous by default (it is
    dominated by the broadcast rounds) and the hook exists for sensitivity
    studies only.
    """

    n_validators: int
    delta_t: float
    phases: int = 3
    quorum_mode: QuorumMode = QuorumMode.FULL_BROADCAST
    seed: int = 0
    create_offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(
            self, "n_validators", _check_int(self.n_validators, "n_validators", 2)
        )
        delta_t = float(self.delta_t)
        if not math.isfinite(delta_t) or delta_t <= 0.0:
            raise DomainError(f"delta_t must be finite and > 0, got {self.delta_t!r}")
        object.__setattr__(self, "delta_t", delta_t)
        object.__setattr__(self, "phases", _check_int(self.phases, "phases", 1))
        mode = self.quorum_mode
        if not isinstance(mode, QuorumMode):
            try:
                mode = QuorumMode(mode)
            except ValueError as exc:
                raise DomainError(f"unknown quorum mode {self.quorum_mode!r}") from exc
        object.__setattr__(self, "quorum_mode", mode)
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)):
            raise DomainError(f"seed must be an integer, got {self.seed!r}")
        object.__setattr__(self, "seed", int(self.seed))
        offset = float(self.create_offset)
        if not math.isfinite(offset) or offset < 0.0:
            raise DomainError(
                f"create_offset must be finite and >= 0, got {self.create_offset!r}"
            )
        object.__setattr__(self, "create_offset", offset)

    def state_count(self) -> int:
        """Number of chain states summed per broadcast round."""
        if self.quorum_mode is QuorumMode.TWO_THIRDS:
            return quorum_threshold(self.n_validators)
        return self.n_validators - 1


@dataclass(frozen=True)
class PhaseTrace:
    """Per-state sojourn steps of one broadcast round plus their total."""

    sojourn_steps: np.ndarray
    total_steps: int

    def __post_init__(self):
        steps = np.asarray(self.sojourn_steps, dtype=np.int64)
        if steps.ndim != 1 or steps.size == 0:
            raise DomainError("sojourn_steps must be a non-empty 1-D sequence")
        if (steps < 1).any():
            raise DomainError("every sojourn lasts at least one step")
        object.__setattr__(self, "sojourn_steps", steps)
        total = int(self.total_steps)
        if total != int(steps.sum()):
            raise DomainError("total_steps must equal the sum of sojourn_steps")
        object.__setattr__(self, "total_steps", total)


@dataclass(frozen=True)
class MonteCarloResult:
    """Samples (seconds), their moment summary, and the generating config."""

    samples: np.ndarray
    summary: MomentSummary
    config: SimConfig

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise DomainError("samples must be a non-empty 1-D array")
        if not (samples > 0.0).all():
            raise DomainError("all block-time samples must be > 0")
        object.__setattr__(self, "samples", samples)


def transition_prob(i, n) -> float:
    """Per-step probability of gaining a holder in state ``i``: ``i(n-i)/n^2``."""
    n = _check_int(n, "n", 2)
    i = _check_int(i, "state index", 1)
    if i > n - 1:
        raise DomainError(f"state index must be <= {n - 1}, got {i}")
    return float(i) * float(n - i) / float(n) ** 2


def transition_probs(n: int, limit=None) -> np.ndarray:
    """Vector of transition probabilities for states ``1..limit``."""
    n = _check_int(n, "n", 2)
    m = n - 1 if limit is None else _check_int(limit, "limit", 1)
    if m > n - 1:
        raise DomainError(f"limit must be <= {n - 1}, got {m}")
    i = np.arange(1, m + 1, dtype=np.float64)
    return i * (n - i) / float(n) ** 2


def quorum_threshold(n) -> int:
    """Last state summed under the two-thirds rule: ``ceil(2(n-1)/3)``."""
    n = _check_int(n, "n", 2)
    return -(-2 * (n - 1) // 3)


def _geometric_steps(u: float, log1mp: float) -> int:
    # Inversion of the geometric CDF; exact at small p and never below 1.
    return max(1, math.ceil(math.log1p(-u) / log1mp))


def simulate_sojourn(i, n, rng: np.random.Generator) -> int:
    """One geometric sojourn (in steps) for state ``i`` of an ``n``-chain."""
    p = transition_prob(i, n)
    return _geometric_steps(rng.random(), math.log1p(-p))


def simulate_broadcast(config: SimConfig, rng: np.random.Generator) -> PhaseTrace:
    """One broadcast round: geometric sojourns for every summed state."""
    m = config.state_count()
    log1mp = np.log1p(-transition_probs(config.n_validators, m))
    u = rng.random(m)
    steps = _kernels.sojourn_steps(u.reshape(1, m), log1mp)[0]
    return PhaseTrace(sojourn_steps=steps, total_steps=int(steps.sum()))


def simulate_block_time(config: SimConfig, rng: np.random.Generator) -> float:
    """One block time: ``phases`` independent rounds, in seconds."""
    total = 0
    for _ in range(config.phases):
        total += simulate_broadcast(config, rng).total_steps
    return total * config.delta_t + config.create_offset


def _chunk_stream(seed: int, chunk_index: int) -> np.random.Generator:
    # Seeds are folded to unsigned 64-bit; each chunk owns an independent
    # PCG64 stream keyed by (seed, chunk_index).
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence((seed & 0xFFFFFFFFFFFFFFFF, chunk_index)))
    )


def run_monte_carlo(config: SimConfig, n_runs) -> MonteCarloResult:
    """Monte Carlo block times, deterministic given ``(config, n_runs)``.

    Stream layout (stable within a release): runs are grouped into chunks of
    :data:`CHUNK_RUNS`; chunk ``c`` draws from
    ``PCG64(SeedSequence((seed mod 2**64, c)))`` a uniform matrix of shape
    ``(runs_in_chunk * phases, states)`` in row-major order, one row per
    (run, phase) pair.  Sample ``r`` therefore never depends on ``n_runs``
    or on execution order, and chunks may be evaluated concurrently.
    """
    n_runs = _check_int(n_runs, "n_runs", 1)
    m = config.state_count()
    log1mp = np.log1p(-transition_probs(config.n_validators, m))
    samples = np.empty(n_runs, dtype=np.float64)
    pos = 0
    chunk = 0
    while pos < n_runs:
        count = min(CHUNK_RUNS, n_runs - pos)
        rng = _chunk_stream(config.seed, chunk)
        u = rng.random((count * config.phases, m))
        totals = _kernels.broadcast_totals(u, log1mp)
        block_steps = totals.reshape(count, config.phases).sum(axis=1)
        samples[pos : pos + count] = block_steps * config.delta_t + config.create_offset
        pos += count
        chunk += 1
    return MonteCarloResult(
        samples=samples,
        summary=MomentSummary.from_samples(samples),
        config=config,
    )


def sojourn_matrix(config: SimConfig, n_runs) -> np.ndarray:
    """Per-state sojourn steps for ``n_runs`` single rounds, shape (runs, states).

    Diagnostic companion to :func:`run_monte_carlo` (independence and
    quorum-truncation checks).  Uses the same chunked stream derivation but
    draws one row per run, ignoring ``phases``.
    """
    n_runs = _check_int(n_runs, "n_runs", 1)
    m = config.state_count()
    log1mp = np.log1p(-transition_probs(config.n_validators, m))
    out = np.empty((n_runs, m), dtype=np.int64)
    pos = 0
    chunk = 0
    while pos < n_runs:
        count = min(CHUNK_RUNS, n_runs - pos)
        rng = _chunk_stream(config.seed, chunk)
        u = rng.random((count, m))
        out[pos : pos + count] = _kernels.sojourn_steps(u, log1mp)
        pos += count
        chunk += 1
    return out
