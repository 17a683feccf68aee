"""Adaptive sequential tests over discrepancy streams; Kaplan-Markov instance.

The auditor consumes samples in [-2, 2] one at a time and needs two
decisions: when to stop, and whether the stopped prefix rejects the
hypothesis that the stream's conditional means are all >= delta (the declared
margin).  Rejection is what lets an audit end with Consistent.

The Kaplan-Markov statistic is a running product of per-sample factors; it is
maintained in log space so long streams cannot underflow, and the alpha
comparison happens in log space with no tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Optional, Protocol, Sequence

import numpy as np

from .discrepancy import SIGMA_MAX, SIGMA_MIN


class AdaptiveAuditTest(Protocol):
    """Stopping time plus rejection criterion over finite sample prefixes."""

    def stop(self, observed: Sequence[float]) -> bool: ...

    def reject(self, observed: Sequence[float]) -> bool: ...

    def start(self) -> "TestRun": ...


class TestRun(Protocol):
    """Mutable per-audit state; one instance per audit, never shared."""

    def update(self, sample: float) -> None: ...

    @property
    def stopped(self) -> bool: ...

    @property
    def rejects(self) -> bool: ...


@dataclass(frozen=True)
class KaplanMarkovConfig:
    """gamma > 1 keeps every factor positive for samples in [-2, 2]."""

    delta: float
    gamma: float = 1.1
    alpha: float = 0.05
    max_draws: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.gamma > 1:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0 < self.delta <= 2:
            raise ValueError(f"delta must lie in (0, 2], got {self.delta}")
        if self.max_draws is not None and self.max_draws < 1:
            raise ValueError("max_draws must be positive")

    def log_factor(self, sample: float) -> float:
        """log of the per-sample multiplicative factor."""
        if not SIGMA_MIN <= sample <= SIGMA_MAX:
            raise ValueError(f"sample {sample} outside [-2, 2]")
        g2 = 2.0 * self.gamma
        return math.log1p(-self.delta / g2) - math.log1p(-sample / g2)


def km_risk(config: KaplanMarkovConfig, samples: Iterable[float]) -> float:
    """The running product after consuming every sample (1.0 when empty)."""
    return math.exp(sum(config.log_factor(d) for d in samples))


@dataclass(frozen=True)
class RiskTrajectory:
    """Per-draw running risk values plus the final decision."""

    risks: tuple[float, ...]
    draws: int
    rejected: bool

    @property
    def final_risk(self) -> float:
        return self.risks[-1] if self.risks else 1.0


def _safe_exp(x: float) -> float:
    # display only; the alpha comparison stays in log space
    return math.exp(x) if x < 700 else math.inf


class KaplanMarkovRun:
    """Incremental log-space state for one audit."""

    __slots__ = ("config", "_log_alpha", "log_risk", "draws", "_log_risks")

    def __init__(self, config: KaplanMarkovConfig):
        self.config = config
        self._log_alpha = math.log(config.alpha)
        self.log_risk = 0.0
        self.draws = 0
        self._log_risks: list[float] = []

    def update(self, sample: float) -> None:
        if self.stopped:
            raise RuntimeError("test already stopped")
        self.log_risk += self.config.log_factor(sample)
        self.draws += 1
        self._log_risks.append(self.log_risk)

    @property
    def crossed(self) -> bool:
        return self.log_risk <= self._log_alpha

    @property
    def stopped(self) -> bool:
        if self.crossed:
            return True
        m = self.config.max_draws
        return m is not None and self.draws >= m

    @property
    def rejects(self) -> bool:
        return self.crossed

    @property
    def risk(self) -> float:
        return _safe_exp(self.log_risk)

    def trajectory(self) -> RiskTrajectory:
        return RiskTrajectory(
            risks=tuple(_safe_exp(lr) for lr in self._log_risks),
            draws=self.draws,
            rejected=self.rejects,
        )


class KaplanMarkovTest:
    """Adaptive audit test: stop once risk <= alpha or max_draws is reached;
    reject exactly when risk <= alpha at the stopping prefix."""

    def __init__(self, config: KaplanMarkovConfig):
        self.config = config

    def start(self) -> KaplanMarkovRun:
        return KaplanMarkovRun(self.config)

    def _replay(self, observed: Sequence[float]) -> KaplanMarkovRun:
        run = self.start()
        for d in observed:
            run.update(d)
            if run.stopped:
                break
        return run

    def stop(self, observed: Sequence[float]) -> bool:
        return self._replay(observed).stopped

    def reject(self, observed: Sequence[float]) -> bool:
        return self._replay(observed).rejects

    def run_stream(self, stream: Iterator[float]) -> RiskTrajectory:
        run = self.start()
        while not run.stopped:
            run.update(next(stream))
        return run.trajectory()


def km_test(config: KaplanMarkovConfig) -> KaplanMarkovTest:
    return KaplanMarkovTest(config)


def zero_stream_crossing_draw(config: KaplanMarkovConfig) -> int:
    """First draw at which an all-zero discrepancy stream crosses alpha."""
    per_draw = config.log_factor(0.0)
    if per_draw >= 0:
        raise ValueError("zero-discrepancy factor does not shrink risk")
    return math.ceil(math.log(config.alpha) / per_draw)


# -- dominating-stream generators for empirical risk checks -------------------
#
# A generator produces an adaptive stream whose conditional means are all >=
# delta by construction; the test's rejection rate against any of these must
# stay below alpha.  The sup over all such streams is not enumerable, so the
# family below is a statistical spot check, not a proof.

StreamSource = Callable[[np.random.Generator], Iterator[float]]


def constant_stream(delta: float) -> StreamSource:
    def source(rng: np.random.Generator) -> Iterator[float]:
        while True:
            yield delta

    return source


def two_point_stream(delta: float, low: float = -2.0, high: float = 2.0) -> StreamSource:
    """i.i.d. mass split between the extremes with mean exactly delta."""
    if not low < delta < high:
        raise ValueError("delta must lie strictly between low and high")
    p_high = (delta - low) / (high - low)

    def source(rng: np.random.Generator) -> Iterator[float]:
        while True:
            yield high if rng.random() < p_high else low

    return source


def adversarial_seesaw_stream(delta: float) -> StreamSource:
    """Adaptive: plays the extreme that drags the running mean toward delta,
    keeping every conditional mean exactly delta via a two-point mixture."""

    def source(rng: np.random.Generator) -> Iterator[float]:
        running = 0.0
        n = 0
        while True:
            # choose the two-point support biased against the auditor
            if running < delta * max(n, 1):
                low, high = delta - 0.5, 2.0
            else:
                low, high = -2.0, delta + 0.5
            low = max(low, -2.0)
            high = min(high, 2.0)
            p_high = (delta - low) / (high - low)
            value = high if rng.random() < p_high else low
            running += value
            n += 1
            yield value

    return source


def shifted_stream(delta: float, shift: float = 0.5) -> StreamSource:
    """Dominates the boundary case: conditional mean delta + shift."""
    return two_point_stream(min(delta + shift, 1.99))


def test_risk_estimate(
    test: KaplanMarkovTest,
    generator: StreamSource,
    trials: int,
    seed: int,
    max_draws: Optional[int] = None,
) -> float:
    """Fraction of trials the test rejects against a dominating stream."""
    cap = max_draws or test.config.max_draws
    if cap is None:
        raise ValueError("risk estimation needs a draw cap")
    rejections = 0
    root = np.random.SeedSequence(seed)
    for child in root.spawn(trials):
        rng = np.random.Generator(np.random.PCG64(child))
        stream = generator(rng)
        run = KaplanMarkovRun(
            KaplanMarkovConfig(
                delta=test.config.delta,
                gamma=test.config.gamma,
                alpha=test.config.alpha,
                max_draws=cap,
            )
        )
        while not run.stopped:
            run.update(next(stream))
        rejections += run.rejects
    return rejections / trials
