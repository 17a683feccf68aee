"""Ground-truth election model: candidates, ballot interpretations, elections.

A ballot with marginal (ambiguous) marks does not have a single reading.  Two
representations of that ambiguity are supported on the same ballot type:

* probabilistic ("bayesian" mode): the ballot carries a distribution over the
  interpretations an audit board could reasonably produce;
* set-valued ("conservative" mode): the ballot carries only the set of
  possible interpretations, without probabilities.

An interpretation assigns 0 or 1 to every candidate; an undervote is all
zeros and an overvote has several ones (both yield zero effective votes for
the affected candidates' opponents -- they are simply legal bit patterns).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

PROB_TOL = 1e-9


class ModeError(ValueError):
    """Operation requires the other ballot representation."""


class DegenerateElectionError(ValueError):
    """Election has no ballots (margins undefined)."""


def candidate_order(names: Iterable[str]) -> tuple[str, ...]:
    """Canonical candidate ordering: lexicographic, fixed at load time."""
    out = tuple(sorted(set(names)))
    if not out:
        raise ValueError("candidate set is empty")
    if any(not n for n in out):
        raise ValueError("candidate names must be non-empty")
    return out


@dataclass(frozen=True, order=True)
class Interpretation:
    """One 0/1 vote per candidate, in the election's candidate order."""

    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        if not all(b in (0, 1) for b in self.bits):
            raise ValueError(f"interpretation bits must be 0/1, got {self.bits}")

    @classmethod
    def from_string(cls, s: str) -> "Interpretation":
        return cls(tuple(int(c) for c in s))

    @classmethod
    def vote_for(cls, index: int, n_candidates: int) -> "Interpretation":
        return cls(tuple(1 if i == index else 0 for i in range(n_candidates)))

    @classmethod
    def blank(cls, n_candidates: int) -> "Interpretation":
        return cls((0,) * n_candidates)

    def as_string(self) -> str:
        return "".join(str(b) for b in self.bits)

    def __len__(self) -> int:
        return len(self.bits)


def all_interpretations(n_candidates: int) -> list[Interpretation]:
    """Every bit pattern over ``n_candidates`` (2**n of them)."""
    return [Interpretation(bits) for bits in itertools.product((0, 1), repeat=n_candidates)]


@dataclass(frozen=True)
class InterpretationDistribution:
    """Finite distribution over interpretations; zero-mass entries are dropped."""

    support: tuple[tuple[Interpretation, float], ...]

    def __post_init__(self) -> None:
        cleaned = tuple((i, float(p)) for i, p in self.support if p != 0.0)
        if not cleaned:
            raise ValueError("distribution support is empty")
        if any(p < 0 for _, p in cleaned):
            raise ValueError("negative probability in distribution")
        seen = set()
        for interp, _ in cleaned:
            if interp in seen:
                raise ValueError(f"duplicate interpretation in support: {interp}")
            seen.add(interp)
        total = sum(p for _, p in cleaned)
        if abs(total - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {total!r}, expected 1 within {PROB_TOL}")
        object.__setattr__(self, "support", cleaned)

    @classmethod
    def point_mass(cls, interp: Interpretation) -> "InterpretationDistribution":
        return cls(((interp, 1.0),))

    @classmethod
    def from_mapping(
        cls, mapping: Mapping[Interpretation, float]
    ) -> "InterpretationDistribution":
        return cls(tuple(sorted(mapping.items(), key=lambda kv: kv[0])))

    def expected_vote(self, candidate_index: int) -> float:
        """E[I(candidate)] under this distribution."""
        return sum(p * i.bits[candidate_index] for i, p in self.support)

    def interpretations(self) -> frozenset[Interpretation]:
        return frozenset(i for i, _ in self.support)

    def sample(self, u: float) -> Interpretation:
        """Inverse-CDF draw from a uniform variate in [0, 1)."""
        acc = 0.0
        for interp, p in self.support:
            acc += p
            if u < acc:
                return interp
        return self.support[-1][0]


@dataclass(frozen=True)
class Ballot:
    """A labeled physical ballot with its ground-truth interpretation model.

    Exactly one of ``dist`` (probabilistic mode) or ``interps`` (set mode)
    must be provided.  A probabilistic ballot doubles as a set-valued one via
    its support.
    """

    id: str
    dist: Optional[InterpretationDistribution] = None
    interps: Optional[frozenset[Interpretation]] = None

    def __post_init__(self) -> None:
        if (self.dist is None) == (self.interps is None):
            raise ValueError("ballot needs exactly one of dist / interps")
        if self.interps is not None and not self.interps:
            raise ValueError("interpretation set is empty")

    @property
    def is_probabilistic(self) -> bool:
        return self.dist is not None

    def support(self) -> frozenset[Interpretation]:
        """Possible interpretations: the set itself, or the distribution's support."""
        if self.interps is not None:
            return self.interps
        return self.dist.interpretations()

    def as_conservative(self) -> "Ballot":
        if self.interps is not None:
            return self
        return Ballot(id=self.id, interps=self.support())


def expected_vote(ballot: Ballot, candidate_index: int) -> float:
    """Expected vote for the candidate if this ballot is hand-audited."""
    if ballot.dist is None:
        raise ModeError(f"ballot {ballot.id!r} carries no distribution")
    return ballot.dist.expected_vote(candidate_index)


def vote_bounds(ballot: Ballot, candidate_index: int) -> tuple[int, int]:
    """(least, most) favorable vote for the candidate over the ballot's interpretations."""
    votes = [i.bits[candidate_index] for i in ballot.support()]
    return min(votes), max(votes)


@dataclass(frozen=True)
class ConservativeResult:
    """Worst-case outcome: a winner that wins under every interpretation, or none."""

    winner: Optional[str]
    margin: float
    losers: frozenset[str] = field(default_factory=frozenset)

    @property
    def indeterminate(self) -> bool:
        return self.winner is None


@dataclass(frozen=True)
class Election:
    candidates: tuple[str, ...]
    ballots: tuple[Ballot, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "candidates", candidate_order(self.candidates))
        object.__setattr__(self, "ballots", tuple(self.ballots))
        n = len(self.candidates)
        for b in self.ballots:
            for interp in b.support():
                if len(interp) != n:
                    raise ValueError(
                        f"ballot {b.id!r} interpretation over {len(interp)} candidates, "
                        f"election has {n}"
                    )

    @property
    def size(self) -> int:
        return len(self.ballots)

    @property
    def uniquely_labeled(self) -> bool:
        ids = [b.id for b in self.ballots]
        return len(set(ids)) == len(ids)

    def index(self, candidate: str) -> int:
        try:
            return self.candidates.index(candidate)
        except ValueError:
            raise KeyError(f"unknown candidate {candidate!r}") from None

    def ballots_with_id(self, ident: str) -> tuple[Ballot, ...]:
        return tuple(b for b in self.ballots if b.id == ident)

    # -- probabilistic (expected-value) outcome ------------------------------

    def total_expected(self, candidate: str) -> float:
        """Expected hand-count total for the candidate."""
        j = self.index(candidate)
        return sum(expected_vote(b, j) for b in self.ballots)

    def bayesian_margin(self, a: str, b: str) -> float:
        """Diluted expected-value margin of a over b."""
        if a == b:
            raise ValueError("margin requires two distinct candidates")
        if self.size == 0:
            raise DegenerateElectionError("margin undefined for an empty election")
        return (self.total_expected(a) - self.total_expected(b)) / self.size

    def bayesian_winner(self) -> tuple[Optional[str], float]:
        """The candidate beating every other in expectation, with the minimum
        pairwise diluted margin; (None, 0.0) when no strict winner exists."""
        if self.size == 0:
            raise DegenerateElectionError("winner undefined for an empty election")
        totals = {c: self.total_expected(c) for c in self.candidates}
        best = max(totals, key=lambda c: totals[c])
        margins = [
            (totals[best] - totals[c]) / self.size for c in self.candidates if c != best
        ]
        if margins and min(margins) > 0:
            return best, min(margins)
        return None, 0.0

    # -- worst-case (set-valued) outcome --------------------------------------

    def total_bounds(self, candidate: str) -> tuple[int, int]:
        """(least, most) possible hand-count total for the candidate."""
        j = self.index(candidate)
        lo = hi = 0
        for b in self.ballots:
            l, h = vote_bounds(b, j)
            lo += l
            hi += h
        return lo, hi

    def conservative_margin(self, a: str, b: str) -> float:
        """Worst case for a against best case for b, diluted."""
        if a == b:
            raise ValueError("margin requires two distinct candidates")
        if self.size == 0:
            raise DegenerateElectionError("margin undefined for an empty election")
        return (self.total_bounds(a)[0] - self.total_bounds(b)[1]) / self.size

    def conservative_winner(self) -> ConservativeResult:
        """Winner only if some candidate beats every rival in the worst case.

        Losers are candidates that cannot tie some rival even under their own
        most favorable interpretations; they may exist without a winner.
        """
        if self.size == 0:
            raise DegenerateElectionError("winner undefined for an empty election")
        bounds = {c: self.total_bounds(c) for c in self.candidates}
        winner = None
        margin = 0.0
        for a in self.candidates:
            gaps = [
                (bounds[a][0] - bounds[c][1]) / self.size
                for c in self.candidates
                if c != a
            ]
            if gaps and min(gaps) > 0:
                winner, margin = a, min(gaps)
                break
        losers = frozenset(
            l
            for l in self.candidates
            if any(bounds[l][1] < bounds[a][0] for a in self.candidates if a != l)
        )
        return ConservativeResult(winner=winner, margin=margin, losers=losers)

    def as_conservative(self) -> "Election":
        return Election(self.candidates, tuple(b.as_conservative() for b in self.ballots))
