"""Synthetic audit streams, Monte Carlo sample-size tables, election builders.

The simulated contest has two candidates and five kinds of rows: clean rows
for either candidate, four classic comparison-error categories (one/two vote
overstatements o1/o2 and understatements u1/u2), and marginal-mark rows that
the table may claim for the winner (rate ``p_cvr``) and the audit board may
read for the winner (rate ``p_audit``).

How each accounting approach treats a marginal row:

* baseline     -- the table commits to a single reading per row; a draw can
                  disagree by a whole vote either way: +1 with probability
                  p_cvr*(1-p_audit), -1 with (1-p_cvr)*p_audit, else 0.
* bayesian     -- the table declares the winner probability itself, so a draw
                  moves by a fraction: +(1-p_cvr) with probability p_audit,
                  -p_cvr otherwise.
* conservative -- the table declares the ambiguity outright and concedes the
                  row in its margin: -1 with probability p_audit, else 0.

Declared (diluted) margins follow the same accounting: ``margin`` is the
margin with no marginal credit, baseline and bayesian tables additionally
credit the winner p_cvr votes per marginal row,

    delta = margin + p_cvr * marginal_rate    (baseline, bayesian)
    delta = margin                            (conservative)

so the conservative test always runs at a margin p_cvr*marginal_rate below
the other two.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterator, Optional, Sequence

import numpy as np

from . import kernels
from .cvr import BayesianCvr, ConservativeCvr, canonical_cvr, cvr_from_truth
from .engine import TestSettings
from .model import Ballot, Election, Interpretation, InterpretationDistribution
from .stattest import KaplanMarkovConfig

APPROACHES = ("baseline", "conservative", "bayesian")


@dataclass(frozen=True)
class ErrorModel:
    """Two-candidate contest composition; rates are per-ballot probabilities."""

    margin: float
    marginal_rate: float = 0.005
    o1: float = 0.001
    u1: float = 0.001
    o2: float = 0.0001
    u2: float = 0.0001
    p_cvr: float = 0.5
    p_audit: float = 0.5
    size: int = 100_000

    def __post_init__(self) -> None:
        for name in ("marginal_rate", "o1", "u1", "o2", "u2", "p_cvr", "p_audit"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name}={v} outside [0, 1]")
        total = self.marginal_rate + self.o1 + self.u1 + self.o2 + self.u2
        if total > 1:
            raise ValueError(f"category rates sum to {total} > 1")
        if self.size < 1:
            raise ValueError("size must be positive")

    @classmethod
    def symmetric(cls, margin: float, p_m: float, **kw) -> "ErrorModel":
        """Table and audit board treat marginal marks identically (p_m each)."""
        return cls(margin=margin, p_cvr=p_m, p_audit=p_m, **kw)


def declared_delta(model: ErrorModel, approach: str) -> float:
    if approach not in APPROACHES:
        raise ValueError(f"unknown approach {approach!r}")
    if approach == "conservative":
        return model.margin
    return model.margin + model.p_cvr * model.marginal_rate


def marginal_branch(model: ErrorModel, approach: str) -> tuple[float, float, float, float, float]:
    """(q1, q2, v1, v2, v3): cumulative sub-branch cuts and discrepancy values."""
    pc, pa = model.p_cvr, model.p_audit
    if approach == "baseline":
        q1 = pc * (1 - pa)
        q2 = q1 + (1 - pc) * pa
        return q1, q2, 1.0, -1.0, 0.0
    if approach == "bayesian":
        return pa, 1.0, 1.0 - pc, -pc, -pc
    if approach == "conservative":
        return pa, 1.0, -1.0, 0.0, 0.0
    raise ValueError(f"unknown approach {approach!r}")


def category_cuts(model: ErrorModel) -> tuple[float, float, float, float, float]:
    t1 = model.o1
    t2 = t1 + model.u1
    t3 = t2 + model.o2
    t4 = t3 + model.u2
    t5 = t4 + model.marginal_rate
    return t1, t2, t3, t4, t5


def stream_law(model: ErrorModel, approach: str) -> dict[float, float]:
    """Exact per-draw discrepancy distribution (value -> probability)."""
    q1, q2, v1, v2, v3 = marginal_branch(model, approach)
    law: dict[float, float] = {}

    def add(value: float, p: float) -> None:
        if p > 0:
            law[value] = law.get(value, 0.0) + p

    add(1.0, model.o1)
    add(-1.0, model.u1)
    add(2.0, model.o2)
    add(-2.0, model.u2)
    m = model.marginal_rate
    add(v1, m * q1)
    add(v2, m * (q2 - q1))
    add(v3, m * (1 - q2))
    add(0.0, 1 - sum(law.values()))
    return law


def gen_discrepancy_stream(
    model: ErrorModel, approach: str, rng_seed
) -> Iterator[float]:
    """Infinite per-draw discrepancy sample stream.

    Consumes one uniform per draw plus one per marginal branch, in the same
    order as the trial kernels, so a stream fed through the sequential test
    reproduces the kernel's draw counts exactly.
    """
    t1, t2, t3, t4, t5 = category_cuts(model)
    q1, q2, v1, v2, v3 = marginal_branch(model, approach)
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    while True:
        u = rng.random()
        if u < t1:
            yield 1.0
        elif u < t2:
            yield -1.0
        elif u < t3:
            yield 2.0
        elif u < t4:
            yield -2.0
        elif u < t5:
            v = rng.random()
            yield v1 if v < q1 else (v2 if v < q2 else v3)
        else:
            yield 0.0


def trial_seed_sequences(
    seed: int, cell_key: tuple[int, ...], trials: int
) -> list[np.random.SeedSequence]:
    """Splittable per-trial seeds: stable under trial count and parallelism."""
    return np.random.SeedSequence(entropy=seed, spawn_key=cell_key).spawn(trials)


def _kernel_args(model: ErrorModel, approach: str, settings: TestSettings):
    delta = declared_delta(model, approach)
    config = KaplanMarkovConfig(
        delta=delta, gamma=settings.gamma, alpha=settings.alpha
    )
    t1, t2, t3, t4, t5 = category_cuts(model)
    q1, q2, v1, v2, v3 = marginal_branch(model, approach)
    lf = config.log_factor
    return (
        t1, t2, t3, t4, t5,
        lf(1.0), lf(-1.0), lf(2.0), lf(-2.0), lf(0.0),
        q1, q2,
        lf(v1), lf(v2), lf(v3),
        math.log(settings.alpha),
        settings.max_draws if settings.max_draws is not None else model.size,
    )


def _run_chunk(args, seed_seqs: Sequence[np.random.SeedSequence]) -> np.ndarray:
    bgs = [np.random.PCG64(ss) for ss in seed_seqs]
    return kernels.simulate_trials(*args, bgs)


def worker_count() -> int:
    return max(1, int(os.environ.get("MARKAUDIT_WORKERS", "1")))


def simulate_cell(
    model: ErrorModel,
    approach: str,
    settings: TestSettings,
    trials: int,
    seed: int,
    cell_key: tuple[int, ...] = (0,),
) -> np.ndarray:
    """Draw counts for `trials` independent audits of one parameter cell."""
    if trials < 1:
        raise ValueError("trials must be positive")
    args = _kernel_args(model, approach, settings)
    seqs = trial_seed_sequences(seed, cell_key, trials)
    workers = worker_count()
    if workers == 1 or trials < 2 * workers:
        return _run_chunk(args, seqs)
    chunks = [seqs[i::workers] for i in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(_run_chunk, [args] * workers, chunks))
    out = np.empty(trials, dtype=np.int64)
    for i, res in enumerate(results):
        out[i::workers] = res
    return out


@dataclass(frozen=True)
class TrialStats:
    """Aggregate draw counts; p95 is the nearest-rank order statistic."""

    mean: float
    stdev: float
    median: float
    p95: int
    trials: int
    seed: int

    @classmethod
    def from_draws(cls, draws: np.ndarray, seed: int) -> "TrialStats":
        n = len(draws)
        ordered = np.sort(draws)
        rank = math.ceil(0.95 * n)
        return cls(
            mean=float(np.mean(draws)),
            stdev=float(np.std(draws, ddof=1)) if n > 1 else 0.0,
            median=float(np.median(draws)),
            p95=int(ordered[rank - 1]),
            trials=n,
            seed=seed,
        )


# -- the published tables -------------------------------------------------------

TABLE1_MARGINS = (0.01, 0.02, 0.03)
TABLE2_PMS = (1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.0)
TABLE3_PCVRS = (1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.0)
TABLE3_OFFSETS = (0.4, 0.2, 0.0, -0.2, -0.4)


@dataclass(frozen=True)
class TableCell:
    row_label: float
    approach: str
    stats: TrialStats
    column_label: Optional[float] = None  # table 3's audit-probability offset


def run_table(
    table: int,
    trials: int,
    seed: int,
    settings: TestSettings = TestSettings(),
    approaches: Sequence[str] = APPROACHES,
) -> list[TableCell]:
    """Monte Carlo grid for one of the published sample-size tables."""
    for a in approaches:
        if a not in APPROACHES:
            raise ValueError(f"unknown approach {a!r}")
    cells: list[TableCell] = []
    if table == 1:
        for i, mu in enumerate(TABLE1_MARGINS):
            model = ErrorModel.symmetric(margin=mu, p_m=0.5)
            for a in approaches:
                key = (1, i, APPROACHES.index(a))
                draws = simulate_cell(model, a, settings, trials, seed, key)
                cells.append(TableCell(mu, a, TrialStats.from_draws(draws, seed)))
    elif table == 2:
        for i, p_m in enumerate(TABLE2_PMS):
            model = ErrorModel.symmetric(margin=0.01, p_m=p_m)
            for a in approaches:
                key = (2, i, APPROACHES.index(a))
                draws = simulate_cell(model, a, settings, trials, seed, key)
                cells.append(TableCell(p_m, a, TrialStats.from_draws(draws, seed)))
    elif table == 3:
        for i, p_cvr in enumerate(TABLE3_PCVRS):
            for j, off in enumerate(TABLE3_OFFSETS):
                p_audit = round(p_cvr + off, 10)
                if not 0 <= p_audit <= 1:
                    continue
                model = ErrorModel(margin=0.01, p_cvr=p_cvr, p_audit=p_audit)
                for a in approaches:
                    key = (3, i, j, APPROACHES.index(a))
                    draws = simulate_cell(model, a, settings, trials, seed, key)
                    cells.append(
                        TableCell(p_cvr, a, TrialStats.from_draws(draws, seed), off)
                    )
    else:
        raise ValueError(f"no such table: {table}")
    return cells


def table_csv(
    table: int,
    cells: list[TableCell],
    trials: int,
    seed: int,
    settings: TestSettings = TestSettings(),
) -> str:
    """Stable CSV rendering with a metadata header (no timestamps)."""
    lines = [
        "# markaudit simulate",
        f"# table={table} trials={trials} seed={seed} "
        f"alpha={settings.alpha!r} gamma={settings.gamma!r}",
        "# delta: baseline/bayesian=margin+p_cvr*marginal_rate, conservative=margin",
        "# kernel=" + kernels.ACTIVE,
    ]
    approaches = []
    for c in cells:
        if c.approach not in approaches:
            approaches.append(c.approach)
    if table in (1, 2):
        label = "mu" if table == 1 else "p_m"
        header = [label]
        for a in approaches:
            header += [f"{a}_mean", f"{a}_stdev", f"{a}_median", f"{a}_p95"]
        lines.append(",".join(header))
        rows = sorted({c.row_label for c in cells}, reverse=(table == 2))
        if table == 1:
            rows = sorted(rows)
        for r in rows:
            out = [repr(r)]
            for a in approaches:
                cell = next(
                    c for c in cells if c.row_label == r and c.approach == a
                )
                s = cell.stats
                out += [repr(s.mean), repr(s.stdev), repr(s.median), str(s.p95)]
            lines.append(",".join(out))
    else:
        header = ["p_cvr"]
        for off in TABLE3_OFFSETS:
            for a in approaches:
                header.append(f"off{off:+.1f}_{a}_p95")
        lines.append(",".join(header))
        for r in TABLE3_PCVRS:
            out = [repr(r)]
            for off in TABLE3_OFFSETS:
                for a in approaches:
                    match = [
                        c
                        for c in cells
                        if c.row_label == r
                        and c.column_label == off
                        and c.approach == a
                    ]
                    out.append(str(match[0].stats.p95) if match else "")
            lines.append(",".join(out))
    return "\n".join(lines) + "\n"


# -- explicit synthetic elections -------------------------------------------------

WINNER, LOSER = "A", "B"


def _count(rate: float, size: int, what: str) -> int:
    raw = rate * size
    n = round(raw)
    if abs(raw - n) > 1e-6:
        raise ValueError(f"{what} rate {rate} times size {size} is not integral")
    return n


@dataclass(frozen=True)
class _Composition:
    n_w: int
    n_l: int
    n_o1: int
    n_u1: int
    n_o2: int
    n_u2: int
    n_marginal: int


def _compose(model: ErrorModel) -> _Composition:
    s = model.size
    n_m = _count(model.marginal_rate, s, "marginal")
    n_o1 = _count(model.o1, s, "o1")
    n_u1 = _count(model.u1, s, "u1")
    n_o2 = _count(model.o2, s, "o2")
    n_u2 = _count(model.u2, s, "u2")
    n_norm = s - n_m - n_o1 - n_u1 - n_o2 - n_u2
    lead = _count(model.margin, s, "margin") - n_o1 - n_o2 + n_u2
    if (n_norm + lead) % 2 != 0:
        raise ValueError("composition is infeasible: non-integral clean split")
    n_w = (n_norm + lead) // 2
    n_l = n_norm - n_w
    if n_w < 0 or n_l < 0:
        raise ValueError("composition is infeasible: negative clean-row count")
    return _Composition(n_w, n_l, n_o1, n_u1, n_o2, n_u2, n_m)


def gen_election_and_cvrs(
    model: ErrorModel,
    approach: str,
    fidelity: str = "declared",
    seed: int = 0,
    epsilon: float = 0.0,
) -> tuple[Election, dict]:
    """Materialize the abstract stream as a concrete two-candidate election.

    fidelity:
      declared    -- the table makes the claims the error model describes
                     (errors and all); its row-level discrepancy law against a
                     uniform draw equals ``stream_law``.
      canonical   -- the table copies the ground truth exactly.
      consistent  -- canonical, then ceil(epsilon*S) rows replaced by disjoint
                     claims (set-valued tables only).
      adversarial -- claims with the candidates swapped, so the true loser is
                     declared the winner.
    """
    comp = _compose(model)
    vote_w = Interpretation((1, 0))
    vote_l = Interpretation((0, 1))
    blank = Interpretation((0, 0))
    conservative = approach == "conservative"
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))

    truth_rows: list[tuple[object, object]] = []  # (truth spec, claim spec)
    # clean rows
    truth_rows += [(vote_w, vote_w)] * comp.n_w
    truth_rows += [(vote_l, vote_l)] * comp.n_l
    # error rows: claim vs ground truth per category
    truth_rows += [(blank, vote_w)] * comp.n_o1
    truth_rows += [(vote_w, blank)] * comp.n_u1
    truth_rows += [(vote_l, vote_w)] * comp.n_o2
    truth_rows += [(vote_w, vote_l)] * comp.n_u2

    n_claim_w = _count(model.p_cvr, comp.n_marginal, "p_cvr*marginal") if not conservative else 0

    ballots: list[Ballot] = []
    claims: list[tuple[str, object]] = []
    width = len(str(model.size))
    for i, (truth, claim) in enumerate(truth_rows):
        ident = f"b{i:0{width}d}"
        if conservative:
            ballots.append(Ballot(id=ident, interps=frozenset({truth})))
            claims.append((ident, frozenset({claim})))
        else:
            ballots.append(
                Ballot(id=ident, dist=InterpretationDistribution.point_mass(truth))
            )
            claims.append((ident, InterpretationDistribution.point_mass(claim)))
    for j in range(comp.n_marginal):
        ident = f"b{len(truth_rows) + j:0{width}d}"
        if conservative:
            ballots.append(Ballot(id=ident, interps=frozenset({vote_w, blank})))
            claims.append((ident, frozenset({vote_w, blank})))
        else:
            truth_dist = InterpretationDistribution.from_mapping(
                {vote_w: model.p_audit, blank: 1 - model.p_audit}
                if 0 < model.p_audit < 1
                else {vote_w: 1.0} if model.p_audit == 1 else {blank: 1.0}
            )
            ballots.append(Ballot(id=ident, dist=truth_dist))
            if approach == "bayesian":
                claim_dist = InterpretationDistribution.from_mapping(
                    {vote_w: model.p_cvr, blank: 1 - model.p_cvr}
                    if 0 < model.p_cvr < 1
                    else {vote_w: 1.0} if model.p_cvr == 1 else {blank: 1.0}
                )
            else:  # baseline commits each marginal row to a single reading
                claim_dist = InterpretationDistribution.point_mass(
                    vote_w if j < n_claim_w else blank
                )
            claims.append((ident, claim_dist))

    election = Election(candidates=(WINNER, LOSER), ballots=tuple(ballots))

    def build_cvr(rows):
        if conservative:
            return ConservativeCvr(candidates=election.candidates, rows=tuple(rows))
        return BayesianCvr(candidates=election.candidates, rows=tuple(rows))

    out: dict[str, object] = {}
    if fidelity == "declared":
        out["declared"] = build_cvr(claims)
    elif fidelity == "canonical":
        out["canonical"] = (
            canonical_cvr(election) if conservative else cvr_from_truth(election)
        )
    elif fidelity == "consistent":
        if not conservative:
            raise ValueError("consistent(epsilon) fidelity needs set-valued tables")
        if not 0 <= epsilon <= 1:
            raise ValueError("epsilon outside [0, 1]")
        base = list(canonical_cvr(election).rows)
        bad = math.ceil(epsilon * len(base))
        complement = {
            frozenset({vote_w}): frozenset({vote_l}),
            frozenset({vote_l}): frozenset({vote_w}),
            frozenset({blank}): frozenset({vote_w, vote_l}),
        }
        for idx in rng.choice(len(base), size=bad, replace=False):
            ident, interps = base[idx]
            base[idx] = (
                ident,
                complement.get(interps, frozenset({Interpretation((1, 1))})),
            )
        out["consistent"] = build_cvr(base)
    elif fidelity == "adversarial":
        swapped = []
        for ident, claim in claims:
            if conservative:
                swapped.append(
                    (ident, frozenset(Interpretation(i.bits[::-1]) for i in claim))
                )
            else:
                swapped.append(
                    (
                        ident,
                        InterpretationDistribution(
                            tuple(
                                (Interpretation(i.bits[::-1]), p)
                                for i, p in claim.support
                            )
                        ),
                    )
                )
        out["adversarial"] = build_cvr(swapped)
        out["truthful"] = build_cvr(claims)
    else:
        raise ValueError(f"unknown fidelity {fidelity!r}")
    return election, out
