"""Election auditing with marginal-mark-aware cast-vote records.

Comparison audits (probabilistic and worst-case conventions), a competitive
audit for adjudicating rival tables, Monte Carlo sample-size studies, and a
live audit-session HTTP service.
"""
from .cvr import (
    BayesianCvr,
    ConservativeCvr,
    ConsistencyReport,
    DeclaredOutcome,
    bayesian_declared_outcome,
    canonical_cvr,
    conservative_declared_outcome,
    consistency_class,
    contradictory,
    cvr_from_truth,
    declared_outcome,
    dump_cvr,
    load_cvr,
    read_cvr,
    read_election,
    validity,
    write_cvr,
    write_election,
)
from .competitive import (
    AdvocacyErrorBounds,
    CompetitiveJudgeMachine,
    CompetitiveVerdict,
    DisagreementAnalysis,
    JudgeConfig,
    adjudicate,
    binomial_tail,
    disagreement,
    disqualification_vote,
    theorem_bounds,
)
from .discrepancy import (
    DiscrepancySample,
    bayesian_discrepancy,
    conservative_discrepancy,
    cvr_discrepancy_bayesian,
    cvr_discrepancy_conservative,
    margin_lower_bound,
)
from .engine import (
    AuditTranscript,
    ComparisonAuditMachine,
    TestSettings,
    make_environment,
    run_bayesian_audit,
    run_conservative_audit,
)
from .model import (
    Ballot,
    ConservativeResult,
    Election,
    Interpretation,
    InterpretationDistribution,
    expected_vote,
    vote_bounds,
)
from .simkit import (
    APPROACHES,
    ErrorModel,
    TrialStats,
    declared_delta,
    gen_discrepancy_stream,
    gen_election_and_cvrs,
    run_table,
    simulate_cell,
    table_csv,
)
from .stattest import (
    KaplanMarkovConfig,
    KaplanMarkovTest,
    km_risk,
    km_test,
    test_risk_estimate,
    zero_stream_crossing_draw,
)

__version__ = "0.1.0"
