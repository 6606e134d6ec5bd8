"""ewfs: exact simulator and reasoning auditor for the extended Wigner's-friend experiment.

The package is organized bottom-up:

* :mod:`ewfs.qcore`        dense kets, operators, density matrices, partial
  trace and dephasing on small named-register spaces;
* :mod:`ewfs.measurement`  labeled projective measurements, deterministic
  basis completion, and their unitary dilations onto memory registers;
* :mod:`ewfs.protocol`     the four-agent round as a state machine, exact
  joint distributions and reproducible Monte Carlo under collapse or
  unitary semantics;
* :mod:`ewfs.perspectives` the state-assignment engine (collapse-aware,
  unitary-global, own-record-pure) and distinguishability measures;
* :mod:`ewfs.reasoning`    the agents' statements, rule sets, certainty
  chaining, and the contradiction audit;
* :mod:`ewfs.cli`          the ``ewfs`` command-line front end.
"""

from .measurement import (
    DilationSpec,
    ImpossibleOutcomeError,
    MeasurementSpec,
    build_dilation,
    complete_basis,
    measure_collapse,
    outcome_distribution,
    readout_memory,
)
from .perspectives import (
    AssignmentRule,
    NotEvaluableError,
    Perspective,
    assign,
    compare,
    predict,
)
from .protocol import (
    JointDistribution,
    ProtocolConfig,
    RoundRecord,
    exact_joint,
    run_round,
    run_until_halt,
    sample_records,
)
from .qcore import (
    DensityMatrix,
    Operator,
    SpaceLayout,
    StateVector,
    dephase,
    inner,
    partial_trace,
    tensor,
)
from .reasoning import AuditReport, RuleSet, Statement, audit, chain, evaluate

__version__ = "0.1.0"

__all__ = [
    "AssignmentRule",
    "AuditReport",
    "DensityMatrix",
    "DilationSpec",
    "ImpossibleOutcomeError",
    "JointDistribution",
    "MeasurementSpec",
    "NotEvaluableError",
    "Operator",
    "Perspective",
    "ProtocolConfig",
    "RoundRecord",
    "RuleSet",
    "SpaceLayout",
    "Statement",
    "StateVector",
    "__version__",
    "assign",
    "audit",
    "build_dilation",
    "chain",
    "compare",
    "complete_basis",
    "dephase",
    "evaluate",
    "exact_joint",
    "inner",
    "measure_collapse",
    "outcome_distribution",
    "partial_trace",
    "predict",
    "readout_memory",
    "run_round",
    "run_until_halt",
    "sample_records",
    "tensor",
]
