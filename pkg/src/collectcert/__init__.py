"""Collective adversarial-robustness certificates for multi-output
classifiers on attributed graphs."""

__version__ = "0.1.0"

from .graph import (
    AXES,
    BudgetVector,
    Graph,
    PerturbationCounts,
    ReceptiveField,
    ThreatModel,
    is_admissible,
    load_graph,
    load_threat_model,
    perturbation_counts,
    receptive_field,
    save_graph,
)
from .smoothing import (
    RegionTable,
    SmoothedPrediction,
    SmoothingParams,
    clopper_pearson_lower,
    demo_predict,
    estimate_predictions,
    is_certified,
    load_predictions,
    np_lower_bound,
    region_distribution,
    sample_graph,
    save_predictions,
)
from .pareto import (
    BaseCertificate,
    compute_front,
    get_certificate,
    load_fronts,
    save_fronts,
    smallest_uncertifiable_radius,
)
from .lp import (
    LinearProblem,
    Solution,
    export_lp,
    parse_lp,
    relax_problem,
    solve_lp,
    solve_milp,
    verify_solution,
)
from .collective import (
    CertInstance,
    CertOptions,
    CertResult,
    build_instance,
    build_problem,
    certify,
    expected_problem_size,
    naive_certificate,
    sweep,
)
from .report import CertificationReport, average_certifiable_radius
from .errors import InputError, MonotonicityError
