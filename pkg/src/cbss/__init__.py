"""Critical branching symmetric stable processes and the tail of their maximal displacement.

Three independent routes to ``u(x) = P{M >= x}``: particle simulation
(:mod:`cbss.cbss`), the half-line fractional boundary value problem
(:mod:`cbss.bvp`) and the Feynman-Kac fixed point (:mod:`cbss.feynman_kac`).
"""

from ._validation import NumericalError
from .branching import (
    Fate,
    GWTree,
    TreeNode,
    population_at,
    progeny_pmf,
    progeny_tail,
    sample_progeny,
    sample_tree,
    survival_prob_exact,
)
from .bvp import (
    Grid,
    GridFunction,
    SolverConfig,
    comparison_check,
    f_scaling_check,
    frac_laplacian_apply,
    solve_bvp,
)
from .cbss import (
    CbssConfig,
    RealizationResult,
    TailEstimate,
    estimate_tail,
    occupation_count,
    simulate_realization,
)
from .estimators import BVPTail, FeynmanKacTail, MonteCarloTail
from .feynman_kac import (
    CandidateU,
    FKEstimate,
    exp_jump_expectation,
    fk_estimate,
    fk_fixed_point,
    martingale_check,
    path_integral,
)
from .levy_path import (
    FirstPassageRecord,
    PathConfig,
    SamplePath,
    Scheme,
    first_passage_down,
    first_passage_up,
    jump_independence_check,
    overshoot_conditional_tail,
    running_max,
    simulate_path,
)
from .stable import (
    StableParams,
    StableSample,
    char_exponent_scale,
    levy_tail_mass,
    sample_stable,
    stable_tail,
)

__version__ = "0.1.0"
