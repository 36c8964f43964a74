"""Trajectorial Doob maximal inequalities: exact per-path checkers and the
stochastic machinery used to verify them in expectation."""

from pathdoob.path_core import Path, running_max, summation_by_parts
from pathdoob.pathwise_ineq import (
    PathIneqReport,
    check_path_l1,
    check_path_l2,
    check_path_lp,
    eval_g,
    hedge_value,
    super_replication_check,
)
from pathdoob.pathwise_integral import (
    IntegralEstimate,
    PartitionSequence,
    SampledFunction,
    check_cont_path_lp,
    check_remark_cont_doob,
    integration_by_parts_discrete,
    pathwise_integral,
)
from pathdoob.models import (
    DoobDecomposition,
    PathSampler,
    TreeModel,
    doob_decompose,
    empirical_submartingale_drift,
    enumerate_paths,
    sample_path,
)
from pathdoob.azema_yor import (
    AlphaConfig,
    StoppedBMSample,
    equality_attainment_report,
    mu_cdf,
    mu_density,
    mu_pnorm,
    mu_quantile,
    simulate_tau_alpha,
)
from pathdoob.verification import (
    MCReport,
    PathEnsemble,
    psi,
    psi_invert,
    verify_cbp,
    verify_doob_l1,
    verify_doob_lp,
    verify_optimal1,
    verify_quallp,
    verify_sharkdoob_lp,
    verify_strong_doob,
)

__version__ = "0.1.0"
