"""Adaptive linear and decision-feedback equalizers with online length control."""

from .adaptive import (
    DivergenceError,
    LmsState,
    NlmsState,
    RlsState,
    VslmsState,
    lms_update,
    max_stable_mu,
    nlms_update,
    rls_init,
    rls_update,
    vslms_update,
)
from .channels import (
    ChannelProfile,
    FadedProfileChannel,
    JakesTapGenerator,
    MarkovChannel,
    ScenarioScript,
    StaticChannel,
    cost207_tu_reduced,
    jakes_gain,
    load_profile,
    markov_step,
    normalize_power,
    scenario_at,
)
from .equalizers import (
    DfeState,
    FbfLengthController,
    LeLengthController,
    SegmentedLe,
    dfe_step,
    fbf_length_update,
    le_length_update,
    le_step,
    optimal_dfe_delay,
    rls_resize_dfe_fbf,
    rls_resize_le,
)
from .signals import SeededRng, generate_noise, generate_symbols, noise_variance_from_ebno
from .sim import (
    MetricsRecord,
    SimulationConfig,
    ber,
    count_operations,
    run_experiment,
    sweep_fixed_lengths,
    windowed_mse,
)
from .wiener import (
    CorrelationSystem,
    PredictionInputs,
    build_dfe_correlations,
    build_le_correlations,
    combined_response,
    eigenvalue_spread,
    isi_decomposition,
    lms_transient_bound,
    optimum_lambda,
    optimum_mu,
    predict_mse_lms_dfe,
    predict_mse_lms_le,
    predict_mse_rls_dfe,
    predict_mse_rls_le,
    wiener_solve,
)

__version__ = "0.1.0"
