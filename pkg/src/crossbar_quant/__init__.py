"""Sneak-path readback channel of resistive crossbars: quantizer design and detection."""

from .channel import (
    ChannelParams,
    PathConfig,
    SneakPathType,
    cell_path_config,
    count_arrangements,
    mc_type_histogram,
    p_lambda,
    rho,
    sample_array,
    sample_reads,
    sneak_mixture,
    solve_alpha,
    transition_pdf,
    type_distribution,
)
from .ecc import BchCode, llr_from_symbol, llr_table
from .map_detector import (
    BepEstimate,
    bep_map_mc,
    bep_map_quadrature_1d,
    likelihood,
    log_likelihood,
    map_detect,
)
from .quantizer import (
    FineGrid,
    QuantizedChannel,
    Quantizer,
    design_dp,
    design_exhaustive,
    fine_grid,
    mi_multiread_exact_mc,
    mutual_information,
    partial_cond_entropy,
    quantized_channel,
    quantized_transition,
)
from .threshold import (
    BacChannel,
    ThresholdDetector,
    bac_from_threshold,
    bac_mi,
    baseline_single_read_threshold,
    mi_derivative,
    optimize_threshold_bisection,
    threshold_bep,
    threshold_detect,
)

__version__ = "0.1.0"
