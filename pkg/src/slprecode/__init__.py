"""Symbol-level precoding for the multiuser QAM downlink.

Perturbed zero-forcing transmit shaping: per-symbol scales, phases, box
offsets, nullspace components, and integer (modulo) perturbations, optimized
for average or peak antenna power under hard per-user SEP margins.
"""

from .analysis import (
    SandwichReport,
    box_qp_lower_bound,
    sandwich_report,
    phase_rotation_spectrum_deviation,
    power_ratio_lower_bound,
    spacing_optimality_check,
    zf_ttp_closed_form,
)
from .harness import (
    CSV_HEADER,
    CcdfSeries,
    ExperimentConfig,
    csv_rows,
    draw_channel,
    draw_symbols,
    emit_csv,
    format_csv,
    gain_db,
    papr_per_antenna,
    run_experiment,
    run_papr_ccdf,
    run_ppap_ccdf,
    run_ttp_sweep,
    to_db,
    verify_sep,
)
from .lattice import (
    FrameLatticeFactory,
    LatticeProblem,
    brute_force_lattice,
    enumerate_candidates,
    map_candidates,
    p_sphere_encode,
    peak_value,
    quadratic_cost,
    real_metric_factor,
    sphere_decode,
)
from .numerics import (
    NotHermitian,
    NotPD,
    RankDeficient,
    gram_inverse,
    hermitian_eig,
    mahalanobis_sq,
    nullspace_basis,
    pseudo_inverse,
    qfunc,
    qfunc_inv,
)
from .olb import Infeasible, achieved_sinrs, olb_ppap_beamformers, olb_ttp_beamformers
from .optimize import (
    BlockPacking,
    LineSearchStalled,
    SmoothObjective,
    SolverConfig,
    apg_minimize,
    estimate_curvature,
    lse_grad,
    lse_max,
    pg_unit_modulus,
)
from .precoders import (
    MODULO_SCHEMES,
    PPAP_SCHEMES,
    TTP_SCHEMES,
    PrecodeResult,
    PrecoderSpec,
    objective_of,
    olb,
    ppap_value,
    run_scheme,
    run_spec,
    semi_zf_slp_ttp,
    slp_ppap,
    slp_ttp,
    ttp_value,
    vp_family,
    zf,
)
from .projection import (
    CoupledFeasibleSet,
    project_box,
    project_coupled,
    project_frame,
    project_unit_modulus,
)
from .signal_model import (
    ChannelState,
    Constellation,
    DimensionMismatch,
    FrameMargins,
    SepReport,
    SepSpec,
    ShapingVars,
    SymbolNotInConstellation,
    assemble_transmit,
    decompose_transmit,
    detect,
    detect_modulo,
    diamond,
    empirical_sep,
    make_channel_state,
    make_constellation,
    make_sep_spec,
    margin_residual,
    margins_for_frame,
    modulo_fold,
    stack_strands,
    unstack_strands,
    wilson_half_width,
    zf_shaping,
)

__version__ = "1.0.0"
