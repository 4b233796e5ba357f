"""Grant-free cell-free MIMO link simulation toolkit."""

from .exceptions import (
    ConfigError,
    DegenerateColumnError,
    FrameFormatError,
    NumericError,
    SolverError,
)
from .frames import (
    CsidcoConfig,
    FrameMatrix,
    csidco_design,
    dft_frame,
    frame_bounds,
    gaussian_frame,
    load_frame,
    mutual_coherence,
    save_frame,
    tighten,
    welch_bound,
)
from .channel import (
    ChannelRealization,
    LargeScale,
    Topology,
    build_topology,
    dbm_to_watt,
    noise_floor_dbm,
    pathloss,
    pathloss_db,
    sample_channel,
)
from .signal import (
    Constellation,
    RxFrame,
    TxFrame,
    assemble_tx,
    pilot_block,
    qpsk_gray,
    transmit,
)
from .init_ce import InitialEstimate, mmse_genie, mmv_amp, mns_estimate
from .bigabp import (
    BeliefState,
    DetectionResult,
    gabp_detect,
    hard_decision,
    normalization_constant,
    run_belief_consensus,
)
from .baselines import zf_detect
from .harness import (
    Scenario,
    SweepResult,
    TrialOutcome,
    run_sweep,
    run_trial,
    scenario_from_config,
    trial_seed,
)
from .metrics import (
    BerResult,
    SeTrackingReport,
    ber_with_lost_bits,
    block_error_rate,
    detection_errors,
    effective_throughput,
    nmse,
    se_tracking_report,
)

__version__ = "0.1.0"
