"""Link-level simulator for RIS-assisted SIMO-OFDM uplinks with
differential (non-coherent) data-aided beam training."""

__version__ = "0.1.0"

from .arrays import ArrayGeometry, steering_vector
from .channel import (ChannelRealization, ClusterSet, LinkStatistics,
                      cascade, effective_channel, sample_clusters,
                      synth_bs_ris, synth_direct, synth_ris_ue)
from .codebook import (Codebook, PhaseConfig, best_phase_config,
                       build_codebook, reflective_gain, upper_bound_reflective)
from .config import RunConfig, SystemConfig, load_config
from .engine import (FramePlan, MetricsReport, mobility_to_frame, plan_frame,
                     run_block, run_campaign, run_sinr_verification)
from .errors import ConfigurationError
