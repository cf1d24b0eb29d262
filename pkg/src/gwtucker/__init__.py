"""Groupwise Tucker compression of multi-cell MIMO channel tensors."""

from .channel_model import (ChannelSet, GenParams, InterferenceScope, SystemTopology,
                            generate_channel_set)
from .decomposition import (CompressionRanks, GroupwiseFactorSet, SolveTrace, TuckerFactors,
                            groupwise_solve, hooi_individual, hosvd, individual_solve,
                            shared_solve)
from .metrics import sinr_error, storage_counts
from .sinr_pipeline import SinrReport, compressed_pipeline, flop_estimate, full_pipeline

__version__ = "0.1.0"
