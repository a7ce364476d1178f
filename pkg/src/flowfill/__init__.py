"""Flow-guided video inpainting.

Masked content is removed by chaining adjacent optical flows into
direct target-to-source correspondence maps, pulling known colors in a
single bilinear sample per pixel with bi-directional agreement
checking, distributing a key-frame reference image through the same
maps, and classically completing whatever remains.
"""

from .fallback import assemble_completion_input, complete_frame
from .flow_complete import CompletedFlows, complete_flow, complete_sequence_flows
from .metrics import psnr, ssim
from .occlusion import merge_masks, overlay_positive
from .propagation import (
    CorrespondenceMap,
    chain_step,
    collect_bidirectional,
    collect_bidirectional_with_provenance,
    identity_map,
    verify_pair,
)
from .reference import (
    FallbackFillReferenceProvider,
    FileReferenceProvider,
    connection_count,
    ingest_reference,
    multi_key_loop,
    propagate_reference,
    select_key_frame,
)
from .types import (
    FlowField,
    Image,
    Mask,
    PropagationState,
    Sequence,
    ValidationError,
    validate_sequence,
)
from .warp import SampledValue, bilinear_sample, grid_warp

__version__ = "0.1.0"

__all__ = [
    "CompletedFlows",
    "CorrespondenceMap",
    "FallbackFillReferenceProvider",
    "FileReferenceProvider",
    "FlowField",
    "Image",
    "Mask",
    "PropagationState",
    "SampledValue",
    "Sequence",
    "ValidationError",
    "assemble_completion_input",
    "bilinear_sample",
    "chain_step",
    "collect_bidirectional",
    "collect_bidirectional_with_provenance",
    "complete_flow",
    "complete_frame",
    "complete_sequence_flows",
    "connection_count",
    "grid_warp",
    "identity_map",
    "ingest_reference",
    "merge_masks",
    "multi_key_loop",
    "overlay_positive",
    "propagate_reference",
    "psnr",
    "select_key_frame",
    "ssim",
    "validate_sequence",
    "verify_pair",
]
