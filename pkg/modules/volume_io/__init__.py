"""
Volume I/O Module
Volumes, masks and manifests on disk; ROI normalization; axial patch extraction.
"""
from .formats import (
    Volume, RoiMask, check_pair,
    read_volume, write_volume, read_mask, write_mask,
    read_label_map, write_label_map,
)
from .normalize import NormalizationStats, normalize
from .manifest import CaseRecord, read_manifest, write_manifest
from .patches import (
    ACCEPT_FRACTION, Patch, PatchProvenance, PatchSet, WindowGeometry,
    resample, mask_fraction, roi_slices, extract_patches, equal_shares, case_seed,
    extract_corpus, read_patchset, write_patchset, write_provenance,
)
