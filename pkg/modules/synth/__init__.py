"""
Synthetic Phantom Module
Texture phantom cohorts with ground truth, and the clustering-agreement oracle.
"""
from .phantom import (
    OUTSIDE, TEXTURE_A, TEXTURE_B, SPECTRAL_MARGIN, MANIFEST_NAME, TRUTH_TABLE_NAME,
    PhantomSpec, PhantomTruth, CohortResult,
    case_name, cohort_grades, ellipsoid_roi, paint_blobs, smooth_texture, stripe_texture,
    band_power_difference, generate_phantom, generate_cohort, truth_path_for, write_truth_table,
)
from .scoring import (
    SCORE_FILE_NAME, ClusteringScore,
    clustering_agreement, window_truth, score_clustering, score_cohort, write_clustering_score,
)
