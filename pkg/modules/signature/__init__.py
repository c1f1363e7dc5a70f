"""
Signature Module
Cluster-proportion signatures and per-window label maps over a region of interest.
"""
from .sliding import (
    Signature, WindowLabel, LabelMap,
    window_centers, proportions_from_labels, compute_signature, signatures_for_manifest,
)
from .tables import (
    signature_columns, write_signature_table, read_signature_table,
    write_label_map_csv, read_label_map_csv, top_cluster_maps,
)
