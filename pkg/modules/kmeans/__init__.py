"""
K-Means Module
Standalone Lloyd clustering used to initialize and track DCN centroids.
"""
from .lloyd import (
    KMeansResult, assign, sse, squared_distances,
    kmeans_pp_seed, update_centroids, lloyd, fit_kmeans,
)
