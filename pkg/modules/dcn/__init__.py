"""
DCN Module
Joint autoencoder + k-means training (pretrain, centroid init, alternating updates).
"""
from .model import TrainConfig, DcnModel, EpochRecord, TrainLog
from .optimizer import Adam
from .trainer import (
    LossTerms, pretrain, init_centroids, initial_model,
    online_centroid_update, joint_train, train_dcn, evaluate_loss,
)
