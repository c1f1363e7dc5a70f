"""
Net Module
Convolutional autoencoder (encoder f, decoder g), joint loss gradients and checkpoints.
"""
from .architecture import ArchSpec, FULL_ARCH, TWIN_ARCH, ARCHITECTURES, AutoencoderParams, arch_by_name, init_params
from .autoencoder import (
    LossAndGrad, encode, decode, cluster_loss, forward_loss_grad, autoencoder_check,
)
from .checkpoint import Checkpoint, read_checkpoint, write_checkpoint
