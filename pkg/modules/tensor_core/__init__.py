"""
Tensor Core Module
Dense layer kernels with analytic backward passes and a finite-difference oracle.
"""
from .layers import (
    Tensor, LayerGrad, ConvCache, PoolCache, DenseCache,
    conv2d, conv2d_backward,
    maxpool2, maxpool2_backward,
    upsample2, upsample2_backward,
    dense, dense_backward,
    reshape, reshape_backward,
    relu, relu_backward,
    sigmoid, sigmoid_backward,
    mse,
)
from .gradcheck import GradCheckReport, finite_diff_check, check_layer, layer_suite
