"""
Autoencoder Architecture
Layer ladder descriptors and the ordered parameter container.

Parameter order (documented checkpoint layout):
    encoder conv1 K,b · conv2 K,b · conv3 K,b · encoder dense W,b ·
    decoder dense W,b · decoder conv1 K,b · conv2 K,b · conv3 K,b
"""
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from utils.errors import FormatError, InvalidShapeError


@dataclass(frozen=True)
class ArchSpec:
    """Three conv/pool stages, a dense bridge to the latent space, mirrored decoder."""
    name: str
    input_px: int
    maps: Tuple[int, int, int]
    latent: int

    @property
    def bottleneck_px(self) -> int:
        return self.input_px // 8

    @property
    def flat(self) -> int:
        return self.maps[2] * self.bottleneck_px ** 2

    def param_shapes(self) -> List[Tuple[str, Tuple[int, ...]]]:
        m1, m2, m3 = self.maps
        return [
            ("enc.conv1.k", (m1, 1, 3, 3)), ("enc.conv1.b", (m1,)),
            ("enc.conv2.k", (m2, m1, 3, 3)), ("enc.conv2.b", (m2,)),
            ("enc.conv3.k", (m3, m2, 3, 3)), ("enc.conv3.b", (m3,)),
            ("enc.dense.w", (self.latent, self.flat)), ("enc.dense.b", (self.latent,)),
            ("dec.dense.w", (self.flat, self.latent)), ("dec.dense.b", (self.flat,)),
            ("dec.conv1.k", (m2, m3, 3, 3)), ("dec.conv1.b", (m2,)),
            ("dec.conv2.k", (m1, m2, 3, 3)), ("dec.conv2.b", (m1,)),
            ("dec.conv3.k", (1, m1, 3, 3)), ("dec.conv3.b", (1,)),
        ]

    @property
    def param_count(self) -> int:
        return int(sum(np.prod(shape) for _, shape in self.param_shapes()))


FULL_ARCH = ArchSpec("dcn-v1", input_px=32, maps=(50, 20, 10), latent=20)
TWIN_ARCH = ArchSpec("dcn-twin", input_px=8, maps=(4, 3, 2), latent=3)

ARCHITECTURES: Dict[str, ArchSpec] = {a.name: a for a in (FULL_ARCH, TWIN_ARCH)}


def arch_by_name(name: str) -> ArchSpec:
    if name not in ARCHITECTURES:
        raise FormatError(f"unknown architecture {name!r}", "arch")
    return ARCHITECTURES[name]


@dataclass
class AutoencoderParams:
    """Encoder (W) and decoder (Z) tensors in checkpoint order."""
    arch: ArchSpec
    tensors: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        expected = self.arch.param_shapes()
        if len(self.tensors) != len(expected):
            raise InvalidShapeError(f"{self.arch.name}: expected {len(expected)} tensors, got {len(self.tensors)}")
        for (name, shape), t in zip(expected, self.tensors):
            if t.shape != shape:
                raise InvalidShapeError(f"{self.arch.name}: {name} must be {shape}, got {t.shape}")

    @property
    def names(self) -> List[str]:
        return [name for name, _ in self.arch.param_shapes()]

    @property
    def param_count(self) -> int:
        return int(sum(t.size for t in self.tensors))

    @property
    def dtype(self) -> np.dtype:
        return self.tensors[0].dtype

    @property
    def encoder(self) -> List[np.ndarray]:
        return self.tensors[:8]

    @property
    def decoder(self) -> List[np.ndarray]:
        return self.tensors[8:]

    def copy(self) -> "AutoencoderParams":
        return AutoencoderParams(self.arch, [t.copy() for t in self.tensors])

    def astype(self, dtype) -> "AutoencoderParams":
        return AutoencoderParams(self.arch, [t.astype(dtype) for t in self.tensors])

    def flatten(self) -> np.ndarray:
        return np.concatenate([t.reshape(-1) for t in self.tensors])

    @classmethod
    def unflatten(cls, arch: ArchSpec, flat: np.ndarray) -> "AutoencoderParams":
        if flat.size != arch.param_count:
            raise InvalidShapeError(f"{arch.name}: {flat.size} values for {arch.param_count} parameters")
        tensors, offset = [], 0
        for _, shape in arch.param_shapes():
            size = int(np.prod(shape))
            tensors.append(flat[offset:offset + size].reshape(shape).copy())
            offset += size
        return cls(arch, tensors)


def init_params(seed: int, arch: ArchSpec = FULL_ARCH, dtype=np.float32) -> AutoencoderParams:
    """He-scaled weights (std √(2/fan_in)), zero biases; identical values in any dtype."""
    rng = np.random.default_rng(seed)
    tensors = []
    for name, shape in arch.param_shapes():
        if name.endswith(".b"):
            tensors.append(np.zeros(shape, dtype=dtype))
            continue
        fan_in = shape[1] * 9 if len(shape) == 4 else shape[1]
        tensors.append((rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype))
    return AutoencoderParams(arch, tensors)
