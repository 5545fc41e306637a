"""Network hyperparameter specs, serializable into run configs and checkpoints."""

from __future__ import annotations

from dataclasses import dataclass, asdict

SUPPORTED_SCALES = (2, 3, 4, 8)

# upsampling staging per linear factor (stride per stage)
UPSAMPLE_STAGES = {2: (2,), 3: (3,), 4: (2, 2), 8: (2, 2, 2)}


class SpecError(ValueError):
    """Invalid network specification."""


@dataclass(frozen=True)
class GeneratorSpec:
    n_rrdb_blocks: int = 8
    base_channels: int = 64
    growth_channels: int = 32
    linear_scale: int = 4
    residual_scaling: float = 0.2
    channels: int = 3

    def __post_init__(self):
        if self.linear_scale not in SUPPORTED_SCALES:
            raise SpecError(
                f"linear_scale {self.linear_scale} not in supported set {SUPPORTED_SCALES}"
            )
        if self.n_rrdb_blocks < 1:
            raise SpecError("n_rrdb_blocks must be >= 1")
        if not (0.0 < self.residual_scaling <= 1.0):
            raise SpecError("residual_scaling must lie in (0, 1]")

    @property
    def upsample_stages(self) -> tuple[int, ...]:
        return UPSAMPLE_STAGES[self.linear_scale]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        return cls(**d)


@dataclass(frozen=True)
class CriticSpec:
    input_size: tuple[int, int] = (64, 64)
    conv_stages: tuple[tuple[int, int], ...] = (
        (64, 1), (64, 2), (128, 1), (128, 2), (256, 1), (256, 2), (512, 1), (512, 2),
    )
    leak: float = 0.2
    channels: int = 3
    head_width: int = 128

    def __post_init__(self):
        if self.leak <= 0:
            raise SpecError("leak must be > 0")
        if not self.conv_stages:
            raise SpecError("conv_stages must be nonempty")
        stride_product = self.min_input_side
        h, w = self.input_size
        if min(h, w) < stride_product:
            raise SpecError(
                f"input size {self.input_size} smaller than stride pyramid ({stride_product})"
            )

    @property
    def min_input_side(self) -> int:
        prod = 1
        for _, stride in self.conv_stages:
            prod *= stride
        return prod

    def to_dict(self) -> dict:
        return {
            "input_size": list(self.input_size),
            "conv_stages": [list(s) for s in self.conv_stages],
            "leak": self.leak,
            "channels": self.channels,
            "head_width": self.head_width,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CriticSpec":
        return cls(
            input_size=tuple(d["input_size"]),
            conv_stages=tuple(tuple(s) for s in d["conv_stages"]),
            leak=d.get("leak", 0.2),
            channels=d.get("channels", 3),
            head_width=d.get("head_width", 128),
        )


def small_critic_spec(input_size: tuple[int, int]) -> CriticSpec:
    """Reduced critic for toy runs and small patches."""
    return CriticSpec(
        input_size=input_size,
        conv_stages=((32, 1), (32, 2), (64, 1), (64, 2)),
        head_width=64,
    )
