"""Training configuration and the stepped learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

from ..losses import LossWeights

VARIANTS = ("srnet", "srnet_w", "t1", "t1_t2")

# which of the four per-mini-batch stages each variant runs
_STAGES = {
    "srnet": frozenset({1}),
    "srnet_w": frozenset({1}),
    "t1": frozenset({1, 2, 4}),
    "t1_t2": frozenset({1, 2, 3, 4}),
}


@dataclass(frozen=True)
class TrainConfig:
    total_iters: int = 500_000
    base_lr: float = 1e-4
    decay_factor: float = 0.5
    decay_interval: int = 100_000
    batch_size: int = 16
    linear_scale: int = 4
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    init_seed: int = 0
    checkpoint_interval: int = 10_000
    variant: str = "t1_t2"
    roi_patch_size: int = 64
    roi_max_patches: int = 4
    roi_coverage_tau: float = 0.1
    crop_size: int | None = None
    pretrain_iters: int = 0
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    debug_isolation: bool = False

    def __post_init__(self):
        if self.total_iters <= 0:
            raise ValueError("total_iters must be > 0")
        if not (0.0 < self.decay_factor <= 1.0):
            raise ValueError("decay_factor must lie in (0, 1]")
        if self.decay_interval <= 0:
            raise ValueError("decay_interval must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant {self.variant!r} not in {VARIANTS}")
        if self.crop_size is not None and self.crop_size % self.linear_scale != 0:
            raise ValueError("crop_size must be a multiple of linear_scale")

    @property
    def stages(self) -> frozenset:
        return _STAGES[self.variant]

    @property
    def edge_weighted(self) -> bool:
        return self.variant == "srnet_w"

    @property
    def effective_weights(self) -> LossWeights:
        """Loss weights with critic terms gated by the variant."""
        w = self.weights
        lam1 = w.lambda_t1 if 2 in self.stages else 0.0
        lam2 = w.lambda_t2 if 3 in self.stages else 0.0
        return LossWeights(eta=w.eta, lambda_t1=lam1, lambda_t2=lam2,
                           alpha_edge=w.alpha_edge)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weights"] = asdict(self.weights)
        d["adam_betas"] = list(self.adam_betas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if isinstance(d.get("weights"), dict):
            d["weights"] = LossWeights(**d["weights"])
        if "adam_betas" in d:
            d["adam_betas"] = tuple(d["adam_betas"])
        return cls(**d)


def lr_at_iteration(cfg: TrainConfig, iteration: int) -> float:
    """Stepped decay: base_lr * decay_factor ** floor(iteration / interval)."""
    if not (0 <= iteration < cfg.total_iters):
        raise ValueError(f"iteration {iteration} outside [0, {cfg.total_iters})")
    return cfg.base_lr * cfg.decay_factor ** (iteration // cfg.decay_interval)
