"""Training configuration."""

from __future__ import annotations

from dataclasses import dataclass

TASKS = ("segmentation", "regression")
BASE_WEIGHTS = ("imagenet", "cityscapes_binary", "none")

# effective downsampling: stride 4 X deepest pyramid grid for the segmenter,
# three stride-2 stages for the regressor
DOWNSAMPLE = {"segmentation": 16, "regression": 8}


@dataclass(frozen=True)
class TrainSpec:
    task: str = "segmentation"
    base_weights: str = "none"
    epochs: int = 40
    batch_size: int = 8
    learning_rate: float = 3e-3
    input_resolution: int = 64

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.base_weights not in BASE_WEIGHTS:
            raise ValueError(f"unknown base_weights {self.base_weights!r}")
        if self.epochs <= 0 or self.batch_size <= 0 or self.learning_rate <= 0:
            raise ValueError("epochs, batch_size, learning_rate must be positive")
        factor = DOWNSAMPLE[self.task]
        if self.input_resolution <= 0 or self.input_resolution % factor:
            raise ValueError(
                f"input_resolution must be a positive multiple of {factor} for {self.task}"
            )
