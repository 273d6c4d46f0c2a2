"""Run configuration shared by the CLI subcommands."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .dataio import DEFAULT_DEPTH_SCALE, DEFAULT_SENTINEL
from .encoders import EgviaParams


@dataclass
class RunConfig:
    """Defaults for the full pipeline; every value is a CLI flag too."""

    egvia: EgviaParams = field(default_factory=EgviaParams)  # lam 0.5, alpha 45
    region_rows: int = 3
    region_cols: int = 7
    region_size: int = 1080
    region_stride: int = 720
    width: int = 4096
    height: int = 2048
    rgb_sampling: str = "bilinear"
    depth_sampling: str = "bilinear"
    normalize_overlap: bool = False
    depth_scale: float = DEFAULT_DEPTH_SCALE
    invalid_depth_sentinel: int = DEFAULT_SENTINEL
    output_dir: str | None = None

    def to_json(self) -> str:
        data = asdict(self)
        data["egvia"] = {"lam": self.egvia.lam, "alpha_deg": self.egvia.alpha_deg}
        return json.dumps(data, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        data = json.loads(text)
        egvia = data.pop("egvia", None)
        cfg = cls(**data)
        if egvia is not None:
            cfg.egvia = EgviaParams(**egvia)
        return cfg
