"""Runtime bundle of an ambient, a boundary hypersurface and numeric settings."""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .hypersurface import build_quadrature, weighted_area, weighted_enclosed_volume
from .volume import default_schedule


@dataclass
class ProblemSetup:
    ambient: object
    hypersurface: object
    resolution: int = 24
    a: float = 0.0
    k: float = 0.0
    m: Optional[float] = None
    schedule: Optional[np.ndarray] = None
    avr_center: Optional[list] = None
    ray_max: float = 100.0
    eq_tol: float = 1e-3
    hypothesis_tol: float = 1e-10
    mc_samples: int = 0
    seed: int = 42
    threads: int = 1
    name: str = "unnamed"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.m is None:
            self.m = self.ambient.m_synthetic
        if self.schedule is None:
            self.schedule = default_schedule(gaussian=self.ambient.weight.name == "gaussian")
        self.schedule = np.asarray(self.schedule, dtype=float)

    @property
    def n(self):
        return self.ambient.n

    @cached_property
    def grid(self):
        return build_quadrature(self.hypersurface, self.ambient, self.resolution)

    @cached_property
    def enclosed_volume(self):
        return weighted_enclosed_volume(self.hypersurface, self.ambient,
                                        resolution=self.resolution)

    @cached_property
    def boundary_volume(self):
        return weighted_area(self.grid)
