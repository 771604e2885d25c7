"""Estimator configuration shared across the sampling and quadrature code."""
from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class EstimatorConfig:
    """Knobs for every expectation estimate in the package.

    seed / samples / chunk_size control the counter-based sample streams;
    quad_order is the per-axis Gauss-Hermite order; mix_order the
    Gauss-Legendre order used for the interpolation-time integrals.

    method selects the expectation strategy: "auto" uses tensor-grid
    quadrature up to quad_dim_limit dimensions (and while the predicted
    tensor size stays under quad_cell_limit) and Monte Carlo beyond.
    """

    seed: int = 42
    samples: int = 1_000_000
    chunk_size: int = 262_144
    quad_order: int = 20
    mix_order: int = 32
    method: str = "auto"  # auto | quadrature | monte_carlo
    quad_dim_limit: int = 3
    quad_cell_limit: int = 6_000_000
    point_samples: int = 400        # paired draws for single-point kernel MC
    nested_samples: int = 200_000   # outer draws for nested identity MC
    eval_budget: int = 10_000_000   # innermost-evaluation cap, nested kernels
    sign_tol: float = 1e-10         # |value| below this counts as zero sign

    def with_(self, **kwargs) -> "EstimatorConfig":
        return replace(self, **kwargs)

    def validate(self) -> None:
        if self.seed < 0 or self.seed >= 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        for name in ("samples", "chunk_size", "quad_order", "mix_order",
                     "point_samples", "nested_samples", "eval_budget"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.quad_order > 64:
            raise ValueError("quad_order above 64 is not supported")
        if self.method not in ("auto", "quadrature", "monte_carlo"):
            raise ValueError(f"unknown method {self.method!r}")
