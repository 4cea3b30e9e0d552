from __future__ import annotations

from typing import Any, Optional
from urllib.parse import parse_qs, urlparse

from pydantic import BaseSettings as _BaseSettings, Field, validator

from .tracing import TraceScheme, TracerConfig

#: Quadrature schemes understood by :mod:`contchoreo.core.quadrature`.
QUADRATURE_SCHEMES = ("gauss-jacobi", "graded-midpoint")


class Settings(_BaseSettings):
    """System-wide settings."""

    #: Disable colorful logs (https://no-color.org)
    NO_COLOR: bool = Field(False, env="NO_COLOR")

    #: Default number of worker threads used by the sweeps. Command line flags win.
    THREADS: int = 1

    #: Force compensated, fixed-order reductions so repeated runs are byte-identical.
    REPRODUCIBLE: bool = False

    #: Default scheme for endpoint-singular integrands.
    QUADRATURE_SCHEME: str = "gauss-jacobi"
    #: Nodes per half interval for the singular quadrature rule.
    QUADRATURE_NODES: int = 64

    #: Default Fourier truncation of a loop.
    FOURIER_MODES: int = 16
    #: Outer grid used when reporting functional values.
    ACTION_GRID: int = 512
    #: Outer grid used inside the optimizer.
    OPTIMIZER_GRID: int = 256

    #: Tracing resource name. This is used by some exporters (Jaeger).
    TRACING_RESOURCE_NAME: str = "contchoreo"

    #: Optional list of hosts to send traces to. For example:
    #: otlp+http://localhost:4318,console://stdout
    TRACING_EXPORTERS: Optional[list[TracerConfig]] = None

    @validator("THREADS")
    def validate_threads(cls, value: int):
        """At least one worker is required."""
        if value < 1:
            raise ValueError(f"THREADS must be >= 1 (got {value})")
        return value

    @validator("QUADRATURE_SCHEME")
    def validate_quadrature_scheme(cls, value: str):
        """Only the implemented schemes are accepted."""
        if value not in QUADRATURE_SCHEMES:
            raise ValueError(
                f"{value} is not a known quadrature scheme: [{','.join(QUADRATURE_SCHEMES)}]"
            )
        return value

    @validator("QUADRATURE_NODES")
    def validate_quadrature_nodes(cls, value: int):
        """Rules coarser than 8 nodes are never accurate enough."""
        if value < 8:
            raise ValueError(f"QUADRATURE_NODES must be >= 8 (got {value})")
        return value

    @validator("FOURIER_MODES", "ACTION_GRID", "OPTIMIZER_GRID")
    def validate_positive(cls, value: int, field):
        """Sizes must be positive."""
        if value < 1:
            raise ValueError(f"{field.name} must be positive (got {value})")
        return value

    @validator("TRACING_EXPORTERS", each_item=True, pre=True)
    def validate_tracing_exporters(cls, value: str):
        """Turn an exporter url into a :class:`TracerConfig`."""
        if isinstance(value, TracerConfig):
            return value

        parts = urlparse(value)
        if parts.scheme not in TraceScheme.__members__.values():
            raise ValueError(
                f"{value} does not define a valid scheme: [{','.join(TraceScheme)}]"
            )

        options = parse_qs(parts.query)
        secure = options.get("secure", ["true"])[-1].lower() in ("1", "true", "yes")

        return TracerConfig(
            scheme=TraceScheme(parts.scheme),
            host=parts.netloc,
            secure=secure,
        )

    class Config:
        """Global configuration for settings."""

        env_prefix = "CONTCHOREO_"
        case_sensitive = True

        @classmethod
        def parse_env_var(cls, field_name: str, raw_val: str) -> Any:
            """Parse environment variables to their custom type."""
            if field_name == "TRACING_EXPORTERS":
                return [host for host in raw_val.split(",") if host]
            return cls.json_loads(raw_val)  # type:ignore # json_loads undefined


Settings.update_forward_refs()
settings = Settings()  # pyright: ignore
