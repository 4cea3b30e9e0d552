"""Optional OpenTelemetry instrumentation.

Long sweeps (multistart optimisation, σ scans) are wrapped in spans so a run can be
inspected in a trace viewer. When the ``tracing`` extra is not installed, or no exporter
is configured, :func:`get_tracer` hands back a tracer which silently accepts everything.
"""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass
import enum
from typing import Any, Iterator, Optional

try:
    from opentelemetry import trace
    from opentelemetry.exporter.otlp.proto.grpc.trace_exporter import (
        OTLPSpanExporter as OTLPGRPCSpanExporter,
    )
    from opentelemetry.exporter.otlp.proto.http.trace_exporter import (
        OTLPSpanExporter as OTLPHTTPSpanExporter,
    )
    from opentelemetry.sdk.resources import SERVICE_NAME, Resource
    from opentelemetry.sdk.trace import TracerProvider
    from opentelemetry.sdk.trace.export import (
        BatchSpanProcessor,
        ConsoleSpanExporter,
        SpanExporter,
    )
except ImportError:
    trace: Optional[Any] = None  # type:ignore # already defined by import


class TraceScheme(str, enum.Enum):
    """Supported exporter schemes, as written in ``CONTCHOREO_TRACING_EXPORTERS``."""

    otlp_https = "otlp+https"
    otlp_http = "otlp+http"
    otlp_grpc = "otlp+grpc"
    console = "console"


@dataclass
class TracerConfig:
    """Configuration for one trace exporter."""

    scheme: TraceScheme
    host: str
    secure: bool = True


def initialize_tracer():
    """Install the configured exporters. Call once at start-up."""
    from .conf import settings  # prevent circular import due to model validation
    from .logging import logger  # prevent circular import

    if not trace or not settings.TRACING_EXPORTERS:
        return

    logger.debug("Initializing tracing...")
    resource = Resource(attributes={SERVICE_NAME: settings.TRACING_RESOURCE_NAME})
    provider = TracerProvider(resource=resource)

    for tracer_config in settings.TRACING_EXPORTERS:
        exporter: SpanExporter
        if tracer_config.scheme == TraceScheme.console:
            exporter = ConsoleSpanExporter()
        elif tracer_config.scheme == TraceScheme.otlp_grpc:
            exporter = OTLPGRPCSpanExporter(
                endpoint=tracer_config.host,
                insecure=not tracer_config.secure,
            )
        else:
            scheme = "https" if tracer_config.scheme == TraceScheme.otlp_https else "http"
            exporter = OTLPHTTPSpanExporter(endpoint=f"{scheme}://{tracer_config.host}")

        provider.add_span_processor(BatchSpanProcessor(exporter))

    trace.set_tracer_provider(provider)


def get_tracer() -> Any:
    """Get a tracer that can be used whether or not tracing is enabled."""
    from .conf import settings  # prevent circular import due to model validation

    if trace is not None:
        return trace.get_tracer(settings.TRACING_RESOURCE_NAME)
    return pretendtracer()


class _PretendSpan:
    def set_attribute(self, key: str, value: Any):
        return

    def record_exception(self, exception: BaseException):
        return


class pretendtracer:
    """Tracer used when opentelemetry is unavailable."""

    @contextmanager
    def start_as_current_span(self, name: str, *args, **kwargs) -> Iterator[_PretendSpan]:
        """Yield a span which ignores every attribute."""
        yield _PretendSpan()
