from pydantic import ValidationError
import pytest

from contchoreo.conf import Settings
from contchoreo.core.quadrature import QuadratureScheme, QuadratureSpec
from contchoreo.tracing import TraceScheme, get_tracer, pretendtracer


def test_settings__defaults():
    settings = Settings()
    assert settings.QUADRATURE_SCHEME == "gauss-jacobi"
    assert settings.QUADRATURE_NODES >= 8
    assert settings.THREADS >= 1


def test_settings__environment(monkeypatch):
    monkeypatch.setenv("CONTCHOREO_QUADRATURE_NODES", "128")
    monkeypatch.setenv("CONTCHOREO_REPRODUCIBLE", "true")
    settings = Settings()
    assert settings.QUADRATURE_NODES == 128
    assert settings.REPRODUCIBLE is True


@pytest.mark.parametrize(
    "name,value",
    [
        ("CONTCHOREO_QUADRATURE_SCHEME", '"simpson"'),
        ("CONTCHOREO_QUADRATURE_NODES", "4"),
        ("CONTCHOREO_THREADS", "0"),
        ("CONTCHOREO_ACTION_GRID", "0"),
    ],
)
def test_settings__invalid(monkeypatch, name, value):
    monkeypatch.setenv(name, value)
    with pytest.raises(ValidationError):
        Settings()


def test_settings__tracing_exporters(monkeypatch):
    monkeypatch.setenv(
        "CONTCHOREO_TRACING_EXPORTERS", "otlp+http://localhost:4318?secure=false,console://"
    )
    exporters = Settings().TRACING_EXPORTERS
    assert [e.scheme for e in exporters] == [TraceScheme.otlp_http, TraceScheme.console]
    assert exporters[0].host == "localhost:4318"
    assert exporters[0].secure is False


def test_settings__tracing_bad_scheme(monkeypatch):
    monkeypatch.setenv("CONTCHOREO_TRACING_EXPORTERS", "jaeger://localhost")
    with pytest.raises(ValidationError):
        Settings()


def test_quadrature_spec__follows_settings(mocker):
    mocker.patch("contchoreo.core.quadrature.settings.QUADRATURE_NODES", 96)
    mocker.patch("contchoreo.core.quadrature.settings.QUADRATURE_SCHEME", "graded-midpoint")
    quad = QuadratureSpec()
    assert quad.nodes == 96
    assert quad.scheme == QuadratureScheme.GRADED_MIDPOINT


def test_get_tracer__without_opentelemetry(mocker):
    mocker.patch("contchoreo.tracing.trace", None)
    tracer = get_tracer()
    assert isinstance(tracer, pretendtracer)
    with tracer.start_as_current_span("span") as span:
        span.set_attribute("key", 1)
        span.record_exception(RuntimeError("ignored"))
