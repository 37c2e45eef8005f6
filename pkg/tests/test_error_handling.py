"""Tests for the structured error types and response helpers."""

import logging

import pytest

from mmap_birl.utils.error_handling import (
    BirlError,
    ConfigurationError,
    DivergenceError,
    ErrorCategory,
    ErrorContext,
    ErrorSeverity,
    FormatError,
    ValidationError,
    ZeroLikelihoodError,
    create_success_response,
    format_error_response,
    get_error_guidance,
    handle_error,
)


class TestErrorTypes:
    def test_format_error_prefixes_location(self):
        error = FormatError("bad token", path="batch.txt", line_number=3)
        assert str(error) == "batch.txt:3: bad token"
        assert error.category == ErrorCategory.FILE_FORMAT

    def test_format_error_without_line_keeps_message(self):
        assert str(FormatError("unreadable", path="x.txt")) == "unreadable"

    def test_divergence_is_high_severity(self):
        error = DivergenceError("nan", iteration_trace=[{"iteration": 1}])
        assert error.severity == ErrorSeverity.HIGH
        assert error.iteration_trace == [{"iteration": 1}]

    def test_subclasses_share_base(self):
        for error in (ValidationError("x"), ZeroLikelihoodError("x"), ConfigurationError("x")):
            assert isinstance(error, BirlError)


class TestResponses:
    def test_validation_response_carries_field(self):
        response = format_error_response(ValidationError("shape", field_name="reward", field_value=(2, 3)))
        assert response["success"] is False
        assert response["error"]["type"] == "ValidationError"
        assert response["error"]["details"]["field_name"] == "reward"
        assert response["error"]["suggested_actions"]

    def test_zero_likelihood_response_carries_index(self):
        response = format_error_response(ZeroLikelihoodError("zero", trajectory_index=4, timestep=2))
        assert response["error"]["details"] == {"trajectory_index": 4, "timestep": 2}
        assert response["error"]["category"] == "data"

    def test_guidance_for_foreign_exceptions(self):
        assert get_error_guidance(RuntimeError("boom"))

    def test_handle_error_logs(self, caplog):
        with caplog.at_level(logging.ERROR):
            handle_error(ValidationError("bad"), context={"operation": "x"}, logger=logging.getLogger("test"))
        assert "ValidationError" in caplog.text

    def test_success_response(self):
        response = create_success_response({"a": 1}, processing_time=0.5, warnings=["w"])
        assert response == {"success": True, "data": {"a": 1}, "processing_time": 0.5, "warnings": ["w"]}


class TestErrorContext:
    def test_wraps_foreign_exceptions(self):
        with pytest.raises(BirlError) as info:
            with ErrorContext("op", context={"k": "v"}):
                raise KeyError("missing")
        assert info.value.details["original_exception"] == "KeyError"
        assert info.value.details["operation"] == "op"

    def test_passes_birl_errors_through_with_context(self):
        with pytest.raises(ValidationError) as info:
            with ErrorContext("op", context={"k": "v"}):
                raise ValidationError("bad")
        assert info.value.details["k"] == "v"
