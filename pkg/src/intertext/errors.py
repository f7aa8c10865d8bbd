"""Exception hierarchy shared by all engine modules."""

from __future__ import annotations

from typing import Sequence


class IntertextError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"


class SchemaError(IntertextError):
    """Input file or payload is missing a required column or field."""

    code = "schema_error"


class ValidationError(IntertextError):
    """Data violates a documented invariant (duplicate id, dangling ref, ...)."""

    code = "validation_error"


class EmptyDocumentError(ValidationError):
    """A document that must contain segments is empty."""

    code = "empty_document"


class ConfigurationError(IntertextError):
    """Parameters are out of range or a required capability is missing."""

    code = "configuration_error"


class TransportError(IntertextError):
    """A provider call failed in a retryable way (network, timeout, 5xx).

    Carries the segment ids of the batch that failed so callers can retry
    exactly that slice.
    """

    code = "transport_error"

    def __init__(self, message: str, *, segment_ids: Sequence[str] = (), retryable: bool = True):
        super().__init__(message)
        self.segment_ids = tuple(segment_ids)
        self.retryable = retryable


class ProviderContractError(IntertextError):
    """A provider returned data violating its contract (count, range, shape)."""

    code = "provider_contract_error"


class UndefinedMetricError(IntertextError):
    """A metric was requested on input where it is mathematically undefined."""

    code = "undefined_metric"
