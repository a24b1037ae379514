"""
JSON file helpers shared by every app that writes result files.

Files are rendered with DRF's JSONRenderer, so floats keep their shortest
round-trip repr and key order follows the serializer declaration. Nothing
time-dependent is written, which keeps repeated runs byte-identical.
"""

from io import BytesIO

import numpy as np
from django.core.exceptions import NON_FIELD_ERRORS, ValidationError
from rest_framework import serializers
from rest_framework.exceptions import ParseError
from rest_framework.parsers import JSONParser
from rest_framework.renderers import JSONRenderer


def render_json(data):
    return JSONRenderer().render(data, renderer_context={'indent': 2}) + b'\n'


def parse_json(raw):
    """Parse bytes (or a str) into Python data; malformed JSON becomes a ValidationError."""
    if isinstance(raw, str):
        raw = raw.encode('utf-8')
    try:
        return JSONParser().parse(BytesIO(raw))
    except ParseError as exc:
        raise ValidationError(f"not a valid JSON document: {exc.detail}") from exc


def check_header(data, expected_format, supported_versions):
    if not isinstance(data, dict):
        raise ValidationError("expected a JSON object at the top level")
    if data.get('format') != expected_format:
        raise ValidationError(f"expected format {expected_format!r}, got {data.get('format')!r}")
    if data.get('version') not in supported_versions:
        raise ValidationError(f"unsupported {expected_format} version {data.get('version')!r}")


def flatten_errors(errors, prefix=''):
    """
    Nested DRF errors as {dotted.key: [messages]}. Nested serializers and list
    positions become key segments (`system.num_users`, `values.1`), so the
    result can back a django ValidationError.
    """
    if isinstance(errors, dict):
        items = errors.items()
    elif isinstance(errors, (list, tuple)) and any(isinstance(item, (dict, list, tuple)) for item in errors):
        items = enumerate(errors)
    else:
        messages = errors if isinstance(errors, (list, tuple)) else [errors]
        return {prefix or NON_FIELD_ERRORS: [str(message) for message in messages]}
    flat = {}
    for key, value in items:
        if value:
            flat.update(flatten_errors(value, f"{prefix}.{key}" if prefix else str(key)))
    return flat


def validated(serializer_class, data):
    """Run a DRF serializer over `data` and return validated_data or raise ValidationError with its errors."""
    serializer = serializer_class(data=data)
    if not serializer.is_valid():
        raise ValidationError(flatten_errors(serializer.errors))
    return serializer.validated_data


def interleave(tensor):
    """Complex (..., N) array -> nested lists ending in [re0, im0, re1, im1, ...]."""
    tensor = np.asarray(tensor, dtype=complex)
    pairs = np.stack([tensor.real, tensor.imag], axis=-1)
    return pairs.reshape(tensor.shape[:-1] + (2 * tensor.shape[-1],)).tolist()


def deinterleave(nested):
    flat = np.asarray(nested, dtype=float)
    if flat.shape[-1] % 2:
        raise ValidationError("interleaved complex arrays need an even last dimension")
    pairs = flat.reshape(flat.shape[:-1] + (flat.shape[-1] // 2, 2))
    return pairs[..., 0] + 1j * pairs[..., 1]


class FloatListField(serializers.ListField):
    child = serializers.FloatField()


class IntListField(serializers.ListField):
    child = serializers.IntegerField()


class ComplexTensorField(serializers.Field):
    """Complex array stored with its last axis interleaved as [re, im] pairs."""

    def to_representation(self, value):
        return interleave(value)

    def to_internal_value(self, data):
        try:
            return deinterleave(data)
        except (TypeError, ValueError) as exc:
            raise serializers.ValidationError(f"not a numeric nested array: {exc}") from exc
        except ValidationError as exc:
            raise serializers.ValidationError(exc.messages) from exc


class MatrixField(serializers.ListField):
    """List of equal-length rows, converted to a numpy array on input."""

    def __init__(self, dtype=float, **kwargs):
        self.dtype = dtype
        kwargs.setdefault('child', serializers.ListField(child=serializers.FloatField()))
        super().__init__(**kwargs)

    def to_internal_value(self, data):
        rows = super().to_internal_value(data)
        if len({len(row) for row in rows}) > 1:
            raise serializers.ValidationError("rows must have equal length")
        return np.array(rows, dtype=self.dtype)

    def to_representation(self, value):
        return np.asarray(value).tolist()
