"""Converters and validators for the canonical dataset directory format."""

from .convert import ConversionError, ConversionManifest, convert
from .validate import ValidationReport, validate

__version__ = "0.1.0"
