# core/exceptions.py
"""
Error hierarchy; exit_code is what the CLI returns for each class
"""


class VPRError(Exception):
    """Base class for all matcher and evaluation errors"""
    exit_code = 2


class ConfigurationError(VPRError):
    """Invalid parameters, mismatched technique shapes or an empty technique set"""


class FormatError(VPRError, ValueError):
    """Structurally malformed input file"""


class ParseError(FormatError):
    """Non-numeric field in a numeric file"""


class LengthError(FormatError):
    """Truncated binary payload"""


class CapacityError(FormatError):
    """Declared matrix size exceeds what can be addressed"""


class EvaluationError(VPRError):
    """Evaluation cannot be carried out against the given ground truth"""
    exit_code = 3
