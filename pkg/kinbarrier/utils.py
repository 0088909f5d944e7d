"""
Small helpers shared by all apps.
"""
import numpy as np


class DomainError(ValueError):
    """An argument lies outside the domain where an operation is defined."""

    def __init__(self, operation, reason):
        self._operation = operation
        self._reason = reason

    def __str__(self):
        return f"Domain error in '{self._operation}': {self._reason}"


class Singleton(type):
    """Ensure that there is only one instance per class.

    Usage:

    class Registry(metaclass=Singleton):
        pass

    """
    _instances = {}

    def __call__(cls, *args, **kwargs):
        if cls not in cls._instances:
            cls._instances[cls] = super(Singleton, cls).__call__(*args, **kwargs)
        return cls._instances[cls]


def jsonable(obj):
    """Convert numpy scalars/arrays and nested containers into plain JSON types.

    Non-finite floats are encoded as the strings "inf", "-inf" and "nan" so
    that the emitted documents stay valid JSON.
    """
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        if np.isnan(value):
            return "nan"
        if np.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return obj


def make_verdict(name, passed, worst_ratio=None, location=None, **details):
    """Verdict of a check as emitted in JSON: {name, pass, worst_ratio, location, ...details}."""
    return dict(name=name, **{'pass': bool(passed)}, worst_ratio=worst_ratio, location=location, **details)
