"""
Registry for verification checks.
"""
import inspect
import logging

from ..utils import Singleton

_log = logging.getLogger(__name__)

#
# The first argument of a check decides what it is applied to:
#   rng:  closed-form and geometry checks, fed with a random generator
#   run:  post-processing of one solver run
#   pair: comparison of two solver runs
#
SUBJECT_TYPES = ('rng', 'run', 'pair')
CHECK_FLAVORS = ('verdict', 'trace')


class CheckException(Exception):
    """Generic exception for problems while handling checks."""
    pass


class UnknownCheck(CheckException):
    """No check with given name known."""

    def __init__(self, name):
        self._name = name

    def __str__(self):
        return f"No check defined with name '{self._name}'."


class ImplementationAlreadyDefined(CheckException):
    """An implementation of a check was already defined."""

    def __init__(self, name, subject_type_name):
        self._name = name
        self._subject_type_name = subject_type_name

    def __str__(self):
        return f"An implementation for check '{self._name}' with subject type " + \
               f"'{self._subject_type_name}' was already defined."


class ImplementationMissing(CheckException):
    """A check implementation was not found for given subject type."""

    def __init__(self, name, subject_type):
        self._name = name
        self._subject_type = subject_type

    def __str__(self):
        return f"Implementation for check '{self._name}' for subject type '{self._subject_type}' not found."


class UnknownSubjectType(CheckException):
    """The first argument of a check implementation names no known subject type."""

    def __init__(self, name, subject_type_name):
        self._name = name
        self._subject_type_name = subject_type_name

    def __str__(self):
        return f"Check '{self._name}' has first argument '{self._subject_type_name}', " + \
               f"expected one of {SUBJECT_TYPES}."


class UnknownFlavor(CheckException):
    """Flavor of a check is not known."""

    def __init__(self, name, flavor):
        self._name = name
        self._flavor = flavor

    def __str__(self):
        return f"Check '{self._name}' was given with flavor '{self._flavor}' which is unknown."


class CheckRegistry(metaclass=Singleton):
    """Central register for checks.

    Collects check names, their flavors and subject types and checks
    consistency while collecting.
    """
    def __init__(self):
        self._implementations = {}
        # key: (name, subject_type_name)
        # value: reference to implementation of the check

        self._flavors = {}
        # key: check name
        # value: flavor, 'trace' if the check emits a trace next to its verdict

    def add_implementation(self, name, flavor, func):
        """Register implementation of a check.

        Depending on the name of the first argument of the given function,
        this implementation is registered as a check on random generators,
        single runs or pairs of runs.

        You can use the @register_implementation decorator from functions.py in order to
        add an implementation to the registry.

        Parameters
        ----------
        name: str
            Check name as used in configuration files
        flavor: str
            One of CHECK_FLAVORS
        func: function
            Python function which implements the check
        """
        func_spec = inspect.getfullargspec(func)
        subject_type_name = func_spec.args[0]
        if subject_type_name not in SUBJECT_TYPES:
            raise UnknownSubjectType(name, subject_type_name)

        key = (name, subject_type_name)
        if key in self._implementations:
            raise ImplementationAlreadyDefined(name, subject_type_name)

        if flavor not in CHECK_FLAVORS:
            raise UnknownFlavor(name, flavor)

        self._implementations[key] = func
        self._flavors[name] = flavor
        _log.debug("Registered check '%s' for subject type '%s'.", name, subject_type_name)

    def get_implementation(self, name, subject_type):
        """Return Python function for given check and subject type."""
        if name not in self._flavors:
            raise UnknownCheck(name)
        try:
            return self._implementations[(name, subject_type)]
        except KeyError as exc:
            raise ImplementationMissing(name, subject_type) from exc

    def get_flavor(self, name):
        try:
            return self._flavors[name]
        except KeyError as exc:
            raise UnknownCheck(name) from exc

    def get_names(self, subject_type=None):
        """Returns check names as list, optionally only those for the given subject type."""
        if subject_type is None:
            return list(self._flavors.keys())
        return [name for name, subject in self._implementations if subject == subject_type]

    def subject_type(self, name):
        """Subject type of the (unique) implementation of a check."""
        for check_name, subject in self._implementations:
            if check_name == name:
                return subject
        raise UnknownCheck(name)
