"""Exception hierarchy shared by all affordkit modules."""


class AffordkitError(Exception):
    """Base class for every error raised by affordkit."""
