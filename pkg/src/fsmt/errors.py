"""Shared error base class.

Every expected failure raised by this package derives from FsmtError so
the CLI can separate "bad input / bad config" from genuine bugs.
"""


class FsmtError(Exception):
    pass
