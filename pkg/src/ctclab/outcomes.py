from enum import Enum


class Outcome(str, Enum):
    """What a single run (or a single CTC register value) outputs."""

    ACCEPT = "accept"
    REJECT = "reject"
    NO_RESPONSE = "no_response"
    DIVERGE = "diverge"


class Verdict(str, Enum):
    """Result of a decision procedure."""

    ACCEPT = "accept"
    REJECT = "reject"
    HALT = "halt"
    LOOP_TRUNCATED = "loop_truncated"
    EXHAUSTED = "exhausted"
    NOT_FOUND = "not_found"
