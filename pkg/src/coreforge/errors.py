"""Exception types shared across the forge stages."""

from __future__ import annotations


class ForgeError(Exception):
    """Base class. ``context`` carries identifiers (turn, line, stage) for reports."""

    def __init__(self, message: str = "", **context):
        super().__init__(message)
        self.context = dict(context)

    def __str__(self) -> str:
        base = super().__str__()
        if not self.context:
            return base
        extra = ", ".join(f"{k}={v}" for k, v in sorted(self.context.items()))
        return f"{base} ({extra})"


# ingest
class MalformedHtml(ForgeError):
    pass


class EmptyTree(ForgeError):
    pass


class EmptyTarget(ForgeError):
    pass


# sampling
class ArityMismatch(ForgeError):
    pass


class PoolTooSmall(ForgeError):
    pass


class Unsatisfiable(ForgeError):
    pass


# gateway
class GatewayError(ForgeError):
    """Any failure talking to the text-generation endpoint."""


class TransportError(GatewayError):
    pass


class EndpointError(GatewayError):
    pass


class BudgetExceeded(GatewayError):
    pass


# prompts / parsing
class ParseError(ForgeError):
    pass


# dataset
class EmptyConversation(ForgeError):
    pass


class SchemaVersionMismatch(ForgeError):
    pass


class CorruptRecord(ForgeError):
    pass


# retrieval / evaluation
class EmptyCorpus(ForgeError):
    pass


class EmptyResponse(ForgeError):
    pass


class EmptyRun(ForgeError):
    pass


# orchestration
class MissingArtifact(ForgeError):
    pass


class ConfigError(ForgeError):
    pass


class StaleArtifact(ForgeError):
    """An input file no longer matches the hash its producing stage recorded."""
