"""Exception hierarchy shared by every vemul layer."""


class VemulError(Exception):
    """Base class for all emulator errors."""


class PreconditionError(VemulError, ValueError):
    pass


# topology

class TopologyError(VemulError):
    pass


class DuplicateName(TopologyError):
    def __init__(self, name, what="node"):
        super().__init__(f"duplicate {what} name: {name!r}")
        self.name = name


class InvalidSpec(TopologyError):
    def __init__(self, field, reason):
        super().__init__(f"invalid spec field {field!r}: {reason}")
        self.field = field
        self.reason = reason


class UnknownEndpoint(TopologyError):
    def __init__(self, link, endpoint):
        super().__init__(f"link {link!r} references unknown node {endpoint!r}")
        self.link = link
        self.endpoint = endpoint


class DuplicateTunnelKey(TopologyError):
    def __init__(self, link, key):
        super().__init__(f"link {link!r}: tunnel key {key} already in use")
        self.link = link
        self.key = key


class SelfLoop(TopologyError):
    def __init__(self, link, node):
        super().__init__(f"link {link!r} connects {node!r} to itself")
        self.link = link
        self.node = node


class SizeTooSmall(TopologyError, PreconditionError):
    def __init__(self, size, minimum=2):
        super().__init__(f"switch_count must be >= {minimum}, got {size}")
        self.size = size


class SchemaViolation(VemulError):
    """A topology or experiment document failed validation.

    ``field`` is a dotted path into the document, ``line`` the 1-based source
    line when the document came from text.
    """

    def __init__(self, field, reason, line=None):
        where = f" (line {line})" if line else ""
        super().__init__(f"{field}: {reason}{where}")
        self.field = field
        self.reason = reason
        self.line = line


# runtime

class RuntimeFailure(VemulError):
    pass


class EngineUnreachable(RuntimeFailure):
    retriable = True


class ImageNotFound(RuntimeFailure):
    pass


class NameConflict(RuntimeFailure):
    pass


class LimitRejected(RuntimeFailure):
    pass


class NodeNotRunning(RuntimeFailure):
    pass


class InvalidState(RuntimeFailure):
    pass


class EngineError(RuntimeFailure):
    """Engine answered with an unexpected status."""

    def __init__(self, status, message):
        super().__init__(f"engine error {status}: {message}")
        self.status = status


class ExecTimeout(RuntimeFailure):
    def __init__(self, argv, timeout_ms, stdout=b"", stderr=b""):
        super().__init__(f"command {argv!r} exceeded {timeout_ms} ms")
        self.argv = argv
        self.timeout_ms = timeout_ms
        self.stdout = stdout
        self.stderr = stderr


# fabric

class FabricError(VemulError):
    pass


class NamespaceUnresolvable(FabricError):
    pass


class IfnameCollision(FabricError):
    pass


class PrivilegeDenied(FabricError):
    pass


class KeyInUse(FabricError):
    pass


class PeerUnreachable(FabricError):
    pass


class SubnetExhausted(FabricError):
    pass


class AlreadyDestroyed(FabricError):
    pass


# orchestrator

class OrchestrationError(VemulError):
    """A bring-up step failed; ``subject`` names the node or link."""

    def __init__(self, subject, cause):
        super().__init__(f"{subject}: {cause}")
        self.subject = subject
        self.cause = cause


class RollbackFailed(VemulError):
    def __init__(self, strays, cause=None):
        super().__init__(f"rollback left residue: {', '.join(strays)}")
        self.strays = list(strays)
        self.cause = cause


class NoSuchNode(VemulError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class NoSuchSwitch(NoSuchNode):
    pass


class NoSuchHost(NoSuchNode):
    pass


class NotAController(VemulError):
    pass


class NoSuchBridge(VemulError):
    pass


class ControllerConnectTimeout(VemulError):
    pass


class OvsdbError(VemulError):
    pass


# metrics

class MeasurementError(VemulError):
    pass


class Unreachable(MeasurementError):
    pass


class ToolMissing(MeasurementError):
    pass


class OutOfResources(MeasurementError):
    pass


# shell

class CommandSyntaxError(VemulError, ValueError):
    """A REPL or experiment-file command did not parse."""
