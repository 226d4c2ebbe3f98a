"""Error taxonomy shared by the library, the service and the CLI.

Every error carries an ``exit_code`` so the CLI can map failures to
distinct process exit statuses.
"""


class HapticSimError(Exception):
    exit_code = 1


# physics
class UnsupportedShapePair(HapticSimError):
    exit_code = 10


class NumericalDivergence(HapticSimError):
    exit_code = 11


class SceneError(HapticSimError):
    exit_code = 12


# trajectories
class ParseError(HapticSimError):
    exit_code = 20

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + where)


class NonMonotonicTimestamps(HapticSimError):
    exit_code = 21


# actuator / synth
class ZeroRadius(HapticSimError):
    exit_code = 30


class OutOfRangeCurrent(HapticSimError):
    exit_code = 31


class NegativeForce(HapticSimError):
    exit_code = 32


class UnknownChannel(HapticSimError):
    exit_code = 33


# device link
class LinkError(HapticSimError):
    exit_code = 40


class ChannelOutOfRange(LinkError):
    exit_code = 41


class BadSync(LinkError):
    exit_code = 42


class BadCrc(LinkError):
    exit_code = 43


class TruncatedFrame(LinkError):
    exit_code = 44


class DuplicateChannel(LinkError):
    exit_code = 45


# scenarios
class ScenarioError(HapticSimError):
    exit_code = 50


class ControllerNeverHeld(ScenarioError):
    exit_code = 51


class NoSlipOccurred(ScenarioError):
    exit_code = 52


class Timeout(ScenarioError):
    exit_code = 53


# artifacts
class IoError(HapticSimError):
    exit_code = 60


# service transport
class ServiceUnavailable(HapticSimError):
    exit_code = 70
