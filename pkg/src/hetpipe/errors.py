"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so raising the right type
matters more than the message text.
"""


class HetpipeError(Exception):
    """Base class for all package errors."""


class ConfigError(HetpipeError):
    """Bad CLI arguments, missing files, unparsable inputs. Exit code 2."""


class GraphParseError(ConfigError):
    """Graph file syntax error. Carries line number and field name."""

    def __init__(self, message, line_no=None, field=None):
        self.line_no = line_no
        self.field = field
        loc = ""
        if line_no is not None:
            loc += f" (line {line_no}"
            loc += f", field '{field}')" if field else ")"
        super().__init__(message + loc)


class ValidationError(HetpipeError):
    """Scenario or graph invariant violations. Exit code 3."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class CalibrationError(HetpipeError):
    """Measurement table missing rows or containing bad values. Exit code 4."""


class CapabilityError(HetpipeError):
    """An engine cannot execute the requested precision or layer kind."""
