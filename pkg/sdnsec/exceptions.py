"""Error hierarchy for the SDNsec package.

Data-plane problems are not raised: switches answer with a ``Drop`` outcome and the
PVC answers with a ``ValidationVerdict``. Exceptions are for broken inputs and
misuse of the controller state machine.
"""


class SdnsecError(Exception):
    """Base class for every error raised by this package."""


# ==========================================
# WIRE
# ==========================================
class EncodingError(SdnsecError, ValueError):
    pass


class ParseError(SdnsecError, ValueError):
    pass


# ==========================================
# CRYPTO
# ==========================================
class MacInputError(SdnsecError, ValueError):
    pass


class ProvisioningError(SdnsecError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else 'provisioning error'


# ==========================================
# CONTROLLER
# ==========================================
class UnreachableError(SdnsecError):
    pass


class AdmissionError(SdnsecError):
    pass


class TreeNotReadyError(SdnsecError):
    """Raised when an ingress would be enabled on a tree that is not fully installed."""


class AnalysisError(SdnsecError, ValueError):
    pass


# ==========================================
# SCENARIOS
# ==========================================
class ScenarioError(SdnsecError):
    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.message = message
        self.line = line
        self.column = column

    def __str__(self):
        if self.line is None:
            return self.message
        return f"line {self.line}, column {self.column}: {self.message}"
