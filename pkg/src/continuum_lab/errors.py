"""Exception hierarchy for continuum_lab."""


class ContinuumLabError(Exception):
    """Base class for every error raised by this package."""


class SpecSyntaxError(ContinuumLabError):
    """The experiment document is not well-formed YAML."""


class SchemaError(ContinuumLabError):
    """Unknown key, missing key or wrong scalar type in an experiment document."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class SpecInvalid(ContinuumLabError):
    """Raised when an operation requires a valid spec and violations were found."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"spec has {len(self.violations)} violation(s): {lines}")


class CapacityExceeded(ContinuumLabError):
    def __init__(self, layer, instances=None, slots=None):
        self.layer = layer
        detail = "" if instances is None else f" ({instances} instances > {slots} slots)"
        super().__init__(f"CapacityExceeded({layer}){detail}")


class MissingLayerHosts(ContinuumLabError):
    def __init__(self, layer):
        self.layer = layer
        super().__init__(f"MissingLayerHosts({layer})")


class UnknownBehavior(ContinuumLabError):
    def __init__(self, kind):
        self.kind = kind
        super().__init__(f"UnknownBehavior({kind})")


class PhaseError(ContinuumLabError):
    def __init__(self, name, message=""):
        self.name = name
        super().__init__(f"PhaseError({name})" + (f": {message}" if message else ""))


class CorruptArchive(ContinuumLabError):
    def __init__(self, path, message="stored digest does not match contents"):
        self.path = str(path)
        super().__init__(f"CorruptArchive({self.path}): {message}")


class NoSamples(ContinuumLabError):
    def __init__(self, metric):
        self.metric = metric
        super().__init__(f"NoSamples({metric})")


class UnknownMetric(ContinuumLabError):
    def __init__(self, metric):
        self.metric = metric
        super().__init__(f"UnknownMetric({metric})")


class ContinuousDimension(ContinuumLabError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"ContinuousDimension({name})")


class ExhaustedSpace(ContinuumLabError):
    """Every point of a finite parameter space has already been evaluated."""


class NonNumericParameter(ContinuumLabError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"NonNumericParameter({name})")


class ParameterBindingError(ContinuumLabError):
    """A parameter name does not address any field of the experiment spec."""


class UnknownPreset(ContinuumLabError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"UnknownPreset({name})")


class EvaluationError(ContinuumLabError):
    """Wraps a failure raised while running one optimizer evaluation."""

    def __init__(self, evaluation_index, cause):
        self.evaluation_index = evaluation_index
        self.cause = cause
        super().__init__(f"evaluation {evaluation_index} failed: {cause}")
