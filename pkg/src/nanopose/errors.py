"""Exception hierarchy shared across the toolkit.

Keeping these in one place lets the CLI map error classes to stable exit
codes without importing every module.
"""


class NanoposeError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(NanoposeError):
    """A serialized artifact (JSON graph, QTNS file, config) is malformed."""


class ConstraintError(NanoposeError):
    """A hard resource or range constraint was violated."""


class DegenerateLayerError(NanoposeError):
    """A tensor has no usable dynamic range (w_max <= w_min)."""


class DeadActivationError(NanoposeError):
    """Calibration found activations that never exceed zero."""

    def __init__(self, layers):
        self.layers = list(layers)
        super().__init__(f"dead activations in layers: {', '.join(self.layers)}")


class AccumulatorOverflowError(ConstraintError):
    """An integer accumulation left the representable range."""


class RequantParameterError(ConstraintError):
    """Requantization parameters do not fit their 32-bit contract."""


class ConversionError(NanoposeError):
    """Float-to-integer graph conversion failed."""

    def __init__(self, layer, message):
        self.layer = layer
        super().__init__(f"layer {layer}: {message}")


class UntileableLayerError(ConstraintError):
    """No tile of the layer fits the scratchpad budget."""


class PlanConstraintError(ConstraintError):
    """A deployment plan violates the memory hierarchy. Carries the plan."""

    def __init__(self, message, plan=None, violations=None):
        self.plan = plan
        self.violations = violations or []
        super().__init__(message)


class FitError(NanoposeError):
    """Cost-model parameter calibration failed."""
