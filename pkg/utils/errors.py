"""
Error types
Every failure the simulator reports maps onto one CLI exit status
"""

EXIT_OK = 0
EXIT_IO_ERROR = 1
EXIT_CONFIG_ERROR = 2
EXIT_INFEASIBLE = 3
EXIT_ORACLE_MISMATCH = 4
EXIT_INVARIANT = 5


class HurryError(Exception):
    """Base class of all simulator errors"""

    exit_status = EXIT_INVARIANT


class ConfigError(HurryError, ValueError):
    """Hardware or run configuration is malformed"""

    exit_status = EXIT_CONFIG_ERROR


class ModelSchemaError(ConfigError):
    """Model description violates the schema"""


class ShapeError(ConfigError):
    """Tensor shapes are inconsistent; carries the offending layer id"""

    def __init__(self, layer_id, message):
        super().__init__(f"layer {layer_id}: {message}")
        self.layer_id = layer_id


class UnsupportedLayerError(ConfigError):
    """Layer kind cannot be lowered to a functional block"""


class PlanFormatError(ConfigError):
    """Mapping plan or trace file cannot be parsed"""


class InfeasiblePlanError(HurryError):
    """Size balancing constraints cannot be met"""

    exit_status = EXIT_INFEASIBLE

    def __init__(self, constraint, message):
        super().__init__(f"infeasible plan ({constraint}): {message}")
        self.constraint = constraint


class PlacementOverflowError(HurryError):
    """Packed floorplan does not fit the array"""


class VoltageConflictError(HurryError):
    """Two BAS operations demand different levels on one line"""


class CapacityError(HurryError, ValueError):
    """Data does not fit the functional block"""


class LayoutMismatchError(HurryError, ValueError):
    """Tournament layout and stored leaves disagree"""


class DeadlockError(HurryError):
    """FB dependencies are cyclic"""


class OracleMismatchError(HurryError):
    """Simulated outputs differ from the reference oracle"""

    exit_status = EXIT_ORACLE_MISMATCH


class InvariantViolation(HurryError):
    """Internal consistency check failed"""
