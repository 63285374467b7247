"""Exception types raised across the package.

Every error carries a short machine-readable ``code`` so the command line
front-end can report failures as JSON.
"""


class FiberLabError(ValueError):
    code = "error"


class InvalidDimension(FiberLabError):
    code = "invalid-dimension"


class InvalidShape(FiberLabError):
    code = "invalid-shape"


class DegenerateRow(FiberLabError):
    code = "degenerate-row"


class InvalidFraction(FiberLabError):
    code = "invalid-fraction"


class InvalidCount(FiberLabError):
    code = "invalid-count"


class InvalidConfig(FiberLabError):
    code = "invalid-config"


class PortMismatch(FiberLabError):
    code = "port-mismatch"


class InvalidParameter(FiberLabError):
    code = "invalid-parameter"


class BasisOverflow(FiberLabError):
    code = "basis-overflow"
