class SmoothFemError(ValueError):
    """Base error; `code` is the short tag printed by the command line."""
    code = 'SMOOTHFEM'

    def __init__(self, message, **context):
        super().__init__(message)
        self.message = message
        self.context = context

    def to_line(self):
        return f"smoothfem-error[{self.code}]: {self.message}"


class MeshError(SmoothFemError):
    code = 'MESH'


class LocateError(MeshError):
    code = 'LOCATE'


class MeshFormatError(MeshError):
    code = 'MESHIO'

    def __init__(self, message, line=None, **context):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message, line=line, **context)
        self.line = line


class ElementError(SmoothFemError):
    code = 'ELEMENT'


class SmoothingError(SmoothFemError):
    code = 'SMOOTHING'


class AssemblyError(SmoothFemError):
    code = 'ASSEMBLY'


class SolverError(SmoothFemError):
    code = 'SOLVER'


class AnalysisError(SmoothFemError):
    code = 'ANALYSIS'


class ConfigError(SmoothFemError):
    code = 'CONFIG'

    def __init__(self, message, field=None, **context):
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message, field=field, **context)
        self.field = field
