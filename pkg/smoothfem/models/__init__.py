from .mesh import Mesh
from .subdivision import Subdivision, OverlapTable
from .material import MaterialMatrix
from .quadrature import QuadratureRule
from .fields import ElementStrainMap, StrainField, SmoothingOperator, SseElementField
from .system import DofMap, LinearSystem, StrainOperator, BlockProblem
from .report import ReferenceSolution, MethodSolution, ErrorReport
