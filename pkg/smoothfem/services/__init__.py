from .mesh_service import MeshService
from .element_service import ElementService
from .smoothing_service import SmoothingService
from .assembly_service import AssemblyService
from .analysis_service import AnalysisService
