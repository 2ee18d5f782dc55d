# Problem configuration
PROBLEM = 'block'
DOMAIN = (0.0, 0.0, 1.0, 1.0)
DIRICHLET = 'bottom'

# Material configuration
YOUNGS_MODULUS = 1.0e3
POISSON_RATIO = 0.2
MODE = 'plane_stress'

# Mesh configuration
MESH_KIND = 'tri'
PATTERN = 'slash'
N_LIST = (2, 4, 8, 16)
DISTORTION = 0.0
SEED = 1
DISTORTION_RETRIES = 50

# Methods per mesh family
TRI_METHODS = ('fem_t3', 'esfem', 'nsfem', 'sse')
QUAD_METHODS = ('fem_plq4', 'fem_blq4', 'csfem', 'esfem', 'sse')

# Reference and evaluation
REFERENCE_N = 64
PROBE = (1.0, 1.0)
QUADRATURE_REFINEMENT = 1
EQUIVALENCE_TOLERANCE = 1e-10
