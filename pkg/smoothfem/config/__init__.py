from .settings import Config
from .experiment import ExperimentConfig, load_config
