import logging

import click
from dotenv import load_dotenv

from .config.settings import Config

# Load environment variables before anything reads them
load_dotenv()

# Configure logging
logging.basicConfig(level=getattr(logging, Config.LOG_LEVEL, logging.INFO),
                    format='%(asctime)s %(levelname)s %(name)s: %(message)s')

__version__ = '0.1.0'


def create_cli():
    """Build the click command group with every command registered."""

    from .commands import SmoothFemGroup

    @click.group(cls=SmoothFemGroup, context_settings={'help_option_names': ['-h', '--help']})
    @click.version_option(__version__, prog_name='smoothfem')
    def cli():
        """Strain-smoothed finite elements for 2D linear elasticity."""

    # Register command groups
    from .commands.experiments import projection_errors, convergence
    from .commands.checks import equivalence_check, verify
    from .commands.mesh import mesh

    cli.add_command(projection_errors)
    cli.add_command(convergence)
    cli.add_command(equivalence_check)
    cli.add_command(verify)
    cli.add_command(mesh)

    return cli
